use crate::datapipe::{Condition, Dataset, Family, Sample, Tags, TimeOfDay, Viewpoint};
use crate::error::{Error, Result};
use crate::numerics::Rng;

use super::blur::{selective_gaussian_blur, DEFAULT_MAX_DELTA, DEFAULT_RADIUS};
use super::render::{annotations, render_ir_styled, render_visible_styled, RenderConfig, RenderStyle};
use super::scene::sample_scene;

/// Weighted set of acquisition conditions to draw samples from.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionMix {
    entries: Vec<(Condition, f64)>,
}

impl ConditionMix {
    pub fn new(entries: Vec<(Condition, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("empty condition mix".into()));
        }
        if entries.iter().any(|(_, w)| !(w.is_finite() && *w >= 0.0)) || entries.iter().all(|(_, w)| *w == 0.0) {
            return Err(Error::InvalidArgument("condition weights must be non-negative with a positive sum".into()));
        }
        Ok(Self { entries })
    }

    /// Uniform over the cartesian product of the given values.
    pub fn uniform(times: &[TimeOfDay], viewpoints: &[Viewpoint], backgrounds: &[u32]) -> Result<Self> {
        let mut entries = Vec::new();
        for &t in times {
            for &v in viewpoints {
                for &b in backgrounds {
                    entries.push((Condition::new(t, v, b), 1.0));
                }
            }
        }
        Self::new(entries)
    }

    pub fn single(condition: Condition) -> Self {
        Self {
            entries: vec![(condition, 1.0)],
        }
    }

    pub fn entries(&self) -> &[(Condition, f64)] {
        &self.entries
    }

    pub fn pick(&self, rng: &mut Rng) -> Condition {
        let weights: Vec<f64> = self.entries.iter().map(|(_, w)| *w).collect();
        self.entries[rng.weighted(&weights)].0
    }
}

/// Knobs of a batch generation run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerateOptions {
    pub family: Family,
    pub render: RenderConfig,
    pub blur_radius: usize,
    pub max_delta: i32,
}

impl GenerateOptions {
    pub fn new(family: Family, render: RenderConfig) -> Self {
        Self {
            family,
            render,
            blur_radius: DEFAULT_RADIUS,
            max_delta: DEFAULT_MAX_DELTA as i32,
        }
    }
}

/// Renders `n` annotated visible/IR pairs.
///
/// The synthetic family uses the base renderer and passes both images
/// through the selective blur; the real-analog family uses the detailed
/// renderer without blur. Sample `i` draws only from the stream
/// `<rng>/sample/<i>`, so output does not depend on generation order.
pub fn generate_dataset(n: usize, mix: &ConditionMix, opts: &GenerateOptions, rng: &Rng) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("generate_dataset needs n >= 1".into()));
    }
    (0..n).map(|i| generate_sample(i, mix, opts, rng)).collect::<Result<Vec<_>>>().map(Dataset::new)
}

/// Sample `index` of [`generate_dataset`].
pub fn generate_sample(index: usize, mix: &ConditionMix, opts: &GenerateOptions, rng: &Rng) -> Result<Sample> {
    let sub = rng.fork(&format!("sample/{index}"));
    let condition = mix.pick(&mut sub.fork("condition"));
    let scene = sample_scene(condition, &mut sub.fork("scene"));
    let style = match opts.family {
        Family::Synthetic => RenderStyle::BASE,
        Family::RealAnalog => RenderStyle::DETAILED,
    };
    let mut visible = render_visible_styled(&scene, opts.render, style, &mut sub.fork("visible"))?;
    let mut ir = render_ir_styled(&scene, opts.render, style, &mut sub.fork("ir"))?;
    if opts.family == Family::Synthetic {
        visible = selective_gaussian_blur(&visible, opts.blur_radius, opts.max_delta)?;
        ir = selective_gaussian_blur(&ir, opts.blur_radius, opts.max_delta)?;
    }
    let mut sample = Sample::paired(
        visible,
        ir,
        Tags {
            provenance: opts.family,
            condition,
        },
    )?;
    sample.annotations = Some(annotations(&scene, opts.render));
    Ok(sample)
}
