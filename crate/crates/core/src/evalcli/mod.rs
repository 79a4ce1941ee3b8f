//! Evaluation, data-mix sweeps, reports and the command-line front end.

mod cli;
mod report;
mod sweep;

pub use cli::{run as run_cli, Cli, Command};
pub use report::{
    emit_report, grid_image, parse_sweep_csv, summarize, write_grids, SummaryRow, GRID_SEPARATOR, SUMMARY_HEADER,
    SWEEP_HEADER,
};
pub use sweep::{run_sweep, CellResult, SweepRow, SweepSpec, SweepTable, CHECKPOINT_FILE, RECORD_FILE};

use crate::datapipe::{denormalize, normalize, Dataset, Image};
use crate::error::{Error, Result};
use crate::models::{generator_forward, sample_noise, Generator};
use crate::numerics::Rng;
use crate::objectives::l1_percent_images;

/// Mean and per-sample L1 percent of a test set.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub mean: f64,
    pub per_sample: Vec<f64>,
}

/// Translates one visible image to IR. Noise, if the generator takes any,
/// is drawn from `z`.
pub fn transform(generator: &Generator, visible: &Image, z: &mut Rng) -> Result<Image> {
    let x = normalize::<f32>(visible);
    let noise = sample_noise(&generator.spec, 1, visible.height(), visible.width(), z)?;
    let y = generator_forward(generator, &x, noise.as_ref())?;
    denormalize(&y)
}

/// Scores `predict(index, visible)` against each pair's IR image on the
/// `[0, 1]` scale.
pub fn evaluate_with(test: &Dataset, mut predict: impl FnMut(usize, &Image) -> Result<Image>) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::Data("test set is empty".into()));
    }
    let mut per_sample = Vec::with_capacity(test.len());
    for (i, s) in test.iter().enumerate() {
        let truth = s
            .ir
            .as_ref()
            .ok_or_else(|| Error::Data(format!("test sample {i} has no IR image")))?;
        per_sample.push(l1_percent_images(&predict(i, &s.visible)?, truth)?);
    }
    let mean = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
    Ok(Evaluation { mean, per_sample })
}

/// Scores a generator. Sample `i` uses noise stream `<z>/sample/<i>`, so
/// the result depends only on the parameters, the test set and `z`.
pub fn evaluate(generator: &Generator, test: &Dataset, z: &Rng) -> Result<Evaluation> {
    evaluate_with(test, |i, visible| transform(generator, visible, &mut z.fork(&format!("sample/{i}"))))
}

/// Median of a non-empty list; the mean of the middle pair for even sizes.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

#[cfg(test)]
mod tests;
