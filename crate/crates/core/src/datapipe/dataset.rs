use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::{Real, Rng, Tensor};
use crate::synthcam::Annotation;

use super::{Family, Image, Tags};

/// A visible image, optionally paired with its IR counterpart.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub visible: Image,
    pub ir: Option<Image>,
    pub tags: Tags,
    pub annotations: Option<Vec<Annotation>>,
}

impl Sample {
    pub fn paired(visible: Image, ir: Image, tags: Tags) -> Result<Self> {
        if (visible.width(), visible.height()) != (ir.width(), ir.height()) {
            return Err(Error::Shape(format!(
                "visible {}x{} and IR {}x{} differ",
                visible.width(),
                visible.height(),
                ir.width(),
                ir.height()
            )));
        }
        Ok(Self {
            visible,
            ir: Some(ir),
            tags,
            annotations: None,
        })
    }

    pub fn is_paired(&self) -> bool {
        self.ir.is_some()
    }
}

/// Ordered collection of samples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self { samples }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample> {
        self.samples.iter()
    }

    /// Content identity: SHA-256 over every image byte, extent and tag, in order.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.samples.len() as u64).to_le_bytes());
        let image = |h: &mut Sha256, img: &Image| {
            for d in [img.width(), img.height(), img.channels()] {
                h.update((d as u64).to_le_bytes());
            }
            h.update(img.pixels());
        };
        for s in &self.samples {
            image(&mut h, &s.visible);
            match &s.ir {
                Some(ir) => {
                    h.update([1]);
                    image(&mut h, ir);
                }
                None => h.update([0]),
            }
            let c = &s.tags.condition;
            h.update(format!("{}|{}|{}|{}", s.tags.provenance, c.time, c.viewpoint, c.background_class).as_bytes());
            if let Some(anns) = &s.annotations {
                for a in anns {
                    h.update(format!("{}|{}|{}|{}|{};", a.class, a.x0, a.y0, a.x1, a.y1).as_bytes());
                }
            }
        }
        h.finalize().into()
    }

    pub fn digest_hex(&self) -> String {
        self.digest().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Copy keeping only samples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset::new(indices.iter().map(|&i| self.samples[i].clone()).collect())
    }
}

impl FromIterator<Sample> for Dataset {
    fn from_iter<I: IntoIterator<Item = Sample>>(iter: I) -> Self {
        Dataset::new(iter.into_iter().collect())
    }
}

/// Counts drawn from a real and a synthetic pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MixSpec {
    pub n_real: usize,
    pub n_synth: usize,
    pub seed: u64,
}

impl MixSpec {
    pub fn label(&self) -> String {
        format!("r{}+s{}", self.n_real, self.n_synth)
    }
}

/// Draws `n_real` and `n_synth` samples without replacement, concatenates
/// them and applies a seeded permutation.
pub fn mix(real: &Dataset, synth: &Dataset, spec: MixSpec) -> Result<Dataset> {
    if spec.n_real + spec.n_synth == 0 {
        return Err(Error::InvalidArgument("a mix needs at least one sample".into()));
    }
    if spec.n_real > real.len() {
        return Err(Error::Data(format!(
            "mix wants {} real samples, pool has {}",
            spec.n_real,
            real.len()
        )));
    }
    if spec.n_synth > synth.len() {
        return Err(Error::Data(format!(
            "mix wants {} synthetic samples, pool has {}",
            spec.n_synth,
            synth.len()
        )));
    }
    let root = Rng::new(spec.seed, "mix");
    let mut picked = Vec::with_capacity(spec.n_real + spec.n_synth);
    let real_idx = root.fork("real").permutation(real.len());
    picked.extend(real_idx[..spec.n_real].iter().map(|&i| real.samples[i].clone()));
    let synth_idx = root.fork("synth").permutation(synth.len());
    picked.extend(synth_idx[..spec.n_synth].iter().map(|&i| synth.samples[i].clone()));
    root.fork("order").shuffle(&mut picked);
    Ok(Dataset::new(picked))
}

/// Stable partition into `(matching, rest)`.
pub fn split_by_condition(ds: &Dataset, predicate: impl Fn(&Tags) -> bool) -> (Dataset, Dataset) {
    let (a, b): (Vec<Sample>, Vec<Sample>) = ds.samples.iter().cloned().partition(|s| predicate(&s.tags));
    (Dataset::new(a), Dataset::new(b))
}

/// Counts samples of each family.
pub fn family_counts(ds: &Dataset) -> (usize, usize) {
    let real = ds.iter().filter(|s| s.tags.provenance == Family::RealAnalog).count();
    (real, ds.len() - real)
}

/// Maps 8-bit pixels onto `[-1, 1]` via `v / 127.5 - 1`, as a `1 x C x H x W` tensor.
pub fn normalize<T: Real>(img: &Image) -> Tensor<T> {
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let mut data = vec![T::zero(); w * h * c];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                data[(ch * h + y) * w + x] = T::of(img.get(x, y, ch) as f64 / 127.5 - 1.0);
            }
        }
    }
    Tensor::new(&[1, c, h, w], data).expect("extents match")
}

/// Inverse of [`normalize`] for a single-sample tensor; rounds half away
/// from zero and clamps to `[0, 255]`.
pub fn denormalize<T: Real>(t: &Tensor<T>) -> Result<Image> {
    let (n, c, h, w) = t.dims4()?;
    if n != 1 {
        return Err(Error::Shape(format!("denormalize expects one sample, got {n}")));
    }
    let mut img = Image::filled(w, h, c, 0)?;
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                img.set(x, y, ch, to_byte((t.data()[(ch * h + y) * w + x].as_f64() + 1.0) * 127.5));
            }
        }
    }
    Ok(img)
}

/// Rounds half away from zero and clamps to `[0, 255]`.
pub fn to_byte(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}
