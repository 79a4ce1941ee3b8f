//! Alternating adversarial training, run records, convergence and checkpoints.

mod checkpoint;
mod config;
mod record;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub(crate) use config::key_values;
pub use config::{Algorithm, TrainConfig, CONFIG_KEYS, IR_CHANNELS, VISIBLE_CHANNELS};
pub use record::{converged, EpochRow, RunRecord, RECORD_HEADER};

use std::time::Instant;

use crate::datapipe::{normalize, Dataset, Image};
use crate::error::{Error, Result};
use crate::models::{
    build_discriminator, build_generator, discriminator_graph, generator_graph, sample_noise, Discriminator, Generator,
};
use crate::numerics::{sgd_step, Graph, Real, Rng, Tensor, Var};
use crate::objectives::{cycle_term, d_loss, g_adv_loss, l1_term, LossReport};

fn check_extent(img: &Image, cfg: &TrainConfig, what: &str) -> Result<()> {
    if (img.width(), img.height()) != (cfg.width, cfg.height) {
        return Err(Error::Data(format!(
            "{what} is {}x{}, config expects {}x{}",
            img.width(),
            img.height(),
            cfg.width,
            cfg.height
        )));
    }
    Ok(())
}

fn with_context(e: Error, epoch: usize, batch: usize) -> Error {
    match e {
        Error::NonFinite(m) => Error::NonFinite(format!("epoch {epoch}, batch {batch}: {m}")),
        other => other,
    }
}

fn scalar(g: &Graph<f32>, v: Var) -> Result<f64> {
    Ok(g.value(v).item()?.as_f64())
}

fn stack(items: &[Tensor<f32>], idx: &[usize]) -> Result<Tensor<f32>> {
    Tensor::stack(&idx.iter().map(|&i| items[i].clone()).collect::<Vec<_>>())
}

/// One conditional training batch: visible inputs, IR targets and noise.
#[derive(Clone, Debug)]
pub struct PairBatch {
    pub x: Tensor<f32>,
    pub y: Tensor<f32>,
    pub z: Option<Tensor<f32>>,
}

/// Conditional adversarial trainer holding one generator and one
/// conditional discriminator.
#[derive(Clone, Debug)]
pub struct CganTrainer {
    pub config: TrainConfig,
    pub generator: Generator,
    pub discriminator: Discriminator,
    rng: Rng,
}

impl CganTrainer {
    /// Builds freshly initialized models for `config`.
    pub fn new(config: &TrainConfig) -> Result<Self> {
        let mut config = config.clone();
        config.algorithm = Algorithm::Cgan;
        config.validate()?;
        let rng = Rng::new(config.seed, "train");
        let generator = build_generator(&config.generator_spec("g")?, &rng.fork("init/g"))?;
        let discriminator = build_discriminator(&config.discriminator_spec("d")?, &rng.fork("init/d"))?;
        Ok(Self {
            config,
            generator,
            discriminator,
            rng,
        })
    }

    /// Assembles a batch from normalized samples; noise comes from `rng`.
    pub fn batch(&self, x: Tensor<f32>, y: Tensor<f32>, rng: &mut Rng) -> Result<PairBatch> {
        let (n, _, h, w) = x.dims4()?;
        let z = sample_noise(&self.generator.spec, n, h, w, rng)?;
        Ok(PairBatch { x, y, z })
    }

    fn inputs(g: &mut Graph<f32>, b: &PairBatch) -> Result<(Var, Var, Option<Var>)> {
        let x = g.constant(b.x.clone())?;
        let y = g.constant(b.y.clone())?;
        let z = b.z.as_ref().map(|z| g.constant(z.clone())).transpose()?;
        Ok((x, y, z))
    }

    /// Updates only the discriminator, with the generator held fixed.
    /// Returns the discriminator loss before the update.
    pub fn discriminator_phase(&mut self, b: &PairBatch) -> Result<f64> {
        let mut g = Graph::new();
        let (x, y, z) = Self::inputs(&mut g, b)?;
        let gp = g.bind_frozen(&self.generator.params)?;
        let dp = g.bind(&self.discriminator.params)?;
        let fake = generator_graph(&self.generator.spec, &mut g, &gp, x, z)?;
        let d_real = discriminator_graph(&self.discriminator.spec, &mut g, &dp, y, Some(x))?;
        let d_fake = discriminator_graph(&self.discriminator.spec, &mut g, &dp, fake, Some(x))?;
        let loss = d_loss(&mut g, d_real, d_fake)?;
        let value = scalar(&g, loss)?;
        g.backward(loss, &mut [&mut self.discriminator.params])?;
        sgd_step(&mut self.discriminator.params, self.config.lr_d)?;
        Ok(value)
    }

    /// Updates only the generator, with the discriminator held fixed.
    /// Returns the adversarial and L1 components before the update.
    pub fn generator_phase(&mut self, b: &PairBatch) -> Result<(f64, f64)> {
        let w = self.config.weights;
        let mut g = Graph::new();
        let (x, y, z) = Self::inputs(&mut g, b)?;
        let gp = g.bind(&self.generator.params)?;
        let dp = g.bind_frozen(&self.discriminator.params)?;
        let fake = generator_graph(&self.generator.spec, &mut g, &gp, x, z)?;
        let d_fake = discriminator_graph(&self.discriminator.spec, &mut g, &dp, fake, Some(x))?;
        let adv = g_adv_loss(&mut g, d_fake, w.g_adv_mode)?;
        let l1 = l1_term(&mut g, fake, y)?;
        let weighted = g.scale(l1, w.lambda_l1)?;
        let total = g.add(adv, weighted)?;
        let values = (scalar(&g, adv)?, scalar(&g, l1)?);
        g.backward(total, &mut [&mut self.generator.params])?;
        sgd_step(&mut self.generator.params, self.config.lr_g)?;
        Ok(values)
    }

    /// One alternating step: discriminator first, then generator.
    pub fn step(&mut self, b: &PairBatch) -> Result<LossReport> {
        let d = self.discriminator_phase(b)?;
        let (adv, l1) = self.generator_phase(b)?;
        Ok(LossReport {
            d_loss: d,
            g_adv: adv,
            g_l1: l1,
            ..LossReport::default()
        })
    }

    /// Trains until convergence or `max_epochs`. Each epoch visits the
    /// samples once in a seeded order.
    pub fn train(mut self, paired: &Dataset) -> Result<(Generator, Discriminator, RunRecord)> {
        if paired.is_empty() {
            return Err(Error::Data("training set is empty".into()));
        }
        let mut xs = Vec::with_capacity(paired.len());
        let mut ys = Vec::with_capacity(paired.len());
        for (i, s) in paired.iter().enumerate() {
            let ir = s
                .ir
                .as_ref()
                .ok_or_else(|| Error::Data(format!("sample {i} has no IR image; conditional training needs pairs")))?;
            check_extent(&s.visible, &self.config, &format!("sample {i}"))?;
            xs.push(normalize::<f32>(&s.visible));
            ys.push(normalize::<f32>(ir));
        }
        let cfg = self.config.clone();
        let mut record = RunRecord::new(cfg.weights);
        for epoch in 1..=cfg.max_epochs {
            let start = Instant::now();
            let order = self.rng.fork(&format!("epoch/{epoch}")).permutation(xs.len());
            let mut acc = LossReport::default();
            for (bi, idx) in order.chunks(cfg.batch).enumerate() {
                let mut zr = self.rng.fork(&format!("z/{epoch}/{bi}"));
                let b = self.batch(stack(&xs, idx)?, stack(&ys, idx)?, &mut zr)?;
                let r = self.step(&b).map_err(|e| with_context(e, epoch, bi))?;
                acc.add_scaled(&r, idx.len() as f64 / xs.len() as f64);
            }
            let seconds = if cfg.wall_time { start.elapsed().as_secs_f64() } else { 0.0 };
            record.push(EpochRow {
                epoch,
                losses: acc,
                seconds,
            })?;
            if converged(&record, cfg.window, cfg.tau) {
                break;
            }
        }
        Ok((self.generator, self.discriminator, record))
    }
}

/// Paired conditional training; see [`CganTrainer`].
pub fn train_cgan(paired: &Dataset, cfg: &TrainConfig) -> Result<(Generator, Discriminator, RunRecord)> {
    CganTrainer::new(cfg)?.train(paired)
}

/// One unpaired training batch: visible images `a` and IR images `b`.
#[derive(Clone, Debug)]
pub struct UnpairedBatch {
    pub a: Tensor<f32>,
    pub b: Tensor<f32>,
}

/// Cycle-consistent trainer: generators A->B and B->A and one
/// unconditional discriminator per domain.
#[derive(Clone, Debug)]
pub struct CycleTrainer {
    pub config: TrainConfig,
    pub g_ab: Generator,
    pub g_ba: Generator,
    pub d_a: Discriminator,
    pub d_b: Discriminator,
    rng: Rng,
}

/// Cycle-consistency components of a generator step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CycleLosses {
    pub g_adv: f64,
    pub cyc_ab: f64,
    pub cyc_ba: f64,
}

impl CycleTrainer {
    pub fn new(config: &TrainConfig) -> Result<Self> {
        let mut config = config.clone();
        config.algorithm = Algorithm::Cyclegan;
        config.validate()?;
        let rng = Rng::new(config.seed, "train");
        Ok(Self {
            g_ab: build_generator(&config.generator_spec("g_ab")?, &rng.fork("init/g_ab"))?,
            g_ba: build_generator(&config.generator_spec("g_ba")?, &rng.fork("init/g_ba"))?,
            d_a: build_discriminator(&config.discriminator_spec("d_a")?, &rng.fork("init/d_a"))?,
            d_b: build_discriminator(&config.discriminator_spec("d_b")?, &rng.fork("init/d_b"))?,
            config,
            rng,
        })
    }

    /// Updates both discriminators against the current generators.
    /// Returns the mean of the two discriminator losses.
    pub fn discriminator_phase(&mut self, batch: &UnpairedBatch) -> Result<f64> {
        let mut g = Graph::new();
        let a = g.constant(batch.a.clone())?;
        let b = g.constant(batch.b.clone())?;
        let gab = g.bind_frozen(&self.g_ab.params)?;
        let gba = g.bind_frozen(&self.g_ba.params)?;
        let da = g.bind(&self.d_a.params)?;
        let db = g.bind(&self.d_b.params)?;
        let fake_b = generator_graph(&self.g_ab.spec, &mut g, &gab, a, None)?;
        let fake_a = generator_graph(&self.g_ba.spec, &mut g, &gba, b, None)?;
        let ra = discriminator_graph(&self.d_a.spec, &mut g, &da, a, None)?;
        let fa = discriminator_graph(&self.d_a.spec, &mut g, &da, fake_a, None)?;
        let rb = discriminator_graph(&self.d_b.spec, &mut g, &db, b, None)?;
        let fb = discriminator_graph(&self.d_b.spec, &mut g, &db, fake_b, None)?;
        let la = d_loss(&mut g, ra, fa)?;
        let lb = d_loss(&mut g, rb, fb)?;
        let total = g.add(la, lb)?;
        let value = scalar(&g, total)? / 2.0;
        g.backward(total, &mut [&mut self.d_a.params, &mut self.d_b.params])?;
        sgd_step(&mut self.d_a.params, self.config.lr_d)?;
        sgd_step(&mut self.d_b.params, self.config.lr_d)?;
        Ok(value)
    }

    /// Updates both generators jointly on the adversarial terms of both
    /// directions plus the weighted cycle term.
    pub fn generator_phase(&mut self, batch: &UnpairedBatch) -> Result<CycleLosses> {
        let w = self.config.weights;
        let mut g = Graph::new();
        let a = g.constant(batch.a.clone())?;
        let b = g.constant(batch.b.clone())?;
        let gab = g.bind(&self.g_ab.params)?;
        let gba = g.bind(&self.g_ba.params)?;
        let da = g.bind_frozen(&self.d_a.params)?;
        let db = g.bind_frozen(&self.d_b.params)?;
        let fake_b = generator_graph(&self.g_ab.spec, &mut g, &gab, a, None)?;
        let rec_a = generator_graph(&self.g_ba.spec, &mut g, &gba, fake_b, None)?;
        let fake_a = generator_graph(&self.g_ba.spec, &mut g, &gba, b, None)?;
        let rec_b = generator_graph(&self.g_ab.spec, &mut g, &gab, fake_a, None)?;
        let pb = discriminator_graph(&self.d_b.spec, &mut g, &db, fake_b, None)?;
        let pa = discriminator_graph(&self.d_a.spec, &mut g, &da, fake_a, None)?;
        let adv_b = g_adv_loss(&mut g, pb, w.g_adv_mode)?;
        let adv_a = g_adv_loss(&mut g, pa, w.g_adv_mode)?;
        let adv = g.add(adv_a, adv_b)?;
        let cyc = cycle_term(&mut g, a, rec_a, b, rec_b, w.lambda_cyc)?;
        let total = g.add(adv, cyc)?;
        let cyc_ab = g.l1_mean(a, rec_a)?;
        let cyc_ba = g.l1_mean(b, rec_b)?;
        let losses = CycleLosses {
            g_adv: scalar(&g, adv)?,
            cyc_ab: scalar(&g, cyc_ab)?,
            cyc_ba: scalar(&g, cyc_ba)?,
        };
        g.backward(total, &mut [&mut self.g_ab.params, &mut self.g_ba.params])?;
        sgd_step(&mut self.g_ab.params, self.config.lr_g)?;
        sgd_step(&mut self.g_ba.params, self.config.lr_g)?;
        Ok(losses)
    }

    pub fn step(&mut self, batch: &UnpairedBatch) -> Result<LossReport> {
        let d = self.discriminator_phase(batch)?;
        let c = self.generator_phase(batch)?;
        Ok(LossReport {
            d_loss: d,
            g_adv: c.g_adv,
            g_l1: 0.0,
            cyc_ab: c.cyc_ab,
            cyc_ba: c.cyc_ba,
        })
    }

    /// Trains on visible pool `pool_a` and IR pool `pool_b`. An epoch is
    /// `max(|A|, |B|)` pairs; each pool is shuffled per epoch and the
    /// shorter one repeats cyclically.
    pub fn train(mut self, pool_a: &Dataset, pool_b: &Dataset) -> Result<(Generator, Generator, Discriminator, Discriminator, RunRecord)> {
        if pool_a.is_empty() || pool_b.is_empty() {
            return Err(Error::Data("both training pools must be non-empty".into()));
        }
        let mut xa = Vec::with_capacity(pool_a.len());
        for (i, s) in pool_a.iter().enumerate() {
            check_extent(&s.visible, &self.config, &format!("pool A sample {i}"))?;
            xa.push(normalize::<f32>(&s.visible));
        }
        let mut xb = Vec::with_capacity(pool_b.len());
        for (i, s) in pool_b.iter().enumerate() {
            let ir = s
                .ir
                .as_ref()
                .ok_or_else(|| Error::Data(format!("pool B sample {i} has no IR image")))?;
            check_extent(ir, &self.config, &format!("pool B sample {i}"))?;
            xb.push(normalize::<f32>(ir));
        }
        let cfg = self.config.clone();
        let n = xa.len().max(xb.len());
        let mut record = RunRecord::new(cfg.weights);
        for epoch in 1..=cfg.max_epochs {
            let start = Instant::now();
            let er = self.rng.fork(&format!("epoch/{epoch}"));
            let pa = er.fork("a").permutation(xa.len());
            let pb = er.fork("b").permutation(xb.len());
            let mut acc = LossReport::default();
            let pairs: Vec<usize> = (0..n).collect();
            for (bi, chunk) in pairs.chunks(cfg.batch).enumerate() {
                let ia: Vec<usize> = chunk.iter().map(|&k| pa[k % pa.len()]).collect();
                let ib: Vec<usize> = chunk.iter().map(|&k| pb[k % pb.len()]).collect();
                let batch = UnpairedBatch {
                    a: stack(&xa, &ia)?,
                    b: stack(&xb, &ib)?,
                };
                let r = self.step(&batch).map_err(|e| with_context(e, epoch, bi))?;
                acc.add_scaled(&r, chunk.len() as f64 / n as f64);
            }
            let seconds = if cfg.wall_time { start.elapsed().as_secs_f64() } else { 0.0 };
            record.push(EpochRow {
                epoch,
                losses: acc,
                seconds,
            })?;
            if converged(&record, cfg.window, cfg.tau) {
                break;
            }
        }
        Ok((self.g_ab, self.g_ba, self.d_a, self.d_b, record))
    }
}

/// Unpaired cycle-consistent training; see [`CycleTrainer`].
pub fn train_cyclegan(
    pool_a: &Dataset,
    pool_b: &Dataset,
    cfg: &TrainConfig,
) -> Result<(Generator, Generator, Discriminator, Discriminator, RunRecord)> {
    CycleTrainer::new(cfg)?.train(pool_a, pool_b)
}
