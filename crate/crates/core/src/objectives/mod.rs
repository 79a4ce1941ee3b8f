//! Adversarial, reconstruction and cycle-consistency losses, plus the
//! percent L1 evaluation metric.

use std::fmt;
use std::str::FromStr;

use crate::datapipe::Image;
use crate::error::{Error, Result};
use crate::numerics::{Graph, Real, Tensor, Var};

/// Form of the generator's adversarial term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum GAdvMode {
    /// `mean(log(1 - D(G)))`, minimized by the generator.
    Minimax,
    /// `-mean(log D(G))`.
    #[default]
    NonSaturating,
}

impl GAdvMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GAdvMode::Minimax => "minimax",
            GAdvMode::NonSaturating => "non_saturating",
        }
    }
}

impl fmt::Display for GAdvMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GAdvMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minimax" => Ok(GAdvMode::Minimax),
            "non_saturating" => Ok(GAdvMode::NonSaturating),
            _ => Err(Error::Config(format!("unknown generator loss mode `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub lambda_l1: f64,
    pub lambda_cyc: f64,
    pub g_adv_mode: GAdvMode,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_l1: 100.0,
            lambda_cyc: 10.0,
            g_adv_mode: GAdvMode::NonSaturating,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_l1", self.lambda_l1), ("lambda_cyc", self.lambda_cyc)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Loss components of one training step or epoch. Cycle terms are
/// unweighted mean absolute errors.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossReport {
    pub d_loss: f64,
    pub g_adv: f64,
    pub g_l1: f64,
    pub cyc_ab: f64,
    pub cyc_ba: f64,
}

impl LossReport {
    pub fn is_finite(&self) -> bool {
        [self.d_loss, self.g_adv, self.g_l1, self.cyc_ab, self.cyc_ba].iter().all(|v| v.is_finite())
    }

    /// Weighted generator objective implied by the components.
    pub fn g_total(&self, w: &LossWeights) -> f64 {
        self.g_adv + w.lambda_l1 * self.g_l1 + w.lambda_cyc * (self.cyc_ab + self.cyc_ba)
    }

    pub fn add_scaled(&mut self, other: &LossReport, k: f64) {
        self.d_loss += k * other.d_loss;
        self.g_adv += k * other.g_adv;
        self.g_l1 += k * other.g_l1;
        self.cyc_ab += k * other.cyc_ab;
        self.cyc_ba += k * other.cyc_ba;
    }
}

/// Discriminator loss `-mean(log D(real)) - mean(log(1 - D(fake)))`, the
/// negated value function, so minimizing it trains the discriminator.
pub fn d_loss<T: Real>(g: &mut Graph<T>, d_real: Var, d_fake: Var) -> Result<Var> {
    let real = g.log_mean(d_real, false)?;
    let fake = g.log_mean(d_fake, true)?;
    let total = g.add(real, fake)?;
    g.scale(total, -1.0)
}

/// Generator adversarial loss on the discriminator's response to fakes.
pub fn g_adv_loss<T: Real>(g: &mut Graph<T>, d_fake: Var, mode: GAdvMode) -> Result<Var> {
    match mode {
        GAdvMode::Minimax => g.log_mean(d_fake, true),
        GAdvMode::NonSaturating => {
            let l = g.log_mean(d_fake, false)?;
            g.scale(l, -1.0)
        }
    }
}

/// Mean absolute difference.
pub fn l1_term<T: Real>(g: &mut Graph<T>, y_hat: Var, y: Var) -> Result<Var> {
    g.l1_mean(y_hat, y)
}

/// `lambda_cyc * (mean|x - x_rec| + mean|y - y_rec|)`.
pub fn cycle_term<T: Real>(g: &mut Graph<T>, x: Var, x_rec: Var, y: Var, y_rec: Var, lambda_cyc: f64) -> Result<Var> {
    let a = g.l1_mean(x, x_rec)?;
    let b = g.l1_mean(y, y_rec)?;
    let s = g.add(a, b)?;
    g.scale(s, lambda_cyc)
}

/// Conditional generator objective: adversarial term plus weighted L1.
pub fn cgan_g_objective<T: Real>(g: &mut Graph<T>, d_fake: Var, y_hat: Var, y: Var, w: &LossWeights) -> Result<Var> {
    w.validate()?;
    let adv = g_adv_loss(g, d_fake, w.g_adv_mode)?;
    let l1 = l1_term(g, y_hat, y)?;
    let l1 = g.scale(l1, w.lambda_l1)?;
    g.add(adv, l1)
}

/// `100 * mean|a - b|` for tensors already on the `[0, 1]` pixel scale.
pub fn l1_metric_percent<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("l1 metric on {:?} vs {:?}", a.shape(), b.shape())));
    }
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x.as_f64() - y.as_f64()).abs()).sum();
    Ok(100.0 * sum / a.len() as f64)
}

/// Percent L1 between two 8-bit images, each mapped to `[0, 1]` by `v / 255`.
pub fn l1_percent_images(a: &Image, b: &Image) -> Result<f64> {
    if (a.width(), a.height(), a.channels()) != (b.width(), b.height(), b.channels()) {
        return Err(Error::Shape(format!(
            "l1 metric on {}x{}x{} vs {}x{}x{} images",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    let sum: u64 = a.pixels().iter().zip(b.pixels()).map(|(&x, &y)| x.abs_diff(y) as u64).sum();
    Ok(100.0 * sum as f64 / (255.0 * a.pixels().len() as f64))
}

/// Scalar evaluations of the losses on plain tensors (64-bit).
pub mod value {
    use super::*;

    fn scalar(build: impl FnOnce(&mut Graph<f64>) -> Result<Var>) -> Result<f64> {
        let mut g = Graph::new();
        let v = build(&mut g)?;
        g.value(v).item()
    }

    pub fn d_loss(d_real: &Tensor<f64>, d_fake: &Tensor<f64>) -> Result<f64> {
        scalar(|g| {
            let (r, f) = (g.constant(d_real.clone())?, g.constant(d_fake.clone())?);
            super::d_loss(g, r, f)
        })
    }

    pub fn g_adv_loss(d_fake: &Tensor<f64>, mode: GAdvMode) -> Result<f64> {
        scalar(|g| {
            let f = g.constant(d_fake.clone())?;
            super::g_adv_loss(g, f, mode)
        })
    }

    pub fn l1_term(y_hat: &Tensor<f64>, y: &Tensor<f64>) -> Result<f64> {
        scalar(|g| {
            let (a, b) = (g.constant(y_hat.clone())?, g.constant(y.clone())?);
            super::l1_term(g, a, b)
        })
    }

    pub fn cycle_term(
        x: &Tensor<f64>,
        x_rec: &Tensor<f64>,
        y: &Tensor<f64>,
        y_rec: &Tensor<f64>,
        lambda_cyc: f64,
    ) -> Result<f64> {
        scalar(|g| {
            let vars = [x, x_rec, y, y_rec].map(|t| g.constant(t.clone()));
            let [a, b, c, d] = vars;
            super::cycle_term(g, a?, b?, c?, d?, lambda_cyc)
        })
    }

    pub fn cgan_g_objective(d_fake: &Tensor<f64>, y_hat: &Tensor<f64>, y: &Tensor<f64>, w: &LossWeights) -> Result<f64> {
        scalar(|g| {
            let f = g.constant(d_fake.clone())?;
            let (a, b) = (g.constant(y_hat.clone())?, g.constant(y.clone())?);
            super::cgan_g_objective(g, f, a, b, w)
        })
    }
}
