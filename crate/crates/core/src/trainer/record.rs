use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::objectives::{LossReport, LossWeights};

pub const RECORD_HEADER: &str = "epoch,d_loss,g_adv,g_l1,cyc_ab,cyc_ba,seconds";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub losses: LossReport,
    pub seconds: f64,
}

/// Per-epoch loss history of a run, with the weights needed to recombine
/// the components into the generator objective.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub weights: LossWeights,
    rows: Vec<EpochRow>,
}

impl RunRecord {
    pub fn new(weights: LossWeights) -> Self {
        Self { weights, rows: Vec::new() }
    }

    pub fn rows(&self) -> &[EpochRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRow> {
        self.rows.last()
    }

    /// Appends a row; epochs must increase and losses must be finite.
    pub fn push(&mut self, row: EpochRow) -> Result<()> {
        if let Some(prev) = self.rows.last() {
            if row.epoch <= prev.epoch {
                return Err(Error::InvalidArgument(format!(
                    "epoch {} recorded after epoch {}",
                    row.epoch, prev.epoch
                )));
            }
        }
        if !row.losses.is_finite() || !row.seconds.is_finite() {
            return Err(Error::NonFinite(format!("losses at epoch {}", row.epoch)));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Weighted generator objective per epoch.
    pub fn g_totals(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.losses.g_total(&self.weights)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(RECORD_HEADER);
        s.push('\n');
        for r in &self.rows {
            let l = &r.losses;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.epoch, l.d_loss, l.g_adv, l.g_l1, l.cyc_ab, l.cyc_ba, r.seconds
            );
        }
        s
    }

    pub fn parse_csv(text: &str, weights: LossWeights) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(RECORD_HEADER) {
            return Err(Error::Format(format!("run record must start with `{RECORD_HEADER}`")));
        }
        let mut rec = Self::new(weights);
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Format(format!("run record row {}: `{line}`", i + 1));
            if f.len() != 7 {
                return Err(bad());
            }
            let v = |k: usize| f[k].parse::<f64>().map_err(|_| bad());
            rec.push(EpochRow {
                epoch: f[0].parse().map_err(|_| bad())?,
                losses: LossReport {
                    d_loss: v(1)?,
                    g_adv: v(2)?,
                    g_l1: v(3)?,
                    cyc_ab: v(4)?,
                    cyc_ba: v(5)?,
                },
                seconds: v(6)?,
            })?;
        }
        Ok(rec)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Plateau test: at least `2 * window` epochs, and the mean generator
/// objective over the last `window` epochs differs from the mean over the
/// `window` before by less than `tau`.
pub fn converged(record: &RunRecord, window: usize, tau: f64) -> bool {
    if window < 2 {
        return false;
    }
    let totals = record.g_totals();
    converged_series(&totals, window, tau)
}

pub(crate) fn converged_series(totals: &[f64], window: usize, tau: f64) -> bool {
    let n = totals.len();
    if window < 2 || n < 2 * window {
        return false;
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let last = mean(&totals[n - window..]);
    let prev = mean(&totals[n - 2 * window..n - window]);
    (last - prev).abs() < tau
}
