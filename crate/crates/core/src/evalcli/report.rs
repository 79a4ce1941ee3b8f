use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::datapipe::{write_image, Image};
use crate::error::{Error, Result};
use crate::numerics::Rng;
use crate::synthcam::read_dataset;
use crate::trainer::{load_checkpoint, Algorithm};

use super::sweep::{CellResult, SweepRow, SweepTable, CHECKPOINT_FILE};
use super::{median, transform};

pub const SWEEP_HEADER: &str = "mix,split,seed,l1_percent,epochs";
pub const SUMMARY_HEADER: &str = "mix,split,seeds,median_l1_percent";
/// Width of the white bars between grid panels and rows.
pub const GRID_SEPARATOR: usize = 2;
const FAILED: &str = "failed";

impl SweepTable {
    /// One line per row; failed cells carry `failed` in both value columns.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(SWEEP_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = match &r.result {
                Ok(c) => writeln!(s, "{},{},{},{},{}", r.mix, r.split, r.seed, c.l1_percent, c.epochs),
                Err(_) => writeln!(s, "{},{},{},{FAILED},{FAILED}", r.mix, r.split, r.seed),
            };
        }
        s
    }
}

pub fn parse_sweep_csv(text: &str) -> Result<SweepTable> {
    let mut lines = text.lines();
    if lines.next() != Some(SWEEP_HEADER) {
        return Err(Error::Format(format!("sweep table must start with `{SWEEP_HEADER}`")));
    }
    let mut table = SweepTable::default();
    for (i, line) in lines.enumerate() {
        let bad = || Error::Format(format!("sweep table row {}: `{line}`", i + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad());
        }
        let result = if f[3] == FAILED && f[4] == FAILED {
            Err(FAILED.to_string())
        } else {
            let l1_percent: f64 = f[3].parse().map_err(|_| bad())?;
            if !l1_percent.is_finite() {
                return Err(bad());
            }
            Ok(CellResult {
                l1_percent,
                epochs: f[4].parse().map_err(|_| bad())?,
            })
        };
        table.rows.push(SweepRow {
            mix: f[0].to_string(),
            split: f[1].to_string(),
            seed: f[2].parse().map_err(|_| bad())?,
            result,
        });
    }
    Ok(table)
}

/// Median over seeds of one `(mix, split)` group.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub mix: String,
    pub split: String,
    /// Seeds that completed.
    pub seeds: usize,
    /// `None` when every seed failed.
    pub median_l1_percent: Option<f64>,
}

/// Groups rows by `(mix, split)` in order of first appearance.
pub fn summarize(table: &SweepTable) -> Vec<SummaryRow> {
    let mut groups: Vec<(String, String, Vec<f64>)> = Vec::new();
    for r in &table.rows {
        let pos = match groups.iter().position(|(m, s, _)| *m == r.mix && *s == r.split) {
            Some(p) => p,
            None => {
                groups.push((r.mix.clone(), r.split.clone(), Vec::new()));
                groups.len() - 1
            }
        };
        if let Ok(c) = &r.result {
            groups[pos].2.push(c.l1_percent);
        }
    }
    groups
        .into_iter()
        .map(|(mix, split, v)| SummaryRow {
            mix,
            split,
            seeds: v.len(),
            median_l1_percent: median(&v),
        })
        .collect()
}

fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        let m = r.median_l1_percent.map_or(FAILED.to_string(), |v| v.to_string());
        let _ = writeln!(s, "{},{},{},{m}", r.mix, r.split, r.seeds);
    }
    s
}

/// Stacks `input | generated | ground truth` rows into one RGB image with
/// white separators. Single-channel panels are expanded to gray RGB.
pub fn grid_image(rows: &[(Image, Image, Image)]) -> Result<Image> {
    let (first, _, _) = rows
        .first()
        .ok_or_else(|| Error::InvalidArgument("a grid needs at least one row".into()))?;
    let (w, h) = (first.width(), first.height());
    let gw = 3 * w + 2 * GRID_SEPARATOR;
    let gh = rows.len() * h + (rows.len() - 1) * GRID_SEPARATOR;
    let mut grid = Image::filled(gw, gh, 3, 255)?;
    for (r, (a, b, c)) in rows.iter().enumerate() {
        for (p, panel) in [a, b, c].into_iter().enumerate() {
            if (panel.width(), panel.height()) != (w, h) {
                return Err(Error::Shape(format!(
                    "grid panel is {}x{}, expected {w}x{h}",
                    panel.width(),
                    panel.height()
                )));
            }
            let rgb = panel.to_rgb();
            let (x0, y0) = (p * (w + GRID_SEPARATOR), r * (h + GRID_SEPARATOR));
            for y in 0..h {
                for x in 0..w {
                    for ch in 0..3 {
                        grid.set(x0 + x, y0 + y, ch, rgb.get(x, y, ch));
                    }
                }
            }
        }
    }
    Ok(grid)
}

/// Writes `grids/<mix>_<split>.ppm` under `out` for every group with a
/// completed seed, using the first such seed's checkpoint from the sweep
/// directory and the first `samples` test pairs of the split.
pub fn write_grids(table: &SweepTable, sweep_dir: &Path, out: &Path, samples: usize) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if samples == 0 {
        return Ok(written);
    }
    let grid_dir = out.join("grids");
    fs::create_dir_all(&grid_dir).map_err(|e| Error::io(&grid_dir, e))?;
    for g in summarize(table) {
        let Some(row) = table
            .rows
            .iter()
            .find(|r| r.mix == g.mix && r.split == g.split && r.result.is_ok())
        else {
            continue;
        };
        let cell = sweep_dir.join("cells").join(format!("{}_seed{}", row.mix, row.seed));
        let ck = load_checkpoint(cell.join(CHECKPOINT_FILE))?;
        let generator = match ck.config.algorithm {
            Algorithm::Cgan => ck.generator("g")?,
            Algorithm::Cyclegan => ck.generator("g_ab")?,
        };
        let test = read_dataset(sweep_dir.join("tests").join(&row.split))?;
        let z = Rng::new(row.seed, "eval");
        let mut rows = Vec::new();
        for (i, s) in test.iter().take(samples).enumerate() {
            let truth = s
                .ir
                .clone()
                .ok_or_else(|| Error::Data(format!("test sample {i} has no IR image")))?;
            let fake = transform(&generator, &s.visible, &mut z.fork(&format!("sample/{i}")))?;
            rows.push((s.visible.clone(), fake, truth));
        }
        let path = grid_dir.join(format!("{}_{}.ppm", g.mix, g.split));
        write_image(&grid_image(&rows)?, &path)?;
        written.push(path);
    }
    Ok(written)
}

/// Writes `sweep.csv` and `summary.csv` to `out`, plus image grids when a
/// sweep directory and a positive sample count are given.
pub fn emit_report(table: &SweepTable, out: impl AsRef<Path>, grids: Option<(&Path, usize)>) -> Result<()> {
    let out = out.as_ref();
    if table.rows.is_empty() {
        return Err(Error::InvalidArgument("cannot report an empty sweep table".into()));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let sweep = out.join("sweep.csv");
    fs::write(&sweep, table.to_csv()).map_err(|e| Error::io(&sweep, e))?;
    let summary = out.join("summary.csv");
    fs::write(&summary, summary_csv(&summarize(table))).map_err(|e| Error::io(&summary, e))?;
    if let Some((dir, samples)) = grids {
        write_grids(table, dir, out, samples)?;
    }
    Ok(())
}
