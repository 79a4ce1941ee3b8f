use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::datapipe::{mix, Dataset, Family, MixSpec, TagFilter};
use crate::error::{Error, Result};
use crate::numerics::Rng;
use crate::synthcam::write_dataset;
use crate::trainer::{key_values, save_checkpoint, train_cgan, train_cyclegan, Algorithm, TrainConfig};

use super::evaluate;

pub const RECORD_FILE: &str = "record.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.v2ir";

/// A grid of training runs: every mix is trained once per seed and scored
/// on every split.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub algorithm: Algorithm,
    /// `(real, synthetic)` sample counts.
    pub mixes: Vec<(usize, usize)>,
    pub seeds: Vec<u64>,
    /// Real samples eligible for training.
    pub real_train: TagFilter,
    /// Synthetic samples eligible for training.
    pub synth_train: TagFilter,
    /// Test samples reserved per split.
    pub test_per_split: usize,
    /// Named test conditions, in report order.
    pub splits: Vec<(String, TagFilter)>,
    /// Training settings shared by all cells; the seed is set per cell.
    pub template: TrainConfig,
}

impl SweepSpec {
    /// Parses `key = value` lines. Keys: `algorithm`, `mixes` (e.g.
    /// `20:0, 10:10`), `seeds`, `real_train`, `synth_train`,
    /// `test_per_split`, `split.<name>` and `train.<config key>`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut algorithm = None;
        let mut mixes = Vec::new();
        let mut seeds = Vec::new();
        let mut real_train = TagFilter::any();
        let mut synth_train = TagFilter::any();
        let mut test_per_split = 8;
        let mut splits: Vec<(String, TagFilter)> = Vec::new();
        let mut template = TrainConfig::default();
        for (line, key, value) in key_values(text)? {
            let at = |e: Error| Error::Config(format!("line {line}: {}", message(e)));
            let bad = || Error::Config(format!("line {line}: bad value `{value}` for `{key}`"));
            match key.as_str() {
                "algorithm" => algorithm = Some(value.parse::<Algorithm>().map_err(at)?),
                "mixes" => {
                    mixes = value
                        .split(',')
                        .map(|m| {
                            let (r, s) = m.trim().split_once(':').ok_or_else(bad)?;
                            Ok((r.trim().parse().map_err(|_| bad())?, s.trim().parse().map_err(|_| bad())?))
                        })
                        .collect::<Result<_>>()?
                }
                "seeds" => {
                    seeds = value
                        .split(',')
                        .map(|s| s.trim().parse().map_err(|_| bad()))
                        .collect::<Result<_>>()?
                }
                "real_train" => real_train = value.parse().map_err(at)?,
                "synth_train" => synth_train = value.parse().map_err(at)?,
                "test_per_split" => test_per_split = value.parse().map_err(|_| bad())?,
                _ => {
                    if let Some(name) = key.strip_prefix("split.") {
                        if name.is_empty() || name.contains(['/', ',']) || splits.iter().any(|(n, _)| n == name) {
                            return Err(Error::Config(format!("line {line}: bad or repeated split name `{name}`")));
                        }
                        splits.push((name.to_string(), value.parse().map_err(at)?));
                    } else if let Some(k) = key.strip_prefix("train.") {
                        if k == "algorithm" || k == "seed" {
                            return Err(Error::Config(format!(
                                "line {line}: `{key}` is set by the sweep, not the template"
                            )));
                        }
                        template.set(k, &value).map_err(at)?;
                    } else {
                        return Err(Error::Config(format!("line {line}: unknown sweep key `{key}`")));
                    }
                }
            }
        }
        template.algorithm = algorithm.ok_or_else(|| Error::Config("sweep needs `algorithm`".into()))?;
        let spec = Self {
            algorithm: template.algorithm,
            mixes,
            seeds,
            real_train,
            synth_train,
            test_per_split,
            splits,
            template,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mixes.is_empty() || self.splits.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("a sweep needs at least one mix, one split and one seed".into()));
        }
        if self.mixes.iter().any(|&(r, s)| r + s == 0) {
            return Err(Error::Config("every mix needs at least one sample".into()));
        }
        if self.test_per_split == 0 {
            return Err(Error::Config("test_per_split must be positive".into()));
        }
        if self.template.algorithm != self.algorithm {
            return Err(Error::Config("template algorithm differs from the sweep algorithm".into()));
        }
        self.template.validate()
    }

    /// Text form accepted by [`SweepSpec::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "algorithm = {}", self.algorithm);
        let mixes: Vec<String> = self.mixes.iter().map(|(r, n)| format!("{r}:{n}")).collect();
        let _ = writeln!(s, "mixes = {}", mixes.join(", "));
        let seeds: Vec<String> = self.seeds.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "seeds = {}", seeds.join(", "));
        let _ = writeln!(s, "real_train = {}", self.real_train);
        let _ = writeln!(s, "synth_train = {}", self.synth_train);
        let _ = writeln!(s, "test_per_split = {}", self.test_per_split);
        for (name, f) in &self.splits {
            let _ = writeln!(s, "split.{name} = {f}");
        }
        for k in crate::trainer::CONFIG_KEYS {
            if *k != "algorithm" && *k != "seed" {
                let _ = writeln!(s, "train.{k} = {}", self.template.get(k).expect("listed key"));
            }
        }
        s
    }

    pub fn mix_label(&self, i: usize) -> String {
        let (n_real, n_synth) = self.mixes[i];
        MixSpec {
            n_real,
            n_synth,
            seed: 0,
        }
        .label()
    }

    /// Directory of one `(mix, seed)` training run inside a sweep.
    pub fn cell_dir(&self, out: &Path, mix: usize, seed: u64) -> PathBuf {
        out.join("cells").join(format!("{}_seed{seed}", self.mix_label(mix)))
    }
}

fn message(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

/// Score of one sweep cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellResult {
    pub l1_percent: f64,
    pub epochs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub mix: String,
    pub split: String,
    pub seed: u64,
    /// The score, or the error that stopped the cell.
    pub result: std::result::Result<CellResult, String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.result.is_err()).count()
    }
}

/// Reserves the test sets: for each split in order, the first
/// `test_per_split` real-analog samples that match it and are not yet
/// taken. Returns the test sets and the reserved mask.
fn reserve_tests(spec: &SweepSpec, real: &Dataset) -> Result<(Vec<Dataset>, Vec<bool>)> {
    let mut taken = vec![false; real.len()];
    let mut tests = Vec::with_capacity(spec.splits.len());
    for (name, filter) in &spec.splits {
        let mut picked = Vec::new();
        for (i, s) in real.iter().enumerate() {
            if picked.len() == spec.test_per_split {
                break;
            }
            if !taken[i] && s.tags.provenance == Family::RealAnalog && filter.matches(&s.tags) {
                taken[i] = true;
                picked.push(i);
            }
        }
        if picked.len() < spec.test_per_split {
            return Err(Error::Data(format!(
                "split `{name}` wants {} real test samples, pool has {}",
                spec.test_per_split,
                picked.len()
            )));
        }
        tests.push(real.select(&picked));
    }
    Ok((tests, taken))
}

fn candidates(pool: &Dataset, filter: &TagFilter, exclude: Option<&[bool]>) -> Dataset {
    pool.iter()
        .enumerate()
        .filter(|(i, s)| exclude.is_none_or(|x| !x[*i]) && filter.matches(&s.tags))
        .map(|(_, s)| s.clone())
        .collect()
}

/// Trains one cell, saves its record and checkpoint, and scores it on
/// every test set.
fn run_cell(spec: &SweepSpec, train: &Dataset, tests: &[Dataset], seed: u64, dir: &Path) -> Result<Vec<CellResult>> {
    let cfg = TrainConfig {
        seed,
        ..spec.template.clone()
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (generator, record) = match spec.algorithm {
        Algorithm::Cgan => {
            let (g, d, rec) = train_cgan(train, &cfg)?;
            save_checkpoint(&[("g", &g.params), ("d", &d.params)], &cfg, dir.join(CHECKPOINT_FILE))?;
            (g, rec)
        }
        Algorithm::Cyclegan => {
            let (g_ab, g_ba, d_a, d_b, rec) = train_cyclegan(train, train, &cfg)?;
            let models = [
                ("g_ab", &g_ab.params),
                ("g_ba", &g_ba.params),
                ("d_a", &d_a.params),
                ("d_b", &d_b.params),
            ];
            save_checkpoint(&models, &cfg, dir.join(CHECKPOINT_FILE))?;
            (g_ab, rec)
        }
    };
    record.write_csv(dir.join(RECORD_FILE))?;
    let z = Rng::new(seed, "eval");
    tests
        .iter()
        .map(|t| {
            Ok(CellResult {
                l1_percent: evaluate(&generator, t, &z)?.mean,
                epochs: record.len(),
            })
        })
        .collect()
}

/// Runs every `(mix, seed)` cell of `spec`. Test sets are reserved from
/// the real-analog samples of `real` and written to `out/tests/<split>`;
/// each cell writes its run record and checkpoint under `out/cells`.
/// A failing cell yields error rows and the sweep continues.
pub fn run_sweep(spec: &SweepSpec, real: &Dataset, synth: &Dataset, out: impl AsRef<Path>) -> Result<SweepTable> {
    spec.validate()?;
    let out = out.as_ref();
    let (tests, taken) = reserve_tests(spec, real)?;
    let real_pool = candidates(real, &spec.real_train, Some(&taken));
    let synth_pool = candidates(synth, &spec.synth_train, None);
    let (max_real, max_synth) = spec
        .mixes
        .iter()
        .fold((0, 0), |(a, b), &(r, s)| (a.max(r), b.max(s)));
    if max_real > real_pool.len() || max_synth > synth_pool.len() {
        return Err(Error::Data(format!(
            "mixes need {max_real} real and {max_synth} synthetic training samples, pools have {} and {}",
            real_pool.len(),
            synth_pool.len()
        )));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    fs::write(out.join("sweep_spec.txt"), spec.to_text()).map_err(|e| Error::io(out, e))?;
    for ((name, _), t) in spec.splits.iter().zip(&tests) {
        write_dataset(t, out.join("tests").join(name))?;
    }
    let mut table = SweepTable::default();
    for (mi, &(n_real, n_synth)) in spec.mixes.iter().enumerate() {
        let label = spec.mix_label(mi);
        let mut per_seed = Vec::new();
        for &seed in &spec.seeds {
            let dir = spec.cell_dir(out, mi, seed);
            let outcome = mix(&real_pool, &synth_pool, MixSpec { n_real, n_synth, seed })
                .and_then(|train| run_cell(spec, &train, &tests, seed, &dir));
            if let Err(e) = &outcome {
                let _ = fs::create_dir_all(&dir).and_then(|_| fs::write(dir.join("error.txt"), format!("{e}\n")));
            }
            per_seed.push((seed, outcome.map_err(|e| e.to_string())));
        }
        for (si, (split, _)) in spec.splits.iter().enumerate() {
            for (seed, outcome) in &per_seed {
                table.rows.push(SweepRow {
                    mix: label.clone(),
                    split: split.clone(),
                    seed: *seed,
                    result: outcome.as_ref().map(|r| r[si]).map_err(Clone::clone),
                });
            }
        }
    }
    Ok(table)
}
