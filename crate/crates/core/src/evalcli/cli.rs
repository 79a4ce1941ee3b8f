use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::datapipe::{read_image, write_image, Family, TimeOfDay, Viewpoint};
use crate::error::{Error, Result};
use crate::numerics::Rng;
use crate::synthcam::{
    generate_dataset, read_dataset, write_dataset, ConditionMix, GenerateOptions, RenderConfig, DEFAULT_MAX_DELTA,
    DEFAULT_RADIUS,
};
use crate::trainer::{load_checkpoint, save_checkpoint, train_cgan, train_cyclegan, Algorithm, TrainConfig};

use super::report::{emit_report, parse_sweep_csv};
use super::sweep::{run_sweep, SweepSpec, CHECKPOINT_FILE, RECORD_FILE};
use super::{evaluate, transform};

#[derive(Debug, Parser)]
#[command(name = "v2ir", version, about = "Visible-to-IR translation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Synthetic,
    #[value(name = "real_analog")]
    RealAnalog,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TimeArg {
    Day,
    Night,
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ViewpointArg {
    Overhead,
    Angled,
    Close,
    Far,
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    Cgan,
    Cyclegan,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a paired visible/IR dataset.
    GenData {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value = "mixed")]
        time: TimeArg,
        #[arg(long, value_enum, default_value = "mixed")]
        viewpoint: ViewpointArg,
        /// Background classes to draw from.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
        backgrounds: Vec<u32>,
        /// Square image extent in pixels.
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = DEFAULT_RADIUS)]
        blur_radius: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_DELTA as i32)]
        max_delta: i32,
    },
    /// Train a model and write its checkpoint and run record.
    Train {
        #[arg(long, value_enum)]
        algo: AlgoArg,
        #[arg(long)]
        data: PathBuf,
        /// IR pool for unpaired training; defaults to `--data`.
        #[arg(long)]
        data_b: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
    },
    /// Translate one visible image to IR.
    Transform {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        z_seed: u64,
    },
    /// Score a checkpoint on a paired dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a data-mix sweep and write its report.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild summaries and image grids from a sweep table.
    Report {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        grid_samples: usize,
    },
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn generator_role(algorithm: Algorithm) -> &'static str {
    match algorithm {
        Algorithm::Cgan => "g",
        Algorithm::Cyclegan => "g_ab",
    }
}

fn gen_data(cmd: &Command) -> Result<String> {
    let Command::GenData {
        family,
        n,
        out,
        seed,
        time,
        viewpoint,
        backgrounds,
        size,
        blur_radius,
        max_delta,
    } = cmd
    else {
        unreachable!()
    };
    let times = match time {
        TimeArg::Day => vec![TimeOfDay::Day],
        TimeArg::Night => vec![TimeOfDay::Night],
        TimeArg::Mixed => TimeOfDay::ALL.to_vec(),
    };
    let viewpoints = match viewpoint {
        ViewpointArg::Overhead => vec![Viewpoint::Overhead],
        ViewpointArg::Angled => vec![Viewpoint::Angled],
        ViewpointArg::Close => vec![Viewpoint::Close],
        ViewpointArg::Far => vec![Viewpoint::Far],
        ViewpointArg::Mixed => Viewpoint::ALL.to_vec(),
    };
    let family = match family {
        FamilyArg::Synthetic => Family::Synthetic,
        FamilyArg::RealAnalog => Family::RealAnalog,
    };
    let mix = ConditionMix::uniform(&times, &viewpoints, backgrounds)?;
    let opts = GenerateOptions {
        blur_radius: *blur_radius,
        max_delta: *max_delta,
        ..GenerateOptions::new(family, RenderConfig::new(*size, *size)?)
    };
    let ds = generate_dataset(*n, &mix, &opts, &Rng::new(*seed, "gen-data"))?;
    write_dataset(&ds, out)?;
    Ok(format!("wrote {} {family} pairs to {}", ds.len(), out.display()))
}

fn train(algo: AlgoArg, data: &Path, data_b: Option<&Path>, config: &Path, out: &Path, seed: u64) -> Result<String> {
    let mut cfg = TrainConfig::parse(&read_text(config)?)?;
    cfg.algorithm = match algo {
        AlgoArg::Cgan => Algorithm::Cgan,
        AlgoArg::Cyclegan => Algorithm::Cyclegan,
    };
    cfg.seed = seed;
    cfg.validate()?;
    let pool_a = read_dataset(data)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let record = match cfg.algorithm {
        Algorithm::Cgan => {
            let (g, d, rec) = train_cgan(&pool_a, &cfg)?;
            save_checkpoint(&[("g", &g.params), ("d", &d.params)], &cfg, out.join(CHECKPOINT_FILE))?;
            rec
        }
        Algorithm::Cyclegan => {
            let pool_b = match data_b {
                Some(p) => read_dataset(p)?,
                None => pool_a.clone(),
            };
            let (g_ab, g_ba, d_a, d_b, rec) = train_cyclegan(&pool_a, &pool_b, &cfg)?;
            let models = [
                ("g_ab", &g_ab.params),
                ("g_ba", &g_ba.params),
                ("d_a", &d_a.params),
                ("d_b", &d_b.params),
            ];
            save_checkpoint(&models, &cfg, out.join(CHECKPOINT_FILE))?;
            rec
        }
    };
    record.write_csv(out.join(RECORD_FILE))?;
    let last = record.last().expect("at least one epoch");
    Ok(format!(
        "trained {} for {} epochs; final generator objective {:.4}",
        cfg.algorithm,
        record.len(),
        last.losses.g_total(&cfg.weights)
    ))
}

fn execute(cmd: &Command) -> Result<String> {
    match cmd {
        Command::GenData { .. } => gen_data(cmd),
        Command::Train {
            algo,
            data,
            data_b,
            config,
            out,
            seed,
        } => train(*algo, data, data_b.as_deref(), config, out, *seed),
        Command::Transform {
            checkpoint,
            input,
            out,
            z_seed,
        } => {
            let ck = load_checkpoint(checkpoint)?;
            let g = ck.generator(generator_role(ck.config.algorithm))?;
            let img = read_image(input)?;
            let ir = transform(&g, &img, &mut Rng::new(*z_seed, "transform"))?;
            write_image(&ir, out)?;
            Ok(format!("wrote {}", out.display()))
        }
        Command::Eval { checkpoint, data, out } => {
            let ck = load_checkpoint(checkpoint)?;
            let g = ck.generator(generator_role(ck.config.algorithm))?;
            let ev = evaluate(&g, &read_dataset(data)?, &Rng::new(ck.config.seed, "eval"))?;
            let mut csv = String::from("sample,l1_percent\n");
            for (i, v) in ev.per_sample.iter().enumerate() {
                csv.push_str(&format!("{i},{v}\n"));
            }
            fs::write(out, csv).map_err(|e| Error::io(out, e))?;
            Ok(format!("mean L1 {:.3}% over {} samples", ev.mean, ev.per_sample.len()))
        }
        Command::Sweep { spec, real, synth, out } => {
            let spec = SweepSpec::parse(&read_text(spec)?)?;
            let table = run_sweep(&spec, &read_dataset(real)?, &read_dataset(synth)?, out)?;
            emit_report(&table, out, Some((out, 2)))?;
            Ok(format!(
                "{} rows, {} failed; report in {}",
                table.rows.len(),
                table.failures(),
                out.display()
            ))
        }
        Command::Report {
            table,
            out,
            grid_samples,
        } => {
            let parsed = parse_sweep_csv(&read_text(table)?)?;
            let sweep_dir = table.parent().filter(|p| p.join("cells").is_dir());
            emit_report(&parsed, out, sweep_dir.map(|d| (d, *grid_samples)))?;
            Ok(format!("report in {}", out.display()))
        }
    }
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 for usage and configuration errors, 2 for data and format errors and
/// 3 for numerical failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
