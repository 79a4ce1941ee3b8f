//! Runs a small data-mix sweep (real only against real plus synthetic),
//! scores every cell on two held-out condition splits and writes the
//! report with image grids.
//!
//! cargo run --release --example data_mix_sweep -- [OUT_DIR]

use std::path::PathBuf;

use v2ir::datapipe::{Dataset, Family, TimeOfDay, Viewpoint};
use v2ir::evalcli::{emit_report, run_sweep, summarize, SweepSpec};
use v2ir::numerics::Rng;
use v2ir::synthcam::{generate_dataset, ConditionMix, GenerateOptions, RenderConfig};

const SPEC: &str = "
algorithm = cgan
mixes = 6:0, 6:18
seeds = 1, 2
real_train = time=day background=0
test_per_split = 4
split.in_condition = time=day background=0
split.cross_time_and_background = time=night background=1,2
train.width = 32
train.height = 32
train.base_width = 8
train.depth = 3
train.d_widths = 16,32,64
train.max_epochs = 15
";

fn pool(family: Family, n: usize, times: &[TimeOfDay], backgrounds: &[u32], label: &str) -> v2ir::Result<Dataset> {
    let mix = ConditionMix::uniform(times, &[Viewpoint::Overhead, Viewpoint::Angled], backgrounds)?;
    let opts = GenerateOptions::new(family, RenderConfig::new(32, 32)?);
    generate_dataset(n, &mix, &opts, &Rng::new(12, label))
}

fn main() -> v2ir::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("v2ir-sweep"));
    let spec = SweepSpec::parse(SPEC)?;

    let day = pool(Family::RealAnalog, 12, &[TimeOfDay::Day], &[0], "real-day")?;
    let night = pool(Family::RealAnalog, 6, &[TimeOfDay::Night], &[1, 2], "real-night")?;
    let real: Dataset = day.iter().chain(night.iter()).cloned().collect();
    let synth = pool(Family::Synthetic, 24, &TimeOfDay::ALL, &[0, 1, 2], "synth")?;

    let table = run_sweep(&spec, &real, &synth, &out)?;
    emit_report(&table, &out, Some((&out, 2)))?;
    for s in summarize(&table) {
        let median = s.median_l1_percent.map_or("failed".into(), |m| format!("{m:.2}%"));
        println!("{:<8} {:<26} median L1 {median} over {} seeds", s.mix, s.split, s.seeds);
    }
    println!("report in {}", out.display());
    Ok(())
}
