//! Trains the conditional U-Net on procedural pairs, scores it on held-out
//! pairs before and after training, and saves the checkpoint, run record
//! and a preview grid.
//!
//! cargo run --release --example train_cgan -- [OUT_DIR]

use std::path::PathBuf;

use v2ir::datapipe::{write_image, Family, TimeOfDay, Viewpoint};
use v2ir::evalcli::{evaluate, grid_image, transform};
use v2ir::numerics::Rng;
use v2ir::synthcam::{generate_dataset, ConditionMix, GenerateOptions, RenderConfig};
use v2ir::trainer::{save_checkpoint, CganTrainer, TrainConfig};

const TRAIN: usize = 48;
const TEST: usize = 12;
const SIZE: usize = 32;
const EPOCHS: usize = 20;

fn main() -> v2ir::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("v2ir-cgan"));
    std::fs::create_dir_all(&out).expect("create output directory");

    let mix = ConditionMix::uniform(&TimeOfDay::ALL, &Viewpoint::ALL, &[0, 1, 2, 3])?;
    let opts = GenerateOptions::new(Family::RealAnalog, RenderConfig::new(SIZE, SIZE)?);
    let all = generate_dataset(TRAIN + TEST, &mix, &opts, &Rng::new(5, "cgan-example"))?;
    let train = all.select(&(0..TRAIN).collect::<Vec<_>>());
    let test = all.select(&(TRAIN..TRAIN + TEST).collect::<Vec<_>>());

    let cfg = TrainConfig {
        width: SIZE,
        height: SIZE,
        max_epochs: EPOCHS,
        seed: 1,
        ..TrainConfig::default()
    };
    let trainer = CganTrainer::new(&cfg)?;
    let z = Rng::new(0, "eval");
    let before = evaluate(&trainer.generator, &test, &z)?;
    println!("generator: {} parameters", trainer.generator.param_count());
    println!("untrained test L1: {:.2}%", before.mean);

    let (g, d, record) = trainer.train(&train)?;
    for row in record.rows().iter().step_by(5).chain(record.last()) {
        let l = row.losses;
        println!(
            "epoch {:>3}  d {:.3}  g_adv {:.3}  l1 {:.4}  ({:.2}s)",
            row.epoch, l.d_loss, l.g_adv, l.g_l1, row.seconds
        );
    }
    let after = evaluate(&g, &test, &z)?;
    println!("trained test L1:   {:.2}%", after.mean);

    save_checkpoint(&[("g", &g.params), ("d", &d.params)], &cfg, out.join("cgan.v2ir"))?;
    record.write_csv(out.join("record.csv"))?;
    let mut rows = Vec::new();
    for (i, s) in test.iter().take(4).enumerate() {
        let fake = transform(&g, &s.visible, &mut z.fork(&format!("sample/{i}")))?;
        rows.push((s.visible.clone(), fake, s.ir.clone().expect("paired")));
    }
    write_image(&grid_image(&rows)?, out.join("preview.ppm"))?;
    println!("wrote checkpoint, record and preview to {}", out.display());
    Ok(())
}
