//! Trains the cycle-consistent pair of ResNet generators on two unpaired
//! pools of different sizes and reports how the cycle error falls.
//!
//! cargo run --release --example train_cyclegan -- [OUT_DIR]

use std::path::PathBuf;

use v2ir::datapipe::{write_image, Dataset, Family, TimeOfDay, Viewpoint};
use v2ir::evalcli::{evaluate, transform};
use v2ir::numerics::Rng;
use v2ir::synthcam::{generate_dataset, ConditionMix, GenerateOptions, RenderConfig};
use v2ir::trainer::{save_checkpoint, train_cyclegan, Algorithm, TrainConfig};

const SIZE: usize = 32;

fn main() -> v2ir::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("v2ir-cyclegan"));
    std::fs::create_dir_all(&out).expect("create output directory");

    let mix = ConditionMix::uniform(&[TimeOfDay::Day], &[Viewpoint::Overhead, Viewpoint::Angled], &[0, 1])?;
    let opts = GenerateOptions::new(Family::RealAnalog, RenderConfig::new(SIZE, SIZE)?);
    let rng = Rng::new(9, "cyclegan-example");
    // The pools come from different scenes, so no visible image has its IR
    // counterpart in pool B.
    let visible: Dataset = generate_dataset(10, &mix, &opts, &rng.fork("a"))?;
    let infrared: Dataset = generate_dataset(6, &mix, &opts, &rng.fork("b"))?;
    let test = generate_dataset(6, &mix, &opts, &rng.fork("test"))?;

    let cfg = TrainConfig {
        algorithm: Algorithm::Cyclegan,
        width: SIZE,
        height: SIZE,
        base_width: 8,
        res_blocks: 1,
        max_epochs: 60,
        seed: 2,
        ..TrainConfig::default()
    };
    let (g_ab, g_ba, d_a, d_b, record) = train_cyclegan(&visible, &infrared, &cfg)?;
    let cycle = |i: usize| {
        let l = record.rows()[i].losses;
        cfg.weights.lambda_cyc * (l.cyc_ab + l.cyc_ba)
    };
    for i in (0..record.len()).step_by(10).chain([record.len() - 1]) {
        let l = record.rows()[i].losses;
        println!(
            "epoch {:>3}  d {:.3}  g_adv {:.3}  cycle {:.3}",
            record.rows()[i].epoch,
            l.d_loss,
            l.g_adv,
            cycle(i)
        );
    }
    println!("cycle term fell to {:.0}% of epoch 1", 100.0 * cycle(record.len() - 1) / cycle(0));
    println!("visible->IR test L1: {:.2}%", evaluate(&g_ab, &test, &Rng::new(0, "eval"))?.mean);

    let models = [
        ("g_ab", &g_ab.params),
        ("g_ba", &g_ba.params),
        ("d_a", &d_a.params),
        ("d_b", &d_b.params),
    ];
    save_checkpoint(&models, &cfg, out.join("cyclegan.v2ir"))?;
    record.write_csv(out.join("record.csv"))?;
    let s = &test.samples()[0];
    write_image(&transform(&g_ab, &s.visible, &mut Rng::new(0, "z"))?, out.join("fake_ir.pgm"))?;
    write_image(&transform(&g_ba, s.ir.as_ref().expect("paired"), &mut Rng::new(0, "z"))?, out.join("fake_visible.ppm"))?;
    println!("wrote outputs to {}", out.display());
    Ok(())
}
