//! Saves a briefly trained model, reloads it bit-exactly, and shows that a
//! corrupted byte or a wrong magic is rejected.
//!
//! cargo run --release --example checkpoint_roundtrip -- [OUT_DIR]

use std::path::PathBuf;

use v2ir::datapipe::{Family, TimeOfDay, Viewpoint};
use v2ir::evalcli::transform;
use v2ir::numerics::Rng;
use v2ir::synthcam::{generate_dataset, ConditionMix, GenerateOptions, RenderConfig};
use v2ir::trainer::{decode_checkpoint, load_checkpoint, save_checkpoint, train_cgan, TrainConfig};

fn main() -> v2ir::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("v2ir-ckpt"));
    std::fs::create_dir_all(&out).expect("create output directory");

    let mix = ConditionMix::uniform(&TimeOfDay::ALL, &[Viewpoint::Overhead], &[0])?;
    let opts = GenerateOptions::new(Family::Synthetic, RenderConfig::new(32, 32)?);
    let data = generate_dataset(8, &mix, &opts, &Rng::new(4, "ckpt-example"))?;
    let cfg = TrainConfig {
        width: 32,
        height: 32,
        max_epochs: 3,
        ..TrainConfig::default()
    };
    let (g, d, _) = train_cgan(&data, &cfg)?;

    let path = out.join("model.v2ir");
    save_checkpoint(&[("g", &g.params), ("d", &d.params)], &cfg, &path)?;
    let bytes = std::fs::read(&path).expect("read checkpoint");
    println!("checkpoint: {} bytes, {} parameters", bytes.len(), g.param_count() + d.param_count());

    let restored = load_checkpoint(&path)?.generator("g")?;
    assert_eq!(restored, g);
    let visible = &data.samples()[0].visible;
    let a = transform(&g, visible, &mut Rng::new(1, "z"))?;
    let b = transform(&restored, visible, &mut Rng::new(1, "z"))?;
    println!("reloaded generator matches bit for bit: {}", a == b);

    let mut corrupt = bytes.clone();
    corrupt[bytes.len() / 2] ^= 0x10;
    println!("flipped payload bit: {}", decode_checkpoint(&corrupt).unwrap_err());
    let mut foreign = bytes;
    foreign[..4].copy_from_slice(b"XXXX");
    println!("foreign magic:       {}", decode_checkpoint(&foreign).unwrap_err());
    Ok(())
}
