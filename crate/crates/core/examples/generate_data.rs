//! Generates synthetic and real-analog paired datasets and writes them as
//! manifest directories.
//!
//! cargo run --release --example generate_data -- [OUT_DIR]

use std::path::PathBuf;

use v2ir::datapipe::{Family, TimeOfDay, Viewpoint};
use v2ir::numerics::Rng;
use v2ir::synthcam::{generate_dataset, read_dataset, write_dataset, ConditionMix, GenerateOptions, RenderConfig};

const PAIRS: usize = 24;
const SIZE: usize = 64;

fn main() -> v2ir::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("v2ir-data"));
    let mix = ConditionMix::uniform(&TimeOfDay::ALL, &Viewpoint::ALL, &[0, 1, 2, 3])?;
    let rng = Rng::new(7, "generate-example");

    for family in [Family::Synthetic, Family::RealAnalog] {
        let opts = GenerateOptions::new(family, RenderConfig::new(SIZE, SIZE)?);
        let ds = generate_dataset(PAIRS, &mix, &opts, &rng.fork(family.as_str()))?;
        let dir = out.join(family.as_str());
        write_dataset(&ds, &dir)?;

        let night = ds.iter().filter(|s| s.tags.condition.time == TimeOfDay::Night).count();
        let boxes: usize = ds.iter().map(|s| s.annotations.as_ref().map_or(0, Vec::len)).sum();
        let energy: f64 = ds.iter().map(|s| s.visible.gradient_energy()).sum::<f64>() / ds.len() as f64;
        println!(
            "{family:<12} {} pairs ({night} night), {boxes} boxes, mean gradient energy {energy:.1}, digest {}",
            ds.len(),
            &ds.digest_hex()[..16]
        );

        let back = read_dataset(&dir)?;
        assert_eq!(back, ds, "manifest round trip");
        println!("             written to {}", dir.display());
    }
    Ok(())
}
