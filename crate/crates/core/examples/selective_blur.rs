//! Renders one scene, applies the edge-preserving blur to both images and
//! writes before/after files.
//!
//! cargo run --release --example selective_blur -- [OUT_DIR]

use std::path::PathBuf;

use v2ir::datapipe::{write_image, Condition, TimeOfDay, Viewpoint};
use v2ir::numerics::Rng;
use v2ir::synthcam::{
    render_ir, render_visible, sample_scene, selective_gaussian_blur, RenderConfig, DEFAULT_MAX_DELTA, DEFAULT_RADIUS,
};

fn main() -> v2ir::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("v2ir-blur"));
    std::fs::create_dir_all(&out).expect("create output directory");

    let rng = Rng::new(3, "blur-example");
    let scene = sample_scene(Condition::new(TimeOfDay::Day, Viewpoint::Angled, 2), &mut rng.fork("scene"));
    let cfg = RenderConfig::new(96, 96)?;
    let visible = render_visible(&scene, cfg, &mut rng.fork("visible"))?;
    let ir = render_ir(&scene, cfg, &mut rng.fork("ir"))?;

    let max_delta = DEFAULT_MAX_DELTA as i32;
    let visible_blurred = selective_gaussian_blur(&visible, DEFAULT_RADIUS, max_delta)?;
    let ir_blurred = selective_gaussian_blur(&ir, DEFAULT_RADIUS, max_delta)?;

    println!("scene: {} targets", scene.targets.len());
    println!("radius {DEFAULT_RADIUS}, max_delta {max_delta}");
    println!(
        "visible gradient energy {:.1} -> {:.1}",
        visible.gradient_energy(),
        visible_blurred.gradient_energy()
    );
    println!("ir gradient energy      {:.1} -> {:.1}", ir.gradient_energy(), ir_blurred.gradient_energy());

    write_image(&visible, out.join("visible.ppm"))?;
    write_image(&visible_blurred, out.join("visible_blurred.ppm"))?;
    write_image(&ir, out.join("ir.pgm"))?;
    write_image(&ir_blurred, out.join("ir_blurred.pgm"))?;
    println!("wrote images to {}", out.display());
    Ok(())
}
