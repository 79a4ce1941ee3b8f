//! Compares backward-pass gradients with central differences for both
//! generator kinds and the patch discriminator, in 64-bit.
//!
//! cargo run --release --example gradient_check

use std::time::Instant;

use v2ir::models::{
    build_discriminator, build_generator, discriminator_graph, generator_graph, DiscriminatorSpec, GeneratorSpec, ZMode,
};
use v2ir::numerics::{gaussian_init, grad_check, Bound, Graph, ParamStore, Rng, Tensor, Var};

const EPS: f64 = 1e-5;

fn input(shape: &[usize], seed: u64) -> v2ir::Result<Tensor<f64>> {
    gaussian_init(shape, 0.0, 0.5, &mut Rng::new(seed, "input"))
}

/// Random weighted sum of a tensor, so every output element gets a
/// distinct upstream gradient.
fn project(g: &mut Graph<f64>, v: Var, seed: u64) -> v2ir::Result<Var> {
    let w = gaussian_init(g.value(v).shape(), 0.0, 1.0, &mut Rng::new(seed, "project"))?;
    let w = g.constant(w)?;
    let p = g.mul(v, w)?;
    g.sum(p)
}

/// Scales parameters up from the 0.02 init so differences are well above
/// roundoff.
fn widen(p: &mut ParamStore<f64>, seed: u64) -> v2ir::Result<()> {
    let mut rng = Rng::new(seed, "widen");
    for (name, t) in p.iter_mut() {
        let mean = if name.ends_with(".gamma") { 1.0 } else { 0.0 };
        *t = gaussian_init(t.shape(), mean, 0.5, &mut rng)?;
    }
    Ok(())
}

fn report(name: &str, err: f64, params: usize) {
    let verdict = if err < 1e-4 { "ok" } else { "FAIL" };
    println!("{name:<28} {params:>6} params  max rel err {err:.2e}  {verdict}");
}

fn main() -> v2ir::Result<()> {
    let start = Instant::now();
    let rng = Rng::new(1, "gradcheck-example");

    let unet = GeneratorSpec {
        depth: 1,
        base_width: 4,
        z_mode: ZMode::Channel,
        ..GeneratorSpec::unet(3, 1)
    };
    let mut p = build_generator::<f64>(&unet, &rng.fork("unet"))?.params;
    widen(&mut p, 1)?;
    let (x, z) = (input(&[1, 3, 8, 8], 2)?, input(&[1, 1, 8, 8], 3)?);
    let n = p.numel();
    let err = grad_check(
        |g: &mut Graph<f64>, b: &Bound<'_, f64>| {
            let (xv, zv) = (g.constant(x.clone())?, g.constant(z.clone())?);
            let y = generator_graph(&unet, g, b, xv, Some(zv))?;
            project(g, y, 4)
        },
        &mut p,
        EPS,
    )?;
    report("u-net, 1 level, with noise", err, n);

    let resnet = GeneratorSpec {
        base_width: 2,
        res_blocks: 1,
        ..GeneratorSpec::resnet(3, 1)
    };
    let mut p = build_generator::<f64>(&resnet, &rng.fork("resnet"))?.params;
    widen(&mut p, 5)?;
    let n = p.numel();
    let err = grad_check(
        |g: &mut Graph<f64>, b: &Bound<'_, f64>| {
            let xv = g.constant(x.clone())?;
            let y = generator_graph(&resnet, g, b, xv, None)?;
            project(g, y, 6)
        },
        &mut p,
        EPS,
    )?;
    report("resnet, 1 block", err, n);

    let disc = DiscriminatorSpec {
        widths: vec![2, 3],
        ..DiscriminatorSpec::conditional(1, 3)
    };
    let mut p = build_discriminator::<f64>(&disc, &rng.fork("disc"))?.params;
    widen(&mut p, 7)?;
    let (y, xc) = (input(&[1, 1, 32, 32], 8)?, input(&[1, 3, 32, 32], 9)?);
    let n = p.numel();
    let err = grad_check(
        |g: &mut Graph<f64>, b: &Bound<'_, f64>| {
            let (yv, xv) = (g.constant(y.clone())?, g.constant(xc.clone())?);
            let d = discriminator_graph(&disc, g, b, yv, Some(xv))?;
            project(g, d, 10)
        },
        &mut p,
        EPS,
    )?;
    report("conditional discriminator", err, n);

    println!("done in {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
