use super::*;
use crate::numerics::tests::project;
use crate::numerics::{grad_check, Graph};

fn rng() -> Rng {
    Rng::new(17, "model")
}

fn random_input(shape: &[usize], seed: u64) -> Tensor<f64> {
    gaussian_init(shape, 0.0, 0.5, &mut Rng::new(seed, "input")).unwrap()
}

/// Closed-form parameter count of a U-Net written from the layer table:
/// 4x4 kernels, widths `base * 2^i`, norms (scale and shift, no bias) on the
/// middle encoder levels and on every decoder level except the output.
fn unet_param_count(cin: usize, cout: usize, base: usize, depth: usize) -> usize {
    let conv = |i: usize, o: usize| i * o * 16 + o;
    let normed = |i: usize, o: usize| i * o * 16 + 2 * o;
    let mut total = 0;
    let mut c = cin;
    for i in 0..depth {
        let o = base << i;
        total += if i > 0 && i + 1 < depth { normed(c, o) } else { conv(c, o) };
        c = o;
    }
    for i in (1..depth).rev() {
        let inp = if i + 1 == depth { base << i } else { 2 * (base << i) };
        total += normed(inp, base << (i - 1));
    }
    total + conv(if depth == 1 { base } else { 2 * base }, cout)
}

#[test]
fn unet_parameter_count_is_golden() {
    let g: Generator = build_generator(&GeneratorSpec::unet(3, 1), &rng()).unwrap();
    assert_eq!(unet_param_count(3, 1, 16, 4), 386_865);
    assert_eq!(g.param_count(), 386_865);
    for depth in 1..=5 {
        let spec = GeneratorSpec {
            depth,
            base_width: 4,
            ..GeneratorSpec::unet(2, 3)
        };
        let g: Generator = build_generator(&spec, &rng()).unwrap();
        assert_eq!(g.param_count(), unet_param_count(2, 3, 4, depth));
    }
}

#[test]
fn build_is_deterministic() {
    let spec = GeneratorSpec::resnet(3, 1);
    let a: Generator = build_generator(&spec, &rng()).unwrap();
    let b: Generator = build_generator(&spec, &rng()).unwrap();
    assert_eq!(a, b);
    let c: Generator = build_generator(&spec, &Rng::new(18, "model")).unwrap();
    assert_ne!(a.params.digest(), c.params.digest());
}

#[test]
fn initial_weights_have_std_002() {
    let g: Generator<f64> = build_generator(&GeneratorSpec::unet(3, 1), &rng()).unwrap();
    let d: Discriminator<f64> = build_discriminator(&DiscriminatorSpec::conditional(1, 3), &rng()).unwrap();
    let mut vals = Vec::new();
    for store in [&g.params, &d.params] {
        for (name, t) in store.iter() {
            if name.ends_with(".weight") || name.ends_with(".bias") {
                vals.extend_from_slice(t.data());
            }
        }
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!((std - 0.02).abs() < 0.02 * 0.05, "std {std}");
    assert!(mean.abs() < 1e-3);
    let gammas: Vec<f64> = g
        .params
        .iter()
        .filter(|(n, _)| n.ends_with(".gamma"))
        .flat_map(|(_, t)| t.data().to_vec())
        .collect();
    let gmean = gammas.iter().sum::<f64>() / gammas.len() as f64;
    assert!((gmean - 1.0).abs() < 0.01);
}

#[test]
fn generator_preserves_shape_and_range() {
    for kind in [GeneratorKind::Unet, GeneratorKind::Resnet] {
        for size in [32, 64] {
            let spec = GeneratorSpec {
                kind,
                base_width: 4,
                res_blocks: 1,
                z_mode: ZMode::Channel,
                ..GeneratorSpec::unet(3, 1)
            };
            let g: Generator<f64> = build_generator(&spec, &rng()).unwrap();
            let x = random_input(&[2, 3, size, size], 1);
            let z = sample_noise(&spec, 2, size, size, &mut Rng::new(0, "z")).unwrap();
            let y = generator_forward(&g, &x, z.as_ref()).unwrap();
            assert_eq!(y.shape(), &[2, 1, size, size]);
            assert!(y.data().iter().all(|v| *v > -1.0 && *v < 1.0));
        }
    }
}

#[test]
fn generator_rejects_bad_inputs() {
    let spec = GeneratorSpec {
        base_width: 4,
        ..GeneratorSpec::unet(3, 1)
    };
    let g: Generator<f64> = build_generator(&spec, &rng()).unwrap();
    let x = random_input(&[1, 3, 24, 24], 1);
    assert!(generator_forward(&g, &x, None).is_err());
    let x = random_input(&[1, 3, 32, 32], 1);
    let z = random_input(&[1, 1, 32, 32], 2);
    assert!(generator_forward(&g, &x, Some(&z)).is_err());
    let x2 = random_input(&[1, 2, 32, 32], 1);
    assert!(generator_forward(&g, &x2, None).is_err());

    let zspec = GeneratorSpec {
        z_mode: ZMode::Channel,
        ..spec
    };
    let gz: Generator<f64> = build_generator(&zspec, &rng()).unwrap();
    assert!(generator_forward(&gz, &x, None).is_err());
    assert!(generator_forward(&gz, &x, Some(&z)).is_ok());
}

#[test]
fn different_noise_changes_output() {
    let spec = GeneratorSpec {
        z_mode: ZMode::Channel,
        ..GeneratorSpec::unet(3, 1)
    };
    let g: Generator = build_generator(&spec, &rng()).unwrap();
    let x = random_input(&[1, 3, 64, 64], 1).cast::<f32>();
    let z1 = sample_noise::<f32>(&spec, 1, 64, 64, &mut Rng::new(1, "z")).unwrap();
    let z2 = sample_noise::<f32>(&spec, 1, 64, 64, &mut Rng::new(2, "z")).unwrap();
    let a = generator_forward(&g, &x, z1.as_ref()).unwrap();
    let b = generator_forward(&g, &x, z2.as_ref()).unwrap();
    let diff = a.data().iter().zip(b.data()).map(|(p, q)| (p - q).abs()).fold(0.0f32, f32::max);
    assert!(diff > 0.0);
    assert_eq!(a, generator_forward(&g, &x, z1.as_ref()).unwrap());
}

#[test]
fn discriminator_patch_map() {
    let d: Discriminator<f64> = build_discriminator(&DiscriminatorSpec::conditional(1, 3), &rng()).unwrap();
    let y = random_input(&[2, 1, 64, 64], 3);
    let x = random_input(&[2, 3, 64, 64], 4);
    let p = discriminator_forward(&d, &y, Some(&x)).unwrap();
    assert_eq!(p.shape(), &[2, 1, 6, 6]);
    assert!(p.data().iter().all(|v| *v > 0.0 && *v < 1.0));
    assert!(discriminator_forward(&d, &y, None).is_err());

    let du: Discriminator<f64> = build_discriminator(&DiscriminatorSpec::unconditional(1), &rng()).unwrap();
    let y32 = random_input(&[1, 1, 32, 32], 5);
    assert_eq!(discriminator_forward(&du, &y32, None).unwrap().shape(), &[1, 1, 2, 2]);
    assert!(discriminator_forward(&du, &y32, Some(&y32)).is_err());
}

fn zero_rows(t: &mut Tensor<f64>, rows: std::ops::Range<usize>) {
    let per_row: usize = t.shape()[1..].iter().product();
    t.data_mut()[rows.start * per_row..rows.end * per_row].iter_mut().for_each(|v| *v = 0.0);
}

/// Zeroes every decoder input except the skip from encoder `level`, so the
/// only route from the input to the output runs through that skip.
fn isolate_skip(g: &mut Generator<f64>, level: usize, keep: bool) {
    let depth = g.spec.depth;
    let base = g.spec.base_width;
    for i in (1..depth).rev() {
        let w = g.params.get_mut(&format!("dec{i}.weight")).unwrap();
        let u = if i + 1 == depth { 0 } else { base << i };
        let e = base << i;
        if i > level {
            zero_rows(w, 0..u + e);
        } else if i == level {
            zero_rows(w, 0..u);
            if !keep {
                zero_rows(w, u..u + e);
            }
        } else {
            zero_rows(w, u..u + e);
        }
    }
    let w = g.params.get_mut("out.weight").unwrap();
    let u = if depth == 1 { 0 } else { base };
    if level == 0 {
        zero_rows(w, 0..u);
        if !keep {
            zero_rows(w, u..u + base);
        }
    } else {
        zero_rows(w, u..u + base);
    }
}

#[test]
fn unet_skips_carry_encoder_signal() {
    let spec = GeneratorSpec {
        base_width: 4,
        depth: 3,
        ..GeneratorSpec::unet(3, 1)
    };
    let x1 = random_input(&[1, 3, 16, 16], 1);
    let x2 = random_input(&[1, 3, 16, 16], 2);
    for level in 0..3 {
        let mut g: Generator<f64> = build_generator(&spec, &rng()).unwrap();
        for (_, t) in g.params.iter_mut() {
            *t = t.map(|v| v * 25.0);
        }
        let mut cut = g.clone();
        isolate_skip(&mut g, level, true);
        isolate_skip(&mut cut, level, false);
        let changed = |m: &Generator<f64>| {
            let a = generator_forward(m, &x1, None).unwrap();
            let b = generator_forward(m, &x2, None).unwrap();
            a.data().iter().zip(b.data()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
        };
        assert!(changed(&g) > 1e-6, "level {level} skip carries no signal");
        assert_eq!(changed(&cut), 0.0, "level {level} has a path besides the skip");
    }
}

fn rescaled<S: Clone>(m: &Model<S, f64>, seed: u64) -> ParamStore<f64> {
    let mut p = m.params.clone();
    let mut r = Rng::new(seed, "rescale");
    for (name, t) in p.iter_mut() {
        let mean = if name.ends_with(".gamma") { 1.0 } else { 0.0 };
        *t = gaussian_init(t.shape(), mean, 0.5, &mut r).unwrap();
    }
    p
}

#[test]
fn one_level_unet_passes_grad_check() {
    let spec = GeneratorSpec {
        depth: 1,
        base_width: 4,
        z_mode: ZMode::Channel,
        ..GeneratorSpec::unet(3, 1)
    };
    let g: Generator<f64> = build_generator(&spec, &rng()).unwrap();
    let mut p = rescaled(&g, 1);
    let x = random_input(&[1, 3, 8, 8], 5);
    let z = random_input(&[1, 1, 8, 8], 6);
    let err = grad_check(
        |gr: &mut Graph<f64>, b: &Bound<'_, f64>| {
            let xv = gr.constant(x.clone())?;
            let zv = gr.constant(z.clone())?;
            let out = generator_graph(&spec, gr, b, xv, Some(zv))?;
            project(gr, out, 3)
        },
        &mut p,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn one_block_resnet_passes_grad_check() {
    let spec = GeneratorSpec {
        base_width: 2,
        res_blocks: 1,
        ..GeneratorSpec::resnet(3, 1)
    };
    let g: Generator<f64> = build_generator(&spec, &rng()).unwrap();
    let mut p = rescaled(&g, 2);
    let x = random_input(&[1, 3, 8, 8], 7);
    let err = grad_check(
        |gr: &mut Graph<f64>, b: &Bound<'_, f64>| {
            let xv = gr.constant(x.clone())?;
            let out = generator_graph(&spec, gr, b, xv, None)?;
            project(gr, out, 4)
        },
        &mut p,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn discriminator_passes_grad_check() {
    let spec = DiscriminatorSpec {
        widths: vec![2, 3],
        ..DiscriminatorSpec::conditional(1, 2)
    };
    let d: Discriminator<f64> = build_discriminator(&spec, &rng()).unwrap();
    let mut p = rescaled(&d, 3);
    let y = random_input(&[1, 1, 32, 32], 8);
    let x = random_input(&[1, 2, 32, 32], 9);
    let err = grad_check(
        |gr: &mut Graph<f64>, b: &Bound<'_, f64>| {
            let yv = gr.constant(y.clone())?;
            let xv = gr.constant(x.clone())?;
            let out = discriminator_graph(&spec, gr, b, yv, Some(xv))?;
            project(gr, out, 5)
        },
        &mut p,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn spec_keywords_round_trip() {
    for k in [GeneratorKind::Unet, GeneratorKind::Resnet] {
        assert_eq!(k.to_string().parse::<GeneratorKind>().unwrap(), k);
    }
    for z in [ZMode::None, ZMode::Channel] {
        assert_eq!(z.to_string().parse::<ZMode>().unwrap(), z);
    }
    assert!("gan".parse::<GeneratorKind>().is_err());
}

