use super::*;
use crate::datapipe::{Condition, Family, Sample, TagFilter, Tags, TimeOfDay, Viewpoint};
use crate::models::build_generator;
use crate::numerics::Tensor;
use crate::synthcam::{generate_dataset, ConditionMix, GenerateOptions, RenderConfig};
use crate::trainer::{Algorithm, TrainConfig};

fn pool(family: Family, n: usize, seed: u64, size: usize) -> Dataset {
    let mix = ConditionMix::uniform(&TimeOfDay::ALL, &[Viewpoint::Overhead], &[0, 1]).unwrap();
    let opts = GenerateOptions::new(family, RenderConfig::new(size, size).unwrap());
    generate_dataset(n, &mix, &opts, &Rng::new(seed, "pool")).unwrap()
}

fn tiny_template() -> TrainConfig {
    TrainConfig {
        width: 32,
        height: 32,
        base_width: 4,
        depth: 2,
        d_widths: vec![4, 8],
        batch: 2,
        max_epochs: 1,
        wall_time: false,
        ..TrainConfig::default()
    }
}

fn tiny_spec() -> SweepSpec {
    SweepSpec::parse(
        "algorithm = cgan\n\
         mixes = 2:0, 1:1, 1:3\n\
         seeds = 1, 2, 3\n\
         test_per_split = 2\n\
         split.day = time=day\n\
         split.night = time=night\n\
         train.width = 32\ntrain.height = 32\ntrain.base_width = 4\ntrain.depth = 2\n\
         train.d_widths = 4,8\ntrain.batch = 2\ntrain.max_epochs = 1\ntrain.wall_time = false\n",
    )
    .unwrap()
}

#[test]
fn ground_truth_oracle_scores_zero() {
    let test = pool(Family::RealAnalog, 4, 1, 32);
    let ev = evaluate_with(&test, |i, _| Ok(test.samples()[i].ir.clone().unwrap())).unwrap();
    assert_eq!(ev.mean, 0.0);
    assert_eq!(ev.per_sample, vec![0.0; 4]);
}

#[test]
fn mid_gray_against_binary_truth_scores_fifty() {
    let mut px = vec![0u8; 64];
    px[32..].fill(255);
    let truth = Image::new(8, 8, 1, px).unwrap();
    let visible = Image::filled(8, 8, 3, 10).unwrap();
    let tags = Tags {
        provenance: Family::RealAnalog,
        condition: Condition::new(TimeOfDay::Day, Viewpoint::Overhead, 0),
    };
    let test = Dataset::new(vec![Sample::paired(visible, truth, tags).unwrap()]);
    let gray = denormalize(&Tensor::<f32>::zeros(&[1, 1, 8, 8])).unwrap();
    let ev = evaluate_with(&test, |_, _| Ok(gray.clone())).unwrap();
    assert!((ev.mean - 50.0).abs() < 1e-12, "{}", ev.mean);
}

#[test]
fn evaluate_is_pure_and_rejects_unpaired() {
    let cfg = tiny_template();
    let g = build_generator(&cfg.generator_spec("g").unwrap(), &Rng::new(3, "g")).unwrap();
    let test = pool(Family::RealAnalog, 3, 2, 32);
    let z = Rng::new(5, "eval");
    let a = evaluate(&g, &test, &z).unwrap();
    let b = evaluate(&g, &test, &z).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.per_sample.len(), 3);
    assert!(a.mean > 0.0 && a.mean < 100.0);
    let c = evaluate(&g, &test, &Rng::new(6, "eval")).unwrap();
    assert_ne!(a.per_sample, c.per_sample);
    let mut s = test.into_samples();
    s[2].ir = None;
    assert!(matches!(evaluate(&g, &Dataset::new(s), &z), Err(Error::Data(_))));
    assert!(matches!(evaluate(&g, &Dataset::default(), &z), Err(Error::Data(_))));
}

#[test]
fn median_handles_odd_and_even() {
    assert_eq!(median(&[]), None);
    assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
    assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
}

#[test]
fn sweep_spec_parses_and_round_trips() {
    let spec = tiny_spec();
    assert_eq!(spec.algorithm, Algorithm::Cgan);
    assert_eq!(spec.mixes, [(2, 0), (1, 1), (1, 3)]);
    assert_eq!(spec.seeds, [1, 2, 3]);
    assert_eq!(spec.splits[1].0, "night");
    assert_eq!(spec.template.base_width, 4);
    assert_eq!(spec.real_train, TagFilter::any());
    assert_eq!(SweepSpec::parse(&spec.to_text()).unwrap(), spec);
    assert_eq!(spec.mix_label(2), "r1+s3");
}

#[test]
fn sweep_spec_rejects_bad_input() {
    let base = "algorithm = cgan\nmixes = 1:0\nseeds = 1\nsplit.a = *\n";
    assert!(SweepSpec::parse(base).is_ok());
    for bad in [
        "mixes = 1:0\nseeds = 1\nsplit.a = *\n",
        "algorithm = cgan\nseeds = 1\nsplit.a = *\n",
        "algorithm = cgan\nmixes = 1:0\nsplit.a = *\n",
        "algorithm = cgan\nmixes = 1:0\nseeds = 1\n",
        "algorithm = cgan\nmixes = 0:0\nseeds = 1\nsplit.a = *\n",
        "algorithm = cgan\nmixes = 1-0\nseeds = 1\nsplit.a = *\n",
        "algorithm = cgan\nmixes = 1:0\nseeds = x\nsplit.a = *\n",
        "algorithm = gan\nmixes = 1:0\nseeds = 1\nsplit.a = *\n",
        &format!("{base}split.a = time=day\n"),
        &format!("{base}split.b = colour=red\n"),
        &format!("{base}train.seed = 3\n"),
        &format!("{base}train.bogus = 3\n"),
        &format!("{base}colour = red\n"),
        &format!("{base}test_per_split = 0\n"),
    ] {
        let err = SweepSpec::parse(bad).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{bad}: {err}");
    }
}

#[test]
fn sweep_fills_table_and_is_deterministic() {
    let spec = tiny_spec();
    let real = pool(Family::RealAnalog, 12, 3, 32);
    let synth = pool(Family::Synthetic, 6, 4, 32);
    let dir = tempfile::tempdir().unwrap();
    let table = run_sweep(&spec, &real, &synth, dir.path().join("a")).unwrap();
    assert_eq!(table.rows.len(), 18);
    assert_eq!(table.failures(), 0);
    for r in &table.rows {
        let c = r.result.as_ref().unwrap();
        assert!(c.l1_percent.is_finite() && c.epochs == 1);
    }
    assert_eq!((table.rows[0].mix.as_str(), table.rows[0].split.as_str()), ("r2+s0", "day"));
    let cell = spec.cell_dir(&dir.path().join("a"), 2, 3);
    assert!(cell.join(CHECKPOINT_FILE).is_file() && cell.join(RECORD_FILE).is_file());
    let again = run_sweep(&spec, &real, &synth, dir.path().join("b")).unwrap();
    assert_eq!(table.to_csv(), again.to_csv());
}

#[test]
fn sweep_test_sets_are_real_and_held_out() {
    let spec = tiny_spec();
    let real = pool(Family::RealAnalog, 12, 3, 32);
    let synth = pool(Family::Synthetic, 6, 4, 32);
    let dir = tempfile::tempdir().unwrap();
    run_sweep(&spec, &real, &synth, dir.path()).unwrap();
    let day = crate::synthcam::read_dataset(dir.path().join("tests/day")).unwrap();
    let night = crate::synthcam::read_dataset(dir.path().join("tests/night")).unwrap();
    assert_eq!((day.len(), night.len()), (2, 2));
    assert!(day.iter().all(|s| s.tags.condition.time == TimeOfDay::Day));
    assert!(night.iter().all(|s| s.tags.condition.time == TimeOfDay::Night));
    assert!(day.iter().chain(night.iter()).all(|s| s.tags.provenance == Family::RealAnalog));
    let too_small = SweepSpec {
        mixes: vec![(9, 0)],
        ..spec
    };
    let err = run_sweep(&too_small, &real, &synth, dir.path().join("x")).unwrap_err();
    assert!(matches!(err, Error::Data(_)), "{err}");
}

#[test]
fn failing_cells_do_not_stop_the_sweep() {
    let spec = tiny_spec();
    let real = pool(Family::RealAnalog, 12, 3, 32);
    let synth = pool(Family::Synthetic, 6, 4, 16);
    let dir = tempfile::tempdir().unwrap();
    let table = run_sweep(&spec, &real, &synth, dir.path()).unwrap();
    assert_eq!(table.rows.len(), 18);
    assert_eq!(table.failures(), 12);
    assert!(table.rows.iter().filter(|r| r.mix == "r2+s0").all(|r| r.result.is_ok()));
    assert!(spec.cell_dir(dir.path(), 1, 1).join("error.txt").is_file());
    let csv = table.to_csv();
    assert_eq!(parse_sweep_csv(&csv).unwrap().to_csv(), csv);
}

#[test]
fn report_files_match_table() {
    let spec = tiny_spec();
    let real = pool(Family::RealAnalog, 12, 3, 32);
    let synth = pool(Family::Synthetic, 6, 4, 32);
    let dir = tempfile::tempdir().unwrap();
    let table = run_sweep(&spec, &real, &synth, dir.path()).unwrap();
    let out = dir.path().join("report");
    emit_report(&table, &out, Some((dir.path(), 2))).unwrap();
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 19);
    assert_eq!(parse_sweep_csv(&csv).unwrap(), table);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some(SUMMARY_HEADER));
    assert_eq!(lines.count(), 6);
    let grid = crate::datapipe::read_image(out.join("grids/r1+s3_night.ppm")).unwrap();
    assert_eq!((grid.width(), grid.height(), grid.channels()), (3 * 32 + 4, 2 * 32 + 2, 3));
    assert!(matches!(
        emit_report(&SweepTable::default(), &out, None),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn grid_layout_and_separators() {
    let a = Image::filled(5, 4, 3, 10).unwrap();
    let b = Image::filled(5, 4, 1, 20).unwrap();
    let c = Image::filled(5, 4, 1, 30).unwrap();
    let g = grid_image(&[(a.clone(), b.clone(), c.clone())]).unwrap();
    assert_eq!((g.width(), g.height()), (3 * 5 + 2 * GRID_SEPARATOR, 4));
    assert_eq!(g.get(0, 0, 0), 10);
    assert_eq!(g.get(5, 0, 1), 255);
    assert_eq!((g.get(7, 3, 0), g.get(7, 3, 2)), (20, 20));
    assert_eq!(g.get(14, 0, 1), 30);
    let wrong = Image::filled(4, 4, 1, 0).unwrap();
    assert!(matches!(grid_image(&[(a, b, wrong)]), Err(Error::Shape(_))));
    assert!(grid_image(&[]).is_err());
}

#[test]
fn summary_medians_skip_failures() {
    let text = format!("{SWEEP_HEADER}\nm,s,1,10,5\nm,s,2,failed,failed\nm,s,3,30,5\nm,t,1,failed,failed\n");
    let table = parse_sweep_csv(&text).unwrap();
    let s = summarize(&table);
    assert_eq!(s.len(), 2);
    assert_eq!((s[0].seeds, s[0].median_l1_percent), (2, Some(20.0)));
    assert_eq!((s[1].seeds, s[1].median_l1_percent), (0, None));
    assert!(parse_sweep_csv("mix,split\n").is_err());
    assert!(parse_sweep_csv(&format!("{SWEEP_HEADER}\nm,s,1,NaN,5\n")).is_err());
}
