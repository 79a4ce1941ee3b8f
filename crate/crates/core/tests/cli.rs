use std::path::Path;
use std::process::{Command, Output};

use v2ir::datapipe::read_image;
use v2ir::synthcam::read_dataset;

fn v2ir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_v2ir")).args(args).output().expect("run binary")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TINY_CONFIG: &str = "width = 32\nheight = 32\nbase_width = 4\ndepth = 2\nd_widths = 4,8\nmax_epochs = 2\nbatch = 2\nwall_time = false\n";

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(code(&v2ir(&[])), 1);
    assert_eq!(code(&v2ir(&["frobnicate"])), 1);
    assert_eq!(code(&v2ir(&["gen-data", "--family", "lidar", "--n", "2", "--out", "x", "--seed", "1"])), 1);
    assert_eq!(code(&v2ir(&["--help"])), 0);
    assert_eq!(code(&v2ir(&["train", "--help"])), 0);
}

#[test]
fn gen_data_train_transform_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = v2ir(&["gen-data", "--family", "real_analog", "--n", "4", "--out", s(&data), "--seed", "3", "--size", "32", "--time", "night"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let ds = read_dataset(&data).unwrap();
    assert_eq!(ds.len(), 4);
    assert!(ds.iter().all(|p| p.tags.condition.time == v2ir::datapipe::TimeOfDay::Night));

    let config = dir.path().join("train.cfg");
    std::fs::write(&config, TINY_CONFIG).unwrap();
    let run = dir.path().join("run");
    let out = v2ir(&["train", "--algo", "cgan", "--data", s(&data), "--config", s(&config), "--out", s(&run), "--seed", "5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let record = std::fs::read_to_string(run.join("record.csv")).unwrap();
    assert_eq!(record.lines().count(), 3);
    let ckpt = run.join("checkpoint.v2ir");

    let fake = dir.path().join("fake.pgm");
    let vis = data.join("00000_vis.ppm");
    let out = v2ir(&["transform", "--checkpoint", s(&ckpt), "--in", s(&vis), "--out", s(&fake), "--z-seed", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let img = read_image(&fake).unwrap();
    assert_eq!((img.width(), img.height(), img.channels()), (32, 32, 1));

    let csv = dir.path().join("eval.csv");
    let out = v2ir(&["eval", "--checkpoint", s(&ckpt), "--data", s(&data), "--out", s(&csv)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("sample,l1_percent"));
    assert_eq!(text.lines().count(), 5);

    let again = dir.path().join("run2");
    v2ir(&["train", "--algo", "cgan", "--data", s(&data), "--config", s(&config), "--out", s(&again), "--seed", "5"]);
    assert_eq!(std::fs::read(run.join("record.csv")).unwrap(), std::fs::read(again.join("record.csv")).unwrap());
    assert_eq!(std::fs::read(&ckpt).unwrap(), std::fs::read(again.join("checkpoint.v2ir")).unwrap());
}

#[test]
fn cyclegan_training_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&v2ir(&["gen-data", "--family", "synthetic", "--n", "3", "--out", s(&a), "--seed", "1", "--size", "32"])), 0);
    assert_eq!(code(&v2ir(&["gen-data", "--family", "synthetic", "--n", "2", "--out", s(&b), "--seed", "2", "--size", "32"])), 0);
    let config = dir.path().join("train.cfg");
    std::fs::write(&config, format!("{TINY_CONFIG}res_blocks = 1\n")).unwrap();
    let run = dir.path().join("run");
    let out = v2ir(&["train", "--algo", "cyclegan", "--data", s(&a), "--data-b", s(&b), "--config", s(&config), "--out", s(&run), "--seed", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let ck = v2ir::trainer::load_checkpoint(run.join("checkpoint.v2ir")).unwrap();
    let roles: Vec<&str> = ck.models.iter().map(|(r, _)| r.as_str()).collect();
    assert_eq!(roles, ["g_ab", "g_ba", "d_a", "d_b"]);
}

#[test]
fn error_classes_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(code(&v2ir(&["gen-data", "--family", "synthetic", "--n", "2", "--out", s(&data), "--seed", "1", "--size", "32"])), 0);

    let bad_config = dir.path().join("bad.cfg");
    std::fs::write(&bad_config, "learning_rate = 3\n").unwrap();
    let run = dir.path().join("run");
    let args = |cfg: &Path| {
        vec!["train".to_string(), "--algo".into(), "cgan".into(), "--data".into(), s(&data).into(), "--config".into(), s(cfg).into(), "--out".into(), s(&run).into(), "--seed".into(), "1".into()]
    };
    let run_args = |cfg: &Path| {
        let a = args(cfg);
        v2ir(&a.iter().map(String::as_str).collect::<Vec<_>>())
    };
    assert_eq!(code(&run_args(&bad_config)), 1);

    let diverging = dir.path().join("diverge.cfg");
    std::fs::write(&diverging, format!("{TINY_CONFIG}lr_d = 1e30\nlr_g = 1e30\nmax_epochs = 20\n")).unwrap();
    let out = run_args(&diverging);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));

    let missing = v2ir(&["eval", "--checkpoint", s(&dir.path().join("none.v2ir")), "--data", s(&data), "--out", s(&dir.path().join("e.csv"))]);
    assert_eq!(code(&missing), 2);

    let junk = dir.path().join("junk.v2ir");
    std::fs::write(&junk, b"XXXXjunkjunkjunkjunk").unwrap();
    let out = v2ir(&["transform", "--checkpoint", s(&junk), "--in", s(&data.join("00000_vis.ppm")), "--out", s(&dir.path().join("o.pgm"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));
}

#[test]
fn sweep_and_report_commands() {
    let dir = tempfile::tempdir().unwrap();
    let (real, synth) = (dir.path().join("real"), dir.path().join("synth"));
    assert_eq!(code(&v2ir(&["gen-data", "--family", "real_analog", "--n", "8", "--out", s(&real), "--seed", "1", "--size", "32"])), 0);
    assert_eq!(code(&v2ir(&["gen-data", "--family", "synthetic", "--n", "4", "--out", s(&synth), "--seed", "2", "--size", "32"])), 0);
    let spec = dir.path().join("sweep.spec");
    let train: String = TINY_CONFIG.lines().map(|l| format!("train.{l}\n")).collect();
    std::fs::write(&spec, format!("algorithm = cgan\nmixes = 2:0, 2:2\nseeds = 1, 2\ntest_per_split = 2\nsplit.all = *\n{train}")).unwrap();
    let out_dir = dir.path().join("sweep");
    let out = v2ir(&["sweep", "--spec", s(&spec), "--real", s(&real), "--synth", s(&synth), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(out_dir.join("grids/r2+s2_all.ppm").is_file());

    let report = dir.path().join("report");
    let out = v2ir(&["report", "--table", s(&out_dir.join("sweep.csv")), "--out", s(&report), "--grid-samples", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(report.join("sweep.csv")).unwrap(), table);
    let grid = read_image(report.join("grids/r2+s0_all.ppm")).unwrap();
    assert_eq!((grid.width(), grid.height()), (3 * 32 + 4, 32));

    std::fs::write(&spec, "algorithm = cgan\nmixes = 2:0\n").unwrap();
    assert_eq!(code(&v2ir(&["sweep", "--spec", s(&spec), "--real", s(&real), "--synth", s(&synth), "--out", s(&out_dir)])), 1);
}
