use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pdrf::checkpoint;

const TINY: &str = "\
batch_rays = 16
n_coarse = 8
n_fine = 8
iterations = 3
coarse_resolution = 8
fine_resolution = 16
grid_channels = [4, 2, 2]
crr_hidden = 16
fvr_hidden = 16
pbe_hidden = 16
pos_bands = 4
dir_bands = 2
threads = 1
";

fn pdrf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdrf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = pdrf(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn scene(dir: &Path, blur: &str) {
    ok(&["make-scene", "--out", s(dir), "--blur", blur, "--views", "4", "--res", "16", "--seed", "3"]);
}

#[test]
fn make_scene_writes_manifest_and_images() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("scene");
    scene(&d, "defocus");
    let manifest = fs::read_to_string(d.join("manifest.txt")).unwrap();
    assert_eq!(manifest.lines().filter(|l| l.starts_with("train_")).count(), 4);
    assert_eq!(manifest.lines().filter(|l| l.starts_with("heldout_")).count(), 2);
    assert!(d.join("train_000.png").exists());
    assert!(d.join("heldout_001.png").exists());

    let again = tmp.path().join("again");
    scene(&again, "defocus");
    for entry in fs::read_dir(&d).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(fs::read(d.join(&name)).unwrap(), fs::read(again.join(&name)).unwrap());
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(pdrf(&["train", "--out", "x.ckpt"]).status.code(), Some(2));
    assert_eq!(pdrf(&["make-scene", "--out", "x", "--preset", "teapot"]).status.code(), Some(2));
    assert_eq!(pdrf(&["make-scene", "--out", "x", "--bogus"]).status.code(), Some(2));
    assert_eq!(pdrf(&[]).status.code(), Some(2));
}

#[test]
fn bad_config_reports_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("scene");
    scene(&d, "none");
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "iterations = 3\nbatch_rays = \"many\"\n").unwrap();
    let out = pdrf(&[
        "train", "--data", s(&d), "--config", s(&cfg), "--out", s(&tmp.path().join("m.ckpt")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn train_render_eval_viz_round() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("scene");
    scene(&d, "defocus");
    let cfg = tmp.path().join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let train = |out: &Path, extra: &[&str]| {
        let mut args = vec!["train", "--data", s(&d), "--config", s(&cfg), "--out", s(out), "--quiet"];
        args.extend_from_slice(extra);
        ok(&args)
    };

    let a = tmp.path().join("a.ckpt");
    let b = tmp.path().join("b.ckpt");
    let printed = String::from_utf8(train(&a, &[]).stdout).unwrap();
    train(&b, &[]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(printed.contains("kernel_size = 5"));
    let log = fs::read_to_string(tmp.path().join("a.ckpt.log.csv")).unwrap();
    assert_eq!(log.lines().count(), 4);

    // the saved effective config reproduces the run
    let c = tmp.path().join("c.ckpt");
    let saved = tmp.path().join("a.ckpt.config.toml");
    ok(&["train", "--data", s(&d), "--config", s(&saved), "--out", s(&c), "--quiet"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&c).unwrap());

    // kernel size flag reaches the checkpoint
    let k10 = tmp.path().join("k10.ckpt");
    train(&k10, &["--kernel", "10", "--iterations", "1"]);
    let shape = |p: &Path| {
        checkpoint::load(p)
            .unwrap()
            .into_iter()
            .find(|r| r.name == "pbe.offsets")
            .unwrap()
            .dims
    };
    assert_eq!(shape(&a), vec![4, 5, 2]);
    assert_eq!(shape(&k10), vec![4, 10, 2]);

    let csv1 = tmp.path().join("e1.csv");
    let csv2 = tmp.path().join("e2.csv");
    ok(&["eval", "--ckpt", s(&a), "--data", s(&d), "--out", s(&csv1)]);
    ok(&["eval", "--ckpt", s(&a), "--data", s(&d), "--out", s(&csv2)]);
    let text = fs::read_to_string(&csv1).unwrap();
    assert_eq!(text, fs::read_to_string(&csv2).unwrap());
    assert_eq!(text.lines().count(), 4);

    let r1 = tmp.path().join("r1");
    let r2 = tmp.path().join("r2");
    ok(&["render", "--ckpt", s(&a), "--data", s(&d), "--out", s(&r1)]);
    ok(&["render", "--ckpt", s(&a), "--data", s(&d), "--out", s(&r2)]);
    let img = |dir: &Path| fs::read(dir.join("heldout_000.png")).unwrap();
    assert_eq!(img(&r1), img(&r2));

    let png = tmp.path().join("var.png");
    ok(&["viz-blur", "--ckpt", s(&a), "--data", s(&d), "--view", "1", "--out", s(&png)]);
    let map = image::open(&png).unwrap();
    assert_eq!((map.width(), map.height()), (16, 16));
    assert!(tmp.path().join("var.png.txt").exists());
    let out = pdrf(&["viz-blur", "--ckpt", s(&a), "--data", s(&d), "--view", "9", "--out", s(&png)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn thread_count_does_not_change_the_result() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("scene");
    scene(&d, "defocus");
    let cfg = tmp.path().join("sharded.toml");
    fs::write(&cfg, format!("{TINY}shard_pixels = 4\n")).unwrap();
    let mut ckpts = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(format!("t{threads}.ckpt"));
        ok(&["train", "--data", s(&d), "--config", s(&cfg), "--out", s(&out), "--quiet", "--threads", threads]);
        ckpts.push(fs::read(&out).unwrap());
    }
    assert_eq!(ckpts[0], ckpts[1]);
}

#[test]
fn mismatched_dataset_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("scene");
    scene(&d, "motion");
    let cfg = tmp.path().join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let ck = tmp.path().join("m.ckpt");
    ok(&["train", "--data", s(&d), "--config", s(&cfg), "--out", s(&ck), "--quiet", "--iterations", "1"]);
    let other = tmp.path().join("other");
    ok(&["make-scene", "--out", s(&other), "--views", "4", "--res", "24"]);
    let out = pdrf(&["eval", "--ckpt", s(&ck), "--data", s(&other), "--out", s(&tmp.path().join("e.csv"))]);
    assert_eq!(out.status.code(), Some(1));
}
