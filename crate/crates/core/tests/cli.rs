mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cskl::kernel::{load_bank, save_bank, KernelBank};
use serde_json::Value;

fn cskl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cskl"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}

fn generated(dir: &Path, m: &str) -> String {
    let out = cskl(&["gen-synthetic", "--m", m, "--seed", "3", "--out", &p(dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    p(&dir.join("bank.cskb"))
}

#[test]
fn gen_synthetic_writes_bank() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    generated(&a, "40");
    generated(&b, "40");
    let bank = load_bank(&a.join("bank.cskb")).unwrap();
    assert_eq!(bank.len(), 18);
    assert_eq!(bank.samples(), 40);
    assert_eq!(
        fs::read(a.join("bank.cskb")).unwrap(),
        fs::read(b.join("bank.cskb")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("labels.csv")).unwrap(),
        fs::read(b.join("labels.csv")).unwrap()
    );
    assert_eq!(
        fs::read_to_string(a.join("groups.txt"))
            .unwrap()
            .lines()
            .count(),
        18
    );
    assert_eq!(
        json(&a.join("summary.json"))["kernels"]
            .as_array()
            .unwrap()
            .len(),
        18
    );
}

#[test]
fn unwritable_output_is_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("plain");
    fs::write(&file, "x").unwrap();
    let out = cskl(&["gen-synthetic", "--m", "20", "--out", &p(&file.join("sub"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn train_reports_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let bank = generated(&tmp.path().join("gen"), "40");
    let out_dir = tmp.path().join("full");
    let out = cskl(&[
        "train",
        "--bank",
        &bank,
        "--solver",
        "cskl",
        "--t",
        "18",
        "--out",
        &p(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let model = json(&out_dir.join("model.json"));
    let gamma = model["tasks"][0]["gamma"].as_array().unwrap();
    assert_eq!(gamma.len(), 18);
    assert!(gamma
        .iter()
        .all(|g| (g.as_f64().unwrap() - 1.0).abs() <= 1e-6));
    assert!(out_dir.join("trace.csv").exists());

    let objective = |solver: &str, extra: &[&str], dir: &str| {
        let d = tmp.path().join(dir);
        let mut args = vec!["train", "--bank", &bank, "--solver", solver, "--out"];
        let ds = p(&d);
        args.push(&ds);
        args.extend(extra);
        let out = cskl(&args);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        json(&d.join("model.json"))["tasks"][0]["objective"]
            .as_f64()
            .unwrap()
    };
    let a = objective("simplemkl", &[], "simple");
    let b = objective("cskl", &["--t", "1"], "t1");
    assert!((a - b).abs() <= 1e-4, "{a} vs {b}");
}

#[test]
fn validation_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let bank = generated(&tmp.path().join("gen"), "20");
    let out = p(&tmp.path().join("o"));
    for args in [
        vec![
            "train", "--bank", &bank, "--solver", "cskl", "--t", "0", "--out", &out,
        ],
        vec![
            "train", "--bank", &bank, "--solver", "cskl", "--t", "19", "--out", &out,
        ],
        vec!["train", "--bank", &bank, "--solver", "cskl", "--out", &out],
        vec![
            "train",
            "--bank",
            &bank,
            "--solver",
            "simplemkl",
            "--t",
            "2",
            "--out",
            &out,
        ],
        vec![
            "sweep", "--bank", &bank, "--t-min", "5", "--t-max", "3", "--out", &out,
        ],
        vec![
            "compare",
            "--bank",
            &bank,
            "--solver",
            "simplemkl",
            "--out",
            &out,
        ],
        vec![
            "train", "--bank", &bank, "--solver", "cskl", "--t", "2", "--nu", "1.5", "--out", &out,
        ],
        vec!["train", "--no-such-flag"],
    ] {
        assert_eq!(code(&cskl(&args)), 1, "{args:?}");
    }
    // nothing was computed, so nothing was written
    assert!(!tmp.path().join("o").join("model.json").exists());
}

#[test]
fn bad_bank_file_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.cskb");
    fs::write(&path, b"NOPE\x01\x00\x00\x00").unwrap();
    let out = cskl(&["inspect-bank", "--bank", &p(&path)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));
    assert_eq!(
        code(&cskl(&[
            "inspect-bank",
            "--bank",
            &p(&tmp.path().join("missing"))
        ])),
        2
    );
}

#[test]
fn sweep_writes_row_per_t_and_is_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let bank = generated(&tmp.path().join("gen"), "30");
    let dir = tmp.path().join("sweep");
    let run = || {
        let out = cskl(&[
            "sweep",
            "--bank",
            &bank,
            "--out",
            &p(&dir),
            "--threads",
            "2",
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        (
            fs::read(dir.join("sweep.csv")).unwrap(),
            fs::read(dir.join("summary.json")).unwrap(),
        )
    };
    let first = run();
    assert_eq!(String::from_utf8_lossy(&first.0).lines().count(), 19);
    assert_eq!(
        json(&dir.join("summary.json"))["mean_accuracy"]
            .as_array()
            .unwrap()
            .len(),
        18
    );
    assert_eq!(run(), first);
}

#[test]
fn compare_on_three_classes() {
    let tmp = tempfile::tempdir().unwrap();
    let base = common::random_bank(7, 3, 30);
    let labels: Vec<i32> = (0..30).map(|i| i % 3).collect();
    let bank = KernelBank::new(base.kernels().to_vec(), labels).unwrap();
    let path = tmp.path().join("three.cskb");
    save_bank(&bank, &path).unwrap();
    let dir = tmp.path().join("cmp");
    let out = cskl(&[
        "compare",
        "--bank",
        &p(&path),
        "--solver",
        "cskl,simplemkl",
        "--t",
        "2",
        "--out",
        &p(&dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("compare.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    let summary = json(&dir.join("summary.json"));
    for t in summary["tallies"].as_array().unwrap() {
        let n = |k: &str| t[k].as_u64().unwrap();
        assert_eq!(n("wins") + n("losses") + n("ties") + n("undecided"), 3);
    }

    let out = cskl(&["inspect-bank", "--bank", &p(&path)]);
    assert_eq!(code(&out), 0);
    let info: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(info["kernels"], 3);
    assert_eq!(info["classes"].as_array().unwrap().len(), 3);
}

#[test]
fn config_file_and_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let bank = generated(&tmp.path().join("gen"), "30");
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        format!("bank = [{bank:?}]\nsolver = [\"cskl\"]\nt = 3\nsvm = \"c\"\nc = 5.0\n"),
    )
    .unwrap();
    let dir = tmp.path().join("out");
    let out = cskl(&[
        "train",
        "--config",
        &p(&cfg),
        "--c",
        "2.0",
        "--out",
        &p(&dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let model = json(&dir.join("model.json"));
    assert_eq!(model["config"]["c"], 2.0);
    assert_eq!(model["config"]["t"], 3);
    let sum: f64 = model["tasks"][0]["gamma"]
        .as_array()
        .unwrap()
        .iter()
        .map(|g| g.as_f64().unwrap())
        .sum();
    assert!((sum - 3.0).abs() < 1e-8);

    fs::write(&cfg, "tee = 3\n").unwrap();
    assert_eq!(code(&cskl(&["train", "--config", &p(&cfg)])), 1);
}

#[test]
fn solver_cap_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let bank = generated(&tmp.path().join("gen"), "40");
    let cfg = tmp.path().join("cap.toml");
    fs::write(&cfg, "max_outer_iters = 1\n").unwrap();
    let dir = tmp.path().join("out");
    let out = cskl(&[
        "train",
        "--config",
        &p(&cfg),
        "--bank",
        &bank,
        "--solver",
        "cskl",
        "--t",
        "4",
        "--out",
        &p(&dir),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("model.json").exists());
}
