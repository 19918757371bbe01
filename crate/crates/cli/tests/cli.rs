use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn donet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_donet"))
        .arg("--deterministic")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = donet(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    donet(args).status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const TINY: &[&str] = &[
    "--T", "1", "--K", "2", "--channels", "4", "--alpha", "0.5", "--batch", "2", "--lr", "0.01", "--seed", "1",
];

fn simulate_small(dir: &Path, samples: &str) {
    ok(&[
        "simulate", "--h", "16", "--w", "16", "--coils", "2", "--samples", samples, "--R", "2", "--center-fraction",
        "0.125", "--out-dir", p(dir),
    ]);
}

fn train_args<'a>(data: &'a Path, out: &'a Path, iters: &'a str) -> Vec<&'a str> {
    let mut a = vec!["train", "--data", p(data), "--out-dir", p(out), "--iters", iters];
    a.extend_from_slice(TINY);
    a
}

/// Replaces the value that follows `flag`.
fn set<'a>(args: &mut [&'a str], flag: &str, value: &'a str) {
    let i = args.iter().position(|a| *a == flag).unwrap();
    args[i + 1] = value;
}

fn log_rows(dir: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(dir.join("log.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn simulate_reports_stride_count_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = ok(&[
            "simulate", "--h", "64", "--w", "64", "--coils", "4", "--R", "3", "--center-fraction", "0", "--samples",
            "2", "--out-dir", p(d),
        ]);
        // every third of 64 columns
        assert!(out.contains("sampled 1408/4096"), "{out}");
    }
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["sampled_fraction"].as_f64().unwrap() * 64.0, 22.0);
    for f in ["manifest.json", "kspace.bin", "mask.bin", "target.bin"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["simulate", "--w", "16", "--R", "17", "--out-dir", p(dir.path())]), 2);
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"alpha": 0.5, "learning_rate": 1}"#).unwrap();
    assert_eq!(code(&["flops", "--config", p(&cfg)]), 2);
    assert_eq!(code(&["flops", "--alpha", "2"]), 2);
    let missing = dir.path().join("nothing");
    assert_eq!(code(&["train", "--data", p(&missing), "--out-dir", p(dir.path())]), 2);
}

#[test]
fn config_file_merges_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"alpha": 0, "channels": 64, "h": 32, "w": 32, "T": 3}"#).unwrap();
    let out = ok(&["flops", "--config", p(&cfg)]);
    assert!(out.contains(": 75497472 multiply-adds"), "{out}");
    let out = ok(&["flops", "--config", p(&cfg), "--alpha", "1"]);
    assert!(out.contains(&format!(": {} multiply-adds", 75497472 / 4)), "{out}");
}

#[test]
fn train_then_eval_agree_with_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let (data, run) = (dir.path().join("data"), dir.path().join("run"));
    simulate_small(&data, "6");
    ok(&train_args(&data, &run, "4"));
    for f in ["log.csv", "best.json", "final.json", "state.json", "config.json", "run_meta.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let rows = log_rows(&run);
    assert_eq!(rows.len(), 4);
    let final_psnr: f64 = rows[3][4].parse().unwrap();

    let ev = dir.path().join("eval");
    let ckpt = run.join("final.json");
    let mut args = vec!["eval", "--data", p(&data), "--checkpoint", p(&ckpt), "--out-dir", p(&ev)];
    args.extend_from_slice(TINY);
    ok(&args);
    let report = fs::read_to_string(ev.join("report.csv")).unwrap();
    let lines: Vec<_> = report.lines().collect();
    // header, two held-out samples, aggregate
    assert_eq!(lines.len(), 4);
    let mean: f64 = lines[3].split(',').nth(1).unwrap().parse().unwrap();
    assert!((mean - final_psnr).abs() < 0.01, "{mean} vs {final_psnr}");
    assert!(ev.join("errors.png").exists());

    args.extend_from_slice(&["--split", "all"]);
    ok(&args);
    assert_eq!(fs::read_to_string(ev.join("report.csv")).unwrap().lines().count(), 8);
}

#[test]
fn zero_rate_keeps_the_loss() {
    let dir = tempfile::tempdir().unwrap();
    let (data, run) = (dir.path().join("data"), dir.path().join("run"));
    simulate_small(&data, "5");
    let mut args = train_args(&data, &run, "3");
    set(&mut args, "--lr", "0");
    set(&mut args, "--batch", "4");
    ok(&args);
    let rows = log_rows(&run);
    let first: f64 = rows[0][3].parse().unwrap();
    let last: f64 = rows[2][3].parse().unwrap();
    assert!((first - last).abs() <= 1e-6 * first, "{first} vs {last}");
}

#[test]
fn resume_reproduces_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let (data, full, part) = (dir.path().join("data"), dir.path().join("full"), dir.path().join("part"));
    simulate_small(&data, "6");
    ok(&train_args(&data, &full, "6"));
    ok(&train_args(&data, &part, "2"));
    let mut args = train_args(&data, &part, "6");
    args.push("--resume");
    ok(&args);
    assert_eq!(
        fs::read_to_string(full.join("log.csv")).unwrap(),
        fs::read_to_string(part.join("log.csv")).unwrap()
    );
    assert_eq!(fs::read(full.join("final.bin")).unwrap(), fs::read(part.join("final.bin")).unwrap());
}

#[test]
fn divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let (data, run) = (dir.path().join("data"), dir.path().join("run"));
    simulate_small(&data, "4");
    let mut args = train_args(&data, &run, "20");
    set(&mut args, "--lr", "1e30");
    assert_eq!(code(&args), 3);
}

#[test]
fn eval_rejects_coil_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let (data, run) = (dir.path().join("data"), dir.path().join("run"));
    simulate_small(&data, "3");
    ok(&train_args(&data, &run, "1"));
    let other = dir.path().join("other");
    ok(&[
        "simulate", "--h", "16", "--w", "16", "--coils", "3", "--samples", "2", "--R", "2", "--out-dir", p(&other),
    ]);
    let ckpt = run.join("final.json");
    assert_eq!(code(&["eval", "--data", p(&other), "--checkpoint", p(&ckpt), "--out-dir", p(&run)]), 2);
}

#[test]
fn alpha_sweep_flops_decrease() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&[
        "ablate", "--sweep", "alpha", "--values", "0,0.125,0.25,0.375,0.5,0.625,0.75,0.875", "--h", "32", "--w", "32",
        "--channels", "64", "--T", "1", "--out-dir", p(dir.path()),
    ]);
    let rows: Vec<Vec<&str>> = out.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    let flops: Vec<u64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(flops[0], 2 * 64 * 64 * 9 * 32 * 32);
    assert!(flops.windows(2).all(|w| w[1] < w[0]), "{flops:?}");
    assert_eq!(fs::read_to_string(dir.path().join("ablate_alpha.csv")).unwrap(), out);
}

#[test]
fn blocks_sweep_doubles_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&[
        "ablate", "--sweep", "blocks", "--values", "1,2", "--channels", "8", "--K", "2", "--out-dir", p(dir.path()),
    ]);
    let params: Vec<u64> = out.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(params[1], 2 * params[0]);
}

#[test]
fn ablate_with_training_fills_quality_columns() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate_small(&data, "4");
    let mut args = vec!["ablate", "--sweep", "alpha", "--values", "0,0.5", "--data", p(&data), "--iters", "2"];
    args.extend_from_slice(TINY);
    let out_dir = dir.path().join("ab");
    args.extend_from_slice(&["--out-dir", p(&out_dir)]);
    let out = ok(&args);
    for line in out.lines().skip(1) {
        let psnr: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert!(psnr.is_finite());
    }
}
