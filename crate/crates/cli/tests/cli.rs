use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chrono::{Datelike, NaiveDate, Weekday};

fn stress(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stress")).args(args).output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

/// Weekday closes with an irregular but deterministic wiggle.
fn write_prices(path: &Path, n: usize) {
    let mut body = String::from("date,close\n");
    let days = NaiveDate::from_ymd_opt(2003, 1, 6)
        .unwrap()
        .iter_days()
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun));
    for (i, d) in days.take(n).enumerate() {
        let wiggle = ((i * 7919) % 101) as f64 / 25.0 + (i as f64 * 0.37).sin();
        body += &format!("{d},{:.4}\n", 100.0 + 0.01 * i as f64 + wiggle);
    }
    fs::write(path, body).unwrap();
}

const SMALL: [&str; 4] = ["--entropy.window", "150", "--entropy.increment", "10"];

#[test]
fn flags_beat_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write_prices(&dir.path().join("a.csv"), 200);
    let manifest = dir.path().join("run.txt");
    fs::write(
        &manifest,
        "input.A = a.csv\nmeasures = mse\noutput_dir = out\nentropy.r = 0.3\nentropy.tau = 7\n",
    )
    .unwrap();
    let mut args = vec!["run", manifest.to_str().unwrap(), "--entropy.r", "0.2"];
    args.extend(SMALL);
    let out = stress(&args);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let meta = fs::read_to_string(dir.path().join("out/metadata.txt")).unwrap();
    for line in [
        "entropy.r=0.2",
        "source.entropy.r=flag",
        "entropy.tau=7",
        "source.entropy.tau=manifest",
        "source.entropy.m=default",
        "status=complete",
    ] {
        assert!(meta.lines().any(|l| l == line), "missing {line} in\n{meta}");
    }
    assert!(dir.path().join("out/A.mse.csv").exists());
}

#[test]
fn failed_item_gives_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    write_prices(&dir.path().join("LONG.csv"), 200);
    write_prices(&dir.path().join("SHORT.csv"), 60);
    let out_dir = dir.path().join("out");
    let mut args: Vec<String> = vec![
        "mse".into(),
        dir.path().join("LONG.csv").to_str().unwrap().to_owned(),
        dir.path().join("SHORT.csv").to_str().unwrap().to_owned(),
        "--output-dir".into(),
        out_dir.to_str().unwrap().to_owned(),
    ];
    args.extend(SMALL.iter().map(|s| s.to_string()));
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = stress(&args);
    assert!(!out.status.success());
    let err = text(&out.stderr);
    assert!(err.lines().any(|l| l.starts_with("failed: SHORT.mse.csv")), "{err}");
    assert!(out_dir.join("LONG.mse.csv").exists());
    assert!(!out_dir.join("SHORT.mse.csv").exists());
    let meta = fs::read_to_string(out_dir.join("metadata.txt")).unwrap();
    assert!(meta.contains("status=incomplete"));
}

#[test]
fn invalid_manifest_reports_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("bad.txt");
    fs::write(&manifest, "input.A = a.csv\nbasket = A, Z\nmeasures = mse, nope\nentropy.r = -1\n").unwrap();
    let out = stress(&["run", manifest.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = text(&out.stderr);
    for needle in ["nope", "output_dir", "Z is not an input", "tolerance r must be positive"] {
        assert!(err.contains(needle), "{needle} not reported in\n{err}");
    }
}

#[test]
fn unknown_flag_value_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_prices(&dir.path().join("a.csv"), 200);
    let out = stress(&["mse", dir.path().join("a.csv").to_str().unwrap(), "--entropy.m", "zero"]);
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("entropy.m"));
}

#[test]
fn ingest_writes_clean_series() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("raw");
    fs::create_dir(&src).unwrap();
    write_prices(&src.join("X.csv"), 30);
    let out_dir = dir.path().join("clean");
    let out = stress(&["ingest", src.join("X.csv").to_str().unwrap(), "--output-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).starts_with("X: 30 days, 0 forward-filled"));
    let cleaned = fs::read_to_string(out_dir.join("X.csv")).unwrap();
    assert_eq!(cleaned.lines().count(), 30);
    assert!(cleaned.starts_with("2003-01-06,"));

    fs::write(src.join("BAD.csv"), "date,close\n2003-01-06,-4\n").unwrap();
    let out = stress(&["ingest", src.join("BAD.csv").to_str().unwrap(), "--output-dir", out_dir.to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn catastrophe_needs_two_basket_files() {
    let dir = tempfile::tempdir().unwrap();
    write_prices(&dir.path().join("a.csv"), 200);
    let a = dir.path().join("a.csv");
    let out = stress(&["catastrophe", "--basket", a.to_str().unwrap(), "--", a.to_str().unwrap()]);
    assert!(!out.status.success());
}
