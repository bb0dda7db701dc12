// SPDX-License-Identifier: Apache-2.0

mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{data_dir, golden_model_path};

fn minimalist(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minimalist"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn golden_args<'a>(model: &'a str, data: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["--model", model, "--data", data];
    v.extend_from_slice(extra);
    v
}

fn paths() -> (String, String) {
    (
        golden_model_path().display().to_string(),
        data_dir()
            .join("golden_sequences.csv")
            .display()
            .to_string(),
    )
}

#[test]
fn simulate_reproduces_golden_predictions_on_both_engines() {
    let dir = tempfile::tempdir().unwrap();
    let (model, data) = paths();
    let golden = std::fs::read_to_string(data_dir().join("golden_predictions.csv")).unwrap();
    for engine in ["ideal", "circuit"] {
        let mut args = vec!["simulate"];
        args.extend(golden_args(
            &model,
            &data,
            &["--engine", engine, "--trace-seq", "0"],
        ));
        let o = minimalist(dir.path(), &args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let got =
            std::fs::read_to_string(dir.path().join(format!("predictions_{engine}.csv"))).unwrap();
        assert_eq!(got, golden);
        assert!(dir.path().join(format!("traces_{engine}.csv")).is_file());
    }
    let logits = |e: &str| -> Vec<f64> {
        std::fs::read_to_string(dir.path().join(format!("logits_{e}.csv")))
            .unwrap()
            .lines()
            .skip(1)
            .flat_map(|l| {
                l.split(',')
                    .skip(1)
                    .map(|v| v.parse().unwrap())
                    .collect::<Vec<f64>>()
            })
            .collect()
    };
    let (a, b) = (logits("ideal"), logits("circuit"));
    assert_eq!(a.len(), 6);
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-12));
}

#[test]
fn compare_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (model, data) = paths();
    let mut args = vec!["compare"];
    args.extend(golden_args(&model, &data, &[]));
    assert_eq!(minimalist(dir.path(), &args).status.code(), Some(0));
    assert!(dir.path().join("compare.csv").is_file());

    args.extend(["--mismatch-sigma", "0.05", "--seed", "3"]);
    let o = minimalist(dir.path(), &args);
    assert_eq!(
        o.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );

    args.extend(["--tolerance", "1"]);
    assert_eq!(minimalist(dir.path(), &args).status.code(), Some(0));
}

#[test]
fn empty_dataset_and_missing_files_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "seq,step,label,x0\n").unwrap();
    let (model, _) = paths();
    let empty = empty.display().to_string();
    let o = minimalist(
        dir.path(),
        &["simulate", "--model", &model, "--data", &empty],
    );
    assert_eq!(o.status.code(), Some(2));
    let o = minimalist(
        dir.path(),
        &["simulate", "--model", "missing.json", "--data", &empty],
    );
    assert_eq!(o.status.code(), Some(2));
    let o = minimalist(dir.path(), &["simulate", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_adc_single_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = minimalist(
        dir.path(),
        &[
            "sweep-adc",
            "--slopes",
            "16",
            "--offsets",
            "32",
            "--points",
            "1",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("sweep_adc.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("slope_segments,offset_code,v_in,code,ideal_code"));
    let cols: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(&cols[..2], &["16", "32"]);
    // the single point sits at v0, which the neutral offset maps to mid-scale
    assert_eq!(cols[3], "32");
    assert_eq!(cols[3], cols[4]);
}

#[test]
fn energy_bound_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = minimalist(dir.path(), &["energy", "--network", "64-64-64-64-64"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("energy.csv")).unwrap();
    let bound = text.lines().find(|l| l.starts_with("bound")).unwrap();
    let total: f64 = bound.split(',').nth(7).unwrap().parse().unwrap();
    assert!((total - 168.8064e-12).abs() < 1e-18, "{total}");
}

#[test]
fn energy_of_golden_run_stays_below_bound() {
    let dir = tempfile::tempdir().unwrap();
    let (model, data) = paths();
    let mut args = vec!["energy"];
    args.extend(golden_args(&model, &data, &[]));
    let o = minimalist(dir.path(), &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("energy.csv")).unwrap();
    assert!(text.lines().filter(|l| l.starts_with("step")).count() >= 40);
}

#[test]
fn train_parity_preset() {
    let dir = tempfile::tempdir().unwrap();
    let o = minimalist(
        dir.path(),
        &["train", "--task", "delayed-parity", "--seed", "1"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["metrics.csv", "model.mgru.json", "test.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let model = dir.path().join("model.mgru.json").display().to_string();
    let test = dir.path().join("test.csv").display().to_string();
    let o = minimalist(dir.path(), &["compare", "--model", &model, "--data", &test]);
    assert_eq!(o.status.code(), Some(0));
}
