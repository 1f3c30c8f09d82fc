//! CLI-level behavior: width resolution against an independent formula
//! recomputation, dataset file loading, and report aggregation.

use std::path::PathBuf;

use subnet_cli::config::{ExperimentConfig, WidthsSpec};
use subnet_cli::report::{summarize, summary_to_csv, summary_to_markdown};
use subnet_cli::run_to_dir;

#[test]
fn deep_formula_width_matches_independent_recomputation() {
    let config: ExperimentConfig = serde_json::from_value(serde_json::json!({
        "experiment": "thm1-deep",
        "dims": {"d": 3, "n": 2, "l": 2, "s": 3},
        "tolerances": {"epsilon": 0.8, "delta": 0.2},
        "widths": "paper-formula",
        "trials": 1, "seed": 0,
    }))
    .unwrap();
    let resolved = config.resolve().unwrap();
    // Independent recomputation: k = n*s*ceil(64 s^2 l^2 n / eps^2 * ln(2 n s l / delta)).
    let (s, n, l, eps, delta) = (3.0f64, 2.0f64, 2.0f64, 0.8f64, 0.2f64);
    let inner = (64.0 * s * s * l * l * n / (eps * eps) * (2.0 * n * s * l / delta).ln()).ceil();
    let expected = (n * s * inner) as usize;
    assert_eq!(resolved.widths, WidthsSpec::Single { k: expected });
    assert_eq!(expected, 206_820);
}

#[test]
fn csv_and_json_dataset_files_load() {
    let tmp = tempfile::tempdir().unwrap();
    let csv_path = tmp.path().join("data.csv");
    std::fs::write(&csv_path, "1,0,1\n0,1,-1\n").unwrap();
    let config = subnet_cli::config::DatasetConfig::File { path: csv_path };
    let data = subnet_cli::datasets::load_dataset(&config, subnet_core::RngStream::new(0)).unwrap();
    assert_eq!(data.points, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    assert_eq!(data.labels, vec![1.0, -1.0]);

    let json_path = tmp.path().join("data.json");
    std::fs::write(
        &json_path,
        serde_json::json!({"points": [[0.5, 0.5]], "labels": [1.0]}).to_string(),
    )
    .unwrap();
    let config = subnet_cli::config::DatasetConfig::File { path: json_path };
    let data = subnet_cli::datasets::load_dataset(&config, subnet_core::RngStream::new(0)).unwrap();
    assert_eq!(data.points, vec![vec![0.5, 0.5]]);
}

#[test]
fn summary_of_no_reports_is_header_only() {
    let rows = summarize(&[]).unwrap();
    assert!(rows.is_empty());
    let csv = summary_to_csv(&rows);
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("experiment,runs,trials"));
    let md = summary_to_markdown(&rows);
    assert_eq!(md.lines().count(), 2); // header + separator
}

fn mini_run(seed: u64, dir: &std::path::Path) -> PathBuf {
    let config: ExperimentConfig = serde_json::from_value(serde_json::json!({
        "experiment": "lemma-one-coord",
        "dims": {"d": 3, "s": 3},
        "tolerances": {"epsilon": 0.2, "delta": 0.2},
        "trials": 10, "seed": seed,
        "sampler": {"mode": "linf-cube", "count": 100},
    }))
    .unwrap();
    let (_, paths) = run_to_dir(&config, dir, Some(1)).unwrap();
    paths.report
}

#[test]
fn single_report_row_echoes_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let path = mini_run(3, tmp.path());
    let report = subnet_cli::report::RunReport::from_file(&path).unwrap();
    let rows = summarize(std::slice::from_ref(&path)).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].experiment, "lemma-one-coord");
    assert_eq!(rows[0].trials, report.trial_report.trials);
    assert_eq!(rows[0].successes, report.trial_report.successes);
    assert_eq!(rows[0].error_max, report.trial_report.error_max);
    assert!(rows[0].wall_seconds.is_some(), "timing sidecar not picked up");
}

#[test]
fn two_reports_pool_by_hand_count() {
    let tmp = tempfile::tempdir().unwrap();
    let a = mini_run(1, &tmp.path().join("a"));
    let b = mini_run(2, &tmp.path().join("b"));
    let ra = subnet_cli::report::RunReport::from_file(&a).unwrap();
    let rb = subnet_cli::report::RunReport::from_file(&b).unwrap();
    let rows = summarize(&[a, b]).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].runs, 2);
    assert_eq!(rows[0].trials, 20);
    assert_eq!(
        rows[0].successes,
        ra.trial_report.successes + rb.trial_report.successes
    );
    let pooled = rows[0].successes as f64 / 20.0;
    assert!((rows[0].success_rate - pooled).abs() < 1e-15);
}

#[test]
fn malformed_report_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("broken.report.json");
    std::fs::write(&path, "{ not json").unwrap();
    assert!(summarize(&[path]).is_err());
}
