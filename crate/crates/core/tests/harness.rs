use std::fs;
use std::path::{Path, PathBuf};

use ttp_ws::harness::{load_records, report, run_experiment, ExperimentConfig, RECORDS_FILE};
use ttp_ws::pipeline::Algorithm;
use ttp_ws::SetLabel;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn small(output: &Path) -> ExperimentConfig {
    ExperimentConfig {
        instances: vec![fixture("toy4.ttp")],
        scenario_sets: vec![SetLabel::A],
        delta: 2.0,
        alphas: vec![0.8],
        algorithms: vec![Algorithm::C5],
        repetitions: 3,
        budget_seconds: 10.0,
        max_restarts: Some(3),
        max_iterations: Some(1_000),
        master_seed: 11,
        output_dir: output.to_path_buf(),
        workers: Some(2),
        ..ExperimentConfig::default()
    }
}

#[test]
fn one_cell_group_gives_one_record_per_repetition() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&small(dir.path())).unwrap();
    assert_eq!(out.records.len(), 3);
    assert_eq!(out.executed, 3);
    assert_eq!(load_records(dir.path()).unwrap().len(), 3);
}

#[test]
fn record_count_is_the_cell_product_minus_bad_instances() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        instances: vec![fixture("toy4.ttp"), fixture("missing.ttp")],
        scenario_sets: vec![SetLabel::A, SetLabel::C],
        alphas: vec![0.8, 0.9],
        algorithms: Algorithm::ALL.to_vec(),
        repetitions: 2,
        ..small(dir.path())
    };
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.records.len(), 2 * 2 * 3 * 2);
    assert_eq!(out.failures.len(), 1);
    assert!(out.records.iter().all(|r| r.satisfies_constraint()));
}

#[test]
fn resume_runs_only_missing_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { repetitions: 6, ..small(dir.path()) };
    let first = run_experiment(&cfg).unwrap();
    let log = dir.path().join(RECORDS_FILE);
    let text = fs::read_to_string(&log).unwrap();
    let kept: Vec<&str> = text.lines().take(3).collect();
    fs::write(&log, kept.join("\n") + "\n").unwrap();

    let second = run_experiment(&cfg).unwrap();
    assert_eq!(second.executed, 3);
    assert_eq!(second.records, {
        let mut r = first.records.clone();
        for (a, b) in r.iter_mut().zip(&second.records) {
            a.wall_clock_seconds = b.wall_clock_seconds;
        }
        r
    });
    let third = run_experiment(&cfg).unwrap();
    assert_eq!(third.executed, 0);
    assert_eq!(load_records(&log).unwrap().len(), 6);
}

#[test]
fn torn_last_line_is_ignored() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&small(dir.path())).unwrap();
    let log = dir.path().join(RECORDS_FILE);
    let mut text = fs::read_to_string(&log).unwrap();
    text.push_str("{\"instance\":\"to");
    fs::write(&log, text).unwrap();
    assert_eq!(load_records(&log).unwrap().len(), 3);
}

#[test]
fn same_master_seed_same_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = |p: &Path| ExperimentConfig { algorithms: Algorithm::ALL.to_vec(), ..small(p) };
    let z = |p: &Path| {
        let mut v: Vec<u64> = run_experiment(&cfg(p)).unwrap().records.iter().map(|r| r.expected_z.to_bits()).collect();
        v.sort_unstable();
        v
    };
    assert_eq!(z(a.path()), z(b.path()));
}

#[test]
fn reported_means_match_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { algorithms: Algorithm::ALL.to_vec(), ..small(dir.path()) };
    let records = run_experiment(&cfg).unwrap().records;
    let table = report(&records, 0.05).unwrap();
    assert_eq!(table.rows.len(), 3);
    for row in &table.rows {
        let zs: Vec<f64> = records.iter().filter(|r| r.algorithm == row.algorithm).map(|r| r.expected_z).collect();
        let mean = zs.iter().sum::<f64>() / zs.len() as f64;
        assert!((row.mean - mean).abs() <= 1e-9);
        assert_eq!(row.runs, 3);
    }
    assert!(table.to_csv().lines().count() == 4);
    assert!(table.to_json().contains("\"stat\""));
}

#[test]
fn config_file_paths_are_relative_to_the_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(fixture("toy4.ttp"), dir.path().join("toy4.ttp")).unwrap();
    let path = dir.path().join("exp.toml");
    fs::write(
        &path,
        "instances = [\"toy4.ttp\"]\nscenario_sets = [\"A\"]\nalgorithms = [\"C5_ws\"]\noutput_dir = \"out\"\n",
    )
    .unwrap();
    let cfg = ExperimentConfig::from_path(&path).unwrap();
    assert_eq!(cfg.instances, vec![dir.path().join("toy4.ttp")]);
    assert_eq!(cfg.output_dir, dir.path().join("out"));
    assert_eq!(cfg.algorithms, vec![Algorithm::C5]);
}
