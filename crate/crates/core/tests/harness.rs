use std::sync::OnceLock;

use levelforge::database::samples;
use levelforge::harness::{
    emit_table, parse_records_csv, parse_stats_csv, stats_csv, ExperimentOutput, HarnessError, Status, METRICS,
};
use levelforge::par::Execution;
use levelforge::{run_experiment, ExperimentConfig, Group};

const GROUPS: [Group; 2] = [Group::DbBaseline, Group::AExploration];

fn config(dir: &std::path::Path, threads: usize, exec: Execution) -> ExperimentConfig {
    ExperimentConfig {
        groups: GROUPS.to_vec(),
        levels_per_group: 4,
        base_seed: 1234,
        out_dir: Some(dir.to_path_buf()),
        threads: Some(threads),
        exec,
        ..ExperimentConfig::default()
    }
}

struct Run {
    dir: tempfile::TempDir,
    out: ExperimentOutput,
}

fn run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&config(dir.path(), 1, Execution::Sequential), &samples::hospital()).unwrap();
        Run { dir, out }
    })
}

fn column(csv: &[u8], name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_reader(csv);
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

#[test]
fn writes_all_three_artifacts() {
    let r = run();
    for f in ["records.csv", "stats.md", "stats.csv"] {
        assert!(r.dir.path().join(f).is_file(), "{f} missing");
    }
    let md = std::fs::read_to_string(r.dir.path().join("stats.md")).unwrap();
    assert_eq!(md, emit_table(&r.out.stats));
}

#[test]
fn records_round_trip_through_csv() {
    let r = run();
    let bytes = std::fs::read(r.dir.path().join("records.csv")).unwrap();
    assert_eq!(parse_records_csv(&bytes).unwrap(), r.out.records);
    assert_eq!(r.out.records.len(), GROUPS.len() * 4);
}

#[test]
fn tallies_count_every_level() {
    let r = run();
    for g in GROUPS {
        let s = r.out.stats.group(g.name()).unwrap();
        assert_eq!(s.tallies.total(), 4);
        let valid = r.out.records.iter().filter(|x| x.group == g.name() && x.status == Status::Valid).count();
        assert_eq!(s.tallies.valid as usize, valid);
    }
}

/// Recomputes every statistic from the raw CSV columns.
#[test]
fn stats_match_recomputation_from_records() {
    let r = run();
    let bytes = std::fs::read(r.dir.path().join("records.csv")).unwrap();
    let groups = column(&bytes, "group");
    let status = column(&bytes, "status");
    for m in METRICS {
        let values: Vec<f64> = column(&bytes, m).iter().map(|v| v.parse().unwrap()).collect();
        for g in GROUPS {
            let xs: Vec<f64> = (0..values.len())
                .filter(|&i| groups[i] == g.name() && status[i] == "valid")
                .map(|i| values[i])
                .collect();
            let got = r.out.stats.group(g.name()).unwrap().metric(m).unwrap();
            assert_eq!(got.n as usize, xs.len());
            if xs.is_empty() {
                continue;
            }
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            let half = 1.96 * var.sqrt() / n.sqrt();
            let tol = 1e-9 * mean.abs().max(1.0);
            assert!((got.mean - mean).abs() < tol, "{g:?} {m} mean {} vs {mean}", got.mean);
            assert!((got.std - var.sqrt()).abs() < tol, "{g:?} {m} std");
            assert!((got.ci_low - (mean - half)).abs() < tol && (got.ci_high - (mean + half)).abs() < tol);
        }
    }
}

#[test]
fn stats_csv_round_trips() {
    let r = run();
    let bytes = std::fs::read(r.dir.path().join("stats.csv")).unwrap();
    assert_eq!(bytes, stats_csv(&r.out.stats).unwrap());
    assert_eq!(parse_stats_csv(&bytes).unwrap(), r.out.stats);
}

#[test]
fn metric_identities_hold() {
    for rec in &run().out.records {
        if rec.status != Status::Valid {
            continue;
        }
        assert!(rec.grid_exploration >= rec.sim_grid_exploration, "{}", rec.level_id);
        assert!(rec.simulation_time >= 0.0 && rec.rerun_time >= 0.0);
        assert!(rec.facilities_removed <= rec.adaptable_facilities);
    }
}

#[test]
fn output_is_independent_of_worker_count() {
    let base = std::fs::read(run().dir.path().join("records.csv")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&config(dir.path(), 3, Execution::Parallel), &samples::hospital()).unwrap();
    assert_eq!(std::fs::read(dir.path().join("records.csv")).unwrap(), base);
    assert_eq!(
        std::fs::read(dir.path().join("stats.csv")).unwrap(),
        std::fs::read(run().dir.path().join("stats.csv")).unwrap()
    );
}

#[test]
fn rejects_empty_configurations() {
    let db = samples::hospital();
    let none = ExperimentConfig { groups: Vec::new(), ..ExperimentConfig::default() };
    assert!(matches!(run_experiment(&none, &db), Err(HarnessError::Config(_))));
    let zero = ExperimentConfig { levels_per_group: 0, ..ExperimentConfig::default() };
    assert!(matches!(run_experiment(&zero, &db), Err(HarnessError::Config(_))));
}
