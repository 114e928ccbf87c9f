use std::time::Instant;

use epi_core::epi::{costa_check, theorem1_check};
use epi_core::search::{run_restart, search_counterexample, select_best, Encoding, SearchConfig};
use epi_core::DEFAULT_TOL;

#[test]
fn recorded_seed_finds_violation_in_two_dimensions() {
    let cfg = SearchConfig::new(2);
    let t = Instant::now();
    let trace = search_counterexample(&cfg).unwrap();
    eprintln!(
        "n=2 seed={} best relative objective {:.6} gap {:.6e} evals {} in {:?}",
        trace.seed,
        -trace.best_report.relative_gap(),
        trace.best_gap,
        trace.total_evaluations,
        t.elapsed()
    );
    assert!(trace.found);
    let recheck = costa_check(&trace.best_instance, DEFAULT_TOL).unwrap();
    assert!(recheck.gap < -1e-6 * recheck.scale());
    assert!((recheck.gap - trace.best_gap).abs() <= 1e-12 * recheck.scale());
}

#[test]
fn scalar_search_finds_nothing() {
    let mut cfg = SearchConfig::new(1);
    cfg.restarts = 8;
    cfg.iterations = 500;
    let trace = search_counterexample(&cfg).unwrap();
    assert!(!trace.found);
    assert!(-trace.best_report.relative_gap() <= 1e-9);
}

#[test]
fn commuting_search_finds_nothing() {
    let mut cfg = SearchConfig::new(2);
    cfg.restarts = 8;
    cfg.iterations = 1000;
    cfg.encoding = Encoding::Commuting;
    let trace = search_counterexample(&cfg).unwrap();
    assert!(!trace.found);
    assert!(-trace.best_report.relative_gap() <= 1e-9);
    theorem1_check(&trace.best_instance, DEFAULT_TOL).unwrap();
}

#[test]
fn restart_order_does_not_matter() {
    let mut cfg = SearchConfig::new(2);
    cfg.restarts = 4;
    cfg.iterations = 200;
    let serial = search_counterexample(&cfg).unwrap();
    let reversed: Vec<_> = (0..cfg.restarts)
        .rev()
        .map(|i| run_restart(&cfg, i).unwrap())
        .collect();
    assert_eq!(select_best(&cfg, reversed).unwrap(), serial);
}
