//! Monte Carlo study behaviour on reduced configurations.

use stochfrac::experiment::{run_studies, RateTable};
use stochfrac::{run_error_study, RunConfig};

/// Three coarse levels against a `6/384` reference up to `T = 1/2`.
fn small(n_paths: usize) -> RunConfig {
    RunConfig {
        lambda: 0.3,
        t_final: 0.5,
        snapshot_times: vec![0.25, 0.5],
        ref_dx: 6.0 / 384.0,
        dt_ref: 2f64.powi(-9),
        dx_levels: vec![6.0 / 192.0, 6.0 / 96.0, 6.0 / 48.0],
        dt_levels: vec![2f64.powi(-8), 2f64.powi(-7), 2f64.powi(-6)],
        n_paths,
        seed: 9,
        threads: Some(1),
        ..RunConfig::default()
    }
}

fn errors(t: &RateTable) -> Vec<f64> {
    t.rows.iter().map(|r| r.error).collect()
}

#[test]
fn study_is_reproducible_and_independent_of_threads() {
    let base = run_error_study(&small(12)).unwrap();
    assert_eq!(run_error_study(&small(12)).unwrap(), base);
    for threads in [2, 5] {
        let c = RunConfig { threads: Some(threads), ..small(12) };
        assert_eq!(run_error_study(&c).unwrap(), base, "threads={threads}");
    }
}

#[test]
fn halving_the_ensemble_moves_errors_within_three_standard_errors() {
    let full = run_error_study(&small(64)).unwrap();
    let half = run_error_study(&small(32)).unwrap();
    for (a, b) in full.rows.iter().zip(&half.rows) {
        let se = (a.se * a.se + b.se * b.se).sqrt();
        assert!(a.se > 0.0 && b.se > 0.0);
        assert!((a.error - b.error).abs() <= 3.0 * se, "dx={}: {} vs {} (se {se:e})", a.dx, a.error, b.error);
    }
}

#[test]
fn errors_shrink_with_the_grid() {
    let t = run_error_study(&small(24)).unwrap();
    let e = errors(&t);
    assert!(e.windows(2).all(|w| w[0] < w[1]), "{e:?}");
    assert_eq!(t.rows[0].rate, None);
    assert!(t.rows[1..].iter().all(|r| r.rate.is_some_and(|v| v > 0.0)));
}

#[test]
fn deterministic_half_order_study_converges_at_a_sane_order() {
    let c = RunConfig { lambda: 0.5, sigma: false, n_paths: 1, threads: Some(1), ..RunConfig::default() };
    let t = run_error_study(&c).unwrap();
    assert!(t.rows.iter().all(|r| r.se == 0.0));
    for r in &t.rows[1..] {
        let rate = r.rate.unwrap();
        assert!((0.5..=1.1).contains(&rate), "dx={}: rate {rate}", r.dx);
    }
}

#[test]
fn report_csv_carries_the_header_and_one_row_per_level() {
    let report = run_studies(&[small(4)]).unwrap();
    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# stochfrac "));
    assert!(lines[0].contains(&format!("config_hash={}", report.config_hash)));
    assert!(lines[0].contains("seed=9") && lines[0].contains("n_paths=4"));
    assert_eq!(lines[1], "lambda,dx,error,se,rate");
    assert_eq!(lines.len(), 2 + 3);
    assert!(lines[2].ends_with(','));
}

#[test]
fn misconfigured_studies_are_rejected() {
    let mut c = small(4);
    c.dx_levels.pop();
    assert!(run_error_study(&c).is_err());
    let c = RunConfig { ref_dx: 6.0 / 500.0, ..small(4) };
    assert!(run_error_study(&c).is_err());
    let c = RunConfig { snapshot_times: vec![0.3], ..small(4) };
    assert!(run_error_study(&c).is_err());
}
