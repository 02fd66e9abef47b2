//! End-to-end distance experiments against closed forms in the linear
//! case, and the initial-condition scaling probe.

mod common;

use common::{gaussian_besov, gaussian_l1, log_log_slope, ou_variance, pair_steps};
use nsreg_core::experiments::{besov_table, distance_table, prepare, Metric};
use nsreg_core::ExperimentConfig;

fn linear_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    for kv in ["cutoff=1", "nonlinear=false", "ensemble_size=100000", "alpha=0.3", "beta=0.5"] {
        cfg.set_pair(kv).unwrap();
    }
    cfg
}

#[test]
fn linear_distances_follow_closed_form_slopes() {
    let cfg = linear_config();
    let prepared = prepare(&cfg).unwrap();
    let steps = pair_steps(&cfg.pairs().unwrap(), cfg.dt);
    let gaps: Vec<f64> = cfg.pairs().unwrap().iter().map(|(s, t)| t - s).collect();

    let l1 = distance_table(&prepared, Metric::L1).unwrap();
    let exact_l1: Vec<f64> = steps
        .iter()
        .map(|&(ks, kt)| gaussian_l1(ou_variance(ks, cfg.dt), ou_variance(kt, cfg.dt)))
        .collect();
    let oracle = log_log_slope(&gaps, &exact_l1);
    let fitted = l1.fit().unwrap().slope;
    assert!((fitted - oracle).abs() <= 0.1, "L1 slope {fitted} vs {oracle}");

    let besov = besov_table(&prepared).unwrap();
    let exact_besov: Vec<f64> = steps
        .iter()
        .map(|&(ks, kt)| gaussian_besov(ou_variance(ks, cfg.dt), ou_variance(kt, cfg.dt), cfg.alpha))
        .collect();
    let oracle = log_log_slope(&gaps, &exact_besov);
    let fitted = besov.fit().unwrap().slope;
    assert!((fitted - oracle).abs() <= 0.15, "Besov slope {fitted} vs {oracle}");

    for (a, b) in l1.rows.iter().zip(&besov.rows) {
        assert!(a.distance <= b.distance);
    }
}

#[test]
fn doubling_the_initial_condition_keeps_the_exponent() {
    let fit = |norm: &str| {
        let mut cfg = ExperimentConfig::default();
        for kv in ["cutoff=1", "dt=0.002", "ensemble_size=20000", "batches=4", "gap_min=0.008"] {
            cfg.set_pair(kv).unwrap();
        }
        cfg.set("x0", &format!("random:{norm}:5")).unwrap();
        let table = distance_table(&prepare(&cfg).unwrap(), Metric::L1).unwrap();
        let f = table.fit().unwrap();
        (f.slope, f.slope_stderr)
    };
    let (a, sa) = fit("0.5");
    let (b, sb) = fit("1");
    let tol = 3.0 * (sa * sa + sb * sb).sqrt();
    assert!((a - b).abs() <= tol, "slopes {a} and {b}, tolerance {tol}");
}
