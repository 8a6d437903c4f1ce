mod common;

use approx::assert_abs_diff_eq;
use common::max_abs_diff;
use homeospline::monotone::{
    default_lambda_grid, gcv_evaluate, monotonize_observed, monotonize_on_grid, select_gcv,
};
use homeospline::simbench::{gen_dataset, SimConfig, TestFunction};
use homeospline::{local_linear, monotonize, rule_bandwidth, Dataset, Kernel, LambdaPolicy};

fn design(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

fn pre_fit(x: &[f64], y: &[f64]) -> Vec<f64> {
    let h = rule_bandwidth(y).unwrap().bandwidth;
    local_linear(x, y, h, x).unwrap().values
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

#[test]
fn local_linear_reproduces_lines() {
    let x = [0.05, 0.1, 0.3, 0.32, 0.6, 0.71, 0.9];
    let y: Vec<f64> = x.iter().map(|v| 1.5 - 0.7 * v).collect();
    let pts = [0.0, 0.2, 0.5, 0.95, 1.0];
    let est = local_linear(&x, &y, 0.25, &pts).unwrap();
    for (p, v) in pts.iter().zip(&est.values) {
        assert_abs_diff_eq!(*v, 1.5 - 0.7 * p, epsilon = 1e-12);
    }
}

#[test]
fn local_linear_widens_sparse_windows() {
    let x = [0.0, 0.5, 1.0];
    let y = [0.0, 1.0, 2.0];
    let est = local_linear(&x, &y, 0.1, &[0.25]).unwrap();
    assert_eq!(est.widened.len(), 1);
    assert!(est.widened[0].bandwidth > 0.25);
    assert_abs_diff_eq!(est.values[0], 0.5, epsilon = 1e-12);
}

#[test]
fn rule_bandwidth_from_alternating_data() {
    // sigma2 = 1/2, so h = (0.5/50)^(1/5) = 0.01^(1/5)
    let y: Vec<f64> = (0..50).map(|i| (i % 2) as f64).collect();
    let rb = rule_bandwidth(&y).unwrap();
    assert_abs_diff_eq!(rb.sigma2, 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(rb.bandwidth, 0.398107170553497, epsilon = 1e-12);
    assert!(!rb.floored);
    let flat = rule_bandwidth(&[1.0; 20]).unwrap();
    assert!(flat.floored);
    assert_abs_diff_eq!(flat.bandwidth, 0.1, epsilon = 1e-15);
}

#[test]
fn dataset_sorts_and_rejects_ties() {
    let d = Dataset::new(vec![0.3, 0.1, 0.2], vec![3.0, 1.0, 2.0]).unwrap();
    assert_eq!(d.x, vec![0.1, 0.2, 0.3]);
    assert_eq!(d.y, vec![1.0, 2.0, 3.0]);
    assert!(Dataset::new(vec![0.1, 0.1, 0.2], vec![1.0, 2.0, 3.0]).is_err());
    assert!(Dataset::new(vec![0.1, 0.2], vec![1.0, 2.0]).is_err());
}

#[test]
fn noiseless_increasing_function_is_recovered() {
    let x = design(50);
    let y: Vec<f64> = x.iter().map(|&v| TestFunction::M2.eval(v)).collect();
    let f_hat = pre_fit(&x, &y);
    let kernel = Kernel::default_for(&x).unwrap();
    let est = monotonize_observed(&x, &f_hat, &y, &kernel, LambdaPolicy::Gcv, 120).unwrap();
    // m2 is flat at 1/2, where transported points crowd and the field smooths across them
    assert!(max_abs_diff(&est.fitted, &f_hat) < 1e-2);
    assert!(max_abs_diff(&est.fitted, &y) < 2e-2);
    assert!(strictly_increasing(&est.eval(&design(500)).unwrap()));
}

#[test]
fn noisy_pre_fit_is_made_monotone() {
    let mut cfg = SimConfig::new(TestFunction::M1);
    cfg.seed = 7;
    let d = gen_dataset(&cfg, 0).unwrap();
    let f_hat = pre_fit(&d.x, &d.y);
    assert!(!strictly_increasing(&f_hat));
    let kernel = Kernel::default_for(&d.x).unwrap();
    let est = monotonize_observed(&d.x, &f_hat, &d.y, &kernel, LambdaPolicy::Gcv, 30).unwrap();
    assert!(est.guard.holds);
    assert!(strictly_increasing(&est.eval(&design(500)).unwrap()));
    assert!(est.trace_range[0] >= 2.0 - 1e-8 && est.trace_range[1] <= 50.0 + 1e-8);
}

#[test]
fn huge_penalty_reduces_nodes_to_affine_fits() {
    let x = design(20);
    let f_hat: Vec<f64> = x.iter().map(|v| v + 0.1 * (9.0 * v).sin()).collect();
    let kernel = Kernel::default_for(&x).unwrap();
    let e = gcv_evaluate(&x, &f_hat, &f_hat, &kernel, 1e6, 10).unwrap();
    for &tr in e.traces() {
        assert_abs_diff_eq!(tr, 2.0, epsilon = 1e-6);
    }
    assert_abs_diff_eq!(e.denominator, 18.0 * 18.0, epsilon = 1e-3);
}

#[test]
fn identity_pre_estimate_scores_zero() {
    let x = design(15);
    let kernel = Kernel::default_for(&x).unwrap();
    let e = gcv_evaluate(&x, &x, &x, &kernel, 1e-3, 10).unwrap();
    assert_eq!(e.numerator, 0.0);
    assert_eq!(e.score, 0.0);
    assert_eq!(e.fitted, x);
}

#[test]
fn monotone_input_is_nearly_a_fixed_point() {
    let x = design(30);
    let f_hat: Vec<f64> = x.iter().map(|&v| TestFunction::M2.eval(v)).collect();
    let kernel = Kernel::default_for(&x).unwrap();
    let once = monotonize(&x, &f_hat, &kernel, LambdaPolicy::Fixed(1e-6), 120).unwrap();
    let twice = monotonize(&x, &once.fitted, &kernel, LambdaPolicy::Fixed(1e-6), 120).unwrap();
    assert!(max_abs_diff(&once.fitted, &f_hat) < 1e-2);
    assert!(max_abs_diff(&twice.fitted, &once.fitted) < 1e-2);
}

#[test]
fn selection_is_the_scan_argmin() {
    let mut cfg = SimConfig::new(TestFunction::M3);
    cfg.n = 30;
    let d = gen_dataset(&cfg, 3).unwrap();
    let f_hat = pre_fit(&d.x, &d.y);
    let kernel = Kernel::default_for(&d.x).unwrap();
    let grid = default_lambda_grid();
    let est =
        monotonize_on_grid(&d.x, &f_hat, &d.y, &kernel, LambdaPolicy::Gcv, 30, &grid).unwrap();
    let scores: Vec<f64> = est.gcv_curve.iter().map(|p| p.score).collect();
    let best = select_gcv(&scores, &grid).unwrap();
    assert_eq!(est.lambda_selected, grid[best]);
    assert!(scores.iter().all(|&s| s >= scores[best]));
}

#[test]
fn ties_prefer_the_larger_penalty() {
    let grid = [1e-3, 1e-2, 1e-1];
    assert_eq!(select_gcv(&[2.0, 1.0, 1.0], &grid), Some(2));
    assert_eq!(select_gcv(&[f64::NAN, 3.0, f64::INFINITY], &grid), Some(1));
    assert_eq!(select_gcv(&[f64::NAN], &grid[..1]), None);
}

#[test]
fn mismatched_lengths_are_rejected() {
    let x = design(5);
    let k = Kernel::default_for(&x).unwrap();
    assert!(monotonize(&x, &x[..4], &k, LambdaPolicy::Gcv, 30).is_err());
    let unsorted = [0.2, 0.1, 0.3];
    assert!(monotonize(&unsorted, &unsorted, &k, LambdaPolicy::Gcv, 30).is_err());
}
