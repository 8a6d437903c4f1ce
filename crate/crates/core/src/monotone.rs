//! Smooth-then-monotonise regression.
//!
//! An unconstrained pre-estimate `f_hat` (local linear with an Epanechnikov
//! kernel by default) is turned into a strictly increasing estimate by fitting
//! the time-dependent field to `(x_i, f_hat(x_i))` and taking the time-one
//! flow. The penalty is chosen by a grid search on a GCV-type score.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{fit_time_field, FlowMap, TimeVectorField};
use crate::kernel::Kernel;
use crate::spline::SplineFit;

pub const GCV_GRID_POINTS: usize = 25;
pub const GCV_GRID_MIN: f64 = 1e-6;
pub const GCV_GRID_MAX: f64 = 1e1;

/// Regression sample sorted by design point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Dataset {
    /// Sorts by `x`; rejects ties, non-finite values and fewer than 3 points.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Input(format!(
                "{} design points but {} responses",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 3 {
            return Err(Error::InsufficientData {
                needed: 3,
                got: x.len(),
            });
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite value in dataset".into()));
        }
        let mut pairs: Vec<(f64, f64)> = x.into_iter().zip(y).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DegenerateDesign(format!(
                "repeated design point {}",
                w[0].0
            )));
        }
        let (x, y) = pairs.into_iter().unzip();
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() < 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// An evaluation point where the bandwidth had to be widened.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Widening {
    pub at: f64,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalLinearEstimate {
    pub values: Vec<f64>,
    pub widened: Vec<Widening>,
}

/// Local linear regression with Epanechnikov weights, evaluated at `eval_points`.
///
/// Where fewer than two design points fall strictly inside the window the
/// bandwidth is widened to just past the second-nearest design distance.
pub fn local_linear(
    x: &[f64],
    y: &[f64],
    h: f64,
    eval_points: &[f64],
) -> Result<LocalLinearEstimate> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Config(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    if x.len() != y.len() {
        return Err(Error::Input("design and response lengths differ".into()));
    }
    let distinct = {
        let mut s = x.to_vec();
        s.sort_by(f64::total_cmp);
        s.dedup();
        s.len()
    };
    if distinct < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: distinct,
        });
    }
    let mut widened = Vec::new();
    let mut values = Vec::with_capacity(eval_points.len());
    for &x0 in eval_points {
        let support = x.iter().filter(|&&xi| ((xi - x0) / h).abs() < 1.0).count();
        let bandwidth = if support >= 2 {
            h
        } else {
            let mut d: Vec<f64> = x.iter().map(|xi| (xi - x0).abs()).collect();
            d.sort_by(f64::total_cmp);
            let local = 1.01 * d[1].max(f64::MIN_POSITIVE);
            widened.push(Widening {
                at: x0,
                bandwidth: local,
            });
            local
        };
        values.push(local_linear_at(x, y, bandwidth, x0));
    }
    Ok(LocalLinearEstimate { values, widened })
}

fn local_linear_at(x: &[f64], y: &[f64], h: f64, x0: f64) -> f64 {
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let d = xi - x0;
        let w = epanechnikov(d / h);
        if w > 0.0 {
            s0 += w;
            s1 += w * d;
            s2 += w * d * d;
            t0 += w * yi;
            t1 += w * d * yi;
        }
    }
    let det = s0 * s2 - s1 * s1;
    if det.abs() <= 1e-14 * s0 * s2 {
        // all weight on one abscissa: fall back to the weighted mean
        t0 / s0
    } else {
        (s2 * t0 - s1 * t1) / det
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleBandwidth {
    pub bandwidth: f64,
    /// Difference-based noise variance estimate.
    pub sigma2: f64,
    /// Set when the variance estimate was zero and the `2/n` floor was used.
    pub floored: bool,
}

/// `(sigma2 / n)^(1/5)` with `sigma2 = sum (y_{i+1} - y_i)^2 / (2(n-1))`, `y` ordered by `x`.
pub fn rule_bandwidth(y: &[f64]) -> Result<RuleBandwidth> {
    let n = y.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let sigma2 = y.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / (2.0 * (n - 1) as f64);
    if sigma2 > 0.0 {
        Ok(RuleBandwidth {
            bandwidth: (sigma2 / n as f64).powf(0.2),
            sigma2,
            floored: false,
        })
    } else {
        Ok(RuleBandwidth {
            bandwidth: 2.0 / n as f64,
            sigma2,
            floored: true,
        })
    }
}

/// `n` log-spaced penalties between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(GCV_GRID_MIN, GCV_GRID_MAX, GCV_GRID_POINTS)
}

/// Components of the GCV-type score at one penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct GcvEvaluation {
    pub lambda: f64,
    pub score: f64,
    /// `(1/n) sum (y_i - f^c(x_i))^2`
    pub numerator: f64,
    /// `mean_k [Tr(I - A_{lambda,t_k})]^2`
    pub denominator: f64,
    pub field: TimeVectorField<SplineFit>,
    /// The monotone fit at the design points.
    pub fitted: Vec<f64>,
}

impl GcvEvaluation {
    pub fn traces(&self) -> &[f64] {
        &self.field.traces
    }
}

/// Fits the flow to `(x, f_hat)` and scores its residual against `response`.
pub fn gcv_evaluate(
    x: &[f64],
    f_hat: &[f64],
    response: &[f64],
    kernel: &Kernel,
    lambda: f64,
    steps: usize,
) -> Result<GcvEvaluation> {
    if response.len() != x.len() {
        return Err(Error::Input("design and response lengths differ".into()));
    }
    let field = fit_time_field(x, f_hat, kernel, lambda, steps)?;
    let fitted = field.integrate_forward(x)?;
    let n = x.len() as f64;
    let numerator = fitted
        .iter()
        .zip(response)
        .map(|(f, y)| (y - f).powi(2))
        .sum::<f64>()
        / n;
    let denominator =
        field.traces.iter().map(|tr| (n - tr).powi(2)).sum::<f64>() / field.num_steps() as f64;
    let score = if denominator > 0.0 {
        numerator / denominator
    } else {
        f64::INFINITY
    };
    Ok(GcvEvaluation {
        lambda,
        score,
        numerator,
        denominator,
        field,
        fitted,
    })
}

/// `V(lambda) = [(1/n) sum (y_i - f^c(x_i))^2] / mean_k [Tr(I - A_{lambda,t_k})]^2`.
pub fn gcv_score(
    x: &[f64],
    f_hat: &[f64],
    response: &[f64],
    kernel: &Kernel,
    lambda: f64,
    steps: usize,
) -> Result<f64> {
    Ok(gcv_evaluate(x, f_hat, response, kernel, lambda, steps)?.score)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaPolicy {
    Fixed(f64),
    Gcv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcvPoint {
    pub lambda: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardStatus {
    pub sup_norm: f64,
    pub steps: usize,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneEstimate {
    pub flow: FlowMap<SplineFit>,
    pub lambda_selected: f64,
    pub gcv_curve: Vec<GcvPoint>,
    pub pre_estimate: Vec<f64>,
    pub design: Vec<f64>,
    /// The estimate at the design points (same values the GCV numerator used).
    pub fitted: Vec<f64>,
    pub guard: GuardStatus,
    /// Smallest and largest `Tr(A_{lambda,t_k})` over every node of every fitted penalty.
    pub trace_range: [f64; 2],
}

impl MonotoneEstimate {
    pub fn eval(&self, points: &[f64]) -> Result<Vec<f64>> {
        self.flow.eval(points)
    }
}

pub fn eval_estimate(est: &MonotoneEstimate, points: &[f64]) -> Result<Vec<f64>> {
    est.eval(points)
}

/// Scans the penalty grid; failing grid points score `+inf`.
pub fn gcv_scan(
    x: &[f64],
    f_hat: &[f64],
    response: &[f64],
    kernel: &Kernel,
    grid: &[f64],
    steps: usize,
) -> Result<Vec<Result<GcvEvaluation>>> {
    if grid.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    Ok(grid
        .par_iter()
        .map(|&lambda| gcv_evaluate(x, f_hat, response, kernel, lambda, steps))
        .collect())
}

/// Index of the smallest score; ties go to the larger penalty.
pub fn select_gcv(scores: &[f64], grid: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in 0..scores.len() {
        if scores[i].is_nan() {
            continue;
        }
        match best {
            None => best = Some(i),
            Some(b) => {
                let better = scores[i] < scores[b] || (scores[i] == scores[b] && grid[i] > grid[b]);
                if better {
                    best = Some(i);
                }
            }
        }
    }
    best
}

pub fn monotonize(
    x: &[f64],
    f_hat: &[f64],
    kernel: &Kernel,
    lambda: LambdaPolicy,
    steps: usize,
) -> Result<MonotoneEstimate> {
    monotonize_on_grid(
        x,
        f_hat,
        f_hat,
        kernel,
        lambda,
        steps,
        &default_lambda_grid(),
    )
}

/// As [`monotonize`], with the GCV residual taken against the raw observations `y`.
pub fn monotonize_observed(
    x: &[f64],
    f_hat: &[f64],
    y: &[f64],
    kernel: &Kernel,
    lambda: LambdaPolicy,
    steps: usize,
) -> Result<MonotoneEstimate> {
    monotonize_on_grid(x, f_hat, y, kernel, lambda, steps, &default_lambda_grid())
}

pub fn monotonize_on_grid(
    x: &[f64],
    f_hat: &[f64],
    response: &[f64],
    kernel: &Kernel,
    lambda: LambdaPolicy,
    steps: usize,
    grid: &[f64],
) -> Result<MonotoneEstimate> {
    if x.len() != f_hat.len() || x.len() != response.len() {
        return Err(Error::Input(
            "design and pre-estimate lengths differ".into(),
        ));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input(
            "design points must be strictly increasing".into(),
        ));
    }
    let mut trace_range = [f64::INFINITY, f64::NEG_INFINITY];
    let mut track = |e: &GcvEvaluation| {
        for &tr in &e.field.traces {
            trace_range[0] = trace_range[0].min(tr);
            trace_range[1] = trace_range[1].max(tr);
        }
    };
    let (chosen, gcv_curve) = match lambda {
        LambdaPolicy::Fixed(l) => {
            let e = gcv_evaluate(x, f_hat, response, kernel, l, steps)?;
            track(&e);
            (e, Vec::new())
        }
        LambdaPolicy::Gcv => {
            let evals = gcv_scan(x, f_hat, response, kernel, grid, steps)?;
            let mut scores = Vec::with_capacity(evals.len());
            let mut kept = Vec::with_capacity(evals.len());
            for e in evals {
                match e {
                    Ok(e) => {
                        track(&e);
                        scores.push(e.score);
                        kept.push(Some(e));
                    }
                    Err(err) if err.is_numerical() => {
                        scores.push(f64::INFINITY);
                        kept.push(None);
                    }
                    Err(err) => return Err(err),
                }
            }
            let best = select_gcv(&scores, grid)
                .filter(|&i| kept[i].is_some())
                .ok_or_else(|| Error::Numerical {
                    context: "every lambda on the GCV grid failed".into(),
                    condition: f64::INFINITY,
                })?;
            let curve = grid
                .iter()
                .zip(&scores)
                .map(|(&lambda, &score)| GcvPoint { lambda, score })
                .collect();
            (kept.swap_remove(best).expect("checked above"), curve)
        }
    };
    let sup_norm = chosen.field.sup_norm();
    let guard = GuardStatus {
        sup_norm,
        steps,
        holds: sup_norm < steps as f64,
    };
    Ok(MonotoneEstimate {
        lambda_selected: chosen.lambda,
        gcv_curve,
        pre_estimate: f_hat.to_vec(),
        design: x.to_vec(),
        fitted: chosen.fitted,
        flow: FlowMap::forward(chosen.field),
        guard,
        trace_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(n: usize) -> Vec<f64> {
        (1..=n).map(|i| i as f64 / n as f64).collect()
    }

    #[test]
    fn local_linear_reproduces_lines() {
        let x = grid(20);
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let pts = [0.0, 0.013, 0.5, 0.77, 1.0, 1.2];
        for &h in &[0.03, 0.1, 0.5] {
            let est = local_linear(&x, &y, h, &pts).unwrap();
            for (p, v) in pts.iter().zip(&est.values) {
                assert_abs_diff_eq!(*v, 2.0 * p + 1.0, epsilon = 1e-10);
            }
        }
        let c: Vec<f64> = vec![3.5; x.len()];
        let est = local_linear(&x, &c, 0.1, &pts).unwrap();
        assert!(est.values.iter().all(|v| (v - 3.5).abs() < 1e-12));
    }

    #[test]
    fn local_linear_widens_narrow_windows() {
        let x = grid(10);
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let est = local_linear(&x, &y, 0.01, &[0.55, 0.5]).unwrap();
        assert_eq!(est.widened.len(), 2);
        assert!(est.values.iter().all(|v| v.is_finite()));
        assert!(local_linear(&x, &y, 0.0, &[0.5]).is_err());
    }

    #[test]
    fn rule_bandwidth_examples() {
        let r = rule_bandwidth(&[2.0; 10]).unwrap();
        assert_eq!(r.sigma2, 0.0);
        assert!(r.floored);
        assert_abs_diff_eq!(r.bandwidth, 0.2, epsilon = 1e-15);

        let alt: Vec<f64> = (0..50).map(|i| (i % 2) as f64).collect();
        let r = rule_bandwidth(&alt).unwrap();
        assert_abs_diff_eq!(r.sigma2, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.bandwidth, 0.01f64.powf(0.2), epsilon = 1e-12);
        assert_abs_diff_eq!(r.bandwidth, 0.3981, epsilon = 1e-4);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = default_lambda_grid();
        assert_eq!(g.len(), 25);
        assert_abs_diff_eq!(g[0], 1e-6, epsilon = 1e-18);
        assert_abs_diff_eq!(g[24], 10.0, epsilon = 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn gcv_ties_pick_larger_lambda() {
        let grid = [0.1, 1.0, 10.0];
        assert_eq!(select_gcv(&[0.0, 0.0, 0.0], &grid), Some(2));
        assert_eq!(select_gcv(&[0.5, 0.2, 0.3], &grid), Some(1));
        assert_eq!(select_gcv(&[0.2, f64::INFINITY, 0.2], &grid), Some(2));
    }

    #[test]
    fn identity_pre_estimate_gives_identity() {
        let x = grid(12);
        let k = Kernel::default_for(&x).unwrap();
        let est = monotonize(&x, &x, &k, LambdaPolicy::Gcv, 30).unwrap();
        assert!(est.gcv_curve.iter().all(|p| p.score == 0.0));
        assert_eq!(est.lambda_selected, 10.0);
        let pts = [0.0, 0.31, 0.9];
        assert_eq!(est.eval(&pts).unwrap(), pts.to_vec());
    }

    #[test]
    fn dataset_sorts_and_validates() {
        let d = Dataset::new(vec![0.3, 0.1, 0.2], vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(d.x, vec![0.1, 0.2, 0.3]);
        assert_eq!(d.y, vec![1.0, 2.0, 3.0]);
        assert!(Dataset::new(vec![0.1, 0.1, 0.2], vec![1.0; 3]).is_err());
        assert!(Dataset::new(vec![0.1, 0.2], vec![1.0; 2]).is_err());
    }

    #[test]
    fn eval_at_design_matches_gcv_values() {
        let x = grid(15);
        let f: Vec<f64> = x.iter().map(|v| v * v + 0.05 * (9.0 * v).sin()).collect();
        let k = Kernel::default_for(&x).unwrap();
        let est = monotonize(&x, &f, &k, LambdaPolicy::Fixed(1e-3), 30).unwrap();
        let again = est.eval(&x).unwrap();
        assert_eq!(again, est.fitted);
    }
}
