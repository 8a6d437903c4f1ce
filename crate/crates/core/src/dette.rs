//! Monotone regression by kernel-smoothed inversion (the comparison baseline).
//!
//! The unconstrained pre-fit `f_hat` is tabulated at `i/N`; the inverse is
//! estimated as `m_inv(t) = (1/N) sum_i G((t - f_hat(i/N)) / h_d)` with `G` the
//! Epanechnikov distribution function, and the monotone estimate is its
//! reflection about `y = x`, read off the tabulated inverse.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monotone::{local_linear, log_grid, rule_bandwidth};

pub const DEFAULT_GRID_SIZE: usize = 100;
/// Inverse table resolution as a multiple of `N`.
const TABLE_FACTOR: usize = 4;
const CV_GRID_POINTS: usize = 15;

/// Epanechnikov CDF.
pub fn epanechnikov_cdf(u: f64) -> f64 {
    if u <= -1.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        (3.0 * u - u * u * u + 2.0) / 4.0
    }
}

/// `m_inv(t) = (1/N) sum_i G((t - f_i) / h_d)`.
pub fn dette_inverse(f_hat_on_grid: &[f64], h_d: f64, t: f64) -> f64 {
    let sum: f64 = f_hat_on_grid
        .iter()
        .map(|&f| epanechnikov_cdf((t - f) / h_d))
        .sum();
    sum / f_hat_on_grid.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthPolicy {
    Fixed(f64),
    /// `(sigma2 / n)^(1/5)` for the pre-fit, `h_r^3` for the inverse.
    Rule,
    /// Leave-one-out cross-validation (inverse bandwidth only).
    Cv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetteEstimate {
    /// `(t, m_inv(t))` samples, nondecreasing in both coordinates.
    pub inverse_grid: Vec<(f64, f64)>,
    pub h_d: f64,
    pub h_r: f64,
    pub grid_size: usize,
    /// Reflected table `(m_inv, t)` with tied inverse values collapsed.
    reflected: Vec<(f64, f64)>,
}

/// The pre-fit evaluated at `i/N`, `i = 1..N`.
pub fn prefit_grid(x: &[f64], y: &[f64], h_r: f64, grid_size: usize) -> Result<Vec<f64>> {
    if grid_size == 0 {
        return Err(Error::Config("grid size N must be positive".into()));
    }
    let pts: Vec<f64> = (1..=grid_size)
        .map(|i| i as f64 / grid_size as f64)
        .collect();
    Ok(local_linear(x, y, h_r, &pts)?.values)
}

impl DetteEstimate {
    /// Builds the estimate from a pre-fit already tabulated at `i/N`.
    pub fn from_prefit(f_hat_on_grid: &[f64], h_d: f64, h_r: f64) -> Result<Self> {
        if !(h_d.is_finite() && h_d > 0.0) {
            return Err(Error::Config(format!("h_d must be positive, got {h_d}")));
        }
        let n = f_hat_on_grid.len();
        if n == 0 {
            return Err(Error::Input("empty pre-fit grid".into()));
        }
        let lo = f_hat_on_grid.iter().cloned().fold(f64::INFINITY, f64::min) - h_d;
        let hi = f_hat_on_grid
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
            + h_d;
        let m = TABLE_FACTOR * n;
        let inverse_grid: Vec<(f64, f64)> = (0..m)
            .map(|j| {
                let t = lo + (hi - lo) * j as f64 / (m - 1) as f64;
                (t, dette_inverse(f_hat_on_grid, h_d, t))
            })
            .collect();
        let reflected = reflect(&inverse_grid);
        Ok(Self {
            inverse_grid,
            h_d,
            h_r,
            grid_size: n,
            reflected,
        })
    }

    /// The monotone estimate at `points` (piecewise linear in the reflected table,
    /// constant beyond its ends).
    pub fn eval(&self, points: &[f64]) -> Vec<f64> {
        points.iter().map(|&s| self.eval_one(s)).collect()
    }

    fn eval_one(&self, s: f64) -> f64 {
        let table = &self.reflected;
        let first = table[0];
        let last = table[table.len() - 1];
        if table.len() == 1 || s <= first.0 {
            return first.1;
        }
        if s >= last.0 {
            return last.1;
        }
        let j = table.partition_point(|&(u, _)| u <= s);
        let (u0, t0) = table[j - 1];
        let (u1, t1) = table[j];
        t0 + (t1 - t0) * (s - u0) / (u1 - u0)
    }
}

/// Transposes `(t, m)` into `(m, t)`, collapsing runs of equal `m` to their mean `t`.
fn reflect(table: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(table.len());
    let mut run_sum = 0.0;
    let mut run_len = 0usize;
    for (i, &(t, m)) in table.iter().enumerate() {
        run_sum += t;
        run_len += 1;
        let run_ends = table.get(i + 1).map_or(true, |&(_, next)| next > m);
        if run_ends {
            out.push((m, run_sum / run_len as f64));
            run_sum = 0.0;
            run_len = 0;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSelection {
    pub h_d: f64,
    pub scores: Vec<(f64, f64)>,
}

/// Default inverse-bandwidth grid: 15 log-spaced points in `[h_r^3/10, 10 h_r^3]`.
pub fn default_hd_grid(h_r: f64) -> Vec<f64> {
    let c = h_r.powi(3);
    log_grid(c / 10.0, 10.0 * c, CV_GRID_POINTS)
}

/// Leave-one-out CV of the final monotone estimate at the design points.
pub fn cv_select_hd(
    x: &[f64],
    y: &[f64],
    h_r: f64,
    grid: &[f64],
    grid_size: usize,
) -> Result<CvSelection> {
    if grid.is_empty() {
        return Err(Error::Config("empty h_d grid".into()));
    }
    if grid.len() == 1 {
        return Ok(CvSelection {
            h_d: grid[0],
            scores: Vec::new(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    let loo_prefits: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let xs: Vec<f64> = x
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| *v)
                .collect();
            let ys: Vec<f64> = y
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| *v)
                .collect();
            prefit_grid(&xs, &ys, h_r, grid_size)
        })
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = grid
        .par_iter()
        .map(|&h_d| {
            let mut sse = 0.0;
            for i in 0..n {
                let est = DetteEstimate::from_prefit(&loo_prefits[i], h_d, h_r)?;
                sse += (est.eval_one(x[i]) - y[i]).powi(2);
            }
            Ok(sse / n as f64)
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for i in 1..grid.len() {
        if scores[i] < scores[best] || (scores[i] == scores[best] && grid[i] > grid[best]) {
            best = i;
        }
    }
    Ok(CvSelection {
        h_d: grid[best],
        scores: grid.iter().cloned().zip(scores).collect(),
    })
}

/// Full baseline: rule or fixed pre-fit bandwidth, then fixed, rule or CV inverse bandwidth.
pub fn dette_estimate(
    x: &[f64],
    y: &[f64],
    h_r: BandwidthPolicy,
    h_d: BandwidthPolicy,
    grid_size: usize,
) -> Result<DetteEstimate> {
    if x.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: x.len(),
        });
    }
    let h_r = match h_r {
        BandwidthPolicy::Fixed(h) => h,
        BandwidthPolicy::Rule => rule_bandwidth(y)?.bandwidth,
        BandwidthPolicy::Cv => {
            return Err(Error::Config(
                "cross-validation is only available for the inverse bandwidth".into(),
            ))
        }
    };
    let h_d = match h_d {
        BandwidthPolicy::Fixed(h) => h,
        BandwidthPolicy::Rule => h_r.powi(3),
        BandwidthPolicy::Cv => cv_select_hd(x, y, h_r, &default_hd_grid(h_r), grid_size)?.h_d,
    };
    let prefit = prefit_grid(x, y, h_r, grid_size)?;
    DetteEstimate::from_prefit(&prefit, h_d, h_r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn inverse_examples() {
        let c = 0.4;
        let flat = [c; 7];
        assert_abs_diff_eq!(dette_inverse(&flat, 0.1, c), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(dette_inverse(&flat, 0.1, c + 0.1), 1.0, epsilon = 1e-12);
        assert_eq!(dette_inverse(&flat, 0.1, c + 0.3), 1.0);
        assert_abs_diff_eq!(dette_inverse(&flat, 0.1, c - 0.1), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            dette_inverse(&[0.0, 0.5, 1.0], 0.1, 0.5),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn cdf_is_continuous_and_monotone() {
        assert_eq!(epanechnikov_cdf(-1.0), 0.0);
        assert_eq!(epanechnikov_cdf(1.0), 1.0);
        assert_abs_diff_eq!(epanechnikov_cdf(0.0), 0.5, epsilon = 1e-15);
        let vals: Vec<f64> = (0..=200)
            .map(|i| epanechnikov_cdf(-1.2 + i as f64 * 0.012))
            .collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn reflection_collapses_ties() {
        let t = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.5), (3.0, 1.0), (4.0, 1.0)];
        assert_eq!(reflect(&t), vec![(0.0, 0.5), (0.5, 2.0), (1.0, 3.5)]);
    }

    #[test]
    fn affine_data_recovered_in_interior() {
        let n = 50;
        let x: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + 0.2).collect();
        let h_d = 0.01;
        let est = dette_estimate(
            &x,
            &y,
            BandwidthPolicy::Fixed(0.15),
            BandwidthPolicy::Fixed(h_d),
            100,
        )
        .unwrap();
        for i in 0..=40 {
            let s = 0.1 + 0.02 * i as f64;
            let v = est.eval(&[s])[0];
            assert!((v - (0.5 * s + 0.2)).abs() <= 5.0 * h_d, "s={s} v={v}");
        }
    }

    #[test]
    fn single_element_cv_grid() {
        let x = [0.1, 0.5, 0.9];
        let y = [0.0, 1.0, 2.0];
        assert_eq!(cv_select_hd(&x, &y, 0.5, &[0.02], 50).unwrap().h_d, 0.02);
    }

    #[test]
    fn constant_data_cv_is_finite() {
        let n = 20;
        let x: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        let y = vec![1.5; n];
        let sel = cv_select_hd(&x, &y, 0.2, &[0.001, 0.01, 0.1], 50).unwrap();
        assert!(sel.scores.iter().all(|(_, s)| s.is_finite()));
    }
}
