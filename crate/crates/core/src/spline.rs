//! Closed-form general spline smoothing over `span{1, x} + H_K` (and the planar
//! analogue with an affine null space).
//!
//! For design points `X`, responses `Y`, Gram matrix `S` and `S_l = S + n lambda I`,
//! the minimiser of `(1/n) sum (f(x_i) - y_i)^2 + lambda |h|_K^2` has
//!
//! ```text
//! alpha = (T' S_l^-1 T)^-1 T' S_l^-1 Y
//! beta  = S_l^-1 (Y - T alpha)
//! ```
//!
//! where `T` holds the null-space basis evaluated at the design.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{gram_matrix, gram_matrix_2d, Kernel};

/// Condition estimates above this abort the solve.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative separation below which two design points count as coincident.
pub(crate) const COINCIDENCE_TOL: f64 = 1e-12;

/// Factorised penalised system shared by the 1D and 2D solvers.
pub(crate) struct PenalizedSystem {
    gram: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    /// `S_l^-1 T`
    weighted_basis: DMatrix<f64>,
    reduced: Cholesky<f64, Dyn>,
    n_lambda: f64,
}

impl PenalizedSystem {
    pub(crate) fn new(gram: DMatrix<f64>, basis: &DMatrix<f64>, lambda: f64) -> Result<Self> {
        let n = gram.nrows();
        let n_lambda = n as f64 * lambda;
        let mut shifted = gram.clone();
        for i in 0..n {
            shifted[(i, i)] += n_lambda;
        }
        let norm1 = matrix_norm1(&shifted);
        let chol = Cholesky::new(shifted).ok_or_else(|| Error::Numerical {
            context: "cholesky of the penalised gram matrix".into(),
            condition: f64::INFINITY,
        })?;
        let condition = condition_estimate(&chol, norm1);
        if condition > MAX_CONDITION {
            return Err(Error::Numerical {
                context: "penalised gram matrix".into(),
                condition,
            });
        }
        let weighted_basis = chol.solve(basis);
        let reduced_m = basis.transpose() * &weighted_basis;
        let reduced_m = 0.5 * (&reduced_m + reduced_m.transpose());
        let reduced_norm1 = matrix_norm1(&reduced_m);
        let reduced = Cholesky::new(reduced_m).ok_or_else(|| Error::Numerical {
            context: "reduced null-space system".into(),
            condition: f64::INFINITY,
        })?;
        let reduced_condition = condition_estimate(&reduced, reduced_norm1);
        if reduced_condition > MAX_CONDITION {
            return Err(Error::Numerical {
                context: "reduced null-space system".into(),
                condition: reduced_condition,
            });
        }
        Ok(Self {
            gram,
            chol,
            weighted_basis,
            reduced,
            n_lambda,
        })
    }

    /// Returns `(alpha, beta)` for one response vector.
    pub(crate) fn solve(&self, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let rhs = self.weighted_basis.transpose() * y;
        let alpha = self.reduced.solve(&rhs);
        let beta = &self.weighted_basis * &alpha;
        let beta = self.chol.solve(y) - beta;
        (alpha, beta)
    }

    /// `A = I - n lambda S_l^-1 (I - P)`, algebraically equal to `P + S S_l^-1 (I - P)`.
    pub(crate) fn influence(&self) -> DMatrix<f64> {
        let n = self.gram.nrows();
        let q = self.residual_operator();
        DMatrix::identity(n, n) - q * self.n_lambda
    }

    pub(crate) fn influence_trace(&self) -> f64 {
        let n = self.gram.nrows();
        n as f64 - self.n_lambda * self.residual_operator().trace()
    }

    /// `S_l^-1 - S_l^-1 T M^-1 T' S_l^-1`
    fn residual_operator(&self) -> DMatrix<f64> {
        let inv = self.chol.inverse();
        let proj = &self.weighted_basis * self.reduced.solve(&self.weighted_basis.transpose());
        inv - proj
    }
}

/// Ratio of extreme squared Cholesky pivots; a cheap lower bound on the 2-norm condition.
fn matrix_norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm condition number, with `||A^-1||_1` from Hager's estimator on the factor.
fn condition_estimate(chol: &Cholesky<f64, Dyn>, norm1: f64) -> f64 {
    let n = chol.l_dirty().nrows();
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut estimate = 0.0;
    for _ in 0..5 {
        let y = chol.solve(&x);
        estimate = y.iter().map(|v| v.abs()).sum::<f64>();
        let sign = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = chol.solve(&sign);
        let (j, zmax) = z.iter().enumerate().fold((0, 0.0f64), |(bj, bm), (j, v)| {
            if v.abs() > bm {
                (j, v.abs())
            } else {
                (bj, bm)
            }
        });
        if zmax <= z.dot(&x) {
            break;
        }
        x.fill(0.0);
        x[j] = 1.0;
    }
    if estimate.is_finite() {
        norm1 * estimate
    } else {
        f64::INFINITY
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "lambda must be positive, got {lambda}"
        )))
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Input(format!("non-finite {what} at index {i}"))),
        None => Ok(()),
    }
}

/// Index pair of the first two coincident 1D design points, if any.
pub(crate) fn find_coincident(points: &[f64]) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
    order.windows(2).find_map(|w| {
        let (a, b) = (points[w[0]], points[w[1]]);
        let scale = 1f64.max(a.abs()).max(b.abs());
        ((b - a).abs() <= COINCIDENCE_TOL * scale).then_some((w[0], w[1]))
    })
}

pub(crate) fn find_coincident_2d(points: &[[f64; 2]]) -> Option<(usize, usize)> {
    for i in 0..points.len() {
        for j in 0..i {
            let (p, q) = (points[i], points[j]);
            let scale = 1f64
                .max(p[0].abs())
                .max(p[1].abs())
                .max(q[0].abs())
                .max(q[1].abs());
            if (p[0] - q[0]).hypot(p[1] - q[1]) <= COINCIDENCE_TOL * scale {
                return Some((j, i));
            }
        }
    }
    None
}

/// One solved 1D smoothing problem: `f(x) = a1 + a2 x + sum beta_i K(x, design_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineFit {
    pub alpha: [f64; 2],
    pub beta: Vec<f64>,
    pub design: Vec<f64>,
    pub lambda: f64,
    pub kernel: Kernel,
}

fn basis_1d(x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), 2, |i, j| if j == 0 { 1.0 } else { x[i] })
}

fn validate_1d(x: &[f64], y: Option<&[f64]>, kernel: &Kernel, lambda: f64) -> Result<()> {
    kernel.validate()?;
    check_lambda(lambda)?;
    if let Some(y) = y {
        if x.len() != y.len() {
            return Err(Error::Input(format!(
                "design has {} points but response has {}",
                x.len(),
                y.len()
            )));
        }
        check_finite(y, "response")?;
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: x.len(),
        });
    }
    check_finite(x, "design point")?;
    if let Some((i, j)) = find_coincident(x) {
        return Err(Error::DegenerateDesign(format!(
            "design points {i} and {j} coincide at {}",
            x[i]
        )));
    }
    Ok(())
}

pub(crate) fn system_1d(x: &[f64], kernel: &Kernel, lambda: f64) -> Result<PenalizedSystem> {
    PenalizedSystem::new(gram_matrix(kernel, x), &basis_1d(x), lambda)
}

pub fn fit_spline_1d(x: &[f64], y: &[f64], kernel: &Kernel, lambda: f64) -> Result<SplineFit> {
    validate_1d(x, Some(y), kernel, lambda)?;
    let system = system_1d(x, kernel, lambda)?;
    Ok(solve_1d(&system, x, y, kernel, lambda))
}

/// Fit plus the trace of its influence matrix, sharing one factorisation.
pub(crate) fn fit_spline_1d_with_trace(
    x: &[f64],
    y: &[f64],
    kernel: &Kernel,
    lambda: f64,
) -> Result<(SplineFit, f64)> {
    validate_1d(x, Some(y), kernel, lambda)?;
    let system = system_1d(x, kernel, lambda)?;
    let fit = solve_1d(&system, x, y, kernel, lambda);
    Ok((fit, system.influence_trace()))
}

fn solve_1d(
    system: &PenalizedSystem,
    x: &[f64],
    y: &[f64],
    kernel: &Kernel,
    lambda: f64,
) -> SplineFit {
    let (alpha, beta) = system.solve(&DVector::from_column_slice(y));
    SplineFit {
        alpha: [alpha[0], alpha[1]],
        beta: beta.as_slice().to_vec(),
        design: x.to_vec(),
        lambda,
        kernel: *kernel,
    }
}

/// Influence (hat) matrix mapping responses to fitted values at the design.
pub fn influence_matrix(x: &[f64], kernel: &Kernel, lambda: f64) -> Result<DMatrix<f64>> {
    validate_1d(x, None, kernel, lambda)?;
    Ok(system_1d(x, kernel, lambda)?.influence())
}

impl SplineFit {
    pub fn eval(&self, x: f64) -> f64 {
        let kernel_part: f64 = self
            .beta
            .iter()
            .zip(&self.design)
            .map(|(b, d)| b * self.kernel.eval(x, *d))
            .sum();
        self.alpha[0] + self.alpha[1] * x + kernel_part
    }

    /// `|h|_K^2 = beta' S beta`.
    pub fn rkhs_norm_sq(&self) -> f64 {
        let g = gram_matrix(&self.kernel, &self.design);
        let b = DVector::from_column_slice(&self.beta);
        (b.transpose() * g * &b)[0].max(0.0)
    }

    /// Norm on the affine-plus-RKHS space: `max(|a1|, |a2|) + |h|_K`.
    pub fn norm(&self) -> f64 {
        self.alpha[0].abs().max(self.alpha[1].abs()) + self.rkhs_norm_sq().sqrt()
    }

    /// `(1/n) sum (f(x_i) - y_i)^2 + lambda |h|_K^2` on the given data.
    pub fn objective(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let loss: f64 = x
            .iter()
            .zip(y)
            .map(|(&xi, &yi)| (self.eval(xi) - yi).powi(2))
            .sum();
        loss / n + self.lambda * self.rkhs_norm_sq()
    }
}

/// Planar vector spline `f(p) = A p + b + (sum beta1_i K(p, x_i), sum beta2_i K(p, x_i))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorSplineFit2D {
    pub affine: [[f64; 2]; 2],
    pub offset: [f64; 2],
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub design: Vec<[f64; 2]>,
    pub lambda: f64,
    pub kernel: Kernel,
}

fn basis_2d(x: &[[f64; 2]]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), 3, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] })
}

/// True when the points do not span the plane affinely.
fn affinely_degenerate(points: &[[f64; 2]]) -> bool {
    let n = points.len() as f64;
    let mean = points
        .iter()
        .fold([0.0, 0.0], |m, p| [m[0] + p[0] / n, m[1] + p[1] / n]);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - mean[0], p[1] - mean[1]);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let disc = ((tr * tr / 4.0) - det).max(0.0).sqrt();
    let (lo, hi) = (tr / 2.0 - disc, tr / 2.0 + disc);
    hi <= 0.0 || lo <= 1e-12 * hi
}

pub(crate) fn validate_2d(sources: &[[f64; 2]], kernel: &Kernel, lambda: f64) -> Result<()> {
    kernel.validate()?;
    check_lambda(lambda)?;
    if sources.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: sources.len(),
        });
    }
    if sources
        .iter()
        .any(|p| !(p[0].is_finite() && p[1].is_finite()))
    {
        return Err(Error::Input("non-finite landmark coordinate".into()));
    }
    if let Some((i, j)) = find_coincident_2d(sources) {
        return Err(Error::DegenerateDesign(format!(
            "landmarks {i} and {j} coincide at ({}, {})",
            sources[i][0], sources[i][1]
        )));
    }
    if affinely_degenerate(sources) {
        return Err(Error::DegenerateDesign("landmarks are collinear".into()));
    }
    Ok(())
}

pub fn fit_spline_2d(
    sources: &[[f64; 2]],
    targets: &[[f64; 2]],
    kernel: &Kernel,
    lambda: f64,
) -> Result<VectorSplineFit2D> {
    if sources.len() != targets.len() {
        return Err(Error::Input(format!(
            "{} sources but {} targets",
            sources.len(),
            targets.len()
        )));
    }
    if targets
        .iter()
        .any(|p| !(p[0].is_finite() && p[1].is_finite()))
    {
        return Err(Error::Input("non-finite target coordinate".into()));
    }
    validate_2d(sources, kernel, lambda)?;
    let system = PenalizedSystem::new(gram_matrix_2d(kernel, sources), &basis_2d(sources), lambda)?;
    let y1 = DVector::from_iterator(targets.len(), targets.iter().map(|t| t[0]));
    let y2 = DVector::from_iterator(targets.len(), targets.iter().map(|t| t[1]));
    let (a1, b1) = system.solve(&y1);
    let (a2, b2) = system.solve(&y2);
    Ok(VectorSplineFit2D {
        affine: [[a1[1], a1[2]], [a2[1], a2[2]]],
        offset: [a1[0], a2[0]],
        beta1: b1.as_slice().to_vec(),
        beta2: b2.as_slice().to_vec(),
        design: sources.to_vec(),
        lambda,
        kernel: *kernel,
    })
}

impl VectorSplineFit2D {
    pub fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        let a = &self.affine;
        let mut out = [
            a[0][0] * p[0] + a[0][1] * p[1] + self.offset[0],
            a[1][0] * p[0] + a[1][1] * p[1] + self.offset[1],
        ];
        for ((b1, b2), d) in self.beta1.iter().zip(&self.beta2).zip(&self.design) {
            let k = self.kernel.eval2(p, *d);
            out[0] += b1 * k;
            out[1] += b2 * k;
        }
        out
    }

    /// `|h1|_K^2 + |h2|_K^2`.
    pub fn rkhs_norm_sq(&self) -> f64 {
        let g = gram_matrix_2d(&self.kernel, &self.design);
        let quad = |b: &[f64]| {
            let v = DVector::from_column_slice(b);
            (v.transpose() * &g * &v)[0].max(0.0)
        };
        quad(&self.beta1) + quad(&self.beta2)
    }

    /// Largest affine coefficient plus the joint RKHS norm.
    pub fn norm(&self) -> f64 {
        let affine_max = self
            .affine
            .iter()
            .flatten()
            .chain(&self.offset)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        affine_max + self.rkhs_norm_sq().sqrt()
    }

    pub fn objective(&self, sources: &[[f64; 2]], targets: &[[f64; 2]]) -> f64 {
        let n = sources.len() as f64;
        let loss: f64 = sources
            .iter()
            .zip(targets)
            .map(|(s, t)| {
                let f = self.eval(*s);
                (f[0] - t[0]).powi(2) + (f[1] - t[1]).powi(2)
            })
            .sum();
        loss / n + self.lambda * self.rkhs_norm_sq()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gauss(s: f64) -> Kernel {
        Kernel::gaussian(s).unwrap()
    }

    #[test]
    fn affine_data_reproduced_exactly() {
        let x = [0.0, 0.5, 1.0];
        let y = [1.0, 2.0, 3.0];
        for &lambda in &[1e-6, 1e-2, 1.0, 1e3] {
            let fit = fit_spline_1d(&x, &y, &gauss(0.3), lambda).unwrap();
            assert_abs_diff_eq!(fit.alpha[0], 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(fit.alpha[1], 2.0, epsilon = 1e-9);
            for b in &fit.beta {
                assert_abs_diff_eq!(*b, 0.0, epsilon = 1e-9);
            }
            assert!(fit.objective(&x, &y) < 1e-18);
        }
    }

    #[test]
    fn eval_affine_only() {
        let fit = SplineFit {
            alpha: [0.0, 1.0],
            beta: vec![0.0; 3],
            design: vec![0.0, 0.5, 1.0],
            lambda: 1.0,
            kernel: gauss(1.0),
        };
        assert_eq!(fit.eval(0.7), 0.7);
    }

    #[test]
    fn input_errors() {
        let k = gauss(0.5);
        assert!(matches!(
            fit_spline_1d(&[0.0, 1.0], &[0.0, 1.0], &k, 0.1),
            Err(Error::InsufficientData { needed: 3, got: 2 })
        ));
        assert!(matches!(
            fit_spline_1d(&[0.0, 0.5, 0.5], &[0.0, 1.0, 2.0], &k, 0.1),
            Err(Error::DegenerateDesign(_))
        ));
        assert!(matches!(
            fit_spline_1d(&[0.0, 0.5, 1.0], &[0.0, 1.0, 2.0], &k, 0.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            fit_spline_1d(&[0.0, 0.5, 1.0], &[0.0, 1.0], &k, 0.1),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn ill_conditioned_system_reports_condition() {
        let x: Vec<f64> = (0..40).map(|i| i as f64 / 39.0).collect();
        let y = x.iter().map(|v| v.sin()).collect::<Vec<_>>();
        match fit_spline_1d(&x, &y, &gauss(0.5), 1e-15) {
            Err(Error::Numerical { condition, .. }) => assert!(condition > MAX_CONDITION),
            other => panic!("expected numerical error, got {other:?}"),
        }
    }

    #[test]
    fn influence_rows_sum_to_one() {
        let x = [0.05, 0.2, 0.33, 0.6, 0.71, 0.9];
        for &lambda in &[1e-4, 1e-2, 1.0] {
            let a = influence_matrix(&x, &gauss(0.3), lambda).unwrap();
            for i in 0..x.len() {
                assert_abs_diff_eq!(a.row(i).sum(), 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn influence_matches_fitted_values() {
        let x = [0.0, 0.15, 0.4, 0.55, 0.8, 1.0];
        let y = [0.3, -0.2, 0.9, 0.1, 0.4, 1.3];
        let k = gauss(0.4);
        let fit = fit_spline_1d(&x, &y, &k, 1e-3).unwrap();
        let a = influence_matrix(&x, &k, 1e-3).unwrap();
        let fitted = &a * DVector::from_column_slice(&y);
        for i in 0..x.len() {
            assert_abs_diff_eq!(fit.eval(x[i]), fitted[i], epsilon = 1e-10);
        }
        let (_, tr) = fit_spline_1d_with_trace(&x, &y, &k, 1e-3).unwrap();
        assert_abs_diff_eq!(tr, a.trace(), epsilon = 1e-10);
    }

    #[test]
    fn influence_approaches_affine_projector() {
        let x = [0.1, 0.25, 0.3, 0.62, 0.8];
        let a = influence_matrix(&x, &gauss(0.5), 1e8).unwrap();
        let t = basis_1d(&x);
        let tt = (t.transpose() * &t).try_inverse().unwrap();
        let h = &t * tt * t.transpose();
        assert!((a - h).abs().max() < 1e-4);
    }

    #[test]
    fn planar_identity_and_translation() {
        let src = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.3, 0.6]];
        let k = gauss(0.3);
        let fit = fit_spline_2d(&src, &src, &k, 0.01).unwrap();
        assert_abs_diff_eq!(fit.affine[0][0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.affine[1][1], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.affine[0][1], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.offset[0], 0.0, epsilon = 1e-9);
        assert!(fit.beta1.iter().chain(&fit.beta2).all(|b| b.abs() < 1e-9));
        let q = fit.eval([0.42, 0.17]);
        assert_abs_diff_eq!(q[0], 0.42, epsilon = 1e-9);
        assert_abs_diff_eq!(q[1], 0.17, epsilon = 1e-9);

        let c = [0.25, -0.5];
        let tgt: Vec<_> = src.iter().map(|p| [p[0] + c[0], p[1] + c[1]]).collect();
        let fit = fit_spline_2d(&src, &tgt, &k, 0.01).unwrap();
        assert_abs_diff_eq!(fit.offset[0], c[0], epsilon = 1e-9);
        assert_abs_diff_eq!(fit.offset[1], c[1], epsilon = 1e-9);
        assert!(fit.beta1.iter().chain(&fit.beta2).all(|b| b.abs() < 1e-9));
    }

    #[test]
    fn planar_interpolates_at_small_lambda() {
        let src = [
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [1.0, 1.0],
            [0.3, 0.6],
            [0.7, 0.2],
        ];
        let tgt = [
            [0.0, 0.1],
            [1.1, 0.0],
            [0.0, 0.9],
            [1.0, 1.0],
            [0.5, 0.5],
            [0.6, 0.3],
        ];
        let fit = fit_spline_2d(&src, &tgt, &gauss(0.3), 1e-8).unwrap();
        for (s, t) in src.iter().zip(&tgt) {
            let f = fit.eval(*s);
            assert!((f[0] - t[0]).abs() < 1e-4 && (f[1] - t[1]).abs() < 1e-4);
        }
    }

    #[test]
    fn planar_rejects_collinear() {
        let src = [[0.0, 0.0], [0.5, 0.5], [1.0, 1.0], [2.0, 2.0]];
        assert!(matches!(
            fit_spline_2d(&src, &src, &gauss(0.3), 0.1),
            Err(Error::DegenerateDesign(_))
        ));
        let dup = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        assert!(matches!(
            fit_spline_2d(&dup, &dup, &gauss(0.3), 0.1),
            Err(Error::DegenerateDesign(_))
        ));
        assert!(matches!(
            fit_spline_2d(&src[..3], &src[..3], &gauss(0.3), 0.1),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn affine_only_planar_is_linear() {
        let fit = VectorSplineFit2D {
            affine: [[2.0, 0.5], [-1.0, 1.5]],
            offset: [0.1, 0.2],
            beta1: vec![0.0; 2],
            beta2: vec![0.0; 2],
            design: vec![[0.0, 0.0], [1.0, 1.0]],
            lambda: 1.0,
            kernel: gauss(1.0),
        };
        let (p, q, s) = ([0.3, 0.7], [-0.2, 0.4], 2.5);
        let lhs = fit.eval([s * p[0] + q[0], s * p[1] + q[1]]);
        let fp = fit.eval(p);
        let fq = fit.eval(q);
        let f0 = fit.eval([0.0, 0.0]);
        for c in 0..2 {
            assert_abs_diff_eq!(lhs[c], s * (fp[c] - f0[c]) + fq[c], epsilon = 1e-12);
        }
    }
}
