//! Radial reproducing kernels and Gram-matrix assembly.
//!
//! Two families are supported: the Gaussian kernel `exp(-r^2 / 2 sigma^2)` and
//! the reproducing kernel of the Sobolev space `H^m(R)` normed by
//! `int |h|^2 + int |h^(m)|^2`. Both are radial, `K(x, y) = k(|x - y|)`, so the
//! same profile is reused on Euclidean distances in the plane.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the imaginary part left over by the complex Sobolev sum.
const SOBOLEV_IMAG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "lowercase")]
pub enum Kernel {
    Gaussian { sigma: f64 },
    Sobolev { m: u32 },
}

impl Kernel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        let k = Kernel::Gaussian { sigma };
        k.validate()?;
        Ok(k)
    }

    pub fn sobolev(m: u32) -> Result<Self> {
        let k = Kernel::Sobolev { m };
        k.validate()?;
        Ok(k)
    }

    /// Gaussian kernel whose width is 0.2 times the spread of `points`.
    pub fn default_for(points: &[f64]) -> Result<Self> {
        let (lo, hi) = points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
                (lo.min(p), hi.max(p))
            });
        let range = hi - lo;
        if !range.is_finite() || range <= 0.0 {
            return Err(Error::DegenerateDesign(
                "cannot derive a default kernel width from a zero-width design".into(),
            ));
        }
        Kernel::gaussian(0.2 * range)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Gaussian { sigma } if !(sigma.is_finite() && sigma > 0.0) => Err(
                Error::Config(format!("gaussian sigma must be positive, got {sigma}")),
            ),
            Kernel::Sobolev { m } if m < 2 => Err(Error::Config(format!(
                "sobolev order must be at least 2, got {m}"
            ))),
            _ => Ok(()),
        }
    }

    /// Radial profile `k(r)` for `r >= 0`.
    pub fn profile(&self, r: f64) -> f64 {
        let r = r.abs();
        match *self {
            Kernel::Gaussian { sigma } => (-r * r / (2.0 * sigma * sigma)).exp(),
            Kernel::Sobolev { m } => sobolev_profile(m, r),
        }
    }

    /// `K(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.profile((x - y).abs())
    }

    /// `K(p, q) = k(|p - q|)` for planar points.
    pub fn eval2(&self, p: [f64; 2], q: [f64; 2]) -> f64 {
        self.profile((p[0] - q[0]).hypot(p[1] - q[1]))
    }

    /// Value on the diagonal, `k(0)`, which bounds `|K|` everywhere.
    pub fn diagonal(&self) -> f64 {
        self.profile(0.0)
    }
}

/// Sobolev kernel by residues of `(1/2pi) int e^{i w r} / (1 + w^{2m}) dw`.
///
/// With `theta_k = pi/(2m) + k pi/m` (the upper-half-plane roots of
/// `1 + w^{2m}`), `k_m(r) = sum_{k<m} i exp(-r e^{i(theta_k - pi/2)}) / (2m e^{i(2m-1) theta_k})`.
fn sobolev_profile(m: u32, r: f64) -> f64 {
    let two_m = 2.0 * m as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..m {
        let theta = PI / two_m + k as f64 * PI / m as f64;
        let decay = Complex64::from_polar(1.0, theta - PI / 2.0);
        let numer = (-r * decay).exp();
        let denom = two_m * Complex64::from_polar(1.0, (two_m - 1.0) * theta);
        acc += Complex64::i() * numer / denom;
    }
    debug_assert!(
        acc.im.abs() < SOBOLEV_IMAG_TOL,
        "sobolev kernel left an imaginary residue {}",
        acc.im
    );
    acc.re
}

/// `G[i, j] = K(p_i, p_j)`.
pub fn gram_matrix(kernel: &Kernel, points: &[f64]) -> DMatrix<f64> {
    let n = points.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        g[(i, i)] = kernel.diagonal();
        for j in 0..i {
            let v = kernel.eval(points[i], points[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

pub fn gram_matrix_2d(kernel: &Kernel, points: &[[f64; 2]]) -> DMatrix<f64> {
    let n = points.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        g[(i, i)] = kernel.diagonal();
        for j in 0..i {
            let v = kernel.eval2(points[i], points[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Largest `|k(0) - k(|x - y|)| / |x - y|` over the given pairs.
///
/// A radial kernel whose sections satisfy `|h(x) - h(y)| <= 2 |h|_K |k(0) - k(|x-y|)|`
/// is uniformly Lipschitz when this ratio stays bounded as pairs tighten.
pub fn lipschitz_ratio_probe(kernel: &Kernel, pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Input(
            "lipschitz probe needs at least one pair".into(),
        ));
    }
    let k0 = kernel.diagonal();
    pairs.iter().try_fold(0.0f64, |acc, &(x, y)| {
        let d = (x - y).abs();
        if d == 0.0 {
            return Err(Error::Input(format!("coincident probe pair at {x}")));
        }
        Ok(acc.max((k0 - kernel.profile(d)).abs() / d))
    })
}
