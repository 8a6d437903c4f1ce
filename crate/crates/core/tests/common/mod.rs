//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use homeospline::Kernel;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Minimum of `(1/n)|B theta - y|^2 + lambda theta' P theta` over the full
/// coefficient vector, with `B = [basis | G]` and `P = diag(0, G)`, solved densely by SVD.
fn brute_force_min(
    basis: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    ys: &[DVector<f64>],
    lambda: f64,
) -> f64 {
    let n = gram.nrows();
    let p = basis.ncols();
    let mut b = DMatrix::zeros(n, p + n);
    b.view_mut((0, 0), (n, p)).copy_from(basis);
    b.view_mut((0, p), (n, n)).copy_from(gram);
    let mut pen = DMatrix::zeros(p + n, p + n);
    pen.view_mut((p, p), (n, n)).copy_from(gram);
    let lhs = b.transpose() * &b + (n as f64 * lambda) * &pen;
    let svd = lhs.svd(true, true);
    ys.iter()
        .map(|y| {
            let theta = svd.solve(&(b.transpose() * y), 1e-300).expect("svd solve");
            let r = &b * &theta - y;
            r.norm_squared() / n as f64 + lambda * (theta.transpose() * &pen * &theta)[0]
        })
        .sum()
}

pub fn brute_force_objective_1d(x: &[f64], y: &[f64], kernel: &Kernel, lambda: f64) -> f64 {
    let n = x.len();
    let basis = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
    let gram = DMatrix::from_fn(n, n, |i, j| kernel.eval(x[i], x[j]));
    brute_force_min(&basis, &gram, &[DVector::from_column_slice(y)], lambda)
}

pub fn brute_force_objective_2d(
    sources: &[[f64; 2]],
    targets: &[[f64; 2]],
    kernel: &Kernel,
    lambda: f64,
) -> f64 {
    let n = sources.len();
    let basis = DMatrix::from_fn(n, 3, |i, j| if j == 0 { 1.0 } else { sources[i][j - 1] });
    let gram = DMatrix::from_fn(n, n, |i, j| kernel.eval2(sources[i], sources[j]));
    let ys = [
        DVector::from_iterator(n, targets.iter().map(|t| t[0])),
        DVector::from_iterator(n, targets.iter().map(|t| t[1])),
    ];
    brute_force_min(&basis, &gram, &ys, lambda)
}

/// Sorted design of `n` points in `[0, 1]` with no two closer than `gap`.
pub fn spread_design(rng: &mut impl Rng, n: usize, gap: f64) -> Vec<f64> {
    loop {
        let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        x.sort_by(f64::total_cmp);
        if x.windows(2).all(|w| w[1] - w[0] > gap) {
            return x;
        }
    }
}

/// Planar design of `n` points in the unit square, not all on one line.
pub fn spread_design_2d(rng: &mut impl Rng, n: usize, gap: f64) -> Vec<[f64; 2]> {
    loop {
        let p: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let separated =
            (0..n).all(|i| (0..i).all(|j| (p[i][0] - p[j][0]).hypot(p[i][1] - p[j][1]) > gap));
        let area = (1..n - 1).any(|k| {
            let (a, b, c) = (p[0], p[k], p[k + 1]);
            ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs() > 0.05
        });
        if separated && area {
            return p;
        }
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

/// `(1/pi) int_0^inf cos(w r) / (1 + w^{2m}) dw` by composite Simpson on `[0, 400]`.
pub fn sobolev_fourier(m: u32, r: f64) -> f64 {
    let upper = 400.0;
    let cells = 400_000;
    let h = upper / cells as f64;
    let f = |w: f64| (w * r).cos() / (1.0 + w.powi(2 * m as i32));
    let mut acc = f(0.0) + f(upper);
    for i in 1..cells {
        let w = i as f64 * h;
        acc += if i % 2 == 1 { 4.0 * f(w) } else { 2.0 * f(w) };
    }
    acc * h / 3.0 / std::f64::consts::PI
}

/// Reproducing kernel of `<f, g> = int f g + f^(m) g^(m)` discretised on `[-half, half]`
/// with spacing `h`: the Gram operator is `A = h (I + D' D)` with `D` the scaled
/// `m`-th forward difference, and `K(0, r)` is the centre column of `A^-1` read at `r`.
pub fn sobolev_discrete(m: usize, half: f64, h: f64, radii: &[f64]) -> Vec<f64> {
    let n = (2.0 * half / h).round() as usize + 1;
    let centre = n / 2;
    let mut binom = vec![1.0f64];
    for _ in 0..m {
        let mut next = vec![1.0; binom.len() + 1];
        for i in 1..binom.len() {
            next[i] = binom[i - 1] + binom[i];
        }
        binom = next;
    }
    let scale = h.powi(-(m as i32));
    let mut d = DMatrix::zeros(n - m, n);
    for r in 0..n - m {
        for (j, b) in binom.iter().enumerate() {
            let sign = if (m - j) % 2 == 0 { 1.0 } else { -1.0 };
            d[(r, r + j)] = sign * b * scale;
        }
    }
    let a = (DMatrix::identity(n, n) + d.transpose() * &d) * h;
    let mut e = DVector::zeros(n);
    e[centre] = 1.0;
    let col = a.cholesky().expect("discrete gram is positive definite").solve(&e);
    radii.iter().map(|r| col[centre + (r / h).round() as usize]).collect()
}
