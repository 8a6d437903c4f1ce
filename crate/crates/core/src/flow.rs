//! Time-dependent vector fields fitted node by node, and their Euler flows.
//!
//! At node `t_k = k / T` the velocity is the smoothing spline of the data
//! `(t_k y_i + (1 - t_k) x_i, y_i - x_i)`; the per-node problems are independent,
//! so the field that minimises the time-integrated energy is assembled from
//! per-node solves. The flow is then
//! `phi_{k+1} = phi_k + v_{t_k}(phi_k) / T` starting from the identity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::spline::{
    find_coincident, find_coincident_2d, fit_spline_1d_with_trace, PenalizedSystem, SplineFit,
    VectorSplineFit2D,
};

pub const DEFAULT_STEPS: usize = 30;

/// Flow values beyond this multiple of the input spread count as divergence.
const DIVERGENCE_FACTOR: f64 = 1e6;

/// A point the Euler scheme can move.
pub trait FlowPoint: Copy + Send + Sync {
    fn add_scaled(self, scale: f64, v: Self) -> Self;
    fn lerp(self, other: Self, w: f64) -> Self {
        self.add_scaled(w, other.add_scaled(-1.0, self))
    }
    fn max_abs(self) -> f64;
    fn dist(self, other: Self) -> f64;
}

impl FlowPoint for f64 {
    fn add_scaled(self, scale: f64, v: Self) -> Self {
        self + scale * v
    }
    fn max_abs(self) -> f64 {
        self.abs()
    }
    fn dist(self, other: Self) -> f64 {
        (self - other).abs()
    }
}

impl FlowPoint for [f64; 2] {
    fn add_scaled(self, scale: f64, v: Self) -> Self {
        [self[0] + scale * v[0], self[1] + scale * v[1]]
    }
    fn max_abs(self) -> f64 {
        self[0].abs().max(self[1].abs())
    }
    fn dist(self, other: Self) -> f64 {
        (self[0] - other[0]).hypot(self[1] - other[1])
    }
}

/// One node of a time-dependent field.
pub trait VelocityField: Send + Sync {
    type Point: FlowPoint;
    fn velocity(&self, p: Self::Point) -> Self::Point;
    /// Affine-plus-RKHS norm used by the monotonicity guard.
    fn field_norm(&self) -> f64;
}

impl VelocityField for SplineFit {
    type Point = f64;
    fn velocity(&self, p: f64) -> f64 {
        self.eval(p)
    }
    fn field_norm(&self) -> f64 {
        self.norm()
    }
}

impl VelocityField for VectorSplineFit2D {
    type Point = [f64; 2];
    fn velocity(&self, p: [f64; 2]) -> [f64; 2] {
        self.eval(p)
    }
    fn field_norm(&self) -> f64 {
        self.norm()
    }
}

/// A node whose fitting time was shifted to avoid coincident transported points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nudge {
    pub step: usize,
    pub nominal: f64,
    pub fitted_at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeVectorField<S> {
    pub steps: Vec<S>,
    /// Times at which each node was actually fitted (nominal `k/T` unless nudged).
    pub fit_times: Vec<f64>,
    /// `Tr(A_{lambda,t_k})` for each node.
    pub traces: Vec<f64>,
    pub nudges: Vec<Nudge>,
    pub lambda: f64,
    pub kernel: Kernel,
}

impl<S> TimeVectorField<S> {
    /// Number of Euler steps `T`.
    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }
}

fn check_steps(steps: usize) -> Result<()> {
    if steps < 2 {
        return Err(Error::Config(format!(
            "need at least 2 time steps, got {steps}"
        )));
    }
    Ok(())
}

/// Picks the fitting time for node `k`, nudging by `1/(10T)` on a collision.
fn resolve_node<P>(
    k: usize,
    steps: usize,
    transport: impl Fn(f64) -> Vec<P>,
    collides: impl Fn(&[P]) -> bool,
) -> Result<(f64, Vec<P>, Option<Nudge>)> {
    let nominal = k as f64 / steps as f64;
    let points = transport(nominal);
    if !collides(&points) {
        return Ok((nominal, points, None));
    }
    let nudged = nominal + 1.0 / (10.0 * steps as f64);
    let points = transport(nudged);
    if collides(&points) {
        return Err(Error::DegenerateDesign(format!(
            "transported points collide at t = {nominal} and at the nudged time {nudged}"
        )));
    }
    Ok((
        nudged,
        points,
        Some(Nudge {
            step: k,
            nominal,
            fitted_at: nudged,
        }),
    ))
}

fn assemble<S>(
    fitted: Vec<(S, f64, f64, Option<Nudge>)>,
    lambda: f64,
    kernel: Kernel,
) -> TimeVectorField<S> {
    let mut field = TimeVectorField {
        steps: Vec::with_capacity(fitted.len()),
        fit_times: Vec::with_capacity(fitted.len()),
        traces: Vec::with_capacity(fitted.len()),
        nudges: Vec::new(),
        lambda,
        kernel,
    };
    for (fit, t, trace, nudge) in fitted {
        field.steps.push(fit);
        field.fit_times.push(t);
        field.traces.push(trace);
        field.nudges.extend(nudge);
    }
    field
}

/// Fits the 1D field from data `(x_i, y_i)` with `steps` Euler nodes.
pub fn fit_time_field(
    x: &[f64],
    y: &[f64],
    kernel: &Kernel,
    lambda: f64,
    steps: usize,
) -> Result<TimeVectorField<SplineFit>> {
    check_steps(steps)?;
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
    let displacement: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - a).collect();
    let fitted = (0..steps)
        .into_par_iter()
        .map(|k| {
            let (t, design, nudge) = resolve_node(
                k,
                steps,
                |t| {
                    x.iter()
                        .zip(y)
                        .map(|(a, b)| t * b + (1.0 - t) * a)
                        .collect()
                },
                |p: &[f64]| find_coincident(p).is_some(),
            )?;
            let (fit, trace) = fit_spline_1d_with_trace(&design, &displacement, kernel, lambda)?;
            Ok((fit, t, trace, nudge))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(fitted, lambda, *kernel))
}

/// Planar analogue of [`fit_time_field`] on landmark pairs.
pub fn fit_time_field_2d(
    sources: &[[f64; 2]],
    targets: &[[f64; 2]],
    kernel: &Kernel,
    lambda: f64,
    steps: usize,
) -> Result<TimeVectorField<VectorSplineFit2D>> {
    check_steps(steps)?;
    if sources.len() != targets.len() {
        return Err(Error::Input(format!(
            "{} sources but {} targets",
            sources.len(),
            targets.len()
        )));
    }
    let displacement: Vec<[f64; 2]> = sources
        .iter()
        .zip(targets)
        .map(|(s, t)| [t[0] - s[0], t[1] - s[1]])
        .collect();
    let fitted = (0..steps)
        .into_par_iter()
        .map(|k| {
            let (t, design, nudge) = resolve_node(
                k,
                steps,
                |t| {
                    sources
                        .iter()
                        .zip(targets)
                        .map(|(s, g)| s.lerp(*g, t))
                        .collect()
                },
                |p: &[[f64; 2]]| find_coincident_2d(p).is_some(),
            )?;
            let fit = crate::spline::fit_spline_2d(&design, &displacement, kernel, lambda)?;
            let trace = planar_trace(&design, kernel, lambda)?;
            Ok((fit, t, trace, nudge))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(fitted, lambda, *kernel))
}

fn planar_trace(design: &[[f64; 2]], kernel: &Kernel, lambda: f64) -> Result<f64> {
    let basis =
        nalgebra::DMatrix::from_fn(
            design.len(),
            3,
            |i, j| {
                if j == 0 {
                    1.0
                } else {
                    design[i][j - 1]
                }
            },
        );
    let gram = crate::kernel::gram_matrix_2d(kernel, design);
    Ok(PenalizedSystem::new(gram, &basis, lambda)?.influence_trace())
}

fn divergence_limit<P: FlowPoint>(points: &[P]) -> f64 {
    // distance to the first point is within a factor 2 of the batch diameter
    let spread = points
        .first()
        .map(|&p0| points.iter().fold(0.0f64, |m, q| m.max(p0.dist(*q))))
        .unwrap_or(0.0);
    let scale = if spread > 0.0 {
        spread
    } else {
        points.iter().fold(1.0f64, |m, p| m.max(p.max_abs()))
    };
    DIVERGENCE_FACTOR * scale
}

fn check_bounds<P: FlowPoint>(p: P, limit: f64, step: usize) -> Result<P> {
    let a = p.max_abs();
    if a.is_finite() && a <= limit {
        Ok(p)
    } else {
        Err(Error::Divergence { step })
    }
}

impl<S: VelocityField> TimeVectorField<S> {
    fn map_points(
        &self,
        points: &[S::Point],
        one: impl Fn(S::Point, f64) -> Result<S::Point> + Sync,
    ) -> Result<Vec<S::Point>> {
        let limit = divergence_limit(points);
        let results: Vec<Result<S::Point>> = points.par_iter().map(|&p| one(p, limit)).collect();
        results.into_iter().collect()
    }

    /// `phi_1(x)` by `T` explicit Euler steps from the identity.
    pub fn integrate_forward(&self, x0: &[S::Point]) -> Result<Vec<S::Point>> {
        let h = 1.0 / self.num_steps() as f64;
        self.map_points(x0, |mut p, limit| {
            for (k, step) in self.steps.iter().enumerate() {
                p = check_bounds(p.add_scaled(h, step.velocity(p)), limit, k)?;
            }
            Ok(p)
        })
    }

    /// `phi_1^{-1}(y)`: the forward steps undone in reverse order, each by one
    /// explicit Euler step of the negated node field.
    pub fn integrate_inverse(&self, y0: &[S::Point]) -> Result<Vec<S::Point>> {
        let h = 1.0 / self.num_steps() as f64;
        self.map_points(y0, |mut p, limit| {
            for (k, step) in self.steps.iter().enumerate().rev() {
                p = check_bounds(p.add_scaled(-h, step.velocity(p)), limit, k)?;
            }
            Ok(p)
        })
    }

    /// Fine Euler integration of the same nodes, interpolating the field linearly
    /// in time between consecutive nodes (held constant after the last node).
    pub fn integrate_reference(&self, x0: &[S::Point], substeps: usize) -> Result<Vec<S::Point>> {
        let substeps = substeps.max(1);
        let steps = self.num_steps();
        let h = 1.0 / (steps * substeps) as f64;
        self.map_points(x0, |mut p, limit| {
            for k in 0..steps {
                let next = self.steps.get(k + 1);
                for s in 0..substeps {
                    let w = s as f64 / substeps as f64;
                    let v0 = self.steps[k].velocity(p);
                    let v = match next {
                        Some(n) => v0.lerp(n.velocity(p), w),
                        None => v0,
                    };
                    p = check_bounds(p.add_scaled(h, v), limit, k)?;
                }
            }
            Ok(p)
        })
    }

    /// `max_k |v_{t_k}|`, compared against `T` by the monotonicity guard.
    pub fn sup_norm(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.field_norm())
            .fold(0.0, f64::max)
    }

    pub fn guard_holds(&self) -> bool {
        self.sup_norm() < self.num_steps() as f64
    }
}

pub fn integrate_forward<S: VelocityField>(
    field: &TimeVectorField<S>,
    x0: &[S::Point],
) -> Result<Vec<S::Point>> {
    field.integrate_forward(x0)
}

pub fn integrate_inverse<S: VelocityField>(
    field: &TimeVectorField<S>,
    y0: &[S::Point],
) -> Result<Vec<S::Point>> {
    field.integrate_inverse(y0)
}

pub fn field_sup_norm<S: VelocityField>(field: &TimeVectorField<S>) -> f64 {
    field.sup_norm()
}

impl TimeVectorField<SplineFit> {
    /// Time-averaged energy `mean_k [ (1/n) sum (y_i - x_i - v_k(X_i^k))^2 + lambda |h_k|^2 ]`
    /// on the data the field was fitted to.
    pub fn energy(&self, x: &[f64], y: &[f64]) -> f64 {
        let total: f64 = self.step_energies(x, y).iter().sum();
        total / self.num_steps() as f64
    }

    pub fn step_energies(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let displacement: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - a).collect();
        self.steps
            .iter()
            .map(|s| s.objective(&s.design, &displacement))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Inverse,
}

/// A fitted field together with the direction in which it is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMap<S> {
    pub field: TimeVectorField<S>,
    pub direction: Direction,
}

impl<S: VelocityField> FlowMap<S> {
    pub fn forward(field: TimeVectorField<S>) -> Self {
        Self {
            field,
            direction: Direction::Forward,
        }
    }

    pub fn eval(&self, points: &[S::Point]) -> Result<Vec<S::Point>> {
        match self.direction {
            Direction::Forward => self.field.integrate_forward(points),
            Direction::Inverse => self.field.integrate_inverse(points),
        }
    }

    /// The same field applied in the opposite direction.
    pub fn inverse(&self) -> Self
    where
        S: Clone,
    {
        Self {
            field: self.field.clone(),
            direction: match self.direction {
                Direction::Forward => Direction::Inverse,
                Direction::Inverse => Direction::Forward,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// Smallest consecutive difference of the mapped grid (NaN if the flow diverged).
    pub min_difference: f64,
    pub strictly_increasing: bool,
    pub diverged: bool,
}

/// Pushes an increasing grid through the forward flow and checks strict increase.
pub fn monotonicity_audit(
    field: &TimeVectorField<SplineFit>,
    grid: &[f64],
) -> Result<MonotonicityReport> {
    if grid.len() < 2 {
        return Err(Error::Input("audit grid needs at least 2 points".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input(
            "audit grid must be strictly increasing".into(),
        ));
    }
    Ok(match field.integrate_forward(grid) {
        Ok(out) => audit_values(&out),
        Err(_) => MonotonicityReport {
            min_difference: f64::NAN,
            strictly_increasing: false,
            diverged: true,
        },
    })
}

pub(crate) fn audit_values(values: &[f64]) -> MonotonicityReport {
    let min_difference = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    MonotonicityReport {
        min_difference,
        strictly_increasing: min_difference > 0.0,
        diverged: false,
    }
}
