//! Monotone (1D) and diffeomorphic (2D) smoothing splines.
//!
//! A monotone or orientation-preserving map is obtained as the time-one flow of
//! a time-dependent vector field whose value at each time node is an ordinary,
//! unconstrained RKHS smoothing spline. No inequality-constrained optimisation
//! is involved: each node costs one `O(n^3)` Cholesky solve.

pub mod dette;
pub mod error;
pub mod flow;
pub mod io;
pub mod kernel;
pub mod monotone;
pub mod simbench;
pub mod spline;
pub mod warp2d;

pub mod cli;

pub use dette::{dette_estimate, dette_inverse, BandwidthPolicy, DetteEstimate};
pub use error::{Error, Result};
pub use flow::{
    field_sup_norm, fit_time_field, fit_time_field_2d, integrate_forward, integrate_inverse,
    monotonicity_audit, Direction, FlowMap, MonotonicityReport, TimeVectorField,
};
pub use kernel::{gram_matrix, lipschitz_ratio_probe, Kernel};
pub use monotone::{
    eval_estimate, gcv_score, local_linear, monotonize, rule_bandwidth, Dataset, LambdaPolicy,
    MonotoneEstimate,
};
pub use simbench::{
    gen_dataset, mise, run_monte_carlo, test_function, SimConfig, SimReport, TestFunction,
};
pub use spline::{fit_spline_1d, fit_spline_2d, influence_matrix, SplineFit, VectorSplineFit2D};
pub use warp2d::{
    deform_grid, jacobian_min, match_homeo, match_unconstrained, warp_image, LandmarkPairs,
};
