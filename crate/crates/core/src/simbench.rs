//! Monte Carlo comparison of the flow-based monotone estimator against the
//! kernel-inversion baseline on three monotone test functions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dette::{cv_select_hd, default_hd_grid, prefit_grid, BandwidthPolicy, DetteEstimate};
use crate::error::{Error, Result};
use crate::flow::{audit_values, DEFAULT_STEPS};
use crate::kernel::Kernel;
use crate::monotone::{local_linear, monotonize_observed, rule_bandwidth, Dataset, LambdaPolicy};

/// Upper bound on step doubling after a guard or audit failure.
pub const MAX_STEPS: usize = 960;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestFunction {
    M1,
    M2,
    M3,
}

impl TestFunction {
    pub const ALL: [TestFunction; 3] = [TestFunction::M1, TestFunction::M2, TestFunction::M3];

    pub fn eval(self, x: f64) -> f64 {
        match self {
            // logistic "continuous jump"
            TestFunction::M1 => {
                let e = (20.0 * (x - 0.5)).exp();
                if e.is_infinite() {
                    1.0
                } else {
                    e / (1.0 + e)
                }
            }
            TestFunction::M2 => 0.5 * (2.0 * x - 1.0).powi(3) + 0.5,
            TestFunction::M3 => x * x,
        }
    }
}

impl FromStr for TestFunction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m1" => Ok(TestFunction::M1),
            "m2" => Ok(TestFunction::M2),
            "m3" => Ok(TestFunction::M3),
            other => Err(Error::Config(format!("unknown test function '{other}'"))),
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestFunction::M1 => "m1",
            TestFunction::M2 => "m2",
            TestFunction::M3 => "m3",
        })
    }
}

pub fn test_function(name: &str, x: f64) -> Result<f64> {
    Ok(name.parse::<TestFunction>()?.eval(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Homeospline,
    Dette,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Homeospline => "homeospline",
            Estimator::Dette => "dette",
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homeospline" => Ok(Estimator::Homeospline),
            "dette" => Ok(Estimator::Dette),
            other => Err(Error::Config(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub function: TestFunction,
    pub n: usize,
    pub snr: f64,
    pub runs: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    pub steps: usize,
    /// `None` selects a Gaussian of width 0.2 times the design range.
    pub kernel: Option<Kernel>,
    pub lambda: LambdaPolicy,
    pub hd: BandwidthPolicy,
    pub grid_size: usize,
}

impl SimConfig {
    pub fn new(function: TestFunction) -> Self {
        Self {
            function,
            n: 50,
            snr: 3.0,
            runs: 100,
            seed: 42,
            estimators: vec![Estimator::Homeospline, Estimator::Dette],
            steps: DEFAULT_STEPS,
            kernel: None,
            lambda: LambdaPolicy::Gcv,
            hd: BandwidthPolicy::Cv,
            grid_size: crate::dette::DEFAULT_GRID_SIZE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.n < 3 {
            return Err(Error::Config(format!(
                "n must be at least 3, got {}",
                self.n
            )));
        }
        if !(self.snr.is_finite() && self.snr > 0.0) {
            return Err(Error::Config(format!(
                "snr must be positive, got {}",
                self.snr
            )));
        }
        if self.steps < 2 {
            return Err(Error::Config(format!(
                "steps must be at least 2, got {}",
                self.steps
            )));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators selected".into()));
        }
        if let Some(k) = &self.kernel {
            k.validate()?;
        }
        if let BandwidthPolicy::Fixed(h) = self.hd {
            if !(h > 0.0) {
                return Err(Error::Config(format!("h_d must be positive, got {h}")));
            }
        }
        if let LambdaPolicy::Fixed(l) = self.lambda {
            if !(l > 0.0) {
                return Err(Error::Config(format!("lambda must be positive, got {l}")));
            }
        }
        Ok(())
    }

    pub fn design(&self) -> Vec<f64> {
        (1..=self.n).map(|i| i as f64 / self.n as f64).collect()
    }

    /// Sample standard deviation (divisor `n - 1`) of `f(i/n)`.
    pub fn signal_sd(&self) -> f64 {
        let f: Vec<f64> = self
            .design()
            .iter()
            .map(|&x| self.function.eval(x))
            .collect();
        sample_sd(&f)
    }

    pub fn noise_sd(&self) -> f64 {
        self.signal_sd() / self.snr
    }
}

pub fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Random stream for one run: ChaCha20 keyed by `seed`, stream number `run_index`.
pub fn run_rng(seed: u64, run_index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    rng
}

/// Standard normal by inversion of the CDF at `(k + 1/2) / 2^53`, `k` the top 53 bits of one draw.
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    let k = rng.next_u64() >> 11;
    let u = (k as f64 + 0.5) / (1u64 << 53) as f64;
    Normal::standard().inverse_cdf(u)
}

/// `x_i = i/n`, `y_i = f(x_i) + sigma eps_i`, `sigma = sd(f(x)) / snr`.
pub fn gen_dataset(config: &SimConfig, run_index: usize) -> Result<Dataset> {
    let x = config.design();
    let sigma = config.noise_sd();
    let mut rng = run_rng(config.seed, run_index as u64);
    let y = x
        .iter()
        .map(|&xi| config.function.eval(xi) + sigma * standard_normal(&mut rng))
        .collect();
    Dataset::new(x, y)
}

/// `2n` equidistant points on `[0, 1]`, endpoints included.
pub fn evaluation_grid(n: usize) -> Vec<f64> {
    let m = 2 * n;
    (0..m).map(|j| j as f64 / (m - 1) as f64).collect()
}

/// Trapezoidal integral of the squared error over the grid.
pub fn mise(estimate: &[f64], truth: &[f64], grid: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() || truth.len() != grid.len() {
        return Err(Error::Input(format!(
            "length mismatch: {} estimates, {} truths, {} grid points",
            estimate.len(),
            truth.len(),
            grid.len()
        )));
    }
    let sq: Vec<f64> = estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - t).powi(2))
        .collect();
    Ok(grid
        .windows(2)
        .zip(sq.windows(2))
        .map(|(g, s)| 0.5 * (g[1] - g[0]) * (s[0] + s[1]))
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeoRun {
    pub ise: f64,
    pub lambda: f64,
    pub lambda_index: usize,
    pub steps: usize,
    pub sup_norm: f64,
    pub guard_holds: bool,
    /// Step counts at which the guard or the audit failed before the final fit.
    pub guard_violations: Vec<usize>,
    pub monotone: bool,
    pub min_difference: f64,
    pub trace_range: [f64; 2],
    pub nudges: usize,
    #[serde(skip)]
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetteRun {
    pub ise: f64,
    pub h_d: f64,
    pub h_r: f64,
    pub nondecreasing: bool,
    #[serde(skip)]
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub homeospline: Option<HomeoRun>,
    pub dette: Option<DetteRun>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub guard_violations: usize,
    pub runs_with_doubled_steps: usize,
    pub nudges: usize,
    pub non_monotone_reported: usize,
    pub non_monotone_unreported: usize,
    pub trace_min: f64,
    pub trace_max: f64,
    pub failed_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub format: String,
    pub config: SimConfig,
    pub mise: BTreeMap<String, f64>,
    pub runs: Vec<RunRecord>,
    pub grid: Vec<f64>,
    pub mse_curve: BTreeMap<String, Vec<f64>>,
    pub diagnostics: Diagnostics,
}

fn run_homeo(
    config: &SimConfig,
    data: &Dataset,
    f_hat: &[f64],
    grid: &[f64],
    truth: &[f64],
) -> Result<HomeoRun> {
    let kernel = match config.kernel {
        Some(k) => k,
        None => Kernel::default_for(&data.x)?,
    };
    let mut steps = config.steps;
    let mut violations = Vec::new();
    loop {
        let est = monotonize_observed(&data.x, f_hat, &data.y, &kernel, config.lambda, steps)?;
        let values = est.eval(grid)?;
        let audit = audit_values(&values);
        let ok = est.guard.holds && audit.strictly_increasing;
        if ok || steps * 2 > MAX_STEPS {
            let lambda_index = est
                .gcv_curve
                .iter()
                .position(|p| p.lambda == est.lambda_selected)
                .unwrap_or(0);
            return Ok(HomeoRun {
                ise: mise(&values, truth, grid)?,
                lambda: est.lambda_selected,
                lambda_index,
                steps,
                sup_norm: est.guard.sup_norm,
                guard_holds: est.guard.holds,
                guard_violations: violations,
                monotone: audit.strictly_increasing,
                min_difference: audit.min_difference,
                trace_range: est.trace_range,
                nudges: est.flow.field.nudges.len(),
                values,
            });
        }
        violations.push(steps);
        steps *= 2;
    }
}

fn run_dette(
    config: &SimConfig,
    data: &Dataset,
    prefit: &[f64],
    h_r: f64,
    grid: &[f64],
    truth: &[f64],
) -> Result<DetteRun> {
    let h_d = match config.hd {
        BandwidthPolicy::Fixed(h) => h,
        BandwidthPolicy::Rule => h_r.powi(3),
        BandwidthPolicy::Cv => {
            cv_select_hd(
                &data.x,
                &data.y,
                h_r,
                &default_hd_grid(h_r),
                config.grid_size,
            )?
            .h_d
        }
    };
    let est = DetteEstimate::from_prefit(prefit, h_d, h_r)?;
    let values = est.eval(grid);
    Ok(DetteRun {
        ise: mise(&values, truth, grid)?,
        h_d,
        h_r,
        nondecreasing: values.windows(2).all(|w| w[1] >= w[0]),
        values,
    })
}

fn run_once(config: &SimConfig, run: usize, grid: &[f64], truth: &[f64]) -> Result<RunRecord> {
    let data = gen_dataset(config, run)?;
    // the same local linear pre-fit feeds both estimators
    let h_r = rule_bandwidth(&data.y)?.bandwidth;
    let mut record = RunRecord {
        run,
        homeospline: None,
        dette: None,
        errors: Vec::new(),
    };
    for est in &config.estimators {
        match est {
            Estimator::Homeospline => {
                let outcome = local_linear(&data.x, &data.y, h_r, &data.x)
                    .and_then(|f| run_homeo(config, &data, &f.values, grid, truth));
                match outcome {
                    Ok(r) => record.homeospline = Some(r),
                    Err(e) => record.errors.push(format!("homeospline: {e}")),
                }
            }
            Estimator::Dette => {
                let outcome = prefit_grid(&data.x, &data.y, h_r, config.grid_size)
                    .and_then(|p| run_dette(config, &data, &p, h_r, grid, truth));
                match outcome {
                    Ok(r) => record.dette = Some(r),
                    Err(e) => record.errors.push(format!("dette: {e}")),
                }
            }
        }
    }
    if record.homeospline.is_none() && record.dette.is_none() {
        return Err(Error::Numerical {
            context: format!(
                "run {run}: every estimator failed ({})",
                record.errors.join("; ")
            ),
            condition: f64::NAN,
        });
    }
    Ok(record)
}

pub fn run_monte_carlo(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let grid = evaluation_grid(config.n);
    let truth: Vec<f64> = grid.iter().map(|&g| config.function.eval(g)).collect();
    let runs: Vec<RunRecord> = (0..config.runs)
        .into_par_iter()
        .map(|r| run_once(config, r, &grid, &truth))
        .collect::<Result<_>>()?;

    let mut mise_table = BTreeMap::new();
    let mut curves = BTreeMap::new();
    for est in &config.estimators {
        let per_run: Vec<(f64, &[f64])> = runs
            .iter()
            .filter_map(|r| match est {
                Estimator::Homeospline => {
                    r.homeospline.as_ref().map(|h| (h.ise, h.values.as_slice()))
                }
                Estimator::Dette => r.dette.as_ref().map(|d| (d.ise, d.values.as_slice())),
            })
            .collect();
        if per_run.is_empty() {
            continue;
        }
        let m = per_run.len() as f64;
        mise_table.insert(
            est.name().to_string(),
            per_run.iter().map(|(ise, _)| ise).sum::<f64>() / m,
        );
        let curve: Vec<f64> = (0..grid.len())
            .map(|j| {
                per_run
                    .iter()
                    .map(|(_, v)| (v[j] - truth[j]).powi(2))
                    .sum::<f64>()
                    / m
            })
            .collect();
        curves.insert(est.name().to_string(), curve);
    }

    let homeo: Vec<&HomeoRun> = runs.iter().filter_map(|r| r.homeospline.as_ref()).collect();
    let diagnostics = Diagnostics {
        guard_violations: homeo.iter().map(|h| h.guard_violations.len()).sum(),
        runs_with_doubled_steps: homeo
            .iter()
            .filter(|h| !h.guard_violations.is_empty())
            .count(),
        nudges: homeo.iter().map(|h| h.nudges).sum(),
        non_monotone_reported: homeo
            .iter()
            .filter(|h| !h.monotone && !h.guard_holds)
            .count(),
        non_monotone_unreported: homeo
            .iter()
            .filter(|h| !h.monotone && h.guard_holds)
            .count(),
        trace_min: homeo
            .iter()
            .map(|h| h.trace_range[0])
            .fold(f64::INFINITY, f64::min),
        trace_max: homeo
            .iter()
            .map(|h| h.trace_range[1])
            .fold(f64::NEG_INFINITY, f64::max),
        failed_runs: runs.iter().filter(|r| !r.errors.is_empty()).count(),
    };
    Ok(SimReport {
        format: crate::io::REPORT_FORMAT.to_string(),
        config: config.clone(),
        mise: mise_table,
        runs,
        grid,
        mse_curve: curves,
        diagnostics,
    })
}
