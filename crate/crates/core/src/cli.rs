//! Command-line front end.
//!
//! Every command accepts `--config FILE`: a JSON object whose keys replace the
//! corresponding flag values. Reports are JSON with sorted keys and embed the
//! effective configuration.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dette::{
    cv_select_hd, default_hd_grid, prefit_grid, BandwidthPolicy, DetteEstimate, DEFAULT_GRID_SIZE,
};
use crate::error::{Error, Result};
use crate::flow::{FlowMap, DEFAULT_STEPS};
use crate::io::{self, REPORT_FORMAT};
use crate::kernel::Kernel;
use crate::monotone::{
    gcv_scan, local_linear, log_grid, monotonize_on_grid, rule_bandwidth, select_gcv, Dataset,
    LambdaPolicy, GCV_GRID_MAX, GCV_GRID_MIN, GCV_GRID_POINTS,
};
use crate::simbench::{run_monte_carlo, Estimator, SimConfig, TestFunction};
use crate::spline::{fit_spline_1d, influence_matrix, VectorSplineFit2D};
use crate::warp2d::{
    default_kernel_2d, deform_grid, diagonal_swap_fixture, jacobian_min_default, match_homeo,
    match_unconstrained, synthetic_face, synthetic_face_landmarks, warp_image, LandmarkPairs,
    PlanarMap,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// A flag that takes either a number or a keyword such as `gcv`, `rule` or `cv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Setting {
    Value(f64),
    Keyword(String),
}

impl FromStr for Setting {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.parse::<f64>() {
            Ok(v) => Ok(Setting::Value(v)),
            Err(_) => Ok(Setting::Keyword(s.to_ascii_lowercase())),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setting::Value(v) => write!(f, "{v}"),
            Setting::Keyword(k) => f.write_str(k),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl Setting {
    fn lambda(&self) -> Result<LambdaPolicy> {
        match self {
            Setting::Value(v) => Ok(LambdaPolicy::Fixed(positive("lambda", *v)?)),
            Setting::Keyword(k) if k == "gcv" => Ok(LambdaPolicy::Gcv),
            Setting::Keyword(k) => Err(Error::Config(format!(
                "lambda must be a number or 'gcv', got '{k}'"
            ))),
        }
    }

    fn fixed_lambda(&self) -> Result<f64> {
        match self {
            Setting::Value(v) => positive("lambda", *v),
            Setting::Keyword(k) => {
                Err(Error::Config(format!("lambda must be a number, got '{k}'")))
            }
        }
    }

    fn bandwidth(&self, name: &str, allow_cv: bool) -> Result<BandwidthPolicy> {
        match self {
            Setting::Value(v) => Ok(BandwidthPolicy::Fixed(positive(name, *v)?)),
            Setting::Keyword(k) if k == "rule" => Ok(BandwidthPolicy::Rule),
            Setting::Keyword(k) if k == "cv" && allow_cv => Ok(BandwidthPolicy::Cv),
            Setting::Keyword(k) => Err(Error::Config(format!("unsupported {name} '{k}'"))),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct KernelArgs {
    /// gaussian or sobolev
    #[arg(long, default_value = "gaussian")]
    pub kernel: String,
    /// Gaussian width (default 0.2 times the design range)
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Sobolev order
    #[arg(long, default_value_t = 2)]
    pub m: u32,
}

impl KernelArgs {
    fn resolve(&self, fallback: impl FnOnce() -> Result<Kernel>) -> Result<Kernel> {
        match self.kernel.as_str() {
            "gaussian" => match self.sigma {
                Some(s) => Kernel::gaussian(s),
                None => fallback(),
            },
            "sobolev" => Kernel::sobolev(self.m),
            other => Err(Error::Config(format!("unknown kernel '{other}'"))),
        }
    }

    fn resolve_1d(&self, x: &[f64]) -> Result<Kernel> {
        self.resolve(|| Kernel::default_for(x))
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Common {
    /// JSON file whose keys override the flags
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Directory receiving the outputs
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Two-column CSV of (x, y)
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, default_value = "0.001")]
    pub lambda: Setting,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MonotonizeArgs {
    /// Two-column CSV of (x, y)
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    /// Penalty value or `gcv`
    #[arg(long, default_value = "gcv")]
    pub lambda: Setting,
    /// Euler steps T
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    /// local-linear, or none to treat y as the pre-estimate
    #[arg(long, default_value = "local-linear")]
    pub pre: String,
    /// Fit a decreasing function by reversing the x axis
    #[arg(long)]
    pub decreasing: bool,
    /// Number of equispaced output points over the design range
    #[arg(long, default_value_t = 200)]
    pub grid_points: usize,
    /// Also write the fitted time-dependent field to this file
    #[arg(long)]
    pub dump_field: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DetteArgs {
    /// Two-column CSV of (x, y)
    #[arg(long)]
    pub input: PathBuf,
    /// Pre-fit bandwidth value or `rule`
    #[arg(long, default_value = "rule")]
    pub hr: Setting,
    /// Inverse bandwidth value, `rule` (h_r^3) or `cv`
    #[arg(long, default_value = "cv")]
    pub hd: Setting,
    /// Pre-fit grid size N
    #[arg(long, visible_alias = "N", default_value_t = DEFAULT_GRID_SIZE)]
    pub grid_size: usize,
    #[arg(long, default_value_t = 200)]
    pub grid_points: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// m1, m2 or m3
    #[arg(long, default_value = "m3")]
    pub function: String,
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 3.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Comma-separated subset of homeospline,dette
    #[arg(long, value_delimiter = ',', default_value = "homeospline,dette")]
    pub estimators: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    #[arg(long, default_value = "gcv")]
    pub lambda: Setting,
    /// Inverse bandwidth of the baseline: value, `rule` or `cv`
    #[arg(long, default_value = "cv")]
    pub hd: Setting,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MatchArgs {
    /// Four-column CSV (x1, y1, x2, y2); the bundled diagonal-swap fixture when omitted
    #[arg(long)]
    pub landmarks: Option<PathBuf>,
    /// unconstrained or homeo
    #[arg(long, default_value = "homeo")]
    pub method: String,
    #[arg(long, default_value = "0.01")]
    pub lambda: Setting,
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    /// Deformed grid lines as ROWSxCOLS
    #[arg(long, default_value = "11x11")]
    pub grid: String,
    #[arg(long, default_value_t = 10)]
    pub samples_per_edge: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct WarpArgs {
    /// Binary PGM image; a synthetic face when omitted
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Four-column CSV of landmarks in normalised image coordinates (source, then target)
    #[arg(long)]
    pub landmarks: Option<PathBuf>,
    #[arg(long, default_value = "homeo")]
    pub method: String,
    #[arg(long, default_value = "0.01")]
    pub lambda: Setting,
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    /// Output size WxH (defaults to the input size)
    #[arg(long)]
    pub out_size: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GcvScanArgs {
    /// Two-column CSV of (x, y)
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    #[arg(long, default_value = "local-linear")]
    pub pre: String,
    #[arg(long, default_value_t = GCV_GRID_MIN)]
    pub grid_min: f64,
    #[arg(long, default_value_t = GCV_GRID_MAX)]
    pub grid_max: f64,
    #[arg(long, default_value_t = GCV_GRID_POINTS)]
    pub grid_points: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Unconstrained smoothing spline
    Fit(FitArgs),
    /// Monotone smoothing by homeomorphic spline
    Monotonize(MonotonizeArgs),
    /// Kernel-inversion monotone baseline
    BaselineDette(DetteArgs),
    /// Monte Carlo comparison on the test functions
    Simulate(SimulateArgs),
    /// Planar landmark matching
    Match(MatchArgs),
    /// Landmark-driven image warping
    Warp(WarpArgs),
    /// GCV score over a penalty grid
    GcvScan(GcvScanArgs),
}

#[derive(Debug, Parser)]
#[command(
    name = "homeospline",
    version,
    about = "Monotone and diffeomorphic smoothing splines"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Replaces flag values by the keys of a JSON config object. A nested
/// `"kernel": {"kernel": ..., "sigma": ...}` record is flattened.
fn apply_config<T: Serialize + DeserializeOwned>(args: T, path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(args) };
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read config {}: {e}", path.display())))?;
    let overrides: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
    let Value::Object(overrides) = overrides else {
        return Err(Error::Config("config file must hold a JSON object".into()));
    };
    let mut merged = serde_json::to_value(&args)?;
    let target = merged
        .as_object_mut()
        .expect("argument records serialize to objects");
    for (key, value) in overrides {
        match value {
            Value::Object(kernel) if key == "kernel" => {
                for (k, v) in kernel {
                    target.insert(k, v);
                }
            }
            other => {
                if !target.contains_key(&key) {
                    return Err(Error::Config(format!("unknown config key '{key}'")));
                }
                target.insert(key, other);
            }
        }
    }
    serde_json::from_value(merged)
        .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
}

fn report(args: &impl Serialize, body: Value) -> Result<Value> {
    let mut out = body;
    let obj = out.as_object_mut().expect("report bodies are objects");
    obj.insert("format".into(), json!(REPORT_FORMAT));
    obj.insert("config".into(), serde_json::to_value(args)?);
    Ok(out)
}

fn out_path(common: &Common, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&common.out_dir)?;
    Ok(common.out_dir.join(name))
}

fn check_steps(steps: usize) -> Result<()> {
    if steps < 2 {
        return Err(Error::Config(format!(
            "steps must be at least 2, got {steps}"
        )));
    }
    Ok(())
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("expected AxB with positive integers, got '{s}'"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b == 0 {
        return Err(bad());
    }
    Ok((a, b))
}

fn span(x: &[f64], points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::Config(format!(
            "grid needs at least 2 points, got {points}"
        )));
    }
    let (lo, hi) = (x[0], x[x.len() - 1]);
    Ok((0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect())
}

fn load_dataset(path: &Path, decreasing: bool) -> Result<Dataset> {
    let (x, y) = io::read_xy(path)?;
    if decreasing {
        Dataset::new(x.into_iter().map(|v| -v).collect(), y)
    } else {
        Dataset::new(x, y)
    }
}

/// `(f_hat, residual target)` for the chosen pre-estimator.
fn pre_estimate(data: &Dataset, pre: &str) -> Result<(Vec<f64>, Value)> {
    match pre {
        "local-linear" => {
            let rule = rule_bandwidth(&data.y)?;
            let ll = local_linear(&data.x, &data.y, rule.bandwidth, &data.x)?;
            let info = json!({"method": "local-linear", "bandwidth": rule, "widened": ll.widened});
            Ok((ll.values, info))
        }
        "none" => Ok((data.y.clone(), json!({"method": "none"}))),
        other => Err(Error::Config(format!("unknown pre-estimator '{other}'"))),
    }
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let args = apply_config(args.clone(), args.common.config.as_deref())?;
    let lambda = args.lambda.fixed_lambda()?;
    let data = load_dataset(&args.input, false)?;
    let kernel = args.kernel.resolve_1d(&data.x)?;
    let fit = fit_spline_1d(&data.x, &data.y, &kernel, lambda)?;
    let trace = influence_matrix(&data.x, &kernel, lambda)?.trace();
    let fitted: Vec<f64> = data.x.iter().map(|&x| fit.eval(x)).collect();
    let body = json!({
        "fit": fit,
        "kernel": kernel,
        "influence_trace": trace,
        "objective": fit.objective(&data.x, &data.y),
    });
    io::write_json(&out_path(&args.common, "fit.json")?, &report(&args, body)?)?;
    io::write_csv_file(
        &out_path(&args.common, "fitted.csv")?,
        &["x", "y", "fitted"],
        &[&data.x, &data.y, &fitted],
    )
}

fn cmd_monotonize(args: MonotonizeArgs) -> Result<()> {
    let args = apply_config(args.clone(), args.common.config.as_deref())?;
    check_steps(args.steps)?;
    let lambda = args.lambda.lambda()?;
    let data = load_dataset(&args.input, args.decreasing)?;
    let kernel = args.kernel.resolve_1d(&data.x)?;
    let (f_hat, pre_info) = pre_estimate(&data, &args.pre)?;
    let est = monotonize_on_grid(
        &data.x,
        &f_hat,
        &data.y,
        &kernel,
        lambda,
        args.steps,
        &crate::monotone::default_lambda_grid(),
    )?;
    let grid = span(&data.x, args.grid_points)?;
    let fitted = est.eval(&grid)?;
    let sign = if args.decreasing { -1.0 } else { 1.0 };
    // report in the caller's x orientation, ascending
    let mut curve: Vec<(f64, f64)> = grid
        .iter()
        .map(|g| sign * g)
        .zip(fitted.iter().copied())
        .collect();
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (gx, gy): (Vec<f64>, Vec<f64>) = curve.into_iter().unzip();
    let design: Vec<f64> = data.x.iter().map(|x| sign * x).collect();
    if let Some(path) = &args.dump_field {
        io::write_json(path, &est.flow.field)?;
    }
    let body = json!({
        "lambda_selected": est.lambda_selected,
        "gcv_curve": est.gcv_curve,
        "guard": est.guard,
        "nudges": est.flow.field.nudges,
        "trace_range": est.trace_range,
        "kernel": kernel,
        "pre_estimate": {"info": pre_info, "values": est.pre_estimate},
        "design": design,
        "fitted_at_design": est.fitted,
        "grid": gx,
        "fitted": gy,
    });
    io::write_json(
        &out_path(&args.common, "monotonize.json")?,
        &report(&args, body)?,
    )?;
    io::write_csv_file(
        &out_path(&args.common, "fitted.csv")?,
        &["x", "fitted"],
        &[&gx, &gy],
    )
}

fn cmd_dette(args: DetteArgs) -> Result<()> {
    let args = apply_config(args.clone(), args.common.config.as_deref())?;
    let data = load_dataset(&args.input, false)?;
    let h_r = match args.hr.bandwidth("h_r", false)? {
        BandwidthPolicy::Fixed(h) => h,
        _ => rule_bandwidth(&data.y)?.bandwidth,
    };
    let (h_d, cv_scores) = match args.hd.bandwidth("h_d", true)? {
        BandwidthPolicy::Fixed(h) => (h, Vec::new()),
        BandwidthPolicy::Rule => (h_r.powi(3), Vec::new()),
        BandwidthPolicy::Cv => {
            let sel = cv_select_hd(&data.x, &data.y, h_r, &default_hd_grid(h_r), args.grid_size)?;
            (sel.h_d, sel.scores)
        }
    };
    let est = DetteEstimate::from_prefit(
        &prefit_grid(&data.x, &data.y, h_r, args.grid_size)?,
        h_d,
        h_r,
    )?;
    let grid = span(&data.x, args.grid_points)?;
    let fitted = est.eval(&grid);
    let body = json!({
        "h_r": h_r,
        "h_d": h_d,
        "cv_scores": cv_scores,
        "inverse_grid": est.inverse_grid,
        "grid": grid,
        "fitted": fitted,
    });
    io::write_json(
        &out_path(&args.common, "dette.json")?,
        &report(&args, body)?,
    )?;
    io::write_csv_file(
        &out_path(&args.common, "fitted.csv")?,
        &["x", "fitted"],
        &[&grid, &fitted],
    )
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let args = apply_config(args.clone(), args.common.config.as_deref())?;
    check_steps(args.steps)?;
    let mut cfg = SimConfig::new(args.function.parse::<TestFunction>()?);
    cfg.n = args.n;
    cfg.snr = args.snr;
    cfg.runs = args.runs;
    cfg.seed = args.seed;
    cfg.steps = args.steps;
    cfg.lambda = args.lambda.lambda()?;
    cfg.hd = args.hd.bandwidth("h_d", true)?;
    cfg.estimators = args
        .estimators
        .iter()
        .map(|e| e.trim().parse::<Estimator>())
        .collect::<Result<_>>()?;
    cfg.estimators.sort();
    cfg.estimators.dedup();
    // without an explicit width each run derives its own default from the design
    cfg.kernel = match (args.kernel.kernel.as_str(), args.kernel.sigma) {
        ("gaussian", None) => None,
        _ => Some(args.kernel.resolve(|| Kernel::default_for(&cfg.design()))?),
    };
    let rep = run_monte_carlo(&cfg)?;
    let mut body = serde_json::to_value(&rep)?;
    body.as_object_mut()
        .expect("report is an object")
        .insert("simulation".into(), serde_json::to_value(&rep.config)?);
    io::write_json(
        &out_path(&args.common, "report.json")?,
        &report(&args, body)?,
    )?;
    let names: Vec<&str> = rep.mse_curve.keys().map(String::as_str).collect();
    let mut header = vec!["x"];
    header.extend(&names);
    let mut cols: Vec<&[f64]> = vec![&rep.grid];
    cols.extend(rep.mse_curve.values().map(Vec::as_slice));
    io::write_csv_file(&out_path(&args.common, "mse_curve.csv")?, &header, &cols)
}

fn load_pairs(path: Option<&Path>) -> Result<LandmarkPairs> {
    match path {
        Some(p) => {
            let (s, t) = io::read_landmarks(p)?;
            LandmarkPairs::new(s, t)
        }
        None => Ok(diagonal_swap_fixture()),
    }
}

enum Matched {
    Unconstrained(VectorSplineFit2D),
    Homeo(FlowMap<VectorSplineFit2D>),
}

impl PlanarMap for Matched {
    fn map_points(&self, points: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
        match self {
            Matched::Unconstrained(f) => f.map_points(points),
            Matched::Homeo(f) => f.map_points(points),
        }
    }
}

fn run_match(
    pairs: &LandmarkPairs,
    method: &str,
    kernel: &Kernel,
    lambda: f64,
    steps: usize,
) -> Result<Matched> {
    match method {
        "unconstrained" => Ok(Matched::Unconstrained(match_unconstrained(
            pairs, kernel, lambda,
        )?)),
        "homeo" => {
            check_steps(steps)?;
            Ok(Matched::Homeo(match_homeo(pairs, kernel, lambda, steps)?))
        }
        other => Err(Error::Config(format!("unknown matching method '{other}'"))),
    }
}

fn cmd_match(args: MatchArgs) -> Result<()> {
    let args = apply_config(args.clone(), args.common.config.as_deref())?;
    let lambda = args.lambda.fixed_lambda()?;
    let (rows, cols) = parse_size(&args.grid)?;
    let pairs = load_pairs(args.landmarks.as_deref())?;
    let kernel = args.kernel.resolve(|| default_kernel_2d(&pairs.sources))?;
    let map = run_match(&pairs, &args.method, &kernel, lambda, args.steps)?;
    let grid = deform_grid(&map, rows, cols, args.samples_per_edge)?;
    let mapped = map.map_points(&pairs.sources)?;
    let residuals: Vec<f64> = mapped
        .iter()
        .zip(&pairs.targets)
        .map(|(m, t)| ((m[0] - t[0]).powi(2) + (m[1] - t[1]).powi(2)).sqrt())
        .collect();
    let mut diag = json!({
        "jacobian_min": jacobian_min_default(&map)?,
        "landmark_residuals": residuals,
        "kernel": kernel,
    });
    if let Matched::Homeo(f) = &map {
        let d = diag.as_object_mut().expect("object");
        d.insert("sup_norm".into(), json!(f.field.sup_norm()));
        d.insert("guard_holds".into(), json!(f.field.guard_holds()));
        d.insert("nudges".into(), json!(f.field.nudges));
    }
    io::write_json(
        &out_path(&args.common, "grid.json")?,
        &report(&args, json!({ "grid": grid }))?,
    )?;
    io::write_json(
        &out_path(&args.common, "diagnostics.json")?,
        &report(&args, diag)?,
    )
}

fn cmd_warp(args: WarpArgs) -> Result<()> {
    let args = apply_config(args.clone(), args.common.config.as_deref())?;
    let lambda = args.lambda.fixed_lambda()?;
    let image = match &args.image {
        Some(p) => io::read_pgm(p)?,
        None => synthetic_face(128, 128),
    };
    let pairs = match &args.landmarks {
        Some(p) => load_pairs(Some(p))?,
        None => {
            // default demo: raise the eyes and widen the mouth
            let src = synthetic_face_landmarks();
            let mut dst = src.clone();
            dst[0][1] -= 0.05;
            dst[1][1] -= 0.05;
            dst[3][0] -= 0.05;
            dst[4][0] += 0.05;
            LandmarkPairs::new(src, dst)?
        }
    };
    let (w, h) = match &args.out_size {
        Some(s) => parse_size(s)?,
        None => (image.width, image.height),
    };
    let kernel = args.kernel.resolve(|| default_kernel_2d(&pairs.sources))?;
    // backward sampling needs the map from output positions to input positions
    let out = match args.method.as_str() {
        "homeo" => {
            check_steps(args.steps)?;
            let f = match_homeo(&pairs, &kernel, lambda, args.steps)?;
            warp_image(&image, &f.inverse(), w, h)?
        }
        "unconstrained" => {
            let back = match_unconstrained(&pairs.reversed(), &kernel, lambda)?;
            warp_image(&image, &back, w, h)?
        }
        other => return Err(Error::Config(format!("unknown matching method '{other}'"))),
    };
    io::write_pgm(&out_path(&args.common, "warped.pgm")?, &out)?;
    io::write_json(
        &out_path(&args.common, "warp.json")?,
        &report(&args, json!({"width": w, "height": h, "kernel": kernel}))?,
    )
}

fn cmd_gcv_scan(args: GcvScanArgs) -> Result<()> {
    let args = apply_config(args.clone(), args.common.config.as_deref())?;
    check_steps(args.steps)?;
    if args.grid_points == 0 {
        return Err(Error::Config("grid needs at least one point".into()));
    }
    positive("grid_min", args.grid_min)?;
    positive("grid_max", args.grid_max)?;
    let data = load_dataset(&args.input, false)?;
    let kernel = args.kernel.resolve_1d(&data.x)?;
    let (f_hat, _) = pre_estimate(&data, &args.pre)?;
    let grid = log_grid(args.grid_min, args.grid_max, args.grid_points);
    let evals = gcv_scan(&data.x, &f_hat, &data.y, &kernel, &grid, args.steps)?;
    let mut cols: [Vec<f64>; 7] = Default::default();
    for (lambda, e) in grid.iter().zip(evals) {
        let row = match e {
            Ok(e) => {
                let t = e.traces();
                let mean = t.iter().sum::<f64>() / t.len() as f64;
                let lo = t.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                [*lambda, e.score, e.numerator, e.denominator, lo, mean, hi]
            }
            Err(err) if err.is_numerical() => [
                *lambda,
                f64::INFINITY,
                f64::NAN,
                f64::NAN,
                f64::NAN,
                f64::NAN,
                f64::NAN,
            ],
            Err(err) => return Err(err),
        };
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
    }
    let best = select_gcv(&cols[1], &grid).map(|i| grid[i]);
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    io::write_csv_file(
        &out_path(&args.common, "gcv_scan.csv")?,
        &[
            "lambda",
            "score",
            "numerator",
            "denominator",
            "trace_min",
            "trace_mean",
            "trace_max",
        ],
        &refs,
    )?;
    io::write_json(
        &out_path(&args.common, "gcv_scan.json")?,
        &report(&args, json!({"lambda_selected": best, "kernel": kernel}))?,
    )
}

fn configure_threads() {
    if let Some(n) = std::env::var("HOMEOSPLINE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        if n > 0 {
            // fails only if a pool already exists, which leaves its size in place
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Fit(a) => cmd_fit(a),
        Command::Monotonize(a) => cmd_monotonize(a),
        Command::BaselineDette(a) => cmd_dette(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Match(a) => cmd_match(a),
        Command::Warp(a) => cmd_warp(a),
        Command::GcvScan(a) => cmd_gcv_scan(a),
    }
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

/// Parses `argv`, runs the command and returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("homeospline: {}", e.to_string().replace('\n', " "));
            exit_code(&e)
        }
    }
}
