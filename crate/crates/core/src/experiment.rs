//! Convergence scans over the level `k`: configuration, runners and
//! log-log slope fits.
//!
//! Every runner evaluates one task per `k` inside a dedicated rayon pool and
//! aggregates single-threaded, so the output does not depend on the worker
//! count.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{BaseKind, FiberedFunction, Mode};
use crate::hilbert::BandOperator;
use crate::norm::{band_norm_bound, op_norm};
use crate::quantizer::{horizontal_phase_steps, phase_with_steps, Cover, HorizontalField, Quantizer, Scheme};
use crate::star::{commutator_defect, expansion_defect};
use crate::toeplitz::{dq_bt_difference, CoherentFrame, SiegelForm};

pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "k,value,normalized,slope_so_far";
pub const VACUOUS_PHASE: &str = "vacuous: zero gradient";
pub const DEFAULT_PHASE_SAMPLES: usize = 500;
pub const DEFAULT_PHASE_MAX_MODE: i64 = 4;
/// The oracle reruns the phase solve with this many times more RK4 steps.
pub const PHASE_ORACLE_REFINEMENT: usize = 10;
const SUP_GRID_POINTS: usize = 512;
const SUP_BASE_BUDGET: usize = 1 << 20;
const SUP_CANDIDATES: usize = 8;
const SUP_MAX_ITER: usize = 100_000;
/// Relative slack of the norm-bound check, covering LAPACK rounding.
const NORM_BOUND_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    NormConvergence,
    CommutatorRate,
    StarResidual,
    BtCompare,
    AbelianCompare,
    PhaseBound,
}

impl ExperimentKind {
    pub const ALL: [Self; 6] = [
        Self::NormConvergence,
        Self::CommutatorRate,
        Self::StarResidual,
        Self::BtCompare,
        Self::AbelianCompare,
        Self::PhaseBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::NormConvergence => "norm-convergence",
            Self::CommutatorRate => "commutator-rate",
            Self::StarResidual => "star-residual",
            Self::BtCompare => "bt-compare",
            Self::AbelianCompare => "abelian-compare",
            Self::PhaseBound => "phase-bound",
        }
    }

    fn needs_g(self) -> bool {
        matches!(self, Self::CommutatorRate | Self::StarResidual)
    }

    fn needs_f(self) -> bool {
        !matches!(self, Self::PhaseBound)
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A function given inline or as a path to a JSON function file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionSource {
    Path(PathBuf),
    Inline(FiberedFunction),
}

impl FunctionSource {
    pub fn load(&self) -> Result<FiberedFunction> {
        match self {
            Self::Inline(f) => Ok(f.clone()),
            Self::Path(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read function file {}: {e}", p.display())))?;
                FiberedFunction::from_json_str(&text)
            }
        }
    }

    fn resolve(&mut self, dir: &Path) {
        if let Self::Path(p) = self {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HorizontalSpec {
    Zero { n: usize },
    Constant { value: Vec<Vec<f64>> },
    /// `A_j^i(x) = amp[j][i]·sin(2π⟨freq, x⟩)`
    Sin { amp: Vec<Vec<f64>>, freq: Vec<i64> },
}

impl HorizontalSpec {
    pub fn build(&self) -> Result<HorizontalField> {
        match self {
            Self::Zero { n } => Ok(HorizontalField::zero(*n)),
            Self::Constant { value } => HorizontalField::constant(value),
            Self::Sin { amp, freq } => HorizontalField::sinusoidal(amp, freq),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoverSpec {
    Plane {
        #[serde(default)]
        closeness_radius: Option<f64>,
    },
    Torus { charts: usize, chart_length: f64 },
}

impl CoverSpec {
    pub fn build(&self) -> Result<Cover> {
        let cover = match self {
            Self::Plane { closeness_radius } => Cover::Plane {
                closeness_radius: closeness_radius.unwrap_or(f64::INFINITY),
            },
            Self::Torus { charts, chart_length } => Cover::Torus {
                charts: *charts,
                chart_length: *chart_length,
            },
        };
        cover.validate()?;
        Ok(cover)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeSpec {
    #[default]
    Model,
    General {
        field: HorizontalSpec,
        #[serde(default)]
        cover: Option<CoverSpec>,
    },
    Torus {
        field: HorizontalSpec,
        #[serde(default)]
        cover: Option<CoverSpec>,
    },
}

impl SchemeSpec {
    pub fn build(&self) -> Result<Scheme> {
        Ok(match self {
            Self::Model => Scheme::Model,
            Self::General { field, cover } => Scheme::General {
                field: Arc::new(field.build()?),
                cover: cover.as_ref().map(CoverSpec::build).transpose()?.unwrap_or_default(),
            },
            Self::Torus { field, cover } => Scheme::Torus {
                field: Arc::new(field.build()?),
                cover: cover
                    .as_ref()
                    .map(CoverSpec::build)
                    .transpose()?
                    .unwrap_or_else(Cover::default_torus),
            },
        })
    }
}

/// `Ω = P + i·Q`; omitted means `P = 0`, `Q = I`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaSpec {
    pub p: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// max-entry Hermitian defect allowed for real symbols
    pub hermitian: f64,
    /// agreement between the phase solver and its refined rerun
    pub phase_oracle: f64,
    /// location accuracy of the sup-norm refinement
    pub sup_refine: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian: 1e-8,
            phase_oracle: 1e-9,
            sup_refine: 1e-8,
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub f: Option<FunctionSource>,
    #[serde(default)]
    pub g: Option<FunctionSource>,
    #[serde(default)]
    pub scheme: SchemeSpec,
    #[serde(default)]
    pub omega: Option<OmegaSpec>,
    pub k_list: Vec<u32>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// expansion order `l` of star-residual
    #[serde(default)]
    pub order: usize,
    /// keep the Θ term of the second coefficient in star-residual
    #[serde(default = "default_true")]
    pub with_theta: bool,
    /// total phase-bound samples, spread round-robin over `k_list`
    #[serde(default)]
    pub samples: Option<usize>,
    /// phase-bound offsets have entries in `[−max_mode, max_mode]`
    #[serde(default)]
    pub max_mode: Option<i64>,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    /// Parses a config; relative function paths are taken from `dir`.
    pub fn from_json_str(text: &str, dir: &Path) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(text)?;
        for src in [&mut cfg.f, &mut cfg.g].into_iter().flatten() {
            src.resolve(dir);
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn kind(&self) -> Result<ExperimentKind> {
        self.experiment
            .ok_or_else(|| Error::Config("no experiment named in config or on the command line".into()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema {}; expected {SCHEMA_VERSION}",
                self.schema
            )));
        }
        let kind = self.kind()?;
        if self.k_list.len() < 3 {
            return Err(Error::Config("k_list needs at least 3 levels for a slope fit".into()));
        }
        if self.k_list[0] == 0 || self.k_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("k_list must be strictly ascending positive integers".into()));
        }
        if kind.needs_f() && self.f.is_none() {
            return Err(Error::Config(format!("{kind} needs a function `f`")));
        }
        if kind.needs_g() && self.g.is_none() {
            return Err(Error::Config(format!("{kind} needs a function `g`")));
        }
        if kind == ExperimentKind::PhaseBound && matches!(self.scheme, SchemeSpec::Model) {
            return Err(Error::Config("phase-bound needs a general or torus scheme".into()));
        }
        if self.max_mode.is_some_and(|m| m < 1) {
            return Err(Error::Config("max_mode must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub jobs: usize,
    /// overrides the config seed when set
    pub seed: Option<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { jobs: 1, seed: None }
    }
}

/// Content of the `normalized` column.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Value(f64),
    Note(String),
    Missing,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Self::Value(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub k: u32,
    pub value: f64,
    pub normalized: Cell,
    pub slope_so_far: Option<f64>,
}

/// Log-log fit of `value` against `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least squares on `(ln k, ln v)` over the last `⌈len/2⌉` points; zero
/// values are excluded, and fewer than two remaining points give `None`.
pub fn fit_tail(points: &[(u32, f64)]) -> Option<SlopeFit> {
    let tail = &points[points.len() - points.len().div_ceil(2)..];
    fit_loglog(tail)
}

/// Least squares on `(ln k, ln v)` over all points with `v > 0`.
pub fn fit_loglog(points: &[(u32, f64)]) -> Option<SlopeFit> {
    let used: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|&(k, v)| ((k as f64).ln(), v.ln()))
        .collect();
    if used.len() < 2 {
        return None;
    }
    let n = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
    let my = used.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = used.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some(SlopeFit {
        slope,
        intercept,
        r_squared,
        points: used.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseSummary {
    pub samples: usize,
    pub violations: usize,
    /// `None` for a constant field, where the bound is 0/0
    pub max_ratio: Option<f64>,
    pub max_oracle_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRecord {
    pub experiment: ExperimentKind,
    pub rows: Vec<Row>,
    pub fit: Option<SlopeFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<PhaseSummary>,
}

impl ConvergenceRecord {
    fn from_values(experiment: ExperimentKind, values: Vec<(u32, f64, Cell)>) -> Self {
        let pts: Vec<(u32, f64)> = values.iter().map(|(k, v, _)| (*k, *v)).collect();
        let rows = values
            .into_iter()
            .enumerate()
            .map(|(i, (k, value, normalized))| Row {
                k,
                value,
                normalized,
                slope_so_far: fit_tail(&pts[..=i]).map(|f| f.slope),
            })
            .collect();
        Self {
            experiment,
            rows,
            fit: fit_tail(&pts),
            phase: None,
        }
    }

    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    pub fn r_squared(&self) -> Option<f64> {
        self.fit.map(|f| f.r_squared)
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let norm = match &r.normalized {
                Cell::Value(v) => format!("{v:e}"),
                Cell::Note(s) => s.clone(),
                Cell::Missing => String::new(),
            };
            let slope = r.slope_so_far.map(|s| format!("{s:e}")).unwrap_or_default();
            writeln!(out, "{},{:e},{},{}", r.k, r.value, norm, slope).expect("writing to a String");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn check_failed(check: &str, detail: String) -> Error {
    Error::CheckFailed {
        check: check.to_string(),
        detail,
    }
}

/// Norm of `op`, failing if it exceeds the sum of band sups.
fn checked_norm(op: &BandOperator, k: u32) -> Result<f64> {
    let value = op_norm(op)?;
    let bound = band_norm_bound(op);
    if value > bound * (1.0 + NORM_BOUND_SLACK) + f64::MIN_POSITIVE {
        return Err(check_failed(
            "norm-bound",
            format!("k = {k}: operator norm {value:e} exceeds band bound {bound:e}"),
        ));
    }
    Ok(value)
}

fn check_hermitian(op: &BandOperator, tol: f64, k: u32, what: &str) -> Result<()> {
    let defect = op.hermitian_defect();
    if defect > tol * op.max_abs().max(1.0) {
        return Err(check_failed(
            "hermitian",
            format!("k = {k}: {what} has Hermitian defect {defect:e}"),
        ));
    }
    Ok(())
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
}

fn scan<F>(cfg: &ExperimentConfig, opts: &RunOptions, task: F) -> Result<Vec<(u32, f64, Cell)>>
where
    F: Fn(u32) -> Result<(f64, Cell)> + Sync,
{
    pool(opts.jobs)?.install(|| {
        cfg.k_list
            .par_iter()
            .map(|&k| task(k).map(|(v, c)| (k, v, c)))
            .collect()
    })
}

/// Runs the configured experiment.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ConvergenceRecord> {
    cfg.validate()?;
    match cfg.kind()? {
        ExperimentKind::NormConvergence => run_norm_convergence(cfg, opts),
        ExperimentKind::CommutatorRate => run_commutator_rate(cfg, opts),
        ExperimentKind::StarResidual => run_star_residual(cfg, opts),
        ExperimentKind::BtCompare => run_bt_compare(cfg, opts, BaseKind::Plane),
        ExperimentKind::AbelianCompare => run_bt_compare(cfg, opts, BaseKind::Torus),
        ExperimentKind::PhaseBound => run_phase_bound(cfg, opts),
    }
}

fn load_f(cfg: &ExperimentConfig) -> Result<FiberedFunction> {
    cfg.f
        .as_ref()
        .ok_or_else(|| Error::Config("missing function `f`".into()))?
        .load()
}

fn load_g(cfg: &ExperimentConfig) -> Result<FiberedFunction> {
    cfg.g
        .as_ref()
        .ok_or_else(|| Error::Config("missing function `g`".into()))?
        .load()
}

/// Rows `(k, |‖φᵏ(f)‖ − ‖f‖_∞|)`, normalized by `‖f‖_∞`.
pub fn run_norm_convergence(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ConvergenceRecord> {
    let f = load_f(cfg)?;
    if f.is_zero() {
        return Err(Error::Config("norm-convergence needs a nonzero function".into()));
    }
    let scheme = cfg.scheme.build()?;
    let sup = pool(opts.jobs)?.install(|| sup_norm(&f, cfg.tolerances.sup_refine))?;
    let values = scan(cfg, opts, |k| {
        let lattice = scheme.lattice(&[&f], k)?;
        let op = Quantizer::new(scheme.clone(), lattice)?.quantize(&f)?;
        if f.is_real() {
            check_hermitian(&op, cfg.tolerances.hermitian, k, "φᵏ(f)")?;
        }
        let gap = (checked_norm(&op, k)? - sup).abs();
        Ok((gap, Cell::Value(gap / sup)))
    })?;
    Ok(ConvergenceRecord::from_values(ExperimentKind::NormConvergence, values))
}

/// Rows `(k, ‖[φᵏ(f), φᵏ(g)] + (i/k)φᵏ({f, g})‖)`, normalized by `k²`.
pub fn run_commutator_rate(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ConvergenceRecord> {
    let f = load_f(cfg)?;
    let g = load_g(cfg)?;
    let scheme = cfg.scheme.build()?;
    let values = scan(cfg, opts, |k| {
        let d = commutator_defect(&f, &g, k, &scheme)?;
        if f.is_real() && g.is_real() {
            // the defect is anti-Hermitian for real symbols
            check_hermitian(&d.scale(Complex64::new(0.0, 1.0)), cfg.tolerances.hermitian, k, "i·defect")?;
        }
        let v = checked_norm(&d, k)?;
        Ok((v, Cell::Value(v * (k as f64).powi(2))))
    })?;
    Ok(ConvergenceRecord::from_values(ExperimentKind::CommutatorRate, values))
}

/// Rows `(k, ‖φᵏ(f)φᵏ(g) − Σ_{j≤l}(−i/k)^j φᵏ(C_j(f, g))‖)`, normalized by `k^{l+1}`.
pub fn run_star_residual(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ConvergenceRecord> {
    let f = load_f(cfg)?;
    let g = load_g(cfg)?;
    let scheme = cfg.scheme.build()?;
    let l = cfg.order;
    let values = scan(cfg, opts, |k| {
        let d = expansion_defect(&f, &g, k, l, &scheme, cfg.with_theta)?;
        let v = checked_norm(&d, k)?;
        Ok((v, Cell::Value(v * (k as f64).powi(l as i32 + 1))))
    })?;
    Ok(ConvergenceRecord::from_values(ExperimentKind::StarResidual, values))
}

fn siegel_form(cfg: &ExperimentConfig, n: usize) -> Result<SiegelForm> {
    match &cfg.omega {
        None => Ok(SiegelForm::standard(n)),
        Some(o) => {
            let form = SiegelForm::new(&o.p, &o.q)?;
            if form.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: form.n(),
                });
            }
            Ok(form)
        }
    }
}

/// Rows `(k, ‖φᵏ_{H_P}(f) − Tᵏ(f)‖)`, normalized by `√k`.
pub fn run_bt_compare(cfg: &ExperimentConfig, opts: &RunOptions, base: BaseKind) -> Result<ConvergenceRecord> {
    let f = load_f(cfg)?;
    if f.base() != base {
        return Err(Error::BaseMismatch);
    }
    let omega = Arc::new(siegel_form(cfg, f.n())?);
    let n = f.n();
    let p: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| omega.p()[(i, j)]).collect()).collect();
    let field = Arc::new(HorizontalField::constant(&p)?);
    let kind = match base {
        BaseKind::Plane => ExperimentKind::BtCompare,
        BaseKind::Torus => ExperimentKind::AbelianCompare,
    };
    let values = scan(cfg, opts, |k| {
        if f.is_zero() {
            return Ok((0.0, Cell::Value(0.0)));
        }
        let frame = CoherentFrame::new(k, omega.clone());
        let d = dq_bt_difference(&f, &field, &frame)?;
        if f.is_real() {
            check_hermitian(&d, cfg.tolerances.hermitian, k, "φᵏ(f) − Tᵏ(f)")?;
        }
        let v = checked_norm(&d, k)?;
        Ok((v, Cell::Value(v * (k as f64).sqrt())))
    })?;
    Ok(ConvergenceRecord::from_values(kind, values))
}

/// One sampled transport segment.
#[derive(Clone, Debug, Serialize)]
pub struct PhaseSample {
    pub x: Vec<f64>,
    pub m: Vec<i64>,
    pub k: u32,
    pub phase: f64,
    pub oracle: f64,
    pub bound: f64,
}

impl PhaseSample {
    /// `|phase| / bound`, undefined when the bound vanishes.
    pub fn ratio(&self) -> Option<f64> {
        (self.bound > 0.0).then(|| self.phase.abs() / self.bound)
    }
}

/// Samples `(x, m, k)` deterministically from the seed and solves each phase
/// twice: adaptively, and with 10× the adaptive step count.
pub fn phase_samples(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<PhaseSample>> {
    let field = match cfg.scheme.build()? {
        Scheme::General { field, .. } | Scheme::Torus { field, .. } => field,
        Scheme::Model => return Err(Error::Config("phase-bound needs a horizontal field".into())),
    };
    let n = field.n();
    let count = cfg.samples.unwrap_or(DEFAULT_PHASE_SAMPLES);
    let max_mode = cfg.max_mode.unwrap_or(DEFAULT_PHASE_MAX_MODE);
    let (lo, hi) = if field.is_periodic() { (0.0, 1.0) } else { (-1.0, 1.0) };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.unwrap_or(cfg.seed));
    let draws: Vec<(Vec<f64>, Mode, u32)> = (0..count)
        .map(|i| {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
            let m = loop {
                let m = Mode((0..n).map(|_| rng.random_range(-max_mode..=max_mode)).collect());
                if !m.is_zero() {
                    break m;
                }
            };
            (x, m, cfg.k_list[i % cfg.k_list.len()])
        })
        .collect();
    let grad = field.grad_norm_bound();
    pool(opts.jobs)?.install(|| {
        draws
            .into_par_iter()
            .map(|(x, m, k)| {
                let (phase, steps) = horizontal_phase_steps(&field, &x, &m, k)?;
                let oracle = if steps == 0 {
                    0.0
                } else {
                    phase_with_steps(&field, &x, &m, k, PHASE_ORACLE_REFINEMENT * steps)
                };
                let bound = 5.0 / 24.0 * grad * m.euclid().powi(3) / (k as f64).powi(2);
                Ok(PhaseSample {
                    x,
                    m: m.0,
                    k,
                    phase,
                    oracle,
                    bound,
                })
            })
            .collect()
    })
}

/// Rows `(k, max |phase|)` with the worst `|phase| / bound` as normalized
/// column; fails on any bound violation or oracle disagreement.
pub fn run_phase_bound(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ConvergenceRecord> {
    let samples = phase_samples(cfg, opts)?;
    let tol = cfg.tolerances.phase_oracle;
    let mut violations = 0;
    let mut max_gap = 0.0f64;
    for s in &samples {
        if s.ratio().is_some_and(|r| r > 1.0) || (s.bound == 0.0 && s.phase != 0.0) {
            violations += 1;
        }
        max_gap = max_gap.max((s.phase - s.oracle).abs());
    }
    let vacuous = samples.iter().all(|s| s.bound == 0.0);
    let values: Vec<(u32, f64, Cell)> = cfg
        .k_list
        .iter()
        .map(|&k| {
            let at_k = samples.iter().filter(|s| s.k == k);
            let value = at_k.clone().map(|s| s.phase.abs()).fold(0.0, f64::max);
            let cell = if vacuous {
                Cell::Note(VACUOUS_PHASE.to_string())
            } else {
                at_k.filter_map(PhaseSample::ratio)
                    .reduce(f64::max)
                    .map_or(Cell::Missing, Cell::Value)
            };
            (k, value, cell)
        })
        .collect();
    let mut record = ConvergenceRecord::from_values(ExperimentKind::PhaseBound, values);
    record.phase = Some(PhaseSummary {
        samples: samples.len(),
        violations,
        max_ratio: samples.iter().filter_map(PhaseSample::ratio).reduce(f64::max),
        max_oracle_gap: max_gap,
    });
    if violations > 0 {
        return Err(check_failed(
            "phase-bound",
            format!("{violations} of {} samples exceed (5/24)‖∇A‖|m|³/k²", samples.len()),
        ));
    }
    if max_gap > tol {
        return Err(check_failed(
            "phase-oracle",
            format!("phase solver differs from its refined rerun by {max_gap:e}"),
        ));
    }
    Ok(record)
}

/// `sup |f|` over base and fiber: a dense grid (512 points per base axis
/// while the base grid stays within 2^20 points, 512 fiber points for
/// `n = 1` and `32·max(M, 1)` per fiber axis above), then pattern-search
/// refinement of the best candidates to location accuracy `tol`.
pub fn sup_norm(f: &FiberedFunction, tol: f64) -> Result<f64> {
    let n = f.n();
    if f.is_zero() {
        return Ok(0.0);
    }
    let (lo, hi) = match f.decay_box() {
        Some(b) if b.lo.is_empty() => return Ok(0.0),
        Some(b) if f.base() == BaseKind::Plane => (b.lo, b.hi),
        _ if f.is_periodic() => (vec![0.0; n], vec![1.0; n]),
        _ => return Err(Error::UnboundedSupport),
    };
    let base_pts = {
        let per = (SUP_BASE_BUDGET as f64).powf(1.0 / n as f64).floor() as usize;
        per.clamp(2, SUP_GRID_POINTS)
    };
    let fiber_pts = if n == 1 {
        SUP_GRID_POINTS
    } else {
        32 * f.band_limit().max(1)
    };
    let modes: Vec<(Mode, _)> = f.modes().map(|(m, c)| (m.clone(), c.clone())).collect();
    let theta_axis: Vec<f64> = (0..fiber_pts).map(|i| 2.0 * PI * i as f64 / fiber_pts as f64).collect();
    let base_total = base_pts.pow(n as u32);
    let fiber_total = fiber_pts.pow(n as u32);
    let base_point = |flat: usize| -> Vec<f64> {
        let mut rem = flat;
        let mut x = vec![0.0; n];
        for axis in (0..n).rev() {
            let i = rem % base_pts;
            rem /= base_pts;
            x[axis] = lo[axis] + (hi[axis] - lo[axis]) * i as f64 / (base_pts - 1) as f64;
        }
        x
    };
    let fiber_point = |flat: usize| -> Vec<f64> {
        let mut rem = flat;
        let mut t = vec![0.0; n];
        for axis in (0..n).rev() {
            t[axis] = theta_axis[rem % fiber_pts];
            rem /= fiber_pts;
        }
        t
    };
    // best (value, base index, fiber index) per base point
    let mut best: Vec<(f64, usize, usize)> = (0..base_total)
        .into_par_iter()
        .map(|bi| {
            let x = base_point(bi);
            let coeffs: Vec<(&Mode, Complex64)> = modes.iter().map(|(m, c)| (m, c.value(&x))).collect();
            let mut top = (0.0, bi, 0);
            for fi in 0..fiber_total {
                let t = fiber_point(fi);
                let v: Complex64 = coeffs
                    .iter()
                    .map(|(m, c)| {
                        let ph: f64 = m.0.iter().zip(&t).map(|(&a, b)| a as f64 * b).sum();
                        c * Complex64::from_polar(1.0, ph)
                    })
                    .sum();
                if v.norm() > top.0 {
                    top = (v.norm(), bi, fi);
                }
            }
            top
        })
        .collect();
    best.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let abs_at = |z: &[f64]| -> Result<f64> { Ok(f.evaluate(&z[..n], &z[n..])?.norm()) };
    let mut sup = best[0].0;
    let mut base_step: Vec<f64> = (0..n).map(|i| (hi[i] - lo[i]) / (base_pts - 1) as f64).collect();
    base_step.extend(std::iter::repeat_n(2.0 * PI / fiber_pts as f64, n));
    for &(v0, bi, fi) in best.iter().take(SUP_CANDIDATES) {
        let mut z = base_point(bi);
        z.extend(fiber_point(fi));
        let mut val = v0;
        let mut step = base_step.clone();
        let mut iter = 0;
        while step.iter().any(|&s| s > tol) && iter < SUP_MAX_ITER {
            iter += 1;
            let mut moved = false;
            for axis in 0..2 * n {
                for dir in [1.0, -1.0] {
                    let mut trial = z.clone();
                    trial[axis] += dir * step[axis];
                    let tv = abs_at(&trial)?;
                    if tv > val {
                        z = trial;
                        val = tv;
                        moved = true;
                    }
                }
            }
            if !moved {
                step.iter_mut().for_each(|s| *s *= 0.5);
            }
        }
        sup = sup.max(val);
    }
    Ok(sup)
}
