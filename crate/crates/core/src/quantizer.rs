//! Quantization maps `f ↦ φᵏ(f)` onto banded operators.
//!
//! Matrix elements are `K(x + m/k, x) = e^{i·phase}·f_m(x + m/(2k))`. The
//! model map has zero phase; the general map takes the phase from parallel
//! transport along the horizontal distribution spanned by
//! `∂_{x_j} + A_j^i(x)·∂_{θ_i}`; the torus map is the general map on
//! `(ℤ/k)ⁿ` with shortest-arc lifts.
//!
//! Phases are antisymmetric under reversing a segment, so each one is
//! computed once in a canonical orientation and negated for the reverse.
//! This makes `φᵏ(conj f) = φᵏ(f)*` hold without round-off in the phase.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{BaseKind, Coefficient, FiberedFunction, Mode, TrigTerm};
use crate::hilbert::{BandOperator, Lattice, LatticeKind, Window};

pub const PHASE_TOL: f64 = 1e-10;
pub const PHASE_MIN_STEPS: usize = 64;
const PHASE_MAX_STEPS: usize = 1 << 20;

/// Margin added around decay boxes when sizing plane windows.
pub const WINDOW_MARGIN: f64 = 1.0;

/// Matrix field `x ↦ A(x)` with `A_j^i` stored at row `j`, column `i`.
#[derive(Clone, Debug)]
pub struct HorizontalField {
    n: usize,
    entries: Vec<Arc<Coefficient>>,
    grad_norm_bound: f64,
    constant: bool,
    /// `(amp, 2π·freq)` when the field is `amp·sin(2π⟨freq, x⟩)`
    sinusoid: Option<(Vec<f64>, Vec<f64>)>,
}

impl HorizontalField {
    /// `A ≡ p` with `p[j][i] = A_j^i`.
    pub fn constant(p: &[Vec<f64>]) -> Result<Self> {
        let n = p.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in p {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            entries.extend(row.iter().map(|v| Coefficient::constant(Complex64::new(*v, 0.0))));
        }
        Ok(Self {
            n,
            entries,
            grad_norm_bound: 0.0,
            constant: true,
            sinusoid: None,
        })
    }

    pub fn zero(n: usize) -> Self {
        Self::constant(&vec![vec![0.0; n]; n]).expect("square by construction")
    }

    /// `A_j^i(x) = amp[j][i]·sin(2π⟨freq, x⟩)`; periodic with `‖∇A‖ = 2π|freq|·‖amp‖_F`.
    pub fn sinusoidal(amp: &[Vec<f64>], freq: &[i64]) -> Result<Self> {
        let n = amp.len();
        if freq.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: freq.len(),
            });
        }
        let neg: Vec<i64> = freq.iter().map(|q| -q).collect();
        let mut entries = Vec::with_capacity(n * n);
        let mut frob = 0.0;
        for row in amp {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            for &a in row {
                frob += a * a;
                // sin t = (e^{it} − e^{−it}) / 2i
                entries.push(Coefficient::trig(vec![
                    TrigTerm {
                        freq: freq.to_vec(),
                        amp: Complex64::new(0.0, -0.5 * a),
                    },
                    TrigTerm {
                        freq: neg.clone(),
                        amp: Complex64::new(0.0, 0.5 * a),
                    },
                ]));
            }
        }
        let qnorm = freq.iter().map(|&q| (q * q) as f64).sum::<f64>().sqrt();
        let bound = 2.0 * PI * qnorm * frob.sqrt();
        let flat: Vec<f64> = amp.iter().flatten().copied().collect();
        let wave: Vec<f64> = freq.iter().map(|&q| 2.0 * PI * q as f64).collect();
        Ok(Self {
            n,
            entries,
            grad_norm_bound: bound,
            constant: bound == 0.0,
            sinusoid: Some((flat, wave)),
        })
    }

    /// General field from real-valued coefficient entries (`entries[j·n + i] = A_j^i`)
    /// with a caller-certified bound on `sup ‖∇A‖_F`.
    pub fn from_entries(n: usize, entries: Vec<Arc<Coefficient>>, grad_norm_bound: f64) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        for e in &entries {
            e.validate(n)?;
        }
        Ok(Self {
            n,
            entries,
            grad_norm_bound,
            constant: false,
            sinusoid: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn is_periodic(&self) -> bool {
        self.entries.iter().all(|e| e.is_periodic())
    }

    /// Reported `sup_x ‖∂_l A_j^i(x)‖_F`.
    pub fn grad_norm_bound(&self) -> f64 {
        self.grad_norm_bound
    }

    /// `A_j^i` as a coefficient expression.
    pub fn entry(&self, j: usize, i: usize) -> &Arc<Coefficient> {
        &self.entries[j * self.n + i]
    }

    /// `A(x)` as `a[j][i]`.
    pub fn value(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.entry(j, i).value(x).re).collect())
            .collect()
    }

    /// `∂_l A_j^i(x)` as `d[i][j][l]`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
        let n = self.n;
        let mut d = vec![vec![vec![0.0; n]; n]; n];
        for j in 0..n {
            for i in 0..n {
                let jet = self.entry(j, i).jet(x, 1)?;
                for l in 0..n {
                    let mut e = vec![0u32; n];
                    e[l] = 1;
                    d[i][j][l] = jet.partial(&e).re;
                }
            }
        }
        Ok(d)
    }

    /// Largest sampled `‖∇A‖_F` over a grid of `per_axis` points in `window`.
    pub fn sampled_grad_norm(&self, window: &Window, per_axis: usize) -> Result<f64> {
        let n = self.n;
        let mut worst = 0.0f64;
        let total = per_axis.pow(n as u32);
        for flat in 0..total {
            let mut rem = flat;
            let mut x = vec![0.0; n];
            for axis in (0..n).rev() {
                let t = (rem % per_axis) as f64 / (per_axis.max(2) - 1) as f64;
                rem /= per_axis;
                x[axis] = window.lo[axis] + t * (window.hi[axis] - window.lo[axis]);
            }
            let g = self.gradient(&x)?;
            let frob: f64 = g.iter().flatten().flatten().map(|v| v * v).sum::<f64>().sqrt();
            worst = worst.max(frob);
        }
        Ok(worst)
    }

    /// `⟨u, A(u)⟩` at `x`, the only part of the field that enters the phase.
    fn quadratic(&self, x: &[f64], u: &[f64]) -> f64 {
        let n = self.n;
        if let Some((amp, wave)) = &self.sinusoid {
            let mut form = 0.0;
            for j in 0..n {
                for i in 0..n {
                    form += u[j] * u[i] * amp[j * n + i];
                }
            }
            let arg: f64 = wave.iter().zip(x).map(|(w, v)| w * v).sum();
            return form * arg.sin();
        }
        let mut acc = 0.0;
        for j in 0..n {
            if u[j] == 0.0 {
                continue;
            }
            for i in 0..n {
                if u[i] == 0.0 {
                    continue;
                }
                acc += u[j] * u[i] * self.entry(j, i).value(x).re;
            }
        }
        acc
    }
}

/// Open cover of the base deciding which lattice points are close.
#[derive(Clone, Debug, PartialEq)]
pub enum Cover {
    /// The single chart `ℝⁿ`; points are close within `closeness_radius`.
    Plane { closeness_radius: f64 },
    /// Per axis, `charts` arcs of length `chart_length` centered at `j/charts`.
    Torus { charts: usize, chart_length: f64 },
}

impl Default for Cover {
    fn default() -> Self {
        Self::Plane {
            closeness_radius: f64::INFINITY,
        }
    }
}

impl Cover {
    pub fn default_torus() -> Self {
        Self::Torus {
            charts: 8,
            chart_length: 0.45,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Plane { closeness_radius } if *closeness_radius > 0.0 => Ok(()),
            Self::Plane { .. } => Err(Error::Config("closeness radius must be positive".into())),
            Self::Torus {
                charts,
                chart_length,
            } => {
                if *chart_length >= 0.5 {
                    return Err(Error::Config(format!(
                        "torus chart length {chart_length} must stay below half a period"
                    )));
                }
                if (*charts as f64) * chart_length <= 1.0 {
                    return Err(Error::Config(format!(
                        "{charts} arcs of length {chart_length} do not cover the circle"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Distance below which two points always share a chart.
    pub fn closeness_radius(&self) -> f64 {
        match self {
            Self::Plane { closeness_radius } => *closeness_radius,
            Self::Torus {
                charts,
                chart_length,
            } => chart_length - 1.0 / *charts as f64,
        }
    }

    /// True when the segment `[x, x + d]` lies inside one chart.
    pub fn contains_segment(&self, x: &[f64], d: &[f64]) -> bool {
        match self {
            Self::Plane { closeness_radius } => {
                d.iter().map(|v| v * v).sum::<f64>().sqrt() <= *closeness_radius
            }
            Self::Torus {
                charts,
                chart_length,
            } => x.iter().zip(d).all(|(&a, &da)| {
                let (lo, hi) = if da >= 0.0 { (a, a + da) } else { (a + da, a) };
                (0..*charts).any(|j| {
                    let c = j as f64 / *charts as f64;
                    // shift the arc so its center sits nearest to the chart center
                    let mid = 0.5 * (lo + hi);
                    let shift = (mid - c).round();
                    lo - shift >= c - 0.5 * chart_length && hi - shift <= c + 0.5 * chart_length
                })
            }),
        }
    }
}

/// True when `m` is the canonical orientation of the pair `{m, −m}`.
fn is_canonical(m: &Mode) -> bool {
    m.0.iter().find(|&&v| v != 0).is_none_or(|&v| v > 0)
}

/// Transport phase of the segment from `x` to `x + m/k`.
///
/// With `h = |m|/2k`, `u = m/|m|` and `a(s) = ⟨u, A(u)⟩` at `x + m/2k + s·u`,
/// the phase is `k·{−h·(α(h) + α(−h)) + ∫_{−h}^{h} s·a(s) ds}` where
/// `α(t) = ∫_0^t a`. Both integrals are advanced together by classical RK4,
/// doubling the step count from 64 until successive values agree to 1e-10.
pub fn horizontal_phase(field: &HorizontalField, x: &[f64], m: &Mode, k: u32) -> Result<f64> {
    horizontal_phase_steps(field, x, m, k).map(|(phase, _)| phase)
}

/// [`horizontal_phase`] together with the RK4 step count it settled on
/// (0 when the phase vanishes identically).
pub fn horizontal_phase_steps(field: &HorizontalField, x: &[f64], m: &Mode, k: u32) -> Result<(f64, usize)> {
    if field.is_constant() || m.is_zero() {
        return Ok((0.0, 0));
    }
    if is_canonical(m) {
        adaptive_phase(field, x, m, k)
    } else {
        let kf = k as f64;
        let start: Vec<f64> = x.iter().zip(&m.0).map(|(v, &d)| v + d as f64 / kf).collect();
        adaptive_phase(field, &start, &-m, k).map(|(p, steps)| (-p, steps))
    }
}

/// [`horizontal_phase`] restricted to segments inside a chart of `cover`.
pub fn horizontal_phase_in(
    field: &HorizontalField,
    cover: &Cover,
    x: &[f64],
    m: &Mode,
    k: u32,
) -> Result<f64> {
    let kf = k as f64;
    let d: Vec<f64> = m.0.iter().map(|&v| v as f64 / kf).collect();
    if !cover.contains_segment(x, &d) {
        return Err(Error::SegmentExitsChart {
            from: x.to_vec(),
            offset: m.0.clone(),
        });
    }
    horizontal_phase(field, x, m, k)
}

fn adaptive_phase(field: &HorizontalField, x: &[f64], m: &Mode, k: u32) -> Result<(f64, usize)> {
    let mut steps = PHASE_MIN_STEPS;
    let mut prev = phase_with_steps(field, x, m, k, steps);
    while steps < PHASE_MAX_STEPS {
        steps *= 2;
        let next = phase_with_steps(field, x, m, k, steps);
        if (next - prev).abs() < PHASE_TOL {
            return Ok((next, steps));
        }
        prev = next;
    }
    Err(Error::PhaseNonConvergence(PHASE_TOL))
}

/// Transport phase with a fixed RK4 step count per half-segment.
pub fn phase_with_steps(field: &HorizontalField, x: &[f64], m: &Mode, k: u32, steps: usize) -> f64 {
    let kf = k as f64;
    let norm = m.euclid();
    let h = norm / (2.0 * kf);
    let u: Vec<f64> = m.0.iter().map(|&v| v as f64 / norm).collect();
    let mid: Vec<f64> = x.iter().zip(&m.0).map(|(v, &d)| v + d as f64 / (2.0 * kf)).collect();
    let point = std::cell::RefCell::new(mid.clone());
    let a = |s: f64| {
        let mut p = point.borrow_mut();
        for ((pi, c), d) in p.iter_mut().zip(&mid).zip(&u) {
            *pi = c + s * d;
        }
        field.quadratic(&p, &u)
    };
    // state (α, J) with α' = a(s), J' = s·a(s)
    let integrate = |end: f64| {
        let dt = end / steps as f64;
        let mut alpha = 0.0;
        let mut moment = 0.0;
        let mut t = 0.0;
        let mut f0 = a(0.0);
        for _ in 0..steps {
            let fm = a(t + 0.5 * dt);
            let f1 = a(t + dt);
            let k1 = (f0, t * f0);
            let k2 = (fm, (t + 0.5 * dt) * fm);
            let k3 = k2;
            let k4 = (f1, (t + dt) * f1);
            alpha += dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            moment += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            t += dt;
            f0 = f1;
        }
        (alpha, moment)
    };
    let (alpha_pos, moment_pos) = integrate(h);
    let (alpha_neg, moment_neg) = integrate(-h);
    kf * (-h * (alpha_pos + alpha_neg) + (moment_pos - moment_neg))
}

/// The three quantization schemes.
#[derive(Clone, Debug)]
pub enum Scheme {
    Model,
    General {
        field: Arc<HorizontalField>,
        cover: Cover,
    },
    Torus {
        field: Arc<HorizontalField>,
        cover: Cover,
    },
}

impl Scheme {
    pub fn base(&self) -> BaseKind {
        match self {
            Self::Torus { .. } => BaseKind::Torus,
            _ => BaseKind::Plane,
        }
    }

    pub fn field(&self) -> Option<&Arc<HorizontalField>> {
        match self {
            Self::Model => None,
            Self::General { field, .. } | Self::Torus { field, .. } => Some(field),
        }
    }

    /// Lattice for level `k` large enough for every function in `fs`.
    pub fn lattice(&self, fs: &[&FiberedFunction], k: u32) -> Result<Arc<Lattice>> {
        match self {
            Self::Torus { field, .. } => Ok(Arc::new(Lattice::torus(field.n(), k))),
            _ => Ok(Arc::new(Lattice::plane(k, &auto_window(fs, k)?)?)),
        }
    }
}

/// Union of decay boxes grown by the widest band and a unit margin.
pub fn auto_window(fs: &[&FiberedFunction], k: u32) -> Result<Window> {
    let n = fs.first().map(|f| f.n()).ok_or(Error::UnboundedSupport)?;
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut band = 0usize;
    for f in fs {
        if f.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: f.n(),
            });
        }
        band = band.max(f.band_limit());
        let b = f.decay_box().ok_or(Error::UnboundedSupport)?;
        if b.lo.is_empty() || b.is_empty() {
            continue;
        }
        for axis in 0..n {
            lo[axis] = lo[axis].min(b.lo[axis]);
            hi[axis] = hi[axis].max(b.hi[axis]);
        }
    }
    if lo[0] > hi[0] {
        // every function vanishes identically
        lo = vec![0.0; n];
        hi = vec![0.0; n];
    }
    let margin = band as f64 / k as f64 + WINDOW_MARGIN;
    Ok(Window {
        lo: lo.iter().map(|v| v - margin).collect(),
        hi: hi.iter().map(|v| v + margin).collect(),
    })
}

/// Quantization map for one scheme on one lattice, caching phases per band.
pub struct Quantizer {
    scheme: Scheme,
    lattice: Arc<Lattice>,
    phases: Mutex<HashMap<Mode, Arc<Vec<f64>>>>,
}

impl Quantizer {
    pub fn new(scheme: Scheme, lattice: Arc<Lattice>) -> Result<Self> {
        match (&scheme, lattice.kind()) {
            (Scheme::Torus { field, cover }, LatticeKind::Torus) => {
                cover.validate()?;
                if !field.is_periodic() {
                    return Err(Error::NonPeriodicField);
                }
                check_field_dim(field, &lattice)?;
            }
            (Scheme::General { field, cover }, LatticeKind::Plane { .. }) => {
                cover.validate()?;
                check_field_dim(field, &lattice)?;
            }
            (Scheme::Model, LatticeKind::Plane { .. }) => {}
            _ => return Err(Error::LatticeMismatch),
        }
        Ok(Self {
            scheme,
            lattice,
            phases: Mutex::new(HashMap::new()),
        })
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    pub fn k(&self) -> u32 {
        self.lattice.k()
    }

    fn check_function(&self, f: &FiberedFunction) -> Result<()> {
        if f.n() != self.lattice.n() {
            return Err(Error::DimensionMismatch {
                expected: self.lattice.n(),
                got: f.n(),
            });
        }
        if f.base() != self.scheme.base() {
            return Err(Error::BaseMismatch);
        }
        let k = self.k();
        match &self.scheme {
            Scheme::Torus { cover, .. } => {
                if 4 * f.band_limit() >= k as usize {
                    return Err(Error::BandTooWideForTorus {
                        band: f.band_limit(),
                        k,
                    });
                }
                self.check_closeness(f, cover)?;
            }
            Scheme::General { cover, .. } => {
                self.check_closeness(f, cover)?;
                self.check_window(f)?;
            }
            Scheme::Model => self.check_window(f)?,
        }
        Ok(())
    }

    fn check_closeness(&self, f: &FiberedFunction, cover: &Cover) -> Result<()> {
        let radius = cover.closeness_radius();
        let kf = self.k() as f64;
        for (m, _) in f.modes() {
            if m.euclid() / kf > radius {
                return Err(Error::BandExceedsCloseness {
                    band: f.band_limit(),
                    radius,
                    k: self.k(),
                });
            }
        }
        Ok(())
    }

    fn check_window(&self, f: &FiberedFunction) -> Result<()> {
        let LatticeKind::Plane { lo, hi } = self.lattice.kind() else {
            return Ok(());
        };
        let b = f.decay_box().ok_or(Error::UnboundedSupport)?;
        if b.lo.is_empty() || b.is_empty() {
            return Ok(());
        }
        let kf = self.k() as f64;
        for axis in 0..f.n() {
            let wlo = lo[axis] as f64 / kf;
            let whi = hi[axis] as f64 / kf;
            if b.lo[axis] < wlo - 1e-12 || b.hi[axis] > whi + 1e-12 {
                return Err(Error::WindowTooSmall(format!(
                    "axis {axis}: lattice covers [{wlo}, {whi}] but the function decays only outside [{}, {}]",
                    b.lo[axis], b.hi[axis]
                )));
            }
        }
        Ok(())
    }

    /// Phases for band `m`, indexed by column; zero for the model scheme.
    pub fn phases(&self, m: &Mode) -> Result<Arc<Vec<f64>>> {
        let field = match &self.scheme {
            Scheme::Model => return Ok(Arc::new(vec![0.0; self.lattice.dim()])),
            Scheme::General { field, .. } | Scheme::Torus { field, .. } => field,
        };
        if let Some(p) = self.phases.lock().expect("phase cache poisoned").get(m) {
            return Ok(p.clone());
        }
        let lattice = &self.lattice;
        let kf = self.k() as f64;
        let canonical = is_canonical(m);
        let computed: Result<Vec<f64>> = (0..lattice.dim())
            .into_par_iter()
            .map(|x| {
                if field.is_constant() || m.is_zero() {
                    return Ok(0.0);
                }
                if canonical {
                    let start = lattice.coords(x);
                    adaptive_phase(field, &start, m, self.k()).map(|(p, _)| p)
                } else {
                    // start from the row point so both orientations share one solve
                    let row = lattice.point(x).iter().zip(&m.0).map(|(l, d)| l + d).collect::<Vec<_>>();
                    let row_idx = lattice.index_of(&row);
                    let start: Vec<f64> = match row_idx {
                        Some(r) => lattice.coords(r),
                        None => row.iter().map(|&l| l as f64 / kf).collect(),
                    };
                    adaptive_phase(field, &start, &-m, self.k()).map(|(p, _)| -p)
                }
            })
            .collect();
        let arc = Arc::new(computed?);
        self.phases
            .lock()
            .expect("phase cache poisoned")
            .insert(m.clone(), arc.clone());
        Ok(arc)
    }

    /// `φᵏ(f)` on this quantizer's lattice.
    pub fn quantize(&self, f: &FiberedFunction) -> Result<BandOperator> {
        self.check_function(f)?;
        let lattice = &self.lattice;
        let k = self.k() as f64;
        let mut op = BandOperator::zero(lattice.clone());
        for (m, coeff) in f.modes() {
            let phases = self.phases(m)?;
            let band: Vec<Complex64> = (0..lattice.dim())
                .into_par_iter()
                .map(|x| {
                    if lattice.shift(x, m).is_none() {
                        return Complex64::new(0.0, 0.0);
                    }
                    // midpoint from integer labels so both orientations round identically
                    let mid: Vec<f64> = lattice
                        .point(x)
                        .iter()
                        .zip(&m.0)
                        .map(|(&l, &d)| (2 * l + d) as f64 / (2.0 * k))
                        .collect();
                    let v = coeff.value(&mid);
                    if phases[x] == 0.0 {
                        v
                    } else {
                        v * Complex64::from_polar(1.0, phases[x])
                    }
                })
                .collect();
            op.insert_band(m, band);
        }
        Ok(op)
    }
}

fn check_field_dim(field: &HorizontalField, lattice: &Lattice) -> Result<()> {
    if field.n() == lattice.n() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: lattice.n(),
            got: field.n(),
        })
    }
}

/// Model map `K(c + m/k, c) = f_m(c + m/(2k))` on a plane lattice.
pub fn quantize_model(f: &FiberedFunction, lattice: &Arc<Lattice>) -> Result<BandOperator> {
    Quantizer::new(Scheme::Model, lattice.clone())?.quantize(f)
}

/// General map with transport phases of `field` on a plane lattice.
pub fn quantize_general(
    f: &FiberedFunction,
    field: &Arc<HorizontalField>,
    cover: &Cover,
    lattice: &Arc<Lattice>,
) -> Result<BandOperator> {
    let scheme = Scheme::General {
        field: field.clone(),
        cover: cover.clone(),
    };
    Quantizer::new(scheme, lattice.clone())?.quantize(f)
}

/// Torus map on `(ℤ/k)ⁿ` using the default arc cover.
pub fn quantize_torus(f: &FiberedFunction, field: &Arc<HorizontalField>, k: u32) -> Result<BandOperator> {
    quantize_torus_with_cover(f, field, &Cover::default_torus(), k)
}

pub fn quantize_torus_with_cover(
    f: &FiberedFunction,
    field: &Arc<HorizontalField>,
    cover: &Cover,
    k: u32,
) -> Result<BandOperator> {
    let lattice = Arc::new(Lattice::torus(f.n(), k));
    let scheme = Scheme::Torus {
        field: field.clone(),
        cover: cover.clone(),
    };
    Quantizer::new(scheme, lattice)?.quantize(f)
}
