//! Smooth functions on `ℝⁿ×Tⁿ` (or its torus quotient) stored as finite
//! fiberwise Fourier series `f(x,θ) = Σ_m f_m(x)·e^{i⟨m,θ⟩}`.
//!
//! Fiber data is exact: θ-derivatives multiply mode `m` by `i·m`, products
//! convolve modes, and each coefficient is a closed-form [`Coefficient`]
//! tree so x-derivatives are analytic.

mod coefficient;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use coefficient::{BoxBounds, Coefficient, PolyTerm, TrigTerm};

use crate::error::{Error, Result};

/// Integer multi-index; used both for fiber modes and for lattice band offsets.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mode(pub Vec<i64>);

impl Mode {
    pub fn zero(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn unit(n: usize, axis: usize, value: i64) -> Self {
        let mut v = vec![0; n];
        v[axis] = value;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn linf(&self) -> usize {
        self.0.iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn euclid(&self) -> f64 {
        self.0.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0)
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| v as f64).collect()
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&m, v)| m as f64 * v).sum()
    }
}

impl Add for &Mode {
    type Output = Mode;
    fn add(self, rhs: &Mode) -> Mode {
        Mode(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Mode {
    type Output = Mode;
    fn sub(self, rhs: &Mode) -> Mode {
        Mode(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &Mode {
    type Output = Mode;
    fn neg(self) -> Mode {
        Mode(self.0.iter().map(|a| -a).collect())
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    /// `ℝⁿ`
    Plane,
    /// `(ℝ/ℤ)ⁿ`
    Torus,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ModeEntry {
    m: Mode,
    coeff: Arc<Coefficient>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct FiberedDoc {
    n: usize,
    base: BaseKind,
    modes: Vec<ModeEntry>,
    #[serde(default)]
    real: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    band_limit: Option<usize>,
}

/// Band-limited function with exact fiber Fourier data.
///
/// Immutable after construction; cloning shares coefficient trees.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "FiberedDoc", into = "FiberedDoc")]
pub struct FiberedFunction {
    n: usize,
    base: BaseKind,
    band_limit: usize,
    real: bool,
    modes: BTreeMap<Mode, Arc<Coefficient>>,
}

impl TryFrom<FiberedDoc> for FiberedFunction {
    type Error = Error;
    fn try_from(doc: FiberedDoc) -> Result<Self> {
        let f = Self::new(
            doc.n,
            doc.base,
            doc.modes.into_iter().map(|e| (e.m, e.coeff)),
            doc.real,
        )?;
        match doc.band_limit {
            Some(b) => f.with_band_limit(b),
            None => Ok(f),
        }
    }
}

impl From<FiberedFunction> for FiberedDoc {
    fn from(f: FiberedFunction) -> Self {
        let derived = f.modes.keys().map(Mode::linf).max().unwrap_or(0);
        FiberedDoc {
            n: f.n,
            base: f.base,
            real: f.real,
            band_limit: (f.band_limit != derived).then_some(f.band_limit),
            modes: f
                .modes
                .into_iter()
                .map(|(m, coeff)| ModeEntry { m, coeff })
                .collect(),
        }
    }
}

/// Number of deterministic sample points used to confirm the real flag.
const REAL_CHECK_SAMPLES: usize = 8;
const REAL_CHECK_TOL: f64 = 1e-12;

impl FiberedFunction {
    /// Builds a function from `(mode, coefficient)` pairs; repeated modes are summed.
    pub fn new(
        n: usize,
        base: BaseKind,
        modes: impl IntoIterator<Item = (Mode, Arc<Coefficient>)>,
        real: bool,
    ) -> Result<Self> {
        let mut grouped: BTreeMap<Mode, Vec<Arc<Coefficient>>> = BTreeMap::new();
        for (m, c) in modes {
            if m.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: m.dim(),
                });
            }
            c.validate(n)?;
            if base == BaseKind::Torus && !c.is_periodic() {
                return Err(Error::InvalidFunction(format!(
                    "coefficient of mode {m} is not periodic on the torus base"
                )));
            }
            grouped.entry(m).or_default().push(c);
        }
        let modes: BTreeMap<_, _> = grouped
            .into_iter()
            .map(|(m, cs)| (m, Coefficient::sum(cs)))
            .collect();
        let band_limit = modes.keys().map(Mode::linf).max().unwrap_or(0);
        let f = Self {
            n,
            base,
            band_limit,
            real,
            modes,
        };
        if real {
            f.check_real()?;
        }
        Ok(f)
    }

    fn from_parts(
        n: usize,
        base: BaseKind,
        band_limit: usize,
        real: bool,
        modes: BTreeMap<Mode, Arc<Coefficient>>,
    ) -> Self {
        Self {
            n,
            base,
            band_limit,
            real,
            modes,
        }
    }

    pub fn zero(n: usize, base: BaseKind) -> Self {
        Self::from_parts(n, base, 0, true, BTreeMap::new())
    }

    pub fn constant(n: usize, base: BaseKind, value: Complex64) -> Self {
        let mut modes = BTreeMap::new();
        modes.insert(Mode::zero(n), Coefficient::constant(value));
        Self::from_parts(n, base, 0, value.im == 0.0, modes)
    }

    /// Pullback `μ*h` of a base function: the single mode `m = 0`.
    pub fn pullback(n: usize, base: BaseKind, h: Arc<Coefficient>, real: bool) -> Result<Self> {
        Self::new(n, base, [(Mode::zero(n), h)], real)
    }

    /// `c(x)·e^{i⟨m,θ⟩}`; never real unless `m = 0` and `c` is real.
    pub fn single_mode(base: BaseKind, m: Mode, c: Arc<Coefficient>) -> Result<Self> {
        let n = m.dim();
        Self::new(n, base, [(m, c)], false)
    }

    /// `c(x)·cos⟨m,θ⟩` for a real coefficient `c`.
    pub fn cosine(base: BaseKind, m: Mode, c: Arc<Coefficient>) -> Result<Self> {
        let n = m.dim();
        let half = Coefficient::scaled(Complex64::new(0.5, 0.0), c);
        Self::new(n, base, [(m.clone(), half.clone()), (-&m, half)], true)
    }

    /// `c(x)·sin⟨m,θ⟩` for a real coefficient `c`.
    pub fn sine(base: BaseKind, m: Mode, c: Arc<Coefficient>) -> Result<Self> {
        let n = m.dim();
        Self::new(
            n,
            base,
            [
                (m.clone(), Coefficient::scaled(Complex64::new(0.0, -0.5), c.clone())),
                (-&m, Coefficient::scaled(Complex64::new(0.0, 0.5), c)),
            ],
            true,
        )
    }

    /// Raises the declared band limit; it can never drop below the widest stored mode.
    pub fn with_band_limit(mut self, band_limit: usize) -> Result<Self> {
        let needed = self.modes.keys().map(Mode::linf).max().unwrap_or(0);
        if band_limit < needed {
            return Err(Error::InvalidFunction(format!(
                "band limit {band_limit} is below stored mode width {needed}"
            )));
        }
        self.band_limit = band_limit;
        Ok(self)
    }

    /// Sets the real flag for results whose reality follows from construction.
    pub(crate) fn assume_real(mut self, real: bool) -> Self {
        self.real = real;
        self
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base(&self) -> BaseKind {
        self.base
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn is_zero(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> impl Iterator<Item = (&Mode, &Arc<Coefficient>)> {
        self.modes.iter()
    }

    pub fn coefficient(&self, m: &Mode) -> Option<&Arc<Coefficient>> {
        self.modes.get(m)
    }

    /// Value of the fiber coefficient `f_m(x)`; zero for absent modes.
    pub fn coefficient_value(&self, m: &Mode, x: &[f64]) -> Complex64 {
        self.modes
            .get(m)
            .map_or(Complex64::new(0.0, 0.0), |c| c.value(x))
    }

    /// True when no mode has a non-zero θ-frequency.
    pub fn is_pullback(&self) -> bool {
        self.modes.keys().all(Mode::is_zero)
    }

    pub fn is_periodic(&self) -> bool {
        self.modes.values().all(|c| c.is_periodic())
    }

    pub fn has_bump(&self) -> bool {
        self.modes.values().any(|c| c.has_bump())
    }

    pub fn derivative_depth(&self) -> usize {
        self.modes
            .values()
            .map(|c| c.derivative_depth())
            .max()
            .unwrap_or(0)
    }

    /// Union of the coefficient decay boxes; `None` if any coefficient does not decay.
    pub fn decay_box(&self) -> Option<BoxBounds> {
        let mut acc: Option<BoxBounds> = None;
        for c in self.modes.values() {
            let b = c.decay_box()?;
            if b.lo.is_empty() {
                continue;
            }
            acc = Some(match acc {
                Some(a) => a.union(&b),
                None => b,
            });
        }
        Some(acc.unwrap_or(BoxBounds {
            lo: vec![0.0; self.n],
            hi: vec![0.0; self.n],
        }))
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len == self.n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.n,
                got: len,
            })
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        self.check_dim(other.n)?;
        if self.base != other.base {
            return Err(Error::BaseMismatch);
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64], theta: &[f64]) -> Result<Complex64> {
        self.check_dim(x.len())?;
        self.check_dim(theta.len())?;
        Ok(self
            .modes
            .iter()
            .map(|(m, c)| c.value(x) * Complex64::from_polar(1.0, m.dot(theta)))
            .sum())
    }

    /// Confirms `f_{-m} = conj(f_m)` structurally and at deterministic sample points.
    pub fn check_real(&self) -> Result<()> {
        for m in self.modes.keys() {
            if !self.modes.contains_key(&-m) {
                return Err(Error::InvalidFunction(format!(
                    "real function is missing mode {} conjugate to {m}",
                    -m
                )));
            }
        }
        let (lo, hi) = match self.decay_box() {
            Some(b) if !b.is_empty() && !b.lo.is_empty() => (b.lo, b.hi),
            _ => (vec![0.0; self.n], vec![1.0; self.n]),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..REAL_CHECK_SAMPLES {
            let x: Vec<f64> = lo
                .iter()
                .zip(&hi)
                .map(|(l, h)| if h > l { rng.random_range(*l..*h) } else { *l })
                .collect();
            for (m, c) in &self.modes {
                let a = c.value(&x);
                let b = self.modes[&-m].value(&x).conj();
                if (a - b).norm() > REAL_CHECK_TOL * (1.0 + a.norm()) {
                    return Err(Error::InvalidFunction(format!(
                        "real flag set but f_{} != conj(f_{}) at {x:?}",
                        m,
                        -m
                    )));
                }
            }
        }
        Ok(())
    }

    /// Pointwise complex conjugate: mode `m` becomes `conj(f_{-m})`.
    pub fn conj(&self) -> Self {
        let modes = self
            .modes
            .iter()
            .map(|(m, c)| (-m, Coefficient::conj(c.clone())))
            .collect();
        Self::from_parts(self.n, self.base, self.band_limit, self.real, modes)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let modes = self
            .modes
            .iter()
            .map(|(m, c)| (m.clone(), Coefficient::scaled(factor, c.clone())))
            .collect();
        let real = self.real && factor.im == 0.0;
        Self::from_parts(self.n, self.base, self.band_limit, real, modes)
    }

    /// `a·self + b·other`
    pub fn linear_combination(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        self.check_compatible(other)?;
        let mut grouped: BTreeMap<Mode, Vec<Arc<Coefficient>>> = BTreeMap::new();
        for (m, c) in &self.modes {
            grouped
                .entry(m.clone())
                .or_default()
                .push(Coefficient::scaled(a, c.clone()));
        }
        for (m, c) in &other.modes {
            grouped
                .entry(m.clone())
                .or_default()
                .push(Coefficient::scaled(b, c.clone()));
        }
        let modes = grouped
            .into_iter()
            .map(|(m, cs)| (m, Coefficient::sum(cs)))
            .collect();
        let real = self.real && other.real && a.im == 0.0 && b.im == 0.0;
        Ok(Self::from_parts(
            self.n,
            self.base,
            self.band_limit.max(other.band_limit),
            real,
            modes,
        ))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let one = Complex64::new(1.0, 0.0);
        self.linear_combination(one, other, one)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.linear_combination(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    /// `∂_x^alpha ∂_θ^beta f`; θ-derivatives act exactly as `(i·m)^beta`.
    pub fn partial(&self, alpha: &[u32], beta: &[u32]) -> Result<Self> {
        self.check_dim(alpha.len())?;
        self.check_dim(beta.len())?;
        let mut modes = BTreeMap::new();
        for (m, c) in &self.modes {
            let factor = theta_factor(m, beta);
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            let d = Coefficient::derivative(alpha.to_vec(), c.clone());
            modes.insert(m.clone(), Coefficient::scaled(factor, d));
        }
        let beta_total: u32 = beta.iter().sum();
        // i^|β| is real exactly when |β| is even
        let real = self.real && beta_total.is_multiple_of(2);
        Ok(Self::from_parts(
            self.n,
            self.base,
            self.band_limit,
            real,
            modes,
        ))
    }

    /// Pointwise product; mode `p` carries `Σ_m f_{p−m}·g_m`.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut grouped: BTreeMap<Mode, Vec<Arc<Coefficient>>> = BTreeMap::new();
        for (a, fa) in &self.modes {
            for (b, gb) in &other.modes {
                grouped
                    .entry(a + b)
                    .or_default()
                    .push(Coefficient::product(vec![fa.clone(), gb.clone()]));
            }
        }
        let modes = grouped
            .into_iter()
            .map(|(m, cs)| (m, Coefficient::sum(cs)))
            .collect();
        Ok(Self::from_parts(
            self.n,
            self.base,
            self.band_limit + other.band_limit,
            self.real && other.real,
            modes,
        ))
    }

    /// `{f,g} = Σᵢ (∂_{xᵢ}f·∂_{θᵢ}g − ∂_{θᵢ}f·∂_{xᵢ}g)`
    pub fn poisson_bracket(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let n = self.n;
        let mut grouped: BTreeMap<Mode, Vec<Arc<Coefficient>>> = BTreeMap::new();
        for (a, fa) in &self.modes {
            for (b, gb) in &other.modes {
                let mut terms = Vec::new();
                for i in 0..n {
                    let e = unit_order(n, i);
                    if b.0[i] != 0 {
                        let dfa = Coefficient::derivative(e.clone(), fa.clone());
                        terms.push(Coefficient::scaled(
                            Complex64::new(0.0, b.0[i] as f64),
                            Coefficient::product(vec![dfa, gb.clone()]),
                        ));
                    }
                    if a.0[i] != 0 {
                        let dgb = Coefficient::derivative(e, gb.clone());
                        terms.push(Coefficient::scaled(
                            Complex64::new(0.0, -(a.0[i] as f64)),
                            Coefficient::product(vec![fa.clone(), dgb]),
                        ));
                    }
                }
                if !terms.is_empty() {
                    grouped.entry(a + b).or_default().extend(terms);
                }
            }
        }
        let modes = grouped
            .into_iter()
            .map(|(m, cs)| (m, Coefficient::sum(cs)))
            .collect();
        Ok(Self::from_parts(
            n,
            self.base,
            self.band_limit + other.band_limit,
            self.real && other.real,
            modes,
        ))
    }

    /// Largest `|Im f|` over the given `(x, θ)` samples.
    pub fn max_imaginary(&self, points: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
        let mut worst = 0.0_f64;
        for (x, t) in points {
            worst = worst.max(self.evaluate(x, t)?.im.abs());
        }
        Ok(worst)
    }
}

/// `Π (i·m_j)^{β_j}`
pub(crate) fn theta_factor(m: &Mode, beta: &[u32]) -> Complex64 {
    let mut out = Complex64::new(1.0, 0.0);
    for (&mj, &bj) in m.0.iter().zip(beta) {
        out *= Complex64::new(0.0, mj as f64).powu(bj);
    }
    out
}

pub(crate) fn unit_order(n: usize, axis: usize) -> Vec<u32> {
    let mut e = vec![0; n];
    e[axis] = 1;
    e
}
