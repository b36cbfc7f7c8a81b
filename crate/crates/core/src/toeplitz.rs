//! Berezin-Toeplitz operators for translation-invariant complex structures
//! `Ω = P + i·Q` on `ℝⁿ×Tⁿ` and on `(ℝ/ℤ)ⁿ×Tⁿ`.
//!
//! In the coherent basis `Ψ_b`, with `p = k(b − c)` and `mid = (b + c)/2`,
//!
//! ```text
//! ⟨Ψ_b, T(f) Ψ_c⟩ = a²·e^{−ᵗpQp/4k} ∫ f_p(mid + y)·e^{i·ᵗy P p}·e^{−k·ᵗyQy} dy,
//! a^{−2} = (π/k)^{n/2}·det(Q)^{−1/2}.
//! ```
//!
//! After `y = L^{−T}z/√k` with `Q = LLᵀ` the weight becomes `π^{−n/2}e^{−|z|²}`,
//! so smooth symbols use tensor Gauss-Hermite rules; bump symbols use
//! composite Gauss-Legendre over their support. Theta-basis elements on the
//! torus are lattice sums of plane elements.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{BaseKind, Coefficient, FiberedFunction, Mode};
use crate::hilbert::{BandOperator, Lattice, LatticeKind};
use crate::norm::op_norm;
use crate::quadrature::{composite_legendre, hermite, product_for_each, tensor_for_each};
use crate::quantizer::{quantize_general, quantize_torus, Cover, HorizontalField, Scheme};

pub const HERMITE_START_ORDER: usize = 40;
const HERMITE_MAX_ORDER: usize = 320;
pub const QUADRATURE_TOL: f64 = 1e-9;
pub const THETA_TRUNCATION: f64 = 1e-14;
const THETA_MAX_SHELLS: usize = 1000;
const LEGENDRE_ORDER: usize = 8;
const LEGENDRE_MAX_PANELS: usize = 4096;
/// `e^{−|z|²}` is below `e^{−GAUSS_CUTOFF}` outside the bump integration box.
const GAUSS_CUTOFF: f64 = 40.0;

/// `Ω = P + i·Q` with `P` symmetric and `Q` symmetric positive definite.
#[derive(Clone, Debug)]
pub struct SiegelForm {
    p: DMatrix<f64>,
    q: DMatrix<f64>,
    /// lower-triangular `L` with `Q = LLᵀ`
    chol: DMatrix<f64>,
    /// `L^{−T}`, maps `z` to `y`
    inv_chol_t: DMatrix<f64>,
    det_q: f64,
    lambda_min: f64,
}

fn to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidSiegelForm(format!("{what} must be square")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= 1e-12 * scale
}

impl SiegelForm {
    pub fn new(p: &[Vec<f64>], q: &[Vec<f64>]) -> Result<Self> {
        let p = to_matrix(p, "P")?;
        let q = to_matrix(q, "Q")?;
        if p.nrows() != q.nrows() {
            return Err(Error::InvalidSiegelForm("P and Q differ in size".into()));
        }
        if !is_symmetric(&p) || !is_symmetric(&q) {
            return Err(Error::InvalidSiegelForm("P and Q must be symmetric".into()));
        }
        let chol = q
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidSiegelForm("Q is not positive definite".into()))?;
        let l = chol.l();
        let inv_chol_t = l
            .transpose()
            .try_inverse()
            .ok_or_else(|| Error::InvalidSiegelForm("Q is numerically singular".into()))?;
        let det_q = l.diagonal().iter().map(|d| d * d).product();
        let lambda_min = q.clone().symmetric_eigenvalues().min();
        Ok(Self {
            p,
            q,
            chol: l,
            inv_chol_t,
            det_q,
            lambda_min,
        })
    }

    /// `Ω = i·I`
    pub fn standard(n: usize) -> Self {
        let zero = vec![vec![0.0; n]; n];
        let id: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(&zero, &id).expect("identity is positive definite")
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn det_q(&self) -> f64 {
        self.det_q
    }

    pub fn p_is_zero(&self) -> bool {
        self.p.amax() == 0.0
    }

    /// `ᵗvQv`
    pub fn quad_q(&self, v: &[f64]) -> f64 {
        let v = DVector::from_column_slice(v);
        v.dot(&(&self.q * &v))
    }

    /// `P·v`
    pub fn apply_p(&self, v: &[f64]) -> Vec<f64> {
        (&self.p * DVector::from_column_slice(v)).iter().copied().collect()
    }

    /// `C_Q = π^{−n/2}·∫|L^{−T}z|·e^{−|z|²} dz`, so that
    /// `|g(0) − a²∫g·e^{−k·ᵗxQx}| ≤ C_Q·‖∇g‖/√k`.
    ///
    /// Exact for `n ≤ 2` (radial part in closed form, angular part by the
    /// spectrally accurate periodic trapezoid); for `n ≥ 3` returns the Jensen
    /// upper bound `√(tr(Q⁻¹)/2)`, which keeps the inequality valid.
    pub fn moment_constant(&self) -> f64 {
        let m = &self.inv_chol_t;
        match self.n() {
            1 => m[(0, 0)].abs() / PI.sqrt(),
            2 => {
                const ANGLES: usize = 512;
                let mut acc = 0.0;
                for s in 0..ANGLES {
                    let phi = 2.0 * PI * s as f64 / ANGLES as f64;
                    let u = DVector::from_column_slice(&[phi.cos(), phi.sin()]);
                    acc += (m * u).norm();
                }
                // ∫_0^∞ r²e^{−r²} dr = √π/4
                acc * (2.0 * PI / ANGLES as f64) * PI.sqrt() / (4.0 * PI)
            }
            _ => (m.norm_squared() / 2.0).sqrt(),
        }
    }
}

/// Level-`k` coherent-state frame for a Siegel form.
#[derive(Clone, Debug)]
pub struct CoherentFrame {
    k: u32,
    omega: Arc<SiegelForm>,
}

impl CoherentFrame {
    pub fn new(k: u32, omega: Arc<SiegelForm>) -> Self {
        assert!(k >= 1, "level must be positive");
        Self { k, omega }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn omega(&self) -> &Arc<SiegelForm> {
        &self.omega
    }

    /// `a_{k,Q}` with `a^{−2} = ∫ e^{−k·ᵗxQx} dx = (π/k)^{n/2}·det(Q)^{−1/2}`.
    pub fn normalization(&self) -> f64 {
        self.normalization_sq().sqrt()
    }

    pub fn normalization_sq(&self) -> f64 {
        let n = self.omega.n() as f64;
        (self.k as f64 / PI).powf(n / 2.0) * self.omega.det_q.sqrt()
    }

    /// Plane coherent state `Ψ_{l/k}(x, θ)`, carried by fiber mode `l`.
    pub fn coherent_state(&self, l: &[i64], x: &[f64], theta: &[f64]) -> Complex64 {
        let n = self.omega.n();
        let kf = self.k as f64;
        let d: Vec<f64> = x.iter().zip(l).map(|(xi, &li)| xi - li as f64 / kf).collect();
        let dp: f64 = d.iter().zip(self.omega.apply_p(&d)).map(|(a, b)| a * b).sum();
        let dq = self.omega.quad_q(&d);
        // exp(i k/2 ᵗdΩd) = exp(−k/2·ᵗdQd)·exp(i k/2·ᵗdPd)
        let gauss = Complex64::from_polar((-0.5 * kf * dq).exp(), 0.5 * kf * dp);
        let fiber: f64 = l.iter().zip(theta).map(|(&li, t)| li as f64 * t).sum();
        (2.0 * PI).powf(-(n as f64) / 2.0)
            * self.normalization()
            * gauss
            * Complex64::from_polar(1.0, fiber)
    }

    /// Lifted theta state `Σ_{j∈ℤⁿ} Ψ_{(l + kj)/k}(x, θ)` for the residue class of `l`.
    pub fn theta_state(&self, l: &[i64], x: &[f64], theta: &[f64]) -> Result<Complex64> {
        let n = self.omega.n();
        let k = self.k as i64;
        let kf = self.k as f64;
        // start from the class member nearest to x
        let base: Vec<i64> = l
            .iter()
            .zip(x)
            .map(|(&li, xi)| li + k * ((xi - li as f64 / kf).round() as i64))
            .collect();
        let mut total = Complex64::new(0.0, 0.0);
        let mut leading = 0.0f64;
        for shell in 0..=THETA_MAX_SHELLS {
            let mut shell_max = 0.0f64;
            for j in shell_points(n, shell) {
                let lj: Vec<i64> = base.iter().zip(&j).map(|(b, ji)| b + k * ji).collect();
                let term = self.coherent_state(&lj, x, theta);
                shell_max = shell_max.max(term.norm());
                total += term;
            }
            leading = leading.max(shell_max);
            if shell > 0 && shell_max <= THETA_TRUNCATION * leading {
                return Ok(total);
            }
        }
        Err(Error::ThetaTruncation(THETA_MAX_SHELLS))
    }
}

/// Integer points `j` with `|j|_∞ = shell`.
fn shell_points(n: usize, shell: usize) -> Vec<Vec<i64>> {
    let s = shell as i64;
    let side = 2 * shell + 1;
    let mut out = Vec::new();
    let total = side.pow(n as u32);
    for flat in 0..total {
        let mut rem = flat;
        let mut j = vec![0i64; n];
        for axis in (0..n).rev() {
            j[axis] = (rem % side) as i64 - s;
            rem /= side;
        }
        if j.iter().any(|v| v.abs() == s) {
            out.push(j);
        }
    }
    out
}

/// `π^{−n/2}∫ c(mid + y(z))·e^{i·ᵗy w}·e^{−|z|²} dz` with `y = L^{−T}z/√k`.
fn gaussian_average(
    frame: &CoherentFrame,
    coeff: &Coefficient,
    mid: &[f64],
    w: &[f64],
) -> Result<Complex64> {
    if coeff.has_bump() {
        return bump_average(frame, coeff, mid, w);
    }
    let omega = &frame.omega;
    let n = omega.n();
    let scale = 1.0 / (frame.k as f64).sqrt();
    let norm = PI.powf(-(n as f64) / 2.0);
    let eval = |order: usize| {
        let rule = hermite(order);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut x = vec![0.0; n];
        tensor_for_each(&rule, n, |z, weight| {
            let y = &omega.inv_chol_t * DVector::from_column_slice(z) * scale;
            for i in 0..n {
                x[i] = mid[i] + y[i];
            }
            let phase: f64 = y.iter().zip(w).map(|(a, b)| a * b).sum();
            acc += weight * coeff.value(&x) * Complex64::from_polar(1.0, phase);
        });
        acc * norm
    };
    let mut order = HERMITE_START_ORDER;
    let mut prev = eval(order);
    while order < HERMITE_MAX_ORDER {
        order *= 2;
        let next = eval(order);
        if (next - prev).norm() <= QUADRATURE_TOL * next.norm().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureNonConvergence(format!(
        "Gauss-Hermite up to order {HERMITE_MAX_ORDER} at {mid:?}"
    )))
}

/// Same average by composite Gauss-Legendre in `y` over the support box.
fn bump_average(frame: &CoherentFrame, coeff: &Coefficient, mid: &[f64], w: &[f64]) -> Result<Complex64> {
    let omega = &frame.omega;
    let n = omega.n();
    let kf = frame.k as f64;
    let reach = (GAUSS_CUTOFF / (kf * omega.lambda_min)).sqrt();
    let support = coeff.decay_box();
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for i in 0..n {
        let (mut a, mut b) = (-reach, reach);
        if let Some(s) = &support {
            if !s.lo.is_empty() {
                a = a.max(s.lo[i] - mid[i]);
                b = b.min(s.hi[i] - mid[i]);
            }
        }
        if a >= b {
            return Ok(Complex64::new(0.0, 0.0));
        }
        lo.push(a);
        hi.push(b);
    }
    let a2 = frame.normalization_sq();
    let eval = |panels: usize| {
        let rules: Vec<_> = (0..n)
            .map(|i| composite_legendre(lo[i], hi[i], panels, LEGENDRE_ORDER))
            .collect();
        let refs: Vec<_> = rules.iter().collect();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut x = vec![0.0; n];
        product_for_each(&refs, |y, weight| {
            for i in 0..n {
                x[i] = mid[i] + y[i];
            }
            let phase: f64 = y.iter().zip(w).map(|(a, b)| a * b).sum();
            let gauss = (-kf * omega.quad_q(y)).exp();
            acc += weight * gauss * coeff.value(&x) * Complex64::from_polar(1.0, phase);
        });
        acc * a2
    };
    let mut panels = 8;
    let mut prev = eval(panels);
    while panels < LEGENDRE_MAX_PANELS {
        panels *= 2;
        let next = eval(panels);
        if (next - prev).norm() <= QUADRATURE_TOL * next.norm().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureNonConvergence(format!(
        "composite Gauss-Legendre up to {LEGENDRE_MAX_PANELS} panels at {mid:?}"
    )))
}

/// `⟨Ψ_b, T(f) Ψ_c⟩` for integer labels `b = k·b_coord`, `c = k·c_coord`.
pub fn bt_matrix_element(f: &FiberedFunction, frame: &CoherentFrame, b: &[i64], c: &[i64]) -> Result<Complex64> {
    let n = frame.omega.n();
    if b.len() != n || c.len() != n || f.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len().min(c.len()).min(f.n()),
        });
    }
    let p = Mode(b.iter().zip(c).map(|(x, y)| x - y).collect());
    let Some(coeff) = f.coefficient(&p) else {
        return Ok(Complex64::new(0.0, 0.0));
    };
    let kf = frame.k as f64;
    let mid: Vec<f64> = b.iter().zip(c).map(|(x, y)| (x + y) as f64 / (2.0 * kf)).collect();
    let pf = p.as_f64();
    let damping = (-frame.omega.quad_q(&pf) / (4.0 * kf)).exp();
    let w = frame.omega.apply_p(&pf);
    Ok(damping * gaussian_average(frame, coeff, &mid, &w)?)
}

/// `Tᵏ(f)` in the coherent basis on a plane lattice.
pub fn bt_operator(f: &FiberedFunction, frame: &CoherentFrame, lattice: &Arc<Lattice>) -> Result<BandOperator> {
    if lattice.is_torus() || f.base() != BaseKind::Plane {
        return Err(Error::BaseMismatch);
    }
    if lattice.k() != frame.k {
        return Err(Error::LatticeMismatch);
    }
    let mut op = BandOperator::zero(lattice.clone());
    for (p, _) in f.modes() {
        let band: Vec<Complex64> = (0..lattice.dim())
            .into_par_iter()
            .map(|x| {
                if lattice.shift(x, p).is_none() {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                let c = lattice.point(x);
                let b: Vec<i64> = c.iter().zip(&p.0).map(|(a, d)| a + d).collect();
                bt_matrix_element(f, frame, &b, &c)
            })
            .collect::<Result<_>>()?;
        op.insert_band(p, band);
    }
    Ok(op)
}

/// `⟨Θ_b, T(f) Θ_c⟩ = Σ_{l∈ℤⁿ} ⟨Ψ_{b + l}, T(f̃) Ψ_c⟩` for residue labels `b`, `c`.
///
/// Shells `|l|_∞ = s` are added until their largest Gaussian factor
/// `e^{−ᵗp′Qp′/4k}`, `p′ = k(b + l − c)`, drops below 1e-14 of the leading one.
pub fn theta_matrix_element(f: &FiberedFunction, frame: &CoherentFrame, b: &[i64], c: &[i64]) -> Result<Complex64> {
    let n = frame.omega.n();
    let k = frame.k as i64;
    let kf = frame.k as f64;
    let mut total = Complex64::new(0.0, 0.0);
    let mut leading = 0.0f64;
    for shell in 0..=THETA_MAX_SHELLS {
        let mut shell_max = 0.0f64;
        for l in shell_points(n, shell) {
            let bl: Vec<i64> = b.iter().zip(&l).map(|(bi, li)| bi + k * li).collect();
            let p: Vec<f64> = bl.iter().zip(c).map(|(x, y)| (x - y) as f64).collect();
            shell_max = shell_max.max((-frame.omega.quad_q(&p) / (4.0 * kf)).exp());
            total += bt_matrix_element(f, frame, &bl, c)?;
        }
        leading = leading.max(shell_max);
        if shell_max < THETA_TRUNCATION * leading {
            return Ok(total);
        }
    }
    Err(Error::ThetaTruncation(THETA_MAX_SHELLS))
}

/// `Tᵏ(f)` in the theta basis on `(ℤ/k)ⁿ`.
pub fn theta_bt_operator(f: &FiberedFunction, frame: &CoherentFrame) -> Result<BandOperator> {
    if f.base() != BaseKind::Torus || !f.is_periodic() {
        return Err(Error::BaseMismatch);
    }
    let k = frame.k;
    if 4 * f.band_limit() >= k as usize {
        return Err(Error::BandTooWideForTorus {
            band: f.band_limit(),
            k,
        });
    }
    let lattice = Arc::new(Lattice::torus(frame.omega.n(), k));
    let offsets: Vec<Mode> = f.modes().map(|(m, _)| m.clone()).collect();
    let mut op = BandOperator::zero(lattice.clone());
    for p in &offsets {
        let band: Vec<Complex64> = (0..lattice.dim())
            .into_par_iter()
            .map(|x| {
                let c = lattice.point(x);
                let row = lattice.shift(x, p).expect("torus shifts always land");
                theta_matrix_element(f, frame, &lattice.point(row), &c)
            })
            .collect::<Result<_>>()?;
        op.insert_band(p, band);
    }
    Ok(op)
}

/// Coordinate shear `(x, θ) ↦ (x, θ − Px)`: mode `m` picks up `e^{i⟨m, Px⟩}`.
pub fn shear(f: &FiberedFunction, p: &DMatrix<f64>) -> Result<FiberedFunction> {
    if f.base() != BaseKind::Plane {
        return Err(Error::BaseMismatch);
    }
    let n = f.n();
    let modes = f.modes().map(|(m, c)| {
        let mv = DVector::from_iterator(n, m.0.iter().map(|&v| v as f64));
        let wave: Vec<f64> = (p.transpose() * mv).iter().copied().collect();
        let twisted = if wave.iter().all(|v| *v == 0.0) {
            c.clone()
        } else {
            Coefficient::product(vec![c.clone(), Coefficient::wave(wave, Complex64::new(1.0, 0.0))])
        };
        (m.clone(), twisted)
    });
    FiberedFunction::new(n, BaseKind::Plane, modes, false)?.with_band_limit(f.band_limit())
}

fn check_pairing(field: &HorizontalField, omega: &SiegelForm) -> Result<()> {
    if !field.is_constant() {
        return Err(Error::Config("the comparison needs a constant horizontal field".into()));
    }
    let n = omega.n();
    let a = field.value(&vec![0.0; n]);
    for j in 0..n {
        for i in 0..n {
            if (a[j][i] - omega.p()[(j, i)]).abs() > 1e-15 {
                return Err(Error::Config(format!(
                    "horizontal field A = {a:?} does not match the real part of Ω"
                )));
            }
        }
    }
    Ok(())
}

/// `‖φᵏ_{H_P}(f) − Tᵏ(f)‖` under the basis identification `ψ_b ↦ Ψ_b` (plane)
/// or `ϑ_b ↦ Θ_b` (torus).
pub fn dq_bt_distance(f: &FiberedFunction, field: &Arc<HorizontalField>, frame: &CoherentFrame) -> Result<f64> {
    op_norm(&dq_bt_difference(f, field, frame)?)
}

pub fn dq_bt_difference(
    f: &FiberedFunction,
    field: &Arc<HorizontalField>,
    frame: &CoherentFrame,
) -> Result<BandOperator> {
    check_pairing(field, &frame.omega)?;
    let k = frame.k;
    match f.base() {
        BaseKind::Plane => {
            let scheme = Scheme::General {
                field: field.clone(),
                cover: Cover::default(),
            };
            let lattice = scheme.lattice(&[f], k)?;
            let dq = quantize_general(f, field, &Cover::default(), &lattice)?;
            let bt = bt_operator(f, frame, &lattice)?;
            dq.sub(&bt)
        }
        BaseKind::Torus => {
            let dq = quantize_torus(f, field, k)?;
            let bt = theta_bt_operator(f, frame)?;
            dq.sub(&bt)
        }
    }
}

/// Lattice bounds of a plane operator, for diagnostics.
pub fn plane_extent(lattice: &Lattice) -> Option<(Vec<i64>, Vec<i64>)> {
    match lattice.kind() {
        LatticeKind::Plane { lo, hi } => Some((lo.clone(), hi.clone())),
        LatticeKind::Torus => None,
    }
}
