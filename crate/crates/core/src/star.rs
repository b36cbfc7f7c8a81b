//! Star-product coefficients and truncated-expansion residuals.
//!
//! `C_j^std` is the `ħ^j` coefficient of
//! `exp((ħ/2)·Σᵢ(∂_{x′ᵢ}∂_{θ″ᵢ} − ∂_{x″ᵢ}∂_{θ′ᵢ}))`, i.e.
//! `(1/2^j)·Σ_{|α|+|β|=j} (−1)^{|β|}/(α!β!)·∂_x^α∂_θ^β f·∂_θ^α∂_x^β g`.
//! With a horizontal field the order-2 coefficient gains the correction
//! `(1/8)·Σ Θ_{ijl}(∂_{θᵢ}f·∂²_{θⱼθₗ}g + ∂²_{θⱼθₗ}f·∂_{θᵢ}g)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{Coefficient, FiberedFunction, Mode};
use crate::hilbert::BandOperator;
use crate::jet::layout;
use crate::norm::op_norm;
use crate::quantizer::{HorizontalField, Quantizer, Scheme};

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// All `(α, β)` with `|α| + |β| = j`.
fn splittings(n: usize, j: usize) -> Vec<(Vec<u32>, Vec<u32>)> {
    layout(2 * n, j)
        .exponents()
        .iter()
        .filter(|e| e.iter().sum::<u32>() as usize == j)
        .map(|e| (e[..n].to_vec(), e[n..].to_vec()))
        .collect()
}

/// `Π (i·m)^e`
fn mode_power(m: &Mode, e: &[u32]) -> Complex64 {
    let mut out = Complex64::new(1.0, 0.0);
    for (&mi, &ei) in m.0.iter().zip(e) {
        out *= Complex64::new(0.0, mi as f64).powu(ei);
    }
    out
}

fn collect(
    f: &FiberedFunction,
    g: &FiberedFunction,
    grouped: BTreeMap<Mode, Vec<Arc<Coefficient>>>,
) -> Result<FiberedFunction> {
    let modes = grouped
        .into_iter()
        .map(|(m, cs)| (m, Coefficient::sum(cs)));
    let band = f.band_limit() + g.band_limit();
    // real f, g give real coefficients by the symmetry of the bidifferential
    Ok(FiberedFunction::new(f.n(), f.base(), modes, false)?
        .with_band_limit(band)?
        .assume_real(f.is_real() && g.is_real()))
}

/// Standard Moyal-Weyl coefficient `C_j^std(f, g)`.
pub fn moyal_coefficient(f: &FiberedFunction, g: &FiberedFunction, j: usize) -> Result<FiberedFunction> {
    if f.n() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: f.n(),
            got: g.n(),
        });
    }
    if f.base() != g.base() {
        return Err(Error::BaseMismatch);
    }
    crate::jet::Jet::check_order(j + f.derivative_depth().max(g.derivative_depth()))?;
    let n = f.n();
    let splits = splittings(n, j);
    let scale = 0.5f64.powi(j as i32);
    let mut grouped: BTreeMap<Mode, Vec<Arc<Coefficient>>> = BTreeMap::new();
    for (a, fa) in f.modes() {
        for (b, gb) in g.modes() {
            let mut terms = Vec::new();
            for (alpha, beta) in &splits {
                // ∂_θ^β on mode a, ∂_θ^α on mode b
                let theta = mode_power(a, beta) * mode_power(b, alpha);
                if theta == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let sign = if beta.iter().sum::<u32>() % 2 == 0 { 1.0 } else { -1.0 };
                let weight: f64 = alpha.iter().chain(beta).map(|&e| factorial(e)).product();
                let factor = theta * (scale * sign / weight);
                terms.push(Coefficient::scaled(
                    factor,
                    Coefficient::product(vec![
                        Coefficient::derivative(alpha.clone(), fa.clone()),
                        Coefficient::derivative(beta.clone(), gb.clone()),
                    ]),
                ));
            }
            if !terms.is_empty() {
                grouped.entry(a + b).or_default().extend(terms);
            }
        }
    }
    collect(f, g, grouped)
}

/// Fully symmetric tensor `Θ_{ijl}` built from first derivatives of `A`.
#[derive(Clone, Debug)]
pub struct ThetaTensor {
    field: Arc<HorizontalField>,
}

/// Christoffel symbols `Γ^{θᵢ}_{x_l x_j} = −Θ_{ijl}`; all other components vanish.
#[derive(Clone, Debug)]
pub struct ChristoffelField {
    theta: ThetaTensor,
}

pub fn theta_tensor(field: &Arc<HorizontalField>) -> ThetaTensor {
    ThetaTensor {
        field: field.clone(),
    }
}

pub fn christoffel(field: &Arc<HorizontalField>) -> ChristoffelField {
    ChristoffelField {
        theta: theta_tensor(field),
    }
}

impl ThetaTensor {
    pub fn n(&self) -> usize {
        self.field.n()
    }

    /// `Θ(x)` as `t[i][j][l]`.
    pub fn value(&self, x: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
        let n = self.n();
        // d[i][j][l] = ∂_l A_j^i
        let d = self.field.gradient(x)?;
        let mut t = vec![vec![vec![0.0; n]; n]; n];
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    t[i][j][l] = (d[i][j][l] + d[j][i][l] + d[l][j][i] + d[j][l][i] + d[i][l][j] + d[l][i][j]) / 6.0;
                }
            }
        }
        Ok(t)
    }

    /// `Θ_{ijl}` as a coefficient expression.
    pub fn coefficient(&self, i: usize, j: usize, l: usize) -> Arc<Coefficient> {
        let n = self.n();
        let d = |upper: usize, lower: usize, by: usize| {
            let mut e = vec![0u32; n];
            e[by] = 1;
            // ∂_by A_lower^upper
            Coefficient::derivative(e, self.field.entry(lower, upper).clone())
        };
        Coefficient::scaled(
            Complex64::new(1.0 / 6.0, 0.0),
            Coefficient::sum(vec![
                d(i, j, l),
                d(j, i, l),
                d(l, j, i),
                d(j, l, i),
                d(i, l, j),
                d(l, i, j),
            ]),
        )
    }

    /// `Σ Θ_{ijl} a_i b_j c_l` as a coefficient expression; `None` when identically zero.
    pub fn contract(&self, a: &Mode, b: &Mode, c: &Mode) -> Option<Arc<Coefficient>> {
        if self.field.is_constant() {
            return None;
        }
        let n = self.n();
        let mut terms = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let w = (a.0[i] * b.0[j] * c.0[l]) as f64;
                    if w != 0.0 {
                        terms.push(Coefficient::scaled(Complex64::new(w, 0.0), self.coefficient(i, j, l)));
                    }
                }
            }
        }
        (!terms.is_empty()).then(|| Coefficient::sum(terms))
    }
}

impl ChristoffelField {
    /// `Γ^{θᵢ}_{x_l x_j}(x)` as `g[i][j][l]`.
    pub fn value(&self, x: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
        let t = self.theta.value(x)?;
        Ok(t
            .into_iter()
            .map(|a| a.into_iter().map(|b| b.into_iter().map(|v| -v).collect()).collect())
            .collect())
    }
}

/// Coefficient `C_j^H(f, g)` for `j ≤ 2`; `with_theta = false` drops the Θ correction.
pub fn star_coefficient_h(
    f: &FiberedFunction,
    g: &FiberedFunction,
    j: usize,
    field: &Arc<HorizontalField>,
    with_theta: bool,
) -> Result<FiberedFunction> {
    match j {
        0 | 1 => moyal_coefficient(f, g, j),
        2 => {
            let std = moyal_coefficient(f, g, 2)?;
            if !with_theta || field.is_constant() {
                return Ok(std);
            }
            let corr = theta_correction(f, g, field)?;
            let one = Complex64::new(1.0, 0.0);
            let sum = std.linear_combination(one, &corr, one)?;
            Ok(sum.assume_real(f.is_real() && g.is_real()))
        }
        _ => Err(Error::UnsupportedOrder(j)),
    }
}

/// `(1/8)·Σ Θ_{ijl}(∂_{θᵢ}f·∂²_{θⱼθₗ}g + ∂²_{θⱼθₗ}f·∂_{θᵢ}g)`; on modes `a`, `b`
/// this is `(−i/8)·[Θ(a,b,b) + Θ(b,a,a)]·f_a·g_b`.
pub fn theta_correction(
    f: &FiberedFunction,
    g: &FiberedFunction,
    field: &Arc<HorizontalField>,
) -> Result<FiberedFunction> {
    let theta = theta_tensor(field);
    let mut grouped: BTreeMap<Mode, Vec<Arc<Coefficient>>> = BTreeMap::new();
    for (a, fa) in f.modes() {
        for (b, gb) in g.modes() {
            let parts: Vec<_> = [theta.contract(a, b, b), theta.contract(b, a, a)]
                .into_iter()
                .flatten()
                .collect();
            if parts.is_empty() {
                continue;
            }
            grouped.entry(a + b).or_default().push(Coefficient::scaled(
                Complex64::new(0.0, -0.125),
                Coefficient::product(vec![Coefficient::sum(parts), fa.clone(), gb.clone()]),
            ));
        }
    }
    collect(f, g, grouped)
}

/// Star coefficient of order `j` for `scheme`.
pub fn scheme_coefficient(
    scheme: &Scheme,
    f: &FiberedFunction,
    g: &FiberedFunction,
    j: usize,
    with_theta: bool,
) -> Result<FiberedFunction> {
    match scheme.field() {
        None => moyal_coefficient(f, g, j),
        Some(field) => star_coefficient_h(f, g, j, field, with_theta),
    }
}

/// `φᵏ(f)φᵏ(g) − Σ_{j≤l} (−i/k)^j·φᵏ(C_j(f,g))` on a common lattice.
pub fn expansion_defect(
    f: &FiberedFunction,
    g: &FiberedFunction,
    k: u32,
    l: usize,
    scheme: &Scheme,
    with_theta: bool,
) -> Result<BandOperator> {
    let coeffs: Vec<FiberedFunction> = (0..=l)
        .map(|j| scheme_coefficient(scheme, f, g, j, with_theta))
        .collect::<Result<_>>()?;
    let mut all: Vec<&FiberedFunction> = vec![f, g];
    all.extend(coeffs.iter());
    let lattice = scheme.lattice(&all, k)?;
    let q = Quantizer::new(scheme.clone(), lattice)?;
    let mut defect = q.quantize(f)?.compose(&q.quantize(g)?)?;
    let step = Complex64::new(0.0, -1.0 / k as f64);
    let mut weight = Complex64::new(1.0, 0.0);
    for c in &coeffs {
        defect = defect.linear_combination(Complex64::new(1.0, 0.0), &q.quantize(c)?, -weight)?;
        weight *= step;
    }
    Ok(defect)
}

/// `[φᵏ(f), φᵏ(g)] + (i/k)·φᵏ({f, g})` on a common lattice.
pub fn commutator_defect(f: &FiberedFunction, g: &FiberedFunction, k: u32, scheme: &Scheme) -> Result<BandOperator> {
    let bracket = f.poisson_bracket(g)?;
    let lattice = scheme.lattice(&[f, g, &bracket], k)?;
    let q = Quantizer::new(scheme.clone(), lattice)?;
    let comm = q.quantize(f)?.commutator(&q.quantize(g)?)?;
    comm.linear_combination(
        Complex64::new(1.0, 0.0),
        &q.quantize(&bracket)?,
        Complex64::new(0.0, 1.0 / k as f64),
    )
}

/// Operator norm of [`expansion_defect`] with the Θ correction included.
pub fn expansion_residual(
    f: &FiberedFunction,
    g: &FiberedFunction,
    k: u32,
    l: usize,
    scheme: &Scheme,
) -> Result<f64> {
    op_norm(&expansion_defect(f, g, k, l, scheme, true)?)
}
