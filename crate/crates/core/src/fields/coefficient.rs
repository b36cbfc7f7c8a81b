//! Closed-form coefficient functions `ℝⁿ → ℂ` with analytic jets.
//!
//! Primitive kinds are Gaussian envelopes, polynomial-times-Gaussian,
//! smooth bumps, trigonometric polynomials of period one, and plane waves.
//! Composite nodes (sums, products, scalings, derivatives, conjugates) let
//! the star-product machinery build exact derivative expressions without
//! sampling.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;

// Tail level used by the decay certificates: values and low-order
// derivatives outside the reported box are below ~e^{-50} of the amplitude.
const TAIL_EXPONENT: f64 = 50.0;

/// Bump values are flushed to zero once `1 - |x-c|²/r²` drops below this;
/// `exp(1 - 1/u)` has already underflowed there.
const BUMP_FLUSH: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub power: Vec<u32>,
    pub coef: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub freq: Vec<i64>,
    pub amp: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficient {
    Constant {
        amp: Complex64,
    },
    /// `amp · exp(-decay·|x - center|²)`
    Gaussian {
        center: Vec<f64>,
        decay: f64,
        amp: Complex64,
    },
    /// `amp · Σ coef·(x - center)^power · exp(-decay·|x - center|²)`
    PolyGaussian {
        center: Vec<f64>,
        decay: f64,
        amp: Complex64,
        terms: Vec<PolyTerm>,
    },
    /// `amp · exp(1 - 1/(1 - |x - center|²/radius²))` inside the ball, zero outside.
    Bump {
        center: Vec<f64>,
        radius: f64,
        amp: Complex64,
    },
    /// `Σ amp·exp(2πi⟨freq, x⟩)`; period one in every coordinate.
    Trig { terms: Vec<TrigTerm> },
    /// `amp · exp(i⟨wave, x⟩)`
    Wave { wave: Vec<f64>, amp: Complex64 },
    Sum { terms: Vec<Arc<Coefficient>> },
    Product { factors: Vec<Arc<Coefficient>> },
    Scaled {
        factor: Complex64,
        inner: Arc<Coefficient>,
    },
    /// `∂^order inner`
    Derivative {
        order: Vec<u32>,
        inner: Arc<Coefficient>,
    },
    Conj { inner: Arc<Coefficient> },
}

/// Axis-aligned box `[lo, hi]` in action coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxBounds {
    pub fn around(center: &[f64], radius: f64) -> Self {
        Self {
            lo: center.iter().map(|c| c - radius).collect(),
            hi: center.iter().map(|c| c + radius).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    pub fn union(&self, other: &Self) -> Self {
        if self.is_empty() {
            return other.clone();
        }
        if other.is_empty() {
            return self.clone();
        }
        Self {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    pub fn intersect(&self, other: &Self) -> Self {
        Self {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect(),
        }
    }

    pub fn grow(&self, margin: f64) -> Self {
        Self {
            lo: self.lo.iter().map(|v| v - margin).collect(),
            hi: self.hi.iter().map(|v| v + margin).collect(),
        }
    }

    pub fn contains_box(&self, other: &Self) -> bool {
        other.is_empty()
            || self
                .lo
                .iter()
                .zip(&other.lo)
                .all(|(a, b)| a <= b)
                && self.hi.iter().zip(&other.hi).all(|(a, b)| a >= b)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }
}

fn cplx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn sq_dist(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn poly_value(terms: &[PolyTerm], y: &[f64]) -> f64 {
    terms
        .iter()
        .map(|t| {
            t.coef
                * t.power
                    .iter()
                    .zip(y)
                    .map(|(&p, v)| v.powi(p as i32))
                    .product::<f64>()
        })
        .sum()
}

impl Coefficient {
    pub fn constant(amp: Complex64) -> Arc<Self> {
        Arc::new(Self::Constant { amp })
    }

    pub fn gaussian(center: Vec<f64>, decay: f64, amp: Complex64) -> Arc<Self> {
        Arc::new(Self::Gaussian { center, decay, amp })
    }

    pub fn poly_gaussian(
        center: Vec<f64>,
        decay: f64,
        amp: Complex64,
        terms: Vec<PolyTerm>,
    ) -> Arc<Self> {
        Arc::new(Self::PolyGaussian {
            center,
            decay,
            amp,
            terms,
        })
    }

    pub fn bump(center: Vec<f64>, radius: f64, amp: Complex64) -> Arc<Self> {
        Arc::new(Self::Bump {
            center,
            radius,
            amp,
        })
    }

    pub fn trig(terms: Vec<TrigTerm>) -> Arc<Self> {
        Arc::new(Self::Trig { terms })
    }

    pub fn wave(wave: Vec<f64>, amp: Complex64) -> Arc<Self> {
        Arc::new(Self::Wave { wave, amp })
    }

    pub fn sum(terms: Vec<Arc<Self>>) -> Arc<Self> {
        if terms.len() == 1 {
            return terms.into_iter().next().unwrap();
        }
        Arc::new(Self::Sum { terms })
    }

    pub fn product(factors: Vec<Arc<Self>>) -> Arc<Self> {
        if factors.len() == 1 {
            return factors.into_iter().next().unwrap();
        }
        Arc::new(Self::Product { factors })
    }

    pub fn scaled(factor: Complex64, inner: Arc<Self>) -> Arc<Self> {
        if factor == cplx(1.0) {
            return inner;
        }
        Arc::new(Self::Scaled { factor, inner })
    }

    pub fn derivative(order: Vec<u32>, inner: Arc<Self>) -> Arc<Self> {
        if order.iter().all(|&o| o == 0) {
            return inner;
        }
        Arc::new(Self::Derivative { order, inner })
    }

    pub fn conj(inner: Arc<Self>) -> Arc<Self> {
        Arc::new(Self::Conj { inner })
    }

    /// Base dimension implied by the node; `None` for dimension-free nodes.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::Constant { .. } => None,
            Self::Gaussian { center, .. }
            | Self::PolyGaussian { center, .. }
            | Self::Bump { center, .. } => Some(center.len()),
            Self::Trig { terms } => terms.first().map(|t| t.freq.len()),
            Self::Wave { wave, .. } => Some(wave.len()),
            Self::Sum { terms } => terms.iter().find_map(|t| t.dim()),
            Self::Product { factors } => factors.iter().find_map(|t| t.dim()),
            Self::Derivative { order, .. } => Some(order.len()),
            Self::Scaled { inner, .. } | Self::Conj { inner } => inner.dim(),
        }
    }

    /// Checks that every node agrees with dimension `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let check = |d: usize| {
            if d == n {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    expected: n,
                    got: d,
                })
            }
        };
        match self {
            Self::Constant { .. } => Ok(()),
            Self::Gaussian { center, decay, .. } => {
                check(center.len())?;
                if *decay <= 0.0 || !decay.is_finite() {
                    return Err(Error::InvalidFunction(format!("gaussian decay {decay} must be positive")));
                }
                Ok(())
            }
            Self::PolyGaussian {
                center,
                decay,
                terms,
                ..
            } => {
                check(center.len())?;
                for t in terms {
                    check(t.power.len())?;
                }
                if *decay <= 0.0 || !decay.is_finite() {
                    return Err(Error::InvalidFunction(format!("gaussian decay {decay} must be positive")));
                }
                Ok(())
            }
            Self::Bump { center, radius, .. } => {
                check(center.len())?;
                if *radius <= 0.0 || !radius.is_finite() {
                    return Err(Error::InvalidFunction(format!("bump radius {radius} must be positive")));
                }
                Ok(())
            }
            Self::Trig { terms } => terms.iter().try_for_each(|t| check(t.freq.len())),
            Self::Wave { wave, .. } => check(wave.len()),
            Self::Sum { terms } => terms.iter().try_for_each(|t| t.validate(n)),
            Self::Product { factors } => factors.iter().try_for_each(|t| t.validate(n)),
            Self::Derivative { order, inner } => {
                check(order.len())?;
                inner.validate(n)
            }
            Self::Scaled { inner, .. } | Self::Conj { inner } => inner.validate(n),
        }
    }

    pub fn value(&self, x: &[f64]) -> Complex64 {
        match self {
            Self::Constant { amp } => *amp,
            Self::Gaussian { center, decay, amp } => amp * (-decay * sq_dist(x, center)).exp(),
            Self::PolyGaussian {
                center,
                decay,
                amp,
                terms,
            } => {
                let y: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                let r2: f64 = y.iter().map(|v| v * v).sum();
                amp * poly_value(terms, &y) * (-decay * r2).exp()
            }
            Self::Bump {
                center,
                radius,
                amp,
            } => {
                let u = 1.0 - sq_dist(x, center) / (radius * radius);
                if u <= BUMP_FLUSH {
                    Complex64::new(0.0, 0.0)
                } else {
                    amp * (1.0 - 1.0 / u).exp()
                }
            }
            Self::Trig { terms } => terms
                .iter()
                .map(|t| {
                    let phase: f64 = t.freq.iter().zip(x).map(|(&q, v)| q as f64 * v).sum();
                    t.amp * Complex64::from_polar(1.0, 2.0 * PI * phase)
                })
                .sum(),
            Self::Wave { wave, amp } => {
                let phase: f64 = wave.iter().zip(x).map(|(w, v)| w * v).sum();
                amp * Complex64::from_polar(1.0, phase)
            }
            Self::Sum { terms } => terms.iter().map(|t| t.value(x)).sum(),
            Self::Product { factors } => factors.iter().map(|t| t.value(x)).product(),
            Self::Scaled { factor, inner } => factor * inner.value(x),
            Self::Conj { inner } => inner.value(x).conj(),
            Self::Derivative { order, inner } => {
                let total: u32 = order.iter().sum();
                inner
                    .jet_unchecked(x, total as usize)
                    .partial(order)
            }
        }
    }

    /// Value and all partial derivatives up to total order `order` at `x`.
    pub fn jet(&self, x: &[f64], order: usize) -> Result<Jet> {
        Jet::check_order(order + self.derivative_depth())?;
        Ok(self.jet_unchecked(x, order))
    }

    /// Largest total derivative order stacked along any path of the tree.
    pub fn derivative_depth(&self) -> usize {
        match self {
            Self::Derivative { order, inner } => {
                order.iter().sum::<u32>() as usize + inner.derivative_depth()
            }
            Self::Sum { terms } => terms.iter().map(|t| t.derivative_depth()).max().unwrap_or(0),
            Self::Product { factors } => factors
                .iter()
                .map(|t| t.derivative_depth())
                .max()
                .unwrap_or(0),
            Self::Scaled { inner, .. } | Self::Conj { inner } => inner.derivative_depth(),
            _ => 0,
        }
    }

    fn jet_unchecked(&self, x: &[f64], order: usize) -> Jet {
        let n = x.len();
        let vars = || (0..n).map(|i| Jet::variable(n, order, x[i], i));
        match self {
            Self::Constant { amp } => Jet::constant(n, order, *amp),
            Self::Gaussian { center, decay, amp } => {
                gaussian_jet(x, center, *decay, order).scale(*amp)
            }
            Self::PolyGaussian {
                center,
                decay,
                amp,
                terms,
            } => {
                let shifted: Vec<Jet> = vars()
                    .zip(center)
                    .map(|(v, c)| &v - &Jet::constant(n, order, cplx(*c)))
                    .collect();
                let mut poly = Jet::zero(n, order);
                for t in terms {
                    let mut mono = Jet::constant(n, order, cplx(t.coef));
                    for (axis, &p) in t.power.iter().enumerate() {
                        if p > 0 {
                            mono = &mono * &shifted[axis].powi(p);
                        }
                    }
                    poly = &poly + &mono;
                }
                (&poly * &gaussian_jet(x, center, *decay, order)).scale(*amp)
            }
            Self::Bump {
                center,
                radius,
                amp,
            } => {
                let u0 = 1.0 - sq_dist(x, center) / (radius * radius);
                if u0 <= BUMP_FLUSH {
                    return Jet::zero(n, order);
                }
                let mut r2 = Jet::zero(n, order);
                for (v, c) in vars().zip(center) {
                    let d = &v - &Jet::constant(n, order, cplx(*c));
                    r2 = &r2 + &(&d * &d);
                }
                let one = Jet::constant(n, order, cplx(1.0));
                let u = &one - &r2.scale(cplx(1.0 / (radius * radius)));
                (&one - &u.recip()).exp().scale(*amp)
            }
            Self::Trig { terms } => {
                let mut out = Jet::zero(n, order);
                for t in terms {
                    let mut phase = Jet::zero(n, order);
                    for (v, &q) in vars().zip(&t.freq) {
                        phase = &phase + &v.scale(Complex64::new(0.0, 2.0 * PI * q as f64));
                    }
                    out = &out + &phase.exp().scale(t.amp);
                }
                out
            }
            Self::Wave { wave, amp } => {
                let mut phase = Jet::zero(n, order);
                for (v, w) in vars().zip(wave) {
                    phase = &phase + &v.scale(Complex64::new(0.0, *w));
                }
                phase.exp().scale(*amp)
            }
            Self::Sum { terms } => terms
                .iter()
                .fold(Jet::zero(n, order), |acc, t| &acc + &t.jet_unchecked(x, order)),
            Self::Product { factors } => factors.iter().fold(
                Jet::constant(n, order, cplx(1.0)),
                |acc, t| &acc * &t.jet_unchecked(x, order),
            ),
            Self::Scaled { factor, inner } => inner.jet_unchecked(x, order).scale(*factor),
            Self::Conj { inner } => inner.jet_unchecked(x, order).conj(),
            Self::Derivative { order: alpha, inner } => {
                let total: u32 = alpha.iter().sum();
                inner
                    .jet_unchecked(x, order + total as usize)
                    .differentiate(alpha)
            }
        }
    }

    /// Box outside of which the function and its low-order derivatives are
    /// negligible (Gaussian tails) or exactly zero (bumps). `None` means the
    /// node does not decay (trigonometric, plane-wave and constant kinds).
    pub fn decay_box(&self) -> Option<BoxBounds> {
        match self {
            Self::Constant { amp } if amp.norm() == 0.0 => Some(BoxBounds {
                lo: Vec::new(),
                hi: Vec::new(),
            }),
            Self::Constant { .. } | Self::Trig { .. } | Self::Wave { .. } => None,
            Self::Gaussian { center, decay, amp } => {
                let level = TAIL_EXPONENT + amp.norm().max(1.0).ln();
                Some(BoxBounds::around(center, (level / decay).sqrt()))
            }
            Self::PolyGaussian {
                center,
                decay,
                amp,
                terms,
            } => {
                let weight: f64 = terms.iter().map(|t| t.coef.abs()).sum::<f64>() * amp.norm();
                let degree = terms
                    .iter()
                    .map(|t| t.power.iter().sum::<u32>())
                    .max()
                    .unwrap_or(0) as f64;
                let mut r = (TAIL_EXPONENT / decay).sqrt();
                // weight·(1+r)^degree·e^{-decay r²} ≤ e^{-TAIL_EXPONENT}
                while weight.max(1.0).ln() + degree * (1.0 + r).ln() - decay * r * r
                    > -TAIL_EXPONENT
                {
                    r *= 1.05;
                }
                Some(BoxBounds::around(center, r))
            }
            Self::Bump { center, radius, .. } => Some(BoxBounds::around(center, *radius)),
            Self::Sum { terms } => {
                let mut acc: Option<BoxBounds> = None;
                for t in terms {
                    let b = t.decay_box()?;
                    if b.lo.is_empty() {
                        continue;
                    }
                    acc = Some(match acc {
                        Some(a) => a.union(&b),
                        None => b,
                    });
                }
                Some(acc.unwrap_or(BoxBounds {
                    lo: Vec::new(),
                    hi: Vec::new(),
                }))
            }
            Self::Product { factors } => {
                let mut acc: Option<BoxBounds> = None;
                for b in factors.iter().filter_map(|t| t.decay_box()) {
                    if b.lo.is_empty() {
                        return Some(b);
                    }
                    acc = Some(match acc {
                        Some(a) => a.intersect(&b),
                        None => b,
                    });
                }
                acc
            }
            Self::Scaled { factor, inner } => {
                if factor.norm() == 0.0 {
                    Some(BoxBounds {
                        lo: Vec::new(),
                        hi: Vec::new(),
                    })
                } else {
                    inner.decay_box()
                }
            }
            Self::Derivative { inner, .. } | Self::Conj { inner } => inner.decay_box(),
        }
    }

    /// True when the node has period one in every coordinate.
    pub fn is_periodic(&self) -> bool {
        match self {
            Self::Constant { .. } | Self::Trig { .. } => true,
            Self::Gaussian { .. } | Self::PolyGaussian { .. } | Self::Bump { .. } | Self::Wave { .. } => {
                false
            }
            Self::Sum { terms } => terms.iter().all(|t| t.is_periodic()),
            Self::Product { factors } => factors.iter().all(|t| t.is_periodic()),
            Self::Scaled { inner, .. } | Self::Derivative { inner, .. } | Self::Conj { inner } => {
                inner.is_periodic()
            }
        }
    }

    /// True when some node is a compactly supported bump (quadrature routing).
    pub fn has_bump(&self) -> bool {
        match self {
            Self::Bump { .. } => true,
            Self::Sum { terms } => terms.iter().any(|t| t.has_bump()),
            Self::Product { factors } => factors.iter().any(|t| t.has_bump()),
            Self::Scaled { inner, .. } | Self::Derivative { inner, .. } | Self::Conj { inner } => {
                inner.has_bump()
            }
            _ => false,
        }
    }
}

fn gaussian_jet(x: &[f64], center: &[f64], decay: f64, order: usize) -> Jet {
    let n = x.len();
    let mut r2 = Jet::zero(n, order);
    for (i, c) in center.iter().enumerate() {
        let d = &Jet::variable(n, order, x[i], i) - &Jet::constant(n, order, cplx(*c));
        r2 = &r2 + &(&d * &d);
    }
    r2.scale(cplx(-decay)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn gaussian_jet_at_origin() {
        let g = Coefficient::gaussian(vec![0.0], 1.0, c(1.0));
        let jet = g.jet(&[0.0], 2).unwrap();
        assert!((jet.partial(&[0]) - c(1.0)).norm() < 1e-15);
        assert!(jet.partial(&[1]).norm() < 1e-15);
        assert!((jet.partial(&[2]) - c(-2.0)).norm() < 1e-14);
    }

    #[test]
    fn bump_outside_support_has_zero_jet() {
        let b = Coefficient::bump(vec![0.0, 0.0], 0.5, c(2.0));
        let jet = b.jet(&[0.6, 0.1], 4).unwrap();
        assert!(jet.coeffs().iter().all(|v| v.norm() == 0.0));
        assert_eq!(b.value(&[0.0, 0.0]), c(2.0));
    }

    #[test]
    fn derivative_node_matches_jet_partial() {
        let g = Coefficient::poly_gaussian(
            vec![0.2],
            2.0,
            c(1.5),
            vec![PolyTerm { power: vec![2], coef: 1.0 }, PolyTerm { power: vec![0], coef: -0.5 }],
        );
        let d2 = Coefficient::derivative(vec![2], g.clone());
        let x = [0.37];
        let direct = g.jet(&x, 3).unwrap().partial(&[2]);
        assert!((d2.value(&x) - direct).norm() < 1e-13);
        // derivative of derivative
        let d3 = Coefficient::derivative(vec![1], d2);
        assert!((d3.value(&x) - g.jet(&x, 3).unwrap().partial(&[3])).norm() < 1e-12);
    }

    #[test]
    fn jet_order_limit_counts_nested_derivatives() {
        let g = Coefficient::gaussian(vec![0.0], 1.0, c(1.0));
        let d = Coefficient::derivative(vec![10], g);
        assert!(d.jet(&[0.0], 7).is_err());
        assert!(d.jet(&[0.0], 6).is_ok());
    }

    #[test]
    fn decay_box_bounds_gaussian_tail() {
        let g = Coefficient::gaussian(vec![1.0], 4.0, c(1.0));
        let b = g.decay_box().unwrap();
        let edge = [b.hi[0]];
        assert!(g.value(&edge).norm() < 1e-20);
        assert!(g.jet(&edge, 4).unwrap().partial(&[4]).norm() < 1e-14);
    }

    #[test]
    fn periodicity_flags() {
        let t = Coefficient::trig(vec![TrigTerm { freq: vec![1], amp: c(0.5) }]);
        assert!(t.is_periodic());
        let v = t.value(&[0.25]);
        let w = t.value(&[1.25]);
        assert!((v - w).norm() < 1e-14);
        let g = Coefficient::gaussian(vec![0.0], 1.0, c(1.0));
        assert!(!Coefficient::product(vec![t, g]).is_periodic());
    }
}
