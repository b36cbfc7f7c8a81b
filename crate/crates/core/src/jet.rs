//! Truncated multivariate Taylor jets.
//!
//! A [`Jet`] of order `J` at a point `x0` stores the Taylor coefficients
//! `c_α` of a function with `f(x0 + h) = Σ_{|α| ≤ J} c_α h^α + O(|h|^{J+1})`.
//! Partial derivatives are recovered as `∂^α f(x0) = α! c_α`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest jet order the crate will build.
pub const MAX_JET_ORDER: usize = 16;

/// Multi-index layout shared by all jets of the same `(n, order)`.
#[derive(Debug)]
pub struct JetLayout {
    n: usize,
    order: usize,
    exponents: Vec<Vec<u32>>,
    lookup: HashMap<Vec<u32>, usize>,
    // (i, j, i+j) for every pair whose total degree stays within `order`
    products: Vec<(usize, usize, usize)>,
}

impl JetLayout {
    fn build(n: usize, order: usize) -> Self {
        let mut exponents = Vec::new();
        for degree in 0..=order {
            let mut current = vec![0u32; n];
            push_graded(&mut exponents, &mut current, 0, degree as u32);
        }
        let lookup: HashMap<Vec<u32>, usize> = exponents
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        let mut products = Vec::new();
        for (i, a) in exponents.iter().enumerate() {
            let da: u32 = a.iter().sum();
            for (j, b) in exponents.iter().enumerate() {
                let db: u32 = b.iter().sum();
                if (da + db) as usize > order {
                    continue;
                }
                let sum: Vec<u32> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                products.push((i, j, lookup[&sum]));
            }
        }
        Self {
            n,
            order,
            exponents,
            lookup,
            products,
        }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn index_of(&self, alpha: &[u32]) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }
}

// Enumerates exponents of a fixed total degree in lexicographically
// decreasing order of the leading coordinate.
fn push_graded(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, axis: usize, remaining: u32) {
    let n = current.len();
    if n == 0 {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if axis == n - 1 {
        current[axis] = remaining;
        out.push(current.clone());
        current[axis] = 0;
        return;
    }
    for take in (0..=remaining).rev() {
        current[axis] = take;
        push_graded(out, current, axis + 1, remaining - take);
    }
    current[axis] = 0;
}

thread_local! {
    static LAYOUTS: RefCell<HashMap<(usize, usize), Arc<JetLayout>>> = RefCell::new(HashMap::new());
}

/// Shared layout for jets in `n` variables up to total order `order`.
pub fn layout(n: usize, order: usize) -> Arc<JetLayout> {
    LAYOUTS.with(|cache| {
        cache
            .borrow_mut()
            .entry((n, order))
            .or_insert_with(|| Arc::new(JetLayout::build(n, order)))
            .clone()
    })
}

fn factorial(m: u32) -> f64 {
    (1..=m).fold(1.0, |acc, v| acc * v as f64)
}

fn multi_factorial(alpha: &[u32]) -> f64 {
    alpha.iter().map(|&a| factorial(a)).product()
}

#[derive(Clone, Debug)]
pub struct Jet {
    layout: Arc<JetLayout>,
    coeffs: Vec<Complex64>,
}

impl Jet {
    pub fn check_order(order: usize) -> Result<()> {
        if order > MAX_JET_ORDER {
            return Err(Error::JetOrderTooHigh {
                requested: order,
                max: MAX_JET_ORDER,
            });
        }
        Ok(())
    }

    pub fn zero(n: usize, order: usize) -> Self {
        let layout = layout(n, order);
        let coeffs = vec![Complex64::new(0.0, 0.0); layout.len()];
        Self { layout, coeffs }
    }

    pub fn constant(n: usize, order: usize, value: Complex64) -> Self {
        let mut jet = Self::zero(n, order);
        jet.coeffs[0] = value;
        jet
    }

    /// The coordinate function `x_axis` expanded at `base`.
    pub fn variable(n: usize, order: usize, base: f64, axis: usize) -> Self {
        let mut jet = Self::constant(n, order, Complex64::new(base, 0.0));
        if order >= 1 {
            let mut alpha = vec![0u32; n];
            alpha[axis] = 1;
            let idx = jet.layout.index_of(&alpha).expect("first-order index");
            jet.coeffs[idx] = Complex64::new(1.0, 0.0);
        }
        jet
    }

    pub fn n(&self) -> usize {
        self.layout.n
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn value(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn layout(&self) -> &JetLayout {
        &self.layout
    }

    /// Taylor coefficient `c_α`; zero beyond the truncation order.
    pub fn taylor(&self, alpha: &[u32]) -> Complex64 {
        self.layout
            .index_of(alpha)
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    /// Partial derivative `∂^α f` at the expansion point.
    pub fn partial(&self, alpha: &[u32]) -> Complex64 {
        self.taylor(alpha) * multi_factorial(alpha)
    }

    /// Jet of `∂^α f`, of order `self.order() - |α|`.
    pub fn differentiate(&self, alpha: &[u32]) -> Self {
        let shift: u32 = alpha.iter().sum();
        let order = self.order().saturating_sub(shift as usize);
        let mut out = Self::zero(self.n(), order);
        for (i, beta) in out.layout.exponents.clone().iter().enumerate() {
            let lifted: Vec<u32> = beta.iter().zip(alpha).map(|(b, a)| b + a).collect();
            let weight: f64 = beta
                .iter()
                .zip(alpha)
                .map(|(&b, &a)| factorial(b + a) / factorial(b))
                .product();
            out.coeffs[i] = self.taylor(&lifted) * weight;
        }
        out
    }

    /// Re-truncates to a lower order.
    pub fn truncate(&self, order: usize) -> Self {
        if order >= self.order() {
            return self.clone();
        }
        let mut out = Self::zero(self.n(), order);
        let len = out.coeffs.len();
        out.coeffs.copy_from_slice(&self.coeffs[..len]);
        out
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|c| c.conj()).collect(),
        }
    }

    /// `g ∘ f` given the derivatives `g^{(r)}(f(x0))` for `r = 0..=order`.
    pub fn compose(&self, outer_derivs: &[Complex64]) -> Self {
        let order = self.order();
        debug_assert!(outer_derivs.len() > order);
        let mut increment = self.clone();
        increment.coeffs[0] = Complex64::new(0.0, 0.0);
        let mut out = Self::constant(self.n(), order, outer_derivs[0]);
        let mut power = Self::constant(self.n(), order, Complex64::new(1.0, 0.0));
        for (r, d) in outer_derivs.iter().enumerate().take(order + 1).skip(1) {
            power = &power * &increment;
            let weight = d / factorial(r as u32);
            for (o, p) in out.coeffs.iter_mut().zip(&power.coeffs) {
                *o += weight * p;
            }
        }
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose(&vec![e; self.order() + 1])
    }

    pub fn recip(&self) -> Self {
        let v = self.value();
        let mut derivs = Vec::with_capacity(self.order() + 1);
        // d^r/dv^r v^{-1} = (-1)^r r! v^{-(r+1)}
        let mut inv_power = 1.0 / v;
        for r in 0..=self.order() {
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            derivs.push(inv_power * sign * factorial(r as u32));
            inv_power /= v;
        }
        self.compose(&derivs)
    }

    pub fn powi(&self, exponent: u32) -> Self {
        let mut out = Self::constant(self.n(), self.order(), Complex64::new(1.0, 0.0));
        for _ in 0..exponent {
            out = &out * self;
        }
        out
    }

    fn assert_compatible(&self, other: &Self) {
        assert!(
            Arc::ptr_eq(&self.layout, &other.layout)
                || (self.n() == other.n() && self.order() == other.order()),
            "jet layouts differ"
        );
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.assert_compatible(rhs);
        Jet {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.assert_compatible(rhs);
        Jet {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.assert_compatible(rhs);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.coeffs.len()];
        for &(i, j, k) in &self.layout.products {
            coeffs[k] += self.coeffs[i] * rhs.coeffs[j];
        }
        Jet {
            layout: self.layout.clone(),
            coeffs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn layout_sizes_match_binomials() {
        // C(n + J, J)
        assert_eq!(layout(1, 4).len(), 5);
        assert_eq!(layout(2, 3).len(), 10);
        assert_eq!(layout(3, 2).len(), 10);
    }

    #[test]
    fn exp_of_square_has_known_derivatives() {
        // exp(-x^2) at 0: 1, 0, -2, 0, 12
        let x = Jet::variable(1, 4, 0.0, 0);
        let g = (&x * &x).scale(c(-1.0)).exp();
        let expected = [1.0, 0.0, -2.0, 0.0, 12.0];
        for (r, e) in expected.iter().enumerate() {
            assert!((g.partial(&[r as u32]) - c(*e)).norm() < 1e-12, "order {r}");
        }
    }

    #[test]
    fn recip_matches_closed_form() {
        // 1/(1+x) at x = 0.5: derivatives (-1)^r r! / 1.5^{r+1}
        let x = Jet::variable(1, 5, 0.5, 0);
        let one = Jet::constant(1, 5, c(1.0));
        let inv = (&one + &x).recip();
        for r in 0..=5u32 {
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            let expected = sign * factorial(r) / 1.5f64.powi(r as i32 + 1);
            assert!((inv.partial(&[r]).re - expected).abs() < 1e-11);
        }
    }

    #[test]
    fn mixed_partials_of_product() {
        // f = x^2 y^3 at (1, 2): ∂x∂y f = 2x * 3y^2 = 24
        let x = Jet::variable(2, 4, 1.0, 0);
        let y = Jet::variable(2, 4, 2.0, 1);
        let f = &x.powi(2) * &y.powi(3);
        assert!((f.partial(&[1, 1]) - c(24.0)).norm() < 1e-12);
        assert!((f.partial(&[2, 2]) - c(2.0 * 6.0 * 2.0)).norm() < 1e-12);
        let d = f.differentiate(&[1, 0]);
        assert_eq!(d.order(), 3);
        assert!((d.value() - c(16.0)).norm() < 1e-12);
    }

    #[test]
    fn order_limit_is_enforced() {
        assert!(Jet::check_order(MAX_JET_ORDER).is_ok());
        assert!(Jet::check_order(MAX_JET_ORDER + 1).is_err());
    }
}
