//! Gauss-Hermite and Gauss-Legendre rules.
//!
//! Nodes come from Newton iteration on the orthonormal three-term
//! recurrences, seeded with the usual asymptotic root estimates, and are
//! cached per thread.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

thread_local! {
    static HERMITE: RefCell<HashMap<usize, Arc<Rule>>> = RefCell::new(HashMap::new());
    static LEGENDRE: RefCell<HashMap<usize, Arc<Rule>>> = RefCell::new(HashMap::new());
}

/// Rule for `∫ g(x)·e^{−x²} dx` with `order` nodes.
pub fn hermite(order: usize) -> Arc<Rule> {
    HERMITE.with(|c| {
        c.borrow_mut()
            .entry(order)
            .or_insert_with(|| Arc::new(build_hermite(order)))
            .clone()
    })
}

/// Rule for `∫_{−1}^{1} g(x) dx` with `order` nodes.
pub fn legendre(order: usize) -> Arc<Rule> {
    LEGENDRE.with(|c| {
        c.borrow_mut()
            .entry(order)
            .or_insert_with(|| Arc::new(build_legendre(order)))
            .clone()
    })
}

fn build_hermite(n: usize) -> Rule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let pim4 = PI.powf(-0.25);
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            // orthonormal Hermite recurrence
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    // Store ascending nodes.
    nodes.reverse();
    weights.reverse();
    Rule { nodes, weights }
}

fn build_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    Rule { nodes, weights }
}

/// Composite Gauss-Legendre rule on `[a, b]` with `panels` equal pieces.
pub fn composite_legendre(a: f64, b: f64, panels: usize, order: usize) -> Rule {
    let base = legendre(order);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (t, w) in base.nodes.iter().zip(&base.weights) {
            nodes.push(mid + 0.5 * h * t);
            weights.push(0.5 * h * w);
        }
    }
    Rule { nodes, weights }
}

/// Calls `visit(nodes, weight)` for every point of the `dim`-fold tensor rule.
pub fn tensor_for_each<F: FnMut(&[f64], f64)>(rule: &Rule, dim: usize, visit: F) {
    let rules: Vec<&Rule> = vec![rule; dim];
    product_for_each(&rules, visit);
}

/// Calls `visit(nodes, weight)` for every point of the product of `rules`.
pub fn product_for_each<F: FnMut(&[f64], f64)>(rules: &[&Rule], mut visit: F) {
    let dim = rules.len();
    if rules.iter().any(|r| r.nodes.is_empty()) {
        return;
    }
    let mut idx = vec![0usize; dim];
    let mut point = vec![0.0; dim];
    loop {
        let mut w = 1.0;
        for (d, &i) in idx.iter().enumerate() {
            point[d] = rules[d].nodes[i];
            w *= rules[d].weights[i];
        }
        visit(&point, w);
        let mut axis = dim;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < rules[axis].nodes.len() {
                break;
            }
            idx[axis] = 0;
        }
    }
}
