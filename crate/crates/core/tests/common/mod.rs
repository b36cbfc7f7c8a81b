#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use lagquant::fields::{BaseKind, Coefficient, FiberedFunction, Mode, PolyTerm, TrigTerm};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn ci(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    ci(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_point(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Primitive coefficient kinds with an evaluator independent of the library.
#[derive(Clone, Debug)]
pub enum Prim {
    Gaussian { center: Vec<f64>, decay: f64, amp: Complex64 },
    PolyGaussian { center: Vec<f64>, decay: f64, amp: Complex64, terms: Vec<(Vec<u32>, f64)> },
    Bump { center: Vec<f64>, radius: f64, amp: Complex64 },
    Trig { terms: Vec<(Vec<i64>, Complex64)> },
    Wave { wave: Vec<f64>, amp: Complex64 },
    Constant { amp: Complex64 },
}

impl Prim {
    pub fn build(&self) -> Arc<Coefficient> {
        match self.clone() {
            Prim::Gaussian { center, decay, amp } => Coefficient::gaussian(center, decay, amp),
            Prim::PolyGaussian { center, decay, amp, terms } => Coefficient::poly_gaussian(
                center,
                decay,
                amp,
                terms.into_iter().map(|(power, coef)| PolyTerm { power, coef }).collect(),
            ),
            Prim::Bump { center, radius, amp } => Coefficient::bump(center, radius, amp),
            Prim::Trig { terms } => {
                Coefficient::trig(terms.into_iter().map(|(freq, amp)| TrigTerm { freq, amp }).collect())
            }
            Prim::Wave { wave, amp } => Coefficient::wave(wave, amp),
            Prim::Constant { amp } => Coefficient::constant(amp),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let r2 = |c: &[f64]| -> f64 { x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum() };
        match self {
            Prim::Gaussian { center, decay, amp } => amp * (-decay * r2(center)).exp(),
            Prim::PolyGaussian { center, decay, amp, terms } => {
                let mut poly = 0.0;
                for (power, coef) in terms {
                    let mut t = *coef;
                    for (i, &p) in power.iter().enumerate() {
                        for _ in 0..p {
                            t *= x[i] - center[i];
                        }
                    }
                    poly += t;
                }
                amp * poly * (-decay * r2(center)).exp()
            }
            Prim::Bump { center, radius, amp } => {
                let u = 1.0 - r2(center) / (radius * radius);
                if u <= 1e-3 {
                    c(0.0)
                } else {
                    amp * (1.0 - 1.0 / u).exp()
                }
            }
            Prim::Trig { terms } => terms
                .iter()
                .map(|(q, a)| {
                    let ph: f64 = q.iter().zip(x).map(|(&qi, xi)| qi as f64 * xi).sum();
                    a * Complex64::from_polar(1.0, 2.0 * PI * ph)
                })
                .sum(),
            Prim::Wave { wave, amp } => {
                let ph: f64 = wave.iter().zip(x).map(|(w, xi)| w * xi).sum();
                amp * Complex64::from_polar(1.0, ph)
            }
            Prim::Constant { amp } => *amp,
        }
    }
}

pub fn random_prim(rng: &mut ChaCha8Rng, n: usize, base: BaseKind) -> Prim {
    let choice = match base {
        BaseKind::Plane => rng.random_range(0..4),
        BaseKind::Torus => 4 + rng.random_range(0..2),
    };
    let center = random_point(rng, n, -0.5, 0.5);
    let amp = random_complex(rng);
    match choice {
        0 => Prim::Gaussian { center, decay: rng.random_range(1.5..4.0), amp },
        1 => Prim::PolyGaussian {
            center,
            decay: rng.random_range(1.5..3.0),
            amp,
            terms: (0..rng.random_range(1..4))
                .map(|_| ((0..n).map(|_| rng.random_range(0..3)).collect(), rng.random_range(-1.0..1.0)))
                .collect(),
        },
        2 => Prim::Bump { center, radius: rng.random_range(0.8..1.5), amp },
        3 => Prim::Gaussian { center, decay: rng.random_range(1.0..3.0), amp },
        4 => Prim::Trig {
            terms: (0..rng.random_range(1..4))
                .map(|_| ((0..n).map(|_| rng.random_range(-2..=2)).collect(), random_complex(rng)))
                .collect(),
        },
        _ => Prim::Constant { amp },
    }
}

/// A random function together with its primitive description for oracles.
#[derive(Clone, Debug)]
pub struct Sample {
    pub f: FiberedFunction,
    pub parts: Vec<(Mode, Prim, bool)>,
}

impl Sample {
    /// Direct summation, visiting the parts in reverse order.
    pub fn oracle(&self, x: &[f64], theta: &[f64]) -> Complex64 {
        let mut acc = c(0.0);
        for (m, p, conj) in self.parts.iter().rev() {
            let v = p.eval(x);
            let v = if *conj { v.conj() } else { v };
            let ph: f64 = m.0.iter().zip(theta).map(|(&a, t)| a as f64 * t).sum();
            acc += v * Complex64::from_polar(1.0, ph);
        }
        acc
    }
}

fn random_mode(rng: &mut ChaCha8Rng, n: usize, band: i64) -> Mode {
    Mode((0..n).map(|_| rng.random_range(-band..=band)).collect())
}

/// Random function with `count` modes in `[−band, band]ⁿ`; real ones pair
/// each mode `m` with the conjugate coefficient at `−m`.
pub fn random_sample(rng: &mut ChaCha8Rng, n: usize, base: BaseKind, count: usize, band: i64, real: bool) -> Sample {
    let mut parts = Vec::new();
    for _ in 0..count {
        let m = random_mode(rng, n, band);
        let p = random_prim(rng, n, base);
        parts.push((m.clone(), p.clone(), false));
        if real {
            parts.push((-&m, p, true));
        }
    }
    let modes = parts.iter().map(|(m, p, conj)| {
        let coeff = if *conj { Coefficient::conj(p.build()) } else { p.build() };
        (m.clone(), coeff)
    });
    let f = FiberedFunction::new(n, base, modes, real).expect("random function is valid");
    Sample { f, parts }
}

pub fn random_function(seed: u64, n: usize, base: BaseKind, count: usize, band: i64, real: bool) -> FiberedFunction {
    random_sample(&mut rng(seed), n, base, count, band, real).f
}

pub fn gauss_cos(center: f64, decay: f64, m: i64) -> FiberedFunction {
    FiberedFunction::cosine(BaseKind::Plane, Mode(vec![m]), Coefficient::gaussian(vec![center], decay, c(1.0))).unwrap()
}

pub fn gauss_sin(center: f64, decay: f64, m: i64) -> FiberedFunction {
    FiberedFunction::sine(BaseKind::Plane, Mode(vec![m]), Coefficient::gaussian(vec![center], decay, c(1.0))).unwrap()
}

pub fn max_entry_diff(a: &lagquant::hilbert::BandOperator, b: &lagquant::hilbert::BandOperator) -> f64 {
    a.sub(b).unwrap().max_abs()
}
