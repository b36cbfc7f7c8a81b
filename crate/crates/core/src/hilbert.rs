//! Level-`k` quantum Hilbert space over the Bohr-Sommerfeld lattice `ℤⁿ/k`
//! and banded operators on it.
//!
//! A [`BandOperator`] stores, for each integer offset `p`, the column-indexed
//! entries `K(x + p/k, x)`. On the plane the lattice is a finite window; on
//! the torus it is `(ℤ/k)ⁿ` and offsets are reduced to `(−k/2, k/2]`.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::Mode;

/// Axis-aligned window `[lo, hi]` in action coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Window {
    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        Self {
            lo: vec![lo; n],
            hi: vec![hi; n],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LatticeKind {
    /// Points `l/k` with `lo ≤ l ≤ hi` componentwise.
    Plane { lo: Vec<i64>, hi: Vec<i64> },
    /// Residues `l mod k` in every coordinate.
    Torus,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    n: usize,
    k: u32,
    kind: LatticeKind,
    sizes: Vec<usize>,
}

impl Lattice {
    /// Largest plane lattice contained in `window`.
    pub fn plane(k: u32, window: &Window) -> Result<Self> {
        let n = window.lo.len();
        if window.hi.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: window.hi.len(),
            });
        }
        assert!(k >= 1, "level must be positive");
        let kf = k as f64;
        // Tolerate round-off when window ends are themselves lattice points.
        let lo: Vec<i64> = window.lo.iter().map(|v| (v * kf - 1e-9).ceil() as i64).collect();
        let hi: Vec<i64> = window.hi.iter().map(|v| (v * kf + 1e-9).floor() as i64).collect();
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::WindowTooSmall(format!(
                "window {window:?} holds no lattice point at k = {k}"
            )));
        }
        Ok(Self::plane_indices(k, lo, hi))
    }

    /// Plane lattice with explicit integer bounds.
    pub fn plane_indices(k: u32, lo: Vec<i64>, hi: Vec<i64>) -> Self {
        let sizes = lo.iter().zip(&hi).map(|(l, h)| (h - l + 1) as usize).collect();
        Self {
            n: lo.len(),
            k,
            kind: LatticeKind::Plane { lo, hi },
            sizes,
        }
    }

    pub fn torus(n: usize, k: u32) -> Self {
        assert!(k >= 1, "level must be positive");
        Self {
            n,
            k,
            kind: LatticeKind::Torus,
            sizes: vec![k as usize; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn kind(&self) -> &LatticeKind {
        &self.kind
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.kind, LatticeKind::Torus)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn dim(&self) -> usize {
        self.sizes.iter().product()
    }

    fn origin(&self) -> Vec<i64> {
        match &self.kind {
            LatticeKind::Plane { lo, .. } => lo.clone(),
            LatticeKind::Torus => vec![0; self.n],
        }
    }

    /// Integer label `l` of the point with linear index `idx` (last axis fastest).
    pub fn point(&self, idx: usize) -> Vec<i64> {
        let mut rem = idx;
        let mut out = self.origin();
        for axis in (0..self.n).rev() {
            out[axis] += (rem % self.sizes[axis]) as i64;
            rem /= self.sizes[axis];
        }
        out
    }

    /// Action coordinate `b = l/k` of the point with linear index `idx`.
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let kf = self.k as f64;
        self.point(idx).into_iter().map(|l| l as f64 / kf).collect()
    }

    /// Linear index of integer label `l`; torus labels are reduced mod `k`.
    pub fn index_of(&self, l: &[i64]) -> Option<usize> {
        let origin = self.origin();
        let mut idx = 0usize;
        for axis in 0..self.n {
            let size = self.sizes[axis] as i64;
            let mut r = l[axis] - origin[axis];
            if self.is_torus() {
                r = r.rem_euclid(size);
            } else if r < 0 || r >= size {
                return None;
            }
            idx = idx * self.sizes[axis] + r as usize;
        }
        Some(idx)
    }

    /// Index of `point(idx) + p`, if it lies on the lattice.
    pub fn shift(&self, idx: usize, p: &Mode) -> Option<usize> {
        let mut l = self.point(idx);
        for (v, d) in l.iter_mut().zip(&p.0) {
            *v += d;
        }
        self.index_of(&l)
    }

    /// Representative of `p` used as a band key; torus offsets land in `(−k/2, k/2]`.
    pub fn canonical_offset(&self, p: &Mode) -> Mode {
        if !self.is_torus() {
            return p.clone();
        }
        let k = self.k as i64;
        Mode(
            p.0.iter()
                .map(|&v| {
                    let r = v.rem_euclid(k);
                    if 2 * r > k {
                        r - k
                    } else {
                        r
                    }
                })
                .collect(),
        )
    }
}

/// Operator on `ℋ_k` stored by lattice offsets.
///
/// `bands[p][x]` is the matrix entry at row `x + p`, column `x`. On the
/// plane, slots whose row leaves the window hold zero and are never read.
#[derive(Clone, Debug)]
pub struct BandOperator {
    lattice: Arc<Lattice>,
    bands: BTreeMap<Mode, Vec<Complex64>>,
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

impl BandOperator {
    pub fn zero(lattice: Arc<Lattice>) -> Self {
        Self {
            lattice,
            bands: BTreeMap::new(),
        }
    }

    pub fn identity(lattice: Arc<Lattice>) -> Self {
        let dim = lattice.dim();
        Self::diagonal(lattice, vec![Complex64::new(1.0, 0.0); dim])
    }

    pub fn diagonal(lattice: Arc<Lattice>, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), lattice.dim());
        let n = lattice.n();
        let mut op = Self::zero(lattice);
        op.bands.insert(Mode::zero(n), values);
        op
    }

    /// Builds an operator from per-band entry functions `entry(p, column)`.
    ///
    /// Slots whose row falls off a plane window are left at zero. Offsets
    /// that coincide on the torus are summed.
    pub fn from_bands<F>(lattice: Arc<Lattice>, offsets: &[Mode], mut entry: F) -> Self
    where
        F: FnMut(&Mode, usize) -> Complex64,
    {
        let dim = lattice.dim();
        let mut op = Self::zero(lattice.clone());
        for p in offsets {
            let mut band = vec![zero(); dim];
            for (x, slot) in band.iter_mut().enumerate() {
                if lattice.shift(x, p).is_some() {
                    *slot = entry(p, x);
                }
            }
            op.accumulate_band(lattice.canonical_offset(p), band);
        }
        op
    }

    /// Inserts a precomputed band; coinciding torus offsets are summed.
    pub fn insert_band(&mut self, p: &Mode, band: Vec<Complex64>) {
        assert_eq!(band.len(), self.lattice.dim());
        let key = self.lattice.canonical_offset(p);
        let mut band = band;
        for (x, v) in band.iter_mut().enumerate() {
            if self.lattice.shift(x, p).is_none() {
                *v = zero();
            }
        }
        self.accumulate_band(key, band);
    }

    fn accumulate_band(&mut self, key: Mode, band: Vec<Complex64>) {
        match self.bands.get_mut(&key) {
            Some(existing) => {
                for (a, b) in existing.iter_mut().zip(band) {
                    *a += b;
                }
            }
            None => {
                self.bands.insert(key, band);
            }
        }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn bands(&self) -> &BTreeMap<Mode, Vec<Complex64>> {
        &self.bands
    }

    pub fn band(&self, p: &Mode) -> Option<&[Complex64]> {
        self.bands
            .get(&self.lattice.canonical_offset(p))
            .map(Vec::as_slice)
    }

    /// Largest `|p|_∞` among stored bands.
    pub fn band_width(&self) -> usize {
        self.bands.keys().map(Mode::linf).max().unwrap_or(0)
    }

    /// Bands holding at least one non-zero entry.
    pub fn nonzero_offsets(&self) -> Vec<Mode> {
        self.bands
            .iter()
            .filter(|(_, b)| b.iter().any(|v| v.norm() != 0.0))
            .map(|(p, _)| p.clone())
            .collect()
    }

    /// Entry at (row, column) given as linear lattice indices.
    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        let diff: Vec<i64> = self
            .lattice
            .point(row)
            .iter()
            .zip(self.lattice.point(col))
            .map(|(r, c)| r - c)
            .collect();
        let key = self.lattice.canonical_offset(&Mode(diff));
        self.bands.get(&key).map_or(zero(), |b| b[col])
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.lattice, &other.lattice) || *self.lattice == *other.lattice {
            Ok(())
        } else {
            Err(Error::LatticeMismatch)
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            lattice: self.lattice.clone(),
            bands: self
                .bands
                .iter()
                .map(|(p, b)| (p.clone(), b.iter().map(|v| v * factor).collect()))
                .collect(),
        }
    }

    /// `a·self + b·other`
    pub fn linear_combination(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.scale(a);
        for (p, band) in &other.bands {
            out.accumulate_band(p.clone(), band.iter().map(|v| v * b).collect());
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let one = Complex64::new(1.0, 0.0);
        self.linear_combination(one, other, one)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.linear_combination(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    /// Conjugate transpose; band `p` maps to band `−p`.
    pub fn adjoint(&self) -> Self {
        let lattice = &self.lattice;
        let dim = lattice.dim();
        let mut out = Self::zero(lattice.clone());
        for (p, band) in &self.bands {
            let neg = -p;
            let mut adj = vec![zero(); dim];
            for (x, slot) in adj.iter_mut().enumerate() {
                // A*(x − p, x) = conj(A(x, x − p))
                if let Some(src) = lattice.shift(x, &neg) {
                    *slot = band[src].conj();
                }
            }
            out.accumulate_band(lattice.canonical_offset(&neg), adj);
        }
        out
    }

    /// Product `self ∘ other`. Band pairs are reduced in key order so the
    /// result is independent of scheduling.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let lattice = &self.lattice;
        let dim = lattice.dim();
        let mut out = Self::zero(lattice.clone());
        for (b, band_b) in &other.bands {
            // cache of x ↦ x + b
            let shifted: Vec<Option<usize>> = (0..dim).map(|x| lattice.shift(x, b)).collect();
            for (a, band_a) in &self.bands {
                let p = a + b;
                let mut band = vec![zero(); dim];
                for x in 0..dim {
                    if let Some(mid) = shifted[x] {
                        if lattice.shift(mid, a).is_some() {
                            band[x] = band_a[mid] * band_b[x];
                        }
                    }
                }
                out.accumulate_band(lattice.canonical_offset(&p), band);
            }
        }
        Ok(out)
    }

    /// `[A, B] = AB − BA`
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.compose(other)?.sub(&other.compose(self)?)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.bands
            .values()
            .flat_map(|b| b.iter().map(|v| v.norm()))
            .fold(0.0, f64::max)
    }

    /// Largest entrywise deviation from Hermiticity, `max |A − A*|`.
    pub fn hermitian_defect(&self) -> f64 {
        self.sub(&self.adjoint()).map_or(f64::INFINITY, |d| d.max_abs())
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = self.dim();
        let mut m = DMatrix::from_element(dim, dim, zero());
        for (p, band) in &self.bands {
            for (x, v) in band.iter().enumerate() {
                if let Some(row) = self.lattice.shift(x, p) {
                    m[(row, x)] += *v;
                }
            }
        }
        m
    }

    /// Collects the non-zero entries of a dense matrix into bands.
    pub fn from_dense(lattice: Arc<Lattice>, m: &DMatrix<Complex64>) -> Result<Self> {
        let dim = lattice.dim();
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: m.nrows(),
            });
        }
        let mut bands: BTreeMap<Mode, Vec<Complex64>> = BTreeMap::new();
        for col in 0..dim {
            let lc = lattice.point(col);
            for row in 0..dim {
                let v = m[(row, col)];
                if v.norm() == 0.0 {
                    continue;
                }
                let diff: Vec<i64> = lattice.point(row).iter().zip(&lc).map(|(r, c)| r - c).collect();
                let key = lattice.canonical_offset(&Mode(diff));
                bands.entry(key).or_insert_with(|| vec![zero(); dim])[col] = v;
            }
        }
        Ok(Self { lattice, bands })
    }

    /// Writes non-zero entries as `row_l…,col_l…,re,im` CSV lines.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.lattice.n();
        let mut header: Vec<String> = (0..n).map(|i| format!("row_{i}")).collect();
        header.extend((0..n).map(|i| format!("col_{i}")));
        header.push("re".into());
        header.push("im".into());
        writeln!(out, "{}", header.join(","))?;
        for (p, band) in &self.bands {
            for (x, v) in band.iter().enumerate() {
                if v.norm() == 0.0 {
                    continue;
                }
                if let Some(row) = self.lattice.shift(x, p) {
                    let mut fields: Vec<String> =
                        self.lattice.point(row).iter().map(i64::to_string).collect();
                    fields.extend(self.lattice.point(x).iter().map(i64::to_string));
                    fields.push(format!("{:e}", v.re));
                    fields.push(format!("{:e}", v.im));
                    writeln!(out, "{}", fields.join(","))?;
                }
            }
        }
        Ok(())
    }
}
