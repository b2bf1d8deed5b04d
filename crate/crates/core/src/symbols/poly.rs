//! Sparse multivariate polynomials with complex coefficients.
//!
//! Terms are stored in a `BTreeMap` keyed by exponent multi-indices, so all
//! iteration orders (and therefore serialized output and canonical
//! comparisons) are deterministic.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use smallvec::SmallVec;

use crate::{Error, Result};

/// Hard cap on total polynomial degree. Star products and pullbacks of the
/// state classes used here stay far below this; hitting the cap almost always
/// means a runaway computation rather than a legitimate symbol.
pub const DEGREE_CAP: usize = 64;

/// Exponent multi-index of a monomial `x_0^{a_0} ... x_{d-1}^{a_{d-1}}`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(pub SmallVec<[u16; 8]>);

impl MultiIndex {
    /// Zero multi-index (the constant monomial) in dimension `dim`.
    pub fn zeros(dim: usize) -> Self {
        MultiIndex(SmallVec::from_elem(0, dim))
    }

    /// Unit multi-index `e_i`.
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut m = Self::zeros(dim);
        m.0[i] += 1;
        m
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total degree `|a| = sum a_i`.
    pub fn total_degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// Component-wise sum.
    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), other.dim());
        MultiIndex(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(&a, &b)| a + b)
                .collect(),
        )
    }

    /// Concatenation `(a, b)`, used for parameter multi-indices that range
    /// over the variables of two factors at once.
    pub fn concat(&self, other: &MultiIndex) -> MultiIndex {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        MultiIndex(v)
    }

    /// `self - e_i`, or `None` when the entry is already zero.
    pub fn minus_unit(&self, i: usize) -> Option<MultiIndex> {
        if self.0[i] == 0 {
            return None;
        }
        let mut m = self.clone();
        m.0[i] -= 1;
        Some(m)
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

/// Sparse polynomial in `dim` real variables with `Complex64` coefficients.
#[derive(Clone, PartialEq)]
pub struct Poly {
    dim: usize,
    terms: BTreeMap<MultiIndex, Complex64>,
}

impl Poly {
    pub fn zero(dim: usize) -> Self {
        Poly {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: Complex64) -> Self {
        let mut p = Poly::zero(dim);
        if c != Complex64::ZERO {
            p.terms.insert(MultiIndex::zeros(dim), c);
        }
        p
    }

    pub fn one(dim: usize) -> Self {
        Self::constant(dim, Complex64::ONE)
    }

    /// The coordinate monomial `x_i`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        assert!(i < dim, "coordinate index out of range");
        let mut p = Poly::zero(dim);
        p.terms.insert(MultiIndex::unit(dim, i), Complex64::ONE);
        p
    }

    /// Build from explicit terms; repeated multi-indices accumulate.
    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, Complex64)>,
    {
        let mut p = Poly::zero(dim);
        for (idx, c) in terms {
            if idx.dim() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "multi-index of length {} in a {}-variable polynomial",
                    idx.dim(),
                    dim
                )));
            }
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::InvalidInput(
                    "non-finite polynomial coefficient".into(),
                ));
            }
            p.add_term(idx, c);
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, idx: &MultiIndex) -> Complex64 {
        self.terms.get(idx).copied().unwrap_or(Complex64::ZERO)
    }

    /// Total degree; zero polynomial reports 0.
    pub fn total_degree(&self) -> usize {
        self.terms
            .keys()
            .map(MultiIndex::total_degree)
            .max()
            .unwrap_or(0)
    }

    /// Per-variable maximum exponents (upper bound on non-vanishing partials).
    pub fn max_exponents(&self) -> Vec<u16> {
        let mut m = vec![0u16; self.dim];
        for idx in self.terms.keys() {
            for (slot, &e) in m.iter_mut().zip(idx.0.iter()) {
                *slot = (*slot).max(e);
            }
        }
        m
    }

    /// Largest coefficient magnitude (sup norm on coefficients).
    pub fn coeff_sup(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn add_term(&mut self, idx: MultiIndex, c: Complex64) {
        use std::collections::btree_map::Entry;
        match self.terms.entry(idx) {
            Entry::Vacant(e) => {
                if c != Complex64::ZERO {
                    e.insert(c);
                }
            }
            Entry::Occupied(mut e) => {
                let v = *e.get() + c;
                if v == Complex64::ZERO {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
        }
    }

    pub fn add_assign_scaled(&mut self, other: &Poly, s: Complex64) {
        debug_assert_eq!(self.dim, other.dim);
        if s == Complex64::ZERO {
            return;
        }
        for (idx, c) in other.terms.iter() {
            self.add_term(idx.clone(), *c * s);
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut r = self.clone();
        r.add_assign_scaled(other, Complex64::ONE);
        r
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut r = self.clone();
        r.add_assign_scaled(other, -Complex64::ONE);
        r
    }

    pub fn scale(&self, s: Complex64) -> Poly {
        if s == Complex64::ZERO {
            return Poly::zero(self.dim);
        }
        let mut r = self.clone();
        for c in r.terms.values_mut() {
            *c *= s;
        }
        r
    }

    /// Product with total-degree cap enforcement.
    pub fn mul(&self, other: &Poly) -> Result<Poly> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(
                "polynomial product across different variable counts".into(),
            ));
        }
        let degree = self.total_degree() + other.total_degree();
        if !self.is_zero() && !other.is_zero() && degree > DEGREE_CAP {
            return Err(Error::DegreeCapExceeded {
                degree,
                cap: DEGREE_CAP,
            });
        }
        let mut r = Poly::zero(self.dim);
        for (ia, ca) in self.terms.iter() {
            for (ib, cb) in other.terms.iter() {
                r.add_term(ia.plus(ib), *ca * *cb);
            }
        }
        Ok(r)
    }

    /// Partial derivative with respect to variable `i`.
    pub fn differentiate(&self, i: usize) -> Poly {
        assert!(i < self.dim);
        let mut r = Poly::zero(self.dim);
        for (idx, c) in self.terms.iter() {
            if let Some(down) = idx.minus_unit(i) {
                r.add_term(down, *c * Complex64::from(idx.0[i] as f64));
            }
        }
        r
    }

    /// Evaluate at a complex point.
    pub fn eval(&self, x: &DVector<Complex64>) -> Complex64 {
        debug_assert_eq!(x.len(), self.dim);
        let mut acc = Complex64::ZERO;
        for (idx, c) in self.terms.iter() {
            let mut m = *c;
            for (i, &e) in idx.0.iter().enumerate() {
                for _ in 0..e {
                    m *= x[i];
                }
            }
            acc += m;
        }
        acc
    }

    /// Substitute the affine map `x -> S x + d` (exact expansion).
    ///
    /// Each variable `x_i` is replaced by the affine polynomial
    /// `sum_k S[i,k] y_k + d_i`; powers of these affine factors are cached so
    /// that sparse substitution matrices stay cheap.
    pub fn compose_affine(&self, s: &DMatrix<Complex64>, d: &DVector<Complex64>) -> Result<Poly> {
        if s.nrows() != self.dim || s.ncols() != self.dim || d.len() != self.dim {
            return Err(Error::DimensionMismatch(
                "affine substitution shape does not match polynomial dimension".into(),
            ));
        }
        // Affine replacement polynomials for each original variable.
        let mut lines: Vec<Poly> = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let mut l = Poly::constant(self.dim, d[i]);
            for k in 0..self.dim {
                if s[(i, k)] != Complex64::ZERO {
                    l.add_term(MultiIndex::unit(self.dim, k), s[(i, k)]);
                }
            }
            lines.push(l);
        }
        // Cached powers lines[i]^e.
        let maxes = self.max_exponents();
        let mut powers: Vec<Vec<Poly>> = Vec::with_capacity(self.dim);
        for (i, &emax) in maxes.iter().enumerate() {
            let mut ps = vec![Poly::one(self.dim)];
            for e in 1..=emax as usize {
                let next = ps[e - 1].mul(&lines[i])?;
                ps.push(next);
            }
            powers.push(ps);
        }
        let mut r = Poly::zero(self.dim);
        for (idx, c) in self.terms.iter() {
            let mut term = Poly::constant(self.dim, *c);
            for (i, &e) in idx.0.iter().enumerate() {
                if e > 0 {
                    term = term.mul(&powers[i][e as usize])?;
                }
            }
            r.add_assign_scaled(&term, Complex64::ONE);
        }
        Ok(r)
    }

    /// Tensor product: variables of `other` are appended after `self`'s.
    pub fn tensor(&self, other: &Poly) -> Poly {
        let dim = self.dim + other.dim;
        let mut r = Poly::zero(dim);
        for (ia, ca) in self.terms.iter() {
            for (ib, cb) in other.terms.iter() {
                r.add_term(ia.concat(ib), *ca * *cb);
            }
        }
        r
    }

    /// Embed into a larger variable space, mapping variable `i` to
    /// `slots[i]`.
    pub fn embed(&self, dim: usize, slots: &[usize]) -> Result<Poly> {
        if slots.len() != self.dim {
            return Err(Error::DimensionMismatch(
                "slot list does not match polynomial dimension".into(),
            ));
        }
        if slots.iter().any(|&s| s >= dim) {
            return Err(Error::InvalidInput("embedding slot out of range".into()));
        }
        let mut r = Poly::zero(dim);
        for (idx, c) in self.terms.iter() {
            let mut m = MultiIndex::zeros(dim);
            for (&slot, &e) in slots.iter().zip(idx.0.iter()) {
                m.0[slot] += e;
            }
            r.add_term(m, *c);
        }
        Ok(r)
    }

    /// Drop terms with coefficient magnitude at or below `eps`.
    pub fn prune(&self, eps: f64) -> Poly {
        let mut r = Poly::zero(self.dim);
        for (idx, c) in self.terms.iter() {
            if c.norm() > eps {
                r.terms.insert(idx.clone(), *c);
            }
        }
        r
    }

    /// Complex-conjugate all coefficients.
    pub fn conjugate(&self) -> Poly {
        let mut r = Poly::zero(self.dim);
        for (idx, c) in self.terms.iter() {
            r.terms.insert(idx.clone(), c.conj());
        }
        r
    }

    /// Coefficient-wise sup distance between two polynomials.
    pub fn sup_distance(&self, other: &Poly) -> f64 {
        self.sub(other).coeff_sup()
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (idx, c) in self.terms.iter() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6e}{:+.6e}i)", c.re, c.im)?;
            for (i, &e) in idx.0.iter().enumerate() {
                if e > 0 {
                    write!(f, "*x{}^{}", i, e)?;
                }
            }
        }
        Ok(())
    }
}
