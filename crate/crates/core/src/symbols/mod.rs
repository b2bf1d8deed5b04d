//! Exact Gaussian-polynomial symbol calculus.
//!
//! A symbol is a phase-space function
//!
//! ```text
//! F(x) = exp(-1/2 x^T M x + b^T x + c) * P(x),      x in R^dim,
//! ```
//!
//! with complex symmetric `M`, complex `b`, `c` and a sparse polynomial `P`.
//! The class is closed under pointwise products, derivatives, affine
//! pullbacks, Gaussian moments and Weyl star products, which is what makes
//! every pipeline in this crate exact up to floating-point round-off: no
//! phase-space grids are involved anywhere.

mod moment;
mod poly;
mod star;

pub use moment::{gaussian_moment, trace_at, ComplexQuadraticForm};
pub use poly::{MultiIndex, Poly, DEGREE_CAP};
pub use star::{
    moyal_star, moyal_star_gaussian, moyal_star_series, moyal_star_truncated, poisson_bracket,
    star_commutator,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance used when checking that an exponent matrix is symmetric and when
/// deciding whether two exponential parts agree for linear combination.
const EXPONENT_MATCH_TOL: f64 = 1e-9;

/// Gaussian-polynomial phase-space symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussPolySymbol {
    dim: usize,
    m: DMatrix<Complex64>,
    b: DVector<Complex64>,
    c: Complex64,
    poly: Poly,
}

impl GaussPolySymbol {
    /// General constructor; `m` must be symmetric within round-off and all
    /// data finite. `m` is symmetrized exactly on the way in.
    pub fn new(
        m: DMatrix<Complex64>,
        b: DVector<Complex64>,
        c: Complex64,
        poly: Poly,
    ) -> Result<Self> {
        let dim = poly.dim();
        if m.nrows() != dim || m.ncols() != dim || b.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "exponent data {}x{} / {} for a {}-variable polynomial",
                m.nrows(),
                m.ncols(),
                b.len(),
                dim
            )));
        }
        let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (m[(i, j)] - m[(j, i)]).norm() > EXPONENT_MATCH_TOL * scale {
                    return Err(Error::InvalidInput(
                        "exponent matrix is not symmetric".into(),
                    ));
                }
            }
        }
        let finite = m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
            && b.iter().all(|z| z.re.is_finite() && z.im.is_finite())
            && c.re.is_finite()
            && c.im.is_finite();
        if !finite {
            return Err(Error::InvalidInput("non-finite exponent data".into()));
        }
        let mut sym = m.clone();
        for i in 0..dim {
            for j in 0..dim {
                sym[(i, j)] = (m[(i, j)] + m[(j, i)]) * Complex64::from(0.5);
            }
        }
        Ok(GaussPolySymbol {
            dim,
            m: sym,
            b,
            c,
            poly,
        })
    }

    /// Pure polynomial symbol (trivial exponential part).
    pub fn polynomial(poly: Poly) -> Self {
        let dim = poly.dim();
        GaussPolySymbol {
            dim,
            m: DMatrix::zeros(dim, dim),
            b: DVector::zeros(dim),
            c: Complex64::ZERO,
            poly,
        }
    }

    /// Constant symbol.
    pub fn constant(dim: usize, value: Complex64) -> Self {
        Self::polynomial(Poly::constant(dim, value))
    }

    /// Coordinate symbol `x_i`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        Self::polynomial(Poly::coordinate(dim, i))
    }

    /// Pure Gaussian `exp(-1/2 x^T M x + b^T x + c)`.
    pub fn gaussian(m: DMatrix<Complex64>, b: DVector<Complex64>, c: Complex64) -> Result<Self> {
        let dim = b.len();
        Self::new(m, b, c, Poly::one(dim))
    }

    /// Gaussian with real exponent data.
    pub fn gaussian_real(m: &DMatrix<f64>, b: &DVector<f64>, c: f64) -> Result<Self> {
        Self::gaussian(m.map(Complex64::from), b.map(Complex64::from), c.into())
    }

    /// Quadratic-form polynomial symbol `1/2 x^T Q x + l^T x + c0` (no
    /// exponential part); handy for Hamiltonians and observables.
    pub fn quadratic_form(q: &DMatrix<f64>, l: &DVector<f64>, c0: f64) -> Result<Self> {
        let dim = l.len();
        if q.nrows() != dim || q.ncols() != dim {
            return Err(Error::DimensionMismatch(
                "quadratic form shape mismatch".into(),
            ));
        }
        let mut p = Poly::constant(dim, Complex64::from(c0));
        for i in 0..dim {
            if l[i] != 0.0 {
                p.add_term(MultiIndex::unit(dim, i), Complex64::from(l[i]));
            }
            for j in 0..dim {
                let coeff = 0.5 * 0.5 * (q[(i, j)] + q[(j, i)]);
                if coeff != 0.0 {
                    let idx = MultiIndex::unit(dim, i).plus(&MultiIndex::unit(dim, j));
                    p.add_term(idx, Complex64::from(coeff));
                }
            }
        }
        Ok(Self::polynomial(p))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn exponent_matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn exponent_linear(&self) -> &DVector<Complex64> {
        &self.b
    }

    pub fn exponent_constant(&self) -> Complex64 {
        self.c
    }

    pub fn poly(&self) -> &Poly {
        &self.poly
    }

    /// True when the exponential part is exactly trivial (`M = 0`, `b = 0`),
    /// i.e. the symbol is a plain polynomial up to the constant factor
    /// `exp(c)`. This is the condition under which the bidifferential
    /// star-product series terminates.
    pub fn has_trivial_exponent(&self) -> bool {
        self.m.iter().all(|z| *z == Complex64::ZERO) && self.b.iter().all(|z| *z == Complex64::ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.poly.is_zero()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        GaussPolySymbol {
            poly: self.poly.scale(s),
            ..self.clone()
        }
    }

    /// Whether the exponential parts of two symbols agree closely enough for
    /// linear combination. The scalar `c` is allowed to differ: the
    /// difference is folded into the polynomial as `exp(c1 - c2)`.
    fn exponent_compatible(&self, other: &Self) -> bool {
        if self.dim != other.dim {
            return false;
        }
        let scale = self
            .m
            .iter()
            .chain(other.m.iter())
            .map(|z| z.norm())
            .fold(1.0, f64::max);
        let bscale = self
            .b
            .iter()
            .chain(other.b.iter())
            .map(|z| z.norm())
            .fold(1.0, f64::max);
        let dm = (&self.m - &other.m)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let db = (&self.b - &other.b)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        dm <= EXPONENT_MATCH_TOL * scale && db <= EXPONENT_MATCH_TOL * bscale
    }

    /// Linear combination `self + s * other`; requires matching exponential
    /// parts (`M`, `b` within tolerance; differing `c` is folded into the
    /// polynomial factor).
    pub fn try_add_scaled(&self, other: &Self, s: Complex64) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(
                "adding symbols of different dimension".into(),
            ));
        }
        // Adding zero never needs compatibility.
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.is_zero() {
            return Ok(other.scale(s));
        }
        if !self.exponent_compatible(other) {
            return Err(Error::ExponentMismatch(
                "linear combination of symbols with different exponential parts".into(),
            ));
        }
        let fold = (other.c - self.c).exp();
        let mut poly = self.poly.clone();
        poly.add_assign_scaled(&other.poly, s * fold);
        Ok(GaussPolySymbol {
            poly,
            ..self.clone()
        })
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.try_add_scaled(other, Complex64::ONE)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.try_add_scaled(other, -Complex64::ONE)
    }

    /// Pointwise product: exponential parts add, polynomials multiply.
    pub fn pointwise_mul(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(
                "pointwise product across dimensions".into(),
            ));
        }
        Ok(GaussPolySymbol {
            dim: self.dim,
            m: &self.m + &other.m,
            b: &self.b + &other.b,
            c: self.c + other.c,
            poly: self.poly.mul(&other.poly)?,
        })
    }

    /// Partial derivative with respect to `x_i`; stays in the class:
    /// `d_i (e^E P) = e^E ((b - M x)_i P + d_i P)`.
    pub fn differentiate(&self, i: usize) -> Result<Self> {
        if i >= self.dim {
            return Err(Error::InvalidInput("derivative index out of range".into()));
        }
        let mut lin = Poly::constant(self.dim, self.b[i]);
        for j in 0..self.dim {
            if self.m[(i, j)] != Complex64::ZERO {
                lin.add_term(MultiIndex::unit(self.dim, j), -self.m[(i, j)]);
            }
        }
        let poly = lin.mul(&self.poly)?.add(&self.poly.differentiate(i));
        Ok(GaussPolySymbol {
            poly,
            ..self.clone()
        })
    }

    /// Evaluate at a real point.
    pub fn eval_real(&self, x: &DVector<f64>) -> Complex64 {
        self.eval(&x.map(Complex64::from))
    }

    /// Evaluate at a complex point.
    pub fn eval(&self, x: &DVector<Complex64>) -> Complex64 {
        debug_assert_eq!(x.len(), self.dim);
        let mut e = self.c;
        for i in 0..self.dim {
            e += self.b[i] * x[i];
            let mut q = Complex64::ZERO;
            for j in 0..self.dim {
                q += self.m[(i, j)] * x[j];
            }
            e -= Complex64::from(0.5) * x[i] * q;
        }
        e.exp() * self.poly.eval(x)
    }

    /// Affine pullback `x -> F(S (x - d))`, exact in the class.
    pub fn affine_pullback(&self, s: &DMatrix<f64>, d: &DVector<f64>) -> Result<Self> {
        self.affine_pullback_complex(&s.map(Complex64::from), &d.map(Complex64::from))
    }

    /// Complex-coefficient affine pullback (used internally for moment
    /// computations with complex shifts).
    pub fn affine_pullback_complex(
        &self,
        s: &DMatrix<Complex64>,
        d: &DVector<Complex64>,
    ) -> Result<Self> {
        if s.nrows() != self.dim || s.ncols() != self.dim || d.len() != self.dim {
            return Err(Error::DimensionMismatch(
                "pullback map shape does not match symbol dimension".into(),
            ));
        }
        // With y = S(x - d): -1/2 y^T M y + b^T y
        //   = -1/2 x^T (S^T M S) x + (S^T M S d + S^T b)^T x
        //     - 1/2 d^T S^T M S d - b^T S d.
        let sms = s.transpose() * &self.m * s;
        let smsd = &sms * d;
        let stb = s.transpose() * &self.b;
        let new_b = &smsd + &stb;
        let mut new_c = self.c;
        new_c -= Complex64::from(0.5) * d.dot(&smsd);
        new_c -= stb.dot(d);
        // Polynomial part: P(S x - S d).
        let shift = -(s * d);
        let poly = self.poly.compose_affine(s, &shift)?;
        GaussPolySymbol::new(sms, new_b, new_c, poly)
    }

    /// Tensor product on the concatenated variable space.
    pub fn tensor(&self, other: &Self) -> Self {
        let dim = self.dim + other.dim;
        let mut m = DMatrix::zeros(dim, dim);
        m.view_mut((0, 0), (self.dim, self.dim)).copy_from(&self.m);
        m.view_mut((self.dim, self.dim), (other.dim, other.dim))
            .copy_from(&other.m);
        let mut b = DVector::zeros(dim);
        b.rows_mut(0, self.dim).copy_from(&self.b);
        b.rows_mut(self.dim, other.dim).copy_from(&other.b);
        GaussPolySymbol {
            dim,
            m,
            b,
            c: self.c + other.c,
            poly: self.poly.tensor(&other.poly),
        }
    }

    /// Complex conjugate of the symbol as a function of real variables.
    pub fn conjugate(&self) -> Self {
        GaussPolySymbol {
            dim: self.dim,
            m: self.m.map(|z| z.conj()),
            b: self.b.map(|z| z.conj()),
            c: self.c.conj(),
            poly: self.poly.conjugate(),
        }
    }

    /// Polynomial with the scalar exponent folded in (`exp(c) * P`). This is
    /// the canonical gauge used for comparisons: the split between `c` and an
    /// overall polynomial factor is not unique.
    pub fn folded_poly(&self) -> Poly {
        self.poly.scale(self.c.exp())
    }

    /// Sup norm over canonicalized coefficients; usable as a residual size
    /// for symbols that are expected to vanish.
    pub fn coeff_sup(&self) -> f64 {
        self.folded_poly().coeff_sup()
    }

    /// Canonicalized coefficient-wise distance: max over entries of `M`, `b`
    /// and the folded polynomial coefficients. Zero symbols compare equal to
    /// zero symbols regardless of their (irrelevant) exponential data.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "distance across dimensions");
        let pz = self.folded_poly();
        let qz = other.folded_poly();
        let dp = pz.sup_distance(&qz);
        if pz.is_zero() && qz.is_zero() {
            return 0.0;
        }
        if pz.is_zero() || qz.is_zero() {
            // Comparing against zero: only polynomial content matters.
            return dp;
        }
        let dm = (&self.m - &other.m)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let db = (&self.b - &other.b)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        dp.max(dm).max(db)
    }

    /// Approximate equality under canonicalization.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim == other.dim && self.distance(other) <= tol
    }

    /// Serialize to a JSON value (exponent data as arrays, polynomial as a
    /// list of `[exponents, re, im]` rows).
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(SymbolDto::from(self)).expect("symbol serialization cannot fail")
    }

    /// Inverse of [`GaussPolySymbol::to_json`].
    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let dto: SymbolDto = serde_json::from_value(v.clone())
            .map_err(|e| Error::InvalidInput(format!("symbol JSON: {e}")))?;
        dto.try_into()
    }
}

/// Serialization shape for [`GaussPolySymbol`].
#[derive(Serialize, Deserialize)]
struct SymbolDto {
    dim: usize,
    /// Row-major matrix of `[re, im]` pairs.
    m: Vec<Vec<[f64; 2]>>,
    b: Vec<[f64; 2]>,
    c: [f64; 2],
    /// Terms as `[exponents..., re, im]` triples.
    p: Vec<(Vec<u16>, f64, f64)>,
}

impl From<&GaussPolySymbol> for SymbolDto {
    fn from(s: &GaussPolySymbol) -> Self {
        let dim = s.dim;
        let m = (0..dim)
            .map(|i| (0..dim).map(|j| [s.m[(i, j)].re, s.m[(i, j)].im]).collect())
            .collect();
        let b = (0..dim).map(|i| [s.b[i].re, s.b[i].im]).collect();
        let p = s
            .poly
            .terms()
            .map(|(idx, c)| (idx.0.to_vec(), c.re, c.im))
            .collect();
        SymbolDto {
            dim,
            m,
            b,
            c: [s.c.re, s.c.im],
            p,
        }
    }
}

impl TryFrom<SymbolDto> for GaussPolySymbol {
    type Error = Error;

    fn try_from(dto: SymbolDto) -> Result<Self> {
        let dim = dto.dim;
        if dto.m.len() != dim || dto.m.iter().any(|r| r.len() != dim) || dto.b.len() != dim {
            return Err(Error::InvalidInput("symbol JSON shape mismatch".into()));
        }
        let m = DMatrix::from_fn(dim, dim, |i, j| {
            Complex64::new(dto.m[i][j][0], dto.m[i][j][1])
        });
        let b = DVector::from_fn(dim, |i, _| Complex64::new(dto.b[i][0], dto.b[i][1]));
        let poly = Poly::from_terms(
            dim,
            dto.p
                .into_iter()
                .map(|(e, re, im)| (MultiIndex(e.into_iter().collect()), Complex64::new(re, im))),
        )?;
        GaussPolySymbol::new(m, b, Complex64::new(dto.c[0], dto.c[1]), poly)
    }
}
