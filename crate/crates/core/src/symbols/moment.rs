//! Exact Gaussian moments and the trace functional.
//!
//! Everything here reduces to one identity: for complex symmetric `M` with
//! positive-definite real part,
//!
//! ```text
//! ∫ exp(-1/2 x^T M x + b^T x) P(x) dx
//!   = (2π)^{d/2} det(M)^{-1/2} exp(1/2 b^T M^{-1} b) E[P(μ + w)],
//! ```
//!
//! with `μ = M^{-1} b` and `E` the zero-mean Gaussian expectation with
//! covariance `M^{-1}`, evaluated exactly by the Wick/Isserlis pairing
//! recurrence. The determinant branch is continued analytically from the
//! real-part matrix, so the result stays correct even when `arg det M`
//! leaves the principal strip.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::{GaussPolySymbol, MultiIndex, Poly};
use crate::{Error, Result};

/// Quadratic exponent data `exp(-1/2 x^T matrix x + shift^T x + offset)`
/// destined for integration.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexQuadraticForm {
    pub matrix: DMatrix<Complex64>,
    pub shift: DVector<Complex64>,
    pub offset: Complex64,
}

impl ComplexQuadraticForm {
    pub fn new(matrix: DMatrix<Complex64>, shift: DVector<Complex64>, offset: Complex64) -> Self {
        ComplexQuadraticForm {
            matrix,
            shift,
            offset,
        }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }
}

impl From<&GaussPolySymbol> for ComplexQuadraticForm {
    fn from(s: &GaussPolySymbol) -> Self {
        ComplexQuadraticForm {
            matrix: s.exponent_matrix().clone(),
            shift: s.exponent_linear().clone(),
            offset: s.exponent_constant(),
        }
    }
}

/// Natural logarithm of `det f(s)` at `s = 1`, continued along the path
/// `s ∈ [0, 1]`. Requires `det f(0)` real and positive (the branch anchor).
/// The step count is refined until no step rotates the determinant by more
/// than π/2, which pins the winding unambiguously.
pub(crate) fn logdet_path<F>(f: F) -> Result<Complex64>
where
    F: Fn(f64) -> DMatrix<Complex64>,
{
    let det_at = |s: f64| f(s).lu().determinant();
    let d0 = det_at(0.0);
    if d0.re <= 0.0 || d0.im.abs() > 1e-9 * d0.re.abs().max(1.0) {
        return Err(Error::SingularMatrix(
            "determinant continuation needs a positive real anchor".into(),
        ));
    }
    let mut n = 8usize;
    loop {
        let mut prev = d0;
        let mut log = Complex64::new(d0.re.ln(), 0.0);
        let mut ok = true;
        for k in 1..=n {
            let d = det_at(k as f64 / n as f64);
            if d == Complex64::ZERO {
                return Err(Error::SingularMatrix(
                    "determinant vanishes along continuation path".into(),
                ));
            }
            let ratio = d / prev;
            if ratio.arg().abs() > 0.5 * PI || !ratio.norm().is_finite() {
                ok = false;
                break;
            }
            log += ratio.ln();
            prev = d;
        }
        if ok {
            return Ok(log);
        }
        n *= 2;
        if n > 1 << 15 {
            return Err(Error::SingularMatrix(
                "determinant continuation did not stabilize".into(),
            ));
        }
    }
}

/// Zero-mean Gaussian monomial moments `E[w^γ]` with covariance `sigma`,
/// memoized over the sub-index lattice via the Wick pairing recurrence
/// `E[w_i w^β] = Σ_j sigma_{ij} β_j E[w^{β - e_j}]`.
fn wick_moment(
    gamma: &MultiIndex,
    sigma: &DMatrix<Complex64>,
    memo: &mut BTreeMap<MultiIndex, Complex64>,
) -> Complex64 {
    if gamma.total_degree() == 0 {
        return Complex64::ONE;
    }
    if gamma.total_degree() % 2 == 1 {
        return Complex64::ZERO;
    }
    if let Some(v) = memo.get(gamma) {
        return *v;
    }
    let i = gamma
        .0
        .iter()
        .position(|&e| e > 0)
        .expect("nonzero degree index");
    let beta = gamma.minus_unit(i).expect("component checked nonzero");
    let mut acc = Complex64::ZERO;
    for j in 0..beta.dim() {
        if beta.0[j] > 0 && sigma[(i, j)] != Complex64::ZERO {
            let sub = beta.minus_unit(j).expect("component checked nonzero");
            acc +=
                sigma[(i, j)] * Complex64::from(beta.0[j] as f64) * wick_moment(&sub, sigma, memo);
        }
    }
    memo.insert(gamma.clone(), acc);
    acc
}

/// Exact value of `∫ exp(-1/2 x^T M x + b^T x + offset) P(x) dx` over all of
/// `R^dim`. Errors with [`Error::DivergentIntegral`] unless `Re(M)` is
/// positive definite.
pub fn gaussian_moment(q: &ComplexQuadraticForm, p: &Poly) -> Result<Complex64> {
    let dim = q.dim();
    if q.matrix.nrows() != dim || q.matrix.ncols() != dim || p.dim() != dim {
        return Err(Error::DimensionMismatch(
            "quadratic form and polynomial dimensions differ".into(),
        ));
    }
    if p.is_zero() {
        return Ok(Complex64::ZERO);
    }
    let re_m = q.matrix.map(|z| z.re);
    let re_sym = (&re_m + re_m.transpose()) * 0.5;
    if re_sym.clone().cholesky().is_none() {
        return Err(Error::DivergentIntegral(
            "real part of the exponent matrix is not positive definite".into(),
        ));
    }
    let lu = q.matrix.clone().lu();
    let mu = lu
        .solve(&q.shift)
        .ok_or_else(|| Error::SingularMatrix("exponent matrix unexpectedly singular".into()))?;
    let sigma = lu
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("exponent matrix unexpectedly singular".into()))?;
    // Branch-safe det(M)^{-1/2}: continue from the positive-definite real
    // part, along which the determinant never vanishes.
    let im_m = q.matrix.map(|z| Complex64::new(0.0, z.im));
    let re_c = re_sym.map(Complex64::from);
    let logdet = logdet_path(|s| &re_c + &im_m * Complex64::from(s))?;

    let shifted = p.compose_affine(&DMatrix::identity(dim, dim), &mu)?;
    let mut memo = BTreeMap::new();
    let mut expect = Complex64::ZERO;
    for (idx, coeff) in shifted.terms() {
        expect += *coeff * wick_moment(idx, &sigma, &mut memo);
    }
    let log_norm = q.offset
        + Complex64::from(0.5) * q.shift.dot(&mu)
        + Complex64::from(0.5 * dim as f64) * Complex64::from((2.0 * PI).ln())
        - Complex64::from(0.5) * logdet;
    Ok(log_norm.exp() * expect)
}

/// Trace functional: `(2πħ)^{-n} Δ ∫ F(x) dx` with `dim = 2n` and `Δ` the
/// Liouville density `√det Ω`. The integral must converge, i.e. the real
/// part of the symbol's exponent matrix must be positive definite.
pub fn trace_at(f: &GaussPolySymbol, delta: f64, hbar: f64) -> Result<Complex64> {
    if !f.dim().is_multiple_of(2) {
        return Err(Error::InvalidInput(
            "trace requires an even phase-space dimension".into(),
        ));
    }
    if !(delta > 0.0) || !(hbar > 0.0) {
        return Err(Error::InvalidInput(
            "trace requires positive density and hbar".into(),
        ));
    }
    let n = f.dim() / 2;
    let moment = gaussian_moment(&ComplexQuadraticForm::from(f), f.poly())?;
    Ok(moment * delta / (2.0 * PI * hbar).powi(n as i32))
}
