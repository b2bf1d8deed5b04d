//! Weyl-Moyal star products on Gaussian-polynomial symbols.
//!
//! Two exact evaluation strategies are provided and cross-validated:
//!
//! * **Terminating series** ([`moyal_star_series`]): the bidifferential
//!   expansion `F exp(κ ∂⃖_i Π^{ij} ∂⃗_j) G`, `κ = iħ/2`, summed over
//!   derivative-pairing matrices. It truncates exactly when either operand
//!   is a plain polynomial (`M = 0`, `b = 0`).
//! * **Gaussian composition** ([`moyal_star_gaussian`]): the closed-form
//!   Gaussian⋆Gaussian law on the doubled variable space, extended to
//!   polynomial prefactors by repeated parameter differentiation of the
//!   closed form with respect to the linear exponents. Exact for any pair
//!   as long as the composition matrix `I + ΣA` is invertible.
//!
//! [`moyal_star`] dispatches between them; [`moyal_star_truncated`] exposes
//! the series cut at a fixed ħ-order as a diagnostic for order-by-order
//! comparisons.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::collections::BTreeMap;

use super::moment::logdet_path;
use super::{GaussPolySymbol, MultiIndex, Poly};
use crate::{Error, Result};

/// Relative tolerance for the antisymmetry check on the Poisson tensor.
const ANTISYMMETRY_TOL: f64 = 1e-12;

fn validate_pair(f: &GaussPolySymbol, g: &GaussPolySymbol, pi: &DMatrix<f64>) -> Result<()> {
    let dim = f.dim();
    if g.dim() != dim {
        return Err(Error::DimensionMismatch(
            "star product operands have different dimensions".into(),
        ));
    }
    if pi.nrows() != dim || pi.ncols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "Poisson tensor is {}x{} for {dim}-dimensional symbols",
            pi.nrows(),
            pi.ncols()
        )));
    }
    let scale = pi.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    for i in 0..dim {
        for j in 0..=i {
            if (pi[(i, j)] + pi[(j, i)]).abs() > ANTISYMMETRY_TOL * scale {
                return Err(Error::InvalidInput(
                    "Poisson tensor must be antisymmetric".into(),
                ));
            }
        }
    }
    if pi.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite Poisson tensor".into()));
    }
    Ok(())
}

fn validate_hbar(hbar: f64) -> Result<()> {
    if !(hbar > 0.0) || !hbar.is_finite() {
        return Err(Error::InvalidInput(
            "hbar must be positive and finite".into(),
        ));
    }
    Ok(())
}

/// Memoized table of repeated derivatives of one symbol; all entries share
/// the base symbol's exponential part.
struct DerivTable<'a> {
    base: &'a GaussPolySymbol,
    memo: BTreeMap<MultiIndex, GaussPolySymbol>,
}

impl<'a> DerivTable<'a> {
    fn new(base: &'a GaussPolySymbol) -> Self {
        DerivTable {
            base,
            memo: BTreeMap::new(),
        }
    }

    fn deriv(&mut self, alpha: &MultiIndex) -> Result<GaussPolySymbol> {
        if alpha.total_degree() == 0 {
            return Ok(self.base.clone());
        }
        if let Some(s) = self.memo.get(alpha) {
            return Ok(s.clone());
        }
        let i = alpha
            .0
            .iter()
            .position(|&e| e > 0)
            .expect("nonzero total degree");
        let prev = self.deriv(&alpha.minus_unit(i).expect("component checked nonzero"))?;
        let d = prev.differentiate(i)?;
        self.memo.insert(alpha.clone(), d.clone());
        Ok(d)
    }
}

/// Shared state for the pairing-matrix enumeration of the series strategy.
struct SeriesEnum<'a, 'b> {
    cells: Vec<(usize, usize, Complex64)>,
    row_cap: Vec<usize>,
    col_cap: Vec<usize>,
    order_cap: usize,
    ftab: DerivTable<'a>,
    gtab: DerivTable<'b>,
    acc: Poly,
}

impl SeriesEnum<'_, '_> {
    fn run(&mut self) -> Result<()> {
        let dim = self.row_cap.len();
        let mut row_used = vec![0usize; dim];
        let mut col_used = vec![0usize; dim];
        self.recurse(0, &mut row_used, &mut col_used, 0, Complex64::ONE)
    }

    fn recurse(
        &mut self,
        idx: usize,
        row_used: &mut [usize],
        col_used: &mut [usize],
        order_used: usize,
        coef: Complex64,
    ) -> Result<()> {
        if idx == self.cells.len() {
            let to_index = |u: &[usize]| MultiIndex(u.iter().map(|&e| e as u16).collect());
            let fd = self.ftab.deriv(&to_index(row_used))?;
            let gd = self.gtab.deriv(&to_index(col_used))?;
            if !fd.poly.is_zero() && !gd.poly.is_zero() {
                let prod = fd.poly.mul(&gd.poly)?;
                self.acc.add_assign_scaled(&prod, coef);
            }
            return Ok(());
        }
        let (i, j, val) = self.cells[idx];
        let cap = (self.row_cap[i] - row_used[i])
            .min(self.col_cap[j] - col_used[j])
            .min(self.order_cap - order_used);
        let mut c = coef;
        for k in 0..=cap {
            if k > 0 {
                c = c * val / Complex64::from(k as f64);
                row_used[i] += 1;
                col_used[j] += 1;
            }
            self.recurse(idx + 1, row_used, col_used, order_used + k, c)?;
        }
        row_used[i] -= cap;
        col_used[j] -= cap;
        Ok(())
    }
}

fn star_series_impl(
    f: &GaussPolySymbol,
    g: &GaussPolySymbol,
    pi: &DMatrix<f64>,
    hbar: f64,
    order_cap: usize,
) -> Result<GaussPolySymbol> {
    let dim = f.dim();
    if f.is_zero() || g.is_zero() {
        return Ok(GaussPolySymbol::polynomial(Poly::zero(dim)));
    }
    let kappa = Complex64::new(0.0, 0.5 * hbar);
    let mut cells = Vec::new();
    for i in 0..dim {
        for j in 0..dim {
            if pi[(i, j)] != 0.0 {
                cells.push((i, j, kappa * Complex64::from(pi[(i, j)])));
            }
        }
    }
    let loose = usize::MAX / 4;
    let cap_of = |s: &GaussPolySymbol| -> Vec<usize> {
        if s.has_trivial_exponent() {
            s.poly.max_exponents().iter().map(|&e| e as usize).collect()
        } else {
            vec![loose; dim]
        }
    };
    let mut state = SeriesEnum {
        cells,
        row_cap: cap_of(f),
        col_cap: cap_of(g),
        order_cap,
        ftab: DerivTable::new(f),
        gtab: DerivTable::new(g),
        acc: Poly::zero(dim),
    };
    state.run()?;
    GaussPolySymbol::new(f.m.clone() + &g.m, f.b.clone() + &g.b, f.c + g.c, state.acc)
}

/// Terminating bidifferential series. Exact; requires at least one operand
/// to be a plain polynomial (trivial exponential part), otherwise the series
/// does not truncate and [`Error::NoApplicableStrategy`] is returned.
pub fn moyal_star_series(
    f: &GaussPolySymbol,
    g: &GaussPolySymbol,
    pi: &DMatrix<f64>,
    hbar: f64,
) -> Result<GaussPolySymbol> {
    validate_pair(f, g, pi)?;
    validate_hbar(hbar)?;
    let order = if f.has_trivial_exponent() {
        f.poly.total_degree()
    } else if g.has_trivial_exponent() {
        g.poly.total_degree()
    } else {
        return Err(Error::NoApplicableStrategy(
            "bidifferential series terminates only against a plain polynomial operand".into(),
        ));
    };
    star_series_impl(f, g, pi, hbar, order)
}

/// Bidifferential series cut at total ħ-order `max_order` (the `k`-th term
/// carries `(iħ/2)^k`). Not exact for two Gaussian operands — this is a
/// diagnostic for order-by-order comparison against the closed form.
pub fn moyal_star_truncated(
    f: &GaussPolySymbol,
    g: &GaussPolySymbol,
    pi: &DMatrix<f64>,
    hbar: f64,
    max_order: usize,
) -> Result<GaussPolySymbol> {
    validate_pair(f, g, pi)?;
    validate_hbar(hbar)?;
    let mut order = max_order;
    if f.has_trivial_exponent() {
        order = order.min(f.poly.total_degree());
    }
    if g.has_trivial_exponent() {
        order = order.min(g.poly.total_degree());
    }
    star_series_impl(f, g, pi, hbar, order)
}

/// Closed-form Gaussian composition engine: carries the doubled-space data
/// and the memoized parameter-derivative polynomials.
struct GaussianComposer {
    /// Symmetrized `(I + ΣA)^{-1} Σ` on the doubled space.
    ws: DMatrix<Complex64>,
    /// Affine polynomials `g_i(x) = ((I+ΣA)^{-1}U x + W β₀)_i`.
    lines: Vec<Poly>,
    memo: BTreeMap<MultiIndex, Poly>,
    dim: usize,
}

impl GaussianComposer {
    /// `h_γ = e^{-φ(0)} ∂_θ^γ exp(θ^T g(x) + ½ θ^T W θ)|_{θ=0}`, computed by
    /// the two-term recurrence obtained from differentiating once.
    fn hermite(&mut self, gamma: &MultiIndex) -> Result<Poly> {
        if gamma.total_degree() == 0 {
            return Ok(Poly::one(self.dim));
        }
        if let Some(p) = self.memo.get(gamma) {
            return Ok(p.clone());
        }
        let i = gamma
            .0
            .iter()
            .position(|&e| e > 0)
            .expect("nonzero total degree");
        let beta = gamma.minus_unit(i).expect("component checked nonzero");
        let prev = self.hermite(&beta)?;
        let mut h = self.lines[i].mul(&prev)?;
        for j in 0..beta.dim() {
            if beta.0[j] > 0 && self.ws[(i, j)] != Complex64::ZERO {
                let sub = beta.minus_unit(j).expect("component checked nonzero");
                let lower = self.hermite(&sub)?;
                h.add_assign_scaled(&lower, self.ws[(i, j)] * Complex64::from(beta.0[j] as f64));
            }
        }
        self.memo.insert(gamma.clone(), h.clone());
        Ok(h)
    }
}

/// Exact Gaussian-composition strategy. Works for any operand pair whose
/// composition matrix `I + ΣA` is invertible with an unambiguous determinant
/// branch; errors with [`Error::SingularStarComposition`] otherwise.
pub fn moyal_star_gaussian(
    f: &GaussPolySymbol,
    g: &GaussPolySymbol,
    pi: &DMatrix<f64>,
    hbar: f64,
) -> Result<GaussPolySymbol> {
    validate_pair(f, g, pi)?;
    validate_hbar(hbar)?;
    let d = f.dim();
    if f.is_zero() || g.is_zero() {
        return Ok(GaussPolySymbol::polynomial(Poly::zero(d)));
    }
    let dd = 2 * d;
    let kappa = Complex64::new(0.0, 0.5 * hbar);

    let mut sigma = DMatrix::<Complex64>::zeros(dd, dd);
    for i in 0..d {
        for j in 0..d {
            let v = kappa * Complex64::from(pi[(i, j)]);
            sigma[(i, d + j)] = v;
            sigma[(d + i, j)] = -v;
        }
    }
    let mut a = DMatrix::<Complex64>::zeros(dd, dd);
    a.view_mut((0, 0), (d, d)).copy_from(&f.m);
    a.view_mut((d, d), (d, d)).copy_from(&g.m);
    let sa = &sigma * &a;
    let gmat = DMatrix::<Complex64>::identity(dd, dd) + &sa;
    let logdet = logdet_path(|t| DMatrix::<Complex64>::identity(dd, dd) + &sa * Complex64::from(t))
        .map_err(|_| {
            Error::SingularStarComposition(
                "composition matrix I + ΣA is singular or its determinant branch is ambiguous"
                    .into(),
            )
        })?;
    let ginv = gmat.lu().try_inverse().ok_or_else(|| {
        Error::SingularStarComposition("composition matrix I + ΣA is not invertible".into())
    })?;
    let w = &ginv * &sigma;
    let ws = (&w + w.transpose()) * Complex64::from(0.5);

    let mut beta = DVector::<Complex64>::zeros(dd);
    beta.rows_mut(0, d).copy_from(&f.b);
    beta.rows_mut(d, d).copy_from(&g.b);

    // (I + ΣA)^{-1} U with U the [I; I] stacking map.
    let mut ginv_u = DMatrix::<Complex64>::zeros(dd, d);
    for r in 0..dd {
        for k in 0..d {
            ginv_u[(r, k)] = ginv[(r, k)] + ginv[(r, d + k)];
        }
    }
    let aginv = &a * &ginv;
    let mut m_out = DMatrix::<Complex64>::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            m_out[(r, c)] =
                aginv[(r, c)] + aginv[(r, d + c)] + aginv[(d + r, c)] + aginv[(d + r, d + c)];
        }
    }
    let m_out = (&m_out + m_out.transpose()) * Complex64::from(0.5);
    let b_out = ginv_u.transpose() * &beta;
    let w_beta = &ws * &beta;
    let c_out =
        f.c + g.c + Complex64::from(0.5) * beta.dot(&w_beta) - Complex64::from(0.5) * logdet;

    let lines = (0..dd)
        .map(|i| {
            let mut line = Poly::constant(d, w_beta[i]);
            for k in 0..d {
                if ginv_u[(i, k)] != Complex64::ZERO {
                    line.add_term(MultiIndex::unit(d, k), ginv_u[(i, k)]);
                }
            }
            line
        })
        .collect();
    let mut composer = GaussianComposer {
        ws,
        lines,
        memo: BTreeMap::new(),
        dim: d,
    };
    let mut acc = Poly::zero(d);
    for (alpha, cf) in f.poly.terms() {
        for (bidx, cg) in g.poly.terms() {
            let gamma = alpha.concat(bidx);
            let h = composer.hermite(&gamma)?;
            acc.add_assign_scaled(&h, *cf * *cg);
        }
    }
    GaussPolySymbol::new(m_out, b_out, c_out, acc)
}

/// Weyl-Moyal star product `F ⋆ G` for the constant Poisson tensor `pi`.
/// Dispatches to the terminating series when a plain-polynomial operand
/// makes it exact, and to the Gaussian composition law otherwise.
pub fn moyal_star(
    f: &GaussPolySymbol,
    g: &GaussPolySymbol,
    pi: &DMatrix<f64>,
    hbar: f64,
) -> Result<GaussPolySymbol> {
    if f.has_trivial_exponent() || g.has_trivial_exponent() {
        moyal_star_series(f, g, pi, hbar)
    } else {
        moyal_star_gaussian(f, g, pi, hbar)
    }
}

/// Star commutator `[F, G]⋆ = F⋆G − G⋆F`. The two products must land in the
/// same exponential class for the subtraction to stay inside the symbol
/// algebra; otherwise [`Error::ExponentMismatch`] is returned (commutator
/// traces can still be formed from the two products separately).
pub fn star_commutator(
    f: &GaussPolySymbol,
    g: &GaussPolySymbol,
    pi: &DMatrix<f64>,
    hbar: f64,
) -> Result<GaussPolySymbol> {
    let fg = moyal_star(f, g, pi, hbar)?;
    let gf = moyal_star(g, f, pi, hbar)?;
    fg.try_sub(&gf)
}

/// Poisson bracket `{F, G} = ∂_i F Π^{ij} ∂_j G` for a constant tensor.
pub fn poisson_bracket(
    f: &GaussPolySymbol,
    g: &GaussPolySymbol,
    pi: &DMatrix<f64>,
) -> Result<GaussPolySymbol> {
    validate_pair(f, g, pi)?;
    let dim = f.dim();
    let mut acc = Poly::zero(dim);
    let mut df: Vec<Option<GaussPolySymbol>> = vec![None; dim];
    let mut dg: Vec<Option<GaussPolySymbol>> = vec![None; dim];
    for i in 0..dim {
        for j in 0..dim {
            if pi[(i, j)] == 0.0 {
                continue;
            }
            if df[i].is_none() {
                df[i] = Some(f.differentiate(i)?);
            }
            if dg[j].is_none() {
                dg[j] = Some(g.differentiate(j)?);
            }
            let fi = df[i].as_ref().expect("just filled");
            let gj = dg[j].as_ref().expect("just filled");
            if fi.poly.is_zero() || gj.poly.is_zero() {
                continue;
            }
            let prod = fi.poly.mul(&gj.poly)?;
            acc.add_assign_scaled(&prod, Complex64::from(pi[(i, j)]));
        }
    }
    GaussPolySymbol::new(f.m.clone() + &g.m, f.b.clone() + &g.b, f.c + g.c, acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Canonical one-pair Poisson tensor with `{p, x} = +1` (so `Π_{px} = 1`,
    /// `Π_{xp} = -1` in the (x, p) variable order used throughout).
    fn pi_canonical() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
    }

    fn x_sym() -> GaussPolySymbol {
        GaussPolySymbol::coordinate(2, 0)
    }

    fn p_sym() -> GaussPolySymbol {
        GaussPolySymbol::coordinate(2, 1)
    }

    fn ground_state(hbar: f64) -> GaussPolySymbol {
        // 2·exp(-(x² + p²)/ħ): the normalized oscillator ground state (ω=1).
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0 / hbar, 2.0 / hbar]))
            .map(Complex64::from);
        GaussPolySymbol::gaussian(m, DVector::zeros(2), Complex64::from(2.0_f64.ln())).unwrap()
    }

    #[test]
    fn first_order_products_follow_the_tensor_orientation() {
        let hbar = 0.5;
        let pi = pi_canonical();
        let xp = moyal_star(&x_sym(), &p_sym(), &pi, hbar).unwrap();
        // x ⋆ p = xp + (iħ/2)Π_{xp} = xp − iħ/2 under {p, x} = +1.
        let mut expect = Poly::coordinate(2, 0).mul(&Poly::coordinate(2, 1)).unwrap();
        expect.add_term(MultiIndex::zeros(2), Complex64::new(0.0, -hbar / 2.0));
        assert!(
            xp.poly().sup_distance(&expect) < 1e-15,
            "x⋆p must equal xp - iħ/2 for this orientation"
        );
        // Flip the tensor: the imaginary part must flip with it.
        let flipped = moyal_star(&x_sym(), &p_sym(), &(-pi.clone()), hbar).unwrap();
        let mut expect_f = Poly::coordinate(2, 0).mul(&Poly::coordinate(2, 1)).unwrap();
        expect_f.add_term(MultiIndex::zeros(2), Complex64::new(0.0, hbar / 2.0));
        assert!(flipped.poly().sup_distance(&expect_f) < 1e-15);
    }

    #[test]
    fn canonical_commutator() {
        let hbar = 0.7;
        let comm = star_commutator(&p_sym(), &x_sym(), &pi_canonical(), hbar).unwrap();
        let expect = GaussPolySymbol::constant(2, Complex64::new(0.0, hbar));
        assert!(
            comm.distance(&expect) < 1e-15,
            "[p, x]⋆ = iħ under {{p, x}} = +1"
        );
        let self_comm = star_commutator(&x_sym(), &x_sym(), &pi_canonical(), hbar).unwrap();
        assert!(self_comm.coeff_sup() < 1e-15, "[F, F]⋆ = 0");
    }

    #[test]
    fn unit_is_neutral_for_both_strategies() {
        let one = GaussPolySymbol::constant(2, Complex64::ONE);
        let rho = ground_state(0.9);
        let pi = pi_canonical();
        for prod in [
            moyal_star(&rho, &one, &pi, 0.9).unwrap(),
            moyal_star(&one, &rho, &pi, 0.9).unwrap(),
            moyal_star_gaussian(&rho, &one, &pi, 0.9).unwrap(),
            moyal_star_gaussian(&one, &rho, &pi, 0.9).unwrap(),
        ] {
            assert!(
                prod.distance(&rho) < 1e-12,
                "F ⋆ 1 = 1 ⋆ F = F, distance {}",
                prod.distance(&rho)
            );
        }
    }

    #[test]
    fn ground_state_is_an_eigenvector_of_the_hamiltonian() {
        // H ⋆ ρ₀ = (ħ/2) ρ₀ for H = (p² + x²)/2, ω = 1.
        let hbar = 1.0;
        let q = DMatrix::identity(2, 2);
        let h = GaussPolySymbol::quadratic_form(&q, &DVector::zeros(2), 0.0).unwrap();
        let rho = ground_state(hbar);
        let pi = pi_canonical();
        for prod in [
            moyal_star(&h, &rho, &pi, hbar).unwrap(),
            moyal_star_gaussian(&h, &rho, &pi, hbar).unwrap(),
        ] {
            let expect = rho.scale(Complex64::from(hbar / 2.0));
            assert!(
                prod.distance(&expect) < 1e-12,
                "H⋆ρ₀ = (ħ/2)ρ₀, distance {}",
                prod.distance(&expect)
            );
        }
    }

    #[test]
    fn strategies_agree_on_gaussian_times_polynomial() {
        let hbar = 0.6;
        let pi = pi_canonical();
        let m = DMatrix::from_row_slice(2, 2, &[1.4, 0.3, 0.3, 0.9]).map(Complex64::from);
        let b = DVector::from_vec(vec![Complex64::new(0.2, 0.1), Complex64::new(-0.4, 0.0)]);
        let mut p = Poly::one(2);
        p.add_term(
            MultiIndex(vec![2, 1].into_iter().collect()),
            Complex64::new(0.7, -0.2),
        );
        let f = GaussPolySymbol::new(m, b, Complex64::new(0.1, 0.05), p).unwrap();
        let mut q = Poly::coordinate(2, 1);
        q.add_term(
            MultiIndex(vec![3, 0].into_iter().collect()),
            Complex64::new(-0.5, 0.3),
        );
        let g = GaussPolySymbol::polynomial(q);

        for (lhs, rhs) in [(&f, &g), (&g, &f)] {
            let series = moyal_star_series(lhs, rhs, &pi, hbar).unwrap();
            let closed = moyal_star_gaussian(lhs, rhs, &pi, hbar).unwrap();
            assert!(
                series.distance(&closed) < 1e-11,
                "series and closed form differ by {}",
                series.distance(&closed)
            );
        }
    }

    #[test]
    fn closed_form_matches_truncated_series_for_small_hbar() {
        let pi = pi_canonical();
        let m1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.8]).map(Complex64::from);
        let m2 = DMatrix::from_row_slice(2, 2, &[0.9, -0.1, -0.1, 1.1]).map(Complex64::from);
        let b1 = DVector::from_vec(vec![Complex64::from(0.3), Complex64::from(-0.2)]);
        let b2 = DVector::from_vec(vec![Complex64::from(-0.1), Complex64::from(0.25)]);
        let f = GaussPolySymbol::gaussian(m1, b1, Complex64::ZERO).unwrap();
        let g = GaussPolySymbol::gaussian(m2, b2, Complex64::ZERO).unwrap();
        let hbar = 0.08;
        let closed = moyal_star_gaussian(&f, &g, &pi, hbar).unwrap();
        let err_at = |order: usize| {
            let trunc = moyal_star_truncated(&f, &g, &pi, hbar, order).unwrap();
            // Compare pointwise on a small grid: the truncated series is not
            // a Gaussian-exponent match for the closed form, so coefficient
            // distance does not apply.
            let mut worst = 0.0_f64;
            for &x in &[-0.7, -0.2, 0.4, 0.9] {
                for &p in &[-0.5, 0.1, 0.8] {
                    let pt = DVector::from_vec(vec![x, p]);
                    let d = (closed.eval_real(&pt) - trunc.eval_real(&pt)).norm();
                    worst = worst.max(d);
                }
            }
            worst
        };
        let e2 = err_at(2);
        let e4 = err_at(4);
        let e6 = err_at(6);
        assert!(
            e6 < 1e-7 && e6 < e4 && e4 < e2,
            "ħ-expansion must converge to the closed form: e2={e2:.3e} e4={e4:.3e} e6={e6:.3e}"
        );
    }

    #[test]
    fn hermitian_symmetry_of_the_product() {
        let hbar = 0.5;
        let pi = pi_canonical();
        let m = DMatrix::from_row_slice(2, 2, &[1.2, 0.1, 0.1, 1.0]);
        let mc = m.map(|v| Complex64::new(v, 0.3 * v));
        let b = DVector::from_vec(vec![Complex64::new(0.1, -0.2), Complex64::new(0.0, 0.15)]);
        let mut p = Poly::one(2);
        p.add_term(
            MultiIndex(vec![1, 1].into_iter().collect()),
            Complex64::new(0.4, 0.6),
        );
        let f = GaussPolySymbol::new(mc, b, Complex64::new(0.0, 0.2), p).unwrap();
        let g = ground_state(hbar);
        let fg = moyal_star(&f, &g, &pi, hbar).unwrap();
        let gc_fc = moyal_star(&g.conjugate(), &f.conjugate(), &pi, hbar).unwrap();
        assert!(
            fg.conjugate().distance(&gc_fc) < 1e-12,
            "conj(F⋆G) = conj(G)⋆conj(F), distance {}",
            fg.conjugate().distance(&gc_fc)
        );
    }

    #[test]
    fn mixed_strategy_associativity() {
        let hbar = 0.75;
        let pi = pi_canonical();
        let rho = ground_state(hbar);
        let left = moyal_star(
            &moyal_star(&x_sym(), &rho, &pi, hbar).unwrap(),
            &p_sym(),
            &pi,
            hbar,
        )
        .unwrap();
        let right = moyal_star(
            &x_sym(),
            &moyal_star(&rho, &p_sym(), &pi, hbar).unwrap(),
            &pi,
            hbar,
        )
        .unwrap();
        assert!(
            left.distance(&right) < 1e-12,
            "(x⋆ρ)⋆p = x⋆(ρ⋆p), distance {}",
            left.distance(&right)
        );
    }

    #[test]
    fn poisson_bracket_orientation_and_leading_order() {
        let pi = pi_canonical();
        let br = poisson_bracket(&p_sym(), &x_sym(), &pi).unwrap();
        let one = GaussPolySymbol::constant(2, Complex64::ONE);
        assert!(br.distance(&one) < 1e-15, "{{p, x}} = +1");
        // (F⋆G − F·G)/(iħ/2) → {F,G} as ħ → 0 on polynomials (here exact at
        // first order because the series for linear × quadratic stops there).
        let hbar = 1e-3;
        let f = GaussPolySymbol::quadratic_form(
            &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            &DVector::zeros(2),
            0.0,
        )
        .unwrap();
        let fg = moyal_star(&f, &x_sym(), &pi, hbar).unwrap();
        let point = f.pointwise_mul(&x_sym()).unwrap();
        // f = xp ⇒ f·x has polynomial x²p; {f, x} = ∂_p(xp)·{p,x}-column…
        let bracket = poisson_bracket(&f, &x_sym(), &pi).unwrap();
        let diff = fg
            .try_sub(&point)
            .unwrap()
            .scale(Complex64::new(0.0, -2.0 / hbar));
        assert!(
            diff.distance(&bracket) < 1e-12,
            "leading star correction reproduces the Poisson bracket"
        );
    }
}
