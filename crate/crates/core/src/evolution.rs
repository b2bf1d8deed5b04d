//! State evolution and expectation-value pipelines.
//!
//! States evolve by the exact affine pullback `ρ(t, x) = ρ₀(Λ(t)[x − v(t)])`
//! along the classical flow — never by integrating the evolution equation as
//! a PDE. The quantum Liouville equation is kept as a *residual check*: for
//! quadratic pseudo-Hamiltonians the pullback satisfies
//! `iħ·D_tρ + [ρ, H]_⋆t = 0` up to the accuracy of the finite-difference
//! time stencil, and [`quantum_liouville_residual`] measures exactly that.
//!
//! Expectation values are trace pairings `⟨F⟩(t) = Tr_t(F ⋆_t ρ(t))` with the
//! time-dependent Poisson tensor and Liouville weight; an equivalent
//! transported route `Tr₀((F∘Γ_t) ⋆₀ ρ₀)` is provided for long horizons,
//! where pulling the observable back instead of the state keeps every
//! coefficient bounded.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::linsys::FlowSolution;
use crate::symbols::{
    moyal_star, poisson_bracket, star_commutator, trace_at, GaussPolySymbol, MultiIndex, Poly,
};
use crate::symplectic::SymplecticStructure;
use crate::{Error, Result};

/// Default finite-difference step for time derivatives: cube-root-of-epsilon
/// scaling, which balances truncation against round-off for second-order
/// central stencils.
pub fn default_fd_step(t: f64) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + t.abs())
}

/// A state evolving by exact affine pullback along a flow, with a
/// write-once-per-time cache of evaluated symbols.
pub struct EvolvedState {
    rho0: GaussPolySymbol,
    flow: Arc<FlowSolution>,
    cache: Mutex<HashMap<u64, Arc<GaussPolySymbol>>>,
}

impl EvolvedState {
    /// Wraps an initial symbol and a flow of matching dimension.
    pub fn new(rho0: GaussPolySymbol, flow: Arc<FlowSolution>) -> Result<Self> {
        if rho0.dim() != flow.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state lives in dimension {} but the flow in {}",
                rho0.dim(),
                flow.dim()
            )));
        }
        Ok(Self {
            rho0,
            flow,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// The initial symbol `ρ₀`.
    pub fn rho0(&self) -> &GaussPolySymbol {
        &self.rho0
    }

    /// The underlying flow.
    pub fn flow(&self) -> &Arc<FlowSolution> {
        &self.flow
    }

    /// The evolved symbol `ρ(t, ·)`, cached per time sample.
    pub fn state_at(&self, t: f64) -> Result<Arc<GaussPolySymbol>> {
        let key = t.to_bits();
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let computed = Arc::new(evolve_state(&self.rho0, &self.flow, t)?);
        let mut guard = self.cache.lock().unwrap();
        Ok(guard.entry(key).or_insert(computed).clone())
    }
}

/// Exact solution of the evolution equation: the pullback
/// `ρ(t, x) = ρ₀(Λ(t)[x − v(t)])`.
pub fn evolve_state(
    rho0: &GaussPolySymbol,
    flow: &FlowSolution,
    t: f64,
) -> Result<GaussPolySymbol> {
    let lambda = flow.lambda_at(t)?;
    let v = flow.v_at(t)?;
    rho0.affine_pullback(&lambda, &v)
}

/// Classical density transport: identical pullback. For quadratic
/// pseudo-Hamiltonians the quantum evolution coincides with the modified
/// Liouville transport, so the two entry points share one implementation.
pub fn classical_transport(
    rho_cl0: &GaussPolySymbol,
    flow: &FlowSolution,
    t: f64,
) -> Result<GaussPolySymbol> {
    evolve_state(rho_cl0, flow, t)
}

/// A time series of complex expectation values.
#[derive(Clone, Debug)]
pub struct ExpectationSeries {
    times: Vec<f64>,
    values: Vec<Complex64>,
    observable_name: String,
}

impl ExpectationSeries {
    /// Builds a series; times must be strictly increasing and match the
    /// values in length.
    pub fn new(times: Vec<f64>, values: Vec<Complex64>, observable_name: String) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "series has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "series times must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            times,
            values,
            observable_name,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn observable_name(&self) -> &str {
        &self.observable_name
    }

    /// Largest imaginary part in the series — a diagnostic for real
    /// observables in real states.
    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Iterates `(t, value)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }
}

/// Expectation value `⟨F⟩(t) = Tr_t(F ⋆_t ρ(t))` through the full
/// time-`t` pairing.
pub fn expectation_value(
    f: &GaussPolySymbol,
    state: &EvolvedState,
    t: f64,
    ss: &SymplecticStructure,
    hbar: f64,
) -> Result<Complex64> {
    let rho_t = state.state_at(t)?;
    let pi = ss.pi_at(t)?;
    let delta = ss.liouville_density(t)?;
    let prod = moyal_star(f, &rho_t, &pi, hbar)?;
    trace_at(&prod, delta, hbar)
}

/// Same pairing evaluated with the plain product instead of the star —
/// the two must agree for trace-admissible pairs, and the comparison is a
/// standing invariant check.
pub fn expectation_value_pointwise(
    f: &GaussPolySymbol,
    state: &EvolvedState,
    t: f64,
    ss: &SymplecticStructure,
    hbar: f64,
) -> Result<Complex64> {
    let rho_t = state.state_at(t)?;
    let delta = ss.liouville_density(t)?;
    let prod = f.pointwise_mul(&rho_t)?;
    trace_at(&prod, delta, hbar)
}

/// Transported route: `⟨F⟩(t) = Tr₀((F∘(Γ(t)·+v(t))) ⋆₀ ρ₀)`. Equivalent to
/// [`expectation_value`] by the change of variables `x = Γ(t)y + v(t)`, but
/// numerically preferable on long horizons of contracting flows, where
/// `Λ(t)` blows up while `Γ(t)` stays bounded.
pub fn expectation_value_transported(
    f: &GaussPolySymbol,
    state: &EvolvedState,
    t: f64,
    ss: &SymplecticStructure,
    hbar: f64,
) -> Result<Complex64> {
    let flow = state.flow();
    let gamma = flow.gamma_at(t)?;
    let v = flow.v_at(t)?;
    // F(Γy + v) = affine_pullback with shift −Λv, since the pullback
    // convention is F(S(y − d)).
    let shift = -(flow.lambda_at(t)? * v);
    let f0 = f.affine_pullback(&gamma, &shift)?;
    let pi0 = ss.pi_at(0.0)?;
    let delta0 = ss.liouville_density(0.0)?;
    let prod = moyal_star(&f0, state.rho0(), &pi0, hbar)?;
    trace_at(&prod, delta0, hbar)
}

/// Which pairing [`expectation_series`] uses per time sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpectationRoute {
    /// Star with `Π(t)` against the evolved state.
    Direct,
    /// Star with `Π₀` against the initial state, observable pulled back.
    Transported,
}

/// Evaluates `⟨F⟩` on a strictly increasing time grid.
pub fn expectation_series(
    f: &GaussPolySymbol,
    state: &EvolvedState,
    ss: &SymplecticStructure,
    grid: &[f64],
    hbar: f64,
    name: &str,
    route: ExpectationRoute,
) -> Result<ExpectationSeries> {
    let mut values = Vec::with_capacity(grid.len());
    for &t in grid {
        let v = match route {
            ExpectationRoute::Direct => expectation_value(f, state, t, ss, hbar)?,
            ExpectationRoute::Transported => expectation_value_transported(f, state, t, ss, hbar)?,
        };
        values.push(v);
    }
    ExpectationSeries::new(grid.to_vec(), values, name.to_string())
}

/// Angular-momentum series of a four-dimensional magnetic state, computed
/// through the transported route (the relevant horizons scale like `1/|A|`,
/// where the direct route's `Λ(t)` coefficients would overflow long before
/// the series settles).
pub fn angular_momentum_series(
    state: &EvolvedState,
    ss: &SymplecticStructure,
    l_observable: &GaussPolySymbol,
    grid: &[f64],
    hbar: f64,
) -> Result<ExpectationSeries> {
    if state.rho0().dim() != 4 {
        return Err(Error::DimensionMismatch(format!(
            "angular-momentum series needs the 4-dimensional magnetic model, got dimension {}",
            state.rho0().dim()
        )));
    }
    expectation_series(
        l_observable,
        state,
        ss,
        grid,
        hbar,
        "L",
        ExpectationRoute::Transported,
    )
}

/// First moments `⟨xᵢ⟩` of a symbol under the weighted trace.
pub fn first_moments(rho: &GaussPolySymbol, delta: f64, hbar: f64) -> Result<DVector<f64>> {
    let dim = rho.dim();
    let mut out = DVector::zeros(dim);
    for i in 0..dim {
        let xi = GaussPolySymbol::coordinate(dim, i);
        out[i] = trace_at(&xi.pointwise_mul(rho)?, delta, hbar)?.re;
    }
    Ok(out)
}

/// Second moments `⟨xᵢxⱼ⟩` of a symbol under the weighted trace.
pub fn second_moments(rho: &GaussPolySymbol, delta: f64, hbar: f64) -> Result<DMatrix<f64>> {
    let dim = rho.dim();
    let mut out = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let mut q = DMatrix::zeros(dim, dim);
            q[(i, j)] += 1.0;
            q[(j, i)] += 1.0;
            let obs = GaussPolySymbol::quadratic_form(&q, &DVector::zeros(dim), 0.0)?;
            let m = trace_at(&obs.pointwise_mul(rho)?, delta, hbar)?.re;
            out[(i, j)] = m;
            out[(j, i)] = m;
        }
    }
    Ok(out)
}

/// Normalization, first- and second-moment diagnostics of the transported
/// density `φ_t = Δ(t)(2πħ)⁻ⁿ ρ(t, ·)` along a time grid.
#[derive(Clone, Debug)]
pub struct AttractorMoments {
    /// Sample times.
    pub times: Vec<f64>,
    /// Total mass `∫φ_t` per sample; conserved by the transport.
    pub masses: Vec<f64>,
    /// Second-moment matrices `∫xᵢxⱼ φ_t` per sample; these contract to zero
    /// exactly when the origin is asymptotically stable.
    pub second_moments: Vec<DMatrix<f64>>,
}

/// Computes the attractor diagnostics of Prop.-style δ-sequences: the state
/// is transported, the measure's weight grows as `Δ(t)`, and the density
/// concentrates at the origin while keeping unit mass.
pub fn attractor_moments(
    state: &EvolvedState,
    ss: &SymplecticStructure,
    grid: &[f64],
    hbar: f64,
) -> Result<AttractorMoments> {
    let mut masses = Vec::with_capacity(grid.len());
    let mut seconds = Vec::with_capacity(grid.len());
    for &t in grid {
        let v = state.flow().v_at(t)?;
        if v.abs().max() > 1e-12 {
            return Err(Error::InvalidInput(
                "attractor diagnostics need a homogeneous system (J = 0)".into(),
            ));
        }
        let rho_t = state.state_at(t)?;
        let delta = ss.liouville_density(t)?;
        masses.push(trace_at(&rho_t, delta, hbar)?.re);
        seconds.push(second_moments(&rho_t, delta, hbar)?);
    }
    Ok(AttractorMoments {
        times: grid.to_vec(),
        masses,
        second_moments: seconds,
    })
}

/// Which of the two equivalent presentations of the extended derivative to
/// evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeForm {
    /// `D_tF = ∂_tF − ½ xⁱ Ω̇ᵢₖ {xᵏ, F}_t`.
    Bracket,
    /// The symmetrized star form: `{xᵏ, F}` replaced by `[xᵏ, F]⋆/(iħ)` and
    /// the prefactor `xⁱ·` by `½(xⁱ ⋆ · + · ⋆ xⁱ)`. Both replacements are
    /// exact for linear `xⁱ`, so the two forms agree to round-off.
    Star,
}

/// Central finite difference of a symbol family's coefficient data: the
/// exponent matrix, linear term, constant and every polynomial coefficient
/// are differenced independently, and the result is expressed as a symbol on
/// the exponent of `family(t)`:
/// `dF/dt = (−½xᵀṀx + ḃᵀx + ċ)·F + e^{exponent}·Ṗ`.
///
/// The family must be smooth in its *coefficients* — a gauge jump between
/// the exponent constant and the polynomial prefactor would corrupt the
/// stencil even though the symbol values are unchanged.
fn coefficient_time_derivative<F>(family: &F, t: f64, step: f64) -> Result<GaussPolySymbol>
where
    F: Fn(f64) -> Result<GaussPolySymbol>,
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidInput(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let minus = family(t - step)?;
    let center = family(t)?;
    let plus = family(t + step)?;
    let dim = center.dim();
    if minus.dim() != dim || plus.dim() != dim {
        return Err(Error::DimensionMismatch(
            "family dimension changes across the stencil".into(),
        ));
    }
    let inv2h = Complex64::new(1.0 / (2.0 * step), 0.0);
    let m_dot = (plus.exponent_matrix() - minus.exponent_matrix()).map(|z| z * inv2h);
    let b_dot = (plus.exponent_linear() - minus.exponent_linear()).map(|z| z * inv2h);
    let c_dot = (plus.exponent_constant() - minus.exponent_constant()) * inv2h;
    let mut p_dot = Poly::zero(dim);
    p_dot.add_assign_scaled(plus.poly(), inv2h);
    p_dot.add_assign_scaled(minus.poly(), -inv2h);

    // Exponent-derivative polynomial −½xᵀṀx + ḃᵀx + ċ.
    let mut exp_dot = Poly::constant(dim, c_dot);
    for i in 0..dim {
        exp_dot.add_term(MultiIndex::unit(dim, i), b_dot[i]);
        for j in 0..dim {
            let idx = MultiIndex::unit(dim, i).plus(&MultiIndex::unit(dim, j));
            exp_dot.add_term(idx, -0.5 * m_dot[(i, j)]);
        }
    }
    let mut out = exp_dot.mul(center.poly())?;
    out.add_assign_scaled(&p_dot, Complex64::new(1.0, 0.0));
    GaussPolySymbol::new(
        center.exponent_matrix().clone(),
        center.exponent_linear().clone(),
        center.exponent_constant(),
        out,
    )
}

/// The extended time derivative `D_t` of a symbol family at time `t`, in
/// either of its two equivalent forms. `∂_t` is evaluated by a central
/// second-order stencil on the family's coefficient data with step `step`
/// (default: [`default_fd_step`]); the structural term is evaluated exactly.
pub fn extended_time_derivative<F>(
    family: &F,
    t: f64,
    ss: &SymplecticStructure,
    hbar: f64,
    form: DerivativeForm,
    step: Option<f64>,
) -> Result<GaussPolySymbol>
where
    F: Fn(f64) -> Result<GaussPolySymbol>,
{
    let h = step.unwrap_or_else(|| default_fd_step(t));
    let partial = coefficient_time_derivative(family, t, h)?;
    let f_t = family(t)?;
    let dim = f_t.dim();
    if dim != ss.dim() {
        return Err(Error::DimensionMismatch(format!(
            "family dimension {dim} does not match the structure dimension {}",
            ss.dim()
        )));
    }
    let om_dot = ss.omega_dot_at(t)?;
    let pi = ss.pi_at(t)?;

    let mut acc = partial;
    for k in 0..dim {
        if (0..dim).all(|i| om_dot[(i, k)] == 0.0) {
            continue;
        }
        let xk = GaussPolySymbol::coordinate(dim, k);
        match form {
            DerivativeForm::Bracket => {
                // −½ xⁱ Ω̇ᵢₖ {xᵏ, F}
                let g_k = poisson_bracket(&xk, &f_t, &pi)?;
                for i in 0..dim {
                    let w = om_dot[(i, k)];
                    if w == 0.0 {
                        continue;
                    }
                    let xi = GaussPolySymbol::coordinate(dim, i);
                    let term = xi.pointwise_mul(&g_k)?;
                    acc = acc.try_add_scaled(&term, Complex64::new(-0.5 * w, 0.0))?;
                }
            }
            DerivativeForm::Star => {
                // −Ω̇ᵢₖ/(4iħ) · (xⁱ ⋆ [xᵏ, F]⋆ + [xᵏ, F]⋆ ⋆ xⁱ)
                let comm_k = star_commutator(&xk, &f_t, &pi, hbar)?;
                for i in 0..dim {
                    let w = om_dot[(i, k)];
                    if w == 0.0 {
                        continue;
                    }
                    let xi = GaussPolySymbol::coordinate(dim, i);
                    let left = moyal_star(&xi, &comm_k, &pi, hbar)?;
                    let right = moyal_star(&comm_k, &xi, &pi, hbar)?;
                    let w_c = Complex64::new(-w, 0.0) / Complex64::new(0.0, 4.0 * hbar);
                    acc = acc.try_add_scaled(&left, w_c)?;
                    acc = acc.try_add_scaled(&right, w_c)?;
                }
            }
        }
    }
    Ok(acc)
}

/// Residual of the quantum Liouville equation `iħ·D_tρ + [ρ, H]_⋆t = 0` for
/// a state family, measured in the canonicalized coefficient sup norm. For
/// pullback-evolved states of quadratic pseudo-Hamiltonians this is zero up
/// to the stencil order `O(h²)`.
pub fn quantum_liouville_residual<F, HOf>(
    state_family: &F,
    h_of_t: &HOf,
    t: f64,
    ss: &SymplecticStructure,
    hbar: f64,
    step: Option<f64>,
) -> Result<f64>
where
    F: Fn(f64) -> Result<GaussPolySymbol>,
    HOf: Fn(f64) -> Result<GaussPolySymbol>,
{
    let d_t = extended_time_derivative(state_family, t, ss, hbar, DerivativeForm::Bracket, step)?;
    let rho_t = state_family(t)?;
    let h_t = h_of_t(t)?;
    let pi = ss.pi_at(t)?;
    let comm = star_commutator(&rho_t, &h_t, &pi, hbar)?;
    let residual = d_t.scale(Complex64::new(0.0, hbar)).try_add(&comm)?;
    let zero = residual.scale(Complex64::new(0.0, 0.0));
    Ok(residual.distance(&zero))
}

/// Least-squares decomposition of a polynomial symbol of degree ≤ 2 over a
/// set of named quadratic observables. Returns the coefficients in basis
/// order and the sup-norm of the residual polynomial.
pub fn decompose_quadratic(
    f: &GaussPolySymbol,
    basis: &[&GaussPolySymbol],
) -> Result<(Vec<f64>, f64)> {
    if basis.is_empty() {
        return Err(Error::InvalidInput("empty decomposition basis".into()));
    }
    let dim = f.dim();
    for b in basis {
        if b.dim() != dim {
            return Err(Error::DimensionMismatch(
                "decomposition basis dimension mismatch".into(),
            ));
        }
        if !b.has_trivial_exponent() || !f.has_trivial_exponent() {
            return Err(Error::InvalidInput(
                "decomposition requires polynomial symbols".into(),
            ));
        }
    }
    // Union of monomials across target and basis.
    let f_poly = f.folded_poly();
    let basis_polys: Vec<Poly> = basis.iter().map(|b| b.folded_poly()).collect();
    let mut monomials: Vec<MultiIndex> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for p in std::iter::once(&f_poly).chain(basis_polys.iter()) {
        for (idx, _) in p.terms() {
            if seen.insert(idx.clone()) {
                monomials.push(idx.clone());
            }
        }
    }
    let rows = monomials.len();
    let mut a = DMatrix::zeros(rows, basis.len());
    let mut rhs = DVector::zeros(rows);
    for (r, idx) in monomials.iter().enumerate() {
        rhs[r] = f_poly.coeff(idx).re;
        for (c, b) in basis_polys.iter().enumerate() {
            a[(r, c)] = b.coeff(idx).re;
        }
    }
    let svd = a.clone().svd(true, true);
    let coeffs = svd
        .solve(&rhs, 1e-13)
        .map_err(|e| Error::SingularMatrix(format!("decomposition solve failed: {e}")))?;
    let residual = (&a * &coeffs - &rhs).abs().max();
    Ok((coeffs.iter().copied().collect(), residual))
}
