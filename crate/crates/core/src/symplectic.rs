//! Non-stationary symplectic structure carried by a linear flow.
//!
//! Given a flow `Γ(t)` (with inverse `Λ`) and a constant antisymmetric
//! nondegenerate seed `Ω₀`, the structure `Ω(t) = Λ(t)ᵀ Ω₀ Λ(t)` solves
//! `Ω̇ = −(ΩA + AᵀΩ)` exactly, and splits the dynamics into a quadratic
//! pseudo-Hamiltonian: `B = ½(ΩA − AᵀΩ)` (symmetric), `C = ΩJ`, with the
//! original system recovered as `A = Π(B − ½Ω̇)`, `J = ΠC`, `Π = Ω⁻¹`.
//!
//! The seed is deliberately arbitrary — it encodes the gauge freedom of the
//! construction — and every physical output downstream is independent of it;
//! [`canonical_omega0`] fixes the default orientation `{p, x} = +1` per
//! `(x, p)` pair.

use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

use crate::linsys::FlowSolution;
use crate::symbols::GaussPolySymbol;
use crate::{Error, Result};

pub use crate::symbols::poisson_bracket;

/// Canonical antisymmetric seed: block-diagonal `[[0, 1], [-1, 0]]` per
/// `(x, p)` pair, i.e. the orientation with `{p, x} = +1`.
pub fn canonical_omega0(dim: usize) -> Result<DMatrix<f64>> {
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "canonical seed needs an even positive dimension, got {dim}"
        )));
    }
    let mut m = DMatrix::zeros(dim, dim);
    for k in 0..dim / 2 {
        m[(2 * k, 2 * k + 1)] = 1.0;
        m[(2 * k + 1, 2 * k)] = -1.0;
    }
    Ok(m)
}

/// Inverse of [`canonical_omega0`]: the canonical Poisson tensor
/// `Π₀ = Ω₀⁻¹`, block-diagonal `[[0, -1], [1, 0]]` per `(x, p)` pair.
pub fn canonical_pi0(dim: usize) -> Result<DMatrix<f64>> {
    Ok(-canonical_omega0(dim)?)
}

/// Pseudo-Hamiltonian coefficient sample at a fixed time: the quadratic
/// Hamiltonian is `½ xᵀ B x + Cᵀ x` and `Δ = √det Ω` weights the Liouville
/// measure.
#[derive(Clone, Debug)]
pub struct PseudoHamiltonianData {
    pub b: DMatrix<f64>,
    pub c: DVector<f64>,
    pub delta: f64,
}

/// A path sampled on a uniform time grid, for action evaluation.
#[derive(Clone, Debug)]
pub struct SampledPath {
    times: Vec<f64>,
    points: Vec<DVector<f64>>,
}

impl SampledPath {
    pub fn new(times: Vec<f64>, points: Vec<DVector<f64>>) -> Result<Self> {
        if times.len() < 3 || times.len() != points.len() {
            return Err(Error::InvalidInput(
                "a sampled path needs at least three matching time/point samples".into(),
            ));
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return Err(Error::InvalidInput("path times must increase".into()));
        }
        for w in times.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
                return Err(Error::InvalidInput(
                    "path must be sampled on a uniform grid".into(),
                ));
            }
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch(
                "path points have inconsistent dimensions".into(),
            ));
        }
        Ok(SampledPath { times, points })
    }

    /// Sample `x(t)` on `n` uniform points over `[t0, t1]`.
    pub fn from_fn<F>(t0: f64, t1: f64, n: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> DVector<f64>,
    {
        if n < 3 || !(t1 > t0) {
            return Err(Error::InvalidInput(
                "path sampling needs n ≥ 3 and t1 > t0".into(),
            ));
        }
        let times: Vec<f64> = (0..n)
            .map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64)
            .collect();
        let points = times.iter().map(|&t| f(t)).collect();
        SampledPath::new(times, points)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    /// Pointwise `self + eps · other` on a shared grid.
    pub fn add_scaled(&self, other: &SampledPath, eps: f64) -> Result<SampledPath> {
        if self.times.len() != other.times.len()
            || self
                .times
                .iter()
                .zip(&other.times)
                .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
        {
            return Err(Error::InvalidInput(
                "paths must share their time grid to be combined".into(),
            ));
        }
        let points = self
            .points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| a + b * eps)
            .collect();
        SampledPath::new(self.times.clone(), points)
    }
}

/// The non-stationary symplectic structure `Ω(t) = Λ(t)ᵀ Ω₀ Λ(t)` and
/// everything derived from it.
#[derive(Clone)]
pub struct SymplecticStructure {
    omega0: DMatrix<f64>,
    flow: Arc<FlowSolution>,
}

impl SymplecticStructure {
    pub fn new(omega0: DMatrix<f64>, flow: Arc<FlowSolution>) -> Result<Self> {
        let dim = flow.dim();
        if omega0.nrows() != dim || omega0.ncols() != dim {
            return Err(Error::DimensionMismatch(
                "seed matrix dimension does not match the flow".into(),
            ));
        }
        let scale = omega0.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if (omega0.transpose() + &omega0).norm() > 1e-12 * scale {
            return Err(Error::InvalidInput(
                "seed matrix must be antisymmetric".into(),
            ));
        }
        // Store the exactly antisymmetrized copy.
        let omega0 = (&omega0 - omega0.transpose()) * 0.5;
        if omega0.determinant().abs() < 1e-12 * scale.powi(dim as i32) {
            return Err(Error::InvalidInput(
                "seed matrix must be nondegenerate".into(),
            ));
        }
        Ok(SymplecticStructure { omega0, flow })
    }

    pub fn dim(&self) -> usize {
        self.flow.dim()
    }

    pub fn omega0(&self) -> &DMatrix<f64> {
        &self.omega0
    }

    pub fn flow(&self) -> &Arc<FlowSolution> {
        &self.flow
    }

    /// `Ω(t) = Λ(t)ᵀ Ω₀ Λ(t)`, exactly antisymmetrized.
    pub fn omega_at(&self, t: f64) -> Result<DMatrix<f64>> {
        let lambda = self.flow.lambda_at(t)?;
        let omega = lambda.transpose() * &self.omega0 * lambda;
        Ok((&omega - omega.transpose()) * 0.5)
    }

    /// Poisson tensor `Π(t) = Ω(t)⁻¹`, exactly antisymmetrized.
    pub fn pi_at(&self, t: f64) -> Result<DMatrix<f64>> {
        let omega = self.omega_at(t)?;
        let pi = omega.lu().try_inverse().ok_or_else(|| {
            Error::SingularMatrix(format!("symplectic structure degenerate at t = {t}"))
        })?;
        Ok((&pi - pi.transpose()) * 0.5)
    }

    /// Exact time derivative `Ω̇(t) = −(ΩA + AᵀΩ)` — an identity of the
    /// construction, so no finite differencing is involved.
    pub fn omega_dot_at(&self, t: f64) -> Result<DMatrix<f64>> {
        let omega = self.omega_at(t)?;
        let a = self.flow.system().a_at(t);
        Ok(-(&omega * &a + a.transpose() * &omega))
    }

    /// Liouville density `Δ(t) = √det Ω(t)` (positive branch; the
    /// determinant of an even-dimensional antisymmetric matrix is the
    /// square of its Pfaffian, hence nonnegative).
    pub fn liouville_density(&self, t: f64) -> Result<f64> {
        let det = self.omega_at(t)?.determinant();
        if det <= 0.0 {
            return Err(Error::SingularMatrix(format!(
                "det Ω(t) = {det:.3e} is not positive at t = {t}"
            )));
        }
        Ok(det.sqrt())
    }

    /// Quadratic pseudo-Hamiltonian data at time `t`:
    /// `B = ½(ΩA − AᵀΩ)`, `C = ΩJ`, `Δ = √det Ω`.
    pub fn hamiltonian_coefficients(&self, t: f64) -> Result<PseudoHamiltonianData> {
        let omega = self.omega_at(t)?;
        let a = self.flow.system().a_at(t);
        let j = self.flow.system().j_at(t);
        let b = (&omega * &a - a.transpose() * &omega) * 0.5;
        let b = (&b + b.transpose()) * 0.5;
        let c = &omega * j;
        let delta = self.liouville_density(t)?;
        Ok(PseudoHamiltonianData { b, c, delta })
    }

    /// The pseudo-Hamiltonian `H(t, x) = ½ xᵀ B(t) x + C(t)ᵀ x` as a
    /// polynomial symbol.
    pub fn hamiltonian_symbol(&self, t: f64) -> Result<GaussPolySymbol> {
        let data = self.hamiltonian_coefficients(t)?;
        GaussPolySymbol::quadratic_form(&data.b, &data.c, 0.0)
    }

    /// Non-stationary Poisson bracket `{F, G}_t = Πⁱʲ(t) ∂ᵢF ∂ⱼG`.
    pub fn poisson_bracket_at(
        &self,
        f: &GaussPolySymbol,
        g: &GaussPolySymbol,
        t: f64,
    ) -> Result<GaussPolySymbol> {
        poisson_bracket(f, g, &self.pi_at(t)?)
    }

    /// Weyl-Moyal star product with the instantaneous Poisson tensor.
    pub fn moyal_star_at(
        &self,
        f: &GaussPolySymbol,
        g: &GaussPolySymbol,
        t: f64,
        hbar: f64,
    ) -> Result<GaussPolySymbol> {
        crate::symbols::moyal_star(f, g, &self.pi_at(t)?, hbar)
    }

    /// First-order action `S[x] = ½ ∫ (xᵀΩẋ − xᵀBx − 2Cᵀx) dt` over a
    /// uniformly sampled path: velocities by second-order finite
    /// differences, quadrature by composite Simpson when the sample count
    /// is odd and by the trapezoid rule otherwise.
    pub fn evaluate_action(&self, path: &SampledPath) -> Result<f64> {
        let n = path.times.len();
        let dim = self.dim();
        if path.points[0].len() != dim {
            return Err(Error::DimensionMismatch(
                "path dimension does not match the structure".into(),
            ));
        }
        let h = path.times[1] - path.times[0];
        let mut integrand = Vec::with_capacity(n);
        for k in 0..n {
            let t = path.times[k];
            let x = &path.points[k];
            let xdot = if k == 0 {
                (-3.0 * &path.points[0] + 4.0 * &path.points[1] - &path.points[2]) / (2.0 * h)
            } else if k == n - 1 {
                (3.0 * &path.points[n - 1] - 4.0 * &path.points[n - 2] + &path.points[n - 3])
                    / (2.0 * h)
            } else {
                (&path.points[k + 1] - &path.points[k - 1]) / (2.0 * h)
            };
            let omega = self.omega_at(t)?;
            let data = self.hamiltonian_coefficients(t)?;
            let val =
                0.5 * (x.dot(&(&omega * &xdot)) - x.dot(&(&data.b * x)) - 2.0 * data.c.dot(x));
            integrand.push(val);
        }
        Ok(quadrature(&integrand, h))
    }
}

/// Composite Simpson (odd sample count) or trapezoid integration of uniform
/// samples with spacing `h`.
fn quadrature(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    if n % 2 == 1 && n >= 3 {
        let mut acc = f[0] + f[n - 1];
        for (k, v) in f.iter().enumerate().take(n - 1).skip(1) {
            acc += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        acc * h / 3.0
    } else {
        let mut acc = 0.5 * (f[0] + f[n - 1]);
        for v in &f[1..n - 1] {
            acc += v;
        }
        acc * h
    }
}
