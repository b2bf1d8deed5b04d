//! Prebuilt model catalogue: damped oscillator, radiating charge in a
//! magnetic field, and a generic constant-coefficient escape hatch.
//!
//! A [`ModelDefinition`] bundles the linear system, the seed two-form, the
//! named observables registered in the t = 0 canonical orientation, and the
//! model parameters — everything the evolution pipeline and the CLI need to
//! run a simulation.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::linsys::{
    fundamental_matrix, reduced_lorentz_coefficients, Coefficient, LinearSystem, StepControl,
    VectorCoefficient,
};
use crate::states::MagneticFrame;
use crate::symbols::GaussPolySymbol;
use crate::symplectic::{canonical_omega0, SymplecticStructure};
use crate::{Error, Result};

/// Which first-order presentation of the damped oscillator to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OscillatorVariant {
    /// Constant coefficients; the origin is an asymptotically stable
    /// attractor and the symplectic structure expands as `e^{2αt}`.
    Attractor,
    /// Time-dependent coefficients with a constant canonical structure; the
    /// origin is not an attractor (momenta grow while positions decay).
    Canonical,
}

/// A ready-to-run model: system, seed, observables, parameters.
#[derive(Clone)]
pub struct ModelDefinition {
    /// Identifier used by the CLI and in run manifests.
    pub name: String,
    /// The underlying linear system `ẋ = A(t)x + J(t)`.
    pub system: LinearSystem,
    /// Seed two-form fixing the gauge of the symplectic construction.
    pub omega0: DMatrix<f64>,
    /// Named phase-space observables registered at t = 0.
    pub observables: BTreeMap<String, GaussPolySymbol>,
    /// Named real parameters (frequencies, couplings, ħ, …).
    pub parameters: BTreeMap<String, f64>,
}

impl ModelDefinition {
    /// Phase-space dimension of the model.
    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    /// Planck constant the model was built with.
    pub fn hbar(&self) -> f64 {
        self.parameters.get("hbar").copied().unwrap_or(1.0)
    }

    /// Looks up a registered observable.
    pub fn observable(&self, name: &str) -> Result<&GaussPolySymbol> {
        self.observables.get(name).ok_or_else(|| {
            Error::InvalidInput(format!(
                "model `{}` has no observable `{name}`; available: {:?}",
                self.name,
                self.observables.keys().collect::<Vec<_>>()
            ))
        })
    }

    /// Integrates the flow up to `t_max` and assembles the non-stationary
    /// symplectic structure seeded by this model's `Ω₀`.
    pub fn structure(&self, t_max: f64, ctrl: &StepControl) -> Result<SymplecticStructure> {
        let flow = fundamental_matrix(&self.system, t_max, ctrl)?;
        SymplecticStructure::new(self.omega0.clone(), Arc::new(flow))
    }
}

fn coordinate_observables(dim: usize, names: &[&str]) -> BTreeMap<String, GaussPolySymbol> {
    names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.to_string(), GaussPolySymbol::coordinate(dim, i)))
        .collect()
}

fn check_hbar(hbar: f64) -> Result<()> {
    if !(hbar > 0.0 && hbar.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "hbar must be positive and finite, got {hbar}"
        )));
    }
    Ok(())
}

/// Damped harmonic oscillator `ẍ + 2αẋ + ω²x = 0` in one of its two
/// first-order presentations.
///
/// The attractor variant uses the constant matrix
/// `A = [[−α, s], [−ω²s, −α]]` with `s = √(1 − α²/ω²)` (momentum
/// `p = (ẋ + αx)/s`). The canonical variant keeps the constant canonical
/// structure at the price of time-dependent coefficients
/// `ẋ = e^{−2αt}p`, `ṗ = −ω²e^{2αt}x` (momentum `p = e^{2αt}ẋ`); the
/// exponents carry `2α`, not `α`, so that both presentations reproduce the
/// same second-order equation. At `α = 0` the two coincide exactly.
///
/// Values `α ≥ ω` are rejected: there the square root turns imaginary and
/// the quadratic action of the attractor presentation becomes complex.
pub fn build_damped_oscillator(
    omega: f64,
    alpha: f64,
    hbar: f64,
    variant: OscillatorVariant,
) -> Result<ModelDefinition> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "oscillator frequency must be positive and finite, got {omega}"
        )));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() || alpha >= omega {
        return Err(Error::InvalidInput(format!(
            "friction must satisfy 0 <= alpha < omega, got alpha={alpha}, omega={omega}"
        )));
    }
    check_hbar(hbar)?;

    let s = (1.0 - alpha * alpha / (omega * omega)).sqrt();
    let a = match variant {
        OscillatorVariant::Attractor => Coefficient::Constant(DMatrix::from_row_slice(
            2,
            2,
            &[-alpha, s, -omega * omega * s, -alpha],
        )),
        // At α = 0 both presentations are the same constant system; build it
        // as such so the unperturbed limits agree exactly (and the flow can
        // use the closed-form exponential).
        OscillatorVariant::Canonical if alpha == 0.0 => Coefficient::Constant(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -omega * omega, 0.0]),
        ),
        OscillatorVariant::Canonical => {
            let w2 = omega * omega;
            Coefficient::TimeDependent(Arc::new(move |t: f64| {
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        0.0,
                        (-2.0 * alpha * t).exp(),
                        -w2 * (2.0 * alpha * t).exp(),
                        0.0,
                    ],
                )
            }))
        }
    };
    let system = LinearSystem::new(a, VectorCoefficient::Constant(DVector::zeros(2)))?;

    let mut observables = coordinate_observables(2, &["x", "p"]);
    observables.insert("H".into(), crate::states::oscillator_hamiltonian(omega)?);

    let mut parameters = BTreeMap::new();
    parameters.insert("omega".into(), omega);
    parameters.insert("alpha".into(), alpha);
    parameters.insert("hbar".into(), hbar);

    Ok(ModelDefinition {
        name: match variant {
            OscillatorVariant::Attractor => "damped-oscillator".into(),
            OscillatorVariant::Canonical => "damped-oscillator-canonical".into(),
        },
        system,
        omega0: canonical_omega0(2)?,
        observables,
        parameters,
    })
}

/// Coefficient matrix of the reduced radiating-charge system for given
/// friction `a` and effective field `b`, rows ordered `(x, p, y, q)`:
///
/// ```text
/// ẋ = p − (b/2)y
/// ṗ = −(b²/4)x + a·p − (ab/2)y − (b/2)q
/// ẏ = (b/2)x + q
/// q̇ = (ab/2)x + (b/2)p − (b²/4)y + a·q
/// ```
pub fn magnetic_system_matrix(a: f64, b: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0,
            1.0,
            -b / 2.0,
            0.0,
            -b * b / 4.0,
            a,
            -a * b / 2.0,
            -b / 2.0,
            b / 2.0,
            0.0,
            0.0,
            1.0,
            a * b / 2.0,
            b / 2.0,
            -b * b / 4.0,
            a,
        ],
    )
}

/// Planar motion of a radiating charge in a constant magnetic field, after
/// reduction of order: a four-dimensional constant-coefficient system whose
/// eigenvalues are `A ± iB` (each twice), with `A ≤ 0` the radiation-friction
/// rate and `B > 0` the effective cyclotron frequency, both computed from the
/// physical charge `e` and field `h_field`.
///
/// Registered observables: the cyclotron energy `H` (the kinetic energy,
/// spectrum `ħB(n+½)`), the angular momentum `L = py − xq` (spectrum
/// `ħ(l−n)`), the sector-parity partners `K` and `N`, and the coordinates.
/// In the free limit `e → 0` the system decouples into straight-line motion
/// and the frame-based observables degenerate, so only `H`, `L` and the
/// coordinates are registered there.
pub fn build_magnetic_charge(e: f64, h_field: f64, hbar: f64) -> Result<ModelDefinition> {
    let (a, b) = reduced_lorentz_coefficients(e, h_field)?;
    let mut def = build_magnetic_reduced(a, b, hbar)?;
    def.parameters.insert("e".into(), e);
    def.parameters.insert("h_field".into(), h_field);
    Ok(def)
}

/// The same reduced planar system, parameterized directly by the friction
/// rate `a ≤ 0` and effective cyclotron frequency `b ≥ 0` instead of the
/// physical charge and field.
pub fn build_magnetic_reduced(a: f64, b: f64, hbar: f64) -> Result<ModelDefinition> {
    check_hbar(hbar)?;
    if !(a.is_finite() && b.is_finite() && a <= 0.0 && b >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "reduced rates need a ≤ 0 and b ≥ 0, got a = {a}, b = {b}"
        )));
    }
    let system = LinearSystem::constant(magnetic_system_matrix(a, b), DVector::zeros(4))?;

    let mut observables = coordinate_observables(4, &["x", "p", "y", "q"]);
    if b > 1e-12 {
        let frame = MagneticFrame::new(b)?;
        observables.insert("H".into(), frame.cyclotron_energy()?);
        observables.insert("L".into(), frame.angular_momentum()?);
        observables.insert("K".into(), frame.k_observable()?);
        observables.insert("N".into(), frame.n_observable()?);
    } else {
        // Free limit: kinetic energy ½(p² + q²) and L = py − xq directly.
        let kin = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 0.0, 1.0]));
        observables.insert(
            "H".into(),
            GaussPolySymbol::quadratic_form(&kin, &DVector::zeros(4), 0.0)?,
        );
        let mut ql = DMatrix::zeros(4, 4);
        ql[(1, 2)] = 1.0;
        ql[(2, 1)] = 1.0;
        ql[(0, 3)] = -1.0;
        ql[(3, 0)] = -1.0;
        observables.insert(
            "L".into(),
            GaussPolySymbol::quadratic_form(&ql, &DVector::zeros(4), 0.0)?,
        );
    }

    let mut parameters = BTreeMap::new();
    parameters.insert("hbar".into(), hbar);
    parameters.insert("a_rate".into(), a);
    parameters.insert("b_eff".into(), b);

    Ok(ModelDefinition {
        name: "magnetic-charge".into(),
        system,
        omega0: canonical_omega0(4)?,
        observables,
        parameters,
    })
}

/// User-supplied constant-coefficient model. The seed must be antisymmetric
/// and nondegenerate; observables start with the coordinates and can be
/// extended by the caller.
pub fn build_generic(
    a: DMatrix<f64>,
    j: DVector<f64>,
    omega0: DMatrix<f64>,
    hbar: f64,
) -> Result<ModelDefinition> {
    check_hbar(hbar)?;
    let system = LinearSystem::constant(a, j)?;
    let dim = system.dim();
    if omega0.nrows() != dim || omega0.ncols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "seed is {}x{} but the system has dimension {dim}",
            omega0.nrows(),
            omega0.ncols()
        )));
    }
    if (&omega0 + omega0.transpose()).abs().max() > 1e-12 * (1.0 + omega0.abs().max()) {
        return Err(Error::InvalidInput(
            "seed two-form must be antisymmetric".into(),
        ));
    }
    if omega0.clone().lu().try_inverse().is_none() {
        return Err(Error::SingularMatrix(
            "seed two-form must be nondegenerate".into(),
        ));
    }

    let names: Vec<String> = (0..dim / 2)
        .flat_map(|k| [format!("x{}", k + 1), format!("p{}", k + 1)])
        .collect();
    let observables = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), GaussPolySymbol::coordinate(dim, i)))
        .collect();

    let mut parameters = BTreeMap::new();
    parameters.insert("hbar".into(), hbar);

    Ok(ModelDefinition {
        name: "generic".into(),
        system,
        omega0,
        observables,
        parameters,
    })
}

/// One catalogue entry: name, parameter names, and a short description.
pub struct CatalogueEntry {
    pub name: &'static str,
    pub parameters: &'static [&'static str],
    pub description: &'static str,
}

/// The models known to the CLI.
pub fn catalogue() -> Vec<CatalogueEntry> {
    vec![
        CatalogueEntry {
            name: "damped-oscillator",
            parameters: &["omega", "alpha", "hbar"],
            description: "damped harmonic oscillator, constant-coefficient presentation \
                          (origin is an attractor)",
        },
        CatalogueEntry {
            name: "damped-oscillator-canonical",
            parameters: &["omega", "alpha", "hbar"],
            description: "damped harmonic oscillator, canonical constant structure with \
                          time-dependent coefficients",
        },
        CatalogueEntry {
            name: "magnetic-charge",
            parameters: &["e", "h_field", "hbar"],
            description: "radiating charge in a constant magnetic field, reduced planar \
                          system with eigenvalues A ± iB",
        },
        CatalogueEntry {
            name: "generic",
            parameters: &["hbar"],
            description: "user-supplied constant matrices A, J with an explicit seed",
        },
    ]
}
