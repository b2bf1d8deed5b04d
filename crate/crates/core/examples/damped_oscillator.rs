//! Minimal end-to-end run: build the damped oscillator, evolve its first
//! excited Wigner eigenstate by exact pullback, and print the mean energy
//! against the classical decay envelope e^(-2αt).

use std::sync::Arc;

use starflow::evolution::{expectation_series, EvolvedState, ExpectationRoute};
use starflow::linsys::{fundamental_matrix, StepControl};
use starflow::models::{build_damped_oscillator, OscillatorVariant};
use starflow::states::{normalize_trace, oscillator_eigenstate, OscillatorSpec};
use starflow::symplectic::SymplecticStructure;

fn main() -> starflow::Result<()> {
    let (omega, alpha, hbar) = (1.0, 0.1, 1.0);

    let model = build_damped_oscillator(omega, alpha, hbar, OscillatorVariant::Attractor)?;
    let flow = Arc::new(fundamental_matrix(
        &model.system,
        10.0,
        &StepControl::default(),
    )?);
    let ss = SymplecticStructure::new(model.omega0.clone(), flow.clone())?;

    let shape = oscillator_eigenstate(&OscillatorSpec { omega, hbar, n: 1 })?;
    let rho0 = normalize_trace(&shape, ss.liouville_density(0.0)?, hbar)?;
    let state = EvolvedState::new(rho0, flow)?;

    let grid = [0.0, 2.5, 5.0, 7.5, 10.0];
    let series = expectation_series(
        &model.observables["H"],
        &state,
        &ss,
        &grid,
        hbar,
        "H",
        ExpectationRoute::Direct,
    )?;

    println!("{:>6}  {:>22}  {:>22}", "t", "<H>", "1.5 exp(-2 a t)");
    for (t, value) in series.iter() {
        let envelope = 1.5 * (-2.0 * alpha * t).exp();
        println!("{t:>6.2}  {:>22.16}  {envelope:>22.16}", value.re);
    }
    Ok(())
}
