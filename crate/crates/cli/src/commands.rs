//! The six subcommands: simulation, verification, spectrum tables, the model
//! catalogue, structure-data export, and phase-space grid sampling.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use starflow::evolution::{evolve_state, expectation_series, EvolvedState, ExpectationRoute};
use starflow::linsys::{
    fundamental_matrix, reduced_lorentz_coefficients, FlowSolution, StepControl,
};
use starflow::models::{
    build_damped_oscillator, build_generic, build_magnetic_charge, build_magnetic_reduced,
    catalogue, ModelDefinition, OscillatorVariant,
};
use starflow::states::{
    magnetic_eigenstate, normalize_trace, oscillator_eigenstate, MagneticStateSpec, OscillatorSpec,
};
use starflow::symbols::GaussPolySymbol;
use starflow::symplectic::SymplecticStructure;
use starflow::verify::{run_all, VerifyOptions};

use crate::config::RunConfig;
use crate::output::{csv_table, fmt_f, print_line, print_raw, Sink};
use crate::CliError;

const DEFAULT_OMEGA: f64 = 1.0;
const DEFAULT_ALPHA: f64 = 0.1;
const DEFAULT_CHARGE: f64 = 0.5;
const DEFAULT_FIELD: f64 = 1.0;

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Config(format!(
            "model.{what} must be a square row list"
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Builds the configured model definition.
pub fn build_model(cfg: &RunConfig) -> Result<ModelDefinition, CliError> {
    let m = &cfg.model;
    let def = match m.name.as_str() {
        "damped-oscillator" | "damped-oscillator-canonical" => {
            let variant = if m.name.ends_with("canonical") {
                OscillatorVariant::Canonical
            } else {
                OscillatorVariant::Attractor
            };
            build_damped_oscillator(
                m.omega.unwrap_or(DEFAULT_OMEGA),
                m.alpha.unwrap_or(DEFAULT_ALPHA),
                m.hbar,
                variant,
            )
        }
        "magnetic-charge" => {
            if m.a_rate.is_some() || m.b_eff.is_some() {
                let (da, db) = reduced_lorentz_coefficients(
                    m.e.unwrap_or(DEFAULT_CHARGE),
                    m.h_field.unwrap_or(DEFAULT_FIELD),
                )
                .map_err(|e| CliError::Numerical(e.to_string()))?;
                build_magnetic_reduced(m.a_rate.unwrap_or(da), m.b_eff.unwrap_or(db), m.hbar)
            } else {
                build_magnetic_charge(
                    m.e.unwrap_or(DEFAULT_CHARGE),
                    m.h_field.unwrap_or(DEFAULT_FIELD),
                    m.hbar,
                )
            }
        }
        "generic" => {
            let rows = m.a.as_ref().ok_or_else(|| {
                CliError::Config("generic model requires model.a (matrix rows)".into())
            })?;
            let a = matrix_from_rows(rows, "a")?;
            let dim = a.nrows();
            let j = match &m.j {
                Some(v) if v.len() == dim => DVector::from_vec(v.clone()),
                Some(_) => {
                    return Err(CliError::Config("model.j length must match model.a".into()))
                }
                None => DVector::zeros(dim),
            };
            let omega0 = match &m.omega0 {
                Some(rows) => matrix_from_rows(rows, "omega0")?,
                None => starflow::symplectic::canonical_omega0(dim)
                    .map_err(|e| CliError::Config(e.to_string()))?,
            };
            build_generic(a, j, omega0, m.hbar)
        }
        other => {
            return Err(CliError::Config(format!("unknown model `{other}`")));
        }
    };
    def.map_err(|e| CliError::Config(format!("model construction: {e}")))
}

struct Bundle {
    model: ModelDefinition,
    flow: Arc<FlowSolution>,
    ss: SymplecticStructure,
}

fn build_bundle(cfg: &RunConfig, horizon: f64) -> Result<Bundle, CliError> {
    let model = build_model(cfg)?;
    let horizon = if horizon > 0.0 { horizon } else { 1.0 };
    let flow = Arc::new(
        fundamental_matrix(&model.system, horizon, &StepControl::default())
            .map_err(|e| CliError::Numerical(format!("flow integration: {e}")))?,
    );
    let ss = SymplecticStructure::new(cfg.seed.omega0_scale * model.omega0.clone(), flow.clone())
        .map_err(|e| CliError::Config(format!("seed form: {e}")))?;
    Ok(Bundle { model, flow, ss })
}

/// The configured eigenstate (before trace normalization under the run's
/// seed), its label, and its exact eigenvalues.
fn build_eigenstate(
    cfg: &RunConfig,
    model: &ModelDefinition,
) -> Result<(GaussPolySymbol, String, Value), CliError> {
    let hbar = model.parameters["hbar"];
    match model.name.as_str() {
        name if name.starts_with("damped-oscillator") => {
            let spec = OscillatorSpec {
                omega: model.parameters["omega"],
                hbar,
                n: cfg.state.n,
            };
            let rho = oscillator_eigenstate(&spec)
                .map_err(|e| CliError::Numerical(format!("eigenstate: {e}")))?;
            let label = format!("n={}", spec.n);
            Ok((rho, label, json!({ "energy": spec.energy() })))
        }
        "magnetic-charge" => {
            let spec = MagneticStateSpec {
                b_eff: model.parameters["b_eff"],
                hbar,
                n: cfg.state.n,
                l: cfg.state.l,
            };
            let rho = magnetic_eigenstate(&spec)
                .map_err(|e| CliError::Numerical(format!("eigenstate: {e}")))?;
            let label = format!("n={},l={}", spec.n, spec.l);
            Ok((
                rho,
                label,
                json!({
                    "energy": spec.energy(),
                    "angular_momentum": spec.angular_momentum(),
                }),
            ))
        }
        other => Err(CliError::Config(format!(
            "model `{other}` has no eigenstate catalogue"
        ))),
    }
}

fn route_of(cfg: &RunConfig) -> ExpectationRoute {
    match cfg.observables.route.as_str() {
        "transported" => ExpectationRoute::Transported,
        _ => ExpectationRoute::Direct,
    }
}

/// Samples a symbol on the configured two-axis grid; returns (header, rows).
fn sample_grid(
    rho: &GaussPolySymbol,
    cfg: &RunConfig,
) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let dim = rho.dim();
    let (ax0, ax1) = (cfg.wigner.axes[0], cfg.wigner.axes[1]);
    if ax0 >= dim || ax1 >= dim {
        return Err(CliError::Config(format!(
            "wigner.axes {:?} out of range for dimension {dim}",
            cfg.wigner.axes
        )));
    }
    let mut base = DVector::zeros(dim);
    if !cfg.wigner.fixed.is_empty() {
        if cfg.wigner.fixed.len() != dim - 2 {
            return Err(CliError::Config(format!(
                "wigner.fixed must list the {} non-grid coordinates",
                dim - 2
            )));
        }
        let mut it = cfg.wigner.fixed.iter();
        for k in 0..dim {
            if k != ax0 && k != ax1 {
                base[k] = *it.next().expect("length checked");
            }
        }
    }
    let (range, points) = (cfg.wigner.range, cfg.wigner.points);
    let coord = |k: usize| -range + 2.0 * range * k as f64 / (points - 1) as f64;
    let mut header: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
    header.push("re".into());
    header.push("im".into());
    let mut rows = Vec::with_capacity(points * points);
    for i in 0..points {
        for j in 0..points {
            let mut x = base.clone();
            x[ax0] = coord(i);
            x[ax1] = coord(j);
            let v = rho.eval_real(&x);
            let mut row: Vec<String> = (0..dim).map(|k| fmt_f(x[k])).collect();
            row.push(fmt_f(v.re));
            row.push(fmt_f(v.im));
            rows.push(row);
        }
    }
    Ok((header, rows))
}

#[allow(clippy::too_many_arguments)] // one shared sink/format/table fan-out
fn emit_table(
    sink: &mut Sink,
    name_stem: &str,
    kind: &'static str,
    detail: Value,
    format: &str,
    header: &[String],
    rows: &[Vec<String>],
    json_body: &Value,
) -> Result<(), CliError> {
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    if sink.enabled() {
        match format {
            "json" => sink.emit(
                &format!("{name_stem}.json"),
                kind,
                detail,
                serde_json::to_string_pretty(json_body)
                    .map_err(|e| CliError::Config(format!("serialization: {e}")))?
                    .as_bytes(),
            )?,
            _ => sink.emit(
                &format!("{name_stem}.csv"),
                kind,
                detail,
                &csv_table(&header_refs, rows),
            )?,
        }
    } else {
        match format {
            "json" => print_line(
                serde_json::to_string_pretty(json_body)
                    .map_err(|e| CliError::Config(format!("serialization: {e}")))?,
            ),
            _ => print_raw(&String::from_utf8_lossy(&csv_table(&header_refs, rows))),
        }
    }
    Ok(())
}

pub fn simulate(cfg: &RunConfig, sink: &mut Sink, format: &str) -> Result<(), CliError> {
    let grid = cfg.time_grid();
    let snapshot_horizon = cfg
        .output
        .wigner_times
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max);
    let bundle = build_bundle(cfg, cfg.grid.t_max.max(snapshot_horizon))?;
    let hbar = bundle.model.parameters["hbar"];
    let (shape, label, eigen) = build_eigenstate(cfg, &bundle.model)?;
    let delta0 = bundle
        .ss
        .liouville_density(0.0)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let rho0 = normalize_trace(&shape, delta0, hbar)
        .map_err(|e| CliError::Numerical(format!("trace normalization: {e}")))?;
    let state = EvolvedState::new(rho0, bundle.flow.clone())
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let route = route_of(cfg);

    let mut summaries = Vec::new();
    for name in &cfg.observables.names {
        let obs = bundle
            .model
            .observable(name)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let series = expectation_series(obs, &state, &bundle.ss, &grid, hbar, name, route)
            .map_err(|e| CliError::Numerical(format!("series `{name}`: {e}")))?;
        let header = vec!["t".to_string(), "re".to_string(), "im".to_string()];
        let rows: Vec<Vec<String>> = series
            .iter()
            .map(|(t, v)| vec![fmt_f(t), fmt_f(v.re), fmt_f(v.im)])
            .collect();
        let json_body = json!({
            "observable": name,
            "route": cfg.observables.route,
            "times": series.times(),
            "re": series.values().iter().map(|v| v.re).collect::<Vec<_>>(),
            "im": series.values().iter().map(|v| v.im).collect::<Vec<_>>(),
        });
        emit_table(
            sink,
            &format!("series_{name}"),
            "expectation-series",
            json!({ "observable": name, "columns": ["t", "re", "im"] }),
            format,
            &header,
            &rows,
            &json_body,
        )?;
        let first = series.values().first().copied().unwrap_or_default();
        let last = series.values().last().copied().unwrap_or_default();
        eprintln!(
            "series {name}: {} samples on [0, {}], value {} -> {}",
            grid.len(),
            fmt_f(cfg.grid.t_max),
            fmt_f(first.re),
            fmt_f(last.re),
        );
        summaries.push(json!({ "observable": name, "first": first.re, "last": last.re }));
    }

    for (k, &t) in cfg.output.wigner_times.iter().enumerate() {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(CliError::Config(format!(
                "output.wigner_times entries must be nonnegative, got {t}"
            )));
        }
        let rho_t = state
            .state_at(t)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        let (header, rows) = sample_grid(&rho_t, cfg)?;
        let json_body = json!({
            "time": t,
            "columns": header,
            "symbol": rho_t.to_json(),
        });
        emit_table(
            sink,
            &format!("wigner_t{k}"),
            "wigner-grid",
            json!({ "time": t, "axes": cfg.wigner.axes }),
            format,
            &header,
            &rows,
            &json_body,
        )?;
    }

    sink.finish(
        "simulate",
        cfg,
        json!({
            "model": bundle.model.name,
            "hbar": hbar,
            "omega0": matrix_rows(&(cfg.seed.omega0_scale * bundle.model.omega0.clone())),
            "state": { "label": label, "eigenvalues": eigen },
            "series": summaries,
        }),
    )
}

pub fn verify(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let opts = VerifyOptions {
        seed: cfg.verify.seed,
        hbar_scale: cfg.verify.hbar_scale,
        omega0_scale: cfg.verify.omega0_scale,
    };
    let results =
        run_all(&opts).map_err(|e| CliError::Numerical(format!("verify battery: {e}")))?;
    for r in &results {
        print_line(format!(
            "{} {:<28} measured {:>10.3e} (tol {:>8.1e})  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.measured,
            r.tolerance,
            r.detail
        ));
    }
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.name.as_str())
        .collect();
    sink.emit(
        "verify_report.json",
        "verify-report",
        json!({ "checks": results.len(), "failed": failed.len() }),
        serde_json::to_string_pretty(&results)
            .map_err(|e| CliError::Config(format!("serialization: {e}")))?
            .as_bytes(),
    )?;
    sink.finish(
        "verify",
        cfg,
        json!({
            "options": opts,
            "passed": failed.is_empty(),
        }),
    )?;
    print_line(format!(
        "verify: {}/{} checks passed",
        results.len() - failed.len(),
        results.len()
    ));
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(format!(
            "failed checks: {}",
            failed.join(", ")
        )))
    }
}

pub fn spectrum(cfg: &RunConfig, sink: &mut Sink, format: &str) -> Result<(), CliError> {
    let model = build_model(cfg)?;
    let hbar = model.parameters["hbar"];
    let (header, rows, json_rows): (Vec<String>, Vec<Vec<String>>, Vec<Value>) =
        match model.name.as_str() {
            name if name.starts_with("damped-oscillator") => {
                let omega = model.parameters["omega"];
                let mut rows = Vec::new();
                let mut json_rows = Vec::new();
                for n in 0..=cfg.spectrum.n_max {
                    let spec = OscillatorSpec { omega, hbar, n };
                    rows.push(vec![n.to_string(), fmt_f(spec.energy())]);
                    json_rows.push(json!({ "n": n, "E": spec.energy() }));
                }
                (vec!["n".into(), "E".into()], rows, json_rows)
            }
            "magnetic-charge" => {
                let b_eff = model.parameters["b_eff"];
                let mut rows = Vec::new();
                let mut json_rows = Vec::new();
                for n in 0..=cfg.spectrum.n_max {
                    for l in 0..=cfg.spectrum.l_max {
                        let spec = MagneticStateSpec { b_eff, hbar, n, l };
                        rows.push(vec![
                            n.to_string(),
                            l.to_string(),
                            fmt_f(spec.energy()),
                            fmt_f(spec.angular_momentum()),
                        ]);
                        json_rows.push(json!({
                            "n": n,
                            "l": l,
                            "E": spec.energy(),
                            "M": spec.angular_momentum(),
                        }));
                    }
                }
                (
                    vec!["n".into(), "l".into(), "E".into(), "M".into()],
                    rows,
                    json_rows,
                )
            }
            other => {
                return Err(CliError::Config(format!(
                    "model `{other}` has no closed-form spectrum"
                )))
            }
        };
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    // The table always goes to stdout; artifacts are written when --out is set.
    match format {
        "json" => print_line(
            serde_json::to_string_pretty(&json_rows)
                .map_err(|e| CliError::Config(format!("serialization: {e}")))?,
        ),
        _ => print_raw(&String::from_utf8_lossy(&csv_table(&header_refs, &rows))),
    }
    if sink.enabled() {
        match format {
            "json" => sink.emit(
                "spectrum.json",
                "spectrum-table",
                json!({ "columns": header }),
                serde_json::to_string_pretty(&json_rows)
                    .map_err(|e| CliError::Config(format!("serialization: {e}")))?
                    .as_bytes(),
            )?,
            _ => sink.emit(
                "spectrum.csv",
                "spectrum-table",
                json!({ "columns": header }),
                &csv_table(&header_refs, &rows),
            )?,
        }
    }
    sink.finish(
        "spectrum",
        cfg,
        json!({ "model": model.name, "hbar": hbar }),
    )
}

pub fn models(format: &str) -> Result<(), CliError> {
    let entries = catalogue();
    if format == "json" {
        let body: Vec<Value> = entries
            .iter()
            .map(|e| {
                json!({
                    "name": e.name,
                    "parameters": e.parameters,
                    "description": e.description,
                })
            })
            .collect();
        print_line(
            serde_json::to_string_pretty(&body)
                .map_err(|e| CliError::Config(format!("serialization: {e}")))?,
        );
    } else {
        for e in entries {
            print_line(e.name);
            print_line(format!("  parameters: {}", e.parameters.join(", ")));
            print_line(format!("  {}", e.description));
        }
    }
    Ok(())
}

pub fn action_data(cfg: &RunConfig, sink: &mut Sink, format: &str) -> Result<(), CliError> {
    let bundle = build_bundle(cfg, cfg.grid.t_max)?;
    let grid = cfg.time_grid();
    let dim = bundle.model.system.dim();

    let mut header = vec!["t".to_string()];
    for i in 0..dim {
        for j in 0..dim {
            header.push(format!("omega_{i}_{j}"));
        }
    }
    for i in 0..dim {
        for j in 0..dim {
            header.push(format!("b_{i}_{j}"));
        }
    }
    for i in 0..dim {
        header.push(format!("c_{i}"));
    }
    header.push("delta".into());

    let mut rows = Vec::with_capacity(grid.len());
    let mut times = Vec::new();
    let mut omegas = Vec::new();
    let mut bs = Vec::new();
    let mut cs = Vec::new();
    let mut deltas = Vec::new();
    for &t in &grid {
        let omega = bundle
            .ss
            .omega_at(t)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        let data = bundle
            .ss
            .hamiltonian_coefficients(t)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        let mut row = vec![fmt_f(t)];
        row.extend(omega.iter_rows_owned());
        row.extend(data.b.iter_rows_owned());
        row.extend(data.c.iter().map(|&v| fmt_f(v)));
        row.push(fmt_f(data.delta));
        rows.push(row);
        times.push(t);
        omegas.push(matrix_rows(&omega));
        bs.push(matrix_rows(&data.b));
        cs.push(data.c.iter().cloned().collect::<Vec<f64>>());
        deltas.push(data.delta);
    }
    let json_body = json!({
        "model": bundle.model.name,
        "times": times,
        "omega": omegas,
        "b_quadratic": bs,
        "c_linear": cs,
        "delta": deltas,
    });
    emit_table(
        sink,
        "action_data",
        "structure-tables",
        json!({ "columns": header.len(), "samples": grid.len() }),
        format,
        &header,
        &rows,
        &json_body,
    )?;
    sink.finish(
        "action-data",
        cfg,
        json!({ "model": bundle.model.name, "dim": dim }),
    )
}

pub fn wigner_grid(cfg: &RunConfig, sink: &mut Sink, format: &str) -> Result<(), CliError> {
    let horizon = cfg.wigner.times.iter().cloned().fold(0.0_f64, f64::max);
    let bundle = build_bundle(cfg, horizon)?;
    let hbar = bundle.model.parameters["hbar"];
    let (shape, label, eigen) = build_eigenstate(cfg, &bundle.model)?;
    let delta0 = bundle
        .ss
        .liouville_density(0.0)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let rho0 = normalize_trace(&shape, delta0, hbar)
        .map_err(|e| CliError::Numerical(format!("trace normalization: {e}")))?;

    let mut snapshot_info = Vec::new();
    for (k, &t) in cfg.wigner.times.iter().enumerate() {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(CliError::Config(format!(
                "wigner.times entries must be nonnegative, got {t}"
            )));
        }
        let rho_t =
            evolve_state(&rho0, &bundle.flow, t).map_err(|e| CliError::Numerical(e.to_string()))?;
        let (header, rows) = sample_grid(&rho_t, cfg)?;
        let delta_t = bundle
            .ss
            .liouville_density(t)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        let json_body = json!({
            "time": t,
            "columns": header,
            "delta": delta_t,
            "symbol": rho_t.to_json(),
        });
        emit_table(
            sink,
            &format!("wigner_t{k}"),
            "wigner-grid",
            json!({ "time": t, "axes": cfg.wigner.axes, "delta": delta_t }),
            format,
            &header,
            &rows,
            &json_body,
        )?;
        if sink.enabled() && format != "json" {
            // The exact symbol data rides along as JSON next to the CSV grid.
            sink.emit(
                &format!("wigner_symbol_t{k}.json"),
                "symbol-dump",
                json!({ "time": t }),
                serde_json::to_string_pretty(&rho_t.to_json())
                    .map_err(|e| CliError::Config(format!("serialization: {e}")))?
                    .as_bytes(),
            )?;
        }
        snapshot_info.push(json!({ "index": k, "time": t, "delta": delta_t }));
    }
    sink.finish(
        "wigner-grid",
        cfg,
        json!({
            "model": bundle.model.name,
            "hbar": hbar,
            "state": { "label": label, "eigenvalues": eigen },
            // Mass normalization of a sampled symbol: (2πħ)^{-n} Δ(t) ∫ρ = 1.
            "snapshots": snapshot_info,
        }),
    )
}

trait IterRowsOwned {
    fn iter_rows_owned(&self) -> Vec<String>;
}

impl IterRowsOwned for DMatrix<f64> {
    fn iter_rows_owned(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.nrows() * self.ncols());
        for i in 0..self.nrows() {
            for j in 0..self.ncols() {
                out.push(fmt_f(self[(i, j)]));
            }
        }
        out
    }
}
