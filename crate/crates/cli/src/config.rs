//! Run configuration: a TOML tree with a strict schema (unknown keys are
//! rejected), shipped defaults for every section, and dotted-path overrides
//! from the command line.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

fn default_model_name() -> String {
    "damped-oscillator".into()
}

fn default_hbar() -> f64 {
    1.0
}

fn default_t_max() -> f64 {
    10.0
}

fn default_samples() -> usize {
    101
}

fn default_observables() -> Vec<String> {
    vec!["H".into()]
}

fn default_route() -> String {
    "direct".into()
}

fn default_format() -> String {
    "csv".into()
}

fn default_scale() -> f64 {
    1.0
}

fn default_n_max() -> usize {
    3
}

fn default_wigner_times() -> Vec<f64> {
    vec![0.0]
}

fn default_wigner_range() -> f64 {
    3.0
}

fn default_wigner_points() -> usize {
    41
}

fn default_wigner_axes() -> Vec<usize> {
    vec![0, 1]
}

fn default_verify_seed() -> u64 {
    7
}

fn default_verify_omega0_scale() -> f64 {
    3.0
}

fn default_eigen_residual() -> f64 {
    1e-9
}

fn default_unit_trace() -> f64 {
    1e-10
}

fn default_series_match() -> f64 {
    1e-9
}

/// Model selection and physical parameters. Only the fields relevant to the
/// chosen model are read; the rest keep their defaults.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_model_name")]
    pub name: String,
    /// Oscillator frequency ω.
    #[serde(default)]
    pub omega: Option<f64>,
    /// Oscillator friction α.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Magnetic model: physical charge e.
    #[serde(default)]
    pub e: Option<f64>,
    /// Magnetic model: field strength.
    #[serde(default)]
    pub h_field: Option<f64>,
    /// Magnetic model: direct friction-rate override (skips the reduction).
    #[serde(default)]
    pub a_rate: Option<f64>,
    /// Magnetic model: direct cyclotron-frequency override.
    #[serde(default)]
    pub b_eff: Option<f64>,
    /// Generic model: coefficient matrix rows.
    #[serde(default)]
    pub a: Option<Vec<Vec<f64>>>,
    /// Generic model: source vector.
    #[serde(default)]
    pub j: Option<Vec<f64>>,
    /// Generic model: seed-form rows.
    #[serde(default)]
    pub omega0: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            name: "damped-oscillator".into(),
            omega: None,
            alpha: None,
            e: None,
            h_field: None,
            a_rate: None,
            b_eff: None,
            a: None,
            j: None,
            omega0: None,
            hbar: 1.0,
        }
    }
}

/// Which eigenstate to evolve.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    #[serde(default)]
    pub n: usize,
    /// Second quantum number; magnetic model only.
    #[serde(default)]
    pub l: usize,
}

/// Uniform time grid for series output.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            t_max: default_t_max(),
            samples: default_samples(),
        }
    }
}

/// Observables to evaluate along the evolution.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesConfig {
    #[serde(default = "default_observables")]
    pub names: Vec<String>,
    /// Expectation route: "direct" (evolve the state) or "transported"
    /// (pull the observable back along the flow; preferable on long
    /// horizons of contracting systems).
    #[serde(default = "default_route")]
    pub route: String,
}

impl Default for ObservablesConfig {
    fn default() -> Self {
        ObservablesConfig {
            names: default_observables(),
            route: default_route(),
        }
    }
}

/// Tolerances recorded in manifests and used by consistency checks.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_eigen_residual")]
    pub eigen_residual: f64,
    #[serde(default = "default_unit_trace")]
    pub unit_trace: f64,
    #[serde(default = "default_series_match")]
    pub series_match: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eigen_residual: default_eigen_residual(),
            unit_trace: default_unit_trace(),
            series_match: default_series_match(),
        }
    }
}

/// Output format selection (the `--format` flag wins over this).
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_format")]
    pub format: String,
    /// Snapshot times at which `simulate` also writes phase-space grids.
    #[serde(default)]
    pub wigner_times: Vec<f64>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            format: default_format(),
            wigner_times: Vec::new(),
        }
    }
}

/// Seed-form override: the constant seed is scaled by this factor. Physical
/// predictions must not depend on it.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    #[serde(default = "default_scale")]
    pub omega0_scale: f64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig {
            omega0_scale: default_scale(),
        }
    }
}

/// Quantum-number ranges for the `spectrum` command.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// Range of the second quantum number; magnetic model only.
    #[serde(default = "default_n_max")]
    pub l_max: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            n_max: default_n_max(),
            l_max: default_n_max(),
        }
    }
}

/// Phase-space sampling grid for the `wigner-grid` command.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct WignerConfig {
    #[serde(default = "default_wigner_times")]
    pub times: Vec<f64>,
    /// Half-width of the sampled square.
    #[serde(default = "default_wigner_range")]
    pub range: f64,
    /// Points per varied axis.
    #[serde(default = "default_wigner_points")]
    pub points: usize,
    /// The two coordinate axes spanned by the grid (others stay fixed).
    #[serde(default = "default_wigner_axes")]
    pub axes: Vec<usize>,
    /// Values of the remaining coordinates (defaults to the origin).
    #[serde(default)]
    pub fixed: Vec<f64>,
}

impl Default for WignerConfig {
    fn default() -> Self {
        WignerConfig {
            times: default_wigner_times(),
            range: default_wigner_range(),
            points: default_wigner_points(),
            axes: default_wigner_axes(),
            fixed: Vec::new(),
        }
    }
}

/// Options for the `verify` command, including fault injection used to show
/// which checks are sensitive to which defect.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_verify_seed")]
    pub seed: u64,
    /// Scales ħ inside the star-product checks; ≠ 1 makes eigen-relations
    /// fail while algebraic identities keep holding.
    #[serde(default = "default_scale")]
    pub hbar_scale: f64,
    /// Scalar multiple applied to the seed in the paired-run comparison.
    #[serde(default = "default_verify_omega0_scale")]
    pub omega0_scale: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: default_verify_seed(),
            hbar_scale: default_scale(),
            omega0_scale: default_verify_omega0_scale(),
        }
    }
}

/// The whole run configuration. Every section is optional in the file; the
/// shipped defaults describe the damped oscillator's first excited state.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub state: StateConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub observables: ObservablesConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: SeedConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub wigner: WignerConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config deserializes from defaults")
    }
}

impl RunConfig {
    /// Cross-field checks that the schema alone cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        let known = starflow::models::catalogue();
        if !known.iter().any(|m| m.name == self.model.name) {
            return Err(CliError::Config(format!(
                "unknown model `{}`; available: {}",
                self.model.name,
                known.iter().map(|m| m.name).collect::<Vec<_>>().join(", ")
            )));
        }
        if !(self.model.hbar > 0.0 && self.model.hbar.is_finite()) {
            return Err(CliError::Config(format!(
                "model.hbar must be positive and finite, got {}",
                self.model.hbar
            )));
        }
        if !(self.grid.t_max >= 0.0 && self.grid.t_max.is_finite()) {
            return Err(CliError::Config(format!(
                "grid.t_max must be nonnegative and finite, got {}",
                self.grid.t_max
            )));
        }
        if self.grid.samples == 0 {
            return Err(CliError::Config("grid.samples must be ≥ 1".into()));
        }
        match self.output.format.as_str() {
            "csv" | "json" => {}
            other => {
                return Err(CliError::Config(format!(
                    "output.format must be `csv` or `json`, got `{other}`"
                )))
            }
        }
        match self.observables.route.as_str() {
            "direct" | "transported" => {}
            other => {
                return Err(CliError::Config(format!(
                    "observables.route must be `direct` or `transported`, got `{other}`"
                )))
            }
        }
        if !(self.seed.omega0_scale.is_finite() && self.seed.omega0_scale != 0.0) {
            return Err(CliError::Config(format!(
                "seed.omega0_scale must be finite and nonzero, got {}",
                self.seed.omega0_scale
            )));
        }
        if self.wigner.axes.len() != 2 || self.wigner.axes[0] == self.wigner.axes[1] {
            return Err(CliError::Config(
                "wigner.axes must name two distinct coordinate axes".into(),
            ));
        }
        if self.wigner.points < 2 {
            return Err(CliError::Config("wigner.points must be ≥ 2".into()));
        }
        if !(self.wigner.range > 0.0 && self.wigner.range.is_finite()) {
            return Err(CliError::Config(format!(
                "wigner.range must be positive and finite, got {}",
                self.wigner.range
            )));
        }
        Ok(())
    }

    /// The uniform output time grid.
    pub fn time_grid(&self) -> Vec<f64> {
        if self.grid.t_max == 0.0 || self.grid.samples == 1 {
            return vec![0.0];
        }
        (0..self.grid.samples)
            .map(|k| self.grid.t_max * k as f64 / (self.grid.samples - 1) as f64)
            .collect()
    }
}

/// Parses one `--override KEY=VALUE` argument into a path and a TOML value.
/// The value is parsed as TOML first (numbers, booleans, arrays, quoted
/// strings); anything that does not parse is taken as a bare string.
fn parse_override(arg: &str) -> Result<(Vec<String>, toml::Value), CliError> {
    let (key, raw) = arg.split_once('=').ok_or_else(|| {
        CliError::Config(format!("override `{arg}` is not of the form KEY=VALUE"))
    })?;
    let path: Vec<String> = key.split('.').map(str::to_string).collect();
    if path.iter().any(|s| s.is_empty()) {
        return Err(CliError::Config(format!(
            "override key `{key}` has an empty path segment"
        )));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed override value"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    Ok((path, value))
}

fn apply_override(
    root: &mut toml::Table,
    path: &[String],
    value: toml::Value,
) -> Result<(), CliError> {
    let mut table = root;
    for seg in &path[..path.len() - 1] {
        table = table
            .entry(seg.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                CliError::Config(format!(
                    "override path segment `{seg}` does not name a table"
                ))
            })?;
    }
    table.insert(path.last().expect("nonempty path").clone(), value);
    Ok(())
}

/// Loads, overrides, schema-checks, and validates the configuration. With no
/// `--config` the shipped defaults are used (overrides still apply).
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let text = match path {
        Some(p) => fs::read_to_string(p)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?,
        None => String::new(),
    };
    let config = if overrides.is_empty() {
        // Direct parse keeps line/column information in diagnostics.
        toml::from_str::<RunConfig>(&text)
            .map_err(|e| CliError::Config(format!("config schema violation: {e}")))?
    } else {
        let mut tree = toml::from_str::<toml::Table>(&text)
            .map_err(|e| CliError::Config(format!("config parse error: {e}")))?;
        for arg in overrides {
            let (path, value) = parse_override(arg)?;
            apply_override(&mut tree, &path, value)?;
        }
        RunConfig::deserialize(toml::Value::Table(tree))
            .map_err(|e| CliError::Config(format!("config schema violation: {e}")))?
    };
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_validate() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.model.name, "damped-oscillator", "default model");
        assert!(cfg.validate().is_ok(), "shipped defaults must validate");
        assert_eq!(cfg.time_grid().len(), 101, "default grid length");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err =
            toml::from_str::<RunConfig>("[model]\nname = \"damped-oscillator\"\nfrobnicate = 1\n")
                .unwrap_err();
        assert!(
            err.to_string().contains("frobnicate"),
            "diagnostic should name the offending field: {err}"
        );
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = load(
            None,
            &[
                "model.name=magnetic-charge".into(),
                "model.b_eff=2.0".into(),
                "state.l=2".into(),
                "observables.names=[\"H\",\"L\"]".into(),
            ],
        )
        .expect("overridden defaults");
        assert_eq!(cfg.model.name, "magnetic-charge");
        assert_eq!(cfg.model.b_eff, Some(2.0));
        assert_eq!(cfg.state.l, 2);
        assert_eq!(cfg.observables.names, vec!["H", "L"]);
    }

    #[test]
    fn bad_override_forms_are_config_errors() {
        assert!(load(None, &["no-equals-sign".into()]).is_err());
        assert!(load(None, &["model..name=x".into()]).is_err());
        assert!(load(None, &["model.name.deep=x".into()]).is_err());
        assert!(load(None, &["model.nonexistent_field=1".into()]).is_err());
    }

    #[test]
    fn zero_t_max_collapses_the_grid() {
        let cfg = load(None, &["grid.t_max=0.0".into()]).expect("config");
        assert_eq!(cfg.time_grid(), vec![0.0], "single-row grid at t_max = 0");
    }
}
