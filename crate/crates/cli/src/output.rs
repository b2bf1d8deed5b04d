//! Artifact writing: fixed float formatting for reproducible files, atomic
//! writes (temp + rename), and the run manifest shared by all commands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

/// All floats in artifacts go through this: 17 significant digits, enough to
/// round-trip an `f64` exactly.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Prints a line to stdout, tolerating a closed pipe (`starflow models | head`).
pub fn print_line(s: impl std::fmt::Display) {
    let _ = writeln!(std::io::stdout(), "{s}");
}

/// Prints raw text to stdout, tolerating a closed pipe.
pub fn print_raw(s: &str) {
    let _ = std::io::stdout().write_all(s.as_bytes());
}

/// Writes the file atomically: the content lands under a temporary name in
/// the same directory and is renamed into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let io_err =
        |e: std::io::Error| CliError::Config(format!("cannot write {}: {e}", path.display()));
    let mut file = fs::File::create(&tmp).map_err(io_err)?;
    file.write_all(bytes).map_err(io_err)?;
    file.sync_all().map_err(io_err)?;
    drop(file);
    fs::rename(&tmp, path).map_err(io_err)
}

/// One output file plus a short description for the manifest.
pub struct Artifact {
    pub file: String,
    pub kind: &'static str,
    pub detail: Value,
}

/// Accumulates artifacts for one command invocation and finishes with a
/// manifest that records everything needed to re-run it.
pub struct Sink {
    out_dir: Option<PathBuf>,
    artifacts: Vec<Artifact>,
}

impl Sink {
    pub fn new(out_dir: Option<PathBuf>) -> Self {
        Sink {
            out_dir,
            artifacts: Vec::new(),
        }
    }

    pub fn enabled(&self) -> bool {
        self.out_dir.is_some()
    }

    /// Writes `name` under the output directory (no-op without `--out`) and
    /// records it for the manifest.
    pub fn emit(
        &mut self,
        name: &str,
        kind: &'static str,
        detail: Value,
        bytes: &[u8],
    ) -> Result<(), CliError> {
        if let Some(dir) = &self.out_dir {
            write_atomic(&dir.join(name), bytes)?;
            self.artifacts.push(Artifact {
                file: name.to_string(),
                kind,
                detail,
            });
        }
        Ok(())
    }

    /// Writes `manifest.json` recording the command, configuration,
    /// tolerances, and every artifact emitted.
    pub fn finish(
        &mut self,
        command: &str,
        config: &RunConfig,
        extra: Value,
    ) -> Result<(), CliError> {
        let Some(dir) = &self.out_dir else {
            return Ok(());
        };
        let artifacts: Vec<Value> = std::mem::take(&mut self.artifacts)
            .iter()
            .map(|a| {
                json!({
                    "file": a.file,
                    "kind": a.kind,
                    "detail": a.detail,
                })
            })
            .collect();
        let manifest = json!({
            "command": command,
            "code_version": env!("CARGO_PKG_VERSION"),
            "config": serde_json::to_value(config)
                .map_err(|e| CliError::Config(format!("manifest serialization: {e}")))?,
            "extra": extra,
            "artifacts": artifacts,
        });
        let body = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Config(format!("manifest serialization: {e}")))?;
        write_atomic(&dir.join("manifest.json"), body.as_bytes())
    }
}

/// Renders a CSV table with a header row; every cell already stringified.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for &x in &[0.5, 1.5e-10, -3.2553e7, std::f64::consts::PI] {
            let s = fmt_f(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "17 digits round-trip {s}");
        }
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = std::env::temp_dir().join("starflow-output-test");
        let path = dir.join("table.csv");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"second");
        assert!(
            !path.with_extension("csv.tmp").exists(),
            "temporary file is renamed away"
        );
        let _ = fs::remove_dir_all(&dir);
    }
}
