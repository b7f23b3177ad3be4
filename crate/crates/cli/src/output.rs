//! Output artifacts. Every JSON document and CSV file carries the version
//! and the resolved configuration.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use otflow::geometry::write_annotated_csv;
use otflow::{PeriodicDensity, Samples};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// What every artifact of one run shares.
pub struct Context {
    pub command: String,
    pub resolved: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    otflow_version: &'static str,
    command: &'a str,
    config: &'a BTreeMap<String, String>,
    #[serde(flatten)]
    body: &'a T,
}

impl Context {
    /// `# ` comment lines for CSV files.
    pub fn preamble(&self) -> Vec<String> {
        let mut lines = vec![format!("otflow {VERSION}"), format!("command = {}", self.command)];
        lines.extend(self.resolved.iter().map(|(k, v)| format!("{k} = {v}")));
        lines
    }

    pub fn to_json<T: Serialize>(&self, body: &T) -> CliResult<String> {
        let doc = Envelope { otflow_version: VERSION, command: &self.command, config: &self.resolved, body };
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }

    pub fn print<T: Serialize>(&self, body: &T) -> CliResult<()> {
        let text = self.to_json(body)?;
        std::io::stdout().lock().write_all(text.as_bytes())?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&self, path: &Path, body: &T) -> CliResult<()> {
        std::fs::write(path, self.to_json(body)?)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
    }

    pub fn write_csv(&self, path: &Path, column: &str, w: &impl Samples) -> CliResult<()> {
        write_annotated_csv(path, column, w, &self.preamble())
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
    }

    /// A table with the preamble as comments.
    pub fn write_table(&self, path: &Path, header: &[&str], rows: &[Vec<f64>]) -> CliResult<()> {
        let mut file = std::fs::File::create(path)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
        for line in self.preamble() {
            writeln!(file, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(|v| format!("{v:.17e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Trajectory document shared by `flow` and `pde` and read by `compare`.
#[derive(Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub metadata: Metadata,
    pub steps: Vec<StepRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<Vec<StudyRow>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Metadata {
    pub spec: String,
    /// JKO step; null for the PDE.
    pub tau: Option<f64>,
    pub n: usize,
    pub seed: u64,
    pub scheme: String,
    pub horizon: f64,
    pub initial: String,
    /// Internal PDE step; null for JKO.
    pub dt: Option<f64>,
    pub budget: Option<BudgetRecord>,
    pub failure: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BudgetRecord {
    pub c: f64,
    pub m: f64,
    pub delta: f64,
    pub exit_step: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StepRecord {
    pub n: usize,
    pub t: f64,
    pub energy: f64,
    pub w2_increment: f64,
    /// Euler-Lagrange residual; null for the initial state and the PDE.
    pub residual: Option<f64>,
    pub min_density: f64,
    /// Sidecar CSV, relative to the trajectory file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_file: Option<String>,
}

/// One row of a tau-halving convergence table.
#[derive(Debug, Serialize, Deserialize)]
pub struct StudyRow {
    pub tau: f64,
    pub steps: usize,
    pub max_sup_gap: f64,
    pub final_sup_gap: f64,
    pub max_l2_gap: f64,
    /// log2 of the previous row's final gap over this one.
    pub observed_order: Option<f64>,
}

/// Directory `<stem>_densities` next to `output`.
pub fn sidecar_dir(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trajectory".into());
    output.with_file_name(format!("{stem}_densities"))
}

/// Writes state `k` into the sidecar and returns its relative path.
pub fn dump_state(ctx: &Context, dir: &Path, k: usize, u: &PeriodicDensity) -> CliResult<String> {
    let name = format!("step_{k:05}.csv");
    ctx.write_csv(&dir.join(&name), "u", u)?;
    let parent = dir.file_name().expect("sidecar has a name").to_string_lossy();
    Ok(format!("{parent}/{name}"))
}
