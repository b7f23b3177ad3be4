//! Command-line definition and the `key = value` config file.
//!
//! File entries are spliced in as `--key value` right after the subcommand
//! name, so clap validates them with the same parsers as flags, and a flag
//! given later on the command line overrides them.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use otflow::energy::EnergySpec;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "otflow", version, about = "Wasserstein gradient flows of higher-order energies on the circle")]
pub struct Cli {
    /// Plain-text file of `key = value` lines; command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// W2 distance between two densities, optionally dumping the optimal map.
    Distance(DistanceArgs),
    /// Displacement interpolant between two densities.
    Geodesic(GeodesicArgs),
    /// Energy of a density and its first variation.
    Energy(EnergyArgs),
    /// Second derivative of an energy along a geodesic.
    Hessian(HessianArgs),
    /// Restricted lambda-convexity constant of a sub-level set.
    Lambda(LambdaArgs),
    /// Non-convexity counterexample sweep for the Dirichlet energy.
    Counterexample(CounterexampleArgs),
    /// Minimizing-movement (JKO) flow.
    Flow(FlowArgs),
    /// Reference solution of the gradient-flow PDE.
    Pde(PdeArgs),
    /// Gaps between two trajectory files.
    Compare(CompareArgs),
    /// Sampled lambda-convexity test on a restricted domain.
    Certify(CertifyArgs),
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Grid size, a power of two in [64, 8192].
    #[arg(long, default_value_t = 256, value_parser = parse_n)]
    pub n: usize,
    /// Seed for random initial data and sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// Source density descriptor.
    #[arg(long)]
    pub source: String,
    /// Target density descriptor.
    #[arg(long)]
    pub target: String,
    /// CSV file for the map (`x,T`).
    #[arg(long, value_name = "FILE")]
    pub map_output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GeodesicArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub source: String,
    #[arg(long)]
    pub target: String,
    /// Interpolation parameter in [0, 1].
    #[arg(long, default_value_t = 0.5, value_parser = parse_unit)]
    pub s: f64,
    /// CSV file for the interpolant (`x,u`).
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnergyArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// dirichlet, hk:K, power:A, log, fisher or perturbed:EPS.
    #[arg(long, default_value = "dirichlet", value_parser = parse_energy)]
    pub energy: EnergySpec,
    #[arg(long)]
    pub input: String,
    /// CSV file for dE/du (`x,phi`).
    #[arg(long, value_name = "FILE")]
    pub variation_output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HessianArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value = "dirichlet", value_parser = parse_energy)]
    pub energy: EnergySpec,
    #[arg(long)]
    pub input: String,
    /// Tangent field: `sine:amp=A,mode=K`, `cosine:amp=A,mode=K` or a CSV with header `x,f`.
    #[arg(long, default_value = "sine:amp=1,mode=1")]
    pub field: String,
    /// Step of the finite-difference cross-check.
    #[arg(long, default_value_t = 1e-3, value_parser = parse_positive)]
    pub step: f64,
}

#[derive(Debug, Args)]
pub struct LambdaArgs {
    #[arg(long, default_value = "dirichlet", value_parser = parse_energy)]
    pub energy: EnergySpec,
    /// Energy ceiling.
    #[arg(long, value_parser = parse_positive)]
    pub c: f64,
    /// Positivity floor.
    #[arg(long, value_parser = parse_positive)]
    pub m: f64,
}

#[derive(Debug, Args)]
pub struct CounterexampleArgs {
    /// Grid size, a power of two in [64, 8192].
    #[arg(long, default_value_t = 8192, value_parser = parse_n)]
    pub n: usize,
    /// Scales to sample.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    pub h: Vec<u32>,
    /// Convexity moduli to refute.
    #[arg(long, value_delimiter = ',', default_value = "-10,-1000,-100000", allow_negative_numbers = true)]
    pub lambda: Vec<f64>,
    /// Largest scale tried when searching witnesses.
    #[arg(long, default_value_t = 1 << 20)]
    pub max_h: u32,
    /// CSV file with columns h, A, B, A/h^2.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value = "dirichlet", value_parser = parse_energy)]
    pub energy: EnergySpec,
    /// `uniform`, `sine:amp=A,mode=K`, `random:degree=D,amp=A`, `paper-ce:h=H` or a CSV path.
    #[arg(long, default_value = "sine:amp=0.1,mode=1")]
    pub initial: String,
    /// Time step.
    #[arg(long, value_parser = parse_positive)]
    pub tau: f64,
    #[arg(long, value_parser = parse_positive)]
    pub horizon: f64,
    /// `c=C,m=M,delta=D`; omitted parts are derived from the initial density.
    #[arg(long, default_value = "auto", value_parser = parse_budget)]
    pub budget: BudgetArg,
    /// Keep stepping after the trajectory leaves the budget.
    #[arg(long)]
    pub ignore_budget: bool,
    /// Also run tau/2, ..., tau/2^K against a PDE reference and report a convergence table.
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u32).range(0..=8))]
    pub halvings: u32,
    /// Trajectory JSON; stdout when absent.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Write every state to `<output stem>_densities/`.
    #[arg(long)]
    pub dump_densities: bool,
}

#[derive(Debug, Args)]
pub struct PdeArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value = "dirichlet", value_parser = parse_energy)]
    pub energy: EnergySpec,
    #[arg(long, default_value = "sine:amp=0.1,mode=1")]
    pub initial: String,
    #[arg(long, value_parser = parse_positive)]
    pub horizon: f64,
    /// Recording interval; horizon/100 when absent.
    #[arg(long, value_parser = parse_positive)]
    pub interval: Option<f64>,
    /// Internal step: `auto` or a number.
    #[arg(long, default_value = "auto", value_parser = parse_dt)]
    pub dt: DtArg,
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub dump_densities: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Trajectory JSON (typically a flow).
    pub first: PathBuf,
    /// Trajectory JSON (typically a pde reference).
    pub second: PathBuf,
    /// Relative tolerance when matching record times.
    #[arg(long, default_value_t = 1e-9, value_parser = parse_positive)]
    pub time_tolerance: f64,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value = "dirichlet", value_parser = parse_energy)]
    pub energy: EnergySpec,
    /// Center of the Wasserstein ball.
    #[arg(long, default_value = "uniform")]
    pub center: String,
    #[arg(long, value_parser = parse_positive)]
    pub c: f64,
    #[arg(long, value_parser = parse_positive)]
    pub m: f64,
    /// Radius of the Wasserstein ball.
    #[arg(long, default_value_t = 0.05, value_parser = parse_positive)]
    pub delta: f64,
    /// Number of sampled geodesics.
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    /// Degree of the random perturbations.
    #[arg(long, default_value_t = 4)]
    pub degree: usize,
    /// Relative tolerance of the convexity test.
    #[arg(long, default_value_t = 1e-3, value_parser = parse_positive)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BudgetArg {
    pub c: Option<f64>,
    pub m: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtArg {
    Auto,
    Fixed(f64),
}

fn parse_n(s: &str) -> Result<usize, String> {
    let n: usize = s.trim().parse().map_err(|e| format!("{e}"))?;
    if !n.is_power_of_two() || !(64..=8192).contains(&n) {
        return Err(format!("{n} is not a power of two in [64, 8192]"));
    }
    Ok(n)
}

fn parse_float(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|e| format!("{e}"))?;
    if !v.is_finite() {
        return Err(format!("{v} is not finite"));
    }
    Ok(v)
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v = parse_float(s)?;
    if v <= 0.0 {
        return Err(format!("{v} must be positive"));
    }
    Ok(v)
}

fn parse_unit(s: &str) -> Result<f64, String> {
    let v = parse_float(s)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("{v} is outside [0, 1]"));
    }
    Ok(v)
}

fn parse_energy(s: &str) -> Result<EnergySpec, String> {
    s.parse::<EnergySpec>().map_err(|e| e.to_string())
}

fn parse_dt(s: &str) -> Result<DtArg, String> {
    if s.trim() == "auto" {
        return Ok(DtArg::Auto);
    }
    parse_positive(s).map(DtArg::Fixed)
}

fn parse_budget(s: &str) -> Result<BudgetArg, String> {
    let mut b = BudgetArg::default();
    if s.trim() == "auto" {
        return Ok(b);
    }
    for (key, value) in crate::initial::parse_params(s)? {
        let v = parse_float(&value)?;
        let slot = match key.as_str() {
            "c" => &mut b.c,
            "m" => &mut b.m,
            "delta" => &mut b.delta,
            _ => return Err(format!("unknown budget key `{key}` (expected c, m, delta)")),
        };
        *slot = Some(v);
    }
    Ok(b)
}

/// Parsed command line plus the resolved configuration for echoing.
pub struct Invocation {
    pub cli: Cli,
    pub command: String,
    pub resolved: BTreeMap<String, String>,
}

pub fn parse(args: Vec<OsString>) -> Result<Invocation, CliError> {
    let mut cmd = Cli::command().mut_subcommands(|s| s.args_override_self(true));
    cmd.build();
    let (config, sub_index) = scan(&args);
    let mut args = args;
    if let Some(path) = &config {
        let entries = read_config(path)?;
        if let Some(i) = sub_index {
            let name = args[i].to_string_lossy().into_owned();
            if let Some(sub) = cmd.find_subcommand(&name) {
                let tokens = inject(&cmd, sub, &entries)?;
                args.splice(i + 1..i + 1, tokens.into_iter().map(OsString::from));
            }
        }
    }
    let matches = cmd.clone().try_get_matches_from(args)?;
    let cli = Cli::from_arg_matches(&matches)?;
    let (name, sub_matches) = matches.subcommand().expect("subcommand is required");
    let sub = cmd.find_subcommand(name).expect("matched subcommand exists");
    let mut resolved = BTreeMap::new();
    for arg in sub.get_arguments() {
        let id = arg.get_id().as_str();
        if matches!(id, "help" | "version" | "config") {
            continue;
        }
        let key = arg.get_long().unwrap_or(id).to_string();
        if arg.get_action().takes_values() {
            if let Some(raw) = sub_matches.get_raw(id) {
                let values: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
                resolved.insert(key, values.join(","));
            }
        } else {
            resolved.insert(key, sub_matches.get_flag(id).to_string());
        }
    }
    if let Some(path) = &cli.config {
        resolved.insert("config".into(), path.display().to_string());
    }
    Ok(Invocation { cli, command: name.to_string(), resolved })
}

/// Finds `--config FILE` anywhere and the index of the subcommand name.
fn scan(args: &[OsString]) -> (Option<PathBuf>, Option<usize>) {
    let mut config = None;
    let mut sub = None;
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            config = args.get(i + 1).map(PathBuf::from);
            i += 2;
            continue;
        }
        if let Some(p) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else if sub.is_none() && !s.starts_with('-') {
            sub = Some(i);
        }
        i += 1;
    }
    (config, sub)
}

struct Entry {
    line: usize,
    key: String,
    value: String,
}

fn read_config(path: &Path) -> Result<Vec<Entry>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut entries: Vec<Entry> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("{}:{}: expected `key = value`", path.display(), k + 1)));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"').to_string();
        if key.is_empty() {
            return Err(CliError::Usage(format!("{}:{}: empty key", path.display(), k + 1)));
        }
        if let Some(prev) = entries.iter().find(|e| e.key == key) {
            return Err(CliError::Usage(format!(
                "{}:{}: key `{key}` already set on line {}",
                path.display(),
                k + 1,
                prev.line
            )));
        }
        entries.push(Entry { line: k + 1, key, value });
    }
    Ok(entries)
}

fn inject(root: &clap::Command, sub: &clap::Command, entries: &[Entry]) -> Result<Vec<String>, CliError> {
    let mut tokens = Vec::new();
    for e in entries {
        if e.key == "config" {
            return Err(CliError::Usage(format!("line {}: config files cannot include other config files", e.line)));
        }
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(e.key.as_str())) else {
            let elsewhere = root
                .get_subcommands()
                .any(|s| s.get_arguments().any(|a| a.get_long() == Some(e.key.as_str())));
            if elsewhere {
                log::info!("config key `{}` does not apply to `{}`, ignored", e.key, sub.get_name());
                continue;
            }
            return Err(CliError::Usage(format!("unknown config key `{}` (line {})", e.key, e.line)));
        };
        if arg.get_action().takes_values() {
            tokens.push(format!("--{}", e.key));
            tokens.push(e.value.clone());
        } else {
            match e.value.as_str() {
                "true" => tokens.push(format!("--{}", e.key)),
                "false" => {}
                other => {
                    return Err(CliError::Usage(format!(
                        "config key `{}` (line {}) expects true or false, got `{other}`",
                        e.key, e.line
                    )))
                }
            }
        }
    }
    Ok(tokens)
}
