//! Density and field descriptors: built-in expressions or CSV paths.

use std::f64::consts::PI;
use std::path::Path;

use otflow::convexity::counterexample;
use otflow::geometry::{read_density_csv, read_field_csv};
use otflow::sampling::{rng_for, TrigPolynomial};
use otflow::{Error, Grid, PeriodicDensity, PeriodicField, Samples};

use crate::error::{CliError, CliResult};

/// Whether a command accepts densities with zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Positivity {
    Any,
    Strict,
}

/// Splits `a=1,b=2` into pairs.
pub fn parse_params(s: &str) -> Result<Vec<(String, String)>, String> {
    let mut out: Vec<(String, String)> = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("expected key=value, got `{part}`"))?;
        let k = k.trim().to_string();
        if out.iter().any(|(seen, _)| *seen == k) {
            return Err(format!("parameter `{k}` given twice"));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

/// Parameters of a built-in with defaults; unknown names are rejected.
struct Params {
    desc: String,
    given: Vec<(String, String)>,
}

impl Params {
    fn new(desc: &str, args: Option<&str>, allowed: &[&str]) -> CliResult<Self> {
        let given = parse_params(args.unwrap_or("")).map_err(|e| CliError::Usage(format!("`{desc}`: {e}")))?;
        if let Some((k, _)) = given.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(CliError::Usage(format!("`{desc}`: unknown parameter `{k}` (allowed: {})", allowed.join(", "))));
        }
        Ok(Params { desc: desc.to_string(), given })
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> CliResult<T> {
        match self.given.iter().find(|(k, _)| k == key) {
            None => Ok(default),
            Some((_, v)) => {
                v.parse().map_err(|_| CliError::Usage(format!("`{}`: bad value `{v}` for `{key}`", self.desc)))
            }
        }
    }
}

fn split(desc: &str) -> (&str, Option<&str>) {
    match desc.split_once(':') {
        Some((name, args)) => (name.trim(), Some(args)),
        None => (desc.trim(), None),
    }
}

/// Resolves a density descriptor on `grid`. `stream` separates the random
/// draws of different roles (source, target, ...) under one seed.
pub fn density(desc: &str, grid: Grid, seed: u64, stream: u64, need: Positivity) -> CliResult<PeriodicDensity> {
    let (name, args) = split(desc);
    let u = match name {
        "uniform" => {
            Params::new(desc, args, &[])?;
            PeriodicDensity::uniform(grid)
        }
        "sine" => {
            let p = Params::new(desc, args, &["amp", "mode"])?;
            let amp: f64 = p.get("amp", 0.5)?;
            let mode: u32 = p.get("mode", 1)?;
            if !(amp.abs() <= 1.0) || mode == 0 {
                return Err(CliError::Usage(format!("`{desc}`: need |amp| <= 1 and mode >= 1")));
            }
            PeriodicDensity::sine(grid, amp, mode)?
        }
        "random" => {
            let p = Params::new(desc, args, &["degree", "amp"])?;
            let degree: usize = p.get("degree", 4)?;
            let amp: f64 = p.get("amp", 0.3)?;
            if degree == 0 || !(0.0..1.0).contains(&amp) {
                return Err(CliError::Usage(format!("`{desc}`: need degree >= 1 and amp in [0, 1)")));
            }
            let mut rng = rng_for(seed, stream);
            let q = TrigPolynomial::random(&mut rng, degree, 1.0).sample(grid);
            let scale = amp / q.sup_norm().max(f64::MIN_POSITIVE);
            PeriodicDensity::normalized(q.values().iter().map(|v| 1.0 + scale * v).collect())?
        }
        "paper-ce" => {
            let p = Params::new(desc, args, &["h"])?;
            let h: u32 = p.get("h", 1)?;
            match counterexample(h, grid) {
                Ok(pair) => pair.u,
                Err(Error::Resolution(m)) => return Err(CliError::Usage(format!("`{desc}`: {m}"))),
                Err(e) => return Err(e.into()),
            }
        }
        _ => from_csv(desc, grid)?,
    };
    if need == Positivity::Strict && u.min() <= 0.0 {
        return Err(CliError::Usage(format!(
            "`{desc}` has minimum {:.3e}; this command needs a strictly positive density",
            u.min()
        )));
    }
    Ok(u)
}

fn from_csv(desc: &str, grid: Grid) -> CliResult<PeriodicDensity> {
    let path = Path::new(desc);
    if !path.is_file() {
        return Err(CliError::Usage(format!(
            "`{desc}` is neither a built-in (uniform, sine, random, paper-ce) nor a readable file"
        )));
    }
    let u = read_density_csv(path)?;
    if u.len() == grid.n() {
        return Ok(u);
    }
    log::info!("resampling {desc} from {} to {} points", u.len(), grid.n());
    Ok(u.resample(grid.n())?)
}

/// Resolves a tangent-field descriptor: `sine:amp=A,mode=K`,
/// `cosine:amp=A,mode=K`, or a CSV with header `x,f`.
pub fn field(desc: &str, grid: Grid) -> CliResult<PeriodicField> {
    let (name, args) = split(desc);
    let trig = |phase: f64| -> CliResult<PeriodicField> {
        let p = Params::new(desc, args, &["amp", "mode"])?;
        let amp: f64 = p.get("amp", 1.0)?;
        let mode: u32 = p.get("mode", 1)?;
        if !amp.is_finite() || mode == 0 {
            return Err(CliError::Usage(format!("`{desc}`: need finite amp and mode >= 1")));
        }
        let k = mode as f64;
        Ok(PeriodicField::from_fn(grid, |x| amp * (2.0 * PI * k * x + phase).sin())?)
    };
    match name {
        "sine" => trig(0.0),
        "cosine" => trig(0.5 * PI),
        _ => {
            let path = Path::new(desc);
            if !path.is_file() {
                return Err(CliError::Usage(format!("`{desc}` is neither sine, cosine nor a readable file")));
            }
            let f = read_field_csv(path, "f")?;
            if f.len() == grid.n() {
                Ok(f)
            } else {
                Ok(f.resample(grid.n())?)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(256).unwrap()
    }

    #[test]
    fn built_ins() {
        let u = density("uniform", grid(), 0, 0, Positivity::Strict).unwrap();
        assert!(u.values().iter().all(|v| (*v - 1.0).abs() < 1e-15));
        let s = density("sine:amp=0.5,mode=1", grid(), 0, 0, Positivity::Strict).unwrap();
        assert!((s.mass() - 1.0).abs() < 1e-14);
        assert!((s.values()[64] - 1.5).abs() < 1e-12);
        let r = density("random:degree=3,amp=0.2", grid(), 7, 0, Positivity::Strict).unwrap();
        assert!(r.min() > 0.75 && (r.mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn counterexample_density_is_for_convexity_commands_only() {
        let ce = density("paper-ce:h=2", grid(), 0, 0, Positivity::Any).unwrap();
        assert!((ce.mass() - 1.0).abs() < 1e-12);
        assert!(density("paper-ce:h=2", grid(), 0, 0, Positivity::Strict).is_err());
    }

    #[test]
    fn seeds_and_streams_are_reproducible() {
        let a = density("random", grid(), 3, 0, Positivity::Any).unwrap();
        let b = density("random", grid(), 3, 0, Positivity::Any).unwrap();
        let c = density("random", grid(), 3, 1, Positivity::Any).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn rejects_bad_descriptors() {
        for bad in ["sine:amp=2", "sine:phase=1", "random:amp=1", "nope", "paper-ce:h=64"] {
            let e = density(bad, grid(), 0, 0, Positivity::Any).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{bad}");
        }
        assert!(field("cosine:mode=0", grid()).is_err());
    }
}
