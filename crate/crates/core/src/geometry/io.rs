//! CSV readers and writers for densities (`x,u`) and maps/fields (`x,T`).

use std::io::{Read, Write};
use std::path::Path;

use log::warn;

use super::{Grid, PeriodicDensity, PeriodicField, Samples};
use crate::error::{Error, Result};

/// Loader tolerance on the mass before a warning is issued.
const LOAD_MASS_TOLERANCE: f64 = 1e-6;

/// Reads a density with header `x,u`. Rows must be sorted with x_i = i/n;
/// lines starting with `#` are ignored. The samples are renormalized; a
/// warning is logged when the stored mass is off by more than 1e-6.
pub fn read_density_csv(path: impl AsRef<Path>) -> Result<PeriodicDensity> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_density(file, &path.as_ref().display().to_string())
}

/// Reads a field with header `x,<column>` under the same rules.
pub fn read_field_csv(path: impl AsRef<Path>, column: &str) -> Result<PeriodicField> {
    let file = std::fs::File::open(path.as_ref())?;
    PeriodicField::new(parse_columns(file, &path.as_ref().display().to_string(), column)?)
}

pub(crate) fn parse_density(reader: impl Read, name: &str) -> Result<PeriodicDensity> {
    let us = parse_columns(reader, name, "u")?;
    if let Some(i) = us.iter().position(|u| *u < 0.0) {
        return Err(Error::InvalidArgument(format!("{name}: negative density at row {}", i + 1)));
    }
    let mass = super::integrate_slice(&us);
    if (mass - 1.0).abs() > LOAD_MASS_TOLERANCE {
        warn!("{name}: density mass is {mass}, renormalizing to 1");
    }
    PeriodicDensity::normalized(us)
}

fn parse_columns(reader: impl Read, name: &str, column: &str) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse(format!("{name}: {e}")))?.clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != column {
        return Err(Error::Parse(format!(
            "{name}: expected header `x,{column}`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("{name}: {e}")))?;
        let parse = |k: usize| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| Error::Parse(format!("{name}: row {} is short", line + 1)))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("{name}: row {}: {e}", line + 1)))
        };
        xs.push(parse(0)?);
        vs.push(parse(1)?);
    }
    let grid = Grid::new(xs.len())?;
    for (i, &x) in xs.iter().enumerate() {
        if (x - grid.x(i)).abs() > 1e-9 {
            return Err(Error::Parse(format!(
                "{name}: row {} has x = {x}, expected {} (uniform sorted grid on [0,1))",
                i + 1,
                grid.x(i)
            )));
        }
    }
    if let Some(i) = vs.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{name}: non-finite value at row {}", i + 1)));
    }
    Ok(vs)
}

/// Writes `x,u` rows.
pub fn write_density_csv(path: impl AsRef<Path>, u: &PeriodicDensity) -> Result<()> {
    write_columns(std::fs::File::create(path)?, "u", u, &[])
}

/// Writes `x,<column>` rows for any sampled field (e.g. a map with `T`).
pub fn write_field_csv(path: impl AsRef<Path>, column: &str, w: &PeriodicField) -> Result<()> {
    write_columns(std::fs::File::create(path)?, column, w, &[])
}

/// Writes `x,<column>` rows preceded by `# ` comment lines.
pub fn write_annotated_csv(path: impl AsRef<Path>, column: &str, w: &impl Samples, comments: &[String]) -> Result<()> {
    write_columns(std::fs::File::create(path)?, column, w, comments)
}

pub(crate) fn write_columns(mut out: impl Write, column: &str, w: &impl Samples, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut wtr = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    wtr.write_record(["x", column]).map_err(io)?;
    let grid = w.grid();
    for (i, v) in w.values().iter().enumerate() {
        wtr.write_record([format!("{}", grid.x(i)), format!("{v:.17e}")]).map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}
