//! Regularity constants valid on an energy sub-level set {E <= c}.
//!
//! Under the 1/2 convention E <= c gives int w'^2 <= 2c for the relevant
//! w (u, u^a or log u). A unit-mass density takes the value 1 at some
//! point, which is within circle distance 1/2 of every x, so
//! |w(x) - w(x0)| <= sqrt(2c) * sqrt(1/2) = sqrt(c) for the Dirichlet
//! family, with the analogous statement for the transformed quantities.

use super::EnergySpec;
use crate::error::{invalid, Result};

/// Constants attached to {E <= c} for one family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SublevelBounds {
    /// Energy ceiling.
    pub c: f64,
    /// Configured positivity floor.
    pub m: f64,
    /// Floor implied by the family itself (0 when there is none).
    pub family_floor: f64,
    /// Pointwise upper bound M >= 1.
    pub sup: f64,
    /// C with |u(x) - u(y)| <= C |x - y|^(1/2).
    pub holder: f64,
    /// Bound on int u^2 + u'^2.
    pub h1: f64,
}

impl SublevelBounds {
    /// max(configured floor, family floor).
    pub fn floor(&self) -> f64 {
        self.m.max(self.family_floor)
    }
}

/// Family-specific constants for {E <= c} with configured floor m.
pub fn sublevel_bounds(spec: &EnergySpec, c: f64, m: f64) -> Result<SublevelBounds> {
    spec.validate()?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid(format!("energy bound must be positive, got {c}")));
    }
    if !(m >= 0.0 && m.is_finite()) {
        return Err(invalid(format!("floor must be nonnegative, got {m}")));
    }
    let rc = c.sqrt();
    let b = match spec.canonical() {
        EnergySpec::Dirichlet | EnergySpec::HigherOrder(_) => SublevelBounds {
            c,
            m,
            family_floor: 0.0,
            sup: 1.0 + rc,
            holder: (2.0 * c).sqrt(),
            // unhalved form: c + 3
            h1: 2.0 * c + 3.0,
        },
        EnergySpec::Power(a) => {
            let sup = (1.0 + rc).powf(1.0 / a);
            // Lipschitz constant of w -> w^(1/a) on the attainable range
            let lip = if a <= 1.0 {
                sup.powf(1.0 - a) / a
            } else if m > 0.0 {
                m.powf(1.0 - a) / a
            } else {
                return Err(invalid("power family with a > 1 needs a positive floor m for its Holder bound"));
            };
            SublevelBounds { c, m, family_floor: 0.0, sup, holder: (2.0 * c).sqrt() * lip, h1: sup + 2.0 * c * lip * lip }
        }
        EnergySpec::LogDirichlet => {
            let sup = rc.exp();
            SublevelBounds {
                c,
                m,
                family_floor: (-rc).exp(),
                sup,
                holder: sup * (2.0 * c).sqrt(),
                h1: sup + 2.0 * c * sup * sup,
            }
        }
        EnergySpec::PerturbedDirichlet(eps) => {
            // no 1/2 here: int u'^2 <= c
            let sup = 1.0 + (0.5 * c).sqrt();
            SublevelBounds { c, m, family_floor: perturbed_floor(eps, c), sup, holder: rc, h1: sup + c }
        }
        EnergySpec::Fisher => unreachable!("canonicalized"),
    };
    Ok(b)
}

/// Smallest d such that a density with min d can have int eps/u^2 <= c.
/// With u(x) <= d + sqrt(c |x - x0|) near the minimum,
/// int eps/u^2 >= eps (4/c) [ln(1 + S/d) + d/(d + S) - 1], S = sqrt(c/2).
fn perturbed_floor(eps: f64, c: f64) -> f64 {
    let s = (0.5 * c).sqrt();
    let lower = |d: f64| eps * 4.0 / c * ((1.0 + s / d).ln() + d / (d + s) - 1.0);
    if lower(1.0) <= c {
        // the bound is decreasing in d; find where it crosses c
        let (mut a, mut b) = (1e-300f64, 1.0f64);
        for _ in 0..200 {
            let mid = (a * b).sqrt();
            if lower(mid) > c {
                a = mid;
            } else {
                b = mid;
            }
        }
        b
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_constants() {
        let b = sublevel_bounds(&EnergySpec::Dirichlet, 1.0, 0.0).unwrap();
        assert!((b.holder - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(b.sup, 2.0);
        assert_eq!(b.h1, 5.0);
        let tiny = sublevel_bounds(&EnergySpec::Dirichlet, 1e-12, 0.0).unwrap();
        assert!((tiny.sup - 1.0).abs() < 1e-5);
        assert!(sublevel_bounds(&EnergySpec::Dirichlet, 0.0, 0.0).is_err());
        assert!(sublevel_bounds(&EnergySpec::Dirichlet, -1.0, 0.0).is_err());
    }

    #[test]
    fn power_one_is_dirichlet() {
        let a = sublevel_bounds(&EnergySpec::Power(1.0), 2.0, 0.0).unwrap();
        let d = sublevel_bounds(&EnergySpec::Dirichlet, 2.0, 0.0).unwrap();
        assert!((a.sup - d.sup).abs() < 1e-15 && (a.holder - d.holder).abs() < 1e-15);
        assert!(sublevel_bounds(&EnergySpec::Power(2.0), 1.0, 0.0).is_err());
        assert!(sublevel_bounds(&EnergySpec::Power(2.0), 1.0, 0.5).is_ok());
    }

    #[test]
    fn log_floor_and_ceiling() {
        let b = sublevel_bounds(&EnergySpec::LogDirichlet, 0.5, 0.0).unwrap();
        assert!((b.family_floor - (-(0.5f64).sqrt()).exp()).abs() < 1e-15);
        assert!((b.sup * b.family_floor - 1.0).abs() < 1e-15);
        assert_eq!(b.floor(), b.family_floor);
    }

    #[test]
    fn perturbed_floor_solves_its_equation() {
        let (eps, c) = (0.01, 2.0);
        let d = perturbed_floor(eps, c);
        let s = (0.5 * c).sqrt();
        let val = eps * 4.0 / c * ((1.0 + s / d).ln() + d / (d + s) - 1.0);
        assert!(d > 0.0 && d < 1.0);
        assert!((val - c).abs() < 1e-9 * c);
    }
}
