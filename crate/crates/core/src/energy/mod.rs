//! Energy families on periodic densities, first variations, and the
//! gradient-flow right-hand side d_x(u d_x(dE/du)).
//!
//! Convention: every family carries the prefactor 1/2 on its quadratic
//! integrand (so the Dirichlet energy is 1/2 int u'^2), except
//! `PerturbedDirichlet(eps)` = int (u'^2 + eps/u^2) which has none.
//! Constants stated for the unhalved convention are converted with
//! [`EnergySpec::unhalved_ratio`].

mod bounds;
pub(crate) mod lagrangian;
mod local;

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::geometry::{spectral, PeriodicDensity, PeriodicField, Samples};

pub use bounds::{sublevel_bounds, SublevelBounds};
pub use local::{Integrand, Partials};

/// An energy functional on densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergySpec {
    /// 1/2 int u'^2; its gradient flow is the thin-film equation.
    Dirichlet,
    /// 1/2 int (u^(k))^2.
    HigherOrder(u32),
    /// 1/2 int ((u^a)')^2.
    Power(f64),
    /// 1/2 int ((log u)')^2.
    LogDirichlet,
    /// Fisher information, identical to `Power(0.5)`.
    Fisher,
    /// int (u'^2 + eps / u^2), no 1/2.
    PerturbedDirichlet(f64),
}

impl EnergySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EnergySpec::HigherOrder(0) => Err(invalid("H^k energy needs k >= 1")),
            EnergySpec::Power(a) if !(a > 0.0 && a.is_finite()) => {
                Err(invalid(format!("power exponent must be positive, got {a}")))
            }
            EnergySpec::PerturbedDirichlet(e) if !(e > 0.0 && e.is_finite()) => {
                Err(invalid(format!("perturbation must be positive, got {e}")))
            }
            _ => Ok(()),
        }
    }

    /// Highest derivative of u in the integrand.
    pub fn order(&self) -> u32 {
        match *self {
            EnergySpec::HigherOrder(k) => k,
            _ => 1,
        }
    }

    /// Order of the induced gradient-flow PDE, 2k + 2.
    pub fn pde_order(&self) -> u32 {
        2 * self.order() + 2
    }

    /// Whether evaluation requires a strictly positive density.
    pub fn requires_positive(&self) -> bool {
        match *self {
            EnergySpec::Dirichlet | EnergySpec::HigherOrder(_) => false,
            EnergySpec::Power(a) => a < 1.0,
            _ => true,
        }
    }

    /// Ratio E_ours / E_unhalved: 1/2, or 1 for the perturbed family.
    pub fn unhalved_ratio(&self) -> f64 {
        match self {
            EnergySpec::PerturbedDirichlet(_) => 1.0,
            _ => 0.5,
        }
    }

    /// Fisher is folded into Power(1/2).
    pub(crate) fn canonical(&self) -> EnergySpec {
        match *self {
            EnergySpec::Fisher => EnergySpec::Power(0.5),
            other => other,
        }
    }

    /// Pointwise integrand g(u, u') for first-order families.
    pub fn integrand(&self) -> Option<Integrand> {
        match self.canonical() {
            EnergySpec::Dirichlet => Some(Integrand::Dirichlet),
            EnergySpec::Power(a) => Some(Integrand::Power(a)),
            EnergySpec::LogDirichlet => Some(Integrand::Log),
            EnergySpec::PerturbedDirichlet(e) => Some(Integrand::Perturbed(e)),
            _ => None,
        }
    }
}

impl fmt::Display for EnergySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnergySpec::Dirichlet => write!(f, "dirichlet"),
            EnergySpec::HigherOrder(k) => write!(f, "hk:{k}"),
            EnergySpec::Power(a) => write!(f, "power:{a}"),
            EnergySpec::LogDirichlet => write!(f, "log"),
            EnergySpec::Fisher => write!(f, "fisher"),
            EnergySpec::PerturbedDirichlet(e) => write!(f, "perturbed:{e}"),
        }
    }
}

impl FromStr for EnergySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((a, b)) => (a.trim(), Some(b.trim())),
            None => (s, None),
        };
        let num = |what: &str| -> Result<f64> {
            let text = arg.ok_or_else(|| invalid(format!("`{name}` needs a parameter, e.g. {name}:{what}")))?;
            text.parse::<f64>().map_err(|_| invalid(format!("bad parameter `{text}` for `{name}`")))
        };
        let spec = match (name.to_ascii_lowercase().as_str(), arg.is_some()) {
            ("dirichlet", false) => EnergySpec::Dirichlet,
            ("log", false) => EnergySpec::LogDirichlet,
            ("fisher", false) => EnergySpec::Fisher,
            ("hk", _) => {
                let k = num("2")?;
                if k.fract() != 0.0 || k < 1.0 {
                    return Err(invalid(format!("hk order must be a positive integer, got {k}")));
                }
                EnergySpec::HigherOrder(k as u32)
            }
            ("power", _) => EnergySpec::Power(num("0.5")?),
            ("perturbed", _) => EnergySpec::PerturbedDirichlet(num("0.01")?),
            _ => {
                return Err(invalid(format!(
                    "unknown energy `{s}` (expected dirichlet, hk:K, power:A, log, fisher, perturbed:EPS)"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Energy of `u`; `+inf` when the family needs positivity and `u` has a
/// nonpositive sample, NaN for an invalid spec.
pub fn evaluate(spec: &EnergySpec, u: &PeriodicDensity) -> f64 {
    if spec.validate().is_err() {
        return f64::NAN;
    }
    if spec.requires_positive() && u.min() <= 0.0 {
        return f64::INFINITY;
    }
    evaluate_values(spec, u.values())
}

pub(crate) fn evaluate_values(spec: &EnergySpec, u: &[f64]) -> f64 {
    let spec = spec.canonical();
    if let EnergySpec::HigherOrder(k) = spec {
        let d = spectral::derivative(u, k);
        return 0.5 * crate::geometry::mean_of(d.iter().map(|v| v * v));
    }
    let g = spec.integrand().expect("first-order family");
    let w: Vec<f64> = u.iter().map(|&v| g.transform(v)).collect();
    let q = spectral::derivative(&w, 1);
    crate::geometry::mean_of(u.iter().zip(&q).map(|(&v, &p)| g.reduced(v, p)))
}

/// dE/du sampled on the grid.
pub fn first_variation(spec: &EnergySpec, u: &PeriodicDensity) -> Result<PeriodicField> {
    spec.validate()?;
    if spec.requires_positive() && u.min() <= 0.0 {
        return Err(Error::Domain(format!("{spec} energy needs a strictly positive density (min {})", u.min())));
    }
    PeriodicField::new(first_variation_values(spec, u.values()))
}

pub(crate) fn first_variation_values(spec: &EnergySpec, u: &[f64]) -> Vec<f64> {
    let spec = spec.canonical();
    if let EnergySpec::HigherOrder(k) = spec {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        return spectral::derivative(u, 2 * k).into_iter().map(|v| sign * v).collect();
    }
    let g = spec.integrand().expect("first-order family");
    let w: Vec<f64> = u.iter().map(|&v| g.transform(v)).collect();
    let q = spectral::derivative(&w, 1);
    let gq: Vec<f64> = u.iter().zip(&q).map(|(&v, &p)| g.reduced_dq(v, p)).collect();
    let dgq = spectral::derivative(&gq, 1);
    (0..u.len()).map(|i| g.reduced_dv(u[i], q[i]) - g.transform_slope(u[i]) * dgq[i]).collect()
}

/// d_x(u d_x(dE/du)), the right-hand side of the gradient flow.
pub fn pde_rhs(spec: &EnergySpec, u: &PeriodicDensity) -> Result<PeriodicField> {
    let phi = first_variation(spec, u)?;
    PeriodicField::new(pde_rhs_values(u.values(), phi.values()))
}

pub(crate) fn pde_rhs_values(u: &[f64], phi: &[f64]) -> Vec<f64> {
    let dphi = spectral::derivative(phi, 1);
    let flux: Vec<f64> = u.iter().zip(&dphi).map(|(a, b)| a * b).collect();
    spectral::derivative(&flux, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{integrate, Grid};
    use std::f64::consts::PI;

    const ALL: [EnergySpec; 6] = [
        EnergySpec::Dirichlet,
        EnergySpec::HigherOrder(2),
        EnergySpec::Power(1.5),
        EnergySpec::LogDirichlet,
        EnergySpec::Fisher,
        EnergySpec::PerturbedDirichlet(0.01),
    ];

    fn g(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    #[test]
    fn parse_and_display() {
        for s in ["dirichlet", "hk:3", "power:0.25", "log", "fisher", "perturbed:0.01"] {
            let spec: EnergySpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("power:0".parse::<EnergySpec>().is_err());
        assert!("power:-1".parse::<EnergySpec>().is_err());
        assert!("hk:0".parse::<EnergySpec>().is_err());
        assert!("hk:1.5".parse::<EnergySpec>().is_err());
        assert!("perturbed".parse::<EnergySpec>().is_err());
        assert!("entropy".parse::<EnergySpec>().is_err());
    }

    #[test]
    fn uniform_values() {
        let u = PeriodicDensity::uniform(g(64));
        for spec in ALL {
            let e = evaluate(&spec, &u);
            match spec {
                EnergySpec::PerturbedDirichlet(eps) => assert!((e - eps).abs() < 1e-15),
                _ => assert!(e.abs() < 1e-20, "{spec}: {e}"),
            }
        }
    }

    #[test]
    fn closed_forms_for_sine() {
        let u = PeriodicDensity::sine(g(256), 0.5, 1).unwrap();
        // 1/2 int (pi cos)^2 = pi^2/4 ; 1/2 int (2 pi^2 sin)^2 = pi^4
        assert!((evaluate(&EnergySpec::Dirichlet, &u) - PI * PI / 4.0).abs() < 1e-12);
        assert!((evaluate(&EnergySpec::HigherOrder(2), &u) - PI.powi(4)).abs() < 1e-9);
        let phi = first_variation(&EnergySpec::Dirichlet, &u).unwrap();
        for (i, v) in phi.values().iter().enumerate() {
            let x = g(256).x(i);
            assert!((v - 2.0 * PI * PI * (2.0 * PI * x).sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn fisher_is_power_half() {
        let u = PeriodicDensity::sine(g(128), 0.4, 2).unwrap();
        assert_eq!(evaluate(&EnergySpec::Fisher, &u), evaluate(&EnergySpec::Power(0.5), &u));
        // closed form: (sqrt u)'' / sqrt u
        let phi = first_variation(&EnergySpec::Fisher, &u).unwrap();
        let r: Vec<f64> = u.values().iter().map(|v| v.sqrt()).collect();
        let r2 = spectral::derivative(&r, 2);
        for i in 0..128 {
            assert!((phi.values()[i] + 0.5 * r2[i] / r[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn positivity_sentinel() {
        let mut v = vec![1.0; 64];
        v[10] = 0.0;
        let u = PeriodicDensity::normalized(v).unwrap();
        for spec in ALL {
            let e = evaluate(&spec, &u);
            if spec.requires_positive() {
                assert_eq!(e, f64::INFINITY);
                assert!(matches!(first_variation(&spec, &u), Err(Error::Domain(_))));
            } else {
                assert!(e.is_finite());
            }
        }
    }

    #[test]
    fn rhs_conserves_mass_and_dissipates() {
        let u = PeriodicDensity::from_fn(g(128), |x| 1.0 + 0.3 * (2.0 * PI * x).sin() + 0.1 * (6.0 * PI * x).cos()).unwrap();
        for spec in ALL {
            let rhs = pde_rhs(&spec, &u).unwrap();
            assert!(integrate(&rhs).abs() < 1e-10, "{spec}");
            let phi = first_variation(&spec, &u).unwrap();
            let lhs: f64 = crate::geometry::mean_of(phi.values().iter().zip(rhs.values()).map(|(a, b)| a * b));
            let dphi = spectral::derivative(phi.values(), 1);
            let rhs_id: f64 = -crate::geometry::mean_of(u.values().iter().zip(&dphi).map(|(a, b)| a * b * b));
            assert!((lhs - rhs_id).abs() <= 1e-8 * rhs_id.abs(), "{spec}: {lhs} vs {rhs_id}");
        }
    }

    #[test]
    fn rotation_invariance() {
        let u = PeriodicDensity::from_fn(g(128), |x| 1.0 + 0.3 * (2.0 * PI * x).sin() + 0.1 * (4.0 * PI * x).cos()).unwrap();
        let r = u.rotate(0.137).unwrap();
        for spec in ALL {
            let (a, b) = (evaluate(&spec, &u), evaluate(&spec, &r));
            assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()), "{spec}");
        }
    }
}
