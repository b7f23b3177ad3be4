//! Second derivatives of energies along geodesics u_s = (Id + s f)_# u.

use crate::energy::{self, EnergySpec, Integrand, Partials};
use crate::error::{invalid, Error, Result};
use crate::geometry::{derivative, integrate_slice, Method, PeriodicDensity, PeriodicField, Samples};
use crate::transport;

/// d^2/ds^2 of 1/2 int u_s'^2 at s = 0:
/// int (f''u)^2 + 8 (f''u)(f'u') + 6 (f'u')^2.
pub fn hessian_dirichlet(u: &PeriodicDensity, f: &PeriodicField, method: Method) -> Result<f64> {
    check_grids(u, f)?;
    let fp = derivative(f, 1, method)?;
    hessian_dirichlet_slope(u, &fp, method)
}

/// [`hessian_dirichlet`] from samples of f' instead of f. Useful when f
/// itself is not periodic but f' is.
pub fn hessian_dirichlet_slope(u: &PeriodicDensity, fp: &PeriodicField, method: Method) -> Result<f64> {
    check_grids(u, fp)?;
    let fpp = derivative(fp, 1, method)?;
    let up = derivative(u, 1, method)?;
    let u = u.values();
    Ok(integrate_slice(
        &(0..u.len())
            .map(|i| {
                let a = fpp.values()[i] * u[i];
                let b = fp.values()[i] * up.values()[i];
                a * a + 8.0 * a * b + 6.0 * b * b
            })
            .collect::<Vec<_>>(),
    ))
}

/// The same quadratic form expanded from the Jacobian power 3 instead of 5:
/// int (uf'')^2 + 4 (uf'')(u'f') + (u'f')^2. Not a second derivative of
/// the Dirichlet energy; kept as a comparison that the numeric oracle
/// must reject.
pub fn hessian_dirichlet_cubic(u: &PeriodicDensity, f: &PeriodicField, method: Method) -> Result<f64> {
    check_grids(u, f)?;
    let fp = derivative(f, 1, method)?;
    let fpp = derivative(f, 2, method)?;
    let up = derivative(u, 1, method)?;
    let u = u.values();
    Ok(integrate_slice(
        &(0..u.len())
            .map(|i| {
                let a = fpp.values()[i] * u[i];
                let b = fp.values()[i] * up.values()[i];
                a * a + 4.0 * a * b + b * b
            })
            .collect::<Vec<_>>(),
    ))
}

/// Symmetric 2x2 coefficients of the second variation of int g(u, u'),
/// acting on (f', f'') at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianQuadraticForm {
    pub a11: Vec<f64>,
    pub a12: Vec<f64>,
    pub a22: Vec<f64>,
}

impl HessianQuadraticForm {
    /// Assembles A from the partials of g(v, p) at v = u, p = u'. Pulling
    /// int g(u_s, u_s') back through X_s = x + s f gives
    /// int g(u / J, (u'J - u J') / J^3) J with J = 1 + s f'; its second
    /// s-derivative at 0 is the form below (the g_v terms cancel).
    pub fn assemble(partials: impl Fn(f64, f64) -> Partials, u: &PeriodicDensity, method: Method) -> Result<Self> {
        let up = derivative(u, 1, method)?;
        let n = u.len();
        let (mut a11, mut a12, mut a22) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            let v = u.values()[i];
            let p = up.values()[i];
            let g = partials(v, p);
            if ![g.g01, g.g02, g.g11, g.g20].iter().all(|x| x.is_finite()) {
                return Err(Error::Domain(format!("integrand partials are not finite at u = {v}, u' = {p}")));
            }
            a11[i] = g.g20 * v * v + 4.0 * g.g11 * v * p + 4.0 * g.g02 * p * p + 2.0 * g.g01 * p;
            a12[i] = g.g11 * v * v + 2.0 * g.g02 * p * v + 2.0 * g.g01 * v;
            a22[i] = g.g02 * v * v;
        }
        Ok(HessianQuadraticForm { a11, a12, a22 })
    }

    pub fn len(&self) -> usize {
        self.a11.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a11.is_empty()
    }

    /// int [f' f''] A [f' f'']^T
    pub fn evaluate(&self, f: &PeriodicField, method: Method) -> Result<f64> {
        if f.len() != self.len() {
            return Err(invalid("field does not match the grid of the quadratic form"));
        }
        let a = derivative(f, 1, method)?;
        let b = derivative(f, 2, method)?;
        let (a, b) = (a.values(), b.values());
        let q: Vec<f64> = (0..self.len())
            .map(|i| self.a11[i] * a[i] * a[i] + 2.0 * self.a12[i] * a[i] * b[i] + self.a22[i] * b[i] * b[i])
            .collect();
        Ok(integrate_slice(&q))
    }
}

/// Second variation of int g(u, u') along the geodesic generated by f.
pub fn hessian_general(
    partials: impl Fn(f64, f64) -> Partials,
    u: &PeriodicDensity,
    f: &PeriodicField,
    method: Method,
) -> Result<f64> {
    check_grids(u, f)?;
    HessianQuadraticForm::assemble(partials, u, method)?.evaluate(f, method)
}

/// Central second difference [E(u_h) - 2 E(u) + E(u_-h)] / h^2 along
/// u_s = (Id + s f)_# u.
pub fn hessian_numeric(spec: &EnergySpec, u: &PeriodicDensity, f: &PeriodicField, step: f64) -> Result<f64> {
    spec.validate()?;
    check_grids(u, f)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid(format!("step must be positive, got {step}")));
    }
    let plus = transport::pushforward(u, &f.scaled(step))?;
    let minus = transport::pushforward(u, &f.scaled(-step))?;
    let e = |v: &PeriodicDensity| energy::evaluate(spec, v);
    let d = (e(&plus) - 2.0 * e(u) + e(&minus)) / (step * step);
    if !d.is_finite() {
        return Err(Error::Domain(format!("{spec} energy is not finite along the geodesic")));
    }
    Ok(d)
}

/// Richardson extrapolation (4 D(h/2) - D(h)) / 3 of [`hessian_numeric`].
pub fn hessian_extrapolated(spec: &EnergySpec, u: &PeriodicDensity, f: &PeriodicField, step: f64) -> Result<f64> {
    let coarse = hessian_numeric(spec, u, f, step)?;
    let fine = hessian_numeric(spec, u, f, 0.5 * step)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Second derivative of `spec` along the geodesic generated by f, in the
/// 1/2 convention: closed forms for the first-order families, the
/// extrapolated difference quotient for H^k with k >= 2.
pub fn hessian(spec: &EnergySpec, u: &PeriodicDensity, f: &PeriodicField) -> Result<f64> {
    spec.validate()?;
    match (spec, spec.integrand()) {
        (EnergySpec::Dirichlet, _) | (EnergySpec::HigherOrder(1), _) => hessian_dirichlet(u, f, Method::Spectral),
        (_, Some(g)) => {
            if u.min() <= 0.0 {
                return Err(Error::Domain(format!("{spec} second variation needs a positive density")));
            }
            hessian_general(|v, p| g.partials(v, p), u, f, Method::Spectral)
        }
        (_, None) => hessian_extrapolated(spec, u, f, 1e-3),
    }
}

/// Partials of a first-order family, for callers of [`hessian_general`].
pub fn partials_of(spec: &EnergySpec) -> Option<impl Fn(f64, f64) -> Partials> {
    let g: Integrand = spec.integrand()?;
    Some(move |v, p| g.partials(v, p))
}

fn check_grids(u: &impl Samples, f: &impl Samples) -> Result<()> {
    if u.grid() != f.grid() {
        return Err(invalid("density and field live on different grids"));
    }
    Ok(())
}
#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grid;
    use std::f64::consts::PI;

    fn g(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    fn sin1(n: usize) -> PeriodicField {
        PeriodicField::from_fn(g(n), |x| (2.0 * PI * x).sin()).unwrap()
    }

    #[test]
    fn uniform_sine_closed_form() {
        let u = PeriodicDensity::uniform(g(128));
        let f = sin1(128);
        let want = 8.0 * PI.powi(4);
        let a = hessian_dirichlet(&u, &f, Method::Spectral).unwrap();
        assert!((a - want).abs() < 1e-9 * want);
        let n = hessian_numeric(&EnergySpec::Dirichlet, &u, &f, 1e-3).unwrap();
        assert!((n - want).abs() < 1e-3 * want, "{n}");
    }

    #[test]
    fn constant_field_gives_zero() {
        let u = PeriodicDensity::sine(g(64), 0.3, 2).unwrap();
        let f = PeriodicField::from_fn(g(64), |_| 0.2).unwrap();
        assert!(hessian_dirichlet(&u, &f, Method::Spectral).unwrap().abs() < 1e-10);
        // rotations leave E unchanged for any step; a large one keeps rounding small
        assert!(hessian_numeric(&EnergySpec::Dirichlet, &u, &f, 0.1).unwrap().abs() < 1e-10);
    }

    #[test]
    fn general_form_reduces_to_dirichlet() {
        let u = PeriodicDensity::sine(g(128), 0.4, 1).unwrap();
        let f = PeriodicField::from_fn(g(128), |x| 0.1 * (4.0 * PI * x).cos() + 0.05 * (2.0 * PI * x).sin()).unwrap();
        let d = hessian_dirichlet(&u, &f, Method::Spectral).unwrap();
        let p = partials_of(&EnergySpec::Dirichlet).unwrap();
        let q = hessian_general(p, &u, &f, Method::Spectral).unwrap();
        assert!((d - q).abs() < 1e-10 * (1.0 + d.abs()));
    }

    // At u = 1 only a22 = g02 survives: Fisher gives int f''^2 / 4 = 2 pi^4,
    // the log energy int f''^2 = 8 pi^4.
    #[test]
    fn first_order_families_at_uniform() {
        let u = PeriodicDensity::uniform(g(128));
        let f = sin1(128);
        for (spec, want) in [(EnergySpec::Fisher, 2.0 * PI.powi(4)), (EnergySpec::LogDirichlet, 8.0 * PI.powi(4))] {
            let a = hessian(&spec, &u, &f).unwrap();
            let n = hessian_numeric(&spec, &u, &f, 1e-3).unwrap();
            assert!((a - want).abs() < 1e-9 * want, "{spec}: {a}");
            assert!((n - want).abs() < 1e-3 * want, "{spec}: {n}");
        }
    }

    #[test]
    fn general_form_matches_difference_quotient() {
        let u = PeriodicDensity::sine(g(256), 0.3, 1).unwrap();
        let f = PeriodicField::from_fn(g(256), |x| 0.05 * (2.0 * PI * x).cos() + 0.02 * (6.0 * PI * x).sin()).unwrap();
        for spec in [
            EnergySpec::Power(1.5),
            EnergySpec::Fisher,
            EnergySpec::LogDirichlet,
            EnergySpec::PerturbedDirichlet(0.01),
        ] {
            let a = hessian(&spec, &u, &f).unwrap();
            let n = hessian_extrapolated(&spec, &u, &f, 1e-3).unwrap();
            assert!((a - n).abs() < 1e-6 * (1.0 + a.abs()), "{spec}: {a} vs {n}");
        }
    }

    #[test]
    fn cubic_variant_disagrees() {
        let u = PeriodicDensity::sine(g(256), 0.5, 1).unwrap();
        let f = PeriodicField::from_fn(g(256), |x| 0.05 * (2.0 * PI * x).cos()).unwrap();
        let n = hessian_numeric(&EnergySpec::Dirichlet, &u, &f, 1e-3).unwrap();
        let c = hessian_dirichlet_cubic(&u, &f, Method::Spectral).unwrap();
        assert!((c - n).abs() > 1e-2 * (1.0 + n.abs()));
    }

    #[test]
    fn higher_order_extrapolation_is_stable() {
        let u = PeriodicDensity::sine(g(256), 0.1, 1).unwrap();
        let f = PeriodicField::from_fn(g(256), |x| (4.0 * PI * x).sin() / (4.0 * PI)).unwrap();
        let spec = EnergySpec::HigherOrder(2);
        let v: Vec<f64> =
            [1e-2, 5e-3, 2.5e-3].iter().map(|&h| hessian_extrapolated(&spec, &u, &f, h).unwrap()).collect();
        for w in v.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-4 * w[1].abs(), "{v:?}");
        }
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let u = PeriodicDensity::uniform(g(64));
        assert!(hessian_dirichlet(&u, &sin1(128), Method::Spectral).is_err());
    }
}
