//! The interpolation inequality |f'|_inf <= d |f''|^(4/5) |f|^(1/5) and the
//! constant chains built on it.
//!
//! All norms are L^2(0,1) unless marked inf. Constants here are stated
//! for the unhalved energies; [`LambdaEstimate::lambda`] converts.

use std::sync::OnceLock;

use crate::energy::{sublevel_bounds, EnergySpec};
use crate::error::{invalid, Error, Result};

const SERIES_TERMS: u64 = 1_000_000;

/// Upper bound for zeta(6/5) = sum_{k>=1} k^(-6/5).
///
/// Partial sum to 10^6 plus the midpoint bound
/// sum_{k>N} k^(-s) <= int_{N+1/2}^inf x^(-s) dx, valid since x^(-s) is convex.
pub fn zeta_six_fifths() -> f64 {
    static Z: OnceLock<f64> = OnceLock::new();
    *Z.get_or_init(|| {
        let s = 1.2_f64;
        // smallest terms first
        let partial: f64 = (1..=SERIES_TERMS).rev().map(|k| (k as f64).powf(-s)).sum();
        let tail = (SERIES_TERMS as f64 + 0.5).powf(1.0 - s) / (s - 1.0);
        partial + tail
    })
}

/// d = 2 pi (sum_{k != 0} |k|^(-6/5))^(1/2), an upper bound.
pub fn interpolation_d() -> f64 {
    2.0 * std::f64::consts::PI * (2.0 * zeta_six_fifths()).sqrt()
}

/// Constants of the interpolation lemma for a given alpha.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationConstants {
    pub alpha: f64,
    pub d: f64,
    /// beta = (5 alpha d / 4)^(-4/5), as the lemma states it.
    pub beta: f64,
    /// lambda = -d alpha beta^(-5) / 5, as the lemma states it.
    pub lambda: f64,
    /// beta' = (5 / (4 alpha d^2))^(4/5), from the squared inequality.
    pub beta_squared: f64,
    /// lambda' = -(alpha d^2 / 5) beta'^(-5): the constant for which
    /// |f''|^2 - alpha |f'|_inf^2 - lambda' |f|^2 >= 0 follows from
    /// squaring the interpolation inequality and Young's inequality
    /// x^(4/5) y^(1/5) <= (4/5) b^(5/4) x + (1/5) b^(-5) y.
    pub lambda_hat: f64,
}

pub fn interpolation_constants(alpha: f64) -> Result<InterpolationConstants> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    let d = interpolation_d();
    let beta = (1.25 * alpha * d).powf(-0.8);
    let lambda = -d * alpha * beta.powi(-5) / 5.0;
    let ad2 = alpha * d * d;
    let beta_squared = (1.25 / ad2).powf(0.8);
    let lambda_hat = -(0.8 * ad2).powi(5) / 4.0;
    Ok(InterpolationConstants { alpha, d, beta, lambda, beta_squared, lambda_hat })
}

/// lambda with |f^(k+1)|^2 - alpha |f^(k)|_inf^2 - lambda |f|^2 >= 0,
/// by induction from the lemma (k = 1). Each level applies the lemma to
/// f^(m) with 2 alpha_(m+1), feeds alpha_m = -2 lambda_hat to the level
/// below and sets lambda_(m+1) = -2 lambda_hat lambda_m, all in the form
/// |f^(m)|_inf^2 <= |f^(m+1)|^2 / alpha_m - lambda_m |f|^2.
pub fn chain_lambda(k: u32, alpha: f64) -> Result<f64> {
    if k == 0 {
        return Err(invalid("chain order must be at least 1"));
    }
    let lam = level(k, alpha)? * alpha;
    if !lam.is_finite() {
        return Err(Error::Domain(format!(
            "order-{k} constant chain at alpha = {alpha:.3e} overflows double precision"
        )));
    }
    Ok(lam)
}

// lambda_m of the normalized form
fn level(m: u32, alpha: f64) -> Result<f64> {
    if m == 1 {
        return Ok(interpolation_constants(alpha)?.lambda_hat / alpha);
    }
    let a2 = 2.0 * alpha;
    let hat = interpolation_constants(a2)?.lambda_hat / a2;
    let below = level(m - 1, -2.0 * hat)?;
    Ok(-2.0 * hat * below)
}

/// Restricted lambda-convexity constant on {E < c, min u > m}.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaEstimate {
    pub spec: EnergySpec,
    /// Energy ceiling in the 1/2 convention.
    pub c: f64,
    /// Floor used: max of the configured m and the family floor.
    pub m: f64,
    pub alpha: f64,
    pub constants: InterpolationConstants,
    /// lambda for the unhalved energy.
    pub lambda_unhalved: f64,
    /// lambda for the energy as evaluated by this crate.
    pub lambda: f64,
    /// lambda_unhalved recomputed with the lemma's verbatim (beta, lambda);
    /// None for chains deeper than the lemma.
    pub lambda_verbatim_unhalved: Option<f64>,
}

/// lambda <= 0 such that the second derivative of E along any geodesic
/// from a density in {E < c, min u > m} dominates lambda int f^2 u.
///
/// The Hessian is bounded below by w (|f''|^2 - alpha |f'|_inf^2) with a
/// family weight w, and lambda follows from [`interpolation_constants`]:
/// Dirichlet and perturbed alpha = 52 c'/m^2, power alpha =
/// 2(1+a)(6a+7) c'/(a^2 m^(2a)), log alpha = 14 c', with c' the unhalved
/// ceiling. H^k reuses the Dirichlet alpha on the order-k chain; its
/// lower-order terms are not tracked, so that value is heuristic.
pub fn lambda_estimate(spec: &EnergySpec, c: f64, m: f64) -> Result<LambdaEstimate> {
    spec.validate()?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(invalid(format!("restricted convexity needs a positive floor m, got {m}")));
    }
    let bounds = sublevel_bounds(spec, c, m)?;
    let m = bounds.floor();
    let scale = spec.unhalved_ratio();
    let cu = c / scale;
    let canon = spec.canonical();
    let (alpha, order) = match canon {
        EnergySpec::Dirichlet | EnergySpec::PerturbedDirichlet(_) => (52.0 * cu / (m * m), 1),
        EnergySpec::HigherOrder(k) => (52.0 * cu / (m * m), k),
        EnergySpec::Power(a) => (2.0 * (1.0 + a) * (6.0 * a + 7.0) * cu / (a * a * m.powf(2.0 * a)), 1),
        EnergySpec::LogDirichlet => (14.0 * cu, 1),
        EnergySpec::Fisher => unreachable!("canonical form"),
    };
    let constants = interpolation_constants(alpha)?;
    let hat = chain_lambda(order, alpha)?;
    // weight w and the factor int f^2 u >= m |f|^2 give lambda = hat m / w
    let convert = |h: f64| match canon {
        EnergySpec::Power(a) => h * a * a * m.powf(2.0 * a - 1.0),
        EnergySpec::LogDirichlet => h / m,
        _ => h * m,
    };
    let lambda_unhalved = convert(hat);
    let lambda_verbatim_unhalved = (order == 1).then(|| convert(constants.lambda));
    Ok(LambdaEstimate {
        spec: *spec,
        c,
        m,
        alpha,
        constants,
        lambda_unhalved,
        lambda: lambda_unhalved * scale,
        lambda_verbatim_unhalved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{rng_for, TrigPolynomial};

    // mpmath: zeta(6/5) = 5.5915824411777507...
    #[test]
    fn series_bound() {
        let z = zeta_six_fifths();
        assert!(z >= 5.59158244117775 && z - 5.59158244117775 < 1e-10, "{z}");
        assert!((interpolation_d() - 21.01175036411806).abs() < 1e-9);
    }

    #[test]
    fn lemma_constants() {
        assert!(interpolation_constants(0.0).is_err());
        assert!(interpolation_constants(f64::NAN).is_err());
        let k = interpolation_constants(52.0).unwrap();
        assert!(k.lambda < 0.0 && k.lambda_hat < 0.0);
        // -(4 alpha d^2 / 5)^5 / 4
        let want = -(0.8 * 52.0 * k.d * k.d).powi(5) / 4.0;
        assert!((k.lambda_hat - want).abs() < 1e-12 * want.abs());
        let mut prev = f64::NEG_INFINITY;
        for a in [10.0, 1.0, 0.1, 1e-3, 1e-6] {
            let l = interpolation_constants(a).unwrap().lambda;
            assert!(l < 0.0 && l > prev);
            prev = l;
        }
    }

    // |f^(k)|_inf^2 <= |f^(k+1)|^2 / alpha - lambda_k |f|^2 on random
    // trigonometric polynomials, for the lemma and one induction step.
    #[test]
    fn chain_inequality_on_trig_polynomials() {
        let mut rng = rng_for(11, 0);
        for k in [1, 2] {
            let alpha = 52.0;
            let lam = chain_lambda(k, alpha).unwrap();
            for _ in 0..50 {
                let f = TrigPolynomial::random(&mut rng, 16, 0.0);
                let top = f.derivative(k + 1).l2_norm().powi(2);
                let sup = f.derivative(k).sup_norm_bound().powi(2);
                assert!(top - alpha * sup - lam * f.l2_norm().powi(2) >= 0.0);
            }
        }
    }

    #[test]
    fn estimates() {
        let e = lambda_estimate(&EnergySpec::Dirichlet, 0.5, 1.0).unwrap();
        // c = 1 in the unhalved convention
        assert_eq!(e.alpha, 52.0);
        assert!(e.lambda < 0.0 && e.lambda == 0.5 * e.lambda_unhalved);
        assert!(lambda_estimate(&EnergySpec::Dirichlet, 1.0, 0.0).is_err());
        // alpha shrinks and lambda rises toward 0 as m grows
        let a = lambda_estimate(&EnergySpec::Dirichlet, 1.0, 2.0).unwrap();
        let b = lambda_estimate(&EnergySpec::Dirichlet, 1.0, 20.0).unwrap();
        assert!(b.alpha < a.alpha);
        // Power(1) is the Dirichlet energy
        let p = lambda_estimate(&EnergySpec::Power(1.0), 0.5, 0.5).unwrap();
        let d = lambda_estimate(&EnergySpec::Dirichlet, 0.5, 0.5).unwrap();
        assert!((p.lambda - d.lambda).abs() < 1e-12 * d.lambda.abs());
        for spec in [EnergySpec::Fisher, EnergySpec::LogDirichlet, EnergySpec::PerturbedDirichlet(0.01)] {
            let e = lambda_estimate(&spec, 0.1, 0.5).unwrap();
            assert!(e.lambda < 0.0 && e.lambda.is_finite(), "{spec}");
        }
        let h = lambda_estimate(&EnergySpec::HigherOrder(2), 0.1, 0.5).unwrap();
        assert!(h.lambda < 0.0 && h.lambda_verbatim_unhalved.is_none());
    }
}
