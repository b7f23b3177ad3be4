//! Sampled checks of restricted lambda-convexity and of the regularity
//! bounds along geodesics.

use crate::energy::{self, sublevel_bounds, EnergySpec};
use crate::error::{invalid, Result};
use crate::geometry::{PeriodicDensity, Samples};
use crate::par::{self, Execution};
use crate::sampling::{rng_for, sample_sublevel, SublevelTarget};
use crate::transport;

use super::constants::{lambda_estimate, LambdaEstimate};

/// Bounds along a geodesic between two densities of {1/2 int u'^2 < c}
/// with min >= m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolantBounds {
    /// Pointwise upper bound M of the endpoints.
    pub sup: f64,
    /// min u_s >= m^2 / M, since the interpolating map has slope <= M/m.
    pub min: f64,
    /// E(u_s) <= 2c (M/m)(a^2 + b^2 M/m) with a = (M/m)^2 + (M/m)^5 and
    /// b = (M/m)^6, from the chain rule bounds on T' and T''.
    pub energy: f64,
}

pub fn interpolant_bounds(c: f64, m: f64) -> Result<InterpolantBounds> {
    if !(m > 0.0) {
        return Err(invalid(format!("interpolant bounds need a positive floor, got {m}")));
    }
    let sup = sublevel_bounds(&EnergySpec::Dirichlet, c, m)?.sup;
    let r = sup / m;
    let a = r.powi(2) + r.powi(5);
    let b = r.powi(6);
    Ok(InterpolantBounds { sup, min: m * m / sup, energy: 2.0 * c * r * (a * a + b * b * r) })
}

/// Lower bound W2(u1, u2)^2 >= |u1 - u2|_inf^7 / (27648 c'^3) on
/// {1/2 int u'^2 <= c}, with c' = 2c the unhalved ceiling.
pub fn w2_lower_bound(c: f64, sup_gap: f64) -> f64 {
    let cu = 2.0 * c;
    sup_gap.powi(7) / (27648.0 * cu.powi(3))
}

#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub samples: usize,
    pub s_values: Vec<f64>,
    /// Degree of the random trigonometric perturbations.
    pub degree: usize,
    pub seed: u64,
    /// Relative tolerance on the lambda test.
    pub tolerance: f64,
    pub exec: Execution,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            samples: 50,
            s_values: vec![0.25, 0.5, 0.75],
            degree: 4,
            seed: 0,
            tolerance: 1e-3,
            exec: Execution::available(),
        }
    }
}

/// A sampled geodesic that fails the lambda test.
#[derive(Debug, Clone)]
pub struct Witness {
    pub sample: usize,
    pub s: f64,
    pub ratio: f64,
    pub w2: f64,
    pub nu0: PeriodicDensity,
    pub nu1: PeriodicDensity,
}

#[derive(Debug, Clone)]
pub struct ConvexityReport {
    pub estimate: LambdaEstimate,
    pub delta: f64,
    /// Minimum over sampled (nu0, nu1, s) of
    /// 2 [(1-s) E(nu0) + s E(nu1) - E(nu_s)] / (s (1-s) W2^2), in the 1/2
    /// convention.
    pub sampled_min_ratio: f64,
    pub samples: usize,
    pub violations: Vec<Witness>,
    /// Interior points with min u_s below m^2/M.
    pub regularity_violations: usize,
}

impl ConvexityReport {
    pub fn lambda_estimate(&self) -> f64 {
        self.estimate.lambda
    }

    pub fn certified(&self) -> bool {
        self.violations.is_empty() && self.regularity_violations == 0
    }
}

struct SampleOutcome {
    min_ratio: f64,
    witnesses: Vec<Witness>,
    regularity: usize,
}

/// Samples geodesics between densities of {E < c, min > m} within W2
/// distance delta of `center` and tests lambda-convexity along them with
/// lambda from [`lambda_estimate`].
pub fn certify(
    spec: &EnergySpec,
    center: &PeriodicDensity,
    c: f64,
    m: f64,
    delta: f64,
    opts: &CertifyOptions,
) -> Result<ConvexityReport> {
    let estimate = lambda_estimate(spec, c, m)?;
    if !(delta > 0.0) {
        return Err(invalid(format!("radius must be positive, got {delta}")));
    }
    if opts.s_values.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
        return Err(invalid("interpolation parameters must lie in (0, 1)"));
    }
    let lambda = estimate.lambda;
    let sup = sublevel_bounds(spec, c, m)?.sup;
    let floor = m * m / sup;
    let target = SublevelTarget { degree: opts.degree, ..SublevelTarget::new(c, m).within(delta) };
    let threshold = lambda - opts.tolerance * (1.0 + lambda.abs());
    let run = |i: usize| -> Result<SampleOutcome> {
        let mut rng = rng_for(opts.seed, i as u64);
        let nu0 = sample_sublevel(spec, center, &target, &mut rng)?;
        let nu1 = sample_sublevel(spec, center, &target, &mut rng)?;
        let w = transport::w2_distance(&nu0, &nu1)?;
        let (e0, e1) = (energy::evaluate(spec, &nu0), energy::evaluate(spec, &nu1));
        let mut out = SampleOutcome { min_ratio: f64::INFINITY, witnesses: Vec::new(), regularity: 0 };
        for &s in &opts.s_values {
            let nus = transport::geodesic(&nu0, &nu1, s)?;
            if nus.min() < floor {
                out.regularity += 1;
            }
            if w * w < 1e-14 {
                continue;
            }
            let es = energy::evaluate(spec, &nus);
            let ratio = 2.0 * ((1.0 - s) * e0 + s * e1 - es) / (s * (1.0 - s) * w * w);
            out.min_ratio = out.min_ratio.min(ratio);
            if ratio < threshold {
                out.witnesses.push(Witness { sample: i, s, ratio, w2: w, nu0: nu0.clone(), nu1: nu1.clone() });
            }
        }
        Ok(out)
    };
    let outcomes = par::try_map_range(opts.exec, opts.samples, run)?;
    let mut report = ConvexityReport {
        estimate,
        delta,
        sampled_min_ratio: f64::INFINITY,
        samples: opts.samples,
        violations: Vec::new(),
        regularity_violations: 0,
    };
    for o in outcomes {
        report.sampled_min_ratio = report.sampled_min_ratio.min(o.min_ratio);
        report.violations.extend(o.witnesses);
        report.regularity_violations += o.regularity;
    }
    Ok(report)
}
