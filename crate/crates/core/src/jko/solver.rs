//! Inner minimization of one JKO step over the displacement f:
//!
//!   Phi(f) = E((Id + f)_# u) + (1 / 2 tau) int f^2 u dx
//!
//! by damped Newton-CG. Hessian-vector products are central differences of
//! the exact gradient; CG is preconditioned by the Fourier symbol of the
//! Hessian at the uniform density. The line search keeps 1 + f' above a
//! floor and |f| below 1/2.

use std::f64::consts::PI;

use crate::energy::lagrangian::Lagrangian;
use crate::energy::EnergySpec;
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::spectral;

/// Stopping rules and safeguards of the inner solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Target for the prev-weighted residual norm.
    pub tolerance: f64,
    /// Residual accepted when progress stalls (floating-point floor).
    pub accept_tolerance: f64,
    pub max_iterations: usize,
    /// Lower bound kept on 1 + f'.
    pub min_jacobian: f64,
    pub max_cg_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-9,
            accept_tolerance: 1e-6,
            max_iterations: 500,
            min_jacobian: 1e-6,
            max_cg_iterations: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub f: Vec<f64>,
    pub objective: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Negative or vanishing curvature was met along the way.
    pub flat_directions: bool,
    /// Estimated rounding floor of the residual; computed only when the
    /// residual is above the absolute tolerances, zero otherwise.
    pub noise_floor: f64,
}

/// Iterations without halving the residual before the solver stops.
const STALL_LIMIT: usize = 6;
/// A residual within this factor of the rounding floor counts as converged.
const NOISE_FACTOR: f64 = 10.0;

pub(crate) struct Problem<'a> {
    spec: EnergySpec,
    energy: Lagrangian<'a>,
    u: &'a [f64],
    tau: f64,
    symbol: Vec<f64>,
    opts: SolverOptions,
}

impl<'a> Problem<'a> {
    pub fn new(spec: &EnergySpec, u: &'a [f64], tau: f64, opts: SolverOptions) -> Self {
        let n = u.len();
        let spec_c = spec.canonical();
        let symbol = (0..n)
            .map(|j| {
                let w = 2.0 * PI * spectral::wavenumber(j, n) as f64;
                let w2 = w * w;
                let e = match spec_c {
                    EnergySpec::HigherOrder(k) => w2.powi(k as i32 + 1),
                    EnergySpec::Power(a) => a * a * w2 * w2,
                    EnergySpec::PerturbedDirichlet(eps) => 2.0 * w2 * w2 + 6.0 * eps * w2,
                    _ => w2 * w2,
                };
                1.0 / tau + e
            })
            .collect();
        Problem { spec: *spec, energy: Lagrangian::new(spec, u), u, tau, symbol, opts }
    }

    fn feasible(&self, f: &[f64]) -> bool {
        if f.iter().any(|v| v.abs() > 0.5) {
            return false;
        }
        spectral::derivative(f, 1).iter().all(|d| 1.0 + d > self.opts.min_jacobian)
    }

    pub fn objective(&self, f: &[f64]) -> f64 {
        let kinetic = self.kinetic(f);
        self.energy.value(f) + kinetic
    }

    fn kinetic(&self, f: &[f64]) -> f64 {
        let n = f.len() as f64;
        f.iter().zip(self.u).map(|(a, b)| a * a * b).sum::<f64>() / (2.0 * self.tau * n)
    }

    pub fn objective_and_gradient(&self, f: &[f64], grad: &mut [f64]) -> f64 {
        let n = f.len() as f64;
        let e = self.energy.value_and_gradient(f, grad);
        for i in 0..f.len() {
            grad[i] += self.u[i] * f[i] / (self.tau * n);
        }
        e + self.kinetic(f)
    }

    /// sqrt(int u r^2) with r = n grad / u = f/tau + (dE/dy) o (Id + f).
    pub fn residual(&self, grad: &[f64]) -> f64 {
        let n = grad.len() as f64;
        let s: f64 = grad.iter().zip(self.u).map(|(g, u)| n * n * g * g / u).sum();
        (s / n).sqrt()
    }

    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let n = r.len() as f64;
        let mut buf = spectral::forward(r);
        for (c, s) in buf.iter_mut().zip(&self.symbol) {
            *c *= n / s;
        }
        spectral::inverse_real(buf)
    }

    /// Size of the residual produced by rounding the data: the residual of
    /// the gradient difference when every sample of u moves by a few ulps.
    pub fn noise_floor(&self, f: &[f64]) -> f64 {
        let n = f.len();
        let mut rng = ChaCha8Rng::seed_from_u64(0x6a6b);
        let mut acc: f64 = 0.0;
        for _ in 0..3 {
            let w: Vec<f64> = self
                .u
                .iter()
                .map(|v| v * (1.0 + 4.0 * f64::EPSILON * (rng.random::<f64>() - 0.5)))
                .collect();
            let other = Problem::new(&self.spec, &w, self.tau, self.opts);
            let (mut g1, mut g2) = (vec![0.0; n], vec![0.0; n]);
            self.objective_and_gradient(f, &mut g1);
            other.objective_and_gradient(f, &mut g2);
            let d: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a - b).collect();
            acc = acc.max(self.residual(&d));
        }
        acc
    }

    fn hessian_vector(&self, f: &[f64], v: &[f64]) -> Vec<f64> {
        let n = f.len();
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if vmax == 0.0 {
            return vec![0.0; n];
        }
        let eps = 1e-6 / vmax;
        let fp: Vec<f64> = f.iter().zip(v).map(|(a, b)| a + eps * b).collect();
        let fm: Vec<f64> = f.iter().zip(v).map(|(a, b)| a - eps * b).collect();
        let mut gp = vec![0.0; n];
        let mut gm = vec![0.0; n];
        self.objective_and_gradient(&fp, &mut gp);
        self.objective_and_gradient(&fm, &mut gm);
        gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * eps)).collect()
    }

    /// Preconditioned CG on H d = -g. Returns the direction and whether
    /// nonpositive curvature was met.
    fn newton_direction(&self, f: &[f64], g: &[f64], forcing: f64) -> (Vec<f64>, bool) {
        let n = f.len();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut d = vec![0.0; n];
        let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut z = self.precondition(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let r0 = rz.abs().sqrt();
        let mut flat = false;
        for _ in 0..self.opts.max_cg_iterations {
            let hp = self.hessian_vector(f, &p);
            let curv = dot(&p, &hp);
            if curv <= 0.0 || !curv.is_finite() {
                flat = true;
                if d.iter().all(|v| *v == 0.0) {
                    d = z.clone();
                }
                break;
            }
            let alpha = rz / curv;
            for i in 0..n {
                d[i] += alpha * p[i];
                r[i] -= alpha * hp[i];
            }
            z = self.precondition(&r);
            let rz_new = dot(&r, &z);
            if rz_new.abs().sqrt() <= forcing * r0 {
                break;
            }
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        (d, flat)
    }

    pub fn solve(&self, start: Vec<f64>) -> Result<Solution> {
        let n = self.u.len();
        let mut f = start;
        let mut g = vec![0.0; n];
        let mut phi = self.objective_and_gradient(&f, &mut g);
        let mut res = self.residual(&g);
        let mut best = (f.clone(), phi, res);
        let mut flat_directions = false;
        let mut iterations = 0;
        let mut stalled = 0;
        let mut reason = "iteration budget exhausted";
        while best.2 > self.opts.tolerance {
            if iterations >= self.opts.max_iterations {
                break;
            }
            if stalled >= STALL_LIMIT {
                reason = "residual stagnated";
                break;
            }
            iterations += 1;
            let forcing = (0.1f64).min(res.sqrt()).max(1e-8);
            let (mut d, flat) = self.newton_direction(&f, &g, forcing);
            flat_directions |= flat;
            let mut slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            if slope >= 0.0 {
                // not a descent direction: fall back to the preconditioned gradient
                d = self.precondition(&g.iter().map(|v| -v).collect::<Vec<_>>());
                slope = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            }
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..50 {
                let trial: Vec<f64> = f.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
                if self.feasible(&trial) {
                    let mut gt = vec![0.0; n];
                    let pt = self.objective_and_gradient(&trial, &mut gt);
                    let rt = self.residual(&gt);
                    let armijo = pt <= phi + 1e-4 * alpha * slope;
                    // at the floating-point floor the objective cannot resolve
                    // progress; a smaller residual without increase is accepted
                    let noise = pt <= phi + 1e-14 * (1.0 + phi.abs()) && rt < res;
                    if pt.is_finite() && (armijo || noise) {
                        accepted = Some((trial, gt, pt, rt));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let Some((trial, gt, pt, rt)) = accepted else {
                reason = "line search found no acceptable step";
                break;
            };
            f = trial;
            g = gt;
            phi = pt;
            res = rt;
            if res < 0.5 * best.2 {
                stalled = 0;
            } else {
                stalled += 1;
            }
            if res < best.2 {
                best = (f.clone(), phi, res);
            }
        }
        let (f, objective, residual) = best;
        let mut noise_floor = 0.0;
        if residual > self.opts.tolerance && residual > self.opts.accept_tolerance {
            noise_floor = self.noise_floor(&f);
            if residual > NOISE_FACTOR * noise_floor {
                return Err(Error::OptimizationFailure {
                    iterations,
                    residual,
                    reason: format!("{reason} (rounding floor {noise_floor:.3e})"),
                });
            }
        }
        Ok(Solution { f, objective, residual, iterations, flat_directions, noise_floor })
    }
}
