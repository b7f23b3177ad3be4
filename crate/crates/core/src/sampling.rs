//! Seeded random densities and fields: trigonometric perturbations of a
//! base density, rejection-sampled into sub-level sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::energy::{self, EnergySpec};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Grid, PeriodicDensity, PeriodicField, Samples};
use crate::transport;

/// Generator for sample `index` of a run seeded with `seed`. Streams are
/// independent, so parallel and sequential sweeps draw identical samples.
pub fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Real trigonometric polynomial sum_{k=1}^{K} a_k cos(2 pi k x) + b_k sin(2 pi k x).
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl TrigPolynomial {
    /// Coefficients N(0, 1) / k^decay up to `degree`.
    pub fn random(rng: &mut impl Rng, degree: usize, decay: f64) -> Self {
        let mut normal = || -> f64 { rng.sample(StandardNormal) };
        let mut cos = Vec::with_capacity(degree);
        let mut sin = Vec::with_capacity(degree);
        for k in 1..=degree {
            let s = (k as f64).powf(-decay);
            cos.push(s * normal());
            sin.push(s * normal());
        }
        TrigPolynomial { cos, sin }
    }

    pub fn degree(&self) -> usize {
        self.cos.len()
    }

    /// Coefficients of the `order`-th derivative.
    pub fn derivative(&self, order: u32) -> Self {
        let mut cos = Vec::with_capacity(self.degree());
        let mut sin = Vec::with_capacity(self.degree());
        for (i, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let w = 2.0 * std::f64::consts::PI * (i + 1) as f64;
            let s = w.powi(order as i32);
            // d/dx (a cos + b sin) = w (b cos - a sin)
            let (ca, cb) = match order % 4 {
                0 => (*a, *b),
                1 => (*b, -*a),
                2 => (-*a, -*b),
                _ => (-*b, *a),
            };
            cos.push(s * ca);
            sin.push(s * cb);
        }
        TrigPolynomial { cos, sin }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = 2.0 * std::f64::consts::PI * x;
        self.cos
            .iter()
            .zip(&self.sin)
            .enumerate()
            .map(|(i, (a, b))| {
                let k = (i + 1) as f64;
                a * (k * t).cos() + b * (k * t).sin()
            })
            .sum()
    }

    /// L^2(0,1) norm by Parseval.
    pub fn l2_norm(&self) -> f64 {
        (0.5 * self.cos.iter().chain(&self.sin).map(|c| c * c).sum::<f64>()).sqrt()
    }

    /// Upper bound for the sup norm: the maximum over an M-point grid
    /// inflated by 1 / (1 - (pi K / M)^2 / 2), from a second-order Taylor
    /// bound at the maximizer and Bernstein's inequality.
    pub fn sup_norm_bound(&self) -> f64 {
        let k = self.degree().max(1) as f64;
        let m = 64 * self.degree().max(1);
        let grid_max = (0..m).map(|i| self.eval(i as f64 / m as f64).abs()).fold(0.0, f64::max);
        let r = std::f64::consts::PI * k / m as f64;
        grid_max / (1.0 - 0.5 * r * r)
    }

    pub fn sample(&self, grid: Grid) -> PeriodicField {
        PeriodicField::from_fn(grid, |x| self.eval(x)).expect("finite trig samples")
    }
}

/// Constraints for [`sample_sublevel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SublevelTarget {
    /// E < c.
    pub c: f64,
    /// min > m.
    pub m: f64,
    /// W2 to the base density < delta, if set.
    pub delta: Option<f64>,
    pub degree: usize,
    pub max_tries: usize,
}

impl SublevelTarget {
    pub fn new(c: f64, m: f64) -> Self {
        SublevelTarget { c, m, delta: None, degree: 4, max_tries: 200 }
    }

    pub fn within(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }
}

fn admissible(spec: &EnergySpec, v: &PeriodicDensity, base: &PeriodicDensity, t: &SublevelTarget) -> bool {
    if !(v.min() > t.m) || !(energy::evaluate(spec, v) < t.c) {
        return false;
    }
    match t.delta {
        Some(d) => transport::w2_distance(base, v).is_ok_and(|w| w < d),
        None => true,
    }
}

/// Draws base * (1 + s p), renormalized, with p a random trigonometric
/// perturbation and s uniform below the largest admissible scale.
pub fn sample_sublevel(
    spec: &EnergySpec,
    base: &PeriodicDensity,
    target: &SublevelTarget,
    rng: &mut impl Rng,
) -> Result<PeriodicDensity> {
    if target.degree == 0 || target.c <= 0.0 {
        return Err(invalid("sub-level sampling needs c > 0 and degree >= 1"));
    }
    let grid = base.grid();
    for _ in 0..target.max_tries {
        let p = TrigPolynomial::random(rng, target.degree, 1.0).sample(grid);
        let build = |s: f64| -> Option<PeriodicDensity> {
            let v: Vec<f64> = base.values().iter().zip(p.values()).map(|(b, q)| b * (1.0 + s * q)).collect();
            PeriodicDensity::normalized(v).ok()
        };
        let ok = |s: f64| build(s).is_some_and(|v| admissible(spec, &v, base, target));
        // largest admissible scale on [0, 1/|p|), by bisection
        let mut hi = 1.0 / p.sup_norm().max(1e-12);
        let mut lo = 0.0;
        if !ok(lo) {
            continue;
        }
        for _ in 0..24 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = lo * rng.random::<f64>();
        if let Some(v) = build(s) {
            if admissible(spec, &v, base, target) {
                return Ok(v);
            }
        }
    }
    Err(Error::Domain(format!(
        "no density with E < {} and min > {} found near the base in {} tries",
        target.c, target.m, target.max_tries
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_coefficients_match_difference_quotient() {
        let mut rng = rng_for(1, 0);
        let p = TrigPolynomial::random(&mut rng, 5, 1.0);
        for order in 1..=4 {
            let d = p.derivative(order);
            let lower = p.derivative(order - 1);
            let (x, h) = (0.37, 1e-6);
            let fd = (lower.eval(x + h) - lower.eval(x - h)) / (2.0 * h);
            assert!((d.eval(x) - fd).abs() < 1e-5 * (1.0 + fd.abs()), "order {order}");
        }
    }

    #[test]
    fn sup_bound_dominates_dense_maximum() {
        let mut rng = rng_for(2, 0);
        for _ in 0..20 {
            let p = TrigPolynomial::random(&mut rng, 8, 0.5);
            let dense = (0..20000).map(|i| p.eval(i as f64 / 20000.0).abs()).fold(0.0, f64::max);
            let b = p.sup_norm_bound();
            assert!(b >= dense && b <= dense * 1.01);
        }
    }

    #[test]
    fn sublevel_samples_satisfy_constraints() {
        let grid = Grid::new(64).unwrap();
        let base = PeriodicDensity::uniform(grid);
        let t = SublevelTarget::new(2.0, 0.2).within(0.05);
        let mut rng = rng_for(3, 0);
        for _ in 0..10 {
            let v = sample_sublevel(&EnergySpec::Dirichlet, &base, &t, &mut rng).unwrap();
            assert!(v.min() > 0.2 && energy::evaluate(&EnergySpec::Dirichlet, &v) < 2.0);
            assert!(transport::w2_distance(&base, &v).unwrap() < 0.05);
        }
    }

    #[test]
    fn streams_are_reproducible() {
        let a: f64 = rng_for(9, 4).random();
        let b: f64 = rng_for(9, 4).random();
        let c: f64 = rng_for(9, 5).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
