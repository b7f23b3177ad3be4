//! Optimal transport on the circle.
//!
//! With F, G the lifted CDFs of mu and nu, every monotone degree-one map is
//! T_theta = G^{-1}(F + theta). The quadratic cost is convex in theta and its
//! minimizer lies in [G(1/2) - 1, G(1/2)], the range for which
//! |T(0)| <= 1/2. Maps are stored in that relabeled branch, where
//! |T(x) - x| is the geodesic distance travelled by x.

mod cdf;
mod plan;

use log::debug;

use crate::error::{invalid, Error, Result};
use crate::geometry::{spectral, Grid, PeriodicDensity, PeriodicField, Samples, Trig};
use crate::par::{self, Execution};

pub(crate) use cdf::CircleCdf;
pub use plan::{atomize, brute_force_plan, circle_distance, Atom, DiscretePlan, MAX_ATOMS};

const SCAN_POINTS: usize = 64;
const THETA_TOL: f64 = 1e-13;

/// Monotone degree-one circle map from `source`, sampled on its grid.
#[derive(Debug, Clone)]
pub struct TransportMap {
    source: PeriodicDensity,
    values: Vec<f64>,
    slope: Vec<f64>,
    theta: f64,
    cost: f64,
}

impl TransportMap {
    pub fn grid(&self) -> Grid {
        self.source.grid()
    }

    pub fn source(&self) -> &PeriodicDensity {
        &self.source
    }

    /// T(x_i), in [T(0), T(0) + 1].
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// T'(x_i) = u(x_i) / v(T(x_i)).
    pub fn derivative(&self) -> &[f64] {
        &self.slope
    }

    /// T''(x_i) by spectral differentiation of T'.
    pub fn second_derivative(&self) -> Vec<f64> {
        spectral::derivative(&self.slope, 1)
    }

    /// Optimal shift of the quantile relabeling.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// int |T - Id|^2 dmu.
    pub fn cost(&self) -> f64 {
        self.cost
    }

    /// Displacement T - Id.
    pub fn displacement(&self) -> PeriodicField {
        let g = self.grid();
        let f: Vec<f64> = self.values.iter().enumerate().map(|(i, t)| t - g.x(i)).collect();
        PeriodicField::new(f).expect("finite displacement")
    }

    /// The map as a field of T values (for export).
    pub fn as_field(&self) -> PeriodicField {
        PeriodicField::new(self.values.clone()).expect("finite map")
    }
}

struct ShiftProblem<'a> {
    u: &'a [f64],
    fx: Vec<f64>,
    x: Vec<f64>,
    g: CircleCdf,
}

impl ShiftProblem<'_> {
    fn map(&self, theta: f64) -> impl Iterator<Item = f64> + '_ {
        self.fx.iter().map(move |&t| self.g.quantile(t + theta))
    }

    fn cost(&self, theta: f64) -> f64 {
        let n = self.u.len() as f64;
        self.map(theta).zip(&self.x).zip(self.u).map(|((t, x), u)| (t - x) * (t - x) * u).sum::<f64>() / n
    }

    fn slope(&self, theta: f64) -> f64 {
        let n = self.u.len() as f64;
        self.map(theta)
            .zip(&self.x)
            .zip(self.u)
            .map(|((t, x), u)| 2.0 * (t - x) * u / self.g.density(t))
            .sum::<f64>()
            / n
    }
}

/// Optimal map pushing `mu` to `nu` for the squared circle distance.
pub fn optimal_map(mu: &PeriodicDensity, nu: &PeriodicDensity) -> Result<TransportMap> {
    let f = CircleCdf::new(mu)?;
    let g = CircleCdf::new(nu)?;
    let grid = mu.grid();
    let prob = ShiftProblem {
        u: mu.values(),
        fx: (0..grid.n()).map(|i| f.at_node(i)).collect(),
        x: grid.points(),
        g,
    };
    let lo = prob.g.cdf(-0.5);
    let hi = prob.g.cdf(0.5);
    let step = (hi - lo) / SCAN_POINTS as f64;
    let scan: Vec<f64> = (0..=SCAN_POINTS).map(|j| prob.cost(lo + j as f64 * step)).collect();
    let best = scan
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(j, _)| j)
        .unwrap_or(0);
    let mut a = lo + best.saturating_sub(1) as f64 * step;
    let mut b = lo + (best + 1).min(SCAN_POINTS) as f64 * step;
    // cost is convex in theta: bisect on its derivative
    let theta = if prob.slope(a) >= 0.0 {
        a
    } else if prob.slope(b) <= 0.0 {
        b
    } else {
        while b - a > THETA_TOL {
            let mid = 0.5 * (a + b);
            if prob.slope(mid) > 0.0 {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    };
    let values: Vec<f64> = prob.map(theta).collect();
    let slope: Vec<f64> =
        values.iter().zip(mu.values()).map(|(t, u)| u / prob.g.density(*t)).collect();
    let cost = prob.cost(theta);
    Ok(TransportMap { source: mu.clone(), values, slope, theta, cost })
}

/// Quadratic Wasserstein distance on the circle.
pub fn w2_distance(mu: &PeriodicDensity, nu: &PeriodicDensity) -> Result<f64> {
    if mu.grid() != nu.grid() {
        return Err(invalid("densities live on different grids"));
    }
    Ok(optimal_map(mu, nu)?.cost().max(0.0).sqrt())
}

/// Result of a pushforward together with the preimage of each target node.
#[derive(Debug, Clone)]
pub(crate) struct Pushed {
    pub density: PeriodicDensity,
    /// x* with x* + f(x*) = y_j (lifted, within 1/2 of y_j).
    pub preimages: Vec<f64>,
}

/// (Id + f)_# mu resampled on the grid of `mu`.
pub fn pushforward(mu: &PeriodicDensity, f: &PeriodicField) -> Result<PeriodicDensity> {
    Ok(pushforward_detailed(mu, f)?.density)
}

pub(crate) fn pushforward_detailed(mu: &PeriodicDensity, f: &PeriodicField) -> Result<Pushed> {
    let grid = mu.grid();
    let n = grid.n();
    if f.grid() != grid {
        return Err(invalid("displacement and density live on different grids"));
    }
    if f.sup_norm() > 0.5 + 1e-12 {
        return Err(invalid(format!("|f|_inf = {} exceeds 1/2", f.sup_norm())));
    }
    let fp = spectral::derivative(f.values(), 1);
    if let Some((node, v)) = fp.iter().enumerate().find(|(_, d)| 1.0 + **d <= 0.0) {
        return Err(Error::Fold { node, value: 1.0 + v });
    }
    let y: Vec<f64> = f.values().iter().enumerate().map(|(i, v)| grid.x(i) + v).collect();
    for i in 0..n {
        let next = if i + 1 < n { y[i + 1] } else { y[0] + 1.0 };
        if next <= y[i] {
            return Err(Error::Fold { node: i, value: next - y[i] });
        }
    }
    let tf = Trig::new(f.values());
    let tu = Trig::new(mu.values());
    // extended lifted nodes Y(i), i in [-n, 2n)
    let big_y = |i: isize| -> f64 {
        let q = i.div_euclid(n as isize);
        y[i.rem_euclid(n as isize) as usize] + q as f64
    };
    let solve = |j: usize| -> Result<(f64, f64)> {
        let z = grid.x(j);
        // last index with Y(i) <= z
        let (mut lo, mut hi) = (-(n as isize), 2 * n as isize - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if big_y(mid) <= z {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (mut a, mut b) = (lo as f64 / n as f64, (lo + 1) as f64 / n as f64);
        let mut x = a + (z - big_y(lo)) / (big_y(lo + 1) - big_y(lo)) * (b - a);
        let mut jac = 1.0;
        for _ in 0..100 {
            let (fv, fd) = tf.value_and_derivative(x);
            let r = x + fv - z;
            jac = 1.0 + fd;
            if r > 0.0 {
                b = x;
            } else {
                a = x;
            }
            let mut next = if jac > 0.0 { x - r / jac } else { 0.5 * (a + b) };
            if !(next >= a && next <= b) {
                next = 0.5 * (a + b);
            }
            let step = (next - x).abs();
            x = next;
            if step < 1e-15 || b - a < 1e-15 {
                jac = 1.0 + tf.value_and_derivative(x).1;
                break;
            }
        }
        if jac <= 0.0 {
            return Err(Error::Fold { node: j, value: jac });
        }
        Ok((x, tu.value(x).max(0.0) / jac))
    };
    let exec = if n >= 1024 { Execution::available() } else { Execution::Sequential };
    let solved = par::try_map_range(exec, n, solve)?;
    let (preimages, v): (Vec<f64>, Vec<f64>) = solved.into_iter().unzip();
    let mass = crate::geometry::integrate_slice(&v);
    if (mass - 1.0).abs() > 1e-6 {
        debug!("pushforward mass before renormalization: {mass}");
    }
    let density = PeriodicDensity::normalized(v)?;
    Ok(Pushed { density, preimages })
}

/// Displacement interpolation ((1-s) Id + s T)_# mu0.
pub fn geodesic(mu0: &PeriodicDensity, mu1: &PeriodicDensity, s: f64) -> Result<PeriodicDensity> {
    if !(0.0..=1.0).contains(&s) {
        return Err(invalid(format!("geodesic parameter {s} outside [0,1]")));
    }
    let t = optimal_map(mu0, mu1)?;
    if s == 0.0 {
        return Ok(mu0.clone());
    }
    pushforward(mu0, &t.displacement().scaled(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn g(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    #[test]
    fn identity_between_equal_densities() {
        let u = PeriodicDensity::sine(g(64), 0.4, 2).unwrap();
        let t = optimal_map(&u, &u).unwrap();
        assert!(t.cost() < 1e-24);
        for (i, v) in t.values().iter().enumerate() {
            assert!((v - g(64).x(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn from_uniform_is_shifted_quantile() {
        let mu = PeriodicDensity::uniform(g(128));
        let nu = PeriodicDensity::sine(g(128), 0.5, 1).unwrap();
        let t = optimal_map(&mu, &nu).unwrap();
        let gc = CircleCdf::new(&nu).unwrap();
        for (i, v) in t.values().iter().enumerate() {
            assert!((gc.cdf(*v) - g(128).x(i) - t.theta()).abs() < 1e-12);
        }
        // monotone and in the relabeled branch
        for w in t.values().windows(2) {
            assert!(w[1] > w[0]);
        }
        for (i, v) in t.values().iter().enumerate() {
            assert!((v - g(128).x(i)).abs() <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn rotation_costs_no_more_than_rotation() {
        let mu = PeriodicDensity::sine(g(128), 0.5, 1).unwrap();
        let nu = mu.rotate(0.25).unwrap();
        let w = w2_distance(&mu, &nu).unwrap();
        assert!(w <= 0.25 + 1e-12);
        assert!(w > 0.0);
    }

    #[test]
    fn stationarity_of_shift() {
        let mu = PeriodicDensity::sine(g(64), 0.3, 1).unwrap();
        let nu = PeriodicDensity::sine(g(64), 0.6, 2).unwrap().rotate(0.1).unwrap();
        let t = optimal_map(&mu, &nu).unwrap();
        let f = CircleCdf::new(&mu).unwrap();
        let prob = ShiftProblem {
            u: mu.values(),
            fx: (0..64).map(|i| f.at_node(i)).collect(),
            x: g(64).points(),
            g: CircleCdf::new(&nu).unwrap(),
        };
        let c = prob.cost(t.theta());
        assert!((c - t.cost()).abs() < 1e-15);
        for d in [-1.0 / 64.0, 1.0 / 64.0, 1e-6, -1e-6] {
            assert!(prob.cost(t.theta() + d) >= c - 1e-10);
        }
    }

    #[test]
    fn pushforward_trivial_cases() {
        let u = PeriodicDensity::sine(g(64), 0.3, 1).unwrap();
        let same = pushforward(&u, &PeriodicField::zeros(g(64))).unwrap();
        for (a, b) in u.values().iter().zip(same.values()) {
            assert!((a - b).abs() < 1e-13);
        }
        let shift = PeriodicField::from_fn(g(64), |_| 0.3).unwrap();
        let rot = pushforward(&u, &shift).unwrap();
        let expect = u.rotate(0.3).unwrap();
        for (a, b) in rot.values().iter().zip(expect.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn monge_ampere_residual() {
        let n = 512;
        let u = PeriodicDensity::uniform(g(n));
        let f = PeriodicField::from_fn(g(n), |x| 0.1 * (2.0 * PI * x).sin()).unwrap();
        let v = pushforward(&u, &f).unwrap();
        let tv = Trig::new(v.values());
        for i in 0..n {
            let x = g(n).x(i);
            let y = x + 0.1 * (2.0 * PI * x).sin();
            let jac = 1.0 + 0.2 * PI * (2.0 * PI * x).cos();
            assert!((tv.value(y) * jac - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn fold_is_reported() {
        let u = PeriodicDensity::uniform(g(64));
        let f = PeriodicField::from_fn(g(64), |x| 0.3 * (2.0 * PI * x).sin()).unwrap();
        assert!(matches!(pushforward(&u, &f), Err(Error::Fold { .. })));
    }

    #[test]
    fn geodesic_endpoints_and_speed() {
        let mu0 = PeriodicDensity::sine(g(128), 0.5, 1).unwrap();
        let mu1 = PeriodicDensity::sine(g(128), 0.3, 2).unwrap().rotate(0.2).unwrap();
        let end = geodesic(&mu0, &mu1, 1.0).unwrap();
        for (a, b) in end.values().iter().zip(mu1.values()) {
            assert!((a - b).abs() < 1e-8);
        }
        let d = w2_distance(&mu0, &mu1).unwrap();
        for s in [0.25, 0.5, 0.75] {
            let mid = geodesic(&mu0, &mu1, s).unwrap();
            assert!((w2_distance(&mu0, &mid).unwrap() - s * d).abs() < 1e-6);
        }
        assert!(geodesic(&mu0, &mu1, 1.5).is_err());
    }
}
