//! Uniform periodic grids on the circle R/Z, sampled densities and fields,
//! spectral and finite-difference calculus, quadrature, mollification.

mod io;
pub(crate) mod spectral;

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

pub use io::{read_density_csv, read_field_csv, write_annotated_csv, write_density_csv, write_field_csv};
pub use spectral::Trig;

/// Smallest grid accepted anywhere.
pub const MIN_POINTS: usize = 8;

/// Uniform grid x_i = i/n on [0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_POINTS {
            return Err(invalid(format!("grid needs at least {MIN_POINTS} points, got {n}")));
        }
        Ok(Grid { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Index `i` wrapped into 0..n.
    pub fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.n as isize) as usize
    }
}

/// Shared read access to grid samples.
pub trait Samples {
    fn grid(&self) -> Grid;
    fn values(&self) -> &[f64];

    fn len(&self) -> usize {
        self.values().len()
    }

    fn is_empty(&self) -> bool {
        self.values().is_empty()
    }

    fn min(&self) -> f64 {
        self.values().iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn max(&self) -> f64 {
        self.values().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn sup_norm(&self) -> f64 {
        self.values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Periodic trapezoid rule, i.e. the sample mean.
    fn integral(&self) -> f64 {
        integrate_slice(self.values())
    }

    /// (int w^2)^(1/2)
    fn l2_norm(&self) -> f64 {
        mean_of(self.values().iter().map(|v| v * v)).sqrt()
    }
}

pub(crate) fn integrate_slice(v: &[f64]) -> f64 {
    mean_of(v.iter().copied())
}

pub(crate) fn mean_of(it: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in it {
        sum += v;
        count += 1;
    }
    sum / count as f64
}

/// Real-valued periodic samples (displacements, velocities, potentials).
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    grid: Grid,
    values: Vec<f64>,
}

impl Samples for PeriodicField {
    fn grid(&self) -> Grid {
        self.grid
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

impl PeriodicField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let grid = Grid::new(values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite field sample at node {i}")));
        }
        Ok(PeriodicField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        PeriodicField { grid, values: vec![0.0; grid.n()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid.points().into_iter().map(f).collect())
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, s: f64) -> Self {
        PeriodicField { grid: self.grid, values: self.values.iter().map(|v| v * s).collect() }
    }

    /// Trigonometric interpolant onto `m` points.
    pub fn resample(&self, m: usize) -> Result<Self> {
        Self::new(spectral::resample(&self.values, m))
    }
}

/// Nonnegative grid samples with unit trapezoid mass.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicDensity {
    grid: Grid,
    values: Vec<f64>,
}

impl Samples for PeriodicDensity {
    fn grid(&self) -> Grid {
        self.grid
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Mass tolerance accepted by [`PeriodicDensity::new`] before exact rescaling.
pub const MASS_TOLERANCE: f64 = 1e-9;

impl PeriodicDensity {
    /// Accepts samples whose mass is already 1 (to [`MASS_TOLERANCE`]) and
    /// rescales away the rounding.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let mass = check_nonnegative(&values)?;
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(invalid(format!("density mass {mass} is not 1")));
        }
        Self::normalized(values)
    }

    /// Rescales nonnegative samples with positive mass to unit mass.
    pub fn normalized(mut values: Vec<f64>) -> Result<Self> {
        let grid = Grid::new(values.len())?;
        let mass = check_nonnegative(&values)?;
        if mass <= 0.0 {
            return Err(Error::DegenerateDensity("density has zero mass".into()));
        }
        for v in values.iter_mut() {
            *v /= mass;
        }
        Ok(PeriodicDensity { grid, values })
    }

    /// Samples `f` on the grid and normalizes.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::normalized(grid.points().into_iter().map(f).collect())
    }

    pub fn uniform(grid: Grid) -> Self {
        PeriodicDensity { grid, values: vec![1.0; grid.n()] }
    }

    /// 1 + amp * sin(2 pi mode x); requires |amp| < 1 for positivity.
    pub fn sine(grid: Grid, amp: f64, mode: u32) -> Result<Self> {
        if amp.abs() >= 1.0 && mode > 0 {
            return Err(invalid(format!("sine amplitude {amp} makes the density vanish")));
        }
        Self::from_fn(grid, |x| 1.0 + amp * (2.0 * PI * mode as f64 * x).sin())
    }

    pub fn mass(&self) -> f64 {
        integrate_slice(&self.values)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn to_field(&self) -> PeriodicField {
        PeriodicField { grid: self.grid, values: self.values.clone() }
    }

    /// Rotation by `theta`: out(x) = u(x - theta), via exact Fourier shift.
    pub fn rotate(&self, theta: f64) -> Result<Self> {
        Self::clamped(spectral::translate(&self.values, theta))
    }

    /// Trigonometric interpolant on `m` points (negative ringing clamped).
    pub fn resample(&self, m: usize) -> Result<Self> {
        Self::clamped(spectral::resample(&self.values, m))
    }

    pub(crate) fn clamped(mut values: Vec<f64>) -> Result<Self> {
        for v in values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Self::normalized(values)
    }
}

fn check_nonnegative(values: &[f64]) -> Result<f64> {
    if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(invalid(format!(
            "density sample {} at node {i} is negative or not finite",
            values[i]
        )));
    }
    Ok(integrate_slice(values))
}

/// Differentiation scheme for [`derivative`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Spectral,
    /// Second-order centered differences (for kinked data).
    FiniteDifference,
}

/// Derivative of the given order of grid samples.
pub fn derivative(w: &impl Samples, order: u32, method: Method) -> Result<PeriodicField> {
    if order == 0 {
        return Err(invalid("derivative order must be positive"));
    }
    let values = match method {
        Method::Spectral => spectral::derivative(w.values(), order),
        Method::FiniteDifference => fd_derivative(w.values(), order),
    };
    PeriodicField::new(values)
}

pub(crate) fn fd_derivative(values: &[f64], order: u32) -> Vec<f64> {
    let n = values.len();
    let h = 1.0 / n as f64;
    let mut cur = values.to_vec();
    let mut left = order;
    while left > 0 {
        let next: Vec<f64> = if left >= 2 {
            (0..n)
                .map(|i| (cur[(i + 1) % n] - 2.0 * cur[i] + cur[(i + n - 1) % n]) / (h * h))
                .collect()
        } else {
            (0..n).map(|i| (cur[(i + 1) % n] - cur[(i + n - 1) % n]) / (2.0 * h)).collect()
        };
        left -= left.min(2);
        cur = next;
    }
    cur
}

/// Periodic trapezoid quadrature of a field over the circle.
pub fn integrate(w: &impl Samples) -> f64 {
    w.integral()
}

/// Circular convolution with the compact bump exp(-1/(1-(kx)^2)) on
/// |x| < 1/k, normalized to unit mass on the grid.
pub fn mollify(u: &PeriodicDensity, k: usize) -> Result<PeriodicDensity> {
    let n = u.grid.n();
    if k == 0 {
        return Err(invalid("mollifier index must be positive"));
    }
    if k > n / 4 {
        return Err(Error::Resolution(format!(
            "mollifier of width 1/{k} is not resolved on {n} points (need k <= {})",
            n / 4
        )));
    }
    let half = n / k; // nodes with |x| < 1/k have offset < half
    let mut kernel = Vec::with_capacity(2 * half + 1);
    for off in -(half as isize)..=(half as isize) {
        let t = k as f64 * off as f64 / n as f64;
        kernel.push(if t.abs() < 1.0 { (-1.0 / (1.0 - t * t)).exp() } else { 0.0 });
    }
    let total: f64 = kernel.iter().sum();
    for w in kernel.iter_mut() {
        *w /= total;
    }
    let src = &u.values;
    let out: Vec<f64> = (0..n)
        .map(|j| {
            kernel
                .iter()
                .enumerate()
                .map(|(idx, w)| {
                    let off = idx as isize - half as isize;
                    w * src[(j as isize - off).rem_euclid(n as isize) as usize]
                })
                .sum()
        })
        .collect();
    PeriodicDensity::normalized(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn g(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    #[test]
    fn grid_rejects_tiny() {
        assert!(Grid::new(4).is_err());
        assert_eq!(g(8).spacing(), 0.125);
        assert_eq!(g(8).wrap(-1), 7);
    }

    #[test]
    fn sine_derivative_is_exact() {
        let w = PeriodicField::from_fn(g(64), |x| (2.0 * PI * x).sin()).unwrap();
        let d = derivative(&w, 1, Method::Spectral).unwrap();
        for (i, v) in d.values().iter().enumerate() {
            assert_abs_diff_eq!(*v, 2.0 * PI * (2.0 * PI * g(64).x(i)).cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let w = PeriodicField::from_fn(g(32), |_| 3.5).unwrap();
        for order in 1..6 {
            for method in [Method::Spectral, Method::FiniteDifference] {
                assert!(derivative(&w, order, method).unwrap().sup_norm() < 1e-9);
            }
        }
        assert!(derivative(&w, 0, Method::Spectral).is_err());
    }

    #[test]
    fn second_derivative_matches_eighth_order_stencil() {
        let n = 256;
        let u = PeriodicDensity::sine(g(n), 0.5, 2).unwrap();
        let spec = derivative(&u, 2, Method::Spectral).unwrap();
        // 8th-order centered stencil for the second derivative
        let c = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
        let h = 1.0 / n as f64;
        let v = u.values();
        for i in 0..n {
            let mut s = c[0] * v[i];
            for (m, cm) in c.iter().enumerate().skip(1) {
                s += cm * (v[(i + m) % n] + v[(i + n - m) % n]);
            }
            assert!((s / (h * h) - spec.values()[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn quadrature_examples() {
        let one = PeriodicField::from_fn(g(16), |_| 1.0).unwrap();
        assert_eq!(integrate(&one), 1.0);
        let s = PeriodicField::from_fn(g(64), |x| (2.0 * PI * x).sin()).unwrap();
        assert!(integrate(&s).abs() < 1e-14);
        let c2 = PeriodicField::from_fn(g(64), |x| (2.0 * PI * x).cos().powi(2)).unwrap();
        assert_abs_diff_eq!(integrate(&c2), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn density_validation() {
        assert!(PeriodicDensity::new(vec![1.0; 16]).is_ok());
        assert!(PeriodicDensity::new(vec![2.0; 16]).is_err());
        let mut v = vec![1.0; 16];
        v[3] = -0.1;
        assert!(PeriodicDensity::normalized(v).is_err());
        assert!(PeriodicDensity::normalized(vec![0.0; 16]).is_err());
        let d = PeriodicDensity::normalized(vec![3.0; 16]).unwrap();
        assert_abs_diff_eq!(d.mass(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn mollify_uniform_is_identity() {
        let u = PeriodicDensity::uniform(g(128));
        let m = mollify(&u, 8).unwrap();
        for v in m.values() {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-13);
        }
        assert!(matches!(mollify(&u, 33), Err(Error::Resolution(_))));
    }

    #[test]
    fn mollify_keeps_mass_and_minimum() {
        let mut vals = vec![0.0; 256];
        for v in vals.iter_mut().take(40) {
            *v = 1.0;
        }
        let u = PeriodicDensity::normalized(vals).unwrap();
        let m = mollify(&u, 16).unwrap();
        assert_abs_diff_eq!(m.mass(), 1.0, epsilon = 1e-12);
        assert!(m.min() >= u.min());
        // the bump reaches 1/16 on either side of the block only
        assert!(m.values()[50] > 0.0 && m.values()[245] > 0.0);
        assert_eq!(m.values()[60], 0.0);
    }

    #[test]
    fn rotation_of_mode() {
        let u = PeriodicDensity::sine(g(64), 0.5, 1).unwrap();
        let r = u.rotate(0.25).unwrap();
        for i in 0..64 {
            let x = g(64).x(i);
            assert_abs_diff_eq!(r.values()[i], 1.0 + 0.5 * (2.0 * PI * (x - 0.25)).sin(), epsilon = 1e-13);
        }
    }
}
