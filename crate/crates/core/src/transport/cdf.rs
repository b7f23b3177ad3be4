//! Lifted cumulative distribution functions of positive periodic densities
//! and their inverses.
//!
//! The CDF is tabulated on a grid refined by FFT zero padding, using the
//! exact antiderivative of the trigonometric interpolant, and interpolated
//! between fine nodes by monotone (Fritsch-Carlson) cubic Hermite pieces
//! whose slopes are the interpolated density.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{spectral, PeriodicDensity, Samples};

/// Fine points per coarse cell, and a floor on the fine grid size.
const REFINE: usize = 8;
const MIN_FINE: usize = 2048;

#[derive(Debug, Clone)]
pub(crate) struct CircleCdf {
    /// Fine grid size m.
    m: usize,
    /// Refinement ratio m / n.
    ratio: usize,
    /// F at j/m for j = 0..=m, F[0] = 0 and F[m] = 1.
    f: Vec<f64>,
    /// Hermite slopes at j/m, j = 0..=m.
    d: Vec<f64>,
}

impl CircleCdf {
    pub fn new(u: &PeriodicDensity) -> Result<Self> {
        if let Some(i) = u.values().iter().position(|v| *v <= 0.0) {
            return Err(Error::DegenerateDensity(format!(
                "density vanishes at node {i}; the quantile function is undefined"
            )));
        }
        let n = u.len();
        let ratio = REFINE.max(MIN_FINE.div_ceil(n));
        let m = n * ratio;
        let coef = spectral::forward(u.values());
        let scale = 1.0 / n as f64;
        let c0 = coef[0].re * scale;

        // Padded spectra of the density and of its periodic antiderivative.
        let zero = Complex64::new(0.0, 0.0);
        let mut dens = vec![zero; m];
        let mut anti = vec![zero; m];
        let mut put = |k: i64, c: Complex64| {
            let j = k.rem_euclid(m as i64) as usize;
            dens[j] += c;
            if k != 0 {
                anti[j] += c / Complex64::new(0.0, 2.0 * PI * k as f64);
            }
        };
        put(0, coef[0] * scale);
        for j in 1..n {
            let k = spectral::wavenumber(j, n);
            if n % 2 == 0 && j == n / 2 {
                let h = coef[j] * (0.5 * scale);
                put(k, h);
                put(-k, h);
            } else {
                put(k, coef[j] * scale);
            }
        }
        let to_values = |mut buf: Vec<Complex64>| {
            spectral::ifft(&mut buf);
            buf.into_iter().map(|c| c.re).collect::<Vec<f64>>()
        };
        let dens = to_values(dens);
        let anti = to_values(anti);

        let mut f = Vec::with_capacity(m + 1);
        let mut d = Vec::with_capacity(m + 1);
        for j in 0..m {
            f.push((c0 * j as f64 / m as f64 + anti[j] - anti[0]) / c0);
            d.push((dens[j] / c0).max(0.0));
        }
        f.push(1.0);
        d.push(d[0]);
        // Ringing of the interpolant could break monotonicity of the table.
        for j in 1..=m {
            if f[j] < f[j - 1] {
                f[j] = f[j - 1];
            }
        }
        f[m] = 1.0;
        fritsch_carlson(&f, &mut d, m as f64);
        Ok(CircleCdf { m, ratio, f, d })
    }

    /// F at coarse node i (exact table value).
    pub fn at_node(&self, i: usize) -> f64 {
        self.f[i * self.ratio]
    }

    /// Lifted CDF: F(x + k) = F(x) + k.
    pub fn cdf(&self, x: f64) -> f64 {
        let (j, t, k) = self.locate(x);
        k + self.hermite(j, t)
    }

    /// Derivative of the interpolated CDF (the density) at x.
    pub fn density(&self, x: f64) -> f64 {
        let (j, t, _) = self.locate(x);
        self.hermite_slope(j, t)
    }

    /// Lifted inverse of [`cdf`](Self::cdf).
    pub fn quantile(&self, t: f64) -> f64 {
        let k = t.floor();
        let s = t - k;
        // largest j with f[j] <= s
        let j = match self.f.partition_point(|&v| v <= s) {
            0 => 0,
            p => (p - 1).min(self.m - 1),
        };
        let (lo_v, hi_v) = (self.f[j], self.f[j + 1]);
        let width = hi_v - lo_v;
        let mut tau = if width > 0.0 { ((s - lo_v) / width).clamp(0.0, 1.0) } else { 0.0 };
        if width > 0.0 {
            let (mut a, mut b) = (0.0f64, 1.0f64);
            for _ in 0..60 {
                let r = self.hermite(j, tau) - s;
                if r > 0.0 {
                    b = tau;
                } else {
                    a = tau;
                }
                let slope = self.hermite_slope(j, tau) / self.m as f64;
                let mut next = if slope > 0.0 { tau - r / slope } else { 0.5 * (a + b) };
                if !(next > a && next < b) {
                    next = 0.5 * (a + b);
                }
                let step = (next - tau).abs();
                tau = next;
                if step < 1e-15 || b - a < 1e-15 {
                    break;
                }
            }
        }
        k + (j as f64 + tau) / self.m as f64
    }

    fn locate(&self, x: f64) -> (usize, f64, f64) {
        let k = x.floor();
        let pos = (x - k) * self.m as f64;
        let j = (pos.floor() as usize).min(self.m - 1);
        (j, pos - j as f64, k)
    }

    fn hermite(&self, j: usize, t: f64) -> f64 {
        let h = 1.0 / self.m as f64;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.f[j] + h10 * h * self.d[j] + h01 * self.f[j + 1] + h11 * h * self.d[j + 1]
    }

    fn hermite_slope(&self, j: usize, t: f64) -> f64 {
        let h = 1.0 / self.m as f64;
        let t2 = t * t;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        (d00 * self.f[j] + d01 * self.f[j + 1]) / h + d10 * self.d[j] + d11 * self.d[j + 1]
    }
}

/// Limits Hermite slopes so every cubic piece is monotone.
fn fritsch_carlson(f: &[f64], d: &mut [f64], m: f64) {
    for j in 0..f.len() - 1 {
        let delta = (f[j + 1] - f[j]) * m;
        if delta <= 0.0 {
            d[j] = 0.0;
            d[j + 1] = 0.0;
            continue;
        }
        let a = d[j] / delta;
        let b = d[j + 1] / delta;
        let r = a * a + b * b;
        if r > 9.0 {
            let s = 3.0 / r.sqrt();
            d[j] = s * a * delta;
            d[j + 1] = s * b * delta;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grid;

    #[test]
    fn uniform_cdf_is_identity() {
        let c = CircleCdf::new(&PeriodicDensity::uniform(Grid::new(64).unwrap())).unwrap();
        for &x in &[0.0, 0.1234, 0.5, 0.999, -0.3, 2.25] {
            assert!((c.cdf(x) - x).abs() < 1e-14);
            assert!((c.quantile(x) - x).abs() < 1e-14);
        }
    }

    #[test]
    fn sine_cdf_matches_closed_form() {
        let u = PeriodicDensity::sine(Grid::new(64).unwrap(), 0.5, 1).unwrap();
        let c = CircleCdf::new(&u).unwrap();
        let exact = |x: f64| x + 0.5 * (1.0 - (2.0 * PI * x).cos()) / (2.0 * PI);
        for i in 0..200 {
            let x = -0.7 + i as f64 * 0.0123;
            assert!((c.cdf(x) - exact(x)).abs() < 1e-13, "x={x}");
            let q = c.quantile(exact(x));
            assert!((q - x).abs() < 1e-12, "x={x} q={q}");
            assert!((c.density(x) - (1.0 + 0.5 * (2.0 * PI * x).sin())).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_sample_is_degenerate() {
        let mut v = vec![1.0; 16];
        v[5] = 0.0;
        let u = PeriodicDensity::normalized(v).unwrap();
        assert!(matches!(CircleCdf::new(&u), Err(Error::DegenerateDensity(_))));
    }
}
