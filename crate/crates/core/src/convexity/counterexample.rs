//! A density/field pair along which the Dirichlet energy has negative
//! second derivative, and its scaled copies.
//!
//! On [-1/2, 1/2] the raw profiles are
//!
//! ```text
//!            u                     f'
//! |x| <= 2/9     (81/16)(1 - 4|x|)    16 / (81 (1 - 4|x|))
//! 2/9..3/8       9/16                 (16/11)(3 - 8|x|)
//! |x| >= 3/8     (9/4)(1 - 2|x|)      0
//! ```
//!
//! so u f' = 1 on the inner piece, where the integrand collapses to
//! -(f'u')^2. The raw u has mass 191/128 and is rescaled to unit mass.
//! f' has nonzero mean, so f is not periodic on its own; the scaled pair
//! places h copies of the profile side by side with alternating signs on
//! f, which makes f periodic whenever h is even.
//!
//! With A(h) = d^2/ds^2 E and B(h) = int f^2 u for the copy-scaled pair,
//! A(h) = h^2 A(1) and B(h) = B(1) / h^2.

use crate::error::{invalid, Error, Result};
use crate::geometry::{Grid, Method, PeriodicDensity, PeriodicField, Samples};

use super::hessian::hessian_dirichlet_slope;

/// int u_raw over [-1/2, 1/2].
pub const RAW_MASS: f64 = 191.0 / 128.0;
/// Unhalved A(1) for the raw (unnormalized) pair: 2 * (-560/11).
pub const RAW_A_UNHALVED: f64 = -1120.0 / 11.0;

const X1: f64 = 2.0 / 9.0;
const X2: f64 = 3.0 / 8.0;

/// (u, f', F) of the raw profile at x in [-1/2, 1/2], with F the odd
/// antiderivative of f'.
pub fn raw_profile(x: f64) -> (f64, f64, f64) {
    let a = x.abs();
    let sgn = x.signum();
    let (u, fp, big_f) = if a <= X1 {
        let w = 1.0 - 4.0 * a;
        (81.0 / 16.0 * w, 16.0 / (81.0 * w), -4.0 / 81.0 * w.ln())
    } else if a <= X2 {
        (9.0 / 16.0, 16.0 / 11.0 * (3.0 - 8.0 * a), raw_f_mid(a))
    } else {
        (9.0 / 4.0 * (1.0 - 2.0 * a), 0.0, raw_f_mid(X2))
    };
    (u, fp, sgn * big_f)
}

// F on [2/9, 3/8]: F(2/9) + (16/11)[3t - 4t^2] from 2/9 to a
fn raw_f_mid(a: f64) -> f64 {
    let at_x1 = -4.0 / 81.0 * (1.0_f64 / 9.0).ln();
    let p = |t: f64| 3.0 * t - 4.0 * t * t;
    at_x1 + 16.0 / 11.0 * (p(a) - p(X1))
}

/// F(1/2) = 8 ln 3 / 81 + 11 / 81.
pub fn raw_f_end() -> f64 {
    raw_profile(0.5).2
}

/// int_{-1/2}^{1/2} F^2 u of the raw pair.
pub fn raw_b() -> f64 {
    // both halves agree; composite Simpson on the smooth pieces
    let g = |x: f64| {
        let (u, _, f) = raw_profile(x);
        f * f * u
    };
    2.0 * (simpson(g, 0.0, X1, 4000) + simpson(g, X1, X2, 4000) + simpson(g, X2, 0.5, 4000))
}

fn simpson(g: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = g(a) + g(b);
    for i in 1..n {
        s += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Exact values for the unit-mass pair at scale h (unhalved A).
pub fn exact_values(h: u32) -> (f64, f64) {
    let k = 1.0 / RAW_MASS;
    let h2 = (h as f64).powi(2);
    (RAW_A_UNHALVED * k * k * h2, k * raw_b() / h2)
}

/// Sampled counterexample at scale h.
#[derive(Debug, Clone)]
pub struct CounterexamplePair {
    pub h: u32,
    pub u: PeriodicDensity,
    /// f sampled on the grid; for odd h it jumps at the copy boundaries.
    pub f: PeriodicField,
    /// f' sampled on the grid (always continuous and periodic).
    pub slope: PeriodicField,
    /// Unhalved second derivative from the sampled pair (2nd-order
    /// differences).
    pub a_value: f64,
    /// int f^2 u from the sampled pair.
    pub b_value: f64,
    pub a_exact: f64,
    pub b_exact: f64,
    /// Whether f is periodic (h even).
    pub periodic: bool,
}

/// Builds the scaled pair on `grid`: u_h(x) = u(xi) / mass and
/// f_h(x) = (-1)^j F(xi) / h with xi = hx - j the local coordinate of copy j.
pub fn counterexample(h: u32, grid: Grid) -> Result<CounterexamplePair> {
    if h == 0 {
        return Err(invalid("scale h must be at least 1"));
    }
    let n = grid.n();
    if h as usize > n / 16 {
        return Err(Error::Resolution(format!("scale h = {h} needs at least {} grid points, have {n}", 16 * h)));
    }
    let hf = h as f64;
    let local = |x: f64| -> (f64, f64) {
        let y = hf * x;
        let j = y.round();
        let sign = if h % 2 == 0 && (j as i64).rem_euclid(2) == 1 { -1.0 } else { 1.0 };
        (y - j, sign)
    };
    let mut u = Vec::with_capacity(n);
    let mut f = Vec::with_capacity(n);
    let mut fp = Vec::with_capacity(n);
    for x in grid.points() {
        let (xi, sign) = local(x);
        let (ru, rfp, rf) = raw_profile(xi);
        u.push(ru / RAW_MASS);
        fp.push(sign * rfp);
        f.push(sign * rf / hf);
    }
    let u = PeriodicDensity::normalized(u)?;
    let f = PeriodicField::new(f)?;
    let slope = PeriodicField::new(fp)?;
    let a_value = 2.0 * hessian_dirichlet_slope(&u, &slope, Method::FiniteDifference)?;
    let b_value = u.values().iter().zip(f.values()).map(|(u, f)| f * f * u).sum::<f64>() / n as f64;
    let (a_exact, b_exact) = exact_values(h);
    Ok(CounterexamplePair { h, u, f, slope, a_value, b_value, a_exact, b_exact, periodic: h % 2 == 0 })
}

/// Smallest h in {1, 2, 4, ..., max_h} with A(h) < lambda B(h) (unhalved
/// convention, exact values).
pub fn find_witness(lambda: f64, max_h: u32) -> Option<u32> {
    std::iter::successors(Some(1u32), |h| h.checked_mul(2))
        .take_while(|h| *h <= max_h)
        .find(|&h| {
            let (a, b) = exact_values(h);
            a < lambda * b
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    // sympy: piecewise integrals of the raw profiles
    #[test]
    fn raw_constants() {
        let mass = 2.0 * (simpson(|x| raw_profile(x).0, 0.0, X1, 10)
            + simpson(|x| raw_profile(x).0, X1, X2, 10)
            + simpson(|x| raw_profile(x).0, X2, 0.5, 10));
        assert!((mass - RAW_MASS).abs() < 1e-14);
        assert!((raw_f_end() - (8.0 * 3f64.ln() / 81.0 + 11.0 / 81.0)).abs() < 1e-15);
        assert!((raw_b() - 0.012544064601105998).abs() < 1e-13);
        let (a, b) = exact_values(1);
        assert!((a - 2.0 * -9175040.0 / 401291.0).abs() < 1e-11);
        assert!((b - 0.008406493554667894).abs() < 1e-13);
    }

    #[test]
    fn profiles_are_continuous() {
        for x in [X1, X2] {
            let (a, b) = (raw_profile(x - 1e-12), raw_profile(x + 1e-12));
            assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9 && (a.2 - b.2).abs() < 1e-9);
        }
        assert_eq!(raw_profile(0.5).0, 0.0);
        assert_eq!(raw_profile(0.5).1, 0.0);
    }

    #[test]
    fn sampled_values_track_exact_ones() {
        let grid = Grid::new(4096).unwrap();
        let pairs: Vec<_> = [1, 2, 4, 8].iter().map(|&h| counterexample(h, grid).unwrap()).collect();
        for p in &pairs {
            assert!(p.a_value < 0.0);
            assert!((p.b_value - p.b_exact).abs() < 1e-4 * p.b_exact, "h={}", p.h);
            assert_eq!(p.periodic, p.h % 2 == 0);
        }
        assert!(pairs[1].slope.integral().abs() < 1e-12);
        // kinks make the differences first order in the copy resolution
        for w in pairs[1..].windows(2) {
            assert!((w[1].a_value / w[0].a_value - 4.0).abs() < 0.2);
        }
        let fine = counterexample(1, Grid::new(16384).unwrap()).unwrap();
        let err = |p: &CounterexamplePair| (p.a_value - p.a_exact).abs() / p.a_exact.abs();
        assert!(err(&fine) < err(&pairs[0]) && err(&fine) < 5e-3);
    }

    #[test]
    fn resolution_and_range() {
        let grid = Grid::new(256).unwrap();
        assert!(counterexample(0, grid).is_err());
        assert!(matches!(counterexample(17, grid), Err(Error::Resolution(_))));
        assert!(counterexample(16, grid).is_ok());
    }

    #[test]
    fn witnesses() {
        assert_eq!(find_witness(-10.0, 64), Some(1));
        assert_eq!(find_witness(-1e3, 64), Some(1));
        assert_eq!(find_witness(-1e5, 64), Some(4));
        assert_eq!(find_witness(-1e12, 8), None);
    }
}
