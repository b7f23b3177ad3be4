//! FFT-backed helpers: derivatives, band-limited evaluation off the grid,
//! resampling and translation.

use std::cell::RefCell;
use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn fft(buf: &mut [Complex64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

pub(crate) fn ifft(buf: &mut [Complex64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
}

/// Unnormalized forward transform of real samples.
pub(crate) fn forward(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft(&mut buf);
    buf
}

/// Inverse of [`forward`] (including the 1/n), keeping the real part.
pub(crate) fn inverse_real(mut buf: Vec<Complex64>) -> Vec<f64> {
    let n = buf.len() as f64;
    ifft(&mut buf);
    buf.into_iter().map(|c| c.re / n).collect()
}

/// Signed wavenumber of FFT bin `j` on an `n`-point grid.
#[inline]
pub(crate) fn wavenumber(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Spectral derivative of the given order. The Nyquist bin is dropped for
/// odd orders and kept (it is real) for even ones.
pub(crate) fn derivative(values: &[f64], order: u32) -> Vec<f64> {
    let n = values.len();
    let mut buf = forward(values);
    apply_symbol(&mut buf, |k| {
        let w = 2.0 * PI * k as f64;
        ik_pow(w, order)
    });
    if order % 2 == 1 && n % 2 == 0 {
        buf[n / 2] = Complex64::new(0.0, 0.0);
    }
    inverse_real(buf)
}

/// (i w)^order as a complex number.
fn ik_pow(w: f64, order: u32) -> Complex64 {
    let mag = w.powi(order as i32);
    match order % 4 {
        0 => Complex64::new(mag, 0.0),
        1 => Complex64::new(0.0, mag),
        2 => Complex64::new(-mag, 0.0),
        _ => Complex64::new(0.0, -mag),
    }
}

/// Multiplies every bin by `symbol(k)` with `k` the signed wavenumber.
pub(crate) fn apply_symbol(buf: &mut [Complex64], symbol: impl Fn(i64) -> Complex64) {
    let n = buf.len();
    for (j, c) in buf.iter_mut().enumerate() {
        *c *= symbol(wavenumber(j, n));
    }
}

/// Trigonometric interpolant resampled onto `m` points. The Nyquist term of
/// an even grid is split evenly between +n/2 and -n/2.
pub(crate) fn resample(values: &[f64], m: usize) -> Vec<f64> {
    let n = values.len();
    if m == n {
        return values.to_vec();
    }
    let src = forward(values);
    let mut dst = vec![Complex64::new(0.0, 0.0); m];
    let kmax = (n.min(m) - 1) / 2;
    dst[0] = src[0];
    for k in 1..=kmax {
        dst[k] = src[k];
        dst[m - k] = src[n - k];
    }
    if n % 2 == 0 && m > n {
        // split the source Nyquist coefficient
        let h = src[n / 2] * 0.5;
        dst[n / 2] = h;
        dst[m - n / 2] = h;
    } else if m % 2 == 0 && m < n {
        // destination Nyquist gets the real part of both source bins
        let c = (src[m / 2] + src[n - m / 2]) * 0.5;
        dst[m / 2] = Complex64::new(c.re * 2.0, 0.0);
    }
    let scale = m as f64 / n as f64;
    for c in dst.iter_mut() {
        *c *= scale;
    }
    inverse_real(dst)
}

/// Band-limited (trigonometric) interpolant of grid samples that can be
/// evaluated, with its first derivative, anywhere on the line.
#[derive(Debug, Clone)]
pub struct Trig {
    n: usize,
    /// c_k for k = 0..=n/2, normalized so f(x) = Re[c_0 + 2 sum c_k e^{2 pi i k x}].
    coeffs: Vec<Complex64>,
    /// Coefficient of cos(pi n x) (even n only).
    nyquist: f64,
}

impl Trig {
    pub fn new(values: &[f64]) -> Self {
        let n = values.len();
        let buf = forward(values);
        let inv = 1.0 / n as f64;
        let top = if n % 2 == 0 { n / 2 - 1 } else { n / 2 };
        let coeffs: Vec<Complex64> = (0..=top).map(|k| buf[k] * inv).collect();
        let nyquist = if n % 2 == 0 { buf[n / 2].re * inv } else { 0.0 };
        Trig { n, coeffs, nyquist }
    }

    /// Value at `x`.
    pub fn value(&self, x: f64) -> f64 {
        self.value_and_derivative(x).0
    }

    /// Value and first derivative at `x`.
    pub fn value_and_derivative(&self, x: f64) -> (f64, f64) {
        let frac = x - x.floor();
        let (s, c) = (2.0 * PI * frac).sin_cos();
        let z = Complex64::new(c, s);
        // Horner for p = sum_{k>=1} c_k z^k and q = sum k c_k z^k
        let mut p = Complex64::new(0.0, 0.0);
        let mut q = Complex64::new(0.0, 0.0);
        for k in (1..self.coeffs.len()).rev() {
            p = (p + self.coeffs[k]) * z;
            q = (q + self.coeffs[k] * k as f64) * z;
        }
        let mut v = self.coeffs[0].re + 2.0 * p.re;
        let mut d = -4.0 * PI * q.im;
        if self.nyquist != 0.0 {
            let arg = PI * self.n as f64 * frac;
            v += self.nyquist * arg.cos();
            d -= self.nyquist * PI * self.n as f64 * arg.sin();
        }
        (v, d)
    }
}

/// Samples of `values` translated by `shift`: out(x) = in(x - shift).
pub(crate) fn translate(values: &[f64], shift: f64) -> Vec<f64> {
    let n = values.len();
    let mut buf = forward(values);
    for (j, c) in buf.iter_mut().enumerate() {
        let k = wavenumber(j, n);
        if n % 2 == 0 && j == n / 2 {
            *c *= (2.0 * PI * k as f64 * shift).cos();
        } else {
            let (s, co) = (-2.0 * PI * k as f64 * shift).sin_cos();
            *c *= Complex64::new(co, s);
        }
    }
    inverse_real(buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / n as f64).collect()
    }

    #[test]
    fn trig_interpolant_matches_closed_form() {
        let n = 32;
        let f = |x: f64| 0.3 + (2.0 * PI * x).sin() - 0.25 * (6.0 * PI * x).cos();
        let df = |x: f64| 2.0 * PI * (2.0 * PI * x).cos() + 1.5 * PI * (6.0 * PI * x).sin();
        let t = Trig::new(&grid(n).iter().map(|&x| f(x)).collect::<Vec<_>>());
        for &x in &[0.013, 0.5, 0.777, -0.2, 1.35] {
            let (v, d) = t.value_and_derivative(x);
            assert!((v - f(x)).abs() < 1e-13);
            assert!((d - df(x)).abs() < 1e-11);
        }
    }

    #[test]
    fn nyquist_term_interpolates_grid() {
        let n = 16;
        let vals: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let t = Trig::new(&vals);
        for (i, &v) in vals.iter().enumerate() {
            let (y, d) = t.value_and_derivative(i as f64 / n as f64);
            assert!((y - v).abs() < 1e-13);
            assert!(d.abs() < 1e-9);
        }
    }

    #[test]
    fn resample_up_and_down() {
        let f = |x: f64| (2.0 * PI * x).sin() + 0.5 * (8.0 * PI * x).cos();
        let a: Vec<f64> = grid(32).iter().map(|&x| f(x)).collect();
        let up = resample(&a, 128);
        for (x, v) in grid(128).iter().zip(&up) {
            assert!((f(*x) - v).abs() < 1e-13);
        }
        let down = resample(&up, 16);
        for (x, v) in grid(16).iter().zip(&down) {
            assert!((f(*x) - v).abs() < 1e-13);
        }
    }

    #[test]
    fn translate_shifts_modes() {
        let n = 64;
        let a: Vec<f64> = grid(n).iter().map(|&x| (2.0 * PI * x).cos()).collect();
        let b = translate(&a, 0.1);
        for (x, v) in grid(n).iter().zip(&b) {
            assert!((v - (2.0 * PI * (x - 0.1)).cos()).abs() < 1e-13);
        }
    }
}
