//! Pointwise integrands of the first-order families.
//!
//! Each family is written as g(v, q) with q = d_x w and w = h(v) a fixed
//! transform of the density: the Dirichlet energy uses h(v) = v, the power
//! family h(v) = v^a, the log energy h(v) = log v. The same integrand in
//! the variables (u, u') is exposed through [`Integrand::partials`] for the
//! general second-variation formula.

/// First-order energy integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrand {
    /// 1/2 p^2
    Dirichlet,
    /// 1/2 ((u^a)')^2
    Power(f64),
    /// 1/2 ((log u)')^2
    Log,
    /// p^2 + eps / u^2
    Perturbed(f64),
}

/// Partial derivatives g^(i,j) = d^i/du^i d^j/dp^j g(u, p).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partials {
    pub g01: f64,
    pub g02: f64,
    pub g11: f64,
    pub g20: f64,
}

impl Integrand {
    pub(crate) fn transform(&self, v: f64) -> f64 {
        match *self {
            Integrand::Dirichlet | Integrand::Perturbed(_) => v,
            Integrand::Power(a) => v.powf(a),
            Integrand::Log => v.ln(),
        }
    }

    /// h'(v)
    pub(crate) fn transform_slope(&self, v: f64) -> f64 {
        match *self {
            Integrand::Dirichlet | Integrand::Perturbed(_) => 1.0,
            Integrand::Power(a) => a * v.powf(a - 1.0),
            Integrand::Log => 1.0 / v,
        }
    }

    /// Integrand in the transformed gradient q = (h(v))'.
    pub(crate) fn reduced(&self, v: f64, q: f64) -> f64 {
        match *self {
            Integrand::Perturbed(e) => q * q + e / (v * v),
            _ => 0.5 * q * q,
        }
    }

    pub(crate) fn reduced_dq(&self, _v: f64, q: f64) -> f64 {
        match *self {
            Integrand::Perturbed(_) => 2.0 * q,
            _ => q,
        }
    }

    pub(crate) fn reduced_dv(&self, v: f64, _q: f64) -> f64 {
        match *self {
            Integrand::Perturbed(e) => -2.0 * e / (v * v * v),
            _ => 0.0,
        }
    }

    /// Value of g at (u, p = u').
    pub fn value(&self, u: f64, p: f64) -> f64 {
        match *self {
            Integrand::Dirichlet => 0.5 * p * p,
            Integrand::Power(a) => 0.5 * (a * u.powf(a - 1.0) * p).powi(2),
            Integrand::Log => 0.5 * (p / u).powi(2),
            Integrand::Perturbed(e) => p * p + e / (u * u),
        }
    }

    /// Partials of g(u, p) needed by the second-variation matrix.
    pub fn partials(&self, u: f64, p: f64) -> Partials {
        match *self {
            Integrand::Dirichlet => Partials { g01: p, g02: 1.0, g11: 0.0, g20: 0.0 },
            Integrand::Power(a) => {
                let c = a * a;
                let e = 2.0 * a - 2.0;
                Partials {
                    g01: c * u.powf(e) * p,
                    g02: c * u.powf(e),
                    g11: c * e * u.powf(e - 1.0) * p,
                    g20: 0.5 * c * e * (e - 1.0) * u.powf(e - 2.0) * p * p,
                }
            }
            Integrand::Log => Partials {
                g01: p / (u * u),
                g02: 1.0 / (u * u),
                g11: -2.0 * p / (u * u * u),
                g20: 3.0 * p * p / u.powi(4),
            },
            Integrand::Perturbed(e) => Partials { g01: 2.0 * p, g02: 2.0, g11: 0.0, g20: 6.0 * e / u.powi(4) },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partials_match_finite_differences() {
        let cases = [Integrand::Dirichlet, Integrand::Power(0.7), Integrand::Power(2.5), Integrand::Log, Integrand::Perturbed(0.3)];
        let (u, p) = (1.3, -0.8);
        let h = 1e-4;
        for g in cases {
            let pr = g.partials(u, p);
            let d01 = (g.value(u, p + h) - g.value(u, p - h)) / (2.0 * h);
            let d02 = (g.value(u, p + h) - 2.0 * g.value(u, p) + g.value(u, p - h)) / (h * h);
            let d20 = (g.value(u + h, p) - 2.0 * g.value(u, p) + g.value(u - h, p)) / (h * h);
            let d11 = (g.value(u + h, p + h) - g.value(u + h, p - h) - g.value(u - h, p + h) + g.value(u - h, p - h)) / (4.0 * h * h);
            assert!((pr.g01 - d01).abs() < 1e-6, "{g:?}");
            assert!((pr.g02 - d02).abs() < 1e-5, "{g:?}");
            assert!((pr.g20 - d20).abs() < 1e-5, "{g:?}");
            assert!((pr.g11 - d11).abs() < 1e-5, "{g:?}");
        }
    }

    #[test]
    fn reduced_form_agrees_with_value() {
        for g in [Integrand::Dirichlet, Integrand::Power(0.7), Integrand::Log, Integrand::Perturbed(0.3)] {
            let (u, p) = (0.9, 0.4);
            let q = g.transform_slope(u) * p;
            assert!((g.reduced(u, q) - g.value(u, p)).abs() < 1e-14);
        }
    }
}
