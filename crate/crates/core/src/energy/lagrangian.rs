//! Energies of pushed-forward densities written in Lagrangian coordinates.
//!
//! For a displacement f of the predecessor density u, the pushed density at
//! y = x + f(x) is rho = u / J with J = 1 + f'. Derivatives in y become
//! (1/J) d_x, and dy = J dx, so E((Id + f)_# u) is a function of the grid
//! values of f alone. Its exact discrete gradient (spectral D is skew) is
//! what the JKO inner solver minimizes.

use super::EnergySpec;
use crate::geometry::spectral;

pub(crate) struct Lagrangian<'a> {
    spec: EnergySpec,
    u: &'a [f64],
}

impl<'a> Lagrangian<'a> {
    pub fn new(spec: &EnergySpec, u: &'a [f64]) -> Self {
        Lagrangian { spec: spec.canonical(), u }
    }

    /// Energy of (Id + f)_# u; +inf when 1 + f' <= 0 somewhere.
    pub fn value(&self, f: &[f64]) -> f64 {
        self.eval(f, None)
    }

    /// Energy and its gradient with respect to the grid values of f.
    pub fn value_and_gradient(&self, f: &[f64], grad: &mut [f64]) -> f64 {
        self.eval(f, Some(grad))
    }

    fn eval(&self, f: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let n = f.len();
        let jac: Vec<f64> = spectral::derivative(f, 1).into_iter().map(|d| 1.0 + d).collect();
        if jac.iter().any(|j| *j <= 0.0) {
            return f64::INFINITY;
        }
        let rho: Vec<f64> = self.u.iter().zip(&jac).map(|(u, j)| u / j).collect();
        let nf = n as f64;
        if let EnergySpec::HigherOrder(k) = self.spec {
            return higher_order(k as usize, &rho, &jac, grad);
        }
        let g = self.spec.integrand().expect("first-order family");
        let w: Vec<f64> = rho.iter().map(|&r| g.transform(r)).collect();
        let dw = spectral::derivative(&w, 1);
        let q: Vec<f64> = dw.iter().zip(&jac).map(|(d, j)| d / j).collect();
        let energy = (0..n).map(|i| jac[i] * g.reduced(rho[i], q[i])).sum::<f64>() / nf;
        if let Some(grad) = grad {
            let gq: Vec<f64> = (0..n).map(|i| g.reduced_dq(rho[i], q[i])).collect();
            let dgq = spectral::derivative(&gq, 1);
            let big_q: Vec<f64> = (0..n)
                .map(|i| {
                    let r = rho[i];
                    g.reduced(r, q[i]) - q[i] * gq[i] - r * g.reduced_dv(r, q[i])
                        + r * g.transform_slope(r) * dgq[i] / jac[i]
                })
                .collect();
            let dq = spectral::derivative(&big_q, 1);
            for (gr, d) in grad.iter_mut().zip(dq) {
                *gr = -d / nf;
            }
        }
        energy
    }
}

/// 1/2 int J a_k^2 with a_0 = rho, a_j = (D a_{j-1}) / J, differentiated in
/// reverse mode.
fn higher_order(k: usize, rho: &[f64], jac: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let n = rho.len();
    let nf = n as f64;
    let mut layers = Vec::with_capacity(k + 1);
    layers.push(rho.to_vec());
    for j in 1..=k {
        let d = spectral::derivative(&layers[j - 1], 1);
        layers.push(d.iter().zip(jac).map(|(a, b)| a / b).collect());
    }
    let top = &layers[k];
    let energy = 0.5 * (0..n).map(|i| jac[i] * top[i] * top[i]).sum::<f64>() / nf;
    if let Some(grad) = grad {
        let mut jbar: Vec<f64> = top.iter().map(|a| 0.5 * a * a).collect();
        let mut abar: Vec<f64> = (0..n).map(|i| jac[i] * top[i]).collect();
        for j in (1..=k).rev() {
            let a = &layers[j];
            for i in 0..n {
                jbar[i] -= abar[i] * a[i] / jac[i];
            }
            let scaled: Vec<f64> = abar.iter().zip(jac).map(|(a, b)| a / b).collect();
            abar = spectral::derivative(&scaled, 1).into_iter().map(|v| -v).collect();
        }
        for i in 0..n {
            jbar[i] -= abar[i] * rho[i] / jac[i];
        }
        let d = spectral::derivative(&jbar, 1);
        for (gr, v) in grad.iter_mut().zip(d) {
            *gr = -v / nf;
        }
    }
    energy
}
