//! Method-of-lines oracle for d_t u = d_x(u d_x(dE/du)): spectral space
//! derivatives, classical RK4 in time.

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::{self, EnergySpec};
use crate::error::{invalid, Error, Result};
use crate::geometry::{spectral, PeriodicDensity, Samples};
use crate::jko::JkoTrajectory;

/// Extent of the RK4 stability region on the negative real axis.
const RK4_REAL_LIMIT: f64 = 2.785;
/// Densities below this abort the run.
pub const POSITIVITY_FLOOR: f64 = 1e-6;
/// Energy growth per step treated as instability.
pub const ENERGY_INCREASE_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TimeStep {
    /// min(0.1 dx^(2k+2) / max u0, half the RK4 stability limit at u0).
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PdeOptions {
    pub dt: TimeStep,
    /// Times at which states are recorded (besides 0 and t_end).
    /// Empty means 100 equal intervals.
    pub output_times: Vec<f64>,
}

impl PdeOptions {
    /// Record at multiples of `interval`.
    pub fn every(interval: f64, t_end: f64) -> Self {
        let count = (t_end / interval - 1e-9).ceil().max(0.0) as usize;
        PdeOptions { dt: TimeStep::Auto, output_times: (1..=count).map(|i| (i as f64 * interval).min(t_end)).collect() }
    }
}

#[derive(Debug, Clone)]
pub struct PdeTrajectory {
    pub spec: EnergySpec,
    pub times: Vec<f64>,
    pub states: Vec<PeriodicDensity>,
    pub energies: Vec<f64>,
    /// Nominal internal step; segments are shortened to hit output times.
    pub dt: f64,
    pub steps: usize,
    pub scheme: &'static str,
    /// Largest |mass - 1| seen before states are renormalized for storage.
    pub mass_drift: f64,
    /// Set when the run stopped early on positivity loss.
    pub failure: Option<String>,
}

impl PdeTrajectory {
    /// The piecewise-constant JKO curve sampled at t = n tau.
    pub fn from_jko(traj: &JkoTrajectory) -> Self {
        let states: Vec<PeriodicDensity> = (0..=traj.len()).map(|n| traj.state(n).clone()).collect();
        PdeTrajectory {
            spec: traj.spec,
            times: (0..=traj.len()).map(|n| traj.time(n)).collect(),
            energies: traj.energies.clone(),
            states,
            dt: traj.tau,
            steps: traj.len(),
            scheme: "jko",
            mass_drift: 0.0,
            failure: None,
        }
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial state")
    }

    /// State at `t` by linear interpolation between recorded times.
    pub fn at_time(&self, t: f64) -> Option<PeriodicDensity> {
        let tol = 1e-9 * self.final_time().max(f64::MIN_POSITIVE);
        if t < self.times[0] - tol || t > self.final_time() + tol {
            return None;
        }
        let k = self.times.partition_point(|&s| s < t - tol);
        let k = k.min(self.times.len() - 1);
        if (self.times[k] - t).abs() <= tol || k == 0 {
            return Some(self.states[k].clone());
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        let a = self.states[k - 1].values();
        let b = self.states[k].values();
        PeriodicDensity::normalized(a.iter().zip(b).map(|(x, y)| (1.0 - w) * x + w * y).collect()).ok()
    }
}

fn rhs(spec: &EnergySpec, u: &[f64]) -> Vec<f64> {
    let phi = energy::first_variation_values(spec, u);
    energy::pde_rhs_values(u, &phi)
}

/// Spectral radius of the linearized right-hand side at `u` by power iteration.
pub fn stiffness(spec: &EnergySpec, u: &PeriodicDensity) -> f64 {
    let n = u.len();
    let base = u.values();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } + 0.1 * rng.random::<f64>()).collect();
    let mut rho = 0.0;
    for _ in 0..60 {
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        // unit l2 direction has entries of size n^(-1/2)
        let eps = 1e-7 * base.iter().fold(0.0f64, |a, b| a.max(b.abs())) * (n as f64).sqrt();
        let plus: Vec<f64> = base.iter().zip(&v).map(|(b, x)| b + eps * x / norm).collect();
        let minus: Vec<f64> = base.iter().zip(&v).map(|(b, x)| b - eps * x / norm).collect();
        let (rp, rm) = (rhs(spec, &plus), rhs(spec, &minus));
        v = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
        let next = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (next - rho).abs() <= 1e-3 * next {
            rho = next;
            break;
        }
        rho = next;
    }
    rho
}

/// Step chosen by [`TimeStep::Auto`].
pub fn auto_dt(spec: &EnergySpec, u0: &PeriodicDensity) -> f64 {
    let dx = u0.grid().spacing();
    let nominal = 0.1 * dx.powi(spec.pde_order() as i32) / u0.max();
    let stable = 0.5 * RK4_REAL_LIMIT / stiffness(spec, u0).max(f64::MIN_POSITIVE);
    nominal.min(stable)
}

pub fn pde_solve(spec: &EnergySpec, u0: &PeriodicDensity, t_end: f64, dt: TimeStep) -> Result<PdeTrajectory> {
    pde_solve_with(spec, u0, t_end, &PdeOptions { dt, output_times: Vec::new() })
}

pub fn pde_solve_with(spec: &EnergySpec, u0: &PeriodicDensity, t_end: f64, opts: &PdeOptions) -> Result<PdeTrajectory> {
    spec.validate()?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(invalid(format!("end time must be finite and nonnegative, got {t_end}")));
    }
    if u0.min() <= 0.0 {
        return Err(Error::Domain("the PDE oracle needs a strictly positive initial density".into()));
    }
    let dt = match opts.dt {
        TimeStep::Auto => auto_dt(spec, u0),
        TimeStep::Fixed(h) if h > 0.0 && h.is_finite() => h,
        TimeStep::Fixed(h) => return Err(invalid(format!("time step must be positive, got {h}"))),
    };
    let mut marks: Vec<f64> = if opts.output_times.is_empty() {
        (1..=100).map(|i| t_end * i as f64 / 100.0).collect()
    } else {
        opts.output_times.iter().copied().filter(|&t| t > 0.0 && t < t_end).collect()
    };
    marks.push(t_end);
    marks.sort_by(f64::total_cmp);
    marks.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_end);

    let e0 = energy::evaluate(spec, u0);
    let mut traj = PdeTrajectory {
        spec: *spec,
        times: vec![0.0],
        states: vec![u0.clone()],
        energies: vec![e0],
        dt,
        steps: 0,
        scheme: "rk4-spectral",
        mass_drift: 0.0,
        failure: None,
    };
    if t_end == 0.0 {
        return Ok(traj);
    }
    let n = u0.len();
    let mut u = u0.values().to_vec();
    let mut e_prev = e0;
    let mut t = 0.0;
    let mut tmp = vec![0.0; n];
    'segments: for &mark in &marks {
        let count = ((mark - t) / dt - 1e-9).ceil().max(1.0) as usize;
        let h = (mark - t) / count as f64;
        for i in 0..count {
            let k1 = rhs(spec, &u);
            axpy(&mut tmp, &u, 0.5 * h, &k1);
            let k2 = rhs(spec, &tmp);
            axpy(&mut tmp, &u, 0.5 * h, &k2);
            let k3 = rhs(spec, &tmp);
            axpy(&mut tmp, &u, h, &k3);
            let k4 = rhs(spec, &tmp);
            for j in 0..n {
                u[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            traj.steps += 1;
            let now = if i + 1 == count { mark } else { t + (i + 1) as f64 * h };
            let min = u.iter().copied().fold(f64::INFINITY, f64::min);
            let e = energy::evaluate_values(spec, &u);
            if e.is_finite() && e > e_prev + ENERGY_INCREASE_LIMIT {
                return Err(Error::DtTooLarge { time: now, increase: e - e_prev });
            }
            if !(min >= POSITIVITY_FLOOR) {
                warn!("PDE oracle stopped at t = {now}: min density {min}");
                traj.failure = Some(format!("positivity lost at t = {now} (min density {min})"));
                break 'segments;
            }
            if !e.is_finite() {
                return Err(Error::DtTooLarge { time: now, increase: f64::INFINITY });
            }
            e_prev = e;
        }
        t = mark;
        let mass = crate::geometry::mean_of(u.iter().copied());
        traj.mass_drift = traj.mass_drift.max((mass - 1.0).abs());
        traj.times.push(t);
        traj.states.push(PeriodicDensity::normalized(u.clone())?);
        traj.energies.push(e_prev);
    }
    debug!("PDE oracle: {} RK4 steps of nominal size {dt}", traj.steps);
    Ok(traj)
}

fn axpy(out: &mut [f64], x: &[f64], a: f64, y: &[f64]) {
    for ((o, x), y) in out.iter_mut().zip(x).zip(y) {
        *o = x + a * y;
    }
}

/// Differences between a JKO trajectory and a reference at t = n tau.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub times: Vec<f64>,
    pub sup: Vec<f64>,
    pub l2: Vec<f64>,
    /// E_jko - E_ref at each matched time.
    pub energy: Vec<f64>,
}

impl Comparison {
    pub fn max_sup(&self) -> f64 {
        self.sup.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_l2(&self) -> f64 {
        self.l2.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_energy(&self) -> f64 {
        self.energy.iter().fold(0.0f64, |a, b| a.max(b.abs()))
    }

    pub fn final_sup(&self) -> f64 {
        *self.sup.last().expect("nonempty comparison")
    }
}

/// Matches the JKO states M_n with the reference at t = n tau inside the
/// reference's time range. References on another grid are resampled.
pub fn compare(jko: &JkoTrajectory, reference: &PdeTrajectory) -> Result<Comparison> {
    let mut out = Comparison { times: Vec::new(), sup: Vec::new(), l2: Vec::new(), energy: Vec::new() };
    for k in 0..=jko.len() {
        let t = jko.time(k);
        let Some(r) = reference.at_time(t) else { continue };
        let a = jko.state(k);
        let r = if r.len() == a.len() { r } else { r.resample(a.len())? };
        let d: Vec<f64> = a.values().iter().zip(r.values()).map(|(x, y)| x - y).collect();
        out.times.push(t);
        out.sup.push(d.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        out.l2.push((d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt());
        out.energy.push(jko.energies[k] - energy::evaluate(&reference.spec, &r));
    }
    if out.times.is_empty() {
        return Err(invalid("trajectories share no matched time"));
    }
    Ok(out)
}

/// Amplitude of Fourier mode `k` (coefficient of sin + i cos, unnormalized by 2).
pub fn mode_amplitude(u: &PeriodicDensity, k: usize) -> f64 {
    let c = spectral::forward(u.values());
    2.0 * c[k].norm() / u.len() as f64
}
