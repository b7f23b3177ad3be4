use log::{debug, warn};

use super::{jko_step_with, JkoOptions, JkoStep};
use crate::energy::{self, EnergySpec};
use crate::error::{invalid, Error, Result};
use crate::geometry::{PeriodicDensity, Samples};
use crate::transport;

/// The set B_delta(mu0) ∩ {E <= c} ∩ {min > m} a flow is allowed to explore.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainBudget {
    /// Energy ceiling.
    pub c: f64,
    /// Positivity floor.
    pub m: f64,
    /// Wasserstein radius around the initial density.
    pub delta: f64,
    /// First step index (1-based, step n produces M_n) that left the domain.
    pub exit_step: Option<usize>,
}

impl DomainBudget {
    pub fn new(c: f64, m: f64, delta: f64) -> Result<Self> {
        if !(c.is_finite() && m.is_finite() && delta > 0.0 && delta.is_finite()) {
            return Err(invalid(format!("bad budget c={c}, m={m}, delta={delta}")));
        }
        Ok(DomainBudget { c, m, delta, exit_step: None })
    }

    /// Checks the budget against an initial density.
    pub fn admits(&self, spec: &EnergySpec, mu0: &PeriodicDensity) -> Result<()> {
        let e0 = energy::evaluate(spec, mu0);
        if !(e0 < self.c) {
            return Err(invalid(format!("energy ceiling c={} must exceed E(mu0)={e0}", self.c)));
        }
        if !(self.m < mu0.min()) {
            return Err(invalid(format!("floor m={} must be below min mu0={}", self.m, mu0.min())));
        }
        Ok(())
    }

    fn violated(&self, w2_from_start: f64, min: f64, energy: f64) -> bool {
        w2_from_start >= self.delta / 4.0 || min <= self.m || energy >= self.c
    }
}

#[derive(Debug, Clone)]
pub struct FlowOptions {
    pub step: JkoOptions,
    /// Reuse each step's displacement as the next initial guess.
    pub warm_start: bool,
    /// Stop as soon as the domain monitor fires.
    pub stop_on_exit: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { step: JkoOptions::default(), warm_start: true, stop_on_exit: true }
    }
}

/// Piecewise-constant interpolation mu_t = M_n for (n-1) tau < t <= n tau.
#[derive(Debug, Clone)]
pub struct JkoTrajectory {
    pub spec: EnergySpec,
    pub tau: f64,
    pub initial: PeriodicDensity,
    pub steps: Vec<JkoStep>,
    /// E(M_0), E(M_1), ...
    pub energies: Vec<f64>,
    /// W2(M_n, M_0) for n = 0, 1, ...
    pub distance_from_start: Vec<f64>,
    pub budget: DomainBudget,
    /// Error that ended the flow early, if any.
    pub failure: Option<FlowFailure>,
}

/// Why a trajectory is shorter than its horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowFailure {
    /// Index of the step that could not be computed.
    pub step: usize,
    pub message: String,
    /// True for solver or positivity failures, false for bad input.
    pub numerical: bool,
}

impl FlowFailure {
    fn new(step: usize, e: &Error) -> Self {
        FlowFailure { step, message: e.to_string(), numerical: e.is_numerical() }
    }
}

impl JkoTrajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// M_n, with M_0 the initial density.
    pub fn state(&self, n: usize) -> &PeriodicDensity {
        if n == 0 {
            &self.initial
        } else {
            &self.steps[n - 1].result
        }
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.tau
    }

    /// mu_t of the piecewise-constant interpolation.
    pub fn at_time(&self, t: f64) -> &PeriodicDensity {
        let n = (t / self.tau - 1e-9).ceil().max(0.0) as usize;
        self.state(n.min(self.len()))
    }

    pub fn final_state(&self) -> &PeriodicDensity {
        self.state(self.len())
    }

    pub fn min_density(&self) -> f64 {
        (0..=self.len()).map(|n| self.state(n).min()).fold(f64::INFINITY, f64::min)
    }

    /// Largest E(M_n) - E(M_{n-1}); nonpositive on a dissipating trajectory.
    pub fn max_energy_increase(&self) -> f64 {
        self.energies.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn flow(
    spec: &EnergySpec,
    mu0: &PeriodicDensity,
    tau: f64,
    horizon: f64,
    budget: DomainBudget,
) -> Result<JkoTrajectory> {
    flow_with(spec, mu0, tau, horizon, budget, &FlowOptions::default())
}

pub fn flow_with(
    spec: &EnergySpec,
    mu0: &PeriodicDensity,
    tau: f64,
    horizon: f64,
    budget: DomainBudget,
    opts: &FlowOptions,
) -> Result<JkoTrajectory> {
    spec.validate()?;
    if !(tau > 0.0 && tau.is_finite() && horizon >= 0.0 && horizon.is_finite()) {
        return Err(invalid(format!("need tau > 0 and horizon >= 0, got {tau}, {horizon}")));
    }
    if mu0.min() <= 0.0 {
        return Err(Error::Domain("flows need a strictly positive initial density".into()));
    }
    budget.admits(spec, mu0)?;
    let steps = (horizon / tau - 1e-9).ceil().max(0.0) as usize;
    let mut traj = JkoTrajectory {
        spec: *spec,
        tau,
        initial: mu0.clone(),
        steps: Vec::with_capacity(steps),
        energies: vec![energy::evaluate(spec, mu0)],
        distance_from_start: vec![0.0],
        budget: DomainBudget { exit_step: None, ..budget },
        failure: None,
    };
    let mut step_opts = opts.step.clone();
    for n in 1..=steps {
        let prev = traj.final_state().clone();
        let step = match jko_step_with(spec, &prev, tau, &step_opts) {
            Ok(s) => s,
            Err(e) => {
                warn!("flow stopped at step {n}: {e}");
                traj.failure = Some(FlowFailure::new(n, &e));
                break;
            }
        };
        let dist = match transport::w2_distance(mu0, &step.result) {
            Ok(d) => d,
            Err(e) => {
                traj.failure = Some(FlowFailure::new(n, &e));
                break;
            }
        };
        debug!("step {n}: E = {}, W2 increment = {}, residual = {}", step.energy, step.w2, step.el_residual);
        if opts.warm_start {
            step_opts.warm_start = Some(step.displacement.values().to_vec());
        }
        traj.energies.push(step.energy);
        traj.distance_from_start.push(dist);
        let exited = traj.budget.exit_step.is_none() && budget.violated(dist, step.result.min(), step.energy);
        traj.steps.push(step);
        if exited {
            traj.budget.exit_step = Some(n);
            if opts.stop_on_exit {
                break;
            }
        }
    }
    Ok(traj)
}

/// First step n with W2(M_n, M_0) >= delta/4, min M_n <= m or E(M_n) >= c.
pub fn domain_monitor(traj: &JkoTrajectory, budget: &DomainBudget) -> DomainBudget {
    let exit = (1..=traj.len()).find(|&n| {
        let dist = match traj.distance_from_start.get(n) {
            Some(d) => *d,
            None => transport::w2_distance(&traj.initial, traj.state(n)).unwrap_or(f64::INFINITY),
        };
        budget.violated(dist, traj.state(n).min(), traj.energies[n])
    });
    DomainBudget { exit_step: exit, ..*budget }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grid;

    #[test]
    fn uniform_flow_is_constant() {
        let u = PeriodicDensity::uniform(Grid::new(64).unwrap());
        let b = DomainBudget::new(1.0, 0.5, 1.0).unwrap();
        let t = flow(&EnergySpec::Dirichlet, &u, 1e-4, 1e-3, b).unwrap();
        assert_eq!(t.len(), 10);
        assert!(t.steps.iter().all(|s| s.result == u));
        assert_eq!(domain_monitor(&t, &b).exit_step, None);
    }

    #[test]
    fn floor_above_running_minimum_exits_at_first_step() {
        let u = PeriodicDensity::sine(Grid::new(64).unwrap(), 0.2, 1).unwrap();
        let b = DomainBudget::new(10.0, 0.5, 1.0).unwrap();
        let t = flow(&EnergySpec::Dirichlet, &u, 1e-6, 5e-6, b).unwrap();
        assert_eq!(t.budget.exit_step, None);
        let tight = DomainBudget { m: t.state(3).min() + 1e-15, ..b };
        let first = (1..=t.len()).find(|&n| t.state(n).min() <= tight.m).unwrap();
        assert_eq!(domain_monitor(&t, &tight).exit_step, Some(first));
    }

    #[test]
    fn budget_validation() {
        let u = PeriodicDensity::sine(Grid::new(64).unwrap(), 0.2, 1).unwrap();
        assert!(DomainBudget::new(1.0, 0.0, 0.0).is_err());
        let low_c = DomainBudget::new(1e-6, 0.0, 1.0).unwrap();
        assert!(flow(&EnergySpec::Dirichlet, &u, 1e-6, 1e-5, low_c).is_err());
        let high_m = DomainBudget::new(10.0, 0.9, 1.0).unwrap();
        assert!(flow(&EnergySpec::Dirichlet, &u, 1e-6, 1e-5, high_m).is_err());
    }
}
