use std::path::Path;

use otflow::convexity::{self, counterexample, find_witness, CertifyOptions};
use otflow::energy::{self, sublevel_bounds};
use otflow::geometry::read_density_csv;
use otflow::jko::{flow_with, DomainBudget, FlowOptions, JkoTrajectory};
use otflow::pde::{self, PdeOptions, TimeStep};
use otflow::{par, transport, Execution, Grid, Samples};
use serde_json::json;

use crate::config::*;
use crate::error::{CliError, CliResult};
use crate::initial::{self, Positivity};
use crate::output::{dump_state, sidecar_dir, BudgetRecord, Context, Metadata, StepRecord, StudyRow, Trajectory};

pub fn distance(ctx: &Context, a: &DistanceArgs) -> CliResult<()> {
    let grid = Grid::new(a.grid.n)?;
    let mu = initial::density(&a.source, grid, a.grid.seed, 0, Positivity::Any)?;
    let nu = initial::density(&a.target, grid, a.grid.seed, 1, Positivity::Any)?;
    let map = transport::optimal_map(&mu, &nu)?;
    if let Some(path) = &a.map_output {
        ctx.write_csv(path, "T", &map.as_field())?;
    }
    ctx.print(&json!({
        "w2": map.cost().sqrt(),
        "w2_squared": map.cost(),
        "theta": map.theta(),
    }))
}

pub fn geodesic(ctx: &Context, a: &GeodesicArgs) -> CliResult<()> {
    let grid = Grid::new(a.grid.n)?;
    let mu = initial::density(&a.source, grid, a.grid.seed, 0, Positivity::Any)?;
    let nu = initial::density(&a.target, grid, a.grid.seed, 1, Positivity::Any)?;
    let us = transport::geodesic(&mu, &nu, a.s)?;
    if let Some(path) = &a.output {
        ctx.write_csv(path, "u", &us)?;
    }
    ctx.print(&json!({
        "s": a.s,
        "w2": transport::w2_distance(&mu, &nu)?,
        "w2_from_source": transport::w2_distance(&mu, &us)?,
        "w2_to_target": transport::w2_distance(&us, &nu)?,
        "min_density": us.min(),
        "max_density": us.max(),
    }))
}

pub fn energy(ctx: &Context, a: &EnergyArgs) -> CliResult<()> {
    let grid = Grid::new(a.grid.n)?;
    let u = initial::density(&a.input, grid, a.grid.seed, 0, Positivity::Any)?;
    let value = energy::evaluate(&a.energy, &u);
    if let Some(path) = &a.variation_output {
        ctx.write_csv(path, "phi", &energy::first_variation(&a.energy, &u)?)?;
    }
    ctx.print(&json!({
        "energy": a.energy.to_string(),
        "value": value,
        "finite": value.is_finite(),
        "value_unhalved": value / a.energy.unhalved_ratio(),
        "min_density": u.min(),
    }))
}

pub fn hessian(ctx: &Context, a: &HessianArgs) -> CliResult<()> {
    let grid = Grid::new(a.grid.n)?;
    let u = initial::density(&a.input, grid, a.grid.seed, 0, Positivity::Any)?;
    let f = initial::field(&a.field, grid)?;
    let value = convexity::hessian(&a.energy, &u, &f)?;
    let (numeric, numeric_error) = match convexity::hessian_extrapolated(&a.energy, &u, &f, a.step) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let weight = u.values().iter().zip(f.values()).map(|(u, f)| f * f * u).sum::<f64>() / grid.n() as f64;
    ctx.print(&json!({
        "energy": a.energy.to_string(),
        "value": value,
        "value_unhalved": value / a.energy.unhalved_ratio(),
        "weight": weight,
        "quotient": value / weight,
        "numeric": numeric,
        "numeric_error": numeric_error,
        "relative_gap": numeric.map(|d| (d - value).abs() / value.abs().max(f64::MIN_POSITIVE)),
    }))
}

pub fn lambda(ctx: &Context, a: &LambdaArgs) -> CliResult<()> {
    let est = convexity::lambda_estimate(&a.energy, a.c, a.m)?;
    let bounds = sublevel_bounds(&a.energy, a.c, a.m)?;
    let k = &est.constants;
    ctx.print(&json!({
        "energy": a.energy.to_string(),
        "lambda": est.lambda,
        "lambda_unhalved": est.lambda_unhalved,
        "lambda_verbatim_unhalved": est.lambda_verbatim_unhalved,
        "floor": est.m,
        "sup_bound": bounds.sup,
        "holder": bounds.holder,
        "alpha": est.alpha,
        "interpolation": {
            "d": k.d,
            "beta": k.beta,
            "lambda": k.lambda,
            "beta_squared": k.beta_squared,
            "lambda_hat": k.lambda_hat,
        },
    }))
}

pub fn counterexample_sweep(ctx: &Context, a: &CounterexampleArgs) -> CliResult<()> {
    let grid = Grid::new(a.n)?;
    let pairs = par::try_map_range(Execution::available(), a.h.len(), |i| counterexample(a.h[i], grid))
        .map_err(|e| match e {
            otflow::Error::Resolution(m) => CliError::Usage(m),
            other => other.into(),
        })?;
    let rows: Vec<Vec<f64>> = pairs
        .iter()
        .map(|p| {
            let h2 = (p.h as f64).powi(2);
            vec![p.h as f64, p.a_value, p.b_value, p.a_value / h2, p.a_exact, p.b_exact]
        })
        .collect();
    if let Some(path) = &a.output {
        ctx.write_table(path, &["h", "A", "B", "A/h^2", "A_exact", "B_exact"], &rows)?;
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r[3]).collect();
    let spread = if ratios.is_empty() {
        0.0
    } else {
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), r| (l.min(*r), h.max(*r)));
        (hi - lo) / mean.abs()
    };
    let witnesses: Vec<_> = a
        .lambda
        .iter()
        .map(|&l| {
            let h = find_witness(l, a.max_h);
            let exact = h.map(convexity::exact_values);
            json!({ "lambda": l, "h": h, "A": exact.map(|e| e.0), "B": exact.map(|e| e.1) })
        })
        .collect();
    ctx.print(&json!({
        "convention": "unhalved",
        "rows": pairs.iter().zip(&rows).map(|(p, r)| json!({
            "h": p.h, "A": r[1], "B": r[2], "A_over_h2": r[3], "A_exact": r[4], "B_exact": r[5], "f_periodic": p.periodic,
        })).collect::<Vec<_>>(),
        "ratio_spread": spread,
        "witnesses": witnesses,
    }))
}

fn check_dump(dump: bool, output: &Option<std::path::PathBuf>) -> CliResult<Option<std::path::PathBuf>> {
    match (dump, output) {
        (false, _) => Ok(None),
        (true, None) => Err(CliError::Usage("--dump-densities needs --output".into())),
        (true, Some(path)) => {
            let dir = sidecar_dir(path);
            std::fs::create_dir_all(&dir)
                .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
            Ok(Some(dir))
        }
    }
}

fn jko_records(ctx: &Context, traj: &JkoTrajectory, dir: Option<&Path>) -> CliResult<Vec<StepRecord>> {
    (0..=traj.len())
        .map(|k| {
            let step = k.checked_sub(1).map(|i| &traj.steps[i]);
            Ok(StepRecord {
                n: k,
                t: traj.time(k),
                energy: traj.energies[k],
                w2_increment: step.map_or(0.0, |s| s.w2),
                residual: step.map(|s| s.el_residual),
                min_density: traj.state(k).min(),
                density_file: dir.map(|d| dump_state(ctx, d, k, traj.state(k))).transpose()?,
            })
        })
        .collect()
}

/// Writes the trajectory (file or stdout) and a summary on stdout.
fn emit_trajectory(ctx: &Context, doc: &Trajectory, output: &Option<std::path::PathBuf>) -> CliResult<()> {
    match output {
        None => ctx.print(doc),
        Some(path) => {
            ctx.write_json(path, doc)?;
            let last = doc.steps.last().expect("initial state is recorded");
            ctx.print(&json!({
                "output": path.display().to_string(),
                "records": doc.steps.len(),
                "final_time": last.t,
                "final_energy": last.energy,
                "min_density": doc.steps.iter().map(|s| s.min_density).fold(f64::INFINITY, f64::min),
                "failure": doc.metadata.failure,
                "study": doc.study,
            }))
        }
    }
}

pub fn flow(ctx: &Context, a: &FlowArgs) -> CliResult<()> {
    let grid = Grid::new(a.grid.n)?;
    let dir = check_dump(a.dump_densities, &a.output)?;
    let u0 = initial::density(&a.initial, grid, a.grid.seed, 0, Positivity::Strict)?;
    let e0 = energy::evaluate(&a.energy, &u0);
    // the default radius exceeds the diameter of P(S^1), so only c and m bind
    let budget = DomainBudget::new(
        a.budget.c.unwrap_or(2.0 * e0 + 1.0),
        a.budget.m.unwrap_or(0.5 * u0.min()),
        a.budget.delta.unwrap_or(2.0),
    )?;
    let opts = FlowOptions { stop_on_exit: !a.ignore_budget, ..FlowOptions::default() };
    let runs = a.halvings as usize + 1;
    let taus: Vec<f64> = (0..runs).map(|j| a.tau / (1u64 << j) as f64).collect();
    let trajs = par::try_map_range(Execution::available(), runs, |j| {
        flow_with(&a.energy, &u0, taus[j], a.horizon, budget, &opts)
    })?;
    let study = if a.halvings > 0 {
        let reference = pde::pde_solve_with(&a.energy, &u0, a.horizon, &PdeOptions::every(taus[runs - 1], a.horizon))?;
        let mut rows: Vec<StudyRow> = Vec::with_capacity(runs);
        for (tau, traj) in taus.iter().zip(&trajs) {
            let cmp = pde::compare(traj, &reference)?;
            let observed_order = rows.last().map(|prev| (prev.final_sup_gap / cmp.final_sup()).log2());
            rows.push(StudyRow {
                tau: *tau,
                steps: traj.len(),
                max_sup_gap: cmp.max_sup(),
                final_sup_gap: cmp.final_sup(),
                max_l2_gap: cmp.max_l2(),
                observed_order,
            });
        }
        Some(rows)
    } else {
        None
    };
    let traj = &trajs[0];
    let doc = Trajectory {
        metadata: Metadata {
            spec: a.energy.to_string(),
            tau: Some(a.tau),
            n: a.grid.n,
            seed: a.grid.seed,
            scheme: "jko".into(),
            horizon: a.horizon,
            initial: a.initial.clone(),
            dt: None,
            budget: Some(BudgetRecord {
                c: traj.budget.c,
                m: traj.budget.m,
                delta: traj.budget.delta,
                exit_step: traj.budget.exit_step,
            }),
            failure: traj.failure.as_ref().map(|f| format!("step {}: {}", f.step, f.message)),
        },
        steps: jko_records(ctx, traj, dir.as_deref())?,
        study,
    };
    emit_trajectory(ctx, &doc, &a.output)?;
    for t in &trajs {
        if let Some(f) = &t.failure {
            let msg = format!("flow with tau = {} stopped at step {}: {}", t.tau, f.step, f.message);
            return Err(if f.numerical { CliError::Numerical(msg) } else { CliError::Usage(msg) });
        }
    }
    Ok(())
}

pub fn pde(ctx: &Context, a: &PdeArgs) -> CliResult<()> {
    let grid = Grid::new(a.grid.n)?;
    let dir = check_dump(a.dump_densities, &a.output)?;
    let u0 = initial::density(&a.initial, grid, a.grid.seed, 0, Positivity::Strict)?;
    let mut opts = PdeOptions::every(a.interval.unwrap_or(a.horizon / 100.0), a.horizon);
    opts.dt = match a.dt {
        DtArg::Auto => TimeStep::Auto,
        DtArg::Fixed(dt) => TimeStep::Fixed(dt),
    };
    let dt = match opts.dt {
        TimeStep::Fixed(dt) => dt,
        TimeStep::Auto => pde::auto_dt(&a.energy, &u0),
    };
    let estimate = a.horizon / dt;
    if estimate > 1e5 {
        log::warn!("about {estimate:.1e} RK4 steps of {dt:.2e}; the explicit step shrinks like n^-{}", a.energy.pde_order());
    }
    let traj = pde::pde_solve_with(&a.energy, &u0, a.horizon, &opts)?;
    let mut steps = Vec::with_capacity(traj.states.len());
    for (k, u) in traj.states.iter().enumerate() {
        let w2_increment = if k == 0 { 0.0 } else { transport::w2_distance(&traj.states[k - 1], u)? };
        steps.push(StepRecord {
            n: k,
            t: traj.times[k],
            energy: traj.energies[k],
            w2_increment,
            residual: None,
            min_density: u.min(),
            density_file: dir.as_deref().map(|d| dump_state(ctx, d, k, u)).transpose()?,
        });
    }
    let doc = Trajectory {
        metadata: Metadata {
            spec: a.energy.to_string(),
            tau: None,
            n: a.grid.n,
            seed: a.grid.seed,
            scheme: traj.scheme.to_string(),
            horizon: a.horizon,
            initial: a.initial.clone(),
            dt: Some(traj.dt),
            budget: None,
            failure: traj.failure.clone(),
        },
        steps,
        study: None,
    };
    emit_trajectory(ctx, &doc, &a.output)?;
    match traj.failure {
        Some(m) => Err(CliError::Numerical(m)),
        None => Ok(()),
    }
}

fn read_trajectory(path: &Path) -> CliResult<Trajectory> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: not a trajectory file: {e}", path.display())))
}

fn sidecar(json: &Path, rec: &StepRecord) -> Option<std::path::PathBuf> {
    rec.density_file.as_ref().map(|f| json.parent().unwrap_or(Path::new(".")).join(f))
}

pub fn compare(ctx: &Context, a: &CompareArgs) -> CliResult<()> {
    let first = read_trajectory(&a.first)?;
    let second = read_trajectory(&a.second)?;
    if first.metadata.spec != second.metadata.spec {
        log::warn!("comparing different energies: {} vs {}", first.metadata.spec, second.metadata.spec);
    }
    let tol = a.time_tolerance * first.metadata.horizon.max(second.metadata.horizon);
    let mut rows = Vec::new();
    let (mut max_e, mut max_sup, mut max_l2) = (0.0f64, None::<f64>, None::<f64>);
    let mut final_sup = None;
    for r in &first.steps {
        let Some(s) = second.steps.iter().find(|s| (s.t - r.t).abs() <= tol) else { continue };
        let energy_gap = r.energy - s.energy;
        max_e = max_e.max(energy_gap.abs());
        let (mut sup, mut l2) = (None, None);
        if let (Some(pa), Some(pb)) = (sidecar(&a.first, r), sidecar(&a.second, s)) {
            let u = read_density_csv(&pa)?;
            let mut v = read_density_csv(&pb)?;
            if v.len() != u.len() {
                v = v.resample(u.len())?;
            }
            let d: Vec<f64> = u.values().iter().zip(v.values()).map(|(x, y)| x - y).collect();
            let s_gap = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let l_gap = (d.iter().map(|x| x * x).sum::<f64>() / d.len() as f64).sqrt();
            max_sup = Some(max_sup.unwrap_or(0.0f64).max(s_gap));
            max_l2 = Some(max_l2.unwrap_or(0.0f64).max(l_gap));
            sup = Some(s_gap);
            l2 = Some(l_gap);
        }
        final_sup = sup;
        rows.push(json!({ "t": r.t, "energy_gap": energy_gap, "sup_gap": sup, "l2_gap": l2 }));
    }
    if rows.is_empty() {
        return Err(CliError::Usage("the trajectories share no record time".into()));
    }
    ctx.print(&json!({
        "first": { "path": a.first.display().to_string(), "scheme": first.metadata.scheme, "spec": first.metadata.spec },
        "second": { "path": a.second.display().to_string(), "scheme": second.metadata.scheme, "spec": second.metadata.spec },
        "matched": rows.len(),
        "max_energy_gap": max_e,
        "max_sup_gap": max_sup,
        "max_l2_gap": max_l2,
        "final_sup_gap": final_sup,
        "rows": rows,
    }))
}

pub fn certify(ctx: &Context, a: &CertifyArgs) -> CliResult<()> {
    let grid = Grid::new(a.grid.n)?;
    let center = initial::density(&a.center, grid, a.grid.seed, 0, Positivity::Strict)?;
    let opts = CertifyOptions {
        samples: a.samples,
        degree: a.degree,
        seed: a.grid.seed,
        tolerance: a.tolerance,
        ..CertifyOptions::default()
    };
    let report = convexity::certify(&a.energy, &center, a.c, a.m, a.delta, &opts)?;
    let witnesses: Vec<_> = report
        .violations
        .iter()
        .take(10)
        .map(|w| json!({ "sample": w.sample, "s": w.s, "ratio": w.ratio, "w2": w.w2 }))
        .collect();
    ctx.print(&json!({
        "energy": a.energy.to_string(),
        "lambda": report.estimate.lambda,
        "lambda_unhalved": report.estimate.lambda_unhalved,
        "floor": report.estimate.m,
        "delta": report.delta,
        "samples": report.samples,
        "sampled_min_ratio": report.sampled_min_ratio,
        "violations": report.violations.len(),
        "witnesses": witnesses,
        "regularity_violations": report.regularity_violations,
        "certified": report.certified(),
    }))
}
