//! Exact discrete optimal transport between weighted atoms on the circle,
//! used as an independent oracle for the continuous solver.
//!
//! Solved as a min-cost flow with successive shortest paths (Dijkstra with
//! potentials) on the complete bipartite graph; costs are squared circle
//! distances, capacities are the atom weights.

use crate::error::{invalid, Error, Result};
use crate::geometry::PeriodicDensity;

use super::CircleCdf;

/// Largest accepted atom count per side.
pub const MAX_ATOMS: usize = 128;

/// A weighted point mass on [0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub position: f64,
    pub weight: f64,
}

/// An optimal coupling between two atomic measures.
#[derive(Debug, Clone)]
pub struct DiscretePlan {
    pub source: Vec<Atom>,
    pub target: Vec<Atom>,
    /// gamma[i][j] >= 0 with row sums = source weights, column sums = target weights.
    pub coupling: Vec<Vec<f64>>,
    /// sum gamma_ij d(x_i, y_j)^2
    pub cost: f64,
}

/// Geodesic distance on R/Z.
pub fn circle_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Quantizes `u` into `count` atoms at the midpoints of equal cells, each
/// carrying the exact mass of its cell under the interpolated density.
pub fn atomize(u: &PeriodicDensity, count: usize) -> Result<Vec<Atom>> {
    if count == 0 {
        return Err(invalid("atom count must be positive"));
    }
    let cdf = CircleCdf::new(u)?;
    Ok((0..count)
        .map(|j| {
            let a = j as f64 / count as f64;
            let b = (j + 1) as f64 / count as f64;
            Atom { position: 0.5 * (a + b), weight: cdf.cdf(b) - cdf.cdf(a) }
        })
        .collect())
}

/// Exact optimal plan for the squared circle distance.
pub fn brute_force_plan(source: &[Atom], target: &[Atom]) -> Result<DiscretePlan> {
    let (ns, nt) = (source.len(), target.len());
    if ns == 0 || nt == 0 {
        return Err(invalid("empty atom list"));
    }
    if ns > MAX_ATOMS || nt > MAX_ATOMS {
        return Err(invalid(format!("oracle accepts at most {MAX_ATOMS} atoms per side")));
    }
    if source.iter().chain(target).any(|a| !(a.weight >= 0.0) || !a.position.is_finite()) {
        return Err(invalid("atom weights must be nonnegative and positions finite"));
    }
    let sm: f64 = source.iter().map(|a| a.weight).sum();
    let tm: f64 = target.iter().map(|a| a.weight).sum();
    if (sm - tm).abs() > 1e-9 * sm.max(tm).max(1.0) {
        return Err(Error::Marginal { source_mass: sm, target_mass: tm });
    }
    let cost: Vec<Vec<f64>> = source
        .iter()
        .map(|a| target.iter().map(|b| circle_distance(a.position, b.position).powi(2)).collect())
        .collect();
    let flow = min_cost_flow(source, target, &cost);
    let total = flow.iter().zip(&cost).map(|(fr, cr)| fr.iter().zip(cr).map(|(f, c)| f * c).sum::<f64>()).sum();
    Ok(DiscretePlan { source: source.to_vec(), target: target.to_vec(), coupling: flow, cost: total })
}

#[derive(Clone, Copy)]
enum Edge {
    None,
    FromSource(usize),
    Forward(usize, usize),
    Backward(usize, usize),
    ToSink(usize),
}

/// Successive shortest paths. Node layout: 0 = super source, 1..=ns sources,
/// ns+1..=ns+nt sinks, ns+nt+1 = super sink. Potentials keep reduced costs
/// nonnegative so Dijkstra applies; all initial costs are nonnegative.
fn min_cost_flow(source: &[Atom], target: &[Atom], cost: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (ns, nt) = (source.len(), target.len());
    let total: f64 = source.iter().map(|a| a.weight).sum();
    let eps = 1e-15 * total.max(f64::MIN_POSITIVE);
    let sink = ns + nt + 1;
    let nodes = sink + 1;
    let mut supply: Vec<f64> = source.iter().map(|a| a.weight).collect();
    let mut demand: Vec<f64> = target.iter().map(|a| a.weight).collect();
    let mut flow = vec![vec![0.0; nt]; ns];
    let mut pot = vec![0.0f64; nodes];
    let mut remaining = total;

    while remaining > eps {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut pred = vec![(0usize, Edge::None); nodes];
        let mut done = vec![false; nodes];
        dist[0] = 0.0;
        loop {
            let mut best = None;
            let mut bd = f64::INFINITY;
            for v in 0..nodes {
                if !done[v] && dist[v] < bd {
                    bd = dist[v];
                    best = Some(v);
                }
            }
            let Some(v) = best else { break };
            done[v] = true;
            if v == sink {
                break;
            }
            let mut relax = |w: usize, rc: f64, e: Edge| {
                let nd = bd + rc.max(0.0);
                if nd < dist[w] {
                    dist[w] = nd;
                    pred[w] = (v, e);
                }
            };
            if v == 0 {
                for i in 0..ns {
                    if supply[i] > eps {
                        relax(1 + i, pot[0] - pot[1 + i], Edge::FromSource(i));
                    }
                }
            } else if v <= ns {
                let i = v - 1;
                for j in 0..nt {
                    let w = ns + 1 + j;
                    relax(w, cost[i][j] + pot[v] - pot[w], Edge::Forward(i, j));
                }
            } else {
                let j = v - ns - 1;
                if demand[j] > eps {
                    relax(sink, pot[v] - pot[sink], Edge::ToSink(j));
                }
                for i in 0..ns {
                    if flow[i][j] > eps {
                        relax(1 + i, pot[v] - pot[1 + i] - cost[i][j], Edge::Backward(i, j));
                    }
                }
            }
        }
        if !done[sink] {
            break;
        }
        let mut amount = f64::INFINITY;
        let mut v = sink;
        while v != 0 {
            let (p, e) = pred[v];
            match e {
                Edge::FromSource(i) => amount = amount.min(supply[i]),
                Edge::Backward(i, j) => amount = amount.min(flow[i][j]),
                Edge::ToSink(j) => amount = amount.min(demand[j]),
                Edge::Forward(..) | Edge::None => {}
            }
            v = p;
        }
        let mut v = sink;
        while v != 0 {
            let (p, e) = pred[v];
            match e {
                Edge::FromSource(i) => supply[i] -= amount,
                Edge::Forward(i, j) => flow[i][j] += amount,
                Edge::Backward(i, j) => flow[i][j] -= amount,
                Edge::ToSink(j) => demand[j] -= amount,
                Edge::None => {}
            }
            v = p;
        }
        remaining -= amount;
        let reach = dist[sink];
        for v in 0..nodes {
            pot[v] += if done[v] { dist[v] } else { reach };
        }
    }
    flow
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atoms(pos: &[f64], w: &[f64]) -> Vec<Atom> {
        pos.iter().zip(w).map(|(&position, &weight)| Atom { position, weight }).collect()
    }

    #[test]
    fn single_pair() {
        let p = brute_force_plan(&atoms(&[0.1], &[1.0]), &atoms(&[0.5], &[1.0])).unwrap();
        assert!((p.cost - 0.16).abs() < 1e-15);
        // wraps around the circle
        let p = brute_force_plan(&atoms(&[0.05], &[1.0]), &atoms(&[0.85], &[1.0])).unwrap();
        assert!((p.cost - 0.04).abs() < 1e-15);
    }

    #[test]
    fn identical_supports_cost_nothing() {
        let pos: Vec<f64> = (0..16).map(|i| i as f64 / 16.0).collect();
        let a = atoms(&pos, &[1.0 / 16.0; 16]);
        let p = brute_force_plan(&a, &a).unwrap();
        assert!(p.cost.abs() < 1e-15);
    }

    #[test]
    fn matches_permutation_enumeration() {
        // equal weights: the optimum is a permutation (Birkhoff)
        let xs = [0.02, 0.31, 0.47, 0.66, 0.9];
        let ys = [0.12, 0.18, 0.55, 0.73, 0.97];
        let w = [0.2; 5];
        let p = brute_force_plan(&atoms(&xs, &w), &atoms(&ys, &w)).unwrap();
        let mut best = f64::INFINITY;
        let mut perm = [0usize, 1, 2, 3, 4];
        permutations(&mut perm, 0, &mut |pm| {
            let c: f64 = (0..5).map(|i| 0.2 * circle_distance(xs[i], ys[pm[i]]).powi(2)).sum();
            best = best.min(c);
        });
        assert!((p.cost - best).abs() < 1e-14, "{} vs {best}", p.cost);
    }

    fn permutations(a: &mut [usize; 5], k: usize, f: &mut impl FnMut(&[usize; 5])) {
        if k == a.len() {
            f(a);
            return;
        }
        for i in k..a.len() {
            a.swap(k, i);
            permutations(a, k + 1, f);
            a.swap(k, i);
        }
    }

    #[test]
    fn marginals_are_respected() {
        let s = atoms(&[0.1, 0.4, 0.8], &[0.5, 0.3, 0.2]);
        let t = atoms(&[0.2, 0.6], &[0.25, 0.75]);
        let p = brute_force_plan(&s, &t).unwrap();
        for (row, a) in p.coupling.iter().zip(&s) {
            assert!((row.iter().sum::<f64>() - a.weight).abs() < 1e-14);
            assert!(row.iter().all(|g| *g >= 0.0));
        }
        for (j, b) in t.iter().enumerate() {
            let col: f64 = p.coupling.iter().map(|r| r[j]).sum();
            assert!((col - b.weight).abs() < 1e-14);
        }
    }

    #[test]
    fn unequal_masses_are_rejected() {
        let r = brute_force_plan(&atoms(&[0.1], &[1.0]), &atoms(&[0.2], &[0.5]));
        assert!(matches!(r, Err(Error::Marginal { .. })));
    }
}
