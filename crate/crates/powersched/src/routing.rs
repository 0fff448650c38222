//! Min-power routing with uniform demands: a convex relaxation solved by
//! cutting planes on an epigraph LP, flow decomposition into path
//! distributions, and randomized path rounding.

use crate::core_types::RoutingInstance;
use crate::lp::{self, LinearProgram, LpStatus, Relation};
use crate::rng::StreamRng;
use crate::{Error, Result};
use rayon::prelude::*;

pub const MAX_CUT_ROUNDS: usize = 500;

/// Fractional optimum of the flow program with objective
/// `sum_e c_e d^a max{x_e, x_e^a}`.
#[derive(Debug, Clone)]
pub struct RelaxationSolution {
    /// Total flow per edge.
    pub x: Vec<f64>,
    /// Per demand, per edge flow in [0, 1].
    pub y: Vec<Vec<f64>>,
    /// Exact convex objective at `x`.
    pub objective: f64,
    /// Number of cutting-plane rounds used.
    pub rounds: usize,
    /// Worst per-edge epigraph violation per round (non-increasing).
    pub violations: Vec<f64>,
}

fn edge_energy_coef(instance: &RoutingInstance, e: usize) -> f64 {
    instance.edges[e].cost * (instance.bandwidth as f64).powf(instance.edges[e].alpha)
}

fn convex_objective(instance: &RoutingInstance, x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(e, &v)| {
            edge_energy_coef(instance, e) * v.max(v.powf(instance.edges[e].alpha))
        })
        .sum()
}

fn build_lp(
    instance: &RoutingInstance,
    cuts: &[Vec<f64>],
) -> (LinearProgram, Vec<Vec<usize>>, Vec<usize>, Vec<usize>) {
    let n_e = instance.edges.len();
    let n_d = instance.demands.len();
    let mut lp = LinearProgram::new();

    // Rows first: x consistency, flow conservation, u >= x, tangent cuts.
    let cons_rows: Vec<usize> = (0..n_e)
        .map(|e| lp.add_row(Relation::Eq, 0.0, format!("x{e}")))
        .collect();
    let mut flow_rows: Vec<Vec<Option<usize>>> = vec![vec![None; instance.nodes]; n_d];
    for (i, &(s, t)) in instance.demands.iter().enumerate() {
        for u in 0..instance.nodes {
            let row = if u == s {
                lp.add_row(Relation::Eq, 1.0, format!("src_d{i}"))
            } else if u == t {
                lp.add_row(Relation::Eq, -1.0, format!("dst_d{i}"))
            } else {
                lp.add_row(Relation::Eq, 0.0, format!("flow_d{i}_u{u}"))
            };
            flow_rows[i][u] = Some(row);
        }
    }
    let epi_rows: Vec<usize> = (0..n_e)
        .map(|e| lp.add_row(Relation::Ge, 0.0, format!("epi{e}")))
        .collect();
    let cut_rows: Vec<Vec<(usize, f64)>> = (0..n_e)
        .map(|e| {
            cuts[e]
                .iter()
                .enumerate()
                .map(|(k, &xbar)| {
                    let alpha = instance.edges[e].alpha;
                    let rhs = -(alpha - 1.0) * xbar.powf(alpha);
                    (lp.add_row(Relation::Ge, rhs, format!("cut{e}_{k}")), xbar)
                })
                .collect()
        })
        .collect();

    // Columns: y_{i,e}, then x_e, then u_e.
    let y_cols: Vec<Vec<usize>> = (0..n_d)
        .map(|i| {
            (0..n_e)
                .map(|e| {
                    let edge = &instance.edges[e];
                    let mut entries = vec![(cons_rows[e], -1.0)];
                    if let Some(r) = flow_rows[i][edge.tail] {
                        entries.push((r, 1.0));
                    }
                    if let Some(r) = flow_rows[i][edge.head] {
                        entries.push((r, -1.0));
                    }
                    let c = lp.add_col(0.0, entries, format!("y_d{i}_e{e}"));
                    lp.set_bounds(c, 0.0, Some(1.0));
                    c
                })
                .collect()
        })
        .collect();
    let x_cols: Vec<usize> = (0..n_e)
        .map(|e| {
            let alpha = instance.edges[e].alpha;
            let mut entries = vec![(cons_rows[e], 1.0), (epi_rows[e], -1.0)];
            for &(row, xbar) in &cut_rows[e] {
                entries.push((row, -alpha * xbar.powf(alpha - 1.0)));
            }
            let c = lp.add_col(0.0, entries, format!("xe{e}"));
            lp.set_bounds(c, 0.0, Some(instance.demands.len() as f64));
            c
        })
        .collect();
    let u_cols: Vec<usize> = (0..n_e)
        .map(|e| {
            let mut entries = vec![(epi_rows[e], 1.0)];
            for &(row, _) in &cut_rows[e] {
                entries.push((row, 1.0));
            }
            lp.add_col(edge_energy_coef(instance, e), entries, format!("u{e}"))
        })
        .collect();
    (lp, y_cols, x_cols, u_cols)
}

/// Cutting-plane solve of the relaxation: the epigraph variable `u_e` is
/// pushed up by `u >= x` and by tangents of `x^a` added at each incumbent
/// until the worst violation drops below `tol`.
pub fn solve_relaxation(instance: &RoutingInstance, tol: f64) -> Result<RelaxationSolution> {
    let n_e = instance.edges.len();
    let mut cuts: Vec<Vec<f64>> = vec![Vec::new(); n_e];
    let mut violations = Vec::new();
    loop {
        let (lp, y_cols, x_cols, u_cols) = build_lp(instance, &cuts);
        let sol = lp::solve(&lp, tol)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Infeasible(format!(
                "routing relaxation ended {:?}; some demand has no path",
                sol.status
            )));
        }
        let x: Vec<f64> = x_cols.iter().map(|&c| sol.primal[c]).collect();
        let worst = (0..n_e)
            .map(|e| {
                let alpha = instance.edges[e].alpha;
                (x[e].max(x[e].powf(alpha)) - sol.primal[u_cols[e]]).max(0.0)
            })
            .fold(0.0, f64::max);
        violations.push(worst);
        if worst < tol || violations.len() >= MAX_CUT_ROUNDS {
            let y = y_cols
                .iter()
                .map(|cols| cols.iter().map(|&c| sol.primal[c]).collect())
                .collect();
            return Ok(RelaxationSolution {
                objective: convex_objective(instance, &x),
                x,
                y,
                rounds: violations.len(),
                violations,
            });
        }
        for e in 0..n_e {
            let alpha = instance.edges[e].alpha;
            if x[e].max(x[e].powf(alpha)) - sol.primal[u_cols[e]] >= tol {
                cuts[e].push(x[e].max(1e-9));
            }
        }
    }
}

/// Per-demand path lottery extracted from a fractional flow.
#[derive(Debug, Clone)]
pub struct PathDistribution {
    /// Per demand: (edge-id path, probability), probabilities summing to one.
    pub per_demand: Vec<Vec<(Vec<usize>, f64)>>,
    /// Residual flow that could not be decomposed into s-t paths (cycles).
    pub warnings: Vec<String>,
}

const FLOW_EPS: f64 = 1e-7;

/// First s->t path in the positive-flow subgraph, trying edges in id order.
fn find_path(
    instance: &RoutingInstance,
    out_edges: &[Vec<usize>],
    y: &[f64],
    s: usize,
    t: usize,
) -> Option<Vec<usize>> {
    let mut visited = vec![false; instance.nodes];
    let mut stack: Vec<(usize, Vec<usize>)> = vec![(s, Vec::new())];
    visited[s] = true;
    while let Some((u, path)) = stack.pop() {
        if u == t {
            return Some(path);
        }
        // Reverse order so the smallest edge id is explored first.
        for &e in out_edges[u].iter().rev() {
            let v = instance.edges[e].head;
            if y[e] > FLOW_EPS && !visited[v] {
                visited[v] = true;
                let mut p = path.clone();
                p.push(e);
                stack.push((v, p));
            }
        }
    }
    None
}

pub fn flow_decompose(
    instance: &RoutingInstance,
    relax: &RelaxationSolution,
) -> Result<PathDistribution> {
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); instance.nodes];
    for (e, edge) in instance.edges.iter().enumerate() {
        out_edges[edge.tail].push(e);
    }
    let mut per_demand = Vec::with_capacity(instance.demands.len());
    let mut warnings = Vec::new();
    for (i, &(s, t)) in instance.demands.iter().enumerate() {
        let mut y = relax.y[i].clone();
        let mut paths: Vec<(Vec<usize>, f64)> = Vec::new();
        let mut routed = 0.0;
        while routed < 1.0 - FLOW_EPS {
            let Some(path) = find_path(instance, &out_edges, &y, s, t) else {
                break;
            };
            let z = path
                .iter()
                .map(|&e| y[e])
                .fold(f64::INFINITY, f64::min)
                .min(1.0 - routed);
            for &e in &path {
                y[e] -= z;
            }
            routed += z;
            paths.push((path, z));
        }
        if paths.is_empty() {
            return Err(Error::Infeasible(format!(
                "demand {i}: no flow-carrying path from {s} to {t}"
            )));
        }
        let leftover: f64 = y.iter().sum();
        if routed < 1.0 - 1e-6 {
            return Err(Error::Infeasible(format!(
                "demand {i}: only {routed} of the flow decomposes into paths"
            )));
        }
        if leftover > 1e-6 {
            warnings.push(format!(
                "demand {i}: discarded {leftover:.2e} units of cycle flow"
            ));
        }
        let total: f64 = paths.iter().map(|(_, z)| z).sum();
        for (_, z) in paths.iter_mut() {
            *z /= total;
        }
        per_demand.push(paths);
    }
    Ok(PathDistribution {
        per_demand,
        warnings,
    })
}

/// One categorical draw per demand; deterministic per (seed, trial).
pub fn round_paths(dist: &PathDistribution, seed: u64, trial: u64) -> Vec<Vec<usize>> {
    dist.per_demand
        .iter()
        .enumerate()
        .map(|(i, paths)| {
            let mut rng = StreamRng::new(seed, (trial << 32) | i as u64);
            let weights: Vec<f64> = paths.iter().map(|(_, z)| *z).collect();
            paths[rng.categorical(&weights)].0.clone()
        })
        .collect()
}

/// Exact integral energy `sum_e c_e (d * n_e)^{a_e}` of one realization.
pub fn paths_energy(instance: &RoutingInstance, paths: &[Vec<usize>]) -> f64 {
    let mut uses = vec![0u64; instance.edges.len()];
    for path in paths {
        for &e in path {
            uses[e] += 1;
        }
    }
    uses.iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(e, &n)| {
            instance.edges[e].cost
                * ((instance.bandwidth * n) as f64).powf(instance.edges[e].alpha)
        })
        .sum()
}

/// Per-edge rounding diagnostics mirroring the edge-wise analysis: the
/// empirical mean energy should stay below `bell(alpha_e) * c d^a
/// max{lambda, lambda^a}`.
#[derive(Debug, Clone)]
pub struct EdgeDiag {
    pub lambda: f64,
    pub x: f64,
    pub mean_energy: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct RoutingReport {
    pub relaxation_value: f64,
    pub trial_energies: Vec<f64>,
    pub mean_energy: f64,
    pub best_energy: f64,
    pub best_trial: usize,
    pub bell_alpha_max: f64,
    pub per_edge: Vec<EdgeDiag>,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub struct RoutingOutcome {
    pub relaxation: RelaxationSolution,
    pub distribution: PathDistribution,
    /// Paths of the cheapest trial, one edge-id sequence per demand.
    pub paths: Vec<Vec<usize>>,
    pub report: RoutingReport,
}

pub fn solve_and_round_routing(
    instance: &RoutingInstance,
    seed: u64,
    trials: usize,
    tol: f64,
) -> Result<RoutingOutcome> {
    assert!(trials > 0);
    let relaxation = solve_relaxation(instance, tol)?;
    let distribution = flow_decompose(instance, &relaxation)?;

    let n_e = instance.edges.len();
    let per_trial: Vec<(f64, Vec<u64>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let paths = round_paths(&distribution, seed, t as u64);
            let mut uses = vec![0u64; n_e];
            for path in &paths {
                for &e in path {
                    uses[e] += 1;
                }
            }
            (paths_energy(instance, &paths), uses)
        })
        .collect();

    let trial_energies: Vec<f64> = per_trial.iter().map(|(e, _)| *e).collect();
    let mean_energy = trial_energies.iter().sum::<f64>() / trials as f64;
    let (best_trial, &best_energy) = trial_energies
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .unwrap();
    let paths = round_paths(&distribution, seed, best_trial as u64);

    let per_edge = (0..n_e)
        .map(|e| {
            let edge = &instance.edges[e];
            let lambda: f64 = (0..instance.demands.len())
                .map(|i| relaxation.y[i][e])
                .sum();
            let coef = edge_energy_coef(instance, e);
            let mean = per_trial
                .iter()
                .map(|(_, uses)| coef * (uses[e] as f64).powf(edge.alpha))
                .sum::<f64>()
                / trials as f64;
            let bell = crate::probability::generalized_bell(edge.alpha, 1e-12)
                .expect("alpha validated");
            EdgeDiag {
                lambda,
                x: relaxation.x[e],
                mean_energy: mean,
                bound: bell * coef * lambda.max(lambda.powf(edge.alpha)),
            }
        })
        .collect();

    let alpha_max = instance
        .edges
        .iter()
        .map(|e| e.alpha)
        .fold(1.0, f64::max);
    let bell_alpha_max = crate::probability::generalized_bell(alpha_max, 1e-12)?;

    Ok(RoutingOutcome {
        report: RoutingReport {
            relaxation_value: relaxation.objective,
            mean_energy,
            best_energy,
            best_trial,
            bell_alpha_max,
            per_edge,
            warnings: distribution.warnings.clone(),
            trial_energies,
        },
        relaxation,
        distribution,
        paths,
    })
}
