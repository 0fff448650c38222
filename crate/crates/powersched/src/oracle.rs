//! Exhaustive optima on small instances: exact integral counterparts of the
//! solvers plus a continuous non-preemptive search, used to sandwich LP values
//! and rounded schedules in tests and reports.
//!
//! The scheduling oracle does not enumerate slot subsets (there are 2^N per
//! job/processor pair): since a job's energy depends only on how many slots it
//! gets, it enumerates job-to-processor assignments and, per processor,
//! computes every Pareto-maximal vector of per-job slot counts realizable by
//! pairwise-disjoint slots via a dynamic program over slot end times. Budgets
//! cap the explored state count rather than a nominal combination product.

use crate::core_types::{rat_to_f64, Rat, RoutingInstance, SchedulingInstance};
use crate::nonmigratory::{discretize_instance, Disc};
use crate::{Error, Result};
use std::collections::HashMap;
use std::time::{Duration, Instant};

#[derive(Debug, Clone)]
pub struct OracleLimits {
    /// Cap on explored search states / path combinations before refusal.
    pub max_combinations: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_combinations: 10_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub enum OracleSolution {
    /// Per job: processor and the chosen slot indices on its grid there.
    Assignment(Vec<(usize, Vec<usize>)>),
    /// Continuous single-processor witness: job order and execution intervals.
    Order {
        order: Vec<usize>,
        intervals: Vec<(f64, f64)>,
    },
    /// Per demand: edge ids of the routed path.
    Paths(Vec<Vec<usize>>),
    /// Optimum of a fractional relaxation; no integral witness.
    Fractional,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub optimum: f64,
    pub solution: OracleSolution,
    /// States or combinations actually examined.
    pub search_space: u64,
    pub elapsed: Duration,
}

fn dominates(a: &[u16], b: &[u16]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

#[derive(Debug, Clone)]
struct ProcPlan {
    energy: f64,
    /// (job, chosen slot indices), one entry per job placed on this processor.
    picks: Vec<(usize, Vec<usize>)>,
}

/// Minimum total energy of scheduling exactly `jobs` on processor `i`, over
/// all pairwise-disjoint choices of slots giving each job at least one.
///
/// DP over the merged slot boundaries: the antichain at boundary `b` holds the
/// Pareto-maximal per-job slot-count vectors achievable with slots ending at
/// or before `b`. A slot `(s, b]` extends any vector from the antichain at
/// `s`. Feasible count vectors are exactly those dominated by a final
/// antichain entry, and energy is decreasing in every count, so the optimum is
/// attained on the final antichain.
fn best_on_processor(
    instance: &SchedulingInstance,
    disc: &Disc,
    i: usize,
    jobs: &[usize],
    states: &mut u64,
    cap: u64,
) -> Result<Option<ProcPlan>> {
    let grids: Vec<_> = jobs
        .iter()
        .map(|&j| disc.grids[j][i].as_ref().expect("assigned pair is finite"))
        .collect();
    let mut boundaries: Vec<Rat> = grids.iter().flat_map(|g| g.boundaries()).collect();
    boundaries.sort();
    boundaries.dedup();
    let bidx = |t: &Rat| boundaries.binary_search(t).expect("slot boundary");

    struct Slot {
        jp: usize,
        k: usize,
        s: usize,
        e: usize,
    }
    let mut slots = Vec::new();
    for (jp, g) in grids.iter().enumerate() {
        for k in 0..g.n_slots {
            let (a, b) = g.slot(k);
            slots.push(Slot {
                jp,
                k,
                s: bidx(&a),
                e: bidx(&b),
            });
        }
    }
    let mut ends: Vec<Vec<usize>> = vec![Vec::new(); boundaries.len()];
    for (sid, s) in slots.iter().enumerate() {
        ends[s.e].push(sid);
    }

    struct Node {
        counts: Vec<u16>,
        parent: u32,
        slot: u32,
    }
    let mut arena = vec![Node {
        counts: vec![0; jobs.len()],
        parent: u32::MAX,
        slot: u32::MAX,
    }];
    let mut chain_at: Vec<Vec<u32>> = Vec::with_capacity(boundaries.len());
    chain_at.push(vec![0]);
    for b in 1..boundaries.len() {
        let mut cur = chain_at[b - 1].clone();
        for &sid in &ends[b] {
            let slot = &slots[sid];
            for &pid in &chain_at[slot.s] {
                let mut c = arena[pid as usize].counts.clone();
                c[slot.jp] += 1;
                if cur
                    .iter()
                    .any(|&q| dominates(&arena[q as usize].counts, &c))
                {
                    continue;
                }
                cur.retain(|&q| !dominates(&c, &arena[q as usize].counts));
                *states += 1;
                if *states > cap {
                    return Err(Error::OracleLimit(format!(
                        "state budget {cap} exhausted on processor {i}"
                    )));
                }
                arena.push(Node {
                    counts: c,
                    parent: pid,
                    slot: sid as u32,
                });
                cur.push((arena.len() - 1) as u32);
            }
        }
        chain_at.push(cur);
    }

    let mut best: Option<(f64, u32)> = None;
    for &q in chain_at.last().unwrap() {
        let counts = &arena[q as usize].counts;
        if counts.iter().any(|&c| c == 0) {
            continue;
        }
        let e: f64 = counts
            .iter()
            .enumerate()
            .map(|(p, &c)| disc.energy_const(instance, i, jobs[p], c as usize))
            .sum();
        if best.map_or(true, |(be, _)| e < be) {
            best = Some((e, q));
        }
    }
    let Some((energy, node)) = best else {
        return Ok(None);
    };
    let mut picks: Vec<(usize, Vec<usize>)> = jobs.iter().map(|&j| (j, Vec::new())).collect();
    let mut at = node;
    while at != 0 {
        let nd = &arena[at as usize];
        let s = &slots[nd.slot as usize];
        picks[s.jp].1.push(s.k);
        at = nd.parent;
    }
    for p in &mut picks {
        p.1.sort_unstable();
    }
    Ok(Some(ProcPlan { energy, picks }))
}

/// Exact optimum of the discretized integral scheduling problem: every job
/// runs entirely on one processor over a set of its slots, slots on the same
/// processor are pairwise disjoint.
pub fn ip_nonmigratory(
    instance: &SchedulingInstance,
    eps: &Rat,
    limits: &OracleLimits,
) -> Result<OracleResult> {
    let t0 = Instant::now();
    let disc = discretize_instance(instance, eps)?;
    let n = instance.n_jobs();
    let m = instance.n_procs();
    let choices: Vec<Vec<usize>> = (0..n)
        .map(|j| {
            (0..m)
                .filter(|&i| instance.jobs[j][i].work.is_some())
                .collect()
        })
        .collect();
    if choices.iter().any(|c| c.is_empty()) {
        return Err(Error::InvalidInstance(
            "a job has no processor with finite work".into(),
        ));
    }
    let mut n_assignments: u64 = 1;
    for c in &choices {
        n_assignments = n_assignments.saturating_mul(c.len() as u64);
    }
    if n_assignments > limits.max_combinations {
        return Err(Error::OracleLimit(format!(
            "{n_assignments} processor assignments exceed the cap {}",
            limits.max_combinations
        )));
    }

    // Per-job minimum over any single processor given the whole window:
    // a lower bound for pruning partial assignments.
    let solo: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            (0..m)
                .map(|i| {
                    if instance.jobs[j][i].work.is_some() {
                        disc.energy_const(instance, i, j, disc.n_slots)
                    } else {
                        f64::INFINITY
                    }
                })
                .collect()
        })
        .collect();
    let solo_best: Vec<f64> = solo
        .iter()
        .map(|row| row.iter().cloned().fold(f64::INFINITY, f64::min))
        .collect();
    let tail_bound: Vec<f64> = {
        let mut acc = vec![0.0; n + 1];
        for j in (0..n).rev() {
            acc[j] = acc[j + 1] + solo_best[j];
        }
        acc
    };

    let mut memo: HashMap<(usize, Vec<usize>), Option<ProcPlan>> = HashMap::new();
    let mut states: u64 = 0;
    let cap = limits.max_combinations;
    let mut best: Option<(f64, Vec<(usize, Vec<usize>)>)> = None;
    let mut assign = vec![0usize; n];

    // Depth-first over job-to-processor assignments with the solo lower bound.
    fn descend(
        j: usize,
        assign: &mut Vec<usize>,
        prefix_solo: f64,
        instance: &SchedulingInstance,
        disc: &Disc,
        choices: &[Vec<usize>],
        solo: &[Vec<f64>],
        tail_bound: &[f64],
        memo: &mut HashMap<(usize, Vec<usize>), Option<ProcPlan>>,
        states: &mut u64,
        cap: u64,
        best: &mut Option<(f64, Vec<(usize, Vec<usize>)>)>,
    ) -> Result<()> {
        let n = assign.len();
        if let Some((be, _)) = best {
            if prefix_solo + tail_bound[j] >= *be {
                return Ok(());
            }
        }
        if j == n {
            let m = instance.n_procs();
            let mut per_proc: Vec<Vec<usize>> = vec![Vec::new(); m];
            for (job, &i) in assign.iter().enumerate() {
                per_proc[i].push(job);
            }
            let mut total = 0.0;
            let mut picks: Vec<(usize, Vec<usize>)> = vec![(usize::MAX, Vec::new()); n];
            for (i, jobs) in per_proc.iter().enumerate() {
                if jobs.is_empty() {
                    continue;
                }
                let key = (i, jobs.clone());
                if !memo.contains_key(&key) {
                    let plan = best_on_processor(instance, disc, i, jobs, states, cap)?;
                    memo.insert(key.clone(), plan);
                }
                match memo.get(&key).unwrap() {
                    None => return Ok(()),
                    Some(plan) => {
                        total += plan.energy;
                        for (job, slots) in &plan.picks {
                            picks[*job] = (i, slots.clone());
                        }
                    }
                }
            }
            if best.as_ref().map_or(true, |(be, _)| total < *be) {
                *best = Some((total, picks));
            }
            return Ok(());
        }
        for &i in &choices[j] {
            assign[j] = i;
            descend(
                j + 1,
                assign,
                prefix_solo + solo[j][i],
                instance,
                disc,
                choices,
                solo,
                tail_bound,
                memo,
                states,
                cap,
                best,
            )?;
        }
        Ok(())
    }

    descend(
        0,
        &mut assign,
        0.0,
        instance,
        &disc,
        &choices,
        &solo,
        &tail_bound,
        &mut memo,
        &mut states,
        cap,
        &mut best,
    )?;

    let (optimum, picks) = best.ok_or_else(|| {
        Error::Infeasible("no disjoint slot assignment schedules every job".into())
    })?;
    Ok(OracleResult {
        optimum,
        solution: OracleSolution::Assignment(picks),
        search_space: states + n_assignments,
        elapsed: t0.elapsed(),
    })
}

/// Exact optimum of integral routing: one simple path per demand, energy
/// `sum_e cost_e * (bandwidth * uses_e)^alpha_e`.
pub fn ip_routing(instance: &RoutingInstance, limits: &OracleLimits) -> Result<OracleResult> {
    let t0 = Instant::now();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); instance.nodes];
    for (eid, e) in instance.edges.iter().enumerate() {
        adj[e.tail].push(eid);
    }
    let mut all_paths: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut total_paths: u64 = 0;
    for &(s, t) in &instance.demands {
        let mut paths = Vec::new();
        let mut visited = vec![false; instance.nodes];
        let mut trail = Vec::new();
        visited[s] = true;
        dfs_paths(
            s,
            t,
            &adj,
            instance,
            &mut visited,
            &mut trail,
            &mut paths,
            &mut total_paths,
            limits.max_combinations,
        )?;
        if paths.is_empty() {
            return Err(Error::Infeasible(format!("demand ({s}, {t}) has no path")));
        }
        all_paths.push(paths);
    }
    let mut space: u64 = 1;
    for p in &all_paths {
        space = space.saturating_mul(p.len() as u64);
    }
    if space > limits.max_combinations {
        return Err(Error::OracleLimit(format!(
            "{space} path combinations exceed the cap {}",
            limits.max_combinations
        )));
    }

    let d = instance.bandwidth as f64;
    let edge_energy = |eid: usize, uses: u32| -> f64 {
        if uses == 0 {
            0.0
        } else {
            let e = &instance.edges[eid];
            e.cost * (d * uses as f64).powf(e.alpha)
        }
    };
    let mut loads = vec![0u32; instance.edges.len()];
    let mut pick = vec![0usize; instance.demands.len()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    // Energy only grows as demands are added, so a partial sum prunes.
    fn place(
        k: usize,
        energy: f64,
        all_paths: &[Vec<Vec<usize>>],
        edge_energy: &dyn Fn(usize, u32) -> f64,
        loads: &mut Vec<u32>,
        pick: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if let Some((be, _)) = best {
            if energy >= *be {
                return;
            }
        }
        if k == all_paths.len() {
            *best = Some((energy, pick.clone()));
            return;
        }
        for (pi, path) in all_paths[k].iter().enumerate() {
            let mut e = energy;
            for &eid in path {
                e += edge_energy(eid, loads[eid] + 1) - edge_energy(eid, loads[eid]);
                loads[eid] += 1;
            }
            pick[k] = pi;
            place(k + 1, e, all_paths, edge_energy, loads, pick, best);
            for &eid in path {
                loads[eid] -= 1;
            }
        }
    }
    place(
        0,
        0.0,
        &all_paths,
        &edge_energy,
        &mut loads,
        &mut pick,
        &mut best,
    );
    let (optimum, pick) = best.expect("every demand has a path");
    let routed = pick
        .iter()
        .enumerate()
        .map(|(k, &pi)| all_paths[k][pi].clone())
        .collect();
    Ok(OracleResult {
        optimum,
        solution: OracleSolution::Paths(routed),
        search_space: space,
        elapsed: t0.elapsed(),
    })
}

#[allow(clippy::too_many_arguments)]
fn dfs_paths(
    u: usize,
    t: usize,
    adj: &[Vec<usize>],
    instance: &RoutingInstance,
    visited: &mut Vec<bool>,
    trail: &mut Vec<usize>,
    paths: &mut Vec<Vec<usize>>,
    total: &mut u64,
    cap: u64,
) -> Result<()> {
    if u == t {
        *total += 1;
        if *total > cap {
            return Err(Error::OracleLimit(format!(
                "more than {cap} simple paths enumerated"
            )));
        }
        paths.push(trail.clone());
        return Ok(());
    }
    for &eid in &adj[u] {
        let v = instance.edges[eid].head;
        if visited[v] {
            continue;
        }
        visited[v] = true;
        trail.push(eid);
        dfs_paths(v, t, adj, instance, visited, trail, paths, total, cap)?;
        trail.pop();
        visited[v] = false;
    }
    Ok(())
}

/// Optimum of the migratory LP with every configuration column materialized.
/// The migratory problem is solved fractionally, so this full enumeration is
/// the exact target for the column-generation solver on the same speed grid.
pub fn ip_migratory(
    instance: &SchedulingInstance,
    delta: f64,
    limits: &OracleLimits,
) -> Result<OracleResult> {
    use crate::discretize::{speed_grid, WindowPolicy};
    use crate::lp::{self, LinearProgram, LpStatus, Relation};
    use crate::migratory;

    let t0 = Instant::now();
    let grid = speed_grid(instance, delta, WindowPolicy::FiniteWorkOnly)?;
    let configs =
        migratory::enumerate_configurations(instance, &grid, limits.max_combinations)?;
    let ivls = migratory::intervals(instance)?;
    let mut lp = LinearProgram::new();
    let ivl_rows: Vec<usize> = ivls
        .iter()
        .enumerate()
        .map(|(k, (a, b))| {
            lp.add_row(Relation::Le, rat_to_f64(&(b - a)), format!("ivl{k}"))
        })
        .collect();
    let job_rows: Vec<usize> = (0..instance.n_jobs())
        .map(|j| lp.add_row(Relation::Ge, 1.0, format!("job{j}")))
        .collect();
    for (c, cfg) in configs.iter().enumerate() {
        let mut entries = vec![(ivl_rows[cfg.interval], 1.0)];
        for (j, rate) in cfg.rates(instance) {
            entries.push((job_rows[j], rate));
        }
        lp.add_col(cfg.power(instance), entries, format!("c{c}"));
    }
    let sol = lp::solve(&lp, lp::DEFAULT_TOL)?;
    match sol.status {
        LpStatus::Optimal => Ok(OracleResult {
            optimum: sol.objective,
            solution: OracleSolution::Fractional,
            search_space: configs.len() as u64,
            elapsed: t0.elapsed(),
        }),
        LpStatus::Infeasible => Err(Error::Infeasible(
            "no grid-speed schedule completes every job".into(),
        )),
        other => Err(Error::Lp(format!("enumerated LP solve failed: {other:?}"))),
    }
}

/// Golden-section minimum of a unimodal (convex, possibly partially infinite)
/// function on `[lo, hi]`: a coarse scan brackets the minimum, golden-section
/// refines it to `tol`.
fn line_min(f: &mut dyn FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    const SCAN: usize = 64;
    let mut bx = lo;
    let mut bf = f64::INFINITY;
    for k in 0..=SCAN {
        let x = lo + (hi - lo) * k as f64 / SCAN as f64;
        let v = f(x);
        if v < bf {
            bf = v;
            bx = x;
        }
    }
    if !bf.is_finite() {
        return (bx, bf);
    }
    let step = (hi - lo) / SCAN as f64;
    let (mut a, mut b) = ((bx - step).max(lo), (bx + step).min(hi));
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    let xm = 0.5 * (a + b);
    (xm, f(xm))
}

const CONTINUOUS_TOL: f64 = 1e-7;

/// Continuous-time non-preemptive optimum on a single processor for up to
/// three jobs: enumerate job orders; per order, jobs occupy their windows up
/// to order cut points, optimized by nested one-dimensional convex search.
pub fn continuous_single_processor(instance: &SchedulingInstance) -> Result<OracleResult> {
    let t0 = Instant::now();
    if instance.n_procs() != 1 {
        return Err(Error::Domain(
            "continuous oracle handles exactly one processor".into(),
        ));
    }
    let n = instance.n_jobs();
    if n == 0 || n > 3 {
        return Err(Error::Domain(format!(
            "continuous oracle handles 1 to 3 jobs, got {n}"
        )));
    }
    let alpha = instance.processors[0].alpha;
    let mut r = Vec::new();
    let mut d = Vec::new();
    let mut w = Vec::new();
    for j in 0..n {
        let jp = &instance.jobs[j][0];
        let work = jp
            .work
            .as_ref()
            .ok_or_else(|| Error::InvalidInstance(format!("job {j} cannot run here")))?;
        r.push(rat_to_f64(&jp.release));
        d.push(rat_to_f64(&jp.deadline));
        w.push(rat_to_f64(work));
    }
    let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    // Execution intervals for a given order and cut points: job k runs in its
    // window clipped to (cuts[k-1], cuts[k]]. Any non-preemptive schedule is
    // dominated by some cut choice, so this parametrization is exact.
    let spans = |order: &[usize], cuts: &[f64]| -> Vec<(f64, f64)> {
        order
            .iter()
            .enumerate()
            .map(|(k, &j)| {
                let a = if k == 0 { r[j] } else { r[j].max(cuts[k - 1]) };
                let b = if k + 1 == order.len() {
                    d[j]
                } else {
                    d[j].min(cuts[k])
                };
                (a, b)
            })
            .collect()
    };
    let energy = |order: &[usize], cuts: &[f64]| -> f64 {
        spans(order, cuts)
            .iter()
            .zip(order)
            .map(|(&(a, b), &j)| {
                let len = b - a;
                if len <= 1e-12 {
                    f64::INFINITY
                } else {
                    w[j].powf(alpha) / len.powf(alpha - 1.0)
                }
            })
            .sum()
    };

    let mut orders = vec![vec![0]];
    if n >= 2 {
        orders = permutations(n);
    }
    let n_orders = orders.len() as u64;
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    for order in orders {
        let (val, cuts) = match n {
            1 => (energy(&order, &[]), Vec::new()),
            2 => {
                let (c, v) = line_min(&mut |c| energy(&order, &[c]), lo, hi, CONTINUOUS_TOL);
                (v, vec![c])
            }
            _ => {
                let inner =
                    |c1: f64| line_min(&mut |c2| energy(&order, &[c1, c2]), c1, hi, CONTINUOUS_TOL);
                let (c1, _) = line_min(&mut |c1| inner(c1).1, lo, hi, CONTINUOUS_TOL);
                let (c2, v) = inner(c1);
                (v, vec![c1, c2])
            }
        };
        if val.is_finite() && best.as_ref().map_or(true, |(bv, _, _)| val < *bv) {
            best = Some((val, order, cuts));
        }
    }
    let (optimum, order, cuts) =
        best.ok_or_else(|| Error::Infeasible("no job order admits a schedule".into()))?;
    let intervals = spans(&order, &cuts);
    Ok(OracleResult {
        optimum,
        solution: OracleSolution::Order { order, intervals },
        search_space: n_orders,
        elapsed: t0.elapsed(),
    })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    let mut used = vec![false; n];
    fn rec(n: usize, cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                rec(n, cur, used, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    rec(n, &mut cur, &mut used, &mut out);
    out
}
