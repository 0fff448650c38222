//! Preemptive job shop scheduling: configuration LP over per-job schedules
//! (one candidate window plus a slot set per operation), solved by column
//! generation with a dynamic-programming pricer, then randomized rounding.
//!
//! The pricer threads precedence through candidate completion times: a step
//! function maps "all operations so far finish by time t" to the cheapest
//! contribution, and each operation extends it window by window. For a fixed
//! window, start boundary, and end boundary, the best slot set of size q is
//! always the q slots with the smallest capacity-dual charges, so only the
//! count has to be searched.

use crate::core_types::{rat_to_f64, JobShopInstance, Rat};
use crate::discretize::{jobshop_grids, JobShopGrids, DEFAULT_MAX_WINDOWS_PER_OP};
use crate::lp::{self, Column, LinearProgram, LpStatus, Relation};
use crate::oracle::{OracleLimits, OracleResult, OracleSolution};
use crate::rng::StreamRng;
use crate::{Error, Result};
use num_traits::Zero;
use rayon::prelude::*;
use std::collections::HashMap;
use std::time::Instant;

const MAX_CG_ITERS: usize = 500;

/// Brings a chain's releases and deadlines to the non-decreasing form the
/// solver assumes; returns the normalized instance and the operations that
/// actually changed.
pub fn normalize_chains(instance: &JobShopInstance) -> (JobShopInstance, Vec<(usize, usize)>) {
    let mut out = instance.clone();
    let mut changed = Vec::new();
    for (j, chain) in out.jobs.iter_mut().enumerate() {
        for k in 1..chain.len() {
            if chain[k].release < chain[k - 1].release {
                chain[k].release = chain[k - 1].release.clone();
                changed.push((j, k));
            }
        }
        for k in (0..chain.len().saturating_sub(1)).rev() {
            if chain[k].deadline > chain[k + 1].deadline {
                chain[k].deadline = chain[k + 1].deadline.clone();
                if !changed.contains(&(j, k)) {
                    changed.push((j, k));
                }
            }
        }
    }
    (out, changed)
}

/// One operation's part of a configuration: a candidate window and the chosen
/// slots of its inner grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OpChoice {
    pub window: usize,
    /// Inner-grid slot indices, sorted.
    pub slots: Vec<usize>,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobShopConfiguration {
    pub job: usize,
    pub ops: Vec<OpChoice>,
}

/// Shared precomputation: per (job, op, window) the energy-by-count table and
/// per slot the atom ids it covers on the operation's processor.
pub struct JobShopCtx<'a> {
    pub instance: &'a JobShopInstance,
    pub grids: JobShopGrids,
    energy: Vec<Vec<Vec<Vec<f64>>>>,          // [j][k][w][q-1]
    slot_atoms: Vec<Vec<Vec<Vec<Vec<usize>>>>>, // [j][k][w][t] -> atom ids
}

impl JobShopCtx<'_> {
    /// Energy of running operation `(j, k)` inside window `w` on `q` slots.
    pub fn op_energy(&self, j: usize, k: usize, w: usize, q: usize) -> f64 {
        self.energy[j][k][w][q - 1]
    }

    /// Atom ids (on the operation's processor) covered by slot `t` of window
    /// `w` of operation `(j, k)`.
    pub fn atoms_of_slot(&self, j: usize, k: usize, w: usize, t: usize) -> &[usize] {
        &self.slot_atoms[j][k][w][t]
    }
}

pub fn build_ctx<'a>(
    instance: &'a JobShopInstance,
    epsilon: &Rat,
    max_windows_per_op: usize,
) -> Result<JobShopCtx<'a>> {
    let grids = jobshop_grids(instance, epsilon, max_windows_per_op)?;
    let mut energy = Vec::with_capacity(instance.jobs.len());
    let mut slot_atoms = Vec::with_capacity(instance.jobs.len());
    for (j, chain) in instance.jobs.iter().enumerate() {
        let mut e_chain = Vec::with_capacity(chain.len());
        let mut a_chain = Vec::with_capacity(chain.len());
        for (k, op) in chain.iter().enumerate() {
            let alpha = instance.processors[op.processor].alpha;
            let w = rat_to_f64(&op.work);
            let aset = &grids.atoms[op.processor];
            let mut e_op = Vec::new();
            let mut a_op = Vec::new();
            for cw in &grids.windows[j][k] {
                let n = cw.grid.n_slots;
                let slot_len = rat_to_f64(&cw.grid.slot_len);
                e_op.push(
                    (1..=n)
                        .map(|q| w.powf(alpha) / (q as f64 * slot_len).powf(alpha - 1.0))
                        .collect::<Vec<f64>>(),
                );
                a_op.push(
                    (0..n)
                        .map(|t| {
                            let (a, b) = cw.grid.slot(t);
                            aset.atoms_covering(&a, &b)
                                .expect("window slots align with merged atoms")
                                .collect()
                        })
                        .collect::<Vec<Vec<usize>>>(),
                );
            }
            e_chain.push(e_op);
            a_chain.push(a_op);
        }
        energy.push(e_chain);
        slot_atoms.push(a_chain);
    }
    Ok(JobShopCtx {
        instance,
        grids,
        energy,
        slot_atoms,
    })
}

struct Node {
    op: usize,
    window: usize,
    a: usize,
    b: usize,
    q: usize,
    parent: usize,
}

const ROOT: usize = usize::MAX;

/// Minimum of `E_{j,c} + sum of kappa over covered atoms` over all feasible
/// configurations of job `j`, with the witness. `kappa[i][atom] >= 0`.
pub fn best_configuration(
    ctx: &JobShopCtx,
    j: usize,
    kappa: &[Vec<f64>],
) -> Option<(f64, JobShopConfiguration)> {
    let chain = &ctx.instance.jobs[j];
    let mut arena: Vec<Node> = Vec::new();
    // Step function: (completion time, value, arena node), strictly increasing
    // time, strictly decreasing value; None time means "no predecessor yet".
    let mut steps: Vec<(Option<Rat>, f64, usize)> = vec![(None, 0.0, ROOT)];
    for (k, op) in chain.iter().enumerate() {
        let mut cands: Vec<(Rat, f64, usize)> = Vec::new();
        for (w, cw) in ctx.grids.windows[j][k].iter().enumerate() {
            let boundaries = cw.grid.boundaries();
            let n = cw.grid.n_slots;
            let charges: Vec<f64> = (0..n)
                .map(|t| {
                    ctx.slot_atoms[j][k][w][t]
                        .iter()
                        .map(|&a| kappa[op.processor][a])
                        .sum()
                })
                .collect();
            // Map each step to the first usable start boundary; keep the best
            // (= last, values decrease) step per distinct start index.
            let mut starts: Vec<(usize, f64, usize)> = Vec::new();
            for (time, val, node) in &steps {
                let a = match time {
                    None => 0,
                    Some(t) => boundaries.partition_point(|x| x < t),
                };
                if a >= n {
                    continue;
                }
                match starts.last_mut() {
                    Some(last) if last.0 == a => *last = (a, *val, *node),
                    _ => starts.push((a, *val, *node)),
                }
            }
            let energy = &ctx.energy[j][k][w];
            for &(a, base, node) in &starts {
                let mut sorted: Vec<f64> = Vec::with_capacity(n - a);
                let mut prefix: Vec<f64> = vec![0.0];
                for b in a + 1..=n {
                    let c = charges[b - 1];
                    let pos = sorted.partition_point(|x| *x <= c);
                    sorted.insert(pos, c);
                    prefix.push(0.0);
                    for q in pos + 1..=sorted.len() {
                        prefix[q] = prefix[q - 1] + sorted[q - 1];
                    }
                    let mut best = f64::INFINITY;
                    let mut best_q = 0;
                    for q in 1..=b - a {
                        let v = energy[q - 1] + prefix[q];
                        if v < best {
                            best = v;
                            best_q = q;
                        }
                    }
                    arena.push(Node {
                        op: k,
                        window: w,
                        a,
                        b,
                        q: best_q,
                        parent: node,
                    });
                    cands.push((boundaries[b].clone(), base + best, arena.len() - 1));
                }
            }
        }
        cands.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
        steps.clear();
        let mut floor = f64::INFINITY;
        for (time, val, node) in cands {
            if val < floor {
                floor = val;
                steps.push((Some(time), val, node));
            }
        }
        if steps.is_empty() {
            return None;
        }
    }
    let &(_, value, mut node) = steps.last().unwrap();
    let mut ops_rev: Vec<OpChoice> = Vec::with_capacity(chain.len());
    while node != ROOT {
        let nd = &arena[node];
        let (k, w) = (nd.op, nd.window);
        let charges: Vec<f64> = (nd.a..nd.b)
            .map(|t| {
                ctx.slot_atoms[j][k][w][t]
                    .iter()
                    .map(|&a| kappa[chain[k].processor][a])
                    .sum()
            })
            .collect();
        let mut order: Vec<usize> = (0..nd.b - nd.a).collect();
        order.sort_by(|&x, &y| charges[x].total_cmp(&charges[y]).then(x.cmp(&y)));
        let mut slots: Vec<usize> = order[..nd.q].iter().map(|&t| nd.a + t).collect();
        slots.sort_unstable();
        ops_rev.push(OpChoice {
            window: w,
            slots,
            energy: ctx.energy[j][k][w][nd.q - 1],
        });
        node = nd.parent;
    }
    ops_rev.reverse();
    Some((value, JobShopConfiguration { job: j, ops: ops_rev }))
}

/// Separation step for one job: a configuration whose dual constraint is
/// violated by more than `tol`, or none.
pub fn price_job(
    ctx: &JobShopCtx,
    j: usize,
    lambda_j: f64,
    kappa: &[Vec<f64>],
    tol: f64,
) -> Option<(JobShopConfiguration, f64)> {
    let (value, cfg) = best_configuration(ctx, j, kappa)?;
    let rc = value - lambda_j;
    (rc < -tol.max(1e-7)).then_some((cfg, rc))
}

fn master_rows(
    instance: &JobShopInstance,
    grids: &JobShopGrids,
) -> (LinearProgram, Vec<usize>, Vec<Vec<usize>>) {
    let mut lp = LinearProgram::new();
    let job_rows: Vec<usize> = (0..instance.jobs.len())
        .map(|j| lp.add_row(Relation::Ge, 1.0, format!("job{j}")))
        .collect();
    let cap_rows: Vec<Vec<usize>> = grids
        .atoms
        .iter()
        .enumerate()
        .map(|(i, aset)| {
            (0..aset.n_atoms())
                .map(|a| lp.add_row(Relation::Le, 1.0, format!("cap_i{i}_a{a}")))
                .collect()
        })
        .collect();
    (lp, job_rows, cap_rows)
}

fn config_column(
    ctx: &JobShopCtx,
    cfg: &JobShopConfiguration,
    job_rows: &[usize],
    cap_rows: &[Vec<usize>],
    label: String,
) -> Column {
    let mut entries = vec![(job_rows[cfg.job], 1.0)];
    let mut cost = 0.0;
    for (k, choice) in cfg.ops.iter().enumerate() {
        cost += choice.energy;
        let proc = ctx.instance.jobs[cfg.job][k].processor;
        for &t in &choice.slots {
            for &a in &ctx.slot_atoms[cfg.job][k][choice.window][t] {
                entries.push((cap_rows[proc][a], 1.0));
            }
        }
    }
    entries.sort_unstable_by_key(|&(r, _)| r);
    entries.dedup();
    Column {
        cost,
        entries,
        label,
    }
}

/// One operation piece in the realized schedule.
#[derive(Debug, Clone)]
pub struct JsPart {
    pub job: usize,
    pub op: usize,
    pub start: Rat,
    pub end: Rat,
    pub work: Rat,
}

/// Per-processor pieces, disjoint and sorted by start time. Inside a shared
/// atomic interval colliding operations run sequentially, ordered by chain
/// position then job id, at the interval's pooled speed.
#[derive(Debug, Clone)]
pub struct JsSchedule {
    pub processors: Vec<Vec<JsPart>>,
}

impl JsSchedule {
    pub fn energy(&self, instance: &JobShopInstance) -> f64 {
        self.processors
            .iter()
            .enumerate()
            .map(|(i, parts)| {
                let alpha = instance.processors[i].alpha;
                parts
                    .iter()
                    .map(|p| {
                        let len = rat_to_f64(&(&p.end - &p.start));
                        let speed = rat_to_f64(&p.work) / len;
                        len * speed.powf(alpha)
                    })
                    .sum::<f64>()
            })
            .sum()
    }
}

fn assemble(ctx: &JobShopCtx, configs: &[&JobShopConfiguration]) -> JsSchedule {
    let m = ctx.instance.processors.len();
    let mut per_atom: Vec<Vec<Vec<(usize, usize, Rat)>>> = ctx
        .grids
        .atoms
        .iter()
        .map(|aset| vec![Vec::new(); aset.n_atoms()])
        .collect();
    for cfg in configs {
        let j = cfg.job;
        for (k, choice) in cfg.ops.iter().enumerate() {
            let op = &ctx.instance.jobs[j][k];
            let grid = &ctx.grids.windows[j][k][choice.window].grid;
            let q = choice.slots.len();
            let speed = op.work.clone()
                / (grid.slot_len.clone() * crate::core_types::rat_int(q as i64));
            for &t in &choice.slots {
                for &a in &ctx.slot_atoms[j][k][choice.window][t] {
                    let w = &speed * ctx.grids.atoms[op.processor].atom_len(a);
                    per_atom[op.processor][a].push((j, k, w));
                }
            }
        }
    }
    let mut processors = Vec::with_capacity(m);
    for (i, atoms) in per_atom.into_iter().enumerate() {
        let aset = &ctx.grids.atoms[i];
        let mut parts = Vec::new();
        for (a, mut items) in atoms.into_iter().enumerate() {
            if items.is_empty() {
                continue;
            }
            items.sort_by(|x, y| x.1.cmp(&y.1).then(x.0.cmp(&y.0)));
            let len = aset.atom_len(a);
            let total: Rat = items.iter().map(|(_, _, w)| w.clone()).sum();
            let pooled = &total / &len;
            let mut t = aset.boundaries[a].clone();
            for (j, k, w) in items {
                let dur = &w / &pooled;
                let end = &t + &dur;
                parts.push(JsPart {
                    job: j,
                    op: k,
                    start: t,
                    end: end.clone(),
                    work: w,
                });
                t = end;
            }
        }
        parts.sort_by(|x, y| x.start.cmp(&y.start));
        processors.push(parts);
    }
    JsSchedule { processors }
}

/// Feasibility report for a realized schedule: full execution per operation,
/// no overlap per processor, windows respected, chain precedence in time.
pub fn validate_jobshop_schedule(instance: &JobShopInstance, sched: &JsSchedule) -> Vec<String> {
    let mut out = Vec::new();
    let mut done: HashMap<(usize, usize), Rat> = HashMap::new();
    let mut spans: HashMap<(usize, usize), (Rat, Rat)> = HashMap::new();
    for (i, parts) in sched.processors.iter().enumerate() {
        for (p, part) in parts.iter().enumerate() {
            let op = &instance.jobs[part.job][part.op];
            if op.processor != i {
                out.push(format!(
                    "processor {i}: piece of operation ({},{}) belongs on processor {}",
                    part.job, part.op, op.processor
                ));
            }
            if part.start < op.release || part.end > op.deadline {
                out.push(format!(
                    "operation ({},{}): piece outside its window",
                    part.job, part.op
                ));
            }
            if p > 0 && parts[p - 1].end > part.start {
                out.push(format!("processor {i}: overlapping pieces at index {p}"));
            }
            *done
                .entry((part.job, part.op))
                .or_insert_with(Rat::zero) += &part.work;
            spans
                .entry((part.job, part.op))
                .and_modify(|(s, e)| {
                    if part.start < *s {
                        *s = part.start.clone();
                    }
                    if part.end > *e {
                        *e = part.end.clone();
                    }
                })
                .or_insert_with(|| (part.start.clone(), part.end.clone()));
        }
    }
    for (j, chain) in instance.jobs.iter().enumerate() {
        for (k, op) in chain.iter().enumerate() {
            match done.get(&(j, k)) {
                Some(w) if w == &op.work => {}
                Some(w) => out.push(format!(
                    "operation ({j},{k}): executed {w} of {} work",
                    op.work
                )),
                None => out.push(format!("operation ({j},{k}): never executed")),
            }
        }
        for k in 1..chain.len() {
            if let (Some((_, prev_end)), Some((start, _))) =
                (spans.get(&(j, k - 1)), spans.get(&(j, k)))
            {
                if prev_end > start {
                    out.push(format!(
                        "job {j}: operation {k} starts before operation {} completes",
                        k - 1
                    ));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct JobShopReport {
    pub lp_value: f64,
    pub trial_energies: Vec<f64>,
    pub mean_energy: f64,
    pub best_energy: f64,
    pub best_trial: usize,
    pub feasible_trials: usize,
    pub bell_alpha: f64,
    /// `(1+eps)^a (1+2/(mu-2))^a (1+eps/(1-eps))^a B_a` for mu > 2.
    pub guarantee_factor: Option<f64>,
    /// Operations whose candidate-window list hit the enumeration cap.
    pub capped_ops: Vec<(usize, usize)>,
    /// Operations whose release or deadline was adjusted to restore
    /// non-decreasing chains.
    pub normalized_ops: Vec<(usize, usize)>,
}

#[derive(Debug)]
pub struct JobShopOutcome {
    pub schedule: JsSchedule,
    pub report: JobShopReport,
}

pub fn solve_jobshop(
    instance: &JobShopInstance,
    epsilon: &Rat,
    seed: u64,
    trials: usize,
) -> Result<JobShopOutcome> {
    solve_jobshop_capped(instance, epsilon, seed, trials, DEFAULT_MAX_WINDOWS_PER_OP)
}

pub fn solve_jobshop_capped(
    instance: &JobShopInstance,
    epsilon: &Rat,
    seed: u64,
    trials: usize,
    max_windows_per_op: usize,
) -> Result<JobShopOutcome> {
    assert!(trials > 0);
    let (normalized, normalized_ops) = normalize_chains(instance);
    let ctx = build_ctx(&normalized, epsilon, max_windows_per_op)?;
    let n_jobs = normalized.jobs.len();
    let (mut master, job_rows, cap_rows) = master_rows(&normalized, &ctx.grids);

    let scale: f64 = (0..n_jobs)
        .map(|j| {
            ctx.energy[j]
                .iter()
                .map(|per_w| {
                    per_w
                        .iter()
                        .map(|e| e[0])
                        .fold(f64::INFINITY, f64::min)
                })
                .sum::<f64>()
        })
        .sum();
    let big_m = 10.0 * (scale + 1.0);
    for (j, &row) in job_rows.iter().enumerate() {
        master.add_col(big_m, vec![(row, 1.0)], format!("art{j}"));
    }

    let mut by_label: HashMap<String, JobShopConfiguration> = HashMap::new();
    let mut counter = 0usize;
    let result = {
        let mut pricer = |duals: &[f64]| -> Vec<Column> {
            let kappa: Vec<Vec<f64>> = cap_rows
                .iter()
                .map(|rows| rows.iter().map(|&r| (-duals[r]).max(0.0)).collect())
                .collect();
            let found: Vec<(usize, JobShopConfiguration)> = (0..n_jobs)
                .into_par_iter()
                .filter_map(|j| {
                    price_job(&ctx, j, duals[job_rows[j]], &kappa, lp::DEFAULT_TOL)
                        .map(|(cfg, _)| (j, cfg))
                })
                .collect();
            found
                .into_iter()
                .map(|(j, cfg)| {
                    let label = format!("cfg{j}_{counter}");
                    counter += 1;
                    let col = config_column(&ctx, &cfg, &job_rows, &cap_rows, label.clone());
                    by_label.insert(label, cfg);
                    col
                })
                .collect()
        };
        lp::column_generation(&master, &mut pricer, lp::DEFAULT_TOL, MAX_CG_ITERS)?
    };
    if result.solution.status == LpStatus::IterCap {
        return Err(Error::Lp(format!(
            "job shop column generation hit the iteration cap after {} columns",
            result.generated.len()
        )));
    }

    let configs: Vec<JobShopConfiguration> = result
        .generated
        .iter()
        .map(|label| by_label[label].clone())
        .collect();
    let (mut clean, job_rows, cap_rows) = master_rows(&normalized, &ctx.grids);
    for (c, cfg) in configs.iter().enumerate() {
        let col = config_column(&ctx, cfg, &job_rows, &cap_rows, format!("c{c}"));
        clean.add_col(col.cost, col.entries, col.label);
    }
    let sol = lp::solve(&clean, lp::DEFAULT_TOL)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Infeasible(
            "some job has no feasible configuration at this discretization".into(),
        ));
    }

    let mut per_job: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_jobs];
    for (c, &x) in sol.primal.iter().enumerate() {
        if x > 1e-12 {
            per_job[configs[c].job].push((c, x));
        }
    }
    for (j, choices) in per_job.iter_mut().enumerate() {
        let total: f64 = choices.iter().map(|(_, x)| x).sum();
        if total < 1.0 - 1e-6 {
            return Err(Error::Infeasible(format!(
                "job {j} is covered only to {total} by the LP"
            )));
        }
        for (_, x) in choices.iter_mut() {
            *x /= total;
        }
    }

    struct Trial {
        energy: f64,
        feasible: bool,
        picks: Vec<usize>,
    }
    let trials_out: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let picks: Vec<usize> = (0..n_jobs)
                .map(|j| {
                    let mut rng = StreamRng::new(seed, ((t as u64) << 32) | j as u64);
                    let weights: Vec<f64> = per_job[j].iter().map(|&(_, x)| x).collect();
                    per_job[j][rng.categorical(&weights)].0
                })
                .collect();
            let chosen: Vec<&JobShopConfiguration> = picks.iter().map(|&c| &configs[c]).collect();
            let sched = assemble(&ctx, &chosen);
            let energy = sched.energy(&normalized);
            let feasible = validate_jobshop_schedule(&normalized, &sched).is_empty();
            Trial {
                energy,
                feasible,
                picks,
            }
        })
        .collect();

    let feasible_trials = trials_out.iter().filter(|t| t.feasible).count();
    let (best_trial, best) = trials_out
        .iter()
        .enumerate()
        .filter(|(_, t)| t.feasible)
        .min_by(|a, b| a.1.energy.total_cmp(&b.1.energy).then(a.0.cmp(&b.0)))
        .ok_or_else(|| {
            Error::Infeasible(format!("none of {trials} trials assembled feasibly"))
        })?;
    let chosen: Vec<&JobShopConfiguration> = best.picks.iter().map(|&c| &configs[c]).collect();
    let schedule = assemble(&ctx, &chosen);

    let trial_energies: Vec<f64> = trials_out.iter().map(|t| t.energy).collect();
    let mean_energy = trial_energies.iter().sum::<f64>() / trials as f64;
    let alpha_max = normalized
        .processors
        .iter()
        .map(|p| p.alpha)
        .fold(1.0, f64::max);
    let bell_alpha = crate::probability::generalized_bell(alpha_max, 1e-12)?;
    let mu = normalized.mu() as f64;
    let e = rat_to_f64(epsilon);
    let guarantee_factor = (mu > 2.0).then(|| {
        ((1.0 + e) * (1.0 + 2.0 / (mu - 2.0)) * (1.0 + e / (1.0 - e))).powf(alpha_max) * bell_alpha
    });

    Ok(JobShopOutcome {
        schedule,
        report: JobShopReport {
            lp_value: sol.objective,
            mean_energy,
            best_energy: best.energy,
            best_trial,
            feasible_trials,
            bell_alpha,
            guarantee_factor,
            capped_ops: ctx.grids.capped_ops.clone(),
            normalized_ops,
            trial_energies,
        },
    })
}

/// Exact optimum over the discretized configuration space, as a slot-level
/// integer program: binaries pick one (window, slot count) per operation and
/// the individual slots; precedence forbids any slot pair out of chain order;
/// capacity allows one operation per atomic interval.
pub fn ip_jobshop(
    instance: &JobShopInstance,
    epsilon: &Rat,
    limits: &OracleLimits,
) -> Result<OracleResult> {
    let t0 = Instant::now();
    let (normalized, _) = normalize_chains(instance);
    let ctx = build_ctx(&normalized, epsilon, DEFAULT_MAX_WINDOWS_PER_OP)?;
    let grids = &ctx.grids;

    let mut n_binaries: u64 = 0;
    for (j, chain) in normalized.jobs.iter().enumerate() {
        for (k, _) in chain.iter().enumerate() {
            for cw in &grids.windows[j][k] {
                n_binaries += 2 * cw.grid.n_slots as u64;
            }
        }
    }
    if n_binaries > limits.max_combinations {
        return Err(Error::OracleLimit(format!(
            "{n_binaries} binaries exceed the limit {}",
            limits.max_combinations
        )));
    }

    let mut lp = LinearProgram::new();
    let cap_rows: Vec<Vec<usize>> = grids
        .atoms
        .iter()
        .enumerate()
        .map(|(i, aset)| {
            (0..aset.n_atoms())
                .map(|a| lp.add_row(Relation::Le, 1.0, format!("cap_i{i}_a{a}")))
                .collect()
        })
        .collect();

    // Precedence rows first: a slot of operation k+1 may not start before a
    // chosen slot of operation k ends. Each row couples exactly two slot
    // binaries, collected here so the columns can reference them at creation.
    let mut extra: HashMap<(usize, usize, usize, usize), Vec<usize>> = HashMap::new();
    for (j, chain) in normalized.jobs.iter().enumerate() {
        for k in 1..chain.len() {
            for (w0, cw0) in grids.windows[j][k - 1].iter().enumerate() {
                for t0 in 0..cw0.grid.n_slots {
                    let (_, end0) = cw0.grid.slot(t0);
                    for (w1, cw1) in grids.windows[j][k].iter().enumerate() {
                        for t1 in 0..cw1.grid.n_slots {
                            let (start1, _) = cw1.grid.slot(t1);
                            if start1 < end0 {
                                let row = lp.add_row(
                                    Relation::Le,
                                    1.0,
                                    format!("prec_j{j}_k{k}_{w0}_{t0}_{w1}_{t1}"),
                                );
                                extra.entry((j, k - 1, w0, t0)).or_default().push(row);
                                extra.entry((j, k, w1, t1)).or_default().push(row);
                            }
                        }
                    }
                }
            }
        }
    }
    // Columns: slot binaries y per (j, k, w, t) and count binaries v per
    // (j, k, w, q), linked so exactly one (window, count) is chosen per
    // operation and the chosen window carries exactly that many slots.
    for (j, chain) in normalized.jobs.iter().enumerate() {
        for (k, op) in chain.iter().enumerate() {
            let one_row = lp.add_row(Relation::Eq, 1.0, format!("one_j{j}_k{k}"));
            for (w, cw) in grids.windows[j][k].iter().enumerate() {
                let link_row = lp.add_row(Relation::Eq, 0.0, format!("link_j{j}_k{k}_w{w}"));
                for t in 0..cw.grid.n_slots {
                    let mut entries = vec![(link_row, 1.0)];
                    for &a in &ctx.slot_atoms[j][k][w][t] {
                        entries.push((cap_rows[op.processor][a], 1.0));
                    }
                    if let Some(rows) = extra.get(&(j, k, w, t)) {
                        entries.extend(rows.iter().map(|&r| (r, 1.0)));
                    }
                    let c = lp.add_col(0.0, entries, format!("y_j{j}_k{k}_w{w}_t{t}"));
                    lp.set_bounds(c, 0.0, Some(1.0));
                }
                for q in 1..=cw.grid.n_slots {
                    let c = lp.add_col(
                        ctx.energy[j][k][w][q - 1],
                        vec![(one_row, 1.0), (link_row, -(q as f64))],
                        format!("v_j{j}_k{k}_w{w}_q{q}"),
                    );
                    lp.set_bounds(c, 0.0, Some(1.0));
                }
            }
        }
    }

    let integer = vec![true; lp.n_cols()];
    let sol = lp::solve_mip(&lp, &integer)?;
    match sol.status {
        LpStatus::Optimal => Ok(OracleResult {
            optimum: sol.objective,
            solution: OracleSolution::Fractional,
            search_space: n_binaries,
            elapsed: t0.elapsed(),
        }),
        LpStatus::Infeasible => Err(Error::Infeasible(
            "no feasible job shop schedule at this discretization".into(),
        )),
        other => Err(Error::Lp(format!("job shop IP solve failed: {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_types::{rat, rat_int, Operation, Processor};

    fn op(processor: usize, r: i64, d: i64, w: i64) -> Operation {
        Operation {
            processor,
            work: rat_int(w),
            release: rat_int(r),
            deadline: rat_int(d),
        }
    }

    fn procs(alphas: &[f64]) -> Vec<Processor> {
        alphas
            .iter()
            .enumerate()
            .map(|(id, &alpha)| Processor { id, alpha })
            .collect()
    }

    fn zero_kappa(ctx: &JobShopCtx) -> Vec<Vec<f64>> {
        ctx.grids
            .atoms
            .iter()
            .map(|a| vec![0.0; a.n_atoms()])
            .collect()
    }

    #[test]
    fn zero_kappa_minimizes_pure_energy() {
        let inst = JobShopInstance {
            processors: procs(&[2.0]),
            jobs: vec![vec![op(0, 0, 1, 1)]],
        };
        let ctx = build_ctx(&inst, &rat(1, 2), DEFAULT_MAX_WINDOWS_PER_OP).unwrap();
        let (value, cfg) = best_configuration(&ctx, 0, &zero_kappa(&ctx)).unwrap();
        // Full window at the lowest speed: energy w^2 / L = 1.
        assert!((value - 1.0).abs() < 1e-9);
        let cw = &ctx.grids.windows[0][0][cfg.ops[0].window];
        assert_eq!(cw.b, rat_int(0));
        assert_eq!(cw.c, rat_int(1));
        assert_eq!(cfg.ops[0].slots.len(), cw.grid.n_slots);
    }

    #[test]
    fn no_column_when_lambda_too_small() {
        let inst = JobShopInstance {
            processors: procs(&[2.0]),
            jobs: vec![vec![op(0, 0, 1, 1)]],
        };
        let ctx = build_ctx(&inst, &rat(1, 2), DEFAULT_MAX_WINDOWS_PER_OP).unwrap();
        // Cheapest configuration costs 1; lambda below that prices nothing.
        assert!(price_job(&ctx, 0, 0.5, &zero_kappa(&ctx), 1e-9).is_none());
        assert!(price_job(&ctx, 0, 1.5, &zero_kappa(&ctx), 1e-9).is_some());
    }

    #[test]
    fn single_op_pricer_matches_subset_enumeration() {
        let inst = JobShopInstance {
            processors: procs(&[2.0]),
            jobs: vec![vec![op(0, 0, 2, 1)]],
        };
        let ctx = build_ctx(&inst, &rat(1, 8), 6).unwrap();
        let mut rng = StreamRng::new(97, 0);
        for _ in 0..200 {
            let kappa: Vec<Vec<f64>> = ctx
                .grids
                .atoms
                .iter()
                .map(|a| (0..a.n_atoms()).map(|_| rng.next_f64() * 2.0).collect())
                .collect();
            let (dp, _) = best_configuration(&ctx, 0, &kappa).unwrap();
            let mut brute = f64::INFINITY;
            for (w, cw) in ctx.grids.windows[0][0].iter().enumerate() {
                let n = cw.grid.n_slots;
                let charge: Vec<f64> = (0..n)
                    .map(|t| ctx.slot_atoms[0][0][w][t].iter().map(|&a| kappa[0][a]).sum())
                    .collect();
                for mask in 1u32..1 << n {
                    let q = mask.count_ones() as usize;
                    let k_sum: f64 = (0..n)
                        .filter(|t| mask >> t & 1 == 1)
                        .map(|t| charge[t])
                        .sum();
                    brute = brute.min(ctx.energy[0][0][w][q - 1] + k_sum);
                }
            }
            assert!((dp - brute).abs() < 1e-9, "dp {dp} brute {brute}");
        }
    }

    #[test]
    fn chain_pricer_matches_semi_brute_force() {
        // Op 1 enumerated over all slot subsets; op 2 solved exactly given the
        // completion time (cheapest-q is exact for a last operation).
        let inst = JobShopInstance {
            processors: procs(&[2.0, 3.0]),
            jobs: vec![vec![op(0, 0, 2, 1), op(1, 1, 3, 1)]],
        };
        let ctx = build_ctx(&inst, &rat(9, 10), 4).unwrap();
        let mut rng = StreamRng::new(131, 1);
        for trial in 0..120 {
            let kappa: Vec<Vec<f64>> = ctx
                .grids
                .atoms
                .iter()
                .map(|a| (0..a.n_atoms()).map(|_| rng.next_f64()).collect())
                .collect();
            let (dp, _) = best_configuration(&ctx, 0, &kappa).unwrap();
            let mut brute = f64::INFINITY;
            for (w0, cw0) in ctx.grids.windows[0][0].iter().enumerate() {
                let n0 = cw0.grid.n_slots;
                let bounds0 = cw0.grid.boundaries();
                let charge0: Vec<f64> = (0..n0)
                    .map(|t| ctx.slot_atoms[0][0][w0][t].iter().map(|&a| kappa[0][a]).sum())
                    .collect();
                for mask in 1u32..1 << n0 {
                    let q0 = mask.count_ones() as usize;
                    let last = (0..n0).rev().find(|t| mask >> t & 1 == 1).unwrap();
                    let done = &bounds0[last + 1];
                    let c0: f64 = ctx.energy[0][0][w0][q0 - 1]
                        + (0..n0)
                            .filter(|t| mask >> t & 1 == 1)
                            .map(|t| charge0[t])
                            .sum::<f64>();
                    for (w1, cw1) in ctx.grids.windows[0][1].iter().enumerate() {
                        let n1 = cw1.grid.n_slots;
                        let bounds1 = cw1.grid.boundaries();
                        let first = bounds1.partition_point(|x| x < done);
                        if first >= n1 {
                            continue;
                        }
                        let mut charges: Vec<f64> = (first..n1)
                            .map(|t| {
                                ctx.slot_atoms[0][1][w1][t]
                                    .iter()
                                    .map(|&a| kappa[1][a])
                                    .sum()
                            })
                            .collect();
                        charges.sort_by(f64::total_cmp);
                        let mut acc = 0.0;
                        for (q1, c) in charges.iter().enumerate() {
                            acc += c;
                            brute = brute.min(c0 + ctx.energy[0][1][w1][q1] + acc);
                        }
                    }
                }
            }
            assert!((dp - brute).abs() < 1e-9, "trial {trial}: dp {dp} brute {brute}");
        }
    }

    #[test]
    fn single_operation_solve() {
        let inst = JobShopInstance {
            processors: procs(&[2.0]),
            jobs: vec![vec![op(0, 0, 1, 1)]],
        };
        let out = solve_jobshop(&inst, &rat(1, 2), 5, 10).unwrap();
        assert!((out.report.lp_value - 1.0).abs() < 1e-6);
        assert!((out.report.best_energy - 1.0).abs() < 1e-6);
        assert_eq!(out.report.feasible_trials, 10);
        assert!(validate_jobshop_schedule(&inst, &out.schedule).is_empty());
    }

    #[test]
    fn disjoint_jobs_add_up_integrally() {
        let inst = JobShopInstance {
            processors: procs(&[2.0]),
            jobs: vec![vec![op(0, 0, 1, 1)], vec![op(0, 1, 2, 1)]],
        };
        let out = solve_jobshop(&inst, &rat(1, 2), 7, 20).unwrap();
        assert!((out.report.lp_value - 2.0).abs() < 1e-6);
        assert!((out.report.best_energy - 2.0).abs() < 1e-6);
        assert_eq!(out.report.feasible_trials, 20);
    }

    #[test]
    fn column_generation_matches_full_enumeration() {
        // Two single-operation jobs contending for one processor; every
        // (window, slot subset) pair is enumerable at this coarse grid.
        let inst = JobShopInstance {
            processors: procs(&[2.0]),
            jobs: vec![vec![op(0, 0, 2, 1)], vec![op(0, 0, 2, 2)]],
        };
        let eps = rat(9, 10);
        let out = solve_jobshop(&inst, &eps, 3, 5).unwrap();

        let ctx = build_ctx(&inst, &eps, DEFAULT_MAX_WINDOWS_PER_OP).unwrap();
        let (mut lp, job_rows, cap_rows) = master_rows(&inst, &ctx.grids);
        let mut c = 0usize;
        for j in 0..2 {
            for (w, cw) in ctx.grids.windows[j][0].iter().enumerate() {
                let n = cw.grid.n_slots;
                for mask in 1u32..1 << n {
                    let slots: Vec<usize> = (0..n).filter(|t| mask >> t & 1 == 1).collect();
                    let cfg = JobShopConfiguration {
                        job: j,
                        ops: vec![OpChoice {
                            window: w,
                            energy: ctx.energy[j][0][w][slots.len() - 1],
                            slots,
                        }],
                    };
                    let col = config_column(&ctx, &cfg, &job_rows, &cap_rows, format!("e{c}"));
                    lp.add_col(col.cost, col.entries, col.label);
                    c += 1;
                }
            }
        }
        let full = lp::solve(&lp, lp::DEFAULT_TOL).unwrap();
        assert_eq!(full.status, LpStatus::Optimal);
        assert!(
            (full.objective - out.report.lp_value).abs() < 1e-5,
            "enumeration {} vs column generation {}",
            full.objective,
            out.report.lp_value
        );
    }

    #[test]
    fn chains_round_feasibly_across_seeds() {
        let inst = JobShopInstance {
            processors: procs(&[2.0, 2.0]),
            jobs: vec![
                vec![op(0, 0, 2, 1), op(1, 1, 4, 1)],
                vec![op(1, 0, 2, 1), op(0, 1, 4, 1)],
            ],
        };
        let out = solve_jobshop_capped(&inst, &rat(3, 4), 17, 200, 12).unwrap();
        assert_eq!(out.report.feasible_trials, 200);
        assert!(validate_jobshop_schedule(&inst, &out.schedule).is_empty());
        assert!(out.report.best_energy >= out.report.lp_value - 1e-6);
    }

    #[test]
    fn lp_never_exceeds_ip() {
        let inst = JobShopInstance {
            processors: procs(&[2.0]),
            jobs: vec![vec![op(0, 0, 2, 1)], vec![op(0, 0, 2, 2)]],
        };
        let eps = rat(9, 10);
        let out = solve_jobshop(&inst, &eps, 3, 5).unwrap();
        let ip = ip_jobshop(&inst, &eps, &OracleLimits::default()).unwrap();
        assert!(
            out.report.lp_value <= ip.optimum + 1e-6,
            "lp {} ip {}",
            out.report.lp_value,
            ip.optimum
        );
        // The rounded integral schedule can never beat the exact IP.
        assert!(out.report.best_energy >= ip.optimum - 1e-6);
    }

    #[test]
    fn ip_matches_lp_without_contention() {
        let inst = JobShopInstance {
            processors: procs(&[2.0]),
            jobs: vec![vec![op(0, 0, 1, 1)], vec![op(0, 1, 2, 1)]],
        };
        let eps = rat(1, 2);
        let out = solve_jobshop(&inst, &eps, 3, 5).unwrap();
        let ip = ip_jobshop(&inst, &eps, &OracleLimits::default()).unwrap();
        assert!((ip.optimum - out.report.lp_value).abs() < 1e-6);
        assert!((ip.optimum - 2.0).abs() < 1e-6);
    }

    #[test]
    fn ip_respects_chain_precedence() {
        // One 2-op chain on a single processor with overlapping windows: the
        // IP must fit both ops sequentially inside (0, 2].
        let inst = JobShopInstance {
            processors: procs(&[2.0]),
            jobs: vec![vec![op(0, 0, 2, 1), op(0, 0, 2, 1)]],
        };
        let ip = ip_jobshop(&inst, &rat(9, 10), &OracleLimits::default()).unwrap();
        // Best split of 2 time units between equal works: 1 each, energy 2.
        // The grid cannot beat the continuous optimum.
        assert!(ip.optimum >= 2.0 - 1e-6);
        assert!(ip.optimum <= 2.2, "optimum {}", ip.optimum);
    }

    #[test]
    fn ip_refuses_over_budget() {
        let inst = JobShopInstance {
            processors: procs(&[2.0]),
            jobs: vec![vec![op(0, 0, 2, 1)], vec![op(0, 0, 2, 2)]],
        };
        let limits = OracleLimits {
            max_combinations: 10,
        };
        match ip_jobshop(&inst, &rat(9, 10), &limits) {
            Err(Error::OracleLimit(_)) => {}
            other => panic!("expected a budget refusal, got {other:?}"),
        }
    }

    #[test]
    fn mean_energy_within_bell_bound() {
        let inst = JobShopInstance {
            processors: procs(&[2.0]),
            jobs: vec![vec![op(0, 0, 2, 1)], vec![op(0, 0, 2, 1)]],
        };
        let out = solve_jobshop(&inst, &rat(1, 2), 29, 300).unwrap();
        let n = out.report.trial_energies.len() as f64;
        let mean = out.report.mean_energy;
        let var = out
            .report
            .trial_energies
            .iter()
            .map(|e| (e - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        let stderr = (var / n).sqrt();
        assert!(
            mean <= out.report.bell_alpha * out.report.lp_value + 3.0 * stderr,
            "mean {mean} vs {}",
            out.report.bell_alpha * out.report.lp_value
        );
    }

    #[test]
    fn decreasing_chain_dates_are_normalized() {
        let inst = JobShopInstance {
            processors: procs(&[2.0, 2.0]),
            jobs: vec![vec![op(0, 2, 6, 1), op(1, 0, 4, 1)]],
        };
        let (fixed, changed) = normalize_chains(&inst);
        assert_eq!(fixed.jobs[0][1].release, rat_int(2));
        assert_eq!(fixed.jobs[0][0].deadline, rat_int(4));
        assert!(changed.contains(&(0, 1)) && changed.contains(&(0, 0)));
        let out = solve_jobshop(&inst, &rat(1, 2), 11, 20).unwrap();
        assert_eq!(out.report.normalized_ops.len(), 2);
        assert!(validate_jobshop_schedule(&fixed, &out.schedule).is_empty());
    }
}
