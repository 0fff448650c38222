//! Migratory scheduling: the problem is solved fractionally over per-interval
//! configurations (injective job-to-processor maps with grid speeds) by column
//! generation, where pricing one interval is a maximum-weight bipartite
//! matching. Work executed on processor `i` counts as an `x / w_{i,j}`
//! fraction of job `j`, so jobs may migrate between intervals but never run in
//! parallel with themselves.

use crate::core_types::{rat_to_f64, Rat, SchedulingInstance};
use crate::discretize::{speed_grid, SpeedGrid, WindowPolicy};
use crate::lp::{self, Column, LinearProgram, LpStatus, Relation};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub const DEFAULT_DELTA: f64 = 0.05;
const MAX_CG_ITERS: usize = 400;

/// Landmark intervals `(t_{k-1}, t_k]` cut at every finite release/deadline.
pub fn intervals(instance: &SchedulingInstance) -> Result<Vec<(Rat, Rat)>> {
    let mut marks: Vec<Rat> = Vec::new();
    for row in &instance.jobs {
        for jp in row {
            if !jp.is_infinite() {
                marks.push(jp.release.clone());
                marks.push(jp.deadline.clone());
            }
        }
    }
    marks.sort();
    marks.dedup();
    if marks.len() < 2 {
        return Err(Error::InvalidInstance(
            "no finite windows to schedule in".into(),
        ));
    }
    Ok(marks.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect())
}

/// (job, processor) pairs alive throughout `(a, b]`.
pub fn alive_pairs(instance: &SchedulingInstance, a: &Rat, b: &Rat) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (j, row) in instance.jobs.iter().enumerate() {
        for (i, jp) in row.iter().enumerate() {
            if !jp.is_infinite() && &jp.release <= a && b <= &jp.deadline {
                out.push((j, i));
            }
        }
    }
    out
}

/// One column of the configuration LP: during its interval, up to `m` jobs run
/// in parallel, each on its own processor at a grid speed.
#[derive(Debug, Clone, PartialEq)]
pub struct MigratoryConfiguration {
    pub interval: usize,
    /// (job, processor, speed); injective in jobs and in processors.
    pub assignments: Vec<(usize, usize, f64)>,
}

impl MigratoryConfiguration {
    /// Instantaneous power draw.
    pub fn power(&self, instance: &SchedulingInstance) -> f64 {
        self.assignments
            .iter()
            .map(|&(_, i, v)| v.powf(instance.processors[i].alpha))
            .sum()
    }

    /// Completion rate per assigned job: running one time unit finishes a
    /// `speed / work` fraction.
    pub fn rates(&self, instance: &SchedulingInstance) -> Vec<(usize, f64)> {
        self.assignments
            .iter()
            .map(|&(j, i, v)| {
                let w = rat_to_f64(instance.jobs[j][i].work.as_ref().expect("finite pair"));
                (j, v / w)
            })
            .collect()
    }
}

/// Best grid speed for one (job, processor) edge under dual price `lambda`:
/// minimizes `v^alpha - (v/w) * lambda` over the grid. For `alpha > 1` the
/// continuous minimizer is `(lambda / (alpha w))^(1/(alpha-1))` and the grid
/// optimum is one of its two neighbors; for `alpha = 1` the objective is
/// linear in `v`, so a grid endpoint wins.
fn best_speed(grid: &SpeedGrid, alpha: f64, w: f64, lambda: f64) -> (f64, f64) {
    let score = |v: f64| v.powf(alpha) - v / w * lambda;
    let candidates: Vec<f64> = if alpha > 1.0 + 1e-12 {
        let target = if lambda <= 0.0 {
            0.0
        } else {
            (lambda / (alpha * w)).powf(1.0 / (alpha - 1.0))
        };
        let idx = grid.speeds.partition_point(|s| *s < target);
        let mut c = Vec::new();
        if idx > 0 {
            c.push(grid.speeds[idx - 1]);
        }
        if idx < grid.speeds.len() {
            c.push(grid.speeds[idx]);
        }
        c
    } else {
        vec![grid.speeds[0], *grid.speeds.last().unwrap()]
    };
    candidates
        .into_iter()
        .map(|v| (v, score(v)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap()
}

/// Exact pricer for one interval: builds the job-processor weight matrix
/// `-(v^alpha - (v/w) lambda_j)` with the best grid speed per edge, runs a
/// maximum-weight matching, and accepts the configuration iff its reduced
/// cost `E - sum (s/w) lambda + mu` is below `-tol`.
pub fn price_interval(
    instance: &SchedulingInstance,
    grid: &SpeedGrid,
    interval: usize,
    alive: &[(usize, usize)],
    lambda: &[f64],
    mu: f64,
    tol: f64,
) -> Option<MigratoryConfiguration> {
    if alive.is_empty() {
        return None;
    }
    let mut jobs: Vec<usize> = alive.iter().map(|&(j, _)| j).collect();
    jobs.sort_unstable();
    jobs.dedup();
    let m = instance.n_procs();
    let mut weights = vec![vec![0.0; m]; jobs.len()];
    let mut speeds = vec![vec![0.0; m]; jobs.len()];
    for &(j, i) in alive {
        let jp = jobs.binary_search(&j).unwrap();
        let alpha = instance.processors[i].alpha;
        let w = rat_to_f64(instance.jobs[j][i].work.as_ref().expect("finite pair"));
        let (v, score) = best_speed(grid, alpha, w, lambda[j]);
        weights[jp][i] = -score;
        speeds[jp][i] = v;
    }
    let (pairs, total) = lp::max_weight_bipartite_matching(&weights);
    if total <= mu + tol || pairs.is_empty() {
        return None;
    }
    let assignments = pairs
        .into_iter()
        .map(|(jp, i)| (jobs[jp], i, speeds[jp][i]))
        .collect();
    Some(MigratoryConfiguration {
        interval,
        assignments,
    })
}

/// Every configuration over the grid, interval by interval: all injective
/// assignments of one or more alive jobs to distinct processors with any grid
/// speed each. Refuses past `cap` columns.
pub fn enumerate_configurations(
    instance: &SchedulingInstance,
    grid: &SpeedGrid,
    cap: u64,
) -> Result<Vec<MigratoryConfiguration>> {
    let ivls = intervals(instance)?;
    let mut out: Vec<MigratoryConfiguration> = Vec::new();
    for (k, (a, b)) in ivls.iter().enumerate() {
        let alive = alive_pairs(instance, a, b);
        let mut jobs: Vec<usize> = alive.iter().map(|&(j, _)| j).collect();
        jobs.sort_unstable();
        jobs.dedup();
        let mut cur: Vec<(usize, usize, f64)> = Vec::new();
        let mut used = vec![false; instance.n_procs()];
        fn rec(
            pos: usize,
            jobs: &[usize],
            alive: &[(usize, usize)],
            grid: &SpeedGrid,
            k: usize,
            cur: &mut Vec<(usize, usize, f64)>,
            used: &mut Vec<bool>,
            out: &mut Vec<MigratoryConfiguration>,
            cap: u64,
        ) -> Result<()> {
            if pos == jobs.len() {
                if !cur.is_empty() {
                    if out.len() as u64 >= cap {
                        return Err(Error::OracleLimit(format!(
                            "more than {cap} migratory configurations"
                        )));
                    }
                    out.push(MigratoryConfiguration {
                        interval: k,
                        assignments: cur.clone(),
                    });
                }
                return Ok(());
            }
            let j = jobs[pos];
            // Leave job j out of the configuration.
            rec(pos + 1, jobs, alive, grid, k, cur, used, out, cap)?;
            for &(aj, i) in alive {
                if aj != j || used[i] {
                    continue;
                }
                for &v in &grid.speeds {
                    used[i] = true;
                    cur.push((j, i, v));
                    rec(pos + 1, jobs, alive, grid, k, cur, used, out, cap)?;
                    cur.pop();
                    used[i] = false;
                }
            }
            Ok(())
        }
        rec(0, &jobs, &alive, grid, k, &mut cur, &mut used, &mut out, cap)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FractionalPiece {
    pub interval: usize,
    /// (job, processor, speed)
    pub assignments: Vec<(usize, usize, f64)>,
    pub duration: f64,
}

/// A fractional migratory schedule: per interval, a list of configurations
/// with durations summing to at most the interval length; sequencing within
/// an interval is arbitrary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FractionalSchedule {
    pub intervals: Vec<(f64, f64)>,
    pub pieces: Vec<FractionalPiece>,
    /// Completed fraction per job.
    pub job_fraction: Vec<f64>,
}

pub fn validate_fractional(
    instance: &SchedulingInstance,
    sched: &FractionalSchedule,
) -> Vec<String> {
    let mut out = Vec::new();
    let tol = 1e-6;
    let mut load = vec![0.0; sched.intervals.len()];
    let mut fraction = vec![0.0; instance.n_jobs()];
    for (p, piece) in sched.pieces.iter().enumerate() {
        if piece.interval >= sched.intervals.len() {
            out.push(format!("piece {p}: interval {} out of range", piece.interval));
            continue;
        }
        if piece.duration < -tol {
            out.push(format!("piece {p}: negative duration {}", piece.duration));
        }
        load[piece.interval] += piece.duration;
        let (a, b) = sched.intervals[piece.interval];
        let mut seen_jobs = Vec::new();
        let mut seen_procs = Vec::new();
        for &(j, i, v) in &piece.assignments {
            if seen_jobs.contains(&j) {
                out.push(format!("piece {p}: job {j} runs in parallel with itself"));
            }
            if seen_procs.contains(&i) {
                out.push(format!("piece {p}: processor {i} assigned twice"));
            }
            seen_jobs.push(j);
            seen_procs.push(i);
            if v <= 0.0 {
                out.push(format!("piece {p}: non-positive speed for job {j}"));
            }
            let jp = &instance.jobs[j][i];
            match &jp.work {
                None => out.push(format!("piece {p}: job {j} cannot run on processor {i}")),
                Some(w) => {
                    let r = rat_to_f64(&jp.release);
                    let d = rat_to_f64(&jp.deadline);
                    if a < r - tol || b > d + tol {
                        out.push(format!(
                            "piece {p}: job {j} not alive on processor {i} in ({a}, {b}]"
                        ));
                    }
                    fraction[j] += v / rat_to_f64(w) * piece.duration;
                }
            }
        }
    }
    for (k, &(a, b)) in sched.intervals.iter().enumerate() {
        if load[k] > (b - a) + tol {
            out.push(format!(
                "interval {k}: configurations run for {} in a window of {}",
                load[k],
                b - a
            ));
        }
    }
    for (j, f) in fraction.iter().enumerate() {
        if *f < 1.0 - 1e-6 {
            out.push(format!("job {j}: completed fraction {f}"));
        }
    }
    out
}

#[derive(Debug)]
pub struct MigratoryOutcome {
    pub lp_value: f64,
    pub schedule: FractionalSchedule,
    pub grid: SpeedGrid,
    pub iterations: usize,
    pub n_columns: usize,
    /// Speed rounding loses at most this factor: `(1 + delta)^alpha_max`.
    pub guarantee_factor: f64,
}

fn config_column(
    instance: &SchedulingInstance,
    cfg: &MigratoryConfiguration,
    ivl_rows: &[usize],
    job_rows: &[usize],
    label: String,
) -> Column {
    let mut entries = vec![(ivl_rows[cfg.interval], 1.0)];
    for (j, rate) in cfg.rates(instance) {
        entries.push((job_rows[j], rate));
    }
    Column {
        cost: cfg.power(instance),
        entries,
        label,
    }
}

/// Master rows (one per interval, one per job) without configuration columns.
fn master_rows(
    instance: &SchedulingInstance,
    ivls: &[(Rat, Rat)],
) -> (LinearProgram, Vec<usize>, Vec<usize>) {
    let mut lp = LinearProgram::new();
    let ivl_rows: Vec<usize> = ivls
        .iter()
        .enumerate()
        .map(|(k, (a, b))| lp.add_row(Relation::Le, rat_to_f64(&(b - a)), format!("ivl{k}")))
        .collect();
    let job_rows: Vec<usize> = (0..instance.n_jobs())
        .map(|j| lp.add_row(Relation::Ge, 1.0, format!("job{j}")))
        .collect();
    (lp, ivl_rows, job_rows)
}

pub fn solve_migratory(
    instance: &SchedulingInstance,
    delta: f64,
    tol: f64,
) -> Result<MigratoryOutcome> {
    let ivls = intervals(instance)?;
    let grid = speed_grid(instance, delta, WindowPolicy::FiniteWorkOnly)?;
    let alive: Vec<Vec<(usize, usize)>> = ivls
        .iter()
        .map(|(a, b)| alive_pairs(instance, a, b))
        .collect();
    let (mut master, ivl_rows, job_rows) = master_rows(instance, &ivls);

    // Artificial coverage columns keep the master feasible until real
    // configurations arrive; they must never survive at optimality.
    let v_top = *grid.speeds.last().unwrap();
    let scale: f64 = (0..instance.n_jobs())
        .map(|j| {
            (0..instance.n_procs())
                .filter_map(|i| {
                    instance.jobs[j][i].work.as_ref().map(|w| {
                        rat_to_f64(w) * v_top.powf(instance.processors[i].alpha - 1.0)
                    })
                })
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    let big_m = 1e4 * (scale + 1.0);
    for (j, &row) in job_rows.iter().enumerate() {
        master.add_col(big_m, vec![(row, 1.0)], format!("art{j}"));
    }

    let mut by_label: HashMap<String, MigratoryConfiguration> = HashMap::new();
    let mut counter = 0usize;
    let result = {
        let mut pricer = |duals: &[f64]| -> Vec<Column> {
            let lambda: Vec<f64> = job_rows.iter().map(|&r| duals[r]).collect();
            let mut cols = Vec::new();
            for k in 0..ivls.len() {
                let mu = -duals[ivl_rows[k]];
                if let Some(cfg) =
                    price_interval(instance, &grid, k, &alive[k], &lambda, mu, tol)
                {
                    let label = format!("cfg{counter}");
                    counter += 1;
                    cols.push(config_column(instance, &cfg, &ivl_rows, &job_rows, label.clone()));
                    by_label.insert(label, cfg);
                }
            }
            cols
        };
        lp::column_generation(&master, &mut pricer, tol, MAX_CG_ITERS)?
    };
    match result.solution.status {
        LpStatus::Optimal => {}
        LpStatus::IterCap => {
            return Err(Error::Lp(format!(
                "column generation hit the iteration cap after {} columns",
                result.generated.len()
            )))
        }
        other => return Err(Error::Lp(format!("master solve failed: {other:?}"))),
    }

    // Re-solve over the generated configurations only: a clean value with no
    // big-M residue, and primal values indexed by configuration.
    let configs: Vec<MigratoryConfiguration> = result
        .generated
        .iter()
        .map(|l| by_label[l].clone())
        .collect();
    let (mut final_lp, fin_ivl, fin_job) = master_rows(instance, &ivls);
    for (c, cfg) in configs.iter().enumerate() {
        let col = config_column(instance, cfg, &fin_ivl, &fin_job, format!("cfg{c}"));
        final_lp.add_col(col.cost, col.entries, col.label);
    }
    let sol = lp::solve(&final_lp, tol)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Infeasible(
            "speed grid too coarse to complete every job".into(),
        ));
    }

    let mut pieces = Vec::new();
    let mut job_fraction = vec![0.0; instance.n_jobs()];
    for (c, cfg) in configs.iter().enumerate() {
        let x = sol.primal[c];
        if x <= 1e-9 {
            continue;
        }
        for (j, rate) in cfg.rates(instance) {
            job_fraction[j] += rate * x;
        }
        pieces.push(FractionalPiece {
            interval: cfg.interval,
            assignments: cfg.assignments.clone(),
            duration: x,
        });
    }
    let alpha_max = instance
        .processors
        .iter()
        .map(|p| p.alpha)
        .fold(1.0, f64::max);
    Ok(MigratoryOutcome {
        lp_value: sol.objective,
        schedule: FractionalSchedule {
            intervals: ivls
                .iter()
                .map(|(a, b)| (rat_to_f64(a), rat_to_f64(b)))
                .collect(),
            pieces,
            job_fraction,
        },
        grid,
        iterations: result.iterations,
        n_columns: configs.len(),
        guarantee_factor: (1.0 + delta).powf(alpha_max),
    })
}
