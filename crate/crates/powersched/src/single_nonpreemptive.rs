//! Single-processor non-preemptive scheduling via reduction: partition time at
//! greedily chosen deadlines, make each interval a pseudo-processor with
//! clipped windows, solve the configuration LP restricted to contiguous slot
//! runs, round, and de-preempt each pseudo-processor with earliest-deadline-
//! first ordering. On every pseudo-processor each job has either release 0 or
//! deadline equal to the interval length, which is what makes the EDF pass
//! yield one contiguous piece per job.

use crate::core_types::{rat_to_f64, JobOnProcessor, Processor, Rat, SchedulingInstance};
use crate::lp::{self, Column, LinearProgram, LpStatus, Relation};
use crate::nonmigratory::{
    assemble_schedule, discretize_instance, round, ConfigChoice, ConfigDistribution, Disc,
};
use crate::{Error, Result};
use num_traits::Zero;
use rayon::prelude::*;
use std::collections::HashMap;

/// Time partition `t_0 < t_1 < ... < t_K` with one job class per greedy step.
#[derive(Debug, Clone)]
pub struct IntervalPartition {
    pub breakpoints: Vec<Rat>,
    /// Per job, the 0-based index of the interval whose deadline step created
    /// its class.
    pub class_of: Vec<usize>,
    /// Number of greedy classes (intervals may be one more).
    pub k: usize,
}

impl IntervalPartition {
    pub fn n_intervals(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn interval(&self, p: usize) -> (&Rat, &Rat) {
        (&self.breakpoints[p], &self.breakpoints[p + 1])
    }
}

fn single_jobs(instance: &SchedulingInstance) -> Result<Vec<(Rat, Rat, Rat)>> {
    if instance.n_procs() != 1 {
        return Err(Error::InvalidInstance(
            "single-processor solver needs exactly one processor".into(),
        ));
    }
    instance
        .jobs
        .iter()
        .enumerate()
        .map(|(j, row)| {
            let jp = &row[0];
            let w = jp
                .work
                .clone()
                .ok_or_else(|| Error::InvalidInstance(format!("job {j} cannot run at all")))?;
            Ok((jp.release.clone(), jp.deadline.clone(), w))
        })
        .collect()
}

/// Greedy deadline partition: `t_p` is the smallest deadline among jobs
/// released after `t_{p-1}`, and a job's class is the step that covered its
/// release.
pub fn interval_partition(instance: &SchedulingInstance) -> Result<IntervalPartition> {
    let jobs = single_jobs(instance)?;
    let n = jobs.len();
    let mut class_of = vec![usize::MAX; n];
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut steps: Vec<Rat> = Vec::new();
    while !remaining.is_empty() {
        let t_p = remaining
            .iter()
            .map(|&j| jobs[j].1.clone())
            .min()
            .unwrap();
        let p = steps.len();
        remaining.retain(|&j| {
            if jobs[j].0 <= t_p {
                class_of[j] = p;
                false
            } else {
                true
            }
        });
        steps.push(t_p);
    }
    let k = steps.len();
    let t0 = jobs.iter().map(|(r, _, _)| r.clone()).min().unwrap();
    let t_end = jobs.iter().map(|(_, d, _)| d.clone()).max().unwrap();
    let mut breakpoints = vec![t0];
    breakpoints.extend(steps);
    if t_end > *breakpoints.last().unwrap() {
        breakpoints.push(t_end);
    }
    Ok(IntervalPartition {
        breakpoints,
        class_of,
        k,
    })
}

/// One pseudo-processor per interval `(t_{p-1}, t_p]`: windows are clipped
/// and shifted so the interval becomes `(0, t_p - t_{p-1}]`; jobs not alive
/// in an interval get the infinite-work sentinel.
pub fn reduce(
    instance: &SchedulingInstance,
    partition: &IntervalPartition,
) -> Result<SchedulingInstance> {
    let jobs = single_jobs(instance)?;
    let alpha = instance.processors[0].alpha;
    let m = partition.n_intervals();
    let processors = (0..m).map(|id| Processor { id, alpha }).collect();
    let reduced_jobs = jobs
        .iter()
        .map(|(r, d, w)| {
            (0..m)
                .map(|p| {
                    let (a, b) = partition.interval(p);
                    if r < b && d > a {
                        JobOnProcessor {
                            release: (r - a).max(Rat::zero()),
                            deadline: d.min(b) - a,
                            work: Some(w.clone()),
                        }
                    } else {
                        JobOnProcessor::infinite()
                    }
                })
                .collect()
        })
        .collect();
    Ok(SchedulingInstance {
        processors,
        jobs: reduced_jobs,
    })
}

/// A contiguous run of `len` slots starting at `start` on one pseudo-processor.
#[derive(Debug, Clone)]
pub struct RunCol {
    pub proc: usize,
    pub job: usize,
    pub start: usize,
    pub len: usize,
}

fn run_groups(disc: &Disc, run: &RunCol) -> Vec<usize> {
    let mut groups: Vec<usize> = (run.start..run.start + run.len)
        .flat_map(|t| disc.groups_of_slot(run.proc, run.job, t).iter().copied())
        .collect();
    groups.sort_unstable();
    groups.dedup();
    groups
}

fn run_column(
    instance: &SchedulingInstance,
    disc: &Disc,
    run: &RunCol,
    job_rows: &[usize],
    cap_rows: &[Vec<usize>],
) -> Column {
    let mut entries = vec![(job_rows[run.job], 1.0)];
    for g in run_groups(disc, run) {
        entries.push((cap_rows[run.proc][g], 1.0));
    }
    Column {
        cost: disc.energy_const(instance, run.proc, run.job, run.len),
        entries,
        label: format!("r_i{}_j{}_a{}_q{}", run.proc, run.job, run.start, run.len),
    }
}

fn config_rows(
    instance: &SchedulingInstance,
    disc: &Disc,
) -> (LinearProgram, Vec<usize>, Vec<Vec<usize>>) {
    let mut lp = LinearProgram::new();
    let job_rows: Vec<usize> = (0..instance.n_jobs())
        .map(|j| lp.add_row(Relation::Eq, 1.0, format!("job{j}")))
        .collect();
    let cap_rows: Vec<Vec<usize>> = disc
        .cap_groups
        .iter()
        .enumerate()
        .map(|(i, groups)| {
            (0..groups.len())
                .map(|g| lp.add_row(Relation::Le, 1.0, format!("cap_i{i}_g{g}")))
                .collect()
        })
        .collect();
    (lp, job_rows, cap_rows)
}

/// Above this many materialized runs the LP is solved by column generation
/// over the same column family instead of full enumeration.
const DIRECT_RUN_CAP: usize = 150_000;
const MAX_CG_ITERS: usize = 500;

/// Solves the contiguous-run configuration LP; returns its value and the
/// per-run primal mass (runs with zero mass omitted).
fn solve_run_lp(
    instance: &SchedulingInstance,
    disc: &Disc,
    tol: f64,
) -> Result<(f64, Vec<(RunCol, f64)>)> {
    let pairs = instance.finite_pairs();
    let big_n = disc.n_slots;
    let total_runs = pairs.len() * big_n * (big_n + 1) / 2;
    let runs: Vec<RunCol> = if total_runs <= DIRECT_RUN_CAP {
        let mut all = Vec::with_capacity(total_runs);
        for &(i, j) in &pairs {
            for start in 0..big_n {
                for len in 1..=big_n - start {
                    all.push(RunCol {
                        proc: i,
                        job: j,
                        start,
                        len,
                    });
                }
            }
        }
        all
    } else {
        generate_runs(instance, disc, &pairs, tol)?
    };
    let (mut lp, job_rows, cap_rows) = config_rows(instance, disc);
    for run in &runs {
        let col = run_column(instance, disc, run, &job_rows, &cap_rows);
        lp.add_col(col.cost, col.entries, col.label);
    }
    let sol = lp::solve(&lp, tol)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(Error::Infeasible(
                "no contiguous-run schedule fits the discretized grid".into(),
            ))
        }
        other => return Err(Error::Lp(format!("run LP solve failed: {other:?}"))),
    }
    let mass = runs
        .into_iter()
        .zip(&sol.primal)
        .filter(|(_, &x)| x > 1e-12)
        .map(|(run, &x)| (run, x))
        .collect();
    Ok((sol.objective, mass))
}

/// Column generation pass used only to discover the supporting run set; the
/// pricer minimizes reduced cost exactly per (processor, job) pair by a sweep
/// over all runs with incremental capacity-dual accumulation.
fn generate_runs(
    instance: &SchedulingInstance,
    disc: &Disc,
    pairs: &[(usize, usize)],
    tol: f64,
) -> Result<Vec<RunCol>> {
    let big_n = disc.n_slots;
    let (mut master, job_rows, cap_rows) = config_rows(instance, disc);
    // Seed: full-window runs plus artificial coverage columns that price any
    // real cover out of the basis.
    let mut seeds = Vec::new();
    for &(i, j) in pairs {
        seeds.push(RunCol {
            proc: i,
            job: j,
            start: 0,
            len: big_n,
        });
    }
    for run in &seeds {
        let col = run_column(instance, disc, run, &job_rows, &cap_rows);
        master.add_col(col.cost, col.entries, col.label);
    }
    let scale: f64 = (0..instance.n_jobs())
        .map(|j| {
            (0..instance.n_procs())
                .filter(|&i| instance.jobs[j][i].work.is_some())
                .map(|i| disc.energy_const(instance, i, j, 1))
                .fold(0.0, f64::max)
        })
        .sum();
    let big_m = 10.0 * (scale + 1.0);
    for (j, &row) in job_rows.iter().enumerate() {
        master.add_col(big_m, vec![(row, 1.0)], format!("art{j}"));
    }

    let mut by_label: HashMap<String, RunCol> = HashMap::new();
    let result = {
        let mut pricer = |duals: &[f64]| -> Vec<Column> {
            let mut cols = Vec::new();
            for &(i, j) in pairs {
                let lambda = duals[job_rows[j]];
                let energy: Vec<f64> = (1..=big_n)
                    .map(|q| disc.energy_const(instance, i, j, q))
                    .collect();
                let n_groups = disc.cap_groups[i].len();
                let mut stamp = vec![usize::MAX; n_groups];
                let mut best: Option<(f64, usize, usize)> = None;
                for start in 0..big_n {
                    let mut dual_sum = 0.0;
                    for end in start..big_n {
                        for &g in disc.groups_of_slot(i, j, end) {
                            if stamp[g] != start {
                                stamp[g] = start;
                                dual_sum += duals[cap_rows[i][g]];
                            }
                        }
                        let q = end - start + 1;
                        let rc = energy[q - 1] - lambda - dual_sum;
                        if best.map_or(true, |(b, _, _)| rc < b) {
                            best = Some((rc, start, q));
                        }
                    }
                }
                if let Some((rc, start, len)) = best {
                    if rc < -tol.max(1e-7) {
                        let run = RunCol {
                            proc: i,
                            job: j,
                            start,
                            len,
                        };
                        let col = run_column(instance, disc, &run, &job_rows, &cap_rows);
                        by_label.insert(col.label.clone(), run);
                        cols.push(col);
                    }
                }
            }
            cols
        };
        lp::column_generation(&master, &mut pricer, tol, MAX_CG_ITERS)?
    };
    if result.solution.status == LpStatus::IterCap {
        return Err(Error::Lp(format!(
            "run column generation hit the iteration cap after {} columns",
            result.generated.len()
        )));
    }
    let mut runs = seeds;
    for label in &result.generated {
        runs.push(by_label[label].clone());
    }
    Ok(runs)
}

/// One executed piece of the final non-preemptive schedule, in absolute time.
#[derive(Debug, Clone)]
pub struct SinglePiece {
    pub job: usize,
    pub start: Rat,
    pub end: Rat,
    pub speed: f64,
}

/// EDF de-preemption of one trial: per pseudo-processor, jobs run back to
/// back in deadline order (ties: release, then index) with their rounded
/// execution lengths; fails if some job would overrun its clipped deadline.
fn edf_pieces(
    reduced: &SchedulingInstance,
    partition: &IntervalPartition,
    disc: &Disc,
    dist: &ConfigDistribution,
    picks: &[usize],
) -> Option<Vec<SinglePiece>> {
    let m = reduced.n_procs();
    let mut per_proc: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (j, &pick) in picks.iter().enumerate() {
        per_proc[dist.per_job[j][pick].processor].push(j);
    }
    let mut pieces = Vec::new();
    for (p, jobs) in per_proc.iter().enumerate() {
        let mut order = jobs.clone();
        order.sort_by(|&a, &b| {
            let ja = &reduced.jobs[a][p];
            let jb = &reduced.jobs[b][p];
            ja.deadline
                .cmp(&jb.deadline)
                .then_with(|| ja.release.cmp(&jb.release))
                .then(a.cmp(&b))
        });
        let mut t = Rat::zero();
        for &j in &order {
            let jp = &reduced.jobs[j][p];
            let choice = &dist.per_job[j][picks[j]];
            let grid = disc.grids[j][p].as_ref().expect("finite pair");
            let exec = grid.slot_len.clone() * crate::core_types::rat_int(choice.slots.len() as i64);
            let start = t.clone().max(jp.release.clone());
            let end = &start + &exec;
            if end > jp.deadline {
                return None;
            }
            let w = rat_to_f64(jp.work.as_ref().unwrap());
            pieces.push(SinglePiece {
                job: j,
                start: &partition.breakpoints[p] + &start,
                end: &partition.breakpoints[p] + &end,
                speed: w / rat_to_f64(&exec),
            });
            t = end;
        }
    }
    pieces.sort_by(|a, b| a.start.cmp(&b.start));
    Some(pieces)
}

/// Checks that `pieces` is a feasible non-preemptive schedule of the original
/// instance: one piece per job, inside its window, pairwise disjoint, work
/// completed.
pub fn validate_single(instance: &SchedulingInstance, pieces: &[SinglePiece]) -> Vec<String> {
    let mut out = Vec::new();
    let jobs = match single_jobs(instance) {
        Ok(j) => j,
        Err(e) => return vec![e.to_string()],
    };
    let mut count = vec![0usize; jobs.len()];
    for (k, piece) in pieces.iter().enumerate() {
        let (r, d, w) = &jobs[piece.job];
        count[piece.job] += 1;
        if &piece.start < r || &piece.end > d {
            out.push(format!(
                "piece {k}: job {} outside its window",
                piece.job
            ));
        }
        if piece.end <= piece.start {
            out.push(format!("piece {k}: empty execution"));
        }
        let done = piece.speed * rat_to_f64(&(&piece.end - &piece.start));
        if (done - rat_to_f64(w)).abs() > 1e-6 * rat_to_f64(w).max(1.0) {
            out.push(format!("piece {k}: executes {done} of {w} work"));
        }
        if k > 0 && pieces[k - 1].end > piece.start {
            out.push(format!("piece {k}: overlaps the previous piece"));
        }
    }
    for (j, &c) in count.iter().enumerate() {
        if c != 1 {
            out.push(format!("job {j}: {c} pieces (want exactly one)"));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct SingleReport {
    pub lp_value: f64,
    /// Preemptive-realization energy per trial (rounding analysis target).
    pub trial_energies: Vec<f64>,
    pub mean_energy: f64,
    /// Energy of the best feasibly de-preempted trial.
    pub best_energy: f64,
    pub best_trial: usize,
    pub feasible_trials: usize,
    pub bell_alpha: f64,
    pub guarantee_factor: Option<f64>,
}

#[derive(Debug)]
pub struct SingleOutcome {
    pub partition: IntervalPartition,
    pub reduced: SchedulingInstance,
    pub pieces: Vec<SinglePiece>,
    pub report: SingleReport,
}

pub fn solve_single(
    instance: &SchedulingInstance,
    eps: &Rat,
    seed: u64,
    trials: usize,
) -> Result<SingleOutcome> {
    assert!(trials > 0);
    let partition = interval_partition(instance)?;
    let reduced = reduce(instance, &partition)?;
    let disc = discretize_instance(&reduced, eps)?;
    let (lp_value, mass) = solve_run_lp(&reduced, &disc, lp::DEFAULT_TOL)?;

    let mut per_job: Vec<Vec<ConfigChoice>> = vec![Vec::new(); instance.n_jobs()];
    for (run, x) in &mass {
        per_job[run.job].push(ConfigChoice {
            processor: run.proc,
            slots: (run.start..run.start + run.len).collect(),
            prob: *x,
            energy: disc.energy_const(&reduced, run.proc, run.job, run.len),
        });
    }
    for (j, choices) in per_job.iter_mut().enumerate() {
        let total: f64 = choices.iter().map(|c| c.prob).sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Lp(format!("job {j}: run mass {total} differs from 1")));
        }
        for c in choices.iter_mut() {
            c.prob /= total;
        }
    }
    let dist = ConfigDistribution { per_job };

    let alphas: Vec<f64> = reduced.processors.iter().map(|p| p.alpha).collect();
    struct Trial {
        energy: f64,
        nonpre: Option<(f64, Vec<SinglePiece>)>,
    }
    let outcomes: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let picks = round(&dist, seed, t as u64);
            let sched = assemble_schedule(&reduced, &disc, &dist, &picks);
            let energy = sched.energy(&alphas).0;
            let nonpre = edf_pieces(&reduced, &partition, &disc, &dist, &picks).map(|pieces| {
                let e = pieces
                    .iter()
                    .map(|p| p.speed.powf(alphas[0]) * rat_to_f64(&(&p.end - &p.start)))
                    .sum();
                (e, pieces)
            });
            Trial { energy, nonpre }
        })
        .collect();

    let feasible_trials = outcomes.iter().filter(|t| t.nonpre.is_some()).count();
    let (best_trial, best) = outcomes
        .iter()
        .enumerate()
        .filter_map(|(t, o)| o.nonpre.as_ref().map(|np| (t, np)))
        .min_by(|a, b| a.1 .0.partial_cmp(&b.1 .0).unwrap().then(a.0.cmp(&b.0)))
        .ok_or_else(|| {
            Error::Infeasible(format!(
                "none of {trials} trials de-preempted feasibly; increase trials or refine epsilon"
            ))
        })?;
    let trial_energies: Vec<f64> = outcomes.iter().map(|t| t.energy).collect();
    let mean_energy = trial_energies.iter().sum::<f64>() / trials as f64;
    let alpha = instance.processors[0].alpha;
    let bell_alpha = crate::probability::generalized_bell(alpha, 1e-12)?;
    let n = instance.n_jobs();
    let guarantee_factor = if n > 2 {
        let e = rat_to_f64(eps);
        let f = (1.0 + e / (1.0 - e)) * (1.0 + 2.0 / (n as f64 - 2.0));
        Some(2.0_f64.powf(alpha - 1.0) * f.powf(alpha) * bell_alpha)
    } else {
        None
    };
    Ok(SingleOutcome {
        partition,
        reduced,
        pieces: best.1.clone(),
        report: SingleReport {
            lp_value,
            mean_energy,
            best_energy: best.0,
            best_trial,
            feasible_trials,
            bell_alpha,
            guarantee_factor,
            trial_energies,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_types::{rat, rat_int};

    fn inst(alpha: f64, jobs: &[(i64, i64, i64)]) -> SchedulingInstance {
        SchedulingInstance {
            processors: vec![Processor { id: 0, alpha }],
            jobs: jobs
                .iter()
                .map(|&(r, d, w)| {
                    vec![JobOnProcessor {
                        release: rat_int(r),
                        deadline: rat_int(d),
                        work: Some(rat_int(w)),
                    }]
                })
                .collect(),
        }
    }

    #[test]
    fn one_job_partition() {
        let p = interval_partition(&inst(2.0, &[(0, 1, 1)])).unwrap();
        assert_eq!(p.breakpoints, vec![rat_int(0), rat_int(1)]);
        assert_eq!(p.k, 1);
        assert_eq!(p.class_of, vec![0]);
    }

    #[test]
    fn staggered_pair_partition() {
        let p = interval_partition(&inst(2.0, &[(0, 2, 1), (1, 3, 1)])).unwrap();
        assert_eq!(p.breakpoints, vec![rat_int(0), rat_int(2), rat_int(3)]);
        assert_eq!(p.k, 1);
        assert_eq!(p.class_of, vec![0, 0]);
    }

    #[test]
    fn laminar_partition_hand_trace() {
        // Deadlines 2 < 4 < 6; second class opens at releases > 2.
        let p = interval_partition(&inst(2.0, &[(0, 2, 1), (1, 4, 1), (3, 6, 1), (3, 4, 1)]))
            .unwrap();
        assert_eq!(
            p.breakpoints,
            vec![rat_int(0), rat_int(2), rat_int(4), rat_int(6)]
        );
        assert_eq!(p.k, 2);
        assert_eq!(p.class_of, vec![0, 0, 1, 1]);
    }

    #[test]
    fn reduce_clips_windows() {
        let instance = inst(2.0, &[(0, 3, 1), (1, 2, 1)]);
        let p = IntervalPartition {
            breakpoints: vec![rat_int(0), rat_int(2), rat_int(3)],
            class_of: vec![0, 0],
            k: 1,
        };
        let red = reduce(&instance, &p).unwrap();
        assert_eq!(red.n_procs(), 2);
        // Job (0,3]: full first interval, then (0,1] on the second.
        assert_eq!(red.jobs[0][0].release, rat_int(0));
        assert_eq!(red.jobs[0][0].deadline, rat_int(2));
        assert_eq!(red.jobs[0][1].release, rat_int(0));
        assert_eq!(red.jobs[0][1].deadline, rat_int(1));
        // Job (1,2]: alive only in the first interval, shifted window (1,2].
        assert_eq!(red.jobs[1][0].release, rat_int(1));
        assert_eq!(red.jobs[1][0].deadline, rat_int(2));
        assert!(red.jobs[1][1].is_infinite());
    }

    #[test]
    fn clipped_window_nonempty_iff_alive() {
        let mut rng = crate::rng::StreamRng::new(41, 0);
        for _ in 0..30 {
            let jobs: Vec<(i64, i64, i64)> = (0..3)
                .map(|_| {
                    let r = rng.next_below(4) as i64;
                    (r, r + 1 + rng.next_below(4) as i64, 1)
                })
                .collect();
            let instance = inst(2.0, &jobs);
            let p = interval_partition(&instance).unwrap();
            let red = reduce(&instance, &p).unwrap();
            for (j, &(r, d, _)) in jobs.iter().enumerate() {
                for q in 0..p.n_intervals() {
                    let (a, b) = p.interval(q);
                    let alive = &rat_int(r) < b && &rat_int(d) > a;
                    let jp = &red.jobs[j][q];
                    assert_eq!(!jp.is_infinite(), alive);
                    if alive {
                        assert!(jp.release < jp.deadline);
                        assert!(jp.release >= rat_int(0) && &jp.deadline <= &(b - a));
                        // The clipped window has release 0 or full deadline.
                        assert!(
                            jp.release == rat_int(0) || jp.deadline == b - a,
                            "job {j} interval {q}: {jp:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn one_job_full_speed_piece() {
        let instance = inst(2.0, &[(0, 1, 2)]);
        let out = solve_single(&instance, &rat(1, 4), 7, 5).unwrap();
        assert!((out.report.lp_value - 4.0).abs() < 1e-6);
        assert!((out.report.best_energy - 4.0).abs() < 1e-6);
        assert_eq!(out.pieces.len(), 1);
        assert!((out.pieces[0].speed - 2.0).abs() < 1e-9);
        assert!(validate_single(&instance, &out.pieces).is_empty());
    }

    #[test]
    fn two_jobs_against_continuous_oracle() {
        let instance = inst(2.0, &[(0, 2, 1), (1, 3, 1)]);
        let out = solve_single(&instance, &rat(1, 4), 11, 50).unwrap();
        let oracle = crate::oracle::continuous_single_processor(&instance).unwrap();
        // Proposition-style sanity: the non-preemptive output brackets the
        // continuous optimum from above, within the interval-split factor.
        assert!(out.report.best_energy >= oracle.optimum - 1e-6);
        assert!(
            out.report.best_energy
                <= 2.0_f64.powf(1.0) * oracle.optimum * 1.1 + 1e-6,
            "best {} oracle {}",
            out.report.best_energy,
            oracle.optimum
        );
        assert!(validate_single(&instance, &out.pieces).is_empty());
    }

    #[test]
    fn best_energy_at_least_lp() {
        let instance = inst(2.5, &[(0, 3, 2), (1, 4, 1), (2, 6, 2)]);
        let out = solve_single(&instance, &rat(1, 4), 3, 50).unwrap();
        assert!(out.report.best_energy >= out.report.lp_value - 1e-6);
        assert!(validate_single(&instance, &out.pieces).is_empty());
    }

    #[test]
    fn random_instances_feasible_nonpreemptive() {
        let mut rng = crate::rng::StreamRng::new(53, 0);
        for trial in 0..20 {
            let n = 1 + rng.next_below(3) as usize;
            let jobs: Vec<(i64, i64, i64)> = (0..n)
                .map(|_| {
                    let r = rng.next_below(4) as i64;
                    (
                        r,
                        r + 1 + rng.next_below(4) as i64,
                        1 + rng.next_below(3) as i64,
                    )
                })
                .collect();
            let instance = inst(2.0, &jobs);
            match solve_single(&instance, &rat(1, 2), trial, 50) {
                Ok(out) => {
                    let v = validate_single(&instance, &out.pieces);
                    assert!(v.is_empty(), "trial {trial}: {v:?} jobs {jobs:?}");
                    assert!(out.report.best_energy >= out.report.lp_value - 1e-6);
                }
                Err(Error::Infeasible(_)) => {}
                Err(e) => panic!("trial {trial}: {e}"),
            }
        }
    }

    #[test]
    fn mean_energy_within_bell_bound() {
        let instance = inst(2.0, &[(0, 4, 2), (1, 5, 2), (2, 6, 1)]);
        let out = solve_single(&instance, &rat(1, 4), 13, 300).unwrap();
        let bell = out.report.bell_alpha;
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
            mean <= bell * out.report.lp_value + 3.0 * stderr,
            "mean {mean} vs bound {}",
            bell * out.report.lp_value
        );
        assert!(out.report.guarantee_factor.is_some());
    }
}
