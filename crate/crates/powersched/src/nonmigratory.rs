//! Non-migratory heterogeneous scheduling: per-job slot grids, the compact LP
//! and its configuration-LP counterpart, randomized rounding, and schedule
//! assembly.
//!
//! The exponential configuration LP is solved through a polynomial compact
//! formulation over per-slot usage variables; an optimal solution is then
//! decomposed into an equivalent distribution over configurations (subsets of
//! slots) per job. The fully enumerated configuration LP is kept as a test
//! oracle for small grids.

use crate::core_types::{rat_to_f64, Rat, SchedulingInstance};
use crate::discretize::{job_slots, merge_intervals, AtomicIntervalSet, SlotGrid};
use crate::lp::{self, LinearProgram, LpSolution, LpStatus, Relation};
use crate::rng::StreamRng;
use crate::schedule::{AtomPiece, Schedule};
use crate::{Error, Result};
use rayon::prelude::*;
use std::collections::HashMap;

/// Capacity group: the atoms of one processor sharing an identical set of
/// covering job slots, so they induce identical LP rows.
#[derive(Debug, Clone)]
pub struct CapGroup {
    pub atoms: Vec<usize>,
    /// Covering slots as (job, slot index) pairs.
    pub slots: Vec<(usize, usize)>,
}

impl CapGroup {
    pub fn shared(&self) -> bool {
        let first = self.slots.first().map(|(j, _)| *j);
        self.slots.iter().any(|(j, _)| Some(*j) != first)
    }
}

/// Shared discretization of an instance: per-pair slot grids, per-processor
/// atoms, and the deduplicated capacity groups.
#[derive(Debug, Clone)]
pub struct Disc {
    pub eps: Rat,
    pub n_slots: usize,
    pub grids: Vec<Vec<Option<SlotGrid>>>, // [j][i]
    pub atoms: Vec<AtomicIntervalSet>,     // [i]
    pub cap_groups: Vec<Vec<CapGroup>>,    // [i]
    slot_to_groups: Vec<HashMap<(usize, usize), Vec<usize>>>, // [i]: (j,t) -> group ids
}

impl Disc {
    pub fn groups_of_slot(&self, i: usize, j: usize, t: usize) -> &[usize] {
        self.slot_to_groups[i]
            .get(&(j, t))
            .map_or(&[], |v| v.as_slice())
    }

    /// Exact execution speed of job j on processor i when spread over q slots.
    pub fn exact_speed(&self, instance: &SchedulingInstance, i: usize, j: usize, q: usize) -> Rat {
        let grid = self.grids[j][i].as_ref().expect("finite pair");
        let w = instance.jobs[j][i].work.clone().expect("finite pair");
        w / (grid.slot_len.clone() * crate::core_types::rat_int(q as i64))
    }

    /// Energy of executing job j entirely on processor i over q slots.
    pub fn energy_const(&self, instance: &SchedulingInstance, i: usize, j: usize, q: usize) -> f64 {
        let grid = self.grids[j][i].as_ref().expect("finite pair");
        let alpha = instance.processors[i].alpha;
        let w = rat_to_f64(instance.jobs[j][i].work.as_ref().expect("finite pair"));
        let p = q as f64 * rat_to_f64(&grid.slot_len);
        w.powf(alpha) / p.powf(alpha - 1.0)
    }
}

pub fn discretize_instance(instance: &SchedulingInstance, eps: &Rat) -> Result<Disc> {
    let n = instance.n_jobs();
    let m = instance.n_procs();
    if n == 0 || m == 0 {
        return Err(Error::InvalidInstance("no jobs or processors".into()));
    }
    let mut grids: Vec<Vec<Option<SlotGrid>>> = vec![vec![None; m]; n];
    let mut n_slots = 0;
    for j in 0..n {
        for i in 0..m {
            if !instance.jobs[j][i].is_infinite() {
                let g = job_slots(instance, i, j, eps)?;
                n_slots = g.n_slots;
                grids[j][i] = Some(g);
            }
        }
    }
    if n_slots == 0 {
        return Err(Error::InvalidInstance("no job can run anywhere".into()));
    }
    let mut atoms = Vec::with_capacity(m);
    let mut cap_groups = Vec::with_capacity(m);
    let mut slot_to_groups = Vec::with_capacity(m);
    for i in 0..m {
        let proc_grids: Vec<SlotGrid> = (0..n)
            .filter_map(|j| grids[j][i].clone())
            .collect();
        let aset = merge_intervals(&proc_grids);
        // Covering slots per atom.
        let mut cover: Vec<Vec<(usize, usize)>> = vec![Vec::new(); aset.n_atoms()];
        for j in 0..n {
            if let Some(g) = &grids[j][i] {
                for t in 0..g.n_slots {
                    let (a, b) = g.slot(t);
                    let range = aset
                        .atoms_covering(&a, &b)
                        .expect("slots align with atoms");
                    for p in range {
                        cover[p].push((j, t));
                    }
                }
            }
        }
        let mut groups: Vec<CapGroup> = Vec::new();
        let mut by_sig: HashMap<Vec<(usize, usize)>, usize> = HashMap::new();
        for (p, sig) in cover.iter().enumerate() {
            if sig.is_empty() {
                continue;
            }
            let gid = *by_sig.entry(sig.clone()).or_insert_with(|| {
                groups.push(CapGroup {
                    atoms: Vec::new(),
                    slots: sig.clone(),
                });
                groups.len() - 1
            });
            groups[gid].atoms.push(p);
        }
        let mut lookup: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (gid, g) in groups.iter().enumerate() {
            for &(j, t) in &g.slots {
                lookup.entry((j, t)).or_default().push(gid);
            }
        }
        atoms.push(aset);
        cap_groups.push(groups);
        slot_to_groups.push(lookup);
    }
    Ok(Disc {
        eps: eps.clone(),
        n_slots,
        grids,
        atoms,
        cap_groups,
        slot_to_groups,
    })
}

/// Column index bookkeeping for the compact LP: the y block (slot-count
/// choices, pair-major), then one total-mass column per finite
/// (processor, job) pair, then the per-slot usage block.
#[derive(Debug)]
pub struct CompactVarIndex {
    pub disc: Disc,
    /// y columns in declaration order: (processor, job, q).
    pub y_cols: Vec<(usize, usize, usize)>,
    /// Total-mass columns: (processor, job).
    pub m_cols: Vec<(usize, usize)>,
    /// z columns: (processor, job, slot).
    pub z_cols: Vec<(usize, usize, usize)>,
}

impl CompactVarIndex {
    pub fn y_value(&self, sol: &LpSolution, i: usize, j: usize, q: usize) -> f64 {
        let pos = self
            .y_cols
            .iter()
            .position(|&v| v == (i, j, q))
            .expect("indexed y variable");
        sol.primal[pos]
    }

    fn pair_mass(&self, sol: &LpSolution, pair: usize) -> f64 {
        sol.primal[self.y_cols.len() + pair]
    }

    fn z_value(&self, sol: &LpSolution, pair: usize, t: usize) -> f64 {
        sol.primal[self.y_cols.len() + self.m_cols.len() + pair * self.disc.n_slots + t]
    }
}

/// The compact formulation. Per finite (processor, job) pair it carries a
/// slot-count distribution y, a total assignment mass, and per-slot usage
/// variables z, tied together by
///
/// ```text
/// sum_q y_q = mass      sum_t z_t = sum_q q * y_q      z_t <= mass
/// ```
///
/// plus one assignment row per job and one capacity row per capacity group.
pub fn build_compact_lp(
    instance: &SchedulingInstance,
    eps: &Rat,
) -> Result<(LinearProgram, CompactVarIndex)> {
    let disc = discretize_instance(instance, eps)?;
    build_compact_from(instance, disc)
}

pub fn build_compact_from(
    instance: &SchedulingInstance,
    disc: Disc,
) -> Result<(LinearProgram, CompactVarIndex)> {
    let n = instance.n_jobs();
    let big_n = disc.n_slots;
    let pairs = instance.finite_pairs();
    let mut lp = LinearProgram::new();
    let job_rows: Vec<usize> = (0..n)
        .map(|j| lp.add_row(Relation::Eq, 1.0, format!("job{j}")))
        .collect();
    let mut mass_rows = Vec::new();
    let mut link_rows = Vec::new();
    let mut bound_rows: Vec<Vec<usize>> = Vec::new();
    for &(i, j) in &pairs {
        mass_rows.push(lp.add_row(Relation::Eq, 0.0, format!("mass_i{i}_j{j}")));
        link_rows.push(lp.add_row(Relation::Eq, 0.0, format!("link_i{i}_j{j}")));
        bound_rows.push(
            (0..big_n)
                .map(|t| lp.add_row(Relation::Le, 0.0, format!("zcap_i{i}_j{j}_t{t}")))
                .collect(),
        );
    }
    let mut cap_rows: Vec<Vec<usize>> = Vec::new();
    for (i, groups) in disc.cap_groups.iter().enumerate() {
        cap_rows.push(
            (0..groups.len())
                .map(|g| lp.add_row(Relation::Le, 1.0, format!("cap_i{i}_g{g}")))
                .collect(),
        );
    }
    let mut y_cols = Vec::new();
    let mut m_cols = Vec::new();
    let mut z_cols = Vec::new();
    for (p, &(i, j)) in pairs.iter().enumerate() {
        for q in 1..=big_n {
            lp.add_col(
                disc.energy_const(instance, i, j, q),
                vec![
                    (job_rows[j], 1.0),
                    (mass_rows[p], -1.0),
                    (link_rows[p], -(q as f64)),
                ],
                format!("y_i{i}_j{j}_q{q}"),
            );
            y_cols.push((i, j, q));
        }
    }
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let mut entries = vec![(mass_rows[p], 1.0)];
        for t in 0..big_n {
            entries.push((bound_rows[p][t], -1.0));
        }
        lp.add_col(0.0, entries, format!("m_i{i}_j{j}"));
        m_cols.push((i, j));
    }
    for (p, &(i, j)) in pairs.iter().enumerate() {
        for t in 0..big_n {
            let mut entries = vec![(link_rows[p], 1.0), (bound_rows[p][t], 1.0)];
            for &g in disc.groups_of_slot(i, j, t) {
                entries.push((cap_rows[i][g], 1.0));
            }
            lp.add_col(0.0, entries, format!("z_i{i}_j{j}_t{t}"));
            z_cols.push((i, j, t));
        }
    }
    Ok((
        lp,
        CompactVarIndex {
            disc,
            y_cols,
            m_cols,
            z_cols,
        },
    ))
}

/// One configuration in a job's rounding distribution.
#[derive(Debug, Clone)]
pub struct ConfigChoice {
    pub processor: usize,
    /// Slot indices of the job's grid on that processor, sorted.
    pub slots: Vec<usize>,
    pub prob: f64,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct ConfigDistribution {
    pub per_job: Vec<Vec<ConfigChoice>>,
}

impl ConfigDistribution {
    /// Invariant check: per-job probabilities sum to one and no capacity group
    /// carries expected load above one.
    pub fn validate(&self, disc: &Disc) -> Vec<String> {
        let mut out = Vec::new();
        let mut load: Vec<Vec<f64>> = disc
            .cap_groups
            .iter()
            .map(|g| vec![0.0; g.len()])
            .collect();
        for (j, choices) in self.per_job.iter().enumerate() {
            let total: f64 = choices.iter().map(|c| c.prob).sum();
            if (total - 1.0).abs() > 1e-6 {
                out.push(format!("job {j}: probabilities sum to {total}"));
            }
            for c in choices {
                for &t in &c.slots {
                    for &g in disc.groups_of_slot(c.processor, j, t) {
                        load[c.processor][g] += c.prob;
                    }
                }
            }
        }
        for (i, per_group) in load.iter().enumerate() {
            for (g, l) in per_group.iter().enumerate() {
                if *l > 1.0 + 1e-6 {
                    out.push(format!("processor {i} group {g}: expected load {l}"));
                }
            }
        }
        out
    }
}

/// Turns an optimal compact solution into an equivalent configuration
/// distribution.
///
/// The per-configuration energy is convex in the slot count, so per pair the
/// slot-count distribution may be assumed supported on two adjacent counts
/// {a, a+1} with unchanged mass and expected count. The per-slot usage is laid
/// out as a staircase over a+1 positions of height `mass` (a virtual filler
/// slot tops off the last position) and decomposed into perfect matchings,
/// each of which is one configuration.
pub fn extract_configurations(
    sol: &LpSolution,
    index: &CompactVarIndex,
    instance: &SchedulingInstance,
) -> Result<ConfigDistribution> {
    let n = instance.n_jobs();
    let big_n = index.disc.n_slots;
    let tol = 1e-9;
    let mut per_job: Vec<Vec<ConfigChoice>> = vec![Vec::new(); n];
    for (p, &(i, j)) in index.m_cols.iter().enumerate() {
        let y = index.pair_mass(sol, p);
        if y <= 1e-7 {
            continue;
        }
        let z: Vec<f64> = (0..big_n)
            .map(|t| index.z_value(sol, p, t).clamp(0.0, y))
            .collect();
        let total: f64 = z.iter().sum();
        let a = ((total / y).floor() as usize).clamp(1, big_n);
        let filler = ((a + 1) as f64 * y - total).clamp(0.0, y);
        let width = a + 1;
        // Staircase: walk the slots in order (the filler last), pouring each
        // mass into position k up to level y before moving to k + 1.
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        let mut k = 0usize;
        let mut room = y;
        for (t, mass) in z.iter().copied().chain(std::iter::once(filler)).enumerate() {
            let mut rem = mass;
            while rem > tol {
                let take = if k + 1 == width { rem } else { rem.min(room) };
                edges.push((k, t, take));
                rem -= take;
                room -= take;
                if room <= tol && k + 1 < width {
                    k += 1;
                    room = y;
                }
            }
        }
        let matchings = lp::perfect_matching_decomposition(width, big_n + 1, &edges, 1e-6)?;
        for (pairs, lambda) in matchings {
            if lambda <= 1e-9 {
                continue;
            }
            let mut slots: Vec<usize> = pairs
                .into_iter()
                .map(|(_, t)| t)
                .filter(|&t| t < big_n)
                .collect();
            slots.sort_unstable();
            if slots.is_empty() {
                continue;
            }
            let energy = index.disc.energy_const(instance, i, j, slots.len());
            per_job[j].push(ConfigChoice {
                processor: i,
                slots,
                prob: lambda,
                energy,
            });
        }
    }
    // Normalize away solver noise.
    for choices in &mut per_job {
        let total: f64 = choices.iter().map(|c| c.prob).sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Lp(format!(
                "configuration mass {total} differs from 1"
            )));
        }
        for c in choices.iter_mut() {
            c.prob /= total;
        }
    }
    Ok(ConfigDistribution { per_job })
}

/// The exponential configuration LP with every column materialized.
/// Only viable when the slot count is tiny; used for equivalence checks.
pub fn enumerate_config_lp(
    instance: &SchedulingInstance,
    disc: &Disc,
) -> Result<LinearProgram> {
    let big_n = disc.n_slots;
    if big_n > 16 {
        return Err(Error::OracleLimit(format!(
            "full enumeration needs 2^{big_n} configurations per pair"
        )));
    }
    let mut lp = LinearProgram::new();
    let n = instance.n_jobs();
    let job_rows: Vec<usize> = (0..n)
        .map(|j| lp.add_row(Relation::Eq, 1.0, format!("job{j}")))
        .collect();
    let mut cap_rows: Vec<Vec<usize>> = Vec::new();
    for (i, groups) in disc.cap_groups.iter().enumerate() {
        cap_rows.push(
            (0..groups.len())
                .map(|g| lp.add_row(Relation::Le, 1.0, format!("cap_i{i}_g{g}")))
                .collect(),
        );
    }
    for (i, j) in instance.finite_pairs() {
        for mask in 1u32..1 << big_n {
            let slots: Vec<usize> = (0..big_n).filter(|t| mask >> t & 1 == 1).collect();
            let q = slots.len();
            let mut entries = vec![(job_rows[j], 1.0)];
            let mut groups: Vec<usize> = slots
                .iter()
                .flat_map(|&t| disc.groups_of_slot(i, j, t).iter().copied())
                .collect();
            groups.sort_unstable();
            groups.dedup();
            for g in groups {
                entries.push((cap_rows[i][g], 1.0));
            }
            lp.add_col(
                disc.energy_const(instance, i, j, q),
                entries,
                format!("x_i{i}_j{j}_m{mask}"),
            );
        }
    }
    Ok(lp)
}

/// Solves the configuration LP through its compact formulation and extracts
/// an equivalent distribution over configurations.
pub fn solve_config_lp(
    instance: &SchedulingInstance,
    disc: &Disc,
) -> Result<(f64, ConfigDistribution)> {
    let (lp, index) = build_compact_from(instance, disc.clone())?;
    let sol = lp::solve(&lp, lp::DEFAULT_TOL)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(Error::Infeasible(
                "no fractional schedule fits the discretized grid".into(),
            ))
        }
        other => return Err(Error::Lp(format!("compact LP solve failed: {other:?}"))),
    }
    let dist = extract_configurations(&sol, &index, instance)?;
    Ok((sol.objective, dist))
}

/// One independent categorical draw per job; deterministic for a fixed
/// (seed, trial) pair via the derived stream id `trial << 32 | job`.
pub fn round(dist: &ConfigDistribution, seed: u64, trial: u64) -> Vec<usize> {
    dist.per_job
        .iter()
        .enumerate()
        .map(|(j, choices)| {
            let mut rng = StreamRng::new(seed, (trial << 32) | j as u64);
            let weights: Vec<f64> = choices.iter().map(|c| c.prob).collect();
            rng.categorical(&weights)
        })
        .collect()
}

/// Builds the concrete schedule for one realization: per atomic interval the
/// speed is the summed work over the interval length.
pub fn assemble_schedule(
    instance: &SchedulingInstance,
    disc: &Disc,
    dist: &ConfigDistribution,
    picks: &[usize],
) -> Schedule {
    let m = instance.n_procs();
    let mut processors: Vec<Vec<AtomPiece>> = Vec::with_capacity(m);
    for i in 0..m {
        let aset = &disc.atoms[i];
        let mut work: Vec<Vec<(usize, Rat)>> = vec![Vec::new(); aset.n_atoms()];
        for (j, &pick) in picks.iter().enumerate() {
            let choice = &dist.per_job[j][pick];
            if choice.processor != i {
                continue;
            }
            let speed = disc.exact_speed(instance, i, j, choice.slots.len());
            let grid = disc.grids[j][i].as_ref().unwrap();
            for &t in &choice.slots {
                let (a, b) = grid.slot(t);
                for p in aset.atoms_covering(&a, &b).unwrap() {
                    work[p].push((j, &speed * aset.atom_len(p)));
                }
            }
        }
        let pieces = work
            .into_iter()
            .enumerate()
            .filter(|(_, jobs)| !jobs.is_empty())
            .map(|(p, jobs)| AtomPiece {
                start: aset.boundaries[p].clone(),
                end: aset.boundaries[p + 1].clone(),
                jobs,
            })
            .collect();
        processors.push(pieces);
    }
    Schedule { processors }
}

#[derive(Debug, Clone)]
pub struct RoundingReport {
    pub lp_value: f64,
    pub trial_energies: Vec<f64>,
    pub mean_energy: f64,
    pub best_energy: f64,
    pub best_trial: usize,
    pub ratio_best: f64,
    pub ratio_mean: f64,
    /// Worst-case factor vs the continuous optimum; undefined for n <= 2.
    pub guarantee_factor: Option<f64>,
    pub bell_alpha: f64,
}

#[derive(Debug)]
pub struct NonMigOutcome {
    pub disc: Disc,
    pub distribution: ConfigDistribution,
    pub schedule: Schedule,
    pub report: RoundingReport,
}

pub fn solve_and_round(
    instance: &SchedulingInstance,
    eps: &Rat,
    seed: u64,
    trials: usize,
) -> Result<NonMigOutcome> {
    assert!(trials > 0);
    let disc = discretize_instance(instance, eps)?;
    let (lp_value, dist) = solve_config_lp(instance, &disc)?;
    let alphas: Vec<f64> = instance.processors.iter().map(|p| p.alpha).collect();
    let energies: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let picks = round(&dist, seed, t as u64);
            let sched = assemble_schedule(instance, &disc, &dist, &picks);
            sched.energy(&alphas).0
        })
        .collect();
    let (best_trial, &best_energy) = energies
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(a.0.cmp(&b.0)))
        .unwrap();
    let picks = round(&dist, seed, best_trial as u64);
    let schedule = assemble_schedule(instance, &disc, &dist, &picks);
    let mean_energy = energies.iter().sum::<f64>() / energies.len() as f64;
    let alpha_max = alphas.iter().cloned().fold(1.0_f64, f64::max);
    let bell_alpha = crate::probability::generalized_bell(alpha_max, 1e-12)?;
    let n = instance.n_jobs();
    let guarantee_factor = if n > 2 {
        let e = rat_to_f64(eps);
        let f = (1.0 + e / (1.0 - e)) * (1.0 + 2.0 / (n as f64 - 2.0));
        Some(f.powf(alpha_max) * bell_alpha)
    } else {
        None
    };
    Ok(NonMigOutcome {
        disc,
        distribution: dist,
        schedule,
        report: RoundingReport {
            lp_value,
            mean_energy,
            best_energy,
            best_trial,
            ratio_best: best_energy / lp_value,
            ratio_mean: mean_energy / lp_value,
            guarantee_factor,
            bell_alpha,
            trial_energies: energies,
        },
    })
}
