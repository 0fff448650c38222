//! Time- and speed-grid constructions shared by the solvers.
//!
//! All time grids are exact rationals; floats appear only in the speed grid,
//! whose values feed LP costs directly.

use crate::core_types::{rat_int, rat_to_f64, JobShopInstance, Rat, SchedulingInstance};
use crate::{Error, Result};
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Default grid granularity used by the CLI and the solvers.
pub fn default_epsilon() -> Rat {
    crate::core_types::rat(1, 4)
}

/// Uniform slot grid over the half-open window `(start, end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotGrid {
    pub start: Rat,
    pub end: Rat,
    pub slot_len: Rat,
    pub n_slots: usize,
}

impl SlotGrid {
    pub fn new(start: Rat, end: Rat, n_slots: usize) -> Self {
        assert!(n_slots > 0 && end > start);
        let slot_len = (&end - &start) / rat_int(n_slots as i64);
        SlotGrid {
            start,
            end,
            slot_len,
            n_slots,
        }
    }

    pub fn boundary(&self, k: usize) -> Rat {
        debug_assert!(k <= self.n_slots);
        &self.start + &self.slot_len * rat_int(k as i64)
    }

    pub fn boundaries(&self) -> Vec<Rat> {
        (0..=self.n_slots).map(|k| self.boundary(k)).collect()
    }

    /// The k-th slot, 0-based, as a half-open `(a, b]` pair.
    pub fn slot(&self, k: usize) -> (Rat, Rat) {
        (self.boundary(k), self.boundary(k + 1))
    }
}

fn rat_ceil_to_usize(x: &Rat) -> usize {
    x.ceil().to_integer().to_usize().expect("grid size overflow")
}

fn check_epsilon(epsilon: &Rat) -> Result<()> {
    if epsilon <= &Rat::zero() || epsilon >= &Rat::one() {
        return Err(Error::Domain(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(())
}

fn check_integer(label: &str, v: &Rat) -> Result<()> {
    if !v.is_integer() {
        return Err(Error::Domain(format!("{label} must be an integer, got {v}")));
    }
    Ok(())
}

/// Slot grid for job `j` on processor `i`: the window is cut into
/// `ceil(n^3 / eps)` equal slots.
pub fn job_slots(
    instance: &SchedulingInstance,
    i: usize,
    j: usize,
    epsilon: &Rat,
) -> Result<SlotGrid> {
    check_epsilon(epsilon)?;
    let jp = &instance.jobs[j][i];
    if jp.is_infinite() {
        return Err(Error::Domain(format!(
            "job {j} cannot run on processor {i}"
        )));
    }
    check_integer("release", &jp.release)?;
    check_integer("deadline", &jp.deadline)?;
    let n = instance.n_jobs() as i64;
    let n_slots = rat_ceil_to_usize(&(rat_int(n * n * n) / epsilon));
    Ok(SlotGrid::new(jp.release.clone(), jp.deadline.clone(), n_slots))
}

/// Atomic intervals of one processor: the merged, deduplicated boundary union
/// of every slot grid alive there. Atom `p` is `(boundaries[p], boundaries[p+1]]`.
#[derive(Debug, Clone, Default)]
pub struct AtomicIntervalSet {
    pub boundaries: Vec<Rat>,
}

impl AtomicIntervalSet {
    pub fn n_atoms(&self) -> usize {
        self.boundaries.len().saturating_sub(1)
    }

    pub fn atom(&self, p: usize) -> (&Rat, &Rat) {
        (&self.boundaries[p], &self.boundaries[p + 1])
    }

    pub fn atom_len(&self, p: usize) -> Rat {
        &self.boundaries[p + 1] - &self.boundaries[p]
    }

    fn boundary_index(&self, t: &Rat) -> Option<usize> {
        self.boundaries.binary_search(t).ok()
    }

    /// Indices of the atoms whose union is exactly `(start, end]`.
    /// Returns `None` when the endpoints are not grid boundaries.
    pub fn atoms_covering(&self, start: &Rat, end: &Rat) -> Option<std::ops::Range<usize>> {
        let lo = self.boundary_index(start)?;
        let hi = self.boundary_index(end)?;
        (lo < hi).then_some(lo..hi)
    }
}

pub fn merge_intervals(grids: &[SlotGrid]) -> AtomicIntervalSet {
    let mut boundaries: Vec<Rat> = grids.iter().flat_map(|g| g.boundaries()).collect();
    boundaries.sort();
    boundaries.dedup();
    AtomicIntervalSet { boundaries }
}

/// Geometric speed grid `(1+delta)^k * s_lb`, k >= 1, up to the first value
/// at or above `s_ub`.
#[derive(Debug, Clone)]
pub struct SpeedGrid {
    pub s_lb: f64,
    pub s_ub: f64,
    pub delta: f64,
    pub speeds: Vec<f64>,
}

/// Window-sum policy for the lower speed bound: whether a job's window on a
/// processor it cannot run on still counts toward its density denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowPolicy {
    #[default]
    FiniteWorkOnly,
    AllWindows,
}

pub fn speed_grid(
    instance: &SchedulingInstance,
    delta: f64,
    policy: WindowPolicy,
) -> Result<SpeedGrid> {
    if delta <= 0.0 {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    let mut s_lb = f64::INFINITY;
    for j in 0..instance.n_jobs() {
        let mut min_work: Option<Rat> = None;
        let mut window_sum = Rat::zero();
        for jp in &instance.jobs[j] {
            let include = match policy {
                WindowPolicy::FiniteWorkOnly => !jp.is_infinite(),
                WindowPolicy::AllWindows => true,
            };
            if include && jp.window_len().is_positive() {
                window_sum += jp.window_len();
            }
            if let Some(w) = &jp.work {
                if min_work.as_ref().map_or(true, |m| w < m) {
                    min_work = Some(w.clone());
                }
            }
        }
        if let Some(w) = min_work {
            if window_sum.is_positive() {
                s_lb = s_lb.min(rat_to_f64(&w) / rat_to_f64(&window_sum));
            }
        }
    }
    let mut s_ub = 0.0_f64;
    for i in 0..instance.n_procs() {
        let mut work_sum = Rat::zero();
        let mut min_window: Option<Rat> = None;
        for j in 0..instance.n_jobs() {
            let jp = &instance.jobs[j][i];
            if let Some(w) = &jp.work {
                work_sum += w;
                let len = jp.window_len();
                if min_window.as_ref().map_or(true, |m| &len < m) {
                    min_window = Some(len);
                }
            }
        }
        if let Some(mw) = min_window {
            if mw.is_positive() {
                s_ub = s_ub.max(rat_to_f64(&work_sum) / rat_to_f64(&mw));
            }
        }
    }
    if !s_lb.is_finite() || s_ub <= 0.0 {
        return Err(Error::Domain(
            "speed grid needs at least one finite-work job with a non-empty window".into(),
        ));
    }
    let mut speeds = Vec::new();
    let mut v = s_lb;
    loop {
        v *= 1.0 + delta;
        speeds.push(v);
        if v >= s_ub {
            break;
        }
    }
    Ok(SpeedGrid {
        s_lb,
        s_ub,
        delta,
        speeds,
    })
}

/// A candidate execution window `(b, c]` for one operation, with its inner
/// slot grid.
#[derive(Debug, Clone)]
pub struct CandidateWindow {
    pub b: Rat,
    pub c: Rat,
    pub grid: SlotGrid,
}

#[derive(Debug, Clone)]
pub struct JobShopGrids {
    /// Global landmark times from all operation releases and deadlines.
    pub landmarks: Vec<Rat>,
    /// Coarse grid per landmark interval `(landmarks[l], landmarks[l+1]]`.
    pub coarse: Vec<SlotGrid>,
    /// Candidate windows indexed `[job][op]`.
    pub windows: Vec<Vec<Vec<CandidateWindow>>>,
    /// Merged inner-boundary atoms per processor.
    pub atoms: Vec<AtomicIntervalSet>,
    /// Operations whose candidate list was truncated to the cap.
    pub capped_ops: Vec<(usize, usize)>,
}

pub const DEFAULT_MAX_WINDOWS_PER_OP: usize = 200;

/// Grid construction for the job shop solver: a coarse per-interval grid whose
/// points serve as candidate window endpoints, and a fine inner grid per
/// candidate window.
pub fn jobshop_grids(
    instance: &JobShopInstance,
    epsilon: &Rat,
    max_windows_per_op: usize,
) -> Result<JobShopGrids> {
    check_epsilon(epsilon)?;
    let mu = instance.mu();
    if mu == 0 {
        return Err(Error::Domain("instance has no operations".into()));
    }
    let mut landmarks: Vec<Rat> = Vec::new();
    for chain in &instance.jobs {
        for op in chain {
            check_integer("release", &op.release)?;
            check_integer("deadline", &op.deadline)?;
            landmarks.push(op.release.clone());
            landmarks.push(op.deadline.clone());
        }
    }
    landmarks.sort();
    landmarks.dedup();

    // Coarse step eps/(mu(1+eps)) * |I_l|  =>  ceil(mu(1+eps)/eps) slots.
    let coarse_slots = rat_ceil_to_usize(
        &(rat_int(mu as i64) * (Rat::one() + epsilon) / epsilon),
    );
    let coarse: Vec<SlotGrid> = landmarks
        .windows(2)
        .map(|w| SlotGrid::new(w[0].clone(), w[1].clone(), coarse_slots))
        .collect();
    let mut coarse_points: Vec<Rat> = coarse.iter().flat_map(|g| g.boundaries()).collect();
    coarse_points.sort();
    coarse_points.dedup();

    // Inner grids: ceil(mu^3/eps) slots per candidate window.
    let inner_slots =
        rat_ceil_to_usize(&(rat_int((mu * mu * mu) as i64) / epsilon));

    let mut windows = Vec::with_capacity(instance.jobs.len());
    let mut capped_ops = Vec::new();
    for (j, chain) in instance.jobs.iter().enumerate() {
        let mut per_job = Vec::with_capacity(chain.len());
        for (k, op) in chain.iter().enumerate() {
            let points: Vec<&Rat> = coarse_points
                .iter()
                .filter(|t| **t >= op.release && **t <= op.deadline)
                .collect();
            let mut cands: Vec<(Rat, Rat)> = Vec::new();
            for (bi, b) in points.iter().enumerate() {
                for c in &points[bi + 1..] {
                    cands.push(((*b).clone(), (*c).clone()));
                }
            }
            if cands.is_empty() {
                return Err(Error::Domain(format!(
                    "operation {k} of job {j} has a window too small for the grid"
                )));
            }
            if cands.len() > max_windows_per_op {
                // Keep windows hugging the alive window's extremes: smallest
                // combined endpoint slack, widest-first among ties.
                cands.sort_by(|x, y| {
                    let sx = (&x.0 - &op.release) + (&op.deadline - &x.1);
                    let sy = (&y.0 - &op.release) + (&op.deadline - &y.1);
                    sx.cmp(&sy).then_with(|| x.cmp(y))
                });
                cands.truncate(max_windows_per_op);
                cands.sort();
                capped_ops.push((j, k));
            }
            per_job.push(
                cands
                    .into_iter()
                    .map(|(b, c)| {
                        let grid = SlotGrid::new(b.clone(), c.clone(), inner_slots);
                        CandidateWindow { b, c, grid }
                    })
                    .collect::<Vec<_>>(),
            );
        }
        windows.push(per_job);
    }

    let n_procs = instance.processors.len();
    let mut per_proc_grids: Vec<Vec<SlotGrid>> = vec![Vec::new(); n_procs];
    for (j, chain) in instance.jobs.iter().enumerate() {
        for (k, op) in chain.iter().enumerate() {
            for cw in &windows[j][k] {
                per_proc_grids[op.processor].push(cw.grid.clone());
            }
        }
    }
    let atoms = per_proc_grids
        .iter()
        .map(|g| merge_intervals(g))
        .collect();

    Ok(JobShopGrids {
        landmarks,
        coarse,
        windows,
        atoms,
        capped_ops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_types::{rat, JobOnProcessor, Operation, Processor};

    fn sched_instance(jobs: Vec<Vec<JobOnProcessor>>) -> SchedulingInstance {
        let m = jobs[0].len();
        SchedulingInstance {
            processors: (0..m).map(|id| Processor { id, alpha: 2.0 }).collect(),
            jobs,
        }
    }

    fn jp(r: i64, d: i64, w: i64) -> JobOnProcessor {
        JobOnProcessor {
            release: rat_int(r),
            deadline: rat_int(d),
            work: Some(rat_int(w)),
        }
    }

    #[test]
    fn single_job_two_slots() {
        let inst = sched_instance(vec![vec![jp(0, 1, 1)]]);
        let g = job_slots(&inst, 0, 0, &rat(1, 2)).unwrap();
        assert_eq!(g.n_slots, 2);
        assert_eq!(g.slot_len, rat(1, 2));
        assert_eq!(g.boundaries(), vec![rat_int(0), rat(1, 2), rat_int(1)]);
    }

    #[test]
    fn two_jobs_unit_slots() {
        // n=2 and a slot count of n^3 gives unit slots on a window of length 8.
        let g = SlotGrid::new(rat_int(0), rat_int(8), 8);
        assert_eq!(g.slot_len, rat_int(1));
        assert_eq!(g.boundary(8), rat_int(8));
        // With eps just under 1 the ceiling keeps the count at n^3 = 8.
        let inst = sched_instance(vec![vec![jp(0, 8, 1)], vec![jp(0, 8, 1)]]);
        let g = job_slots(&inst, 0, 0, &rat(99, 100)).unwrap();
        assert_eq!(g.n_slots, 9); // ceil(8 / 0.99)
    }

    #[test]
    fn shifted_window_boundaries() {
        let inst = sched_instance(vec![vec![jp(3, 5, 1)], vec![jp(3, 5, 1)]]);
        let g = job_slots(&inst, 0, 0, &rat(1, 2)).unwrap();
        assert_eq!(g.n_slots, 16);
        // Recompute boundaries independently: 3 + k * (2/16).
        for k in 0..=16 {
            assert_eq!(g.boundary(k), rat_int(3) + rat(2, 16) * rat_int(k as i64));
        }
        // Slots tile the window exactly.
        assert_eq!(g.slot_len.clone() * rat_int(g.n_slots as i64), rat_int(2));
    }

    #[test]
    fn epsilon_must_be_in_open_unit_interval() {
        let inst = sched_instance(vec![vec![jp(0, 1, 1)]]);
        assert!(job_slots(&inst, 0, 0, &Rat::one()).is_err());
        assert!(job_slots(&inst, 0, 0, &Rat::zero()).is_err());
    }

    #[test]
    fn non_integer_dates_rejected() {
        let mut inst = sched_instance(vec![vec![jp(0, 1, 1)]]);
        inst.jobs[0][0].deadline = rat(3, 2);
        assert!(job_slots(&inst, 0, 0, &rat(1, 2)).is_err());
    }

    #[test]
    fn merge_single_grid_is_identity() {
        let g = SlotGrid::new(rat_int(0), rat_int(2), 4);
        let atoms = merge_intervals(&[g.clone()]);
        assert_eq!(atoms.boundaries, g.boundaries());
        assert_eq!(atoms.n_atoms(), 4);
    }

    #[test]
    fn merge_two_grids_unions_boundaries() {
        let g1 = SlotGrid::new(rat_int(0), rat_int(2), 2); // {0,1,2}
        let g2 = SlotGrid::new(rat_int(0), rat_int(3), 2); // {0,3/2,3}
        let atoms = merge_intervals(&[g1, g2]);
        assert_eq!(
            atoms.boundaries,
            vec![rat_int(0), rat_int(1), rat(3, 2), rat_int(2), rat_int(3)]
        );
    }

    #[test]
    fn every_slot_is_a_union_of_atoms() {
        let mut rng = crate::rng::StreamRng::new(11, 0);
        for _ in 0..50 {
            let n = 2 + rng.next_below(3) as usize;
            let jobs: Vec<Vec<JobOnProcessor>> = (0..n)
                .map(|_| {
                    let r = rng.next_below(5) as i64;
                    let d = r + 1 + rng.next_below(6) as i64;
                    vec![jp(r, d, 1)]
                })
                .collect();
            let inst = sched_instance(jobs);
            let grids: Vec<SlotGrid> = (0..n)
                .map(|j| job_slots(&inst, 0, j, &rat(1, 2)).unwrap())
                .collect();
            let atoms = merge_intervals(&grids);
            for g in &grids {
                for k in 0..g.n_slots {
                    let (a, b) = g.slot(k);
                    let range = atoms.atoms_covering(&a, &b).expect("slot must align");
                    // The atoms exactly tile the slot.
                    assert_eq!(atoms.boundaries[range.start], a);
                    assert_eq!(atoms.boundaries[range.end], b);
                    let total: Rat = range.map(|p| atoms.atom_len(p)).sum();
                    assert_eq!(total, g.slot_len);
                }
            }
        }
    }

    #[test]
    fn speed_grid_single_job() {
        let inst = sched_instance(vec![vec![jp(0, 1, 2)]]);
        let sg = speed_grid(&inst, 1.0, WindowPolicy::FiniteWorkOnly).unwrap();
        assert_eq!(sg.s_lb, 2.0);
        assert_eq!(sg.s_ub, 2.0);
        assert_eq!(sg.speeds, vec![4.0]);
    }

    #[test]
    fn speed_lower_bound_sums_windows() {
        let inst = sched_instance(vec![vec![jp(0, 1, 2), jp(0, 1, 2)]]);
        let sg = speed_grid(&inst, 0.5, WindowPolicy::FiniteWorkOnly).unwrap();
        assert_eq!(sg.s_lb, 1.0);
    }

    #[test]
    fn speed_grid_size_matches_log_count() {
        let mut jobs = vec![vec![jp(0, 1, 1)]];
        jobs.push(vec![jp(0, 1, 7)]);
        let inst = sched_instance(jobs);
        for delta in [0.5, 0.1, 0.01] {
            let sg = speed_grid(&inst, delta, WindowPolicy::FiniteWorkOnly).unwrap();
            let expected = ((sg.s_ub / sg.s_lb).ln() / (1.0 + delta).ln()).ceil() as usize;
            assert_eq!(sg.speeds.len(), expected.max(1), "delta={delta}");
            assert!(sg.speeds.last().unwrap() >= &sg.s_ub);
            // Coverage: every speed in range has a grid point within (1+delta).
            for step in 0..100 {
                let s = sg.s_lb + (sg.s_ub - sg.s_lb) * step as f64 / 100.0;
                assert!(sg
                    .speeds
                    .iter()
                    .any(|&v| s <= v && v <= (1.0 + delta) * s * (1.0 + 1e-12)));
            }
        }
    }

    #[test]
    fn jobshop_single_operation_grids() {
        let inst = JobShopInstance {
            processors: vec![Processor { id: 0, alpha: 2.0 }],
            jobs: vec![vec![Operation {
                processor: 0,
                work: rat_int(1),
                release: rat_int(0),
                deadline: rat_int(1),
            }]],
        };
        let g = jobshop_grids(&inst, &rat(1, 2), DEFAULT_MAX_WINDOWS_PER_OP).unwrap();
        assert_eq!(g.landmarks, vec![rat_int(0), rat_int(1)]);
        assert_eq!(g.coarse.len(), 1);
        // step eps/(mu(1+eps)) = (1/2)/(3/2) = 1/3 => 3 slots.
        assert_eq!(g.coarse[0].n_slots, 3);
        assert_eq!(g.coarse[0].slot_len, rat(1, 3));
        // 4 grid points => 6 ordered pairs.
        assert_eq!(g.windows[0][0].len(), 6);
        // Inner grids: ceil(mu^3/eps) = 2 slots.
        for cw in &g.windows[0][0] {
            assert_eq!(cw.grid.n_slots, 2);
            assert!(cw.b < cw.c);
        }
        assert!(g.capped_ops.is_empty());
    }

    #[test]
    fn jobshop_windows_stay_inside_alive_window() {
        let inst = JobShopInstance {
            processors: vec![Processor { id: 0, alpha: 2.0 }, Processor { id: 1, alpha: 2.0 }],
            jobs: vec![vec![
                Operation {
                    processor: 0,
                    work: rat_int(1),
                    release: rat_int(0),
                    deadline: rat_int(2),
                },
                Operation {
                    processor: 1,
                    work: rat_int(1),
                    release: rat_int(2),
                    deadline: rat_int(4),
                },
            ]],
        };
        let g = jobshop_grids(&inst, &rat(1, 2), 10).unwrap();
        for (k, op) in inst.jobs[0].iter().enumerate() {
            for cw in &g.windows[0][k] {
                assert!(cw.b >= op.release && cw.c <= op.deadline);
            }
            assert!(g.windows[0][k].len() <= 10);
        }
        // The cap bound: with mu=2, eps=1/2 the coarse grid has many points.
        assert!(!g.capped_ops.is_empty());
        // Capped lists keep the full alive window.
        for (k, op) in inst.jobs[0].iter().enumerate() {
            assert!(g.windows[0][k]
                .iter()
                .any(|cw| cw.b == op.release && cw.c == op.deadline));
        }
    }

    #[test]
    fn jobshop_candidate_count_grows_quadratically() {
        let inst = JobShopInstance {
            processors: vec![Processor { id: 0, alpha: 2.0 }],
            jobs: vec![vec![Operation {
                processor: 0,
                work: rat_int(1),
                release: rat_int(0),
                deadline: rat_int(1),
            }]],
        };
        let count = |eps: Rat| {
            jobshop_grids(&inst, &eps, usize::MAX).unwrap().windows[0][0].len()
        };
        let c1 = count(rat(1, 2));
        let c2 = count(rat(1, 4));
        let c3 = count(rat(1, 8));
        // Points ~ 1/eps, pairs ~ 1/eps^2: halving eps roughly quadruples.
        assert!(c2 > 2 * c1 && c3 > 2 * c2 && c3 > 6 * c1, "{c1} {c2} {c3}");
    }
}
