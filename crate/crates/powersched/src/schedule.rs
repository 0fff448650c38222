//! Concrete schedules produced by the rounding algorithms, with energy
//! evaluation and feasibility checking.

use crate::core_types::{rat_to_f64, Rat, SchedulingInstance};
use num_traits::{One, Zero};
use std::collections::BTreeMap;

/// Work executed on one atomic interval of one processor. When several jobs
/// land on the same interval they run sequentially at the common speed
/// `total work / |I|`.
#[derive(Debug, Clone)]
pub struct AtomPiece {
    pub start: Rat,
    pub end: Rat,
    /// Exact work units per job inside this interval.
    pub jobs: Vec<(usize, Rat)>,
}

impl AtomPiece {
    pub fn len(&self) -> Rat {
        &self.end - &self.start
    }

    pub fn total_work(&self) -> Rat {
        self.jobs.iter().map(|(_, w)| w.clone()).sum()
    }

    pub fn speed(&self) -> f64 {
        rat_to_f64(&self.total_work()) / rat_to_f64(&self.len())
    }
}

/// Per-processor sequence of non-overlapping busy intervals.
#[derive(Debug, Clone, Default)]
pub struct Schedule {
    pub processors: Vec<Vec<AtomPiece>>,
}

impl Schedule {
    /// Total energy and the per-processor breakdown: each busy interval
    /// contributes `|I| * speed^alpha_i`.
    pub fn energy(&self, alphas: &[f64]) -> (f64, Vec<f64>) {
        let mut per_proc = vec![0.0; self.processors.len()];
        for (i, pieces) in self.processors.iter().enumerate() {
            for p in pieces {
                let len = rat_to_f64(&p.len());
                if len > 0.0 {
                    per_proc[i] += len * p.speed().powf(alphas[i]);
                }
            }
        }
        (per_proc.iter().sum(), per_proc)
    }

    /// Work executed per job, per processor.
    pub fn executed_work(&self) -> BTreeMap<usize, Vec<(usize, Rat)>> {
        let mut ledger: BTreeMap<usize, BTreeMap<usize, Rat>> = BTreeMap::new();
        for (i, pieces) in self.processors.iter().enumerate() {
            for p in pieces {
                for (j, w) in &p.jobs {
                    *ledger
                        .entry(*j)
                        .or_default()
                        .entry(i)
                        .or_insert_with(Rat::zero) += w;
                }
            }
        }
        ledger
            .into_iter()
            .map(|(j, per_proc)| (j, per_proc.into_iter().collect()))
            .collect()
    }
}

/// Feasibility check; returns human-readable violations (empty = feasible).
pub fn validate_schedule(instance: &SchedulingInstance, schedule: &Schedule) -> Vec<String> {
    let mut out = Vec::new();
    let tol = crate::core_types::rat(1, 1_000_000);
    for (i, pieces) in schedule.processors.iter().enumerate() {
        for w in pieces.windows(2) {
            if w[1].start < w[0].end {
                out.push(format!(
                    "processor {i}: intervals ({}, {}] and ({}, {}] overlap",
                    w[0].start, w[0].end, w[1].start, w[1].end
                ));
            }
        }
        for p in pieces {
            if p.end <= p.start {
                out.push(format!("processor {i}: empty interval at {}", p.start));
            }
            for (j, _) in &p.jobs {
                let jp = &instance.jobs[*j][i];
                if jp.is_infinite() {
                    out.push(format!("job {j} executed on forbidden processor {i}"));
                } else if p.start < jp.release || p.end > jp.deadline {
                    out.push(format!(
                        "job {j} runs in ({}, {}] outside its window ({}, {}] on processor {i}",
                        p.start, p.end, jp.release, jp.deadline
                    ));
                }
            }
        }
    }
    for (j, per_proc) in schedule.executed_work() {
        if per_proc.len() > 1 {
            out.push(format!("job {j} executed on {} processors", per_proc.len()));
        }
        for (i, done) in per_proc {
            let need = instance.jobs[j][i].work.clone().unwrap_or_else(Rat::zero);
            let gap = if done > need { &done - &need } else { &need - &done };
            if gap > tol.clone() * (Rat::one() + &need) {
                out.push(format!(
                    "job {j} on processor {i}: executed {done}, required {need}"
                ));
            }
        }
    }
    out
}
