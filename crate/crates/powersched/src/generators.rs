//! Seeded random instance generators with difficulty knobs.
//!
//! All randomness flows from `GenSpec::seed` through a dedicated
//! [`StreamRng`] stream, so the same spec always produces the same
//! instance regardless of platform or parallelism. Dates are integers,
//! exponents are drawn per processor (or per edge) from the configured
//! range, and every generated instance passes [`core_types::validate`].

use crate::core_types::{
    rat_int, InstanceKind, JobOnProcessor, JobShopInstance, Operation, Processor, RoutingEdge,
    RoutingInstance, SchedulingInstance,
};
use crate::rng::StreamRng;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Shape of the release/deadline family for scheduling instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowShape {
    /// Every window is contained in (or disjoint from) every other.
    Nested,
    /// Releases and deadlines are both sorted the same way.
    Agreeable,
    /// Independent windows.
    #[default]
    Random,
}

fn default_density() -> f64 {
    1.0
}

fn default_bandwidth() -> u64 {
    1
}

/// Declarative description of a random instance.
///
/// `n` counts jobs (scheduling), chains (job shop), or demands (routing);
/// `m` counts processors or graph nodes. `density` is the probability that
/// a (processor, job) pair carries finite work, or that a candidate edge
/// exists in a routing graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub kind: String,
    pub n: usize,
    pub m: usize,
    pub horizon: i64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    #[serde(default)]
    pub windows: WindowShape,
    pub work_min: i64,
    pub work_max: i64,
    #[serde(default = "default_density")]
    pub density: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: u64,
    pub seed: u64,
}

fn check_spec(spec: &GenSpec) -> Result<()> {
    if spec.n == 0 || spec.m == 0 {
        return Err(Error::InvalidInstance("n and m must be positive".into()));
    }
    if spec.horizon < 1 {
        return Err(Error::InvalidInstance("horizon must be >= 1".into()));
    }
    if !(spec.alpha_min >= 1.0 && spec.alpha_max >= spec.alpha_min) {
        return Err(Error::InvalidInstance(
            "alpha range must satisfy 1 <= alpha_min <= alpha_max".into(),
        ));
    }
    if spec.work_min < 1 || spec.work_max < spec.work_min {
        return Err(Error::InvalidInstance(
            "work range must satisfy 1 <= work_min <= work_max".into(),
        ));
    }
    if !(0.0..=1.0).contains(&spec.density) {
        return Err(Error::InvalidInstance("density must lie in [0, 1]".into()));
    }
    if spec.bandwidth < 1 {
        return Err(Error::InvalidInstance("bandwidth must be >= 1".into()));
    }
    Ok(())
}

fn draw_int(rng: &mut StreamRng, lo: i64, hi: i64) -> i64 {
    lo + rng.next_below((hi - lo + 1) as u64) as i64
}

fn processors(rng: &mut StreamRng, m: usize, spec: &GenSpec) -> Vec<Processor> {
    (0..m)
        .map(|id| Processor {
            id,
            alpha: rng.uniform(spec.alpha_min, spec.alpha_max),
        })
        .collect()
}

/// Integer windows `(release, deadline)` with `release < deadline <= horizon`.
fn windows(rng: &mut StreamRng, n: usize, horizon: i64, shape: WindowShape) -> Vec<(i64, i64)> {
    match shape {
        WindowShape::Random => (0..n)
            .map(|_| {
                let r = draw_int(rng, 0, horizon - 1);
                let d = draw_int(rng, r + 1, horizon);
                (r, d)
            })
            .collect(),
        WindowShape::Agreeable => {
            // Sort releases and deadlines independently, then pair them up:
            // both sequences end up sorted the same way, so no window strictly
            // contains another with an earlier release.
            let mut rel: Vec<i64> = (0..n).map(|_| draw_int(rng, 0, horizon - 1)).collect();
            let mut dl: Vec<i64> = (0..n).map(|_| draw_int(rng, 1, horizon)).collect();
            rel.sort_unstable();
            dl.sort_unstable();
            rel.iter()
                .zip(&dl)
                .map(|(&r, &d)| (r, d.max(r + 1)))
                .collect()
        }
        WindowShape::Nested => {
            // Each window shrinks inside a uniformly chosen earlier one,
            // producing a laminar family rooted at the full horizon.
            let mut out: Vec<(i64, i64)> = vec![(0, horizon)];
            while out.len() < n {
                let (pr, pd) = out[rng.next_below(out.len() as u64) as usize];
                let r = draw_int(rng, pr, pd - 1);
                let d = draw_int(rng, r + 1, pd);
                out.push((r, d));
            }
            out.truncate(n);
            out
        }
    }
}

fn gen_scheduling(spec: &GenSpec, rng: &mut StreamRng) -> SchedulingInstance {
    let procs = processors(rng, spec.m, spec);
    let wins = windows(rng, spec.n, spec.horizon, spec.windows);
    let jobs = wins
        .iter()
        .map(|&(r, d)| {
            let mut row: Vec<JobOnProcessor> = (0..spec.m)
                .map(|_| {
                    if rng.next_f64() < spec.density {
                        JobOnProcessor {
                            release: rat_int(r),
                            deadline: rat_int(d),
                            work: Some(rat_int(draw_int(rng, spec.work_min, spec.work_max))),
                        }
                    } else {
                        JobOnProcessor::infinite()
                    }
                })
                .collect();
            if row.iter().all(|e| e.is_infinite()) {
                let i = rng.next_below(spec.m as u64) as usize;
                row[i] = JobOnProcessor {
                    release: rat_int(r),
                    deadline: rat_int(d),
                    work: Some(rat_int(draw_int(rng, spec.work_min, spec.work_max))),
                };
            }
            row
        })
        .collect();
    SchedulingInstance {
        processors: procs,
        jobs,
    }
}

fn gen_jobshop(spec: &GenSpec, rng: &mut StreamRng) -> JobShopInstance {
    let procs = processors(rng, spec.m, spec);
    let jobs = (0..spec.n)
        .map(|_| {
            let max_len = (spec.horizon as usize).min(3).max(1);
            let len = 1 + rng.next_below(max_len as u64) as usize;
            let chain_r = draw_int(rng, 0, spec.horizon - len as i64);
            let chain_d = draw_int(rng, chain_r + len as i64, spec.horizon);
            // Staggered releases inside a shared deadline keep the chain
            // non-decreasing and trivially feasible (op k fits between
            // consecutive cut points).
            let span = chain_d - chain_r;
            let cuts: Vec<i64> = (0..len as i64).map(|k| chain_r + k * span / len as i64).collect();
            (0..len)
                .map(|k| Operation {
                    processor: rng.next_below(spec.m as u64) as usize,
                    work: rat_int(draw_int(rng, spec.work_min, spec.work_max)),
                    release: rat_int(cuts[k]),
                    deadline: rat_int(chain_d),
                })
                .collect()
        })
        .collect();
    JobShopInstance {
        processors: procs,
        jobs,
    }
}

fn gen_routing(spec: &GenSpec, rng: &mut StreamRng) -> Result<RoutingInstance> {
    if spec.m < 2 {
        return Err(Error::InvalidInstance(
            "routing instances need at least 2 nodes".into(),
        ));
    }
    let nodes = spec.m;
    let mut edges = Vec::new();
    // Random sparse layer first, then one direct backbone edge per demand so
    // every demand is guaranteed routable.
    for tail in 0..nodes {
        for head in 0..nodes {
            if tail != head && rng.next_f64() < spec.density {
                edges.push(RoutingEdge {
                    tail,
                    head,
                    cost: rng.uniform(spec.work_min as f64, spec.work_max as f64),
                    alpha: rng.uniform(spec.alpha_min, spec.alpha_max),
                });
            }
        }
    }
    let mut demands = Vec::new();
    for _ in 0..spec.n {
        let s = rng.next_below(nodes as u64) as usize;
        let mut t = rng.next_below(nodes as u64) as usize;
        if t == s {
            t = (s + 1) % nodes;
        }
        if !edges.iter().any(|e| e.tail == s && e.head == t) {
            edges.push(RoutingEdge {
                tail: s,
                head: t,
                cost: rng.uniform(spec.work_min as f64, spec.work_max as f64),
                alpha: rng.uniform(spec.alpha_min, spec.alpha_max),
            });
        }
        demands.push((s, t));
    }
    Ok(RoutingInstance {
        nodes,
        edges,
        demands,
        bandwidth: spec.bandwidth,
    })
}

/// Generates an instance from the spec; deterministic per `spec.seed`.
pub fn generate(spec: &GenSpec) -> Result<InstanceKind> {
    check_spec(spec)?;
    let mut rng = StreamRng::new(spec.seed, 0);
    let out = match spec.kind.as_str() {
        "scheduling" => InstanceKind::Scheduling(gen_scheduling(spec, &mut rng)),
        "jobshop" => InstanceKind::Jobshop(gen_jobshop(spec, &mut rng)),
        "routing" => InstanceKind::Routing(gen_routing(spec, &mut rng)?),
        other => {
            return Err(Error::InvalidInstance(format!(
                "unknown instance kind '{other}'"
            )))
        }
    };
    let violations = crate::core_types::validate(&out);
    if !violations.is_empty() {
        return Err(Error::InvalidInstance(format!(
            "generator produced an invalid instance: {}",
            violations[0]
        )));
    }
    Ok(out)
}
