//! Immutable problem instances shared by all solvers.
//!
//! Times and works are exact rationals ([`Rat`]); solvers convert to floats at
//! their own boundary. The JSON schema is versioned (`"schema": "powersched/1"`)
//! with rationals written as integers or `"p/q"` strings, so serialization is
//! canonical: equal instances serialize byte-identically.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::VecDeque;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::{Error, Result};

pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    BigRational::from_integer(BigInt::from(n))
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    let n = r.numer();
    let d = r.denom();
    // Good enough for desk-scale magnitudes; exactness only matters pre-grid.
    str_to_f64(&n.to_string()) / str_to_f64(&d.to_string())
}

fn str_to_f64(s: &str) -> f64 {
    s.parse::<f64>().unwrap_or(f64::NAN)
}

/// Renders `r` as `"p"` when integral, else `"p/q"` (always normalized).
pub fn rat_to_string(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        let mut s = String::new();
        let _ = write!(s, "{}/{}", r.numer(), r.denom());
        s
    }
}

/// Parses `"p/q"`, plain integers, and decimal literals like `"0.25"` exactly.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p.trim()).map_err(|e| Error::Parse(format!("{s:?}: {e}")))?;
        let q = BigInt::from_str(q.trim()).map_err(|e| Error::Parse(format!("{s:?}: {e}")))?;
        if q.is_zero() {
            return Err(Error::Parse(format!("{s:?}: zero denominator")));
        }
        return Ok(BigRational::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let int = if int.is_empty() { "0" } else { int };
        let neg = int.starts_with('-');
        let i = BigInt::from_str(int).map_err(|e| Error::Parse(format!("{s:?}: {e}")))?;
        let f = BigInt::from_str(frac).map_err(|e| Error::Parse(format!("{s:?}: {e}")))?;
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let num = &i * &scale + if neg { -f } else { f };
        return Ok(BigRational::new(num, scale));
    }
    let p = BigInt::from_str(s).map_err(|e| Error::Parse(format!("{s:?}: {e}")))?;
    Ok(BigRational::from_integer(p))
}

mod rat_serde {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rat, ser: S) -> std::result::Result<S::Ok, S::Error> {
        if r.denom().is_one() {
            if let Ok(i) = i64::from_str(&r.numer().to_string()) {
                return ser.serialize_i64(i);
            }
        }
        ser.serialize_str(&rat_to_string(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Rat, D::Error> {
        let v = serde_json::Value::deserialize(de)?;
        value_to_rat(&v).map_err(D::Error::custom)
    }
}

fn value_to_rat(v: &serde_json::Value) -> Result<Rat> {
    match v {
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(rat_int(i))
            } else {
                parse_rat(&n.to_string())
            }
        }
        serde_json::Value::String(s) => parse_rat(s),
        other => Err(Error::Parse(format!("expected rational, got {other}"))),
    }
}

mod work_serde {
    use super::*;

    pub fn serialize<S: Serializer>(
        w: &Option<Rat>,
        ser: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match w {
            None => ser.serialize_str("inf"),
            Some(r) => rat_serde::serialize(r, ser),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> std::result::Result<Option<Rat>, D::Error> {
        let v = serde_json::Value::deserialize(de)?;
        if v.as_str() == Some("inf") {
            return Ok(None);
        }
        value_to_rat(&v).map(Some).map_err(D::Error::custom)
    }
}

pub const SCHEMA: &str = "powersched/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Processor {
    pub id: usize,
    /// Power exponent: running at speed `s` draws power `s^alpha`.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobOnProcessor {
    #[serde(with = "rat_serde")]
    pub release: Rat,
    #[serde(with = "rat_serde")]
    pub deadline: Rat,
    /// `None` is the "infinite work" sentinel: the job cannot run here.
    #[serde(with = "work_serde")]
    pub work: Option<Rat>,
}

impl JobOnProcessor {
    pub fn infinite() -> Self {
        JobOnProcessor {
            release: Rat::zero(),
            deadline: Rat::zero(),
            work: None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.work.is_none()
    }

    pub fn window_len(&self) -> Rat {
        &self.deadline - &self.release
    }
}

/// Jobs-on-processors instance: `jobs[j][i]` is job `j`'s window and work on
/// processor `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulingInstance {
    pub processors: Vec<Processor>,
    pub jobs: Vec<Vec<JobOnProcessor>>,
}

impl SchedulingInstance {
    pub fn n_jobs(&self) -> usize {
        self.jobs.len()
    }

    pub fn n_procs(&self) -> usize {
        self.processors.len()
    }

    /// (i, j) pairs carrying finite work.
    pub fn finite_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j in 0..self.n_jobs() {
            for i in 0..self.n_procs() {
                if self.jobs[j][i].work.is_some() {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Operation {
    pub processor: usize,
    #[serde(with = "rat_serde")]
    pub work: Rat,
    #[serde(with = "rat_serde")]
    pub release: Rat,
    #[serde(with = "rat_serde")]
    pub deadline: Rat,
}

/// Chains of operations; within a chain releases and deadlines are
/// non-decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobShopInstance {
    pub processors: Vec<Processor>,
    pub jobs: Vec<Vec<Operation>>,
}

impl JobShopInstance {
    /// Total operation count mu.
    pub fn mu(&self) -> usize {
        self.jobs.iter().map(|c| c.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingEdge {
    pub tail: usize,
    pub head: usize,
    pub cost: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingInstance {
    pub nodes: usize,
    pub edges: Vec<RoutingEdge>,
    /// (source, destination) pairs; all demands share `bandwidth` units.
    pub demands: Vec<(usize, usize)>,
    pub bandwidth: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InstanceKind {
    Scheduling(SchedulingInstance),
    Jobshop(JobShopInstance),
    Routing(RoutingInstance),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub schema: String,
    #[serde(flatten)]
    pub instance: InstanceKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn check_processors(procs: &[Processor], out: &mut Vec<Violation>) {
    for (k, p) in procs.iter().enumerate() {
        if p.id != k {
            out.push(Violation {
                path: format!("processors[{k}].id"),
                message: format!("ids must be dense 0..m-1, got {}", p.id),
            });
        }
        if !(p.alpha >= 1.0) {
            out.push(Violation {
                path: format!("processors[{k}].alpha"),
                message: format!("alpha must be >= 1, got {}", p.alpha),
            });
        }
    }
}

pub fn validate_scheduling(inst: &SchedulingInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    check_processors(&inst.processors, &mut out);
    let m = inst.processors.len();
    for (j, row) in inst.jobs.iter().enumerate() {
        if row.len() != m {
            out.push(Violation {
                path: format!("jobs[{j}]"),
                message: format!("expected {m} processor entries, got {}", row.len()),
            });
            continue;
        }
        let mut any_finite = false;
        for (i, e) in row.iter().enumerate() {
            if let Some(w) = &e.work {
                any_finite = true;
                if w.is_negative() {
                    out.push(Violation {
                        path: format!("jobs[{j}][{i}].work"),
                        message: "negative work".into(),
                    });
                }
                if e.release >= e.deadline {
                    out.push(Violation {
                        path: format!("jobs[{j}][{i}]"),
                        message: "empty window (release >= deadline with finite work)".into(),
                    });
                }
                if e.release.is_negative() {
                    out.push(Violation {
                        path: format!("jobs[{j}][{i}].release"),
                        message: "negative release".into(),
                    });
                }
            }
        }
        if !any_finite {
            out.push(Violation {
                path: format!("jobs[{j}]"),
                message: "no processor with finite work".into(),
            });
        }
    }
    out
}

pub fn validate_jobshop(inst: &JobShopInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    check_processors(&inst.processors, &mut out);
    let m = inst.processors.len();
    for (j, chain) in inst.jobs.iter().enumerate() {
        if chain.is_empty() {
            out.push(Violation {
                path: format!("jobs[{j}]"),
                message: "empty operation chain".into(),
            });
        }
        for (k, op) in chain.iter().enumerate() {
            if op.processor >= m {
                out.push(Violation {
                    path: format!("jobs[{j}][{k}].processor"),
                    message: format!("processor {} out of range", op.processor),
                });
            }
            if op.work.is_negative() {
                out.push(Violation {
                    path: format!("jobs[{j}][{k}].work"),
                    message: "negative work".into(),
                });
            }
            if op.release >= op.deadline {
                out.push(Violation {
                    path: format!("jobs[{j}][{k}]"),
                    message: "empty window".into(),
                });
            }
            if k > 0 {
                if op.release < chain[k - 1].release {
                    out.push(Violation {
                        path: format!("jobs[{j}][{k}].release"),
                        message: "releases must be non-decreasing along the chain".into(),
                    });
                }
                if op.deadline < chain[k - 1].deadline {
                    out.push(Violation {
                        path: format!("jobs[{j}][{k}].deadline"),
                        message: "deadlines must be non-decreasing along the chain".into(),
                    });
                }
            }
        }
    }
    out
}

pub fn validate_routing(inst: &RoutingInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    if inst.bandwidth < 1 {
        out.push(Violation {
            path: "bandwidth".into(),
            message: "bandwidth must be >= 1".into(),
        });
    }
    for (k, e) in inst.edges.iter().enumerate() {
        if e.tail >= inst.nodes || e.head >= inst.nodes {
            out.push(Violation {
                path: format!("edges[{k}]"),
                message: "endpoint out of range".into(),
            });
        }
        if !(e.cost > 0.0) {
            out.push(Violation {
                path: format!("edges[{k}].cost"),
                message: "cost coefficient must be > 0".into(),
            });
        }
        if !(e.alpha >= 1.0) {
            out.push(Violation {
                path: format!("edges[{k}].alpha"),
                message: "exponent must be >= 1".into(),
            });
        }
    }
    // BFS reachability per demand.
    let mut adj = vec![Vec::new(); inst.nodes];
    for e in &inst.edges {
        if e.tail < inst.nodes && e.head < inst.nodes {
            adj[e.tail].push(e.head);
        }
    }
    for (k, &(s, t)) in inst.demands.iter().enumerate() {
        if s >= inst.nodes || t >= inst.nodes {
            out.push(Violation {
                path: format!("demands[{k}]"),
                message: "endpoint out of range".into(),
            });
            continue;
        }
        let mut seen = vec![false; inst.nodes];
        let mut queue = VecDeque::from([s]);
        seen[s] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        if !seen[t] {
            out.push(Violation {
                path: format!("demands[{k}]"),
                message: "no path from source to destination".into(),
            });
        }
    }
    out
}

pub fn validate(inst: &InstanceKind) -> Vec<Violation> {
    match inst {
        InstanceKind::Scheduling(i) => validate_scheduling(i),
        InstanceKind::Jobshop(i) => validate_jobshop(i),
        InstanceKind::Routing(i) => validate_routing(i),
    }
}

pub fn save(inst: &InstanceKind) -> String {
    let doc = Document {
        schema: SCHEMA.to_string(),
        instance: inst.clone(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("instance serialization cannot fail");
    s.push('\n');
    s
}

pub fn load(text: &str) -> Result<InstanceKind> {
    let doc: Document =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("line {}: {e}", e.line())))?;
    if doc.schema != SCHEMA {
        return Err(Error::Schema(format!(
            "schema version mismatch: expected {SCHEMA:?}, got {:?}",
            doc.schema
        )));
    }
    Ok(doc.instance)
}

pub fn load_path(path: &std::path::Path) -> Result<InstanceKind> {
    load(&std::fs::read_to_string(path)?)
}
