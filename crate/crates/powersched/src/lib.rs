//! Energy-minimization solvers for speed-scalable processors and min-power routing.
//!
//! The suite covers five problems, all driven by the same machinery of
//! configuration linear programs and randomized rounding:
//!
//! * heterogeneous non-migratory preemptive scheduling ([`nonmigratory`]),
//! * heterogeneous migratory preemptive scheduling ([`migratory`]),
//! * single-processor non-preemptive scheduling ([`single_nonpreemptive`]),
//! * preemptive job shop scheduling ([`jobshop`]),
//! * min-power routing with uniform demands ([`routing`]).
//!
//! Supporting modules: exact-rational time/speed grids ([`discretize`]), an LP
//! layer with column generation ([`lp`]), generalized Bell
//! numbers and probabilistic-inequality verifiers ([`probability`]), brute-force
//! optima on tiny instances ([`oracle`]), seeded instance generators
//! ([`generators`]), and a name-keyed solver registry ([`registry`]) behind the
//! `powersched` CLI.

pub mod core_types;
pub mod discretize;
pub mod experiment;
pub mod generators;
pub mod jobshop;
pub mod lp;
pub mod migratory;
pub mod nonmigratory;
pub mod oracle;
pub mod probability;
pub mod registry;
pub mod report;
pub mod rng;
pub mod routing;
pub mod schedule;
pub mod single_nonpreemptive;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("series truncation cap reached before tolerance (alpha too large?)")]
    SeriesCap,
    #[error("lp error: {0}")]
    Lp(String),
    #[error("oracle limit exceeded: {0}")]
    OracleLimit(String),
    #[error("infeasible at this discretization: {0}")]
    Infeasible(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
