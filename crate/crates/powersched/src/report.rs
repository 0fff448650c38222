//! CSV reporting with a stable column order and deterministic number
//! formatting, so identical runs produce byte-identical files.

use crate::registry::SolveSummary;
use serde::{Deserialize, Serialize};

/// One report line: instance identity, solver parameters, LP/oracle values,
/// and trial statistics. Optional fields print as empty cells.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub id: String,
    pub kind: String,
    pub solver: String,
    pub epsilon: String,
    pub delta: f64,
    pub seed: u64,
    pub trials: usize,
    pub lp_value: f64,
    pub oracle_value: Option<f64>,
    pub best_energy: Option<f64>,
    pub mean_energy: Option<f64>,
    pub feasible_trials: Option<usize>,
    pub ratio_best: Option<f64>,
    pub ratio_mean: Option<f64>,
    pub bell_alpha: Option<f64>,
    pub guarantee_factor: Option<f64>,
    /// True when lp <= oracle <= best energy held (within tolerance);
    /// empty when no oracle value was requested.
    pub sandwich_ok: Option<bool>,
}

pub const CSV_HEADER: &str = "id,kind,solver,epsilon,delta,seed,trials,lp_value,oracle_value,\
best_energy,mean_energy,feasible_trials,ratio_best,ratio_mean,bell_alpha,guarantee_factor,\
sandwich_ok";

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

impl ReportRow {
    /// Builds the trial-statistics part of a row from a solver summary.
    pub fn from_summary(id: &str, kind: &str, summary: &SolveSummary, delta: f64, seed: u64) -> Self {
        let ratio = |e: Option<f64>| e.map(|e| e / summary.lp_value);
        ReportRow {
            id: id.into(),
            kind: kind.into(),
            solver: summary.solver.clone(),
            epsilon: String::new(),
            delta,
            seed,
            trials: summary.trials,
            lp_value: summary.lp_value,
            oracle_value: None,
            best_energy: summary.best_energy,
            mean_energy: summary.mean_energy,
            feasible_trials: summary.feasible_trials,
            ratio_best: ratio(summary.best_energy),
            ratio_mean: ratio(summary.mean_energy),
            bell_alpha: summary.bell_alpha,
            guarantee_factor: summary.guarantee_factor,
            sandwich_ok: None,
        }
    }

    fn to_record(&self) -> Vec<String> {
        vec![
            self.id.clone(),
            self.kind.clone(),
            self.solver.clone(),
            self.epsilon.clone(),
            fmt(self.delta),
            self.seed.to_string(),
            self.trials.to_string(),
            fmt(self.lp_value),
            fmt_opt(self.oracle_value),
            fmt_opt(self.best_energy),
            fmt_opt(self.mean_energy),
            self.feasible_trials.map(|v| v.to_string()).unwrap_or_default(),
            fmt_opt(self.ratio_best),
            fmt_opt(self.ratio_mean),
            fmt_opt(self.bell_alpha),
            fmt_opt(self.guarantee_factor),
            self.sandwich_ok.map(|v| v.to_string()).unwrap_or_default(),
        ]
    }
}

/// Serializes rows in the given order under the fixed header.
pub fn to_csv(rows: &[ReportRow]) -> String {
    let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
    wtr.write_record(CSV_HEADER.split(',')).expect("csv header");
    for row in rows {
        wtr.write_record(row.to_record()).expect("csv row");
    }
    String::from_utf8(wtr.into_inner().expect("csv flush")).expect("csv utf8")
}
