use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use nalgebra::DVector;
use physarum::oracle::OracleSolution;
use physarum::TrajectoryTrace;
use serde::{Deserialize, Serialize};

/// Per-run summary written next to the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub instance_name: String,
    pub final_t: f64,
    pub final_cost: f64,
    /// `None` when the instance is too large for the oracle.
    pub oracle_opt: Option<f64>,
    /// `final_cost / opt − 1`.
    pub relative_gap: Option<f64>,
    pub eps: f64,
    /// `None` without an oracle or from an infeasible start.
    pub bound_time_kl: Option<f64>,
    pub bound_time_mu: Option<f64>,
    /// First sampled time with `cost ≤ (1+eps) opt`.
    pub achieved_time: Option<f64>,
    pub steps: usize,
    pub rejections: usize,
    pub regularizations: usize,
    pub converged: bool,
}

fn optional(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Columns `t, x_0..x_{n-1}, cost, energy, infeasibility, kl, potential`.
pub fn write_trace(path: &Path, trace: &TrajectoryTrace) -> Result<()> {
    let n = trace.final_state.x.len();
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|j| format!("x_{j}")));
    header.extend(["cost", "energy", "infeasibility", "kl", "potential"].map(String::from));
    w.write_record(&header)?;
    for r in &trace.records {
        let mut row = vec![r.t.to_string()];
        row.extend(r.x.iter().map(f64::to_string));
        row.extend([
            r.cost.to_string(),
            r.energy.to_string(),
            r.infeasibility.to_string(),
            optional(r.kl_to_optimum),
            optional(r.potential),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

pub fn oracle_json(solution: &OracleSolution) -> serde_json::Value {
    serde_json::json!({
        "opt": solution.opt,
        "x_star": to_vec(&solution.x_star),
        "all_optimal_vertices": solution.all_optimal_vertices.iter().map(to_vec).collect::<Vec<_>>(),
        "chosen_rule": solution.chosen_rule,
    })
}

/// Comma-separated list that parses back to the same values.
pub fn comma_list(v: &DVector<f64>) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}
