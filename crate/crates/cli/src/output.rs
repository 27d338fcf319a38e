//! Summary JSON, trajectory CSV and sweep CSV writers.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use dispersive_eo::{InitialAtoms, RunSummary, SweepRow, Trajectory};
use serde::Serialize;

use crate::error::{CliError, Result};

pub const SUMMARY_FILE: &str = "summary.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";

/// `x` rounded to `digits` significant digits, printed in shortest form.
pub fn significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap();
    rounded.to_string()
}

/// Nine significant digits in scientific notation.
pub fn sci9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Flat summary record; field order is the on-disk order.
#[derive(Debug, Serialize)]
pub struct SummaryRecord {
    pub g: f64,
    pub delta: f64,
    pub gamma_cav: f64,
    pub gamma_norm: f64,
    pub lambda_deph: f64,
    pub input_kind: &'static str,
    pub alpha: Option<f64>,
    pub n_max: usize,
    pub initial_atoms: &'static str,
    pub atom_amplitudes: Option<Vec<[f64; 2]>>,
    pub dt: f64,
    pub t_max: f64,
    pub steps: usize,
    pub f_average: f64,
    pub p_total: f64,
    pub truncated_tail_bound: f64,
    pub max_hermiticity_drift: f64,
}

impl From<&RunSummary> for SummaryRecord {
    fn from(s: &RunSummary) -> Self {
        let p = &s.params;
        let atom_amplitudes = match &p.initial_atoms {
            InitialAtoms::Custom(a) => Some(a.iter().map(|z| [z.re, z.im]).collect()),
            _ => None,
        };
        SummaryRecord {
            g: p.g,
            delta: p.delta,
            gamma_cav: p.gamma_cav,
            gamma_norm: p.gamma_norm(),
            lambda_deph: p.lambda_deph,
            input_kind: p.input.name(),
            alpha: p.input.alpha(),
            n_max: p.n_max,
            initial_atoms: p.initial_atoms.name(),
            atom_amplitudes,
            dt: s.dt,
            t_max: s.t_max,
            steps: s.steps,
            f_average: s.f_average,
            p_total: s.p_total,
            truncated_tail_bound: s.truncated_tail_bound,
            max_hermiticity_drift: s.max_hermiticity_drift,
        }
    }
}

fn write_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Write { path: path.to_path_buf(), source }
}

pub fn summary_json(summary: &RunSummary) -> String {
    let mut text = serde_json::to_string_pretty(&SummaryRecord::from(summary))
        .expect("summary serializes");
    text.push('\n');
    text
}

pub fn write_summary(path: &Path, summary: &RunSummary) -> Result<()> {
    let mut f = File::create(path).map_err(write_error(path))?;
    f.write_all(summary_json(summary).as_bytes()).map_err(write_error(path))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).map_err(write_error(path))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(f))
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = csv_writer(path)?;
    let io = |e: csv::Error| CliError::Write { path: path.to_path_buf(), source: e.into() };
    w.write_record(["t", "pc", "fidelity", "trace"]).map_err(io)?;
    for k in 0..traj.len() {
        w.write_record([
            sci9(traj.times[k]),
            sci9(traj.pc[k]),
            sci9(traj.fidelity[k]),
            sci9(traj.trace[k]),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(write_error(path))
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let io = |e: csv::Error| CliError::Write { path: path.to_path_buf(), source: e.into() };
    w.write_record(["delta", "gamma_norm", "f_average", "p_total", "status"]).map_err(io)?;
    for row in rows {
        let (f, p, status) = match &row.outcome {
            Ok(s) => (sci9(s.f_average), sci9(s.p_total), "ok"),
            Err(_) => (String::new(), String::new(), "failed"),
        };
        w.write_record([row.delta.to_string(), row.gamma_norm.to_string(), f, p, status.to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(write_error(path))
}
