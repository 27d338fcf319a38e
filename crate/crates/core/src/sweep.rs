//! Grid scans of averaged fidelity and herald probability against the
//! normalized cavity decay rate `gamma = Gamma / (g^2 / (pi delta))`.
//!
//! Grid points are independent runs. With the `parallel` feature they are
//! distributed over a rayon pool; otherwise (or with one worker) they run in
//! order on the calling thread. Both paths produce identical tables.

use crate::dynamics::{matched_decay_rate, InitialAtoms, InputKind, ModelParams};
use crate::error::{Error, Result};
use crate::protocol::{run_protocol_with, RunOptions, RunSummary};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub deltas: Vec<f64>,
    pub gamma_norm_grid: Vec<f64>,
    pub lambda_deph: f64,
    pub g: f64,
    pub input: InputKind,
    /// Fock cutoff; `None` picks the smallest adequate one.
    pub n_max: Option<usize>,
    pub initial_atoms: InitialAtoms,
    /// Integration overrides applied to every point.
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    /// Worker threads; `None` uses the rayon default.
    pub workers: Option<usize>,
}

impl Default for SweepSpec {
    /// `delta in {15, 20, 25, 30}`, `gamma in 0.25..=3` step 0.25, `lambda = g`.
    fn default() -> Self {
        SweepSpec {
            deltas: vec![15.0, 20.0, 25.0, 30.0],
            gamma_norm_grid: (1..=12).map(|k| 0.25 * k as f64).collect(),
            lambda_deph: 1.0,
            g: 1.0,
            input: InputKind::SinglePhoton,
            n_max: None,
            initial_atoms: InitialAtoms::PlusPlus,
            dt: None,
            t_max: None,
            workers: None,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.deltas.is_empty() {
            return Err(Error::config("detuning grid is empty"));
        }
        if self.gamma_norm_grid.is_empty() {
            return Err(Error::config("normalized decay grid is empty"));
        }
        if let Some(bad) = self.gamma_norm_grid.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::config(format!("normalized decay rates must be positive, got {bad}")));
        }
        if let Some(bad) = self.deltas.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::config(format!("detunings must be positive, got {bad}")));
        }
        if self.workers == Some(0) {
            return Err(Error::config("worker count must be at least 1"));
        }
        Ok(())
    }

    /// Grid points in table order: delta-major, both axes ascending.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut deltas = self.deltas.clone();
        let mut gammas = self.gamma_norm_grid.clone();
        deltas.sort_by(f64::total_cmp);
        gammas.sort_by(f64::total_cmp);
        deltas
            .iter()
            .flat_map(|&d| gammas.iter().map(move |&g| (d, g)))
            .collect()
    }

    /// Parameters of one grid point.
    pub fn params_at(&self, delta: f64, gamma_norm: f64) -> ModelParams {
        let n_max = match (self.input, self.n_max) {
            (InputKind::SinglePhoton, _) => 1,
            (_, Some(n)) => n,
            (InputKind::Coherent { alpha }, None) => crate::dynamics::coherent_truncation(alpha),
        };
        ModelParams {
            g: self.g,
            delta,
            gamma_cav: gamma_norm * matched_decay_rate(self.g, delta),
            lambda_deph: self.lambda_deph,
            n_max,
            input: self.input,
            initial_atoms: self.initial_atoms.clone(),
        }
    }

    fn options(&self) -> RunOptions {
        RunOptions { dt: self.dt, t_max: self.t_max, record_stride: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub gamma_norm: f64,
    /// Summary, or the error message of a failed point.
    pub outcome: std::result::Result<RunSummary, String>,
}

impl SweepRow {
    pub fn f_average(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|s| s.f_average)
    }

    pub fn p_total(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|s| s.p_total)
    }
}

fn run_point(spec: &SweepSpec, opts: &RunOptions, (delta, gamma_norm): (f64, f64)) -> SweepRow {
    let params = spec.params_at(delta, gamma_norm);
    let outcome = run_protocol_with(&params, opts)
        .map(|(_, s)| s)
        .map_err(|e| e.to_string());
    if let Err(msg) = &outcome {
        log::debug!("sweep point delta = {delta}, gamma = {gamma_norm} failed: {msg}");
    }
    SweepRow { delta, gamma_norm, outcome }
}

/// Runs every point on the calling thread.
pub fn run_sweep_sequential(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let opts = spec.options();
    Ok(spec.points().into_iter().map(|pt| run_point(spec, &opts, pt)).collect())
}

/// Runs points on a dedicated rayon pool of `spec.workers` threads.
#[cfg(feature = "parallel")]
pub fn run_sweep_parallel(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;

    spec.validate()?;
    let opts = spec.options();
    let points = spec.points();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = spec.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    // Indexed collect keeps grid order regardless of completion order.
    Ok(pool.install(|| {
        points
            .par_iter()
            .map(|&pt| run_point(spec, &opts, pt))
            .collect()
    }))
}

/// Dispatches on the worker count and the `parallel` feature.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    #[cfg(feature = "parallel")]
    {
        if spec.workers != Some(1) {
            return run_sweep_parallel(spec);
        }
    }
    run_sweep_sequential(spec)
}
