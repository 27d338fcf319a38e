use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_amplitudes, parse_angle, parse_multiplicity, ModelSettings, RunSettings};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "dispersive-eo", version, about = "Heralded entanglement through a dispersive photon interferometer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one parameter point and write its summary.
    Run(Box<RunArgs>),
    /// Scan detuning and normalized decay rate.
    Sweep(SweepArgs),
    /// Closed-form values of the ideal model.
    #[command(subcommand)]
    Ideal(IdealCommand),
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct RunArgs {
    /// `key = value` or JSON settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Detuning in units of g.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Cavity decay rate in units of g.
    #[arg(long, conflicts_with = "gamma_norm")]
    pub gamma: Option<f64>,
    /// Decay rate in units of g^2 / (pi delta) (default 1).
    #[arg(long)]
    pub gamma_norm: Option<f64>,
    /// Dephasing rate in units of g.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub g: Option<f64>,
    /// single | coherent
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub n_max: Option<usize>,
    /// plus_plus | s00 | s11 | s01 | s10 | custom
    #[arg(long)]
    pub initial_atoms: Option<String>,
    /// Nine comma-separated amplitudes `re` or `re:im` over |aL aR>, a in {0,1,e}.
    #[arg(long)]
    pub atom_amplitudes: Option<String>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Also write the sampled trajectory.
    #[arg(long)]
    pub emit_trajectory: bool,
    /// Keep every n-th integrator sample in the trajectory.
    #[arg(long)]
    pub record_stride: Option<usize>,
}

impl RunArgs {
    pub fn settings(&self) -> Result<RunSettings> {
        Ok(RunSettings {
            model: ModelSettings {
                g: self.g,
                lambda_deph: self.lambda,
                input: self.input.clone(),
                alpha: self.alpha,
                n_max: self.n_max,
                initial_atoms: self.initial_atoms.clone(),
                atom_amplitudes: self.atom_amplitudes.as_deref().map(parse_amplitudes).transpose()?,
                dt: self.dt,
                t_max: self.t_max,
            },
            delta: self.delta,
            gamma_cav: self.gamma,
            gamma_norm: self.gamma_norm,
            output_dir: self.output_dir.clone(),
            emit_trajectory: self.emit_trajectory.then_some(true),
            record_stride: self.record_stride,
        })
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep settings; unset keys take the default grid.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value = "sweep.csv")]
    pub output: PathBuf,
    /// Worker threads (else the spec file, else DISPERSIVE_EO_WORKERS).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum IdealCommand {
    /// theta = g^2 t / delta
    Phase {
        #[arg(long, default_value_t = 1.0)]
        g: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        t: f64,
    },
    /// sin^2(theta/2) / 2
    Success {
        #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
        theta: f64,
    },
    /// Leading-order fidelity and probability for a weak coherent pulse.
    Coherent {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
        theta: f64,
    },
    /// 1 - sum of multi-photon probabilities.
    SourceBound {
        /// `m:probability`, repeatable or comma-separated.
        #[arg(long = "p", required = true, value_delimiter = ',', value_parser = parse_multiplicity)]
        p: Vec<(u32, f64)>,
    },
}
