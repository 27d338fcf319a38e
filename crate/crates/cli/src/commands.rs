use std::collections::BTreeMap;
use std::path::Path;

use dispersive_eo::analytic::{
    coherent_leading_order, effective_phase, ideal_success_probability, source_fidelity_bound,
    SourceSpec,
};
use dispersive_eo::{run_protocol_with, run_sweep, RunOptions};

use crate::args::{Command, IdealCommand, RunArgs, SweepArgs};
use crate::config::{RunSettings, SweepSettings};
use crate::error::{CliError, Result};
use crate::output::{
    significant, write_summary, write_sweep, write_trajectory, SUMMARY_FILE, TRAJECTORY_FILE,
};

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Ideal(cmd) => cmd_ideal(cmd),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_path_buf(), source })
}

pub fn cmd_run(args: &RunArgs) -> Result<()> {
    let flags = args.settings()?;
    let settings = match &args.config {
        Some(path) => RunSettings::from_file(path)?.overlay(&flags),
        None => flags,
    };
    let config = settings.resolve()?;
    create_dir(&config.output_dir)?;

    let opts = RunOptions {
        dt: config.dt,
        t_max: config.t_max,
        record_stride: if config.emit_trajectory { config.record_stride } else { 0 },
    };
    let (traj, summary) = run_protocol_with(&config.params, &opts)?;

    write_summary(&config.output_dir.join(SUMMARY_FILE), &summary)?;
    if config.emit_trajectory {
        write_trajectory(&config.output_dir.join(TRAJECTORY_FILE), &traj)?;
    }
    println!("F_average = {}", significant(summary.f_average, 6));
    println!("P_total = {}", significant(summary.p_total, 6));
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let settings = match &args.spec {
        Some(path) => SweepSettings::from_file(path)?,
        None => SweepSettings::default(),
    };
    let spec = settings.resolve(args.workers)?;
    if let Some(dir) = args.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let rows = run_sweep(&spec)?;
    write_sweep(&args.output, &rows)?;
    let mut failed = 0;
    for row in &rows {
        if let Err(msg) = &row.outcome {
            failed += 1;
            eprintln!("delta = {}, gamma_norm = {}: {msg}", row.delta, row.gamma_norm);
        }
    }
    println!("{} points written to {} ({failed} failed)", rows.len(), args.output.display());
    Ok(())
}

pub fn cmd_ideal(cmd: &IdealCommand) -> Result<()> {
    match cmd {
        IdealCommand::Phase { g, delta, t } => {
            println!("{}", significant(effective_phase(*g, *delta, *t)?, 6));
        }
        IdealCommand::Success { theta } => {
            println!("{}", significant(ideal_success_probability(*theta), 6));
        }
        IdealCommand::Coherent { alpha, theta } => {
            let lo = coherent_leading_order(*alpha, *theta);
            println!("F = {}", significant(lo.fidelity, 6));
            println!("P = {}", significant(lo.probability, 6));
        }
        IdealCommand::SourceBound { p } => {
            let mut map = BTreeMap::new();
            for &(m, prob) in p {
                if map.insert(m, prob).is_some() {
                    return Err(CliError::config(format!("P_{m} given twice")));
                }
            }
            println!("{}", significant(source_fidelity_bound(&SourceSpec::new(map)?), 6));
        }
    }
    Ok(())
}
