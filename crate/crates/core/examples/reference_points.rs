//! Prints averaged fidelity and herald probability at the two reference
//! operating points (single photon and weak coherent pulse).

use std::time::Instant;

use dispersive_eo::{run_protocol_with, ModelParams, RunOptions};

fn main() -> Result<(), dispersive_eo::Error> {
    for (name, params) in [
        ("single photon, delta = 20, lambda = 0.1", ModelParams::reference_single_photon()),
        ("coherent alpha = 0.2, delta = 7, lambda = 0.5", ModelParams::reference_coherent()),
    ] {
        let start = Instant::now();
        let (_, s) = run_protocol_with(&params, &RunOptions::summary_only())?;
        println!(
            "{name}: F_average = {:.6}, P_total = {:.6} ({} steps, tail bound {:.2e}, {:.1?})",
            s.f_average,
            s.p_total,
            s.steps,
            s.truncated_tail_bound,
            start.elapsed()
        );
    }
    Ok(())
}
