//! Invariants of the conditional evolution checked on full runs.

use dispersive_eo::analytic::analytic_success_dispersive;
use dispersive_eo::dynamics::{evolve, matched_decay_rate, ModelOperators};
use dispersive_eo::hilbert::{DensityMatrix, EXCITED};
use dispersive_eo::protocol::{prepare_initial_state, post_click_atom_state};
use dispersive_eo::{run_protocol_with, InitialAtoms, ModelParams, RunOptions};

fn sampled_states(params: &ModelParams, t_end: f64, every: usize) -> Vec<DensityMatrix> {
    let space = params.space().unwrap();
    let rho0 = prepare_initial_state(params, &space).unwrap();
    let mut out = Vec::new();
    evolve(&rho0, params, t_end, params.default_dt(), |prop| {
        if prop.steps_accepted() % every == 0 {
            out.push(prop.state());
        }
        Ok(())
    })
    .unwrap();
    out
}

#[test]
fn density_matrix_stays_positive() {
    let p = ModelParams::single_photon(10.0, matched_decay_rate(1.0, 10.0), 1.0);
    for rho in sampled_states(&p, 80.0, 4000) {
        assert!(rho.min_eigenvalue() >= -1e-8, "min eigenvalue {}", rho.min_eigenvalue());
        assert!(rho.hermiticity_defect() < 1e-10);
    }
}

#[test]
fn trace_is_non_increasing() {
    let p = ModelParams::reference_single_photon();
    let opts = RunOptions { t_max: Some(100.0), ..Default::default() };
    let (traj, _) = run_protocol_with(&p, &opts).unwrap();
    assert!((traj.trace[0] - 1.0).abs() < 1e-12);
    for w in traj.trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-9);
    }
}

#[test]
fn lossless_dephasing_free_evolution_stays_pure() {
    let p = ModelParams::single_photon(15.0, matched_decay_rate(1.0, 15.0), 0.0);
    for rho in sampled_states(&p, 120.0, 10_000) {
        let ev = rho.eigenvalues();
        let second = ev[ev.len() - 2];
        assert!(second.abs() < 1e-8, "second eigenvalue {second}");
    }
}

#[test]
fn single_photon_stays_in_one_excitation_sector() {
    let p = ModelParams::single_photon(8.0, matched_decay_rate(1.0, 8.0), 0.7);
    let space = p.space().unwrap();
    for rho in sampled_states(&p, 60.0, 5000) {
        let mut outside = 0.0;
        for i in 0..space.total_dim() {
            let d = space.digits(i);
            let n = d[2] + d[3] + (d[0] == EXCITED) as usize + (d[1] == EXCITED) as usize;
            if n != 1 {
                outside += rho.data()[(i, i)].re.abs();
            }
        }
        assert!(outside < 1e-12);
    }
}

#[test]
fn click_density_and_fidelity_are_bounded() {
    let p = ModelParams::single_photon(15.0, matched_decay_rate(1.0, 15.0), 1.0);
    let (traj, s) = run_protocol_with(&p, &RunOptions::default()).unwrap();
    assert!(traj.pc.iter().all(|&x| x >= -1e-12));
    assert!(traj.fidelity.iter().all(|&f| (-1e-12..=1.0 + 1e-12).contains(&f)));
    assert!((0.0..=1.0).contains(&s.f_average));
    assert!((0.0..=1.0).contains(&s.p_total));
}

#[test]
fn heralded_state_is_odd_parity_in_dispersive_regime() {
    let p = ModelParams::single_photon(25.0, matched_decay_rate(1.0, 25.0), 0.0);
    for rho in sampled_states(&p, 300.0, 25_000).into_iter().skip(1) {
        let atoms = post_click_atom_state(&rho).unwrap();
        // |01> and |10> are indices 1 and 3 of the two-atom basis.
        let odd = atoms.data()[(1, 1)].re + atoms.data()[(3, 3)].re;
        assert!(1.0 - odd < 1e-3, "population outside odd parity {}", 1.0 - odd);
    }
}

#[test]
fn coherent_even_parity_heralds_only_through_photon_pairs() {
    // Two identical Jaynes-Cummings fields are not coherent states, so they
    // interfere imperfectly once two photons share a cavity.
    let opts = RunOptions { t_max: Some(20.0), record_stride: 0, ..Default::default() };
    let herald = |atoms: InitialAtoms, alpha: f64| {
        let p = ModelParams::coherent(6.0, matched_decay_rate(1.0, 6.0), 0.0, alpha)
            .with_initial_atoms(atoms);
        run_protocol_with(&p, &opts).unwrap().1.p_total
    };
    let (weak, strong) = (herald(InitialAtoms::S11, 0.1), herald(InitialAtoms::S11, 0.2));
    let ratio = strong / weak;
    assert!((12.0..20.0).contains(&ratio), "P(0.2)/P(0.1) = {ratio}");
    assert!(strong < 1e-2 * herald(InitialAtoms::S01, 0.2));
    // Uncoupled atoms: only the truncated Fock tail can herald.
    assert!(herald(InitialAtoms::S00, 0.2) < 1e-8);
}

#[test]
fn independent_dephasing_lets_both_excited_branches_herald() {
    // Uncoupled atoms stay dark; coupled atoms dephase independently and
    // break the left/right symmetry of the cavity fields.
    let delta = 10.0;
    let opts = RunOptions::summary_only();
    let base = ModelParams::single_photon(delta, matched_decay_rate(1.0, delta), 0.5);
    let (_, s00) = run_protocol_with(&base.clone().with_initial_atoms(InitialAtoms::S00), &opts).unwrap();
    let (_, s11) = run_protocol_with(&base.with_initial_atoms(InitialAtoms::S11), &opts).unwrap();
    assert!(s00.p_total < 1e-14);
    assert!(s11.p_total > 1e-3);
}

#[test]
fn weak_coherent_input_scales_like_single_photon() {
    // lambda = 0: P_coherent = |alpha|^2 P_single + O(|alpha|^4).
    let delta = 7.0;
    let gamma = matched_decay_rate(1.0, delta);
    let alpha: f64 = 0.2;
    let mean = alpha * alpha;
    let opts = RunOptions::summary_only();
    let (_, single) = run_protocol_with(&ModelParams::single_photon(delta, gamma, 0.0), &opts).unwrap();
    let (_, coherent) =
        run_protocol_with(&ModelParams::coherent(delta, gamma, 0.0, alpha), &opts).unwrap();
    let leading = mean * single.p_total;
    let rel = (coherent.p_total - leading).abs() / leading;
    assert!(rel < 2.0 * mean, "relative deviation {rel}");
    let analytic = mean * analytic_success_dispersive(delta, gamma, 1.0);
    assert!((coherent.p_total - analytic).abs() / analytic < 0.05);
    // Multi-photon heralds contaminate with psi_plus at order |alpha|^2.
    assert!(coherent.f_average < 1.0 - 0.1 * mean && coherent.f_average > 1.0 - 2.0 * mean);
}

#[test]
fn excitation_number_is_what_leaks() {
    let p = ModelParams::single_photon(12.0, matched_decay_rate(1.0, 12.0), 0.4);
    let space = p.space().unwrap();
    let ops = ModelOperators::new(&space).unwrap();
    let n = ops.excitation_number();
    let states = sampled_states(&p, 400.0, 50_000);
    // Single photon: trace equals remaining excitations.
    for rho in states {
        let exc = rho.expectation(&n).unwrap().re;
        assert!((exc - rho.trace()).abs() < 1e-12);
    }
}
