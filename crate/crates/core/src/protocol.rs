//! The heralded entanglement operation: state preparation, the output beam
//! splitter, the click at port R', and the fidelity of the heralded state.

use num_complex::Complex64 as C64;

use crate::dynamics::{
    evolve, InputKind, ModelOperators, ModelParams, Trajectory, TRUNCATION_TAIL,
};
use crate::error::{Error, Result};
use crate::hilbert::{
    embed, partial_trace, CMatrix, CVector, DensityMatrix, Operator, SpaceDescriptor, ACTIVE,
    ATOM_DIM, ATOM_L, ATOM_R, GROUND, MODE_L, MODE_R,
};

/// Click density below this (per unit time) is reported as a numerical failure.
pub const NEGATIVE_CLICK_TOL: f64 = 1e-12;
/// Allowed trace deviation of a state handed to [`fidelity_vs_target`].
pub const NORMALIZATION_TOL: f64 = 1e-8;

/// Odd-parity Bell states on the two-atom space.
#[derive(Debug, Clone, PartialEq)]
pub struct BellTargets {
    /// `(|01> - |10>)/sqrt(2)`, the heralded target.
    pub psi_minus: CVector,
    /// `(|01> + |10>)/sqrt(2)`, the multi-photon contaminant.
    pub psi_plus: CVector,
}

impl BellTargets {
    pub fn new() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let i01 = GROUND * ATOM_DIM + ACTIVE;
        let i10 = ACTIVE * ATOM_DIM + GROUND;
        let mut psi_minus = CVector::zeros(ATOM_DIM * ATOM_DIM);
        let mut psi_plus = CVector::zeros(ATOM_DIM * ATOM_DIM);
        psi_minus[i01] = C64::new(s, 0.0);
        psi_minus[i10] = C64::new(-s, 0.0);
        psi_plus[i01] = C64::new(s, 0.0);
        psi_plus[i10] = C64::new(s, 0.0);
        BellTargets { psi_minus, psi_plus }
    }
}

impl Default for BellTargets {
    fn default() -> Self {
        Self::new()
    }
}

/// Truncated coherent-state amplitudes `e^{-|b|^2/2} b^n / sqrt(n!)`,
/// renormalized, plus the discarded tail mass.
pub fn coherent_amplitudes(beta: f64, n_max: usize) -> (Vec<f64>, f64) {
    let mut amps = Vec::with_capacity(n_max + 1);
    let mut a = (-beta * beta / 2.0).exp();
    amps.push(a);
    for n in 1..=n_max {
        a *= beta / (n as f64).sqrt();
        amps.push(a);
    }
    let kept: f64 = amps.iter().map(|x| x * x).sum();
    let norm = kept.sqrt();
    (amps.into_iter().map(|x| x / norm).collect(), (1.0 - kept).max(0.0))
}

/// Atoms in the selected state; photon already split by the first mirror.
///
/// Single photon: `(a_L† + a_R†)/sqrt(2) |vac>`. Coherent:
/// `|alpha/sqrt(2)>_L |alpha/sqrt(2)>_R`, truncated and renormalized.
pub fn prepare_initial_state(params: &ModelParams, space: &SpaceDescriptor) -> Result<DensityMatrix> {
    params.validate()?;
    if &params.space()? != space {
        return Err(Error::SpaceMismatch {
            left: params.space()?.to_string(),
            right: space.to_string(),
        });
    }
    let atoms = params.initial_atoms.amplitudes()?;
    let d = params.n_max + 1;
    let photons = match params.input {
        InputKind::SinglePhoton => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let mut v = CVector::zeros(d * d);
            v[d] = C64::new(s, 0.0); // |1>_L |0>_R
            v[1] = C64::new(s, 0.0); // |0>_L |1>_R
            v
        }
        InputKind::Coherent { alpha } => {
            let (amps, tail) = coherent_amplitudes(alpha / 2f64.sqrt(), params.n_max);
            if tail >= TRUNCATION_TAIL {
                return Err(Error::config(format!(
                    "Fock cutoff n_max = {} discards {tail:.3e} of the coherent state; raise n_max",
                    params.n_max
                )));
            }
            let mode = CVector::from_iterator(d, amps.into_iter().map(|x| C64::new(x, 0.0)));
            mode.kronecker(&mode)
        }
    };
    DensityMatrix::from_pure(space.clone(), &atoms.kronecker(&photons))
}

fn split_mode(space: &SpaceDescriptor, sign: f64) -> Result<Operator> {
    let n_max = space
        .local_dim(MODE_L)
        .ok_or_else(|| Error::argument("space has no cavity modes"))?
        - 1;
    let a = crate::hilbert::annihilator(n_max)?;
    let a_l = embed(&a, MODE_L, space)?;
    let a_r = embed(&a, MODE_R, space)?;
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Ok((&a_l + &a_r.scale(C64::new(sign, 0.0))).scale(s))
}

/// Heralding port `a_R' = (a_L - a_R)/sqrt(2)`.
pub fn detector_jump_operator(space: &SpaceDescriptor) -> Result<Operator> {
    split_mode(space, -1.0)
}

/// Failure port `a_L' = (a_L + a_R)/sqrt(2)`.
pub fn companion_jump_operator(space: &SpaceDescriptor) -> Result<Operator> {
    split_mode(space, 1.0)
}

/// `2 Gamma Tr[a_R'† a_R' rho]`: probability per unit time of a herald.
pub fn click_density(rho: &DensityMatrix, gamma_cav: f64) -> Result<f64> {
    let jump = detector_jump_operator(rho.space())?;
    let weight = rho.expectation(&(&jump.adjoint() * &jump))?.re;
    let pc = 2.0 * gamma_cav * weight;
    if pc < -NEGATIVE_CLICK_TOL {
        return Err(Error::NumericalHealth(format!("negative click density {pc:e}")));
    }
    Ok(pc)
}

/// Applies `a_R'`, traces out both modes and normalizes.
pub fn post_click_atom_state(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let jump = detector_jump_operator(rho.space())?;
    let clicked = rho.sandwich(&jump)?;
    let weight = clicked.trace();
    if !(weight.is_finite() && weight > 0.0) {
        return Err(Error::UndefinedConditionalState { weight });
    }
    partial_trace(&clicked, &[ATOM_L, ATOM_R])?.normalized()
}

/// `<psi_minus| rho |psi_minus>` for a normalized two-atom state.
pub fn fidelity_vs_target(rho_atoms: &DensityMatrix, target: &BellTargets) -> Result<f64> {
    if rho_atoms.space() != &SpaceDescriptor::two_atoms() {
        return Err(Error::argument(format!(
            "fidelity needs a two-atom state, got {}",
            rho_atoms.space()
        )));
    }
    let tr = rho_atoms.trace();
    if (tr - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::argument(format!("state is not normalized (trace {tr})")));
    }
    rho_atoms.population(&target.psi_minus)
}

/// Integration settings for [`run_protocol_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Step size; defaults to [`ModelParams::default_dt`].
    pub dt: Option<f64>,
    /// Horizon; defaults to [`ModelParams::default_t_max`].
    pub t_max: Option<f64>,
    /// Keep every `record_stride`-th sample in the trajectory; 0 keeps none.
    /// Integrals always use every step.
    pub record_stride: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { dt: None, t_max: None, record_stride: 1 }
    }
}

impl RunOptions {
    /// Summary only, no trajectory samples.
    pub fn summary_only() -> Self {
        RunOptions { record_stride: 0, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Click-weighted mean fidelity, conditioned on a herald.
    pub f_average: f64,
    /// Herald probability integrated over `[0, t_max]`.
    pub p_total: f64,
    pub params: ModelParams,
    pub t_max: f64,
    pub dt: f64,
    pub steps: usize,
    /// Upper bound on heralds missed after `t_max`: remaining excitations.
    pub truncated_tail_bound: f64,
    pub max_hermiticity_drift: f64,
}

/// Runs the protocol with default integration settings.
pub fn run_protocol(params: &ModelParams) -> Result<(Trajectory, RunSummary)> {
    run_protocol_with(params, &RunOptions::default())
}

pub fn run_protocol_with(params: &ModelParams, opts: &RunOptions) -> Result<(Trajectory, RunSummary)> {
    params.validate()?;
    let space = params.space()?;
    let rho0 = prepare_initial_state(params, &space)?;
    let dt = opts.dt.unwrap_or_else(|| params.default_dt());
    let t_max = opts.t_max.unwrap_or_else(|| params.default_t_max());

    let ops = ModelOperators::new(&space)?;
    let jump = detector_jump_operator(&space)?;
    let targets = BellTargets::new();
    let modes = CMatrix::identity(
        space.local_dim(MODE_L).unwrap() * space.local_dim(MODE_R).unwrap(),
        space.local_dim(MODE_L).unwrap() * space.local_dim(MODE_R).unwrap(),
    );
    let target_proj = Operator::new(
        space.clone(),
        (&targets.psi_minus * targets.psi_minus.adjoint()).kronecker(&modes),
    )?;
    let click_op = &jump.adjoint() * &jump;
    // Tr[P_bell Tr_modes(a rho a†)] = Tr[a† (P_bell ⊗ 1) a rho]
    let fid_op = &(&jump.adjoint() * &target_proj) * &jump;
    let exc_op = ops.excitation_number();

    let two_gamma = 2.0 * params.gamma_cav;
    let mut traj = Trajectory::default();
    let mut pc_sum = 0.0;
    let mut pcf_sum = 0.0;
    let mut first = None;
    let mut last = (0.0, 0.0);
    let mut tail = 0.0;
    let mut index = 0usize;
    let mut observables = None;

    let stats = evolve(&rho0, params, t_max, dt, |prop| {
        let (click, fid, exc) = match &observables {
            Some(o) => o,
            None => {
                observables = Some((
                    prop.observable(&click_op)?,
                    prop.observable(&fid_op)?,
                    prop.observable(&exc_op)?,
                ));
                observables.as_ref().unwrap()
            }
        };
        let w = prop.measure(click).re;
        let wf = prop.measure(fid).re;
        let pc = two_gamma * w;
        if pc < -NEGATIVE_CLICK_TOL {
            return Err(Error::NumericalHealth(format!(
                "negative click density {pc:e} at t = {}",
                prop.time()
            )));
        }
        let pcf = two_gamma * wf;
        pc_sum += pc;
        pcf_sum += pcf;
        if first.is_none() {
            first = Some((pc, pcf));
        }
        last = (pc, pcf);
        tail = prop.measure(exc).re;

        if opts.record_stride > 0 && index.is_multiple_of(opts.record_stride) {
            traj.times.push(prop.time());
            traj.pc.push(pc);
            traj.fidelity.push(if w > 0.0 { wf / w } else { 0.0 });
            traj.trace.push(prop.trace());
        }
        index += 1;
        Ok(())
    })?;

    let (pc0, pcf0) = first.unwrap_or((0.0, 0.0));
    let h = stats.dt;
    let (p_total, weighted) = if stats.steps_accepted == 0 {
        (0.0, 0.0)
    } else {
        (
            h * (pc_sum - 0.5 * (pc0 + last.0)),
            h * (pcf_sum - 0.5 * (pcf0 + last.1)),
        )
    };
    let f_average = if p_total > 0.0 { weighted / p_total } else { 0.0 };

    traj.steps_accepted = stats.steps_accepted;
    traj.max_hermiticity_drift = stats.max_hermiticity_drift;
    let summary = RunSummary {
        f_average,
        p_total,
        params: params.clone(),
        t_max,
        dt: stats.dt,
        steps: stats.steps_accepted,
        truncated_tail_bound: tail.max(0.0),
        max_hermiticity_drift: stats.max_hermiticity_drift,
    };
    Ok((traj, summary))
}
