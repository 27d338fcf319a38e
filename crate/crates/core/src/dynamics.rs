//! Conditional (no-click) evolution of the two-cavity system.
//!
//! The Hamiltonian is written in the frame rotating at the cavity frequency,
//! so only the detuning `delta = omega - nu` survives:
//!
//! ```text
//! H = sum_j [ delta |e><e|_j + g (|e><1|_j a_j + |1><e|_j a_j†) ] - i Gamma (n_L + n_R)
//! d rho/dt = -i (H rho - rho H†) - lambda sum_j [P_e^j, [P_e^j, rho]]
//! ```
//!
//! All rates are in units of `g`. The trace of `rho` is the probability that
//! no photon has left either cavity yet.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilator, atomic_operators, embed, CMatrix, CVector, DensityMatrix,
    FactorKind, Operator, SpaceDescriptor, ACTIVE, ATOM_DIM, ATOM_L, ATOM_R, EXCITED, GROUND,
    MODE_L, MODE_R,
};

/// Poisson tail mass allowed beyond the Fock cutoff of each mode.
pub const TRUNCATION_TAIL: f64 = 1e-8;
/// Hermiticity drift (max entry of `|rho - rho†|`) that aborts an integration.
pub const MAX_HERMITICITY_DRIFT: f64 = 1e-8;
/// Largest trace increase tolerated in one step.
pub const MAX_TRACE_INCREASE: f64 = 1e-9;
/// Integrator steps per fastest period, expressed as `dt * max_rate`.
pub const DEFAULT_STEP_FRACTION: f64 = 0.02;
/// Default horizon in cavity intensity lifetimes `1/(2 Gamma)`.
pub const DEFAULT_LIFETIMES: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputKind {
    SinglePhoton,
    /// Coherent pulse of amplitude `alpha` before the first splitter; each
    /// cavity receives `alpha / sqrt(2)`.
    Coherent { alpha: f64 },
}

impl InputKind {
    pub fn name(&self) -> &'static str {
        match self {
            InputKind::SinglePhoton => "single_photon",
            InputKind::Coherent { .. } => "coherent",
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            InputKind::SinglePhoton => None,
            InputKind::Coherent { alpha } => Some(alpha),
        }
    }
}

/// Two-atom initial state.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialAtoms {
    /// `|+>|+>` with `|+> = (|0> + |1>)/sqrt(2)`.
    PlusPlus,
    S00,
    S11,
    S01,
    S10,
    /// Nine amplitudes over `|a_L a_R>`, `a in {0, 1, e}`, row-major.
    Custom(Vec<C64>),
}

impl InitialAtoms {
    pub fn name(&self) -> &'static str {
        match self {
            InitialAtoms::PlusPlus => "plus_plus",
            InitialAtoms::S00 => "s00",
            InitialAtoms::S11 => "s11",
            InitialAtoms::S01 => "s01",
            InitialAtoms::S10 => "s10",
            InitialAtoms::Custom(_) => "custom",
        }
    }

    /// Parses the named presets; `custom` needs amplitudes and is rejected here.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "plus_plus" => Ok(InitialAtoms::PlusPlus),
            "s00" => Ok(InitialAtoms::S00),
            "s11" => Ok(InitialAtoms::S11),
            "s01" => Ok(InitialAtoms::S01),
            "s10" => Ok(InitialAtoms::S10),
            "custom" => Err(Error::config("initial_atoms = custom requires atom amplitudes")),
            other => Err(Error::config(format!("unknown initial atom state '{other}'"))),
        }
    }

    /// Normalized two-atom state vector (dimension 9).
    pub fn amplitudes(&self) -> Result<CVector> {
        let basis = |a: usize, b: usize| {
            let mut v = CVector::zeros(ATOM_DIM * ATOM_DIM);
            v[a * ATOM_DIM + b] = C64::new(1.0, 0.0);
            v
        };
        let v = match self {
            InitialAtoms::PlusPlus => {
                let mut plus = CVector::zeros(ATOM_DIM);
                plus[GROUND] = C64::new(0.5f64.sqrt(), 0.0);
                plus[ACTIVE] = C64::new(0.5f64.sqrt(), 0.0);
                plus.kronecker(&plus)
            }
            InitialAtoms::S00 => basis(GROUND, GROUND),
            InitialAtoms::S11 => basis(ACTIVE, ACTIVE),
            InitialAtoms::S01 => basis(GROUND, ACTIVE),
            InitialAtoms::S10 => basis(ACTIVE, GROUND),
            InitialAtoms::Custom(amps) => {
                if amps.len() != ATOM_DIM * ATOM_DIM {
                    return Err(Error::config(format!(
                        "custom atom state needs 9 amplitudes, got {}",
                        amps.len()
                    )));
                }
                let v = CVector::from_column_slice(amps);
                let norm = v.norm();
                if (norm - 1.0).abs() > 1e-10 {
                    return Err(Error::config(format!(
                        "custom atom state is not normalized (norm {norm})"
                    )));
                }
                v
            }
        };
        Ok(v)
    }
}

/// Physical parameters, all rates in units of the coupling `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub g: f64,
    /// Detuning between atomic transition and cavity/photon frequency.
    pub delta: f64,
    /// Cavity amplitude decay rate.
    pub gamma_cav: f64,
    /// Dephasing rate of the excited state.
    pub lambda_deph: f64,
    /// Fock cutoff per mode.
    pub n_max: usize,
    pub input: InputKind,
    pub initial_atoms: InitialAtoms,
}

/// Decay rate at which the dispersive phase accumulated over one cavity
/// amplitude lifetime is exactly pi: `g^2 / (pi delta)`.
pub fn matched_decay_rate(g: f64, delta: f64) -> f64 {
    g * g / (PI * delta)
}

/// `P(N > n_max)` for `N ~ Poisson(mean)`, summed from the tail side.
pub fn poisson_tail(mean: f64, n_max: usize) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let mut term = (-mean).exp();
    for n in 1..=n_max + 1 {
        term *= mean / n as f64;
    }
    let mut total = 0.0;
    let mut n = n_max + 1;
    while term > total * 1e-17 && n < n_max + 1000 {
        total += term;
        n += 1;
        term *= mean / n as f64;
    }
    total
}

/// Smallest cutoff `n_max >= 1` with per-mode tail mass below
/// [`TRUNCATION_TAIL`] for a cavity amplitude of `alpha / sqrt(2)`.
pub fn coherent_truncation(alpha: f64) -> usize {
    let mean = alpha * alpha / 2.0;
    (1..).find(|&n| poisson_tail(mean, n) < TRUNCATION_TAIL).unwrap()
}

impl ModelParams {
    pub fn single_photon(delta: f64, gamma_cav: f64, lambda_deph: f64) -> Self {
        ModelParams {
            g: 1.0,
            delta,
            gamma_cav,
            lambda_deph,
            n_max: 1,
            input: InputKind::SinglePhoton,
            initial_atoms: InitialAtoms::PlusPlus,
        }
    }

    /// Coherent input with the smallest adequate Fock cutoff.
    pub fn coherent(delta: f64, gamma_cav: f64, lambda_deph: f64, alpha: f64) -> Self {
        ModelParams {
            g: 1.0,
            delta,
            gamma_cav,
            lambda_deph,
            n_max: coherent_truncation(alpha),
            input: InputKind::Coherent { alpha },
            initial_atoms: InitialAtoms::PlusPlus,
        }
    }

    /// Single photon, `delta = 20`, matched decay, `lambda = 0.1`.
    pub fn reference_single_photon() -> Self {
        Self::single_photon(20.0, matched_decay_rate(1.0, 20.0), 0.1)
    }

    /// Coherent `alpha = 0.2`, `delta = 7`, matched decay, `lambda = 0.5`.
    pub fn reference_coherent() -> Self {
        Self::coherent(7.0, matched_decay_rate(1.0, 7.0), 0.5, 0.2)
    }

    pub fn with_initial_atoms(mut self, atoms: InitialAtoms) -> Self {
        self.initial_atoms = atoms;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("g", self.g)?;
        positive("delta", self.delta)?;
        positive("gamma_cav", self.gamma_cav)?;
        if !(self.lambda_deph.is_finite() && self.lambda_deph >= 0.0) {
            return Err(Error::config(format!(
                "lambda_deph must be non-negative, got {}",
                self.lambda_deph
            )));
        }
        if self.n_max < 1 {
            return Err(Error::config("n_max must be at least 1"));
        }
        match self.input {
            InputKind::SinglePhoton => {
                if self.n_max != 1 {
                    return Err(Error::config(format!(
                        "single-photon input requires n_max = 1, got {}",
                        self.n_max
                    )));
                }
            }
            InputKind::Coherent { alpha } => {
                if !alpha.is_finite() {
                    return Err(Error::config("alpha must be finite"));
                }
                let tail = poisson_tail(alpha * alpha / 2.0, self.n_max);
                if tail >= TRUNCATION_TAIL {
                    return Err(Error::config(format!(
                        "Fock cutoff n_max = {} leaves tail mass {tail:.3e} per mode for alpha = {alpha}; \
                         raise n_max to at least {}",
                        self.n_max,
                        coherent_truncation(alpha)
                    )));
                }
            }
        }
        self.initial_atoms.amplitudes()?;
        Ok(())
    }

    pub fn space(&self) -> Result<SpaceDescriptor> {
        SpaceDescriptor::cavity_qed(self.n_max)
    }

    /// `0.02 / max(delta, g, Gamma, lambda)`.
    pub fn default_dt(&self) -> f64 {
        let fastest = self
            .delta
            .max(self.g)
            .max(self.gamma_cav)
            .max(self.lambda_deph);
        DEFAULT_STEP_FRACTION / fastest
    }

    /// Eight intensity lifetimes, `8 / (2 Gamma)`.
    pub fn default_t_max(&self) -> f64 {
        DEFAULT_LIFETIMES / (2.0 * self.gamma_cav)
    }

    /// `Gamma / (g^2 / (pi delta))`.
    pub fn gamma_norm(&self) -> f64 {
        self.gamma_cav / matched_decay_rate(self.g, self.delta)
    }
}

/// Full-space operators used by the model.
#[derive(Debug, Clone)]
pub struct ModelOperators {
    pub a_l: Operator,
    pub a_r: Operator,
    pub excited_l: Operator,
    pub excited_r: Operator,
    pub sigma_plus_l: Operator,
    pub sigma_plus_r: Operator,
}

impl ModelOperators {
    pub fn new(space: &SpaceDescriptor) -> Result<Self> {
        let n_max = space
            .local_dim(MODE_L)
            .filter(|_| space.factors_of_kind(FactorKind::Mode) == [MODE_L, MODE_R])
            .ok_or_else(|| Error::argument(format!("space {space} is not atom x atom x mode x mode")))?
            - 1;
        let a = annihilator(n_max)?;
        let atom = atomic_operators();
        Ok(ModelOperators {
            a_l: embed(&a, MODE_L, space)?,
            a_r: embed(&a, MODE_R, space)?,
            excited_l: embed(&atom.proj_e, ATOM_L, space)?,
            excited_r: embed(&atom.proj_e, ATOM_R, space)?,
            sigma_plus_l: embed(&atom.sigma_plus, ATOM_L, space)?,
            sigma_plus_r: embed(&atom.sigma_plus, ATOM_R, space)?,
        })
    }

    /// `n_L + n_R`.
    pub fn photon_number(&self) -> Operator {
        &(&self.a_l.adjoint() * &self.a_l) + &(&self.a_r.adjoint() * &self.a_r)
    }

    /// Photons plus atomic excitations; conserved by the Hermitian part of `H`.
    pub fn excitation_number(&self) -> Operator {
        &(&self.photon_number() + &self.excited_l) + &self.excited_r
    }
}

/// Non-Hermitian rotating-frame Hamiltonian.
pub fn build_hamiltonian(params: &ModelParams, space: &SpaceDescriptor) -> Result<Operator> {
    let expected = params.space()?;
    if &expected != space {
        return Err(Error::SpaceMismatch {
            left: expected.to_string(),
            right: space.to_string(),
        });
    }
    let ops = ModelOperators::new(space)?;
    let g = C64::new(params.g, 0.0);
    let delta = C64::new(params.delta, 0.0);
    let mut h = Operator::zeros(space);
    for (excited, sigma_plus, a) in [
        (&ops.excited_l, &ops.sigma_plus_l, &ops.a_l),
        (&ops.excited_r, &ops.sigma_plus_r, &ops.a_r),
    ] {
        let absorb = sigma_plus * a;
        let emit = absorb.adjoint();
        h = &h + &excited.scale(delta);
        h = &h + &(&absorb + &emit).scale(g);
    }
    let leak = ops.photon_number().scale(C64::new(0.0, -params.gamma_cav));
    Ok(&h + &leak)
}

/// Per-basis-state excited flags of each atom, used by the dephasing term.
fn excited_flags(space: &SpaceDescriptor) -> Vec<Vec<f64>> {
    let atoms = space.factors_of_kind(FactorKind::Atom);
    (0..space.total_dim())
        .map(|i| {
            let d = space.digits(i);
            atoms
                .iter()
                .map(|&a| if d[a] == EXCITED { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Elementwise dephasing rates `lambda * sum_j (p_j(i) - p_j(k))^2`; the
/// double commutator with a diagonal projector acts entrywise.
fn dephasing_rates(flags: &[Vec<f64>], lambda: f64) -> CMatrix {
    let n = flags.len();
    CMatrix::from_fn(n, n, |i, k| {
        let s: f64 = flags[i]
            .iter()
            .zip(&flags[k])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        C64::new(lambda * s, 0.0)
    })
}

/// `d rho / dt` for the non-Hermitian Hamiltonian `h` plus excited-state
/// dephasing on every atom factor of the space.
pub fn lindblad_rhs(rho: &DensityMatrix, h: &Operator, lambda_deph: f64) -> Result<CMatrix> {
    if rho.space() != h.space() {
        return Err(Error::argument(format!(
            "state on {} but Hamiltonian on {}",
            rho.space(),
            h.space()
        )));
    }
    let minus_i = C64::new(0.0, -1.0);
    let r = rho.data();
    let coherent = (h.data() * r - r * h.data().adjoint()) * minus_i;
    let rates = dephasing_rates(&excited_flags(rho.space()), lambda_deph);
    Ok(coherent - rates.component_mul(r))
}

/// Precomputed `Tr[A rho]` functional restricted to a propagator's subspace.
#[derive(Debug, Clone)]
pub struct Observable {
    // Transposed restriction, so evaluation is an elementwise dot product.
    weights: Vec<C64>,
}

/// Fixed-step RK4 propagator for the conditional master equation.
///
/// Both the Hamiltonian and the dephasing term map basis-state support
/// `i <-> k` only along nonzero entries of `H`, so the state never leaves the
/// span of basis states reachable from the initial support. The propagator
/// integrates on that invariant block; results are identical to integrating
/// the full matrix.
#[derive(Debug, Clone)]
pub struct NoClickPropagator {
    space: SpaceDescriptor,
    basis: Vec<usize>,
    dim: usize,
    // Sparse entries of -i H and +i H* on the block: (row, col, weight).
    left: Vec<(usize, usize, C64)>,
    right: Vec<(usize, usize, C64)>,
    dephasing: Vec<f64>,
    rho: Vec<C64>,
    time: f64,
    steps: usize,
    max_drift: f64,
    k: [Vec<C64>; 4],
    stage: Vec<C64>,
}

impl NoClickPropagator {
    pub fn new(rho0: &DensityMatrix, h: &Operator, lambda_deph: f64) -> Result<Self> {
        if rho0.space() != h.space() {
            return Err(Error::argument("initial state and Hamiltonian live on different spaces"));
        }
        if rho0.hermiticity_defect() > MAX_HERMITICITY_DRIFT {
            return Err(Error::argument("initial state is not Hermitian"));
        }
        let full = rho0.space().total_dim();
        let hd = h.data();
        let r0 = rho0.data();

        let mut in_block = vec![false; full];
        let mut queue: VecDeque<usize> = (0..full)
            .filter(|&i| (0..full).any(|k| r0[(i, k)] != C64::new(0.0, 0.0)))
            .collect();
        for &i in &queue {
            in_block[i] = true;
        }
        while let Some(i) = queue.pop_front() {
            for k in 0..full {
                let linked = hd[(i, k)] != C64::new(0.0, 0.0) || hd[(k, i)] != C64::new(0.0, 0.0);
                if linked && !in_block[k] {
                    in_block[k] = true;
                    queue.push_back(k);
                }
            }
        }
        let basis: Vec<usize> = (0..full).filter(|&i| in_block[i]).collect();
        let dim = basis.len();

        let mut left = Vec::new();
        let mut right = Vec::new();
        for (r, &gr) in basis.iter().enumerate() {
            for (c, &gc) in basis.iter().enumerate() {
                let v = hd[(gr, gc)];
                if v != C64::new(0.0, 0.0) {
                    left.push((r, c, C64::new(0.0, -1.0) * v));
                    right.push((r, c, C64::new(0.0, 1.0) * v.conj()));
                }
            }
        }

        let flags = excited_flags(rho0.space());
        let mut dephasing = vec![0.0; dim * dim];
        for (c, &gc) in basis.iter().enumerate() {
            for (r, &gr) in basis.iter().enumerate() {
                let s: f64 = flags[gr]
                    .iter()
                    .zip(&flags[gc])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                dephasing[r + c * dim] = lambda_deph * s;
            }
        }

        let mut rho = vec![C64::new(0.0, 0.0); dim * dim];
        for (c, &gc) in basis.iter().enumerate() {
            for (r, &gr) in basis.iter().enumerate() {
                rho[r + c * dim] = r0[(gr, gc)];
            }
        }
        let zeros = vec![C64::new(0.0, 0.0); dim * dim];
        Ok(NoClickPropagator {
            space: rho0.space().clone(),
            basis,
            dim,
            left,
            right,
            dephasing,
            rho,
            time: 0.0,
            steps: 0,
            max_drift: 0.0,
            k: [zeros.clone(), zeros.clone(), zeros.clone(), zeros.clone()],
            stage: zeros,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps_accepted(&self) -> usize {
        self.steps
    }

    pub fn max_hermiticity_drift(&self) -> f64 {
        self.max_drift
    }

    /// Dimension of the invariant block actually integrated.
    pub fn block_dim(&self) -> usize {
        self.dim
    }

    /// Full-space indices spanned by the invariant block.
    pub fn block_basis(&self) -> &[usize] {
        &self.basis
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.rho[i + i * self.dim].re).sum()
    }

    /// Current state embedded back into the full space.
    pub fn state(&self) -> DensityMatrix {
        let full = self.space.total_dim();
        let mut data = CMatrix::zeros(full, full);
        for (c, &gc) in self.basis.iter().enumerate() {
            for (r, &gr) in self.basis.iter().enumerate() {
                data[(gr, gc)] = self.rho[r + c * self.dim];
            }
        }
        DensityMatrix::from_raw(self.space.clone(), data)
    }

    pub fn observable(&self, op: &Operator) -> Result<Observable> {
        if op.space() != &self.space {
            return Err(Error::argument("observable lives on a different space"));
        }
        let d = op.data();
        let mut weights = vec![C64::new(0.0, 0.0); self.dim * self.dim];
        for (c, &gc) in self.basis.iter().enumerate() {
            for (r, &gr) in self.basis.iter().enumerate() {
                // Tr[A rho] = sum_{r,c} A[c, r] rho[r, c]
                weights[r + c * self.dim] = d[(gc, gr)];
            }
        }
        Ok(Observable { weights })
    }

    /// `Tr[A rho]` for a precomputed observable.
    pub fn measure(&self, obs: &Observable) -> C64 {
        obs.weights
            .iter()
            .zip(&self.rho)
            .fold(C64::new(0.0, 0.0), |acc, (w, r)| acc + w * r)
    }

    /// Right-hand side on the block, written into `out`.
    fn rhs_into(
        left: &[(usize, usize, C64)],
        right: &[(usize, usize, C64)],
        dephasing: &[f64],
        dim: usize,
        rho: &[C64],
        out: &mut [C64],
    ) {
        for ((o, r), d) in out.iter_mut().zip(rho).zip(dephasing) {
            *o = -*r * *d;
        }
        // -i H rho, column by column.
        for (out_col, rho_col) in out.chunks_exact_mut(dim).zip(rho.chunks_exact(dim)) {
            for &(r, c, w) in left {
                out_col[r] += w * rho_col[c];
            }
        }
        // +i rho H†: column r of the result gathers column c of rho.
        for &(r, c, w) in right {
            let (src, dst) = (c * dim, r * dim);
            for i in 0..dim {
                let v = rho[src + i];
                out[dst + i] += w * v;
            }
        }
    }

    /// One RK4 step of size `dt`, followed by re-symmetrization.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let n2 = self.dim * self.dim;
        let trace_before = self.trace();
        let half = C64::new(0.5 * dt, 0.0);
        let full = C64::new(dt, 0.0);
        let (left, right, deph, dim) = (&self.left, &self.right, &self.dephasing, self.dim);
        let [k1, k2, k3, k4] = &mut self.k;

        Self::rhs_into(left, right, deph, dim, &self.rho, k1);
        shifted(&mut self.stage, &self.rho, half, k1);
        Self::rhs_into(left, right, deph, dim, &self.stage, k2);
        shifted(&mut self.stage, &self.rho, half, k2);
        Self::rhs_into(left, right, deph, dim, &self.stage, k3);
        shifted(&mut self.stage, &self.rho, full, k3);
        Self::rhs_into(left, right, deph, dim, &self.stage, k4);
        let sixth = C64::new(dt / 6.0, 0.0);
        let two = C64::new(2.0, 0.0);
        for i in 0..n2 {
            self.rho[i] += sixth * (k1[i] + two * (k2[i] + k3[i]) + k4[i]);
        }

        let mut drift = 0.0f64;
        for c in 0..dim {
            for r in 0..=c {
                let (a, b) = (self.rho[r + c * dim], self.rho[c + r * dim]);
                drift = drift.max((a - b.conj()).norm());
                let sym = (a + b.conj()) * 0.5;
                self.rho[r + c * dim] = sym;
                self.rho[c + r * dim] = sym.conj();
            }
        }
        self.time += dt;
        self.max_drift = self.max_drift.max(drift);
        let trace_after = self.trace();
        if drift > MAX_HERMITICITY_DRIFT || !trace_after.is_finite() {
            return Err(self.failure(format!("Hermiticity drift {drift:e} exceeds {MAX_HERMITICITY_DRIFT:e}"), drift));
        }
        if trace_after - trace_before > MAX_TRACE_INCREASE {
            return Err(self.failure(
                format!("trace increased by {:e} in one step", trace_after - trace_before),
                drift,
            ));
        }
        self.steps += 1;
        Ok(())
    }

    fn failure(&self, reason: String, drift: f64) -> Error {
        Error::Integration {
            step: self.steps + 1,
            time: self.time,
            reason,
            hermiticity_drift: drift,
            trace: self.trace(),
        }
    }
}

/// Integrator bookkeeping for one evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionStats {
    pub steps_accepted: usize,
    /// Step actually used: `t_end / steps`, never larger than the request.
    pub dt: f64,
    pub t_end: f64,
    pub max_hermiticity_drift: f64,
    pub final_trace: f64,
    pub block_dim: usize,
}

/// `out = base + h k`, elementwise.
fn shifted(out: &mut [C64], base: &[C64], h: C64, k: &[C64]) {
    for ((o, b), k) in out.iter_mut().zip(base).zip(k) {
        *o = b + h * k;
    }
}

/// Number of equal steps of size at most `dt` covering `[0, t_end]`.
pub fn step_count(t_end: f64, dt: f64) -> usize {
    if t_end <= 0.0 {
        return 0;
    }
    ((t_end / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Integrates the conditional master equation from `rho0` to `t_end`.
///
/// `observer` is called at `t = 0` and after every accepted step; full
/// snapshots are never retained.
pub fn evolve<F>(
    rho0: &DensityMatrix,
    params: &ModelParams,
    t_end: f64,
    dt: f64,
    mut observer: F,
) -> Result<EvolutionStats>
where
    F: FnMut(&NoClickPropagator) -> Result<()>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::argument(format!("step size must be positive, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::argument(format!("end time must be non-negative, got {t_end}")));
    }
    params.validate()?;
    let h = build_hamiltonian(params, rho0.space())?;
    let mut prop = NoClickPropagator::new(rho0, &h, params.lambda_deph)?;
    let n = step_count(t_end, dt);
    let h_step = if n > 0 { t_end / n as f64 } else { dt };
    observer(&prop)?;
    for k in 1..=n {
        prop.step(h_step)?;
        // Avoid accumulated round-off in the clock.
        prop.time = k as f64 * h_step;
        observer(&prop)?;
    }
    Ok(EvolutionStats {
        steps_accepted: prop.steps_accepted(),
        dt: h_step,
        t_end,
        max_hermiticity_drift: prop.max_hermiticity_drift(),
        final_trace: prop.trace(),
        block_dim: prop.block_dim(),
    })
}

/// Sampled observables of one conditional evolution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Click density at the heralding port, per unit time.
    pub pc: Vec<f64>,
    /// Overlap of the heralded atom state with the target Bell state.
    pub fidelity: Vec<f64>,
    pub trace: Vec<f64>,
    pub steps_accepted: usize,
    pub max_hermiticity_drift: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::hermiticity_defect;
    use approx::assert_abs_diff_eq;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn poisson_tail_matches_direct_sum() {
        for &(mean, n) in &[(0.02f64, 1usize), (0.5, 3), (2.0, 6)] {
            let mut term = (-mean).exp();
            let mut head = term;
            for k in 1..=n {
                term *= mean / k as f64;
                head += term;
            }
            assert_abs_diff_eq!(poisson_tail(mean, n), 1.0 - head, epsilon = 1e-14);
        }
        assert_eq!(coherent_truncation(0.2), 3);
        assert_eq!(coherent_truncation(0.0), 1);
    }

    #[test]
    fn validation_rules() {
        let ok = ModelParams::reference_single_photon();
        ok.validate().unwrap();
        let mut p = ok.clone();
        p.n_max = 2;
        assert!(p.validate().is_err());
        let mut p = ok.clone();
        p.delta = 0.0;
        assert!(p.validate().is_err());
        let mut p = ok.clone();
        p.lambda_deph = -0.1;
        assert!(p.validate().is_err());
        let mut p = ModelParams::reference_coherent();
        p.validate().unwrap();
        p.n_max = 2;
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("raise n_max"), "{err}");
    }

    #[test]
    fn defaults() {
        let p = ModelParams::reference_single_photon();
        assert_abs_diff_eq!(p.default_dt(), 0.001, epsilon = 1e-15);
        assert_abs_diff_eq!(p.default_t_max(), 4.0 * 20.0 * PI, epsilon = 1e-9);
        assert_abs_diff_eq!(p.gamma_norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn uncoupled_lossless_hamiltonian_is_diagonal_detuning() {
        let mut p = ModelParams::single_photon(20.0, 1.0, 0.0);
        p.g = 0.0;
        p.gamma_cav = 0.0;
        let space = p.space().unwrap();
        let h = build_hamiltonian(&p, &space).unwrap();
        assert_eq!(h.data().nrows(), 36);
        for i in 0..36 {
            for k in 0..36 {
                if i != k {
                    assert_eq!(h.data()[(i, k)], c(0.0));
                }
            }
            let d = space.digits(i);
            let n_exc = (d[ATOM_L] == EXCITED) as usize + (d[ATOM_R] == EXCITED) as usize;
            assert_abs_diff_eq!(h.data()[(i, i)].re, 20.0 * n_exc as f64);
        }
    }

    #[test]
    fn lossless_hamiltonian_conserves_excitations() {
        for n_max in [1, 3] {
            let mut p = ModelParams::single_photon(7.0, 1.0, 0.3);
            p.n_max = n_max;
            p.input = InputKind::Coherent { alpha: 0.1 };
            p.gamma_cav = 0.0;
            let space = p.space().unwrap();
            let h = build_hamiltonian(&p, &space).unwrap();
            assert!(h.is_hermitian());
            let n_exc = ModelOperators::new(&space).unwrap().excitation_number();
            assert!(h.commutator(&n_exc).max_abs() < 1e-13);
        }
    }

    #[test]
    fn anti_hermitian_part_is_photon_number_leak() {
        let p = ModelParams::reference_coherent();
        let space = p.space().unwrap();
        let h = build_hamiltonian(&p, &space).unwrap();
        let anti = (h.data() - h.data().adjoint()) * C64::new(0.0, 0.5);
        let n = ModelOperators::new(&space).unwrap().photon_number();
        assert_abs_diff_eq!((anti - n.data() * c(p.gamma_cav)).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn hamiltonian_rejects_mismatched_space() {
        let p = ModelParams::reference_single_photon();
        let space = SpaceDescriptor::cavity_qed(2).unwrap();
        assert!(build_hamiltonian(&p, &space).is_err());
    }

    fn random_state(space: &SpaceDescriptor, seed: u64) -> DensityMatrix {
        let n = space.total_dim();
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = CMatrix::from_fn(n, n, |_, _| C64::new(next(), next()));
        let m = &a * a.adjoint();
        let tr = m.trace();
        DensityMatrix::new(space.clone(), m / tr).unwrap()
    }

    #[test]
    fn rhs_preserves_hermiticity_and_unitary_trace() {
        let mut p = ModelParams::reference_single_photon();
        p.gamma_cav = 0.0;
        p.lambda_deph = 0.0;
        let space = p.space().unwrap();
        let h = build_hamiltonian(&p, &space).unwrap();
        let rho = random_state(&space, 7);
        let d = lindblad_rhs(&rho, &h, 0.0).unwrap();
        assert!(d.trace().norm() < 1e-13);
        let d = lindblad_rhs(&rho, &build_hamiltonian(&ModelParams::reference_single_photon(), &space).unwrap(), 0.4).unwrap();
        assert!(hermiticity_defect(&d) < 1e-13);
    }

    #[test]
    fn dephasing_is_trace_free_and_leak_balances() {
        let p = ModelParams::reference_single_photon();
        let space = p.space().unwrap();
        let h = build_hamiltonian(&p, &space).unwrap();
        let rho = random_state(&space, 11);
        let n = ModelOperators::new(&space).unwrap().photon_number();
        let d = lindblad_rhs(&rho, &h, 0.7).unwrap();
        let expected = -2.0 * p.gamma_cav * rho.expectation(&n).unwrap().re;
        assert_abs_diff_eq!(d.trace().re, expected, epsilon = 1e-14);
    }

    #[test]
    fn rhs_rejects_mismatched_shapes() {
        let p = ModelParams::reference_single_photon();
        let h = build_hamiltonian(&p, &p.space().unwrap()).unwrap();
        let rho = DensityMatrix::new(SpaceDescriptor::two_atoms(), CMatrix::identity(9, 9)).unwrap();
        assert!(matches!(lindblad_rhs(&rho, &h, 0.1), Err(Error::Argument(_))));
    }

    #[test]
    fn dephasing_decays_single_atom_coherence() {
        // g = Gamma = 0: the |e><1| element of atom L decays as exp(-lambda t)
        // while populations stay put.
        let lambda = 0.3;
        let mut p = ModelParams::single_photon(5.0, 1.0, lambda);
        p.g = 1e-300;
        p.gamma_cav = 1e-300;
        let space = p.space().unwrap();
        let e = space.index_of(&[EXCITED, GROUND, 0, 0]);
        let one = space.index_of(&[ACTIVE, GROUND, 0, 0]);
        let mut psi = CVector::zeros(36);
        psi[e] = c(0.6);
        psi[one] = c(0.8);
        let rho0 = DensityMatrix::from_pure(space.clone(), &psi).unwrap();
        let t_end = 3.0;
        let mut last = None;
        evolve(&rho0, &p, t_end, 1e-3, |prop| {
            last = Some(prop.state());
            Ok(())
        })
        .unwrap();
        let rho = last.unwrap();
        let coh = rho.data()[(e, one)];
        // Rotating at delta on top of the decay.
        let expected = 0.48 * (-lambda * t_end).exp();
        assert_abs_diff_eq!(coh.norm(), expected, epsilon = 1e-10);
        assert_abs_diff_eq!(rho.data()[(e, e)].re, 0.36, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.data()[(one, one)].re, 0.64, epsilon = 1e-12);
    }

    #[test]
    fn stationary_without_couplings() {
        let mut p = ModelParams::single_photon(3.0, 1.0, 0.0);
        p.g = 1e-300;
        p.gamma_cav = 1e-300;
        let space = p.space().unwrap();
        // Support without |e>, so the detuning term never acts.
        let mut rho0 = random_state(&space, 3).into_data();
        for i in 0..36 {
            let d = space.digits(i);
            if d[ATOM_L] == EXCITED || d[ATOM_R] == EXCITED {
                for k in 0..36 {
                    rho0[(i, k)] = c(0.0);
                    rho0[(k, i)] = c(0.0);
                }
            }
        }
        let rho0 = DensityMatrix::new(space, rho0).unwrap();
        let mut last = None;
        evolve(&rho0, &p, 2.0, 0.01, |prop| {
            last = Some(prop.state());
            Ok(())
        })
        .unwrap();
        assert!((last.unwrap().data() - rho0.data()).norm() < 1e-14);
    }

    #[test]
    fn propagator_rhs_matches_dense_rhs() {
        let p = ModelParams::reference_coherent();
        let space = p.space().unwrap();
        let h = build_hamiltonian(&p, &space).unwrap();
        let rho = random_state(&space, 5);
        let prop = NoClickPropagator::new(&rho, &h, p.lambda_deph).unwrap();
        assert_eq!(prop.block_dim(), space.total_dim());
        let mut out = vec![c(0.0); prop.dim * prop.dim];
        NoClickPropagator::rhs_into(&prop.left, &prop.right, &prop.dephasing, prop.dim, &prop.rho, &mut out);
        let dense = lindblad_rhs(&rho, &h, p.lambda_deph).unwrap();
        let fast = CMatrix::from_column_slice(prop.dim, prop.dim, &out);
        assert!((fast - dense).norm() < 1e-12);
    }

    #[test]
    fn single_photon_block_is_one_excitation_sector() {
        let p = ModelParams::reference_single_photon();
        let space = p.space().unwrap();
        let h = build_hamiltonian(&p, &space).unwrap();
        let mut psi = CVector::zeros(36);
        psi[space.index_of(&[ACTIVE, ACTIVE, 1, 0])] = c(1.0);
        let rho = DensityMatrix::from_pure(space.clone(), &psi).unwrap();
        let prop = NoClickPropagator::new(&rho, &h, 0.1).unwrap();
        // Photon in L only couples to |e 1> with empty cavities.
        assert_eq!(prop.block_dim(), 2);

        let rho = crate::protocol::prepare_initial_state(&p, &space).unwrap();
        let prop = NoClickPropagator::new(&rho, &h, 0.1).unwrap();
        // Atoms in {0,1}^2 with a photon in L or R (8), plus one atom excited
        // with the other in {0,1} and no photons (4).
        assert_eq!(prop.block_dim(), 12);
    }

    #[test]
    fn evolve_rejects_bad_step() {
        let p = ModelParams::reference_single_photon();
        let rho = DensityMatrix::new(p.space().unwrap(), CMatrix::identity(36, 36) / c(36.0)).unwrap();
        assert!(evolve(&rho, &p, 1.0, 0.0, |_| Ok(())).is_err());
        assert!(evolve(&rho, &p, 1.0, -1.0, |_| Ok(())).is_err());
    }

    #[test]
    fn step_count_covers_horizon() {
        assert_eq!(step_count(1.0, 0.1), 10);
        assert_eq!(step_count(1.0, 0.3), 4);
        assert_eq!(step_count(0.0, 0.3), 0);
        let t = 8.0 / (2.0 * matched_decay_rate(1.0, 20.0));
        let n = step_count(t, 0.001);
        assert_eq!(step_count(t, t / n as f64), n);
    }
}
