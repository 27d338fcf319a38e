//! Closed-form results for the ideal dispersive interferometer. They serve as
//! oracles for the full simulation.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Dispersive phase `theta = g^2 t / delta`.
pub fn effective_phase(g: f64, delta: f64, t: f64) -> Result<f64> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::argument(format!("detuning must be positive, got {delta}")));
    }
    if t < 0.0 {
        return Err(Error::argument(format!("time must be non-negative, got {t}")));
    }
    Ok(g * g * t / delta)
}

/// Herald probability `sin^2(theta/2) / 2` for `|+>|+>` atoms.
pub fn ideal_success_probability(theta: f64) -> f64 {
    0.5 * (0.5 * theta).sin().powi(2)
}

/// Two-atom basis labels in `|a_L a_R>` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomPair {
    S00,
    S01,
    S10,
    S11,
}

impl AtomPair {
    pub const ALL: [AtomPair; 4] = [AtomPair::S00, AtomPair::S01, AtomPair::S10, AtomPair::S11];

    pub fn label(&self) -> &'static str {
        match self {
            AtomPair::S00 => "00",
            AtomPair::S01 => "01",
            AtomPair::S10 => "10",
            AtomPair::S11 => "11",
        }
    }
}

/// Photon amplitudes at the two output ports for one atomic branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortAmplitudes {
    pub atoms: AtomPair,
    pub l_prime: C64,
    pub r_prime: C64,
}

/// Output-port amplitude table after the second splitter for atomic
/// amplitudes `[a00, a01, a10, a11]`, global phases as conventionally written:
///
/// ```text
/// |00> -> (e^{i theta} a00, 0)
/// |01> -> e^{i theta/2} a01 (cos(theta/2),  i sin(theta/2))
/// |10> -> e^{i theta/2} a10 (cos(theta/2), -i sin(theta/2))
/// |11> -> (a11, 0)
/// ```
pub fn ideal_interferometer_state(theta: f64, atoms: [C64; 4]) -> Result<[PortAmplitudes; 4]> {
    let norm: f64 = atoms.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::argument(format!(
            "atomic amplitudes are not normalized (squared norm {norm})"
        )));
    }
    let half = C64::from_polar(1.0, 0.5 * theta);
    let (c, s) = ((0.5 * theta).cos(), (0.5 * theta).sin());
    let i = C64::new(0.0, 1.0);
    let [a00, a01, a10, a11] = atoms;
    Ok([
        PortAmplitudes {
            atoms: AtomPair::S00,
            l_prime: C64::from_polar(1.0, theta) * a00,
            r_prime: C64::new(0.0, 0.0),
        },
        PortAmplitudes { atoms: AtomPair::S01, l_prime: half * a01 * c, r_prime: half * a01 * i * s },
        PortAmplitudes { atoms: AtomPair::S10, l_prime: half * a10 * c, r_prime: -half * a10 * i * s },
        PortAmplitudes { atoms: AtomPair::S11, l_prime: a11, r_prime: C64::new(0.0, 0.0) },
    ])
}

/// Time-integrated herald probability in the dispersive limit without
/// dephasing: `int 2 Gamma e^{-2 Gamma t} sin^2(phi t / 2) / 2 dt` with
/// `phi = g^2 / delta`, which is `phi^2 / (4 (4 Gamma^2 + phi^2))`.
pub fn analytic_success_dispersive(delta: f64, gamma_cav: f64, g: f64) -> f64 {
    let phi = g * g / delta;
    if gamma_cav.is_infinite() {
        return 0.0;
    }
    let ratio = 2.0 * gamma_cav / phi;
    0.25 / (1.0 + ratio * ratio)
}

/// Leading-order fidelity and herald probability for a weak coherent pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeadingOrder {
    pub fidelity: f64,
    pub probability: f64,
}

/// Weakness above which the leading-order expansion is flagged.
pub const WEAK_PULSE_LIMIT: f64 = 0.3;

/// `(1 - |alpha|^2 sin^2(theta/2)/2, |alpha|^2 sin^2(theta/2)/2)`.
pub fn coherent_leading_order(alpha: f64, theta: f64) -> LeadingOrder {
    let mean = alpha * alpha;
    if mean > WEAK_PULSE_LIMIT {
        log::warn!("|alpha|^2 = {mean} is not small; leading-order expansion is unreliable");
    }
    let p = 0.5 * mean * (0.5 * theta).sin().powi(2);
    LeadingOrder { fidelity: 1.0 - p, probability: p }
}

/// Photon-number distribution of an imperfect source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    probabilities: BTreeMap<u32, f64>,
}

impl SourceSpec {
    pub fn new(probabilities: BTreeMap<u32, f64>) -> Result<Self> {
        if let Some((m, p)) = probabilities.iter().find(|(_, &p)| !p.is_finite() || p < 0.0) {
            return Err(Error::argument(format!("P_{m} = {p} is not a probability")));
        }
        let total: f64 = probabilities.values().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::argument(format!("probabilities sum to {total} > 1")));
        }
        Ok(SourceSpec { probabilities })
    }

    pub fn probability(&self, m: u32) -> f64 {
        self.probabilities.get(&m).copied().unwrap_or(0.0)
    }

    pub fn probabilities(&self) -> &BTreeMap<u32, f64> {
        &self.probabilities
    }
}

/// Worst-case fidelity `1 - sum_{m >= 2} P_m`.
pub fn source_fidelity_bound(source: &SourceSpec) -> f64 {
    1.0 - source.probabilities.range(2..).map(|(_, p)| p).sum::<f64>()
}
