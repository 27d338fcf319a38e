//! Reference computations that share no code with the simulator: a
//! single-photon state-vector model assembled from basis arithmetic and an
//! exact propagator for it.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

/// Dimension of two three-level atoms and two modes truncated at one photon.
pub const DIM: usize = 36;

/// Basis index of `|a_L a_R> |n_L n_R>`, atoms in `{0, 1, e} = {0, 1, 2}`.
pub fn index(al: usize, ar: usize, nl: usize, nr: usize) -> usize {
    ((al * 3 + ar) * 2 + nl) * 2 + nr
}

/// Non-Hermitian single-photon Hamiltonian in the frame of the cavity:
/// `delta` per excited atom, `g` between `|1>|1>` and `|e>|0>` on each side,
/// `-i gamma` per photon.
pub fn hamiltonian(g: f64, delta: f64, gamma: f64) -> DMatrix<C64> {
    let mut h = DMatrix::<C64>::zeros(DIM, DIM);
    for al in 0..3 {
        for ar in 0..3 {
            for nl in 0..2 {
                for nr in 0..2 {
                    let i = index(al, ar, nl, nr);
                    let excited = (al == 2) as u8 as f64 + (ar == 2) as u8 as f64;
                    h[(i, i)] = C64::new(delta * excited, -gamma * (nl + nr) as f64);
                    if al == 1 && nl == 1 {
                        let j = index(2, ar, 0, nr);
                        h[(j, i)] += g;
                        h[(i, j)] += g;
                    }
                    if ar == 1 && nr == 1 {
                        let j = index(al, 2, nl, 0);
                        h[(j, i)] += g;
                        h[(i, j)] += g;
                    }
                }
            }
        }
    }
    h
}

/// Atoms in `|+>|+>`, photon in `(|10> + |01>)/sqrt(2)`.
pub fn plus_plus_split_photon() -> DVector<C64> {
    let mut psi = DVector::<C64>::zeros(DIM);
    let amp = C64::from(0.5 * std::f64::consts::FRAC_1_SQRT_2);
    for al in 0..2 {
        for ar in 0..2 {
            psi[index(al, ar, 1, 0)] = amp;
            psi[index(al, ar, 0, 1)] = amp;
        }
    }
    psi
}

/// `exp(-i H tau)` by scaling and squaring of a 30-term Taylor series.
pub fn propagator(h: &DMatrix<C64>, tau: f64) -> DMatrix<C64> {
    let norm = h
        .column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
        * tau;
    // Scaled 1-norm at most 1/2.
    let squarings = (2.0 * norm).log2().ceil().max(0.0) as u32;
    let a = h * C64::new(0.0, -tau / 2f64.powi(squarings as i32));
    let n = h.nrows();
    let mut u = DMatrix::<C64>::identity(n, n);
    let mut term = DMatrix::<C64>::identity(n, n);
    for k in 1..30 {
        term = &term * &a / C64::from(k as f64);
        u += &term;
    }
    for _ in 0..squarings {
        u = &u * &u;
    }
    u
}

/// Trace norm of the Hermitian part of `m`.
pub fn trace_norm(m: &DMatrix<C64>) -> f64 {
    let herm = (m + m.adjoint()) * C64::from(0.5);
    herm.symmetric_eigenvalues().iter().map(|x| x.abs()).sum()
}

/// `||rho - |psi><psi| ||_1 / 2`.
pub fn trace_distance_to_pure(rho: &DMatrix<C64>, psi: &DVector<C64>) -> f64 {
    trace_norm(&(rho - psi * psi.adjoint())) / 2.0
}
