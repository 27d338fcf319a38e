//! Conditional-dynamics simulator for heralded entanglement of two remote
//! three-level matter qubits through a dispersive single-photon (or weak
//! coherent) interferometer.
//!
//! * [`hilbert`]: tensor-product space, dense operators, partial trace.
//! * [`dynamics`]: non-Hermitian Hamiltonian, dephasing master equation, RK4.
//! * [`protocol`]: preparation, click at port R', heralded fidelity, run summaries.
//! * [`analytic`]: closed-form ideal-model oracles.
//! * [`sweep`]: parameter grids over detuning and normalized decay rate.

pub mod analytic;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod protocol;
pub mod sweep;

pub use dynamics::{InitialAtoms, InputKind, ModelParams, Trajectory};
pub use error::{Error, Result};
pub use protocol::{run_protocol, run_protocol_with, RunOptions, RunSummary};
pub use sweep::{run_sweep, SweepRow, SweepSpec};
