//! Exact density-matrix simulation of few-qubit registers.
//!
//! States are dense `D x D` complex matrices with `D = 2^n`. Gates are applied
//! by updating index pairs of the affected qubits, so every operation costs
//! `O(D^2)` rather than a full matrix product. Qubit `q` addresses bit
//! `n - 1 - q` of a basis index (qubit 0 is the most significant).

pub(crate) mod channel;
pub(crate) mod density;
pub(crate) mod gate;

pub use channel::{
    apply_depolarizing_global, apply_depolarizing_local, apply_kraus, KrausChannel, NoiseChannel,
};
pub use density::{projector_probability, zero_state, DensityMatrix};
pub use gate::{apply_gate, Gate};

pub use num_complex::Complex64 as C64;

/// Largest register the simulator accepts (D = 4096).
pub const MAX_QUBITS: usize = 12;

/// Tolerances used by [`DensityMatrix::check_invariants`].
pub mod tol {
    pub const HERMITIAN: f64 = 1e-12;
    pub const TRACE: f64 = 1e-10;
    pub const PSD: f64 = 1e-9;
    pub const PURITY: f64 = 1e-10;
    pub const KRAUS: f64 = 1e-10;
    pub const CLAMP: f64 = 1e-9;
}

pub(crate) fn check_probability(p: f64) -> crate::Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(crate::Error::Probability(p))
    }
}
