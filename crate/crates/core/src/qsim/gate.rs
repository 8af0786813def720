use std::f64::consts::FRAC_1_SQRT_2;

use super::{DensityMatrix, C64};
use crate::{Error, Result};

/// Gate set of the feature-map circuit. Angles are in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Hadamard(usize),
    RotZ(usize, f64),
    RotY(usize, f64),
    Cnot { control: usize, target: usize },
}

impl Gate {
    /// Qubits the gate acts on.
    pub fn qubits(&self) -> ([usize; 2], usize) {
        match *self {
            Gate::Hadamard(q) | Gate::RotZ(q, _) | Gate::RotY(q, _) => ([q, q], 1),
            Gate::Cnot { control, target } => ([control, target], 2),
        }
    }

    /// The gate implementing `U^dagger`.
    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::RotZ(q, a) => Gate::RotZ(q, -a),
            Gate::RotY(q, a) => Gate::RotY(q, -a),
            g => g,
        }
    }

    /// Row-major 2x2 unitary of a single-qubit gate; `None` for CNOT.
    pub fn single_qubit_matrix(&self) -> Option<[C64; 4]> {
        match *self {
            Gate::Hadamard(_) => Some(hadamard()),
            Gate::RotZ(_, a) => Some(rot_z(a)),
            Gate::RotY(_, a) => Some(rot_y(a)),
            Gate::Cnot { .. } => None,
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let (qs, k) = self.qubits();
        for &q in &qs[..k] {
            if q >= n_qubits {
                return Err(Error::QubitIndex { index: q, n_qubits });
            }
        }
        if let Gate::Cnot { control, target } = *self {
            if control == target {
                return Err(Error::SameControlTarget(control));
            }
        }
        Ok(())
    }
}

pub(crate) fn hadamard() -> [C64; 4] {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    [h, h, h, -h]
}

/// `exp(-i a Z / 2)`.
pub(crate) fn rot_z(a: f64) -> [C64; 4] {
    let zero = C64::new(0.0, 0.0);
    [C64::from_polar(1.0, -a / 2.0), zero, zero, C64::from_polar(1.0, a / 2.0)]
}

/// `exp(-i a Y / 2)`.
pub(crate) fn rot_y(a: f64) -> [C64; 4] {
    let (s, c) = (a / 2.0).sin_cos();
    [
        C64::new(c, 0.0),
        C64::new(-s, 0.0),
        C64::new(s, 0.0),
        C64::new(c, 0.0),
    ]
}

pub(crate) fn matmul2(a: &[C64; 4], b: &[C64; 4]) -> [C64; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

pub(crate) fn adjoint2(a: &[C64; 4]) -> [C64; 4] {
    [a[0].conj(), a[2].conj(), a[1].conj(), a[3].conj()]
}

/// Returns `U rho U^dagger`.
pub fn apply_gate(rho: &DensityMatrix, gate: &Gate) -> Result<DensityMatrix> {
    let mut out = rho.clone();
    out.apply_gate_mut(gate)?;
    Ok(out)
}

impl DensityMatrix {
    /// In-place [`apply_gate`].
    pub fn apply_gate_mut(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits())?;
        match *gate {
            Gate::RotZ(q, a) => {
                let u = rot_z(a);
                self.conjugate_diag_1q(q, u[0], u[3]);
            }
            Gate::Hadamard(q) => self.conjugate_1q(q, &hadamard()),
            Gate::RotY(q, a) => self.conjugate_1q(q, &rot_y(a)),
            Gate::Cnot { control, target } => self.conjugate_cnot(control, target),
        }
        Ok(())
    }
}
