use nalgebra::DMatrix;

use super::{tol, C64, MAX_QUBITS};
use crate::{Error, Result};

/// Mixed state of an `n`-qubit register, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    data: Vec<C64>,
}

/// Returns `|0...0><0...0|` on `n_qubits` qubits.
pub fn zero_state(n_qubits: usize) -> Result<DensityMatrix> {
    let mut rho = DensityMatrix::zeros(n_qubits)?;
    rho.data[0] = C64::new(1.0, 0.0);
    Ok(rho)
}

/// `<0...0| rho |0...0>`, clamped into `[0, 1]`.
pub fn projector_probability(rho: &DensityMatrix) -> f64 {
    let p = rho.data[0].re;
    debug_assert!(
        p > -tol::CLAMP && p < 1.0 + tol::CLAMP,
        "projector probability {p} needs clamping beyond tolerance"
    );
    p.clamp(0.0, 1.0)
}

impl DensityMatrix {
    /// All-zero matrix. Not a valid state; used as an accumulator.
    pub fn zeros(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        let dim = 1usize << n_qubits;
        Ok(Self {
            n_qubits,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        })
    }

    /// `I / D`.
    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        let mut rho = Self::zeros(n_qubits)?;
        let dim = rho.dim();
        let v = 1.0 / dim as f64;
        for i in 0..dim {
            rho.data[i * dim + i] = C64::new(v, 0.0);
        }
        Ok(rho)
    }

    /// `|psi><psi|` for a normalized amplitude vector of length `2^n`.
    pub fn from_pure(amplitudes: &[C64]) -> Result<Self> {
        let dim = amplitudes.len();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::Dimension(format!(
                "state vector length {dim} is not a power of two"
            )));
        }
        let n = dim.trailing_zeros() as usize;
        let mut rho = Self::zeros(n)?;
        for i in 0..dim {
            for j in 0..dim {
                rho.data[i * dim + j] = amplitudes[i] * amplitudes[j].conj();
            }
        }
        Ok(rho)
    }

    /// Wraps raw row-major entries. No validity check is performed.
    pub fn from_entries(n_qubits: usize, data: Vec<C64>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        let dim = 1usize << n_qubits;
        if data.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "expected {} entries, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(Self { n_qubits, data })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim() + col]
    }

    pub fn trace(&self) -> C64 {
        let dim = self.dim();
        (0..dim).map(|i| self.data[i * dim + i]).sum()
    }

    /// `Tr(rho^2)`, which for a Hermitian matrix is the squared Frobenius norm.
    pub fn purity(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `Re Tr(self * other)` for Hermitian operands.
    pub fn trace_product(&self, other: &DensityMatrix) -> f64 {
        trace_product(&self.data, &other.data)
    }

    /// Largest `|rho_ij - conj(rho_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in i..dim {
                let d = self.data[i * dim + j] - self.data[j * dim + i].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        let dim = self.dim();
        DMatrix::from_row_slice(dim, dim, &self.data)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.to_matrix();
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks Hermiticity, unit trace, positivity and the purity range.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let herm = self.hermiticity_error();
        if herm > tol::HERMITIAN {
            return Err(format!("not Hermitian: deviation {herm:.3e}"));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > tol::TRACE {
            return Err(format!("trace {tr} differs from 1"));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < -tol::PSD {
            return Err(format!("not PSD: min eigenvalue {min_eig:.3e}"));
        }
        let purity = self.purity();
        let lo = 1.0 / self.dim() as f64 - tol::PURITY;
        if purity < lo || purity > 1.0 + tol::PURITY {
            return Err(format!("purity {purity} outside [1/D, 1]"));
        }
        Ok(())
    }

    /// Largest entrywise distance to `other`.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub(crate) fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    pub(crate) fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit < self.n_qubits {
            Ok(())
        } else {
            Err(Error::QubitIndex {
                index: qubit,
                n_qubits: self.n_qubits,
            })
        }
    }

    /// `rho <- U rho U^dagger` for a 2x2 unitary `u` (row-major) on `qubit`.
    pub(crate) fn conjugate_1q(&mut self, qubit: usize, u: &[C64; 4]) {
        let dim = self.dim();
        let m = self.mask(qubit);
        let d = &mut self.data;
        for i0 in (0..dim).filter(|i| i & m == 0) {
            let i1 = i0 | m;
            for c in 0..dim {
                let a = d[i0 * dim + c];
                let b = d[i1 * dim + c];
                d[i0 * dim + c] = u[0] * a + u[1] * b;
                d[i1 * dim + c] = u[2] * a + u[3] * b;
            }
        }
        let (c00, c01, c10, c11) = (u[0].conj(), u[1].conj(), u[2].conj(), u[3].conj());
        for r in 0..dim {
            let row = &mut d[r * dim..(r + 1) * dim];
            for j0 in (0..dim).filter(|j| j & m == 0) {
                let j1 = j0 | m;
                let a = row[j0];
                let b = row[j1];
                row[j0] = a * c00 + b * c01;
                row[j1] = a * c10 + b * c11;
            }
        }
    }

    /// Conjugation by a diagonal single-qubit unitary `diag(d0, d1)`.
    pub(crate) fn conjugate_diag_1q(&mut self, qubit: usize, d0: C64, d1: C64) {
        let dim = self.dim();
        let m = self.mask(qubit);
        let phase = |i: usize| if i & m == 0 { d0 } else { d1 };
        for i in 0..dim {
            let pi = phase(i);
            let row = &mut self.data[i * dim..(i + 1) * dim];
            for (j, z) in row.iter_mut().enumerate() {
                *z *= pi * phase(j).conj();
            }
        }
    }

    /// Conjugation by CNOT, a real permutation.
    pub(crate) fn conjugate_cnot(&mut self, control: usize, target: usize) {
        let dim = self.dim();
        let cm = self.mask(control);
        let tm = self.mask(target);
        let d = &mut self.data;
        for i in (0..dim).filter(|i| i & cm != 0 && i & tm == 0) {
            let k = i | tm;
            for c in 0..dim {
                d.swap(i * dim + c, k * dim + c);
            }
        }
        for r in 0..dim {
            let row = &mut d[r * dim..(r + 1) * dim];
            for j in (0..dim).filter(|j| j & cm != 0 && j & tm == 0) {
                row.swap(j, j | tm);
            }
        }
    }

    /// `rho <- (1-p) rho + p Tr_q(rho) (x) I/2` on one qubit.
    pub(crate) fn depolarize_1q(&mut self, qubit: usize, p: f64) {
        if p == 0.0 {
            return;
        }
        let dim = self.dim();
        let m = self.mask(qubit);
        let keep = 1.0 - p;
        let d = &mut self.data;
        for i0 in (0..dim).filter(|i| i & m == 0) {
            let i1 = i0 | m;
            for j0 in (0..dim).filter(|j| j & m == 0) {
                let j1 = j0 | m;
                let a = d[i0 * dim + j0];
                let b = d[i1 * dim + j1];
                let avg = (a + b) * 0.5;
                d[i0 * dim + j0] = a * keep + avg * p;
                d[i1 * dim + j1] = b * keep + avg * p;
                d[i0 * dim + j1] *= keep;
                d[i1 * dim + j0] *= keep;
            }
        }
    }

    /// `rho <- (1-p) rho + p Tr(rho) I/D`.
    pub(crate) fn depolarize_global(&mut self, p: f64) {
        let dim = self.dim();
        let tr = self.trace();
        for z in self.data.iter_mut() {
            *z *= 1.0 - p;
        }
        let add = tr * (p / dim as f64);
        for i in 0..dim {
            self.data[i * dim + i] += add;
        }
    }

    /// `self <- self + c * other`.
    pub(crate) fn axpy(&mut self, c: f64, other: &DensityMatrix) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * c;
        }
    }
}

/// `Re Tr(A B)` for Hermitian row-major `A`, `B`: `sum_ij A_ij conj(B_ij)`.
pub(crate) fn trace_product(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}
