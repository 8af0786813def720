use super::{check_probability, tol, DensityMatrix, Gate, C64};
use crate::{Error, Result};

/// A channel `rho -> sum_a E_a rho E_a^dagger` acting on a subset of qubits.
///
/// Operators are row-major `2^k x 2^k` matrices; `qubits[0]` is the most
/// significant bit of the local index.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    qubits: Vec<usize>,
    operators: Vec<Vec<C64>>,
}

impl KrausChannel {
    pub fn new(qubits: Vec<usize>, operators: Vec<Vec<C64>>) -> Result<Self> {
        let local = 1usize << qubits.len();
        for op in &operators {
            if op.len() != local * local {
                return Err(Error::KrausShape {
                    got: op.len(),
                    expected: local * local,
                });
            }
        }
        let channel = Self { qubits, operators };
        let dev = channel.completeness_error();
        if dev > tol::KRAUS {
            return Err(Error::IncompleteKraus(dev));
        }
        Ok(channel)
    }

    /// `{ sqrt(1-3p/4) I, sqrt(p/4) X, sqrt(p/4) Y, sqrt(p/4) Z }` on one qubit.
    pub fn depolarizing(qubit: usize, p: f64) -> Result<Self> {
        check_probability(p)?;
        let a = (1.0 - 0.75 * p).sqrt();
        let b = (p / 4.0).sqrt();
        let z = C64::new(0.0, 0.0);
        let r = |x: f64| C64::new(x, 0.0);
        let i = |x: f64| C64::new(0.0, x);
        Self::new(
            vec![qubit],
            vec![
                vec![r(a), z, z, r(a)],
                vec![z, r(b), r(b), z],
                vec![z, i(-b), i(b), z],
                vec![r(b), z, z, r(-b)],
            ],
        )
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn operators(&self) -> &[Vec<C64>] {
        &self.operators
    }

    /// Largest entry of `|sum_a E_a^dagger E_a - I|`.
    pub fn completeness_error(&self) -> f64 {
        let d = 1usize << self.qubits.len();
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                let mut s = C64::new(0.0, 0.0);
                for op in &self.operators {
                    for k in 0..d {
                        s += op[k * d + r].conj() * op[k * d + c];
                    }
                }
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((s - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

/// Noise attached to every gate of a circuit.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseChannel {
    None,
    /// Single-qubit depolarizing with probability `p` on each touched qubit.
    PerGateDepolarizing(f64),
    /// Whole-register depolarizing with probability `p`.
    GlobalDepolarizing(f64),
    /// An explicit channel on fixed qubits.
    Kraus(KrausChannel),
}

impl NoiseChannel {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseChannel::None | NoiseChannel::Kraus(_) => Ok(()),
            NoiseChannel::PerGateDepolarizing(p) | NoiseChannel::GlobalDepolarizing(p) => {
                check_probability(*p)
            }
        }
    }

    /// Applies the channel as it would follow `gate` in a circuit.
    pub fn apply_after(&self, rho: &mut DensityMatrix, gate: &Gate) -> Result<()> {
        match self {
            NoiseChannel::None => Ok(()),
            NoiseChannel::PerGateDepolarizing(p) => {
                check_probability(*p)?;
                let (qs, k) = gate.qubits();
                for &q in &qs[..k] {
                    rho.check_qubit(q)?;
                    rho.depolarize_1q(q, *p);
                }
                Ok(())
            }
            NoiseChannel::GlobalDepolarizing(p) => {
                check_probability(*p)?;
                rho.depolarize_global(*p);
                Ok(())
            }
            NoiseChannel::Kraus(ch) => {
                *rho = apply_kraus(rho, ch)?;
                Ok(())
            }
        }
    }
}

/// `sum_a E_a rho E_a^dagger`.
pub fn apply_kraus(rho: &DensityMatrix, channel: &KrausChannel) -> Result<DensityMatrix> {
    for &q in channel.qubits() {
        rho.check_qubit(q)?;
    }
    let dev = channel.completeness_error();
    if dev > tol::KRAUS {
        return Err(Error::IncompleteKraus(dev));
    }
    let mut out = DensityMatrix::zeros(rho.n_qubits())?;
    for op in channel.operators() {
        let mut term = rho.entries().to_vec();
        local_sandwich(&mut term, rho, channel.qubits(), op);
        for (o, t) in out.entries_mut().iter_mut().zip(term) {
            *o += t;
        }
    }
    Ok(out)
}

/// `data <- E data E^dagger` for a local operator `E` on `qubits`.
fn local_sandwich(data: &mut [C64], rho: &DensityMatrix, qubits: &[usize], op: &[C64]) {
    let dim = rho.dim();
    let k = qubits.len();
    let local = 1usize << k;
    let masks: Vec<usize> = qubits.iter().map(|&q| rho.mask(q)).collect();
    let all: usize = masks.iter().sum();
    let offset = |m: usize| -> usize {
        (0..k)
            .filter(|&b| m & (1 << (k - 1 - b)) != 0)
            .map(|b| masks[b])
            .sum()
    };
    let offsets: Vec<usize> = (0..local).map(offset).collect();
    let mut buf = vec![C64::new(0.0, 0.0); local];

    // Left multiplication, column by column.
    for base in (0..dim).filter(|i| i & all == 0) {
        for c in 0..dim {
            for (m, slot) in buf.iter_mut().enumerate() {
                *slot = data[(base + offsets[m]) * dim + c];
            }
            for r in 0..local {
                let s: C64 = (0..local).map(|m| op[r * local + m] * buf[m]).sum();
                data[(base + offsets[r]) * dim + c] = s;
            }
        }
    }
    // Right multiplication by E^dagger, row by row.
    for row in 0..dim {
        for base in (0..dim).filter(|j| j & all == 0) {
            for (m, slot) in buf.iter_mut().enumerate() {
                *slot = data[row * dim + base + offsets[m]];
            }
            for c in 0..local {
                let s: C64 = (0..local).map(|m| buf[m] * op[c * local + m].conj()).sum();
                data[row * dim + base + offsets[c]] = s;
            }
        }
    }
}

/// Single-qubit depolarizing on `qubit`:
/// `(1-p) rho + p Tr_q(rho) (x) I/2`, re-embedded at the qubit's position.
pub fn apply_depolarizing_local(rho: &DensityMatrix, qubit: usize, p: f64) -> Result<DensityMatrix> {
    check_probability(p)?;
    rho.check_qubit(qubit)?;
    let mut out = rho.clone();
    out.depolarize_1q(qubit, p);
    Ok(out)
}

/// `(1-p) rho + p I/D`.
pub fn apply_depolarizing_global(rho: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    check_probability(p)?;
    let mut out = rho.clone();
    out.depolarize_global(p);
    Ok(out)
}
