use serde::{Deserialize, Serialize};

use crate::qsim::{Gate, MAX_QUBITS};
use crate::{Error, Result};

/// Layered feature map: `H` on every qubit, `RZ(x_f)` embedding, trainable
/// `RY(theta)`, then a ring of CNOTs `q -> (q+1) mod n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMapSpec {
    pub n_qubits: usize,
    pub layers: usize,
    /// `embedding[q]` is the feature index embedded on qubit `q`.
    pub embedding: Vec<usize>,
}

impl FeatureMapSpec {
    /// Alternating embedding: even qubits take feature 0, odd qubits feature 1.
    pub fn alternating(n_qubits: usize, layers: usize) -> Result<Self> {
        Self::new(n_qubits, layers, (0..n_qubits).map(|q| q % 2).collect())
    }

    pub fn new(n_qubits: usize, layers: usize, embedding: Vec<usize>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        if layers == 0 {
            return Err(Error::Config("feature map needs at least one layer".into()));
        }
        if embedding.len() != n_qubits {
            return Err(Error::Dimension(format!(
                "embedding covers {} qubits, register has {n_qubits}",
                embedding.len()
            )));
        }
        Ok(Self {
            n_qubits,
            layers,
            embedding,
        })
    }

    /// Number of trainable angles, `n_qubits * layers`.
    pub fn n_params(&self) -> usize {
        self.n_qubits * self.layers
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// Number of features the embedding reads.
    pub fn n_features(&self) -> usize {
        self.embedding.iter().max().map_or(0, |m| m + 1)
    }

    pub fn check_features(&self, x: &[f64]) -> Result<()> {
        match self.embedding.iter().find(|&&f| f >= x.len()) {
            Some(&feature) => Err(Error::MissingFeature {
                feature,
                dim: x.len(),
            }),
            None => Ok(()),
        }
    }

    /// Parameter index of the `RY` on `qubit` in `layer`.
    pub fn param_index(&self, layer: usize, qubit: usize) -> usize {
        layer * self.n_qubits + qubit
    }
}

/// Trainable angles, laid out layer-major (`theta[layer * n + qubit]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn check(&self, spec: &FeatureMapSpec) -> Result<()> {
        if self.0.len() != spec.n_params() {
            return Err(Error::Dimension(format!(
                "parameter vector has {} entries, feature map needs {}",
                self.0.len(),
                spec.n_params()
            )));
        }
        if let Some(v) = self.0.iter().find(|v| !v.is_finite()) {
            return Err(Error::Dimension(format!("non-finite parameter {v}")));
        }
        Ok(())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Gates of one layer, in execution order.
pub fn build_layer_gates(spec: &FeatureMapSpec, theta_layer: &[f64], x: &[f64]) -> Result<Vec<Gate>> {
    let n = spec.n_qubits;
    if theta_layer.len() != n {
        return Err(Error::Dimension(format!(
            "layer parameters have {} entries, expected {n}",
            theta_layer.len()
        )));
    }
    spec.check_features(x)?;
    let mut gates = Vec::with_capacity(4 * n);
    gates.extend((0..n).map(Gate::Hadamard));
    gates.extend((0..n).map(|q| Gate::RotZ(q, x[spec.embedding[q]])));
    gates.extend((0..n).map(|q| Gate::RotY(q, theta_layer[q])));
    if n > 1 {
        // A single qubit has no ring.
        gates.extend((0..n).map(|q| Gate::Cnot {
            control: q,
            target: (q + 1) % n,
        }));
    }
    Ok(gates)
}

/// Which trainable angle a gate carries, and with which sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSlot {
    pub index: usize,
    pub sign: f64,
}

/// `U(theta, x)`: all layers in order, each `RY` tagged with its parameter.
pub fn encoding_circuit(
    spec: &FeatureMapSpec,
    theta: &ParameterVector,
    x: &[f64],
) -> Result<Vec<(Gate, Option<ParamSlot>)>> {
    theta.check(spec)?;
    let n = spec.n_qubits;
    let mut out = Vec::new();
    for layer in 0..spec.layers {
        let slice = &theta.0[layer * n..(layer + 1) * n];
        for gate in build_layer_gates(spec, slice, x)? {
            let slot = match gate {
                Gate::RotY(q, _) => Some(ParamSlot {
                    index: spec.param_index(layer, q),
                    sign: 1.0,
                }),
                _ => None,
            };
            out.push((gate, slot));
        }
    }
    Ok(out)
}

/// `U(theta, x')^dagger U(theta, x)`: the compute-uncompute circuit whose
/// all-zeros probability is the kernel value.
pub fn interference_circuit(
    spec: &FeatureMapSpec,
    theta: &ParameterVector,
    x: &[f64],
    x_prime: &[f64],
) -> Result<Vec<(Gate, Option<ParamSlot>)>> {
    let mut gates = encoding_circuit(spec, theta, x)?;
    let adjoint = encoding_circuit(spec, theta, x_prime)?;
    gates.extend(adjoint.into_iter().rev().map(|(g, slot)| {
        (
            g.inverse(),
            slot.map(|s| ParamSlot {
                index: s.index,
                sign: -s.sign,
            }),
        )
    }));
    Ok(gates)
}
