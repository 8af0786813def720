use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::feature_map::{interference_circuit, FeatureMapSpec, ParameterVector};
use crate::qsim::{check_probability, projector_probability, zero_state, NoiseChannel};
use crate::{Error, Result};

/// How the kernel circuit is corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "p", rename_all = "snake_case")]
pub enum NoiseMode {
    Exact,
    /// Single-qubit depolarizing with probability `p` after every gate.
    PerGate(f64),
    /// Noiseless kernel mapped through `(1-p) K + p/D`.
    GlobalAnalytic(f64),
}

/// Noise mode plus optional finite-shot estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub mode: NoiseMode,
    pub shots: Option<u32>,
}

impl NoiseModel {
    pub fn exact() -> Self {
        Self {
            mode: NoiseMode::Exact,
            shots: None,
        }
    }

    pub fn per_gate(p: f64) -> Self {
        Self {
            mode: NoiseMode::PerGate(p),
            shots: None,
        }
    }

    pub fn global(p: f64) -> Self {
        Self {
            mode: NoiseMode::GlobalAnalytic(p),
            shots: None,
        }
    }

    pub fn with_shots(mut self, shots: u32) -> Self {
        self.shots = Some(shots);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            NoiseMode::Exact => {}
            NoiseMode::PerGate(p) | NoiseMode::GlobalAnalytic(p) => check_probability(p)?,
        }
        if self.shots == Some(0) {
            return Err(Error::Shots);
        }
        Ok(())
    }

    /// Per-gate probability fed to the simulator (zero outside `PerGate`).
    pub(crate) fn gate_probability(&self) -> f64 {
        match self.mode {
            NoiseMode::PerGate(p) => p,
            _ => 0.0,
        }
    }

    /// Global rate applied after simulation (zero outside `GlobalAnalytic`).
    pub(crate) fn global_rate(&self) -> f64 {
        match self.mode {
            NoiseMode::GlobalAnalytic(p) => p,
            _ => 0.0,
        }
    }
}

/// A kernel value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KernelValue(pub f64);

impl KernelValue {
    pub fn get(self) -> f64 {
        self.0
    }
}

/// Effective global rate of `2L` noisy layers: `1 - (1-p)^(2L)`.
pub fn effective_rate(p_gate: f64, layers: usize) -> Result<f64> {
    check_probability(p_gate)?;
    Ok(1.0 - (1.0 - p_gate).powi(2 * layers as i32))
}

/// `(1-p) K + p/D`.
pub fn analytic_noisy_kernel(k: f64, p: f64, dim: usize) -> Result<KernelValue> {
    check_probability(p)?;
    if !(0.0..=1.0).contains(&k) {
        return Err(Error::Dimension(format!("kernel value {k} outside [0, 1]")));
    }
    Ok(KernelValue((1.0 - p) * k + p / dim as f64))
}

/// Mean of `m` Bernoulli(`k`) draws.
pub fn shot_sample<R: Rng + ?Sized>(k: KernelValue, m: u32, rng: &mut R) -> Result<KernelValue> {
    if m == 0 {
        return Err(Error::Shots);
    }
    let p = k.0.clamp(0.0, 1.0);
    let hits = (0..m).filter(|_| rng.random::<f64>() < p).count();
    Ok(KernelValue(hits as f64 / m as f64))
}

/// `(f(+pi/2) - f(-pi/2)) / 2`, the derivative at zero offset of any
/// expectation of `exp(-i a P / 2)` with `P` a Pauli operator.
pub fn shift_rule<E>(mut f: impl FnMut(f64) -> Result<f64, E>) -> Result<f64, E> {
    Ok(0.5 * (f(FRAC_PI_2)? - f(-FRAC_PI_2)?))
}

/// Angle override for one gate of the interference circuit.
#[derive(Debug, Clone, Copy)]
struct Shift {
    gate: usize,
    delta: f64,
}

/// Runs the interference circuit gate by gate and projects onto `|0...0>`.
fn simulate(
    spec: &FeatureMapSpec,
    theta: &ParameterVector,
    x: &[f64],
    x_prime: &[f64],
    p_gate: f64,
    shift: Option<Shift>,
) -> Result<f64> {
    let circuit = interference_circuit(spec, theta, x, x_prime)?;
    let noise = if p_gate > 0.0 {
        NoiseChannel::PerGateDepolarizing(p_gate)
    } else {
        NoiseChannel::None
    };
    // The uncompute half mirrors the compute half: its channels sit on the
    // other side of each gate, which keeps K(x, x') = K(x', x) exactly.
    let half = circuit.len() / 2;
    let mut rho = zero_state(spec.n_qubits)?;
    for (k, (gate, slot)) in circuit.iter().enumerate() {
        let gate = match (shift, slot) {
            (Some(s), Some(slot)) if s.gate == k => shifted(gate, slot.sign * s.delta),
            _ => *gate,
        };
        if k < half {
            rho.apply_gate_mut(&gate)?;
            noise.apply_after(&mut rho, &gate)?;
        } else {
            noise.apply_after(&mut rho, &gate)?;
            rho.apply_gate_mut(&gate)?;
        }
    }
    Ok(projector_probability(&rho))
}

fn shifted(gate: &crate::qsim::Gate, delta: f64) -> crate::qsim::Gate {
    use crate::qsim::Gate;
    match *gate {
        Gate::RotY(q, a) => Gate::RotY(q, a + delta),
        Gate::RotZ(q, a) => Gate::RotZ(q, a + delta),
        g => g,
    }
}

/// Expected kernel value (no shot noise) by direct gate-level simulation.
pub fn kernel_value(
    spec: &FeatureMapSpec,
    theta: &ParameterVector,
    x: &[f64],
    x_prime: &[f64],
    mode: NoiseMode,
) -> Result<KernelValue> {
    let model = NoiseModel { mode, shots: None };
    model.validate()?;
    let k = simulate(spec, theta, x, x_prime, model.gate_probability(), None)?;
    match mode {
        NoiseMode::GlobalAnalytic(p) => analytic_noisy_kernel(k, p, spec.dim()),
        _ => Ok(KernelValue(k)),
    }
}

/// Kernel value under `noise`; with shots set, the empirical frequency of
/// `|0...0>` over that many measurements.
pub fn kernel_eval<R: Rng + ?Sized>(
    spec: &FeatureMapSpec,
    theta: &ParameterVector,
    x: &[f64],
    x_prime: &[f64],
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<KernelValue> {
    noise.validate()?;
    let k = kernel_value(spec, theta, x, x_prime, noise.mode)?;
    match noise.shots {
        Some(m) => shot_sample(k, m, rng),
        None => Ok(k),
    }
}

/// `dK/dtheta_t` by the parameter-shift rule.
///
/// `theta_t` drives one `RY` in the forward circuit and its inverse in the
/// adjoint circuit. Each occurrence is shifted by `+-pi/2` separately, so the
/// derivative costs four circuit evaluations.
pub fn kernel_grad(
    spec: &FeatureMapSpec,
    theta: &ParameterVector,
    x: &[f64],
    x_prime: &[f64],
    noise: &NoiseModel,
    t: usize,
) -> Result<f64> {
    noise.validate()?;
    if noise.shots.is_some() {
        return Err(Error::ShotsInGradient);
    }
    if t >= spec.n_params() {
        return Err(Error::ParameterIndex {
            index: t,
            len: spec.n_params(),
        });
    }
    let circuit = interference_circuit(spec, theta, x, x_prime)?;
    let p_gate = noise.gate_probability();
    let mut grad = 0.0;
    for (k, (_, slot)) in circuit.iter().enumerate() {
        if slot.is_some_and(|s| s.index == t) {
            grad += shift_rule(|delta| {
                simulate(spec, theta, x, x_prime, p_gate, Some(Shift { gate: k, delta }))
            })?;
        }
    }
    Ok(grad * (1.0 - noise.global_rate()))
}
