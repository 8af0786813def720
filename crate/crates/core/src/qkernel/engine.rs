//! Batched kernel evaluation and alignment gradients.
//!
//! The interference circuit `U(x')^dagger U(x)` splits at its midpoint:
//!
//! ```text
//! K(x, x') = Tr[ rho(x) M(x') ],   rho(x) = F_x(|0><0|),   M(x') = A_x'^*(|0><0|)
//! ```
//!
//! where `F_x` is the noisy encoding circuit and `A_x'^*` the Heisenberg
//! picture of the noisy adjoint circuit. Each point is simulated twice, after
//! which every Gram entry is a trace product. Gradients of any scalar function
//! of the Gram matrix are obtained by one further forward and one backward
//! sweep per point, using the parameter-shift rule on each occurrence of a
//! trainable angle.
//!
//! Single-qubit depolarizing noise commutes with single-qubit unitaries on
//! the same qubit, so the `H`, `RZ`, `RY` triple of each qubit is fused into
//! one unitary with one channel of strength `1 - (1-p)^3`. In the adjoint half
//! every channel precedes its gate, mirroring the encoding half. The result is
//! identical to the gate-by-gate simulation in [`super::kernel_value`].

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;

use super::feature_map::{FeatureMapSpec, ParameterVector};
use super::kernel::{NoiseMode, NoiseModel};
use crate::par;
use crate::qsim::gate::{adjoint2, hadamard, matmul2, rot_y, rot_z};
use crate::qsim::{density::trace_product, zero_state, DensityMatrix, C64};
use crate::Result;

#[derive(Debug, Clone)]
struct Shift {
    param: usize,
    plus: [C64; 4],
    minus: [C64; 4],
}

#[derive(Debug, Clone)]
enum OpKind {
    One {
        qubit: usize,
        u: [C64; 4],
        shift: Option<Box<Shift>>,
    },
    Cnot {
        control: usize,
        target: usize,
    },
}

/// A unitary with depolarizing noise on each qubit it touches, applied after
/// the unitary or, with `noise_first`, before it.
#[derive(Debug, Clone)]
struct Op {
    kind: OpKind,
    noise: f64,
    noise_first: bool,
}

impl Op {
    fn unitary(&self, rho: &mut DensityMatrix) {
        match &self.kind {
            OpKind::One { qubit, u, .. } => rho.conjugate_1q(*qubit, u),
            OpKind::Cnot { control, target } => rho.conjugate_cnot(*control, *target),
        }
    }

    fn noise(&self, rho: &mut DensityMatrix) {
        if self.noise == 0.0 {
            return;
        }
        match &self.kind {
            OpKind::One { qubit, .. } => rho.depolarize_1q(*qubit, self.noise),
            OpKind::Cnot { control, target } => {
                rho.depolarize_1q(*control, self.noise);
                rho.depolarize_1q(*target, self.noise);
            }
        }
    }

    fn pre(&self, rho: &mut DensityMatrix) {
        if self.noise_first {
            self.noise(rho);
        }
    }

    fn post(&self, rho: &mut DensityMatrix) {
        if !self.noise_first {
            self.noise(rho);
        }
    }

    fn apply(&self, rho: &mut DensityMatrix) {
        self.pre(rho);
        self.unitary(rho);
        self.post(rho);
    }

    /// Heisenberg picture of [`Op::apply`].
    fn apply_dual(&self, obs: &mut DensityMatrix) {
        self.post(obs);
        self.unitary_dual(obs);
        self.pre(obs);
    }

    /// `O <- U^dagger O U`; the depolarizing part is self-dual.
    fn unitary_dual(&self, obs: &mut DensityMatrix) {
        match &self.kind {
            OpKind::One { qubit, u, .. } => obs.conjugate_1q(*qubit, &adjoint2(u)),
            OpKind::Cnot { control, target } => obs.conjugate_cnot(*control, *target),
        }
    }

    /// `(Tr[obs U+ s U+^dagger] - Tr[obs U- s U-^dagger]) / 2`.
    fn shift_derivative(&self, obs: &DensityMatrix, state: &DensityMatrix) -> Option<(usize, f64)> {
        let OpKind::One { qubit, shift: Some(shift), .. } = &self.kind else {
            return None;
        };
        let mut scratch = state.clone();
        scratch.conjugate_1q(*qubit, &shift.plus);
        let plus = trace_product(obs.entries(), scratch.entries());
        scratch.clone_from(state);
        scratch.conjugate_1q(*qubit, &shift.minus);
        let minus = trace_product(obs.entries(), scratch.entries());
        Some((shift.param, 0.5 * (plus - minus)))
    }
}

/// Forward state and Heisenberg observable of one data point.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub state: DensityMatrix,
    pub observable: DensityMatrix,
}

/// Intermediates kept for the gradient sweep.
struct Tape {
    /// State entering each forward op.
    forward_inputs: Vec<DensityMatrix>,
    state: DensityMatrix,
    /// Observable seen just after each adjoint op's unitary.
    adjoint_observables: Vec<DensityMatrix>,
    observable: DensityMatrix,
}

/// Evaluates kernels of one feature map under one noise mode.
#[derive(Debug, Clone)]
pub struct KernelEngine {
    spec: FeatureMapSpec,
    p_gate: f64,
    p_global: f64,
}

impl KernelEngine {
    /// Shot sampling is not handled here; see [`crate::learn::gram`].
    pub fn new(spec: &FeatureMapSpec, mode: NoiseMode) -> Result<Self> {
        let model = NoiseModel { mode, shots: None };
        model.validate()?;
        Ok(Self {
            spec: spec.clone(),
            p_gate: model.gate_probability(),
            p_global: model.global_rate(),
        })
    }

    pub fn spec(&self) -> &FeatureMapSpec {
        &self.spec
    }

    fn fused_noise(&self) -> f64 {
        1.0 - (1.0 - self.p_gate).powi(3)
    }

    fn forward_ops(&self, theta: &ParameterVector, x: &[f64]) -> Result<Vec<Op>> {
        theta.check(&self.spec)?;
        self.spec.check_features(x)?;
        let n = self.spec.n_qubits;
        let h = hadamard();
        let mut ops = Vec::with_capacity(self.spec.layers * 2 * n);
        for layer in 0..self.spec.layers {
            for q in 0..n {
                let t = self.spec.param_index(layer, q);
                let zh = matmul2(&rot_z(x[self.spec.embedding[q]]), &h);
                let at = |a: f64| matmul2(&rot_y(a), &zh);
                ops.push(Op {
                    kind: OpKind::One {
                        qubit: q,
                        u: at(theta.0[t]),
                        shift: Some(Box::new(Shift {
                            param: t,
                            plus: at(theta.0[t] + FRAC_PI_2),
                            minus: at(theta.0[t] - FRAC_PI_2),
                        })),
                    },
                    noise: self.fused_noise(),
                    noise_first: false,
                });
            }
            if n > 1 {
                for q in 0..n {
                    ops.push(Op {
                        kind: OpKind::Cnot {
                            control: q,
                            target: (q + 1) % n,
                        },
                        noise: self.p_gate,
                        noise_first: false,
                    });
                }
            }
        }
        Ok(ops)
    }

    fn adjoint_ops(&self, theta: &ParameterVector, x: &[f64]) -> Result<Vec<Op>> {
        theta.check(&self.spec)?;
        self.spec.check_features(x)?;
        let n = self.spec.n_qubits;
        let h = hadamard();
        let mut ops = Vec::with_capacity(self.spec.layers * 2 * n);
        for layer in (0..self.spec.layers).rev() {
            if n > 1 {
                for q in (0..n).rev() {
                    ops.push(Op {
                        kind: OpKind::Cnot {
                            control: q,
                            target: (q + 1) % n,
                        },
                        noise: self.p_gate,
                        noise_first: true,
                    });
                }
            }
            for q in (0..n).rev() {
                let t = self.spec.param_index(layer, q);
                let hz = matmul2(&h, &rot_z(-x[self.spec.embedding[q]]));
                // The occurrence carries -theta_t; shifting theta_t moves it by -+pi/2.
                let at = |a: f64| matmul2(&hz, &rot_y(-a));
                ops.push(Op {
                    kind: OpKind::One {
                        qubit: q,
                        u: at(theta.0[t]),
                        shift: Some(Box::new(Shift {
                            param: t,
                            plus: at(theta.0[t] + FRAC_PI_2),
                            minus: at(theta.0[t] - FRAC_PI_2),
                        })),
                    },
                    noise: self.fused_noise(),
                    noise_first: true,
                });
            }
        }
        Ok(ops)
    }

    /// `rho(x)`: the noisy encoding circuit applied to `|0...0>`.
    pub fn state(&self, theta: &ParameterVector, x: &[f64]) -> Result<DensityMatrix> {
        let mut rho = zero_state(self.spec.n_qubits)?;
        for op in self.forward_ops(theta, x)? {
            op.apply(&mut rho);
        }
        Ok(rho)
    }

    /// `M(x)`: the all-zeros projector pulled back through the noisy adjoint circuit.
    pub fn observable(&self, theta: &ParameterVector, x: &[f64]) -> Result<DensityMatrix> {
        let mut obs = zero_state(self.spec.n_qubits)?;
        for op in self.adjoint_ops(theta, x)?.iter().rev() {
            op.apply_dual(&mut obs);
        }
        Ok(obs)
    }

    pub fn embed(&self, theta: &ParameterVector, x: &[f64]) -> Result<Embedding> {
        Ok(Embedding {
            state: self.state(theta, x)?,
            observable: self.observable(theta, x)?,
        })
    }

    /// Unclamped `Tr[rho M]` before the global-noise map.
    fn raw(&self, state: &DensityMatrix, observable: &DensityMatrix) -> f64 {
        trace_product(state.entries(), observable.entries())
    }

    fn finish(&self, raw: f64) -> f64 {
        let k = raw.clamp(0.0, 1.0);
        (1.0 - self.p_global) * k + self.p_global / self.spec.dim() as f64
    }

    /// Kernel value between the point encoded in `a` and the one observed in `b`.
    pub fn pair(&self, a: &DensityMatrix, b: &DensityMatrix) -> f64 {
        self.finish(self.raw(a, b))
    }

    /// Full Gram matrix; entry `(i, j)` for `i <= j` is `K(x_i, x_j)`, mirrored.
    pub fn gram<X: AsRef<[f64]> + Sync>(&self, theta: &ParameterVector, xs: &[X]) -> Result<DMatrix<f64>> {
        let emb = par::try_map(xs, |x| self.embed(theta, x.as_ref()))?;
        Ok(self.gram_from(&emb))
    }

    /// Gram matrix from precomputed embeddings.
    pub fn gram_from(&self, emb: &[Embedding]) -> DMatrix<f64> {
        let n = emb.len();
        let rows = par::map_range(n, |i| {
            (i..n)
                .map(|j| self.pair(&emb[i].state, &emb[j].observable))
                .collect::<Vec<_>>()
        });
        let mut k = DMatrix::zeros(n, n);
        for (i, row) in rows.into_iter().enumerate() {
            for (off, v) in row.into_iter().enumerate() {
                k[(i, i + off)] = v;
                k[(i + off, i)] = v;
            }
        }
        k
    }

    /// `K(x_i, z_j)` for query points `x_i` against reference points `z_j`.
    pub fn cross_from(&self, queries: &[DensityMatrix], refs: &[Embedding]) -> DMatrix<f64> {
        let rows = par::map(queries, |q| {
            refs.iter().map(|r| self.pair(q, &r.observable)).collect::<Vec<_>>()
        });
        DMatrix::from_fn(queries.len(), refs.len(), |i, j| rows[i][j])
    }

    fn tape(&self, theta: &ParameterVector, x: &[f64]) -> Result<(Tape, Vec<Op>, Vec<Op>)> {
        let fwd = self.forward_ops(theta, x)?;
        let adj = self.adjoint_ops(theta, x)?;
        let mut rho = zero_state(self.spec.n_qubits)?;
        let mut forward_inputs = Vec::with_capacity(fwd.len());
        for op in &fwd {
            forward_inputs.push(rho.clone());
            op.apply(&mut rho);
        }
        let mut obs = zero_state(self.spec.n_qubits)?;
        let mut adjoint_observables = vec![obs.clone(); adj.len()];
        for (k, op) in adj.iter().enumerate().rev() {
            op.post(&mut obs);
            adjoint_observables[k].clone_from(&obs);
            op.unitary_dual(&mut obs);
            op.pre(&mut obs);
        }
        Ok((
            Tape {
                forward_inputs,
                state: rho,
                adjoint_observables,
                observable: obs,
            },
            fwd,
            adj,
        ))
    }

    /// Gram matrix plus the gradient of a scalar function of it.
    ///
    /// `outer` receives the Gram matrix and returns `(f, df/dK)` where `df/dK`
    /// is taken entrywise over all ordered pairs. Clamping is ignored in the
    /// derivative.
    pub fn gram_with_gradient<X, T, F>(
        &self,
        theta: &ParameterVector,
        xs: &[X],
        outer: F,
    ) -> Result<(DMatrix<f64>, T, Vec<f64>)>
    where
        X: AsRef<[f64]> + Sync,
        F: FnOnce(&DMatrix<f64>) -> Result<(T, DMatrix<f64>)>,
    {
        let n = xs.len();
        let tapes = par::try_map(xs, |x| self.tape(theta, x.as_ref()))?;
        let k = {
            let emb: Vec<Embedding> = tapes
                .iter()
                .map(|(t, _, _)| Embedding {
                    state: t.state.clone(),
                    observable: t.observable.clone(),
                })
                .collect();
            self.gram_from(&emb)
        };
        let (value, dk) = outer(&k)?;
        // Each unordered pair was evaluated once as Tr[rho_i M_j] with i <= j.
        let scale = 1.0 - self.p_global;
        let coeff = |i: usize, j: usize| {
            let w = if i == j { dk[(i, i)] } else { dk[(i, j)] + dk[(j, i)] };
            w * scale
        };
        let n_params = self.spec.n_params();
        let partials = par::map_range(n, |i| {
            let mut grad = vec![0.0; n_params];
            let (tape, fwd, adj) = &tapes[i];

            // d/dtheta of Tr[rho_i O_i], O_i = sum_{j >= i} c_ij M_j.
            let mut obs = DensityMatrix::zeros(self.spec.n_qubits).expect("valid register");
            for j in i..n {
                obs.axpy(coeff(i, j), &tapes[j].0.observable);
            }
            for (op, input) in fwd.iter().zip(&tape.forward_inputs).rev() {
                op.post(&mut obs);
                let mut input = input.clone();
                op.pre(&mut input);
                if let Some((t, g)) = op.shift_derivative(&obs, &input) {
                    grad[t] += g;
                }
                op.unitary_dual(&mut obs);
                op.pre(&mut obs);
            }

            // d/dtheta of Tr[R_i M_i], R_i = sum_{j <= i} c_ji rho_j.
            let mut state = DensityMatrix::zeros(self.spec.n_qubits).expect("valid register");
            for j in 0..=i {
                state.axpy(coeff(j, i), &tapes[j].0.state);
            }
            for (op, obs) in adj.iter().zip(&tape.adjoint_observables) {
                op.pre(&mut state);
                if let Some((t, g)) = op.shift_derivative(obs, &state) {
                    grad[t] += g;
                }
                op.unitary(&mut state);
                op.post(&mut state);
            }
            grad
        });
        let mut grad = vec![0.0; n_params];
        for p in partials {
            for (g, v) in grad.iter_mut().zip(p) {
                *g += v;
            }
        }
        Ok((k, value, grad))
    }
}
