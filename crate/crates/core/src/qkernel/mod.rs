//! Feature-map circuits, noisy quantum kernels and their gradients.
//!
//! [`kernel_value`] and [`kernel_grad`] simulate the full interference circuit
//! gate by gate; [`KernelEngine`] computes the same quantities in batches.

mod engine;
mod feature_map;
mod kernel;

pub use engine::{Embedding, KernelEngine};
pub use feature_map::{
    build_layer_gates, encoding_circuit, interference_circuit, FeatureMapSpec, ParamSlot, ParameterVector,
};
pub use kernel::{
    analytic_noisy_kernel, effective_rate, kernel_eval, kernel_grad, kernel_value, shift_rule, shot_sample,
    KernelValue, NoiseMode, NoiseModel,
};
