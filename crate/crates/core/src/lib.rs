//! Decentralized quantum kernel learning on simulated noisy quantum nodes.

pub mod data;
pub mod dnet;
pub mod error;
pub mod learn;
pub mod par;
pub mod qkernel;
pub mod qsim;
pub mod runner;

pub use error::{Error, Result};
