//! Differentiable testbeds with hand-written gradients.

pub mod data;
pub mod layers;
pub mod mlp;
pub mod quadratic;

pub use data::{inject_spikes, SyntheticDataset};
pub use layers::{rmsnorm_fwd, swiglu_fwd, RmsNormCache, SwiGluCache, SwiGluGrads};
pub use mlp::{cross_entropy, MlpModel, MlpShape};
pub use quadratic::QuadraticProblem;
