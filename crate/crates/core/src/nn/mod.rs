//! Dense layers, the peephole LSTM with exact BPTT, gradient descent, a
//! finite-difference gradient checker and a JSON checkpoint format. All
//! arithmetic is f64.

mod checkpoint;
mod dense;
mod gradcheck;
mod lstm;
mod optim;
pub(crate) mod params;

pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use dense::{sigmoid, Activation, Dense, MlpParams, MlpTape};
pub use gradcheck::{grad_check, relative_error};
pub use lstm::{LstmParams, LstmTape};
pub use optim::{optimizer_step, Optimizer, OptimizerConfig, OptimizerKind, StepStats};
pub use params::{
    accumulate, all_finite, assign_flat, fill, flatten, global_norm, param_count, scale, visit_mut_prefixed, visit_prefixed, zeros_like,
    ParamSet,
};
