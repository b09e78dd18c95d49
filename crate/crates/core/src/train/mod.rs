//! Backpropagation, optimization and gradient verification.

mod adam;
mod backprop;
mod gradcheck;
mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use backprop::{
    backprop_delta, backward, batch_gradient, evaluate, output_delta, sample_gradient, weight_grad,
    GradientSet, GRADIENT_CHUNK,
};
pub use gradcheck::{grad_check, grad_check_against, relative_error, GradCheckReport, ParamKind, DEFAULT_EPS};
pub use trainer::{train, EpochRecord, TrainConfig, TrainOutcome};
