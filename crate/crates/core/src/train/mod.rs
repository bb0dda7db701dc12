// SPDX-License-Identifier: Apache-2.0

//! Quantization-aware training with straight-through estimators.

pub mod forward;
pub mod gradcheck;
pub mod model;
pub mod phase;
pub mod schedule;
pub mod tasks;

pub use forward::{backward_train, forward_train, loss_and_grads, Cache, Prepared};
pub use gradcheck::{gradcheck, relative_error, GradCheckReport};
pub use model::{Grads, InitConfig, LatentLayer, TrainModel};
pub use phase::QatPhase;
pub use schedule::{
    evaluate, network_accuracy, run_schedule, EpochMetrics, Optimizer, PhaseSpec, TaskConfig,
    TrainConfig, TrainOutcome,
};
pub use tasks::{delayed_parity, digit_subsets, DigitSource};
