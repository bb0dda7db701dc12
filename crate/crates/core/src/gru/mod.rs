// SPDX-License-Identifier: Apache-2.0

//! Value-domain model of the hardware-constrained minGRU.

mod bias;
mod forward;
mod ops;
mod scan;
mod types;

pub use bias::{bias_equivalence_transform, candidate_bias_outputs, CandidateBiasLayer};
pub(crate) use forward::check_input;
pub use forward::{argmax, forward_sequential, predict, Forward};
pub use ops::{
    gate_code, gate_offset, gate_preactivation, gru_step, hard_sigmoid, mac, mix,
    output_activation, projection_mean, quantize_gate, StepOutput, GATE_OFFSET_STEP,
};
pub use scan::{affine_scan, parallel_scan_forward, Affine};
pub use types::{
    column_height, BiasCode, GateCode, HiddenState, LayerParams, Network, NetworkConfig, Readout,
    Sequence, WeightCode, BANK_GRANULE, GATE_LEVELS, NEUTRAL_BIAS,
};
