// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("{field} code {value} out of range 0..={max}")]
    CodeOutOfRange {
        field: &'static str,
        value: i64,
        max: u32,
    },

    #[error("unsupported model format version {found} (this build reads version {expected})")]
    UnsupportedVersion { found: i64, expected: u32 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("empty input sequence")]
    EmptySequence,

    #[error("no sequences in dataset")]
    EmptyDataset,

    #[error("ADC node has no capacitance (no signal segments and no DAC)")]
    DegenerateAdc,

    #[error("swap count {k} exceeds bank size {n}")]
    SwapOverflow { k: usize, n: usize },

    #[error(
        "layer {layer}: {what} {model} does not match the circuit's calibrated value {circuit}"
    )]
    Calibration {
        layer: usize,
        what: &'static str,
        model: f64,
        circuit: f64,
    },

    #[error("charge not conserved during {event}: relative error {rel_err:e}")]
    ChargeViolation { event: &'static str, rel_err: f64 },

    #[error("bias {bias} on unit {unit} cannot be folded into the threshold DAC: {reason}")]
    UnrepresentableBias {
        unit: usize,
        bias: f64,
        reason: &'static str,
    },

    #[error("idx file {path}: {reason}")]
    Idx { path: PathBuf, reason: String },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value during training: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
