// SPDX-License-Identifier: Apache-2.0

//! Model files, datasets and traces.

pub mod dataset;
pub mod idx;
pub mod model;
pub mod synth;
pub mod trace;

pub use dataset::{read_csv_sequences, write_csv_sequences, Dataset, DatasetSource, Example};
pub use idx::{
    binarize, image_sequence, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels,
    IdxImages, Presentation,
};
pub use model::{load_model, model_from_json, model_to_json, save_model, FORMAT_VERSION};
pub use synth::synthetic_digits;
pub use trace::{
    compare_traces, read_traces, write_traces, write_traces_file, TraceDiff, TraceRecord,
};
