// SPDX-License-Identifier: Apache-2.0

//! Training tasks.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gru::Sequence;
use crate::io::{image_sequence, synthetic_digits, Dataset, DatasetSource, Example, Presentation};

/// Input width of the delayed-parity task.
pub const PARITY_WIDTH: usize = 3;

/// Two bits presented `gap` steps apart in an otherwise blank sequence; the
/// label is their XOR, read out at the last step.
///
/// Every step is one-hot over three channels: bit 0, bit 1 and blank. The
/// first bit arrives at a uniformly drawn step that leaves the second bit
/// inside the sequence.
pub fn delayed_parity(n: usize, steps: usize, gap: usize, seed: u64) -> Dataset {
    assert!(gap >= 1 && gap < steps, "gap must lie in 1..steps");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let examples = (0..n)
        .map(|_| {
            let t0 = rng.random_range(0..steps - gap);
            let a: bool = rng.random();
            let b: bool = rng.random();
            let mut bits = vec![false; PARITY_WIDTH * steps];
            for t in 0..steps {
                let ch = match t {
                    _ if t == t0 => a as usize,
                    _ if t == t0 + gap => b as usize,
                    _ => 2,
                };
                bits[PARITY_WIDTH * t + ch] = true;
            }
            Example {
                input: Sequence::new(PARITY_WIDTH, bits).expect("whole steps"),
                label: (a ^ b) as usize,
            }
        })
        .collect();
    Dataset { examples }
}

/// Where digit images come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum DigitSource {
    /// Procedurally drawn digits.
    Synthetic,
    /// MNIST IDX files in a directory.
    Mnist { dir: PathBuf },
}

impl DigitSource {
    /// MNIST when `MNIST_DIR` names a directory with the IDX files, synthetic otherwise.
    pub fn from_env() -> Self {
        match std::env::var_os("MNIST_DIR").map(PathBuf::from) {
            Some(dir) if dir.join("train-images-idx3-ubyte").is_file() => Self::Mnist { dir },
            _ => Self::Synthetic,
        }
    }
}

fn synthetic(n: usize, seed: u64, presentation: Presentation, threshold: f64) -> Dataset {
    let (imgs, labels) = synthetic_digits(n, seed);
    let examples = (0..n)
        .map(|i| Example {
            input: image_sequence(imgs.image(i), imgs.rows, imgs.cols, presentation, threshold)
                .expect("28x28"),
            label: labels[i] as usize,
        })
        .collect();
    Dataset { examples }
}

fn mnist(dir: &Path, prefix: &str, n: usize, p: Presentation, threshold: f64) -> Result<Dataset> {
    DatasetSource::idx_dir(dir, prefix, threshold, p)
        .with_limit(Some(n))
        .load()
}

/// Train and test subsets of a digit dataset.
pub fn digit_subsets(
    source: &DigitSource,
    n_train: usize,
    n_test: usize,
    presentation: Presentation,
    threshold: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    match source {
        DigitSource::Synthetic => Ok((
            synthetic(n_train, seed, presentation, threshold),
            synthetic(n_test, seed ^ 0x5eed_7e57, presentation, threshold),
        )),
        DigitSource::Mnist { dir } => Ok((
            mnist(dir, "train", n_train, presentation, threshold)?,
            mnist(dir, "t10k", n_test, presentation, threshold)?,
        )),
    }
}
