// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::path::PathBuf;

use minimalist::circuit::CircuitParams;
use minimalist::gru::{column_height, BiasCode, LayerParams, Network, Sequence, WeightCode};
use rand::Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn golden_model_path() -> PathBuf {
    data_dir().join("golden_1_4_2.mgru.json")
}

/// Random layer calibrated to `circuit`, with a random slope setting.
pub fn random_layer<R: Rng>(
    rng: &mut R,
    n_in: usize,
    n_out: usize,
    circuit: &CircuitParams,
) -> LayerParams {
    let mut codes = |n: usize| -> Vec<WeightCode> {
        (0..n)
            .map(|_| WeightCode::new(rng.random_range(0..4)).unwrap())
            .collect()
    };
    let w_h = codes(n_in * n_out);
    let w_z = codes(n_in * n_out);
    let mut l = LayerParams::new(n_in, n_out, w_h, w_z, 1.0, 1.0).unwrap();
    l.slope_segments = rng.random_range(0..=column_height(n_in) as u32);
    circuit.calibrate(&mut l).unwrap();
    l.b_z = (0..n_out)
        .map(|_| BiasCode::new(rng.random_range(0..=BiasCode::MAX)).unwrap())
        .collect();
    l.b_h = (0..n_out)
        .map(|_| BiasCode::new(rng.random_range(0..=BiasCode::MAX)).unwrap())
        .collect();
    // initial states on the 1/64 value grid keep voltages exact
    l.h_init = (0..n_out)
        .map(|_| rng.random_range(-192..=192) as f64 / 64.0)
        .collect();
    l
}

pub fn random_network<R: Rng>(rng: &mut R, sizes: &[usize], circuit: &CircuitParams) -> Network {
    let layers = sizes
        .windows(2)
        .map(|w| random_layer(rng, w[0], w[1], circuit))
        .collect();
    Network::new(layers).unwrap()
}

pub fn random_sequence<R: Rng>(rng: &mut R, width: usize, steps: usize, density: f64) -> Sequence {
    Sequence::new(
        width,
        (0..width * steps)
            .map(|_| rng.random_bool(density))
            .collect(),
    )
    .unwrap()
}

/// Layer width whose column needs 1, 2 or 4 banks of 64 rows.
pub fn dyadic_width<R: Rng>(rng: &mut R) -> usize {
    match rng.random_range(0..10) {
        0..=6 => rng.random_range(1..=64),
        7 | 8 => rng.random_range(65..=128),
        _ => rng.random_range(193..=256),
    }
}
