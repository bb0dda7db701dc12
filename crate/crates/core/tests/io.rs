// SPDX-License-Identifier: Apache-2.0

mod common;

use minimalist::circuit::CircuitParams;
use minimalist::gru::{forward_sequential, Sequence};
use minimalist::io::{
    image_sequence, load_model, model_from_json, model_to_json, read_csv_sequences,
    read_idx_images, read_idx_labels, save_model, write_idx_images, write_idx_labels, Dataset,
    DatasetSource, IdxImages, Presentation,
};
use minimalist::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use common::{data_dir, golden_model_path, random_network};

const GOLDEN_SHA256: &str = "a19fbb107a8c15c2977ae388083a4eb6392556ffe641c9fd0cf0f552653790fb";

fn golden_text() -> String {
    std::fs::read_to_string(golden_model_path()).unwrap()
}

#[test]
fn golden_model_digest_is_pinned() {
    let digest = Sha256::digest(std::fs::read(golden_model_path()).unwrap());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(hex, GOLDEN_SHA256);
}

#[test]
fn golden_model_is_canonical() {
    let text = golden_text();
    let net = model_from_json(&text).unwrap();
    assert_eq!(model_to_json(&net), text);
    assert_eq!(net.config().layer_sizes, vec![1, 4, 2]);
    assert_eq!(net.layers()[0].slope_segments, 16);
    assert_eq!(net.layers()[1].h_init, vec![0.0, 0.5]);
}

#[test]
fn golden_logits() {
    let net = load_model(&golden_model_path()).unwrap();
    let data =
        read_csv_sequences(std::fs::File::open(data_dir().join("golden_sequences.csv")).unwrap())
            .unwrap();
    let expected = [
        [-0.24806803178265377, 0.7500675743785706],
        [-0.022639004432709164, 0.9967855796627103],
        [-0.24784260550241713, 0.75007141680027],
    ];
    assert_eq!(data.len(), expected.len());
    for (ex, want) in data.examples.iter().zip(expected) {
        let f = forward_sequential(&ex.input, &net).unwrap();
        assert_eq!(f.logits, want);
        assert_eq!(f.class, 1);
    }
}

#[test]
fn random_models_round_trip() {
    let circuit = CircuitParams::default();
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng, &[1, 8, 4], &circuit);
        let path = dir.path().join(format!("m{seed}.json"));
        save_model(&path, &net).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, net);
        assert_eq!(
            model_to_json(&back),
            std::fs::read_to_string(&path).unwrap()
        );
    }
}

#[test]
fn weight_code_out_of_range_is_rejected() {
    let text = golden_text().replacen("[2],\n        [1]", "[4],\n        [1]", 1);
    assert!(matches!(
        model_from_json(&text),
        Err(Error::CodeOutOfRange { .. })
    ));
}

#[test]
fn bias_code_out_of_range_is_rejected() {
    let text = golden_text().replace("\"b_z\": [34,", "\"b_z\": [64,");
    assert!(matches!(
        model_from_json(&text),
        Err(Error::CodeOutOfRange { .. })
    ));
}

#[test]
fn unsupported_version_is_rejected() {
    let text = golden_text().replace("\"format_version\": 1", "\"format_version\": 2");
    assert!(matches!(
        model_from_json(&text),
        Err(Error::UnsupportedVersion { found: 2, .. })
    ));
}

#[test]
fn inconsistent_dimensions_are_rejected() {
    let text = golden_text().replace("\"layer_sizes\": [1, 4, 2]", "\"layer_sizes\": [1, 4, 3]");
    assert!(model_from_json(&text).is_err());
    let text = golden_text().replace("\"b_h\": [29, 26]", "\"b_h\": [29]");
    assert!(model_from_json(&text).is_err());
}

#[test]
fn unknown_fields_are_rejected() {
    let text = golden_text().replacen("\"readout\"", "\"extra\": 1,\n  \"readout\"", 1);
    assert!(matches!(model_from_json(&text), Err(Error::Json(_))));
}

fn write_idx(dir: &std::path::Path, prefix: &str, pixels: Vec<u8>, labels: &[u8]) {
    let images = IdxImages {
        rows: 28,
        cols: 28,
        pixels,
    };
    write_idx_images(&dir.join(format!("{prefix}-images-idx3-ubyte")), &images).unwrap();
    write_idx_labels(&dir.join(format!("{prefix}-labels-idx1-ubyte")), labels).unwrap();
}

#[test]
fn idx_blank_and_saturated_images() {
    let dir = tempfile::tempdir().unwrap();
    let mut pixels = vec![0u8; 784];
    pixels.extend(vec![255u8; 784]);
    write_idx(dir.path(), "t10k", pixels, &[3, 7]);
    for p in [Presentation::PixelStream, Presentation::Rows] {
        let data: Dataset = DatasetSource::idx_dir(dir.path(), "t10k", 0.5, p)
            .load()
            .unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.examples[0].label, 3);
        assert!(data.examples[0].input.bits().iter().all(|&b| !b));
        assert!(data.examples[1].input.bits().iter().all(|&b| b));
        let steps = if p == Presentation::Rows { 28 } else { 784 };
        assert_eq!(data.examples[1].input.steps(), steps);
    }
}

#[test]
fn idx_bad_magic_and_truncation() {
    let dir = tempfile::tempdir().unwrap();
    write_idx(dir.path(), "train", vec![0u8; 784], &[1]);
    let images = dir.path().join("train-images-idx3-ubyte");
    let labels = dir.path().join("train-labels-idx1-ubyte");
    // labels file read as images has the wrong magic
    assert!(matches!(read_idx_images(&labels), Err(Error::Idx { .. })));
    let bytes = std::fs::read(&images).unwrap();
    std::fs::write(&images, &bytes[..bytes.len() - 1]).unwrap();
    assert!(matches!(read_idx_images(&images), Err(Error::Idx { .. })));
    std::fs::write(&images, &bytes[..10]).unwrap();
    assert!(matches!(read_idx_images(&images), Err(Error::Idx { .. })));
    assert_eq!(read_idx_labels(&labels).unwrap(), vec![1]);
}

#[test]
fn pixel_threshold_is_inclusive_of_bright_pixels() {
    let mut img = vec![0u8; 784];
    img[5] = 200;
    img[6] = 100;
    let seq: Sequence = image_sequence(&img, 28, 28, Presentation::PixelStream, 0.5).unwrap();
    assert!(seq.step(5)[0]);
    assert!(!seq.step(6)[0]);
}
