// SPDX-License-Identifier: Apache-2.0

use minimalist::circuit::CircuitParams;
use minimalist::io::model_to_json;
use minimalist::train::{run_schedule, PhaseSpec, QatPhase, TaskConfig, TrainConfig};

fn small() -> TrainConfig {
    let mut cfg = TrainConfig::delayed_parity_default();
    cfg.task = TaskConfig::DelayedParity {
        steps: 10,
        gap: 3,
        train: 200,
        test: 100,
    };
    cfg
}

#[test]
fn training_is_deterministic_per_seed() {
    let circuit = CircuitParams::default();
    let mut cfg = small();
    cfg.phases.truncate(2);
    let a = run_schedule(&cfg, &circuit, None).unwrap();
    let b = run_schedule(&cfg, &circuit, None).unwrap();
    assert_eq!(model_to_json(&a.network), model_to_json(&b.network));
    assert_eq!(a.test_accuracy, b.test_accuracy);
    cfg.seed += 1;
    let c = run_schedule(&cfg, &circuit, None).unwrap();
    assert_ne!(model_to_json(&a.network), model_to_json(&c.network));
}

#[test]
fn float_phase_loss_decreases() {
    let mut cfg = small();
    cfg.phases = vec![PhaseSpec {
        phase: QatPhase::FLOAT,
        epochs: 6,
        lr: 0.03,
    }];
    let out = run_schedule(&cfg, &CircuitParams::default(), None).unwrap();
    let first = out.metrics.first().unwrap().train_loss;
    let last = out.metrics.last().unwrap().train_loss;
    assert!(last < first, "loss {first} -> {last}");
}

#[test]
fn metrics_csv_has_one_row_per_epoch() {
    let mut cfg = small();
    cfg.phases.truncate(1);
    let mut buf = Vec::new();
    let out = run_schedule(&cfg, &CircuitParams::default(), Some(&mut buf)).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("phase,epoch,"));
    assert_eq!(text.lines().count(), out.metrics.len() + 1);
}

#[test]
fn mismatched_network_is_rejected() {
    let mut cfg = small();
    cfg.network = "2-8-2".into();
    assert!(run_schedule(&cfg, &CircuitParams::default(), None).is_err());
}
