// SPDX-License-Identifier: Apache-2.0

//! Phase schedule, optimizer and metrics.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::CircuitParams;
use crate::error::{Error, Result};
use crate::gru::{Network, NetworkConfig};
use crate::io::{Dataset, Presentation};

use super::forward::{forward_train, loss_and_grads, Prepared};
use super::model::{Grads, InitConfig, TrainModel};
use super::phase::QatPhase;
use super::tasks::{delayed_parity, digit_subsets, DigitSource};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskConfig {
    DelayedParity {
        steps: usize,
        gap: usize,
        train: usize,
        test: usize,
    },
    /// Digits presented one 28-pixel row per step.
    RowSmnist {
        train: usize,
        test: usize,
        #[serde(default = "half")]
        threshold: f64,
        #[serde(default)]
        source: Option<DigitSource>,
    },
    /// Digits presented one pixel per step.
    SmnistSubset {
        train: usize,
        test: usize,
        #[serde(default = "half")]
        threshold: f64,
        #[serde(default)]
        source: Option<DigitSource>,
    },
}

fn half() -> f64 {
    0.5
}

impl TaskConfig {
    /// Train and test sets; `seed` only affects generated data.
    pub fn datasets(&self, seed: u64) -> Result<(Dataset, Dataset)> {
        match self {
            Self::DelayedParity {
                steps,
                gap,
                train,
                test,
            } => {
                if *gap == 0 || gap >= steps {
                    return Err(Error::Config(format!(
                        "delayed parity needs 0 < gap < steps (got gap {gap}, steps {steps})"
                    )));
                }
                Ok((
                    delayed_parity(*train, *steps, *gap, seed),
                    delayed_parity(*test, *steps, *gap, seed ^ 0x7e57),
                ))
            }
            Self::RowSmnist {
                train,
                test,
                threshold,
                source,
            }
            | Self::SmnistSubset {
                train,
                test,
                threshold,
                source,
            } => {
                let p = if matches!(self, Self::RowSmnist { .. }) {
                    Presentation::Rows
                } else {
                    Presentation::PixelStream
                };
                let src = source.clone().unwrap_or_else(DigitSource::from_env);
                digit_subsets(&src, *train, *test, p, *threshold, seed)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpec {
    pub phase: QatPhase,
    pub epochs: usize,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub task: TaskConfig,
    /// Network shape, e.g. `"2-16-16-2"`.
    pub network: String,
    pub phases: Vec<PhaseSpec>,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub optimizer: Optimizer,
    #[serde(default = "defaults::momentum")]
    pub momentum: f64,
    /// Global gradient-norm clip.
    #[serde(default = "defaults::clip_norm")]
    pub clip_norm: f64,
    #[serde(default = "defaults::logit_scale")]
    pub logit_scale: f64,
    /// Gate sampling capacitors kept on the ADC node; fixes every layer's gate gain.
    #[serde(default = "defaults::slope_segments")]
    pub slope_segments: u32,
    #[serde(default = "defaults::weight_scale")]
    pub init_weight_scale: f64,
    #[serde(default = "defaults::gate_bias")]
    pub init_gate_bias: f64,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    pub fn batch_size() -> usize {
        32
    }
    pub fn momentum() -> f64 {
        0.9
    }
    pub fn clip_norm() -> f64 {
        5.0
    }
    pub fn logit_scale() -> f64 {
        4.0
    }
    pub fn slope_segments() -> u32 {
        24
    }
    pub fn weight_scale() -> f64 {
        1.5
    }
    pub fn gate_bias() -> f64 {
        0.0
    }
}

impl TrainConfig {
    /// Schedule used for the delayed-parity regression target.
    pub fn delayed_parity_default() -> Self {
        Self {
            task: TaskConfig::DelayedParity {
                steps: 16,
                gap: 6,
                train: 2000,
                test: 1000,
            },
            network: "3-16-2".into(),
            phases: vec![
                PhaseSpec {
                    phase: QatPhase::FLOAT,
                    epochs: 10,
                    lr: 0.03,
                },
                PhaseSpec {
                    phase: QatPhase::WEIGHTS,
                    epochs: 5,
                    lr: 0.01,
                },
                PhaseSpec {
                    phase: QatPhase::BINARY,
                    epochs: 10,
                    lr: 0.005,
                },
                PhaseSpec {
                    phase: QatPhase::HARDWARE,
                    epochs: 10,
                    lr: 0.002,
                },
            ],
            batch_size: defaults::batch_size(),
            optimizer: Optimizer::default(),
            momentum: defaults::momentum(),
            clip_norm: defaults::clip_norm(),
            logit_scale: defaults::logit_scale(),
            slope_segments: 64,
            init_weight_scale: defaults::weight_scale(),
            init_gate_bias: defaults::gate_bias(),
            seed: 0,
        }
    }

    /// Schedule used for the row-by-row digit regression target.
    pub fn row_smnist_default() -> Self {
        Self {
            task: TaskConfig::RowSmnist {
                train: 1000,
                test: 500,
                threshold: 0.5,
                source: None,
            },
            network: "28-32-10".into(),
            phases: vec![
                PhaseSpec {
                    phase: QatPhase::FLOAT,
                    epochs: 20,
                    lr: 0.03,
                },
                PhaseSpec {
                    phase: QatPhase::WEIGHTS,
                    epochs: 10,
                    lr: 0.01,
                },
                PhaseSpec {
                    phase: QatPhase::BINARY,
                    epochs: 10,
                    lr: 0.005,
                },
                PhaseSpec {
                    phase: QatPhase::HARDWARE,
                    epochs: 10,
                    lr: 0.002,
                },
            ],
            init_gate_bias: -2.0,
            ..Self::delayed_parity_default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg: NetworkConfig = self.network.parse()?;
        let _ = cfg;
        if self.phases.is_empty() {
            return Err(Error::Config("schedule has no phases".into()));
        }
        for w in self.phases.windows(2) {
            if !w[1].phase.contains(w[0].phase) {
                return Err(Error::Config(format!(
                    "phase {} drops constraints of phase {}",
                    w[1].phase, w[0].phase
                )));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        let finite = [self.momentum, self.clip_norm, self.logit_scale]
            .iter()
            .chain(self.phases.iter().map(|p| &p.lr))
            .all(|v| v.is_finite() && *v >= 0.0);
        if !finite || self.momentum >= 1.0 {
            return Err(Error::Config(
                "learning rates, clip and logit scale must be >= 0 and momentum in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// One row of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub phase: String,
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
    pub seconds: f64,
    /// Set on the last epoch of a phase whose test accuracy ended at or below chance.
    pub regression: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: TrainModel,
    pub network: Network,
    pub metrics: Vec<EpochMetrics>,
    /// Test accuracy of the exported network under the inference engine.
    pub test_accuracy: f64,
    pub train: Dataset,
    pub test: Dataset,
    pub seconds: f64,
}

/// Mean loss and accuracy of `model` on `data` under `phase`.
pub fn evaluate(
    model: &TrainModel,
    phase: QatPhase,
    logit_scale: f64,
    data: &Dataset,
) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let prep = Prepared::new(model, phase, logit_scale)?;
    let results: Vec<(f64, bool)> = data
        .examples
        .par_iter()
        .map(|ex| {
            let c = forward_train(&prep, &ex.input, ex.label)?;
            Ok((c.loss, c.predicted() == ex.label))
        })
        .collect::<Result<_>>()?;
    let n = results.len() as f64;
    let loss = results.iter().map(|r| r.0).sum::<f64>() / n;
    let acc = results.iter().filter(|r| r.1).count() as f64 / n;
    Ok((loss, acc))
}

/// Accuracy of a deployed network under the inference engine.
pub fn network_accuracy(net: &Network, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hits = data
        .examples
        .par_iter()
        .map(|ex| Ok((crate::gru::predict(&ex.input, net)?.1 == ex.label) as usize))
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / data.len() as f64)
}

/// Parameter update rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    /// Heavy-ball momentum.
    Sgd,
    /// Adam; `momentum` is the first-moment decay.
    #[default]
    Adam,
}

const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// First-order optimizer with global-norm clipping; state resets per phase.
struct Step {
    kind: Optimizer,
    m: Grads,
    v: Grads,
    t: i32,
    momentum: f64,
    clip: f64,
}

impl Step {
    fn new(model: &TrainModel, config: &TrainConfig) -> Self {
        Self {
            kind: config.optimizer,
            m: Grads::zeros_like(model),
            v: Grads::zeros_like(model),
            t: 0,
            momentum: config.momentum,
            clip: config.clip_norm,
        }
    }

    fn apply(&mut self, model: &mut TrainModel, mut g: Grads, lr: f64) {
        let norm = g.norm();
        if self.clip > 0.0 && norm > self.clip {
            g.scale(self.clip / norm);
        }
        self.t += 1;
        let b1 = self.momentum;
        let (c1, c2) = (1.0 - b1.powi(self.t), 1.0 - ADAM_BETA2.powi(self.t));
        let params = model.blocks_mut().into_iter().flatten();
        let state = self
            .m
            .blocks
            .iter_mut()
            .flatten()
            .zip(self.v.blocks.iter_mut().flatten());
        for ((p, g), (m, v)) in params.zip(g.blocks.iter().flatten()).zip(state) {
            match self.kind {
                Optimizer::Sgd => {
                    *m = b1 * *m + g;
                    *p -= lr * *m;
                }
                Optimizer::Adam => {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                }
            }
        }
        model.clamp();
    }
}

/// Mean loss, gradient and hit count over a batch, reduced in example order.
fn batch_grads(prep: &Prepared, data: &Dataset, idx: &[usize]) -> Result<(f64, usize, Grads)> {
    let parts: Vec<(f64, bool, Grads)> = idx
        .par_iter()
        .map(|&i| {
            let ex = &data.examples[i];
            let (c, g) = loss_and_grads(prep, &ex.input, ex.label)?;
            Ok((c.loss, c.predicted() == ex.label, g))
        })
        .collect::<Result<_>>()?;
    let mut total = Grads::zeros_like(prep.model);
    let mut loss = 0.0;
    let mut hits = 0;
    for (l, hit, g) in &parts {
        total.add(g);
        loss += l;
        hits += *hit as usize;
    }
    total.scale(1.0 / idx.len() as f64);
    if !total.is_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok((loss, hits, total))
}

/// Runs the phase schedule and returns the hardened model.
///
/// Each metrics row is also written to `metrics` as CSV when given.
pub fn run_schedule(
    config: &TrainConfig,
    circuit: &CircuitParams,
    metrics: Option<&mut dyn Write>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let start = Instant::now();
    let (train, test) = config.task.datasets(config.seed)?;
    let shape: NetworkConfig = config.network.parse()?;
    let n_classes = train.n_classes().max(test.n_classes());
    if train.width()? != shape.layer_sizes[0] || n_classes > *shape.layer_sizes.last().unwrap() {
        return Err(Error::Config(format!(
            "network {} does not fit a task with {}-wide inputs and {n_classes} classes",
            config.network,
            train.width()?
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = TrainModel::init(
        &shape,
        config.slope_segments,
        circuit,
        &InitConfig {
            weight_scale: config.init_weight_scale,
            gate_bias: config.init_gate_bias,
        },
        &mut rng,
    )?;
    let chance = 1.0 / n_classes.max(1) as f64;
    let mut writer = metrics.map(csv::Writer::from_writer);
    let mut log = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for stage in &config.phases {
        let mut opt = Step::new(&model, config);
        for epoch in 0..stage.epochs {
            order.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            let mut hits = 0;
            for batch in order.chunks(config.batch_size) {
                let (loss, h, g) = {
                    let prep = Prepared::new(&model, stage.phase, config.logit_scale)?;
                    batch_grads(&prep, &train, batch)?
                };
                loss_sum += loss;
                hits += h;
                opt.apply(&mut model, g, stage.lr);
            }
            let (test_loss, test_acc) = evaluate(&model, stage.phase, config.logit_scale, &test)?;
            let row = EpochMetrics {
                phase: stage.phase.name(),
                epoch,
                lr: stage.lr,
                train_loss: loss_sum / train.len() as f64,
                train_acc: hits as f64 / train.len() as f64,
                test_loss,
                test_acc,
                seconds: start.elapsed().as_secs_f64(),
                regression: epoch + 1 == stage.epochs && test_acc <= chance,
            };
            if let Some(w) = writer.as_mut() {
                w.serialize(&row)?;
                w.flush()?;
            }
            log.push(row);
        }
    }

    let network = model.export()?;
    let test_accuracy = network_accuracy(&network, &test)?;
    Ok(TrainOutcome {
        model,
        network,
        metrics: log,
        test_accuracy,
        train,
        test,
        seconds: start.elapsed().as_secs_f64(),
    })
}
