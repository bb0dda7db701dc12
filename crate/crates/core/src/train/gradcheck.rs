// SPDX-License-Identifier: Apache-2.0

use serde::Serialize;

use crate::error::Result;
use crate::gru::Sequence;

use super::forward::{forward_train, loss_and_grads, Prepared};
use super::model::TrainModel;
use super::phase::QatPhase;

/// Agreement between analytic and central-difference gradients.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    /// Largest relative error per parameter block, in [`TrainModel::blocks`] order.
    pub per_block: Vec<f64>,
    pub max_rel_err: f64,
    pub checked: usize,
}

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares float-phase gradients of one example with central differences.
pub fn gradcheck(
    model: &TrainModel,
    input: &Sequence,
    label: usize,
    eps: f64,
    logit_scale: f64,
) -> Result<GradCheckReport> {
    let phase = QatPhase::FLOAT;
    let (_, grads) = loss_and_grads(&Prepared::new(model, phase, logit_scale)?, input, label)?;
    let loss_at = |m: &TrainModel| -> Result<f64> {
        Ok(forward_train(&Prepared::new(m, phase, logit_scale)?, input, label)?.loss)
    };
    let mut probe = model.clone();
    let mut per_block = Vec::new();
    let mut checked = 0;
    for (b, g) in grads.blocks.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for (i, &analytic) in g.iter().enumerate() {
            let orig = probe.blocks()[b][i];
            probe.blocks_mut()[b][i] = orig + eps;
            let up = loss_at(&probe)?;
            probe.blocks_mut()[b][i] = orig - eps;
            let down = loss_at(&probe)?;
            probe.blocks_mut()[b][i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max(relative_error(analytic, numeric));
            checked += 1;
        }
        per_block.push(worst);
    }
    let max_rel_err = per_block.iter().cloned().fold(0.0, f64::max);
    Ok(GradCheckReport {
        per_block,
        max_rel_err,
        checked,
    })
}
