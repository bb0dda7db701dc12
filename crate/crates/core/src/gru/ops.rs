// SPDX-License-Identifier: Apache-2.0

//! Single-step arithmetic of the quantized GRU block.

use super::types::{
    threshold, BiasCode, GateCode, HiddenState, LayerParams, WeightCode, GATE_LEVELS,
};
use crate::error::{Error, Result};

/// Gate-offset step in hard-sigmoid input units: 32 codes span half of the
/// sigmoid's 6-unit linear range in each direction.
pub const GATE_OFFSET_STEP: f64 = 3.0 / 32.0;

/// Piece-wise linear sigmoid: 0 below -3, 1 above +3, `x/6 + 1/2` in between.
pub fn hard_sigmoid(x: f64) -> f64 {
    if x <= -3.0 {
        0.0
    } else if x >= 3.0 {
        1.0
    } else {
        x / 6.0 + 0.5
    }
}

/// 6-bit gate quantizer, `floor(sigma * 64)` clamped to 63.
///
/// Panics if `sigma` is outside `[0, 1]`.
pub fn quantize_gate(sigma: f64) -> GateCode {
    assert!(
        (0.0..=1.0).contains(&sigma),
        "gate activation {sigma} outside [0, 1]"
    );
    let code = (sigma * GATE_LEVELS as f64)
        .floor()
        .min(GateCode::MAX as f64);
    GateCode::new(code as u8).expect("clamped")
}

/// Integer multiply-accumulate of a weight row with a binary input.
pub fn mac(w_row: &[WeightCode], x: &[bool]) -> Result<i32> {
    if w_row.len() != x.len() {
        return Err(Error::DimMismatch(format!(
            "weight row has {} entries, input has {}",
            w_row.len(),
            x.len()
        )));
    }
    Ok(w_row
        .iter()
        .zip(x)
        .filter(|(_, &on)| on)
        .map(|(w, _)| w.value())
        .sum())
}

/// Mean over the column of a MAC result. Each input drives `replication` rows
/// of a `rows`-high column and idle rows contribute zero.
pub fn projection_mean(m: i32, layer: &LayerParams) -> f64 {
    (layer.replication() as i64 * m as i64) as f64 / layer.rows() as f64
}

/// Gate offset in hard-sigmoid input units for a 6-bit offset code.
pub fn gate_offset(code: BiasCode) -> f64 {
    code.offset() as f64 * GATE_OFFSET_STEP
}

/// Hard-sigmoid input for gate MAC `m` of `unit`.
pub fn gate_preactivation(m: i32, layer: &LayerParams, unit: usize) -> f64 {
    layer.gate_scale * projection_mean(m, layer) + gate_offset(layer.b_z[unit])
}

/// Gate code for gate MAC `m` of `unit`.
pub fn gate_code(m: i32, layer: &LayerParams, unit: usize) -> GateCode {
    quantize_gate(hard_sigmoid(gate_preactivation(m, layer, unit)))
}

/// Convex state mix `z * candidate + (1 - z) * prev`.
pub fn mix(z: GateCode, candidate: f64, prev: f64) -> f64 {
    let z = z.z_eff();
    z * candidate + (1.0 - z) * prev
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub h: HiddenState,
    pub z: Vec<GateCode>,
    pub h_tilde: Vec<f64>,
}

/// One time step of a GRU block.
pub fn gru_step(x: &[bool], h_prev: &HiddenState, layer: &LayerParams) -> Result<StepOutput> {
    if x.len() != layer.n_in {
        return Err(Error::DimMismatch(format!(
            "input has {} entries, layer expects {}",
            x.len(),
            layer.n_in
        )));
    }
    if h_prev.0.len() != layer.n_out {
        return Err(Error::DimMismatch(format!(
            "state has {} entries, layer has {} units",
            h_prev.0.len(),
            layer.n_out
        )));
    }
    let mut h = Vec::with_capacity(layer.n_out);
    let mut z = Vec::with_capacity(layer.n_out);
    let mut h_tilde = Vec::with_capacity(layer.n_out);
    for unit in 0..layer.n_out {
        let cand = projection_mean(mac(layer.w_h_row(unit), x)?, layer);
        let gate = gate_code(mac(layer.w_z_row(unit), x)?, layer, unit);
        h.push(mix(gate, cand, h_prev.0[unit]));
        z.push(gate);
        h_tilde.push(cand);
    }
    Ok(StepOutput {
        h: HiddenState(h),
        z,
        h_tilde,
    })
}

/// Heaviside output against per-unit thresholds `-(b_h - 32) * theta_scale`.
/// A state exactly on its threshold fires.
pub fn output_activation(h: &HiddenState, b_h: &[BiasCode], theta_scale: f64) -> Vec<bool> {
    h.0.iter()
        .zip(b_h)
        .map(|(&h, &b)| h >= threshold(b, theta_scale))
        .collect()
}
