// SPDX-License-Identifier: Apache-2.0

//! Folding an additive candidate bias into the comparator threshold.
//!
//! A block with `h_tilde' = h_tilde + c` and initial state `h0'` tracks
//! `h' = h + c`, where `h` is the unbiased block started from `h0' - c`.
//! Its outputs `h' >= theta'` are therefore reproduced by the unbiased block
//! with threshold `theta' - c`.

use super::ops::{gate_code, mac, mix, projection_mean};
use super::types::{BiasCode, HiddenState, LayerParams, Sequence};
use crate::error::{Error, Result};

/// A GRU block whose candidate carries an explicit per-unit bias.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateBiasLayer {
    /// Weights, gates, thresholds and initial state of the biased block.
    pub layer: LayerParams,
    pub candidate_bias: Vec<f64>,
}

impl CandidateBiasLayer {
    pub fn step(&self, x: &[bool], h_prev: &HiddenState) -> Result<(HiddenState, Vec<bool>)> {
        let l = &self.layer;
        if x.len() != l.n_in || h_prev.0.len() != l.n_out || self.candidate_bias.len() != l.n_out {
            return Err(Error::DimMismatch(
                "candidate-bias layer input/state/bias sizes disagree".into(),
            ));
        }
        let mut h = Vec::with_capacity(l.n_out);
        let mut out = Vec::with_capacity(l.n_out);
        for unit in 0..l.n_out {
            let cand = projection_mean(mac(l.w_h_row(unit), x)?, l) + self.candidate_bias[unit];
            let z = gate_code(mac(l.w_z_row(unit), x)?, l, unit);
            let next = mix(z, cand, h_prev.0[unit]);
            out.push(next >= l.threshold(unit));
            h.push(next);
        }
        Ok((HiddenState(h), out))
    }
}

/// Threshold-form equivalent of a candidate-bias block.
///
/// Fails if a bias is not a whole number of threshold steps or pushes the
/// threshold code out of its 6-bit range.
pub fn bias_equivalence_transform(variant: &CandidateBiasLayer) -> Result<LayerParams> {
    let mut out = variant.layer.clone();
    if variant.candidate_bias.len() != out.n_out {
        return Err(Error::DimMismatch(format!(
            "{} candidate biases for {} units",
            variant.candidate_bias.len(),
            out.n_out
        )));
    }
    for (unit, &c) in variant.candidate_bias.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let scale = out.threshold_scale;
        if scale == 0.0 {
            return Err(Error::UnrepresentableBias {
                unit,
                bias: c,
                reason: "threshold DAC has zero step",
            });
        }
        let steps = (c / scale).round();
        if steps * scale != c {
            return Err(Error::UnrepresentableBias {
                unit,
                bias: c,
                reason: "not a whole number of threshold steps",
            });
        }
        let code = out.b_h[unit].code() as i64 + steps as i64;
        if !(0..=BiasCode::MAX as i64).contains(&code) {
            return Err(Error::UnrepresentableBias {
                unit,
                bias: c,
                reason: "threshold code leaves the 6-bit range",
            });
        }
        out.b_h[unit] = BiasCode::saturating(code);
        out.h_init[unit] -= c;
    }
    Ok(out)
}

/// Binary output sequence of every layer of a candidate-bias network.
pub fn candidate_bias_outputs(
    inputs: &Sequence,
    layers: &[CandidateBiasLayer],
) -> Result<Vec<Sequence>> {
    if inputs.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut states: Vec<HiddenState> = layers
        .iter()
        .map(|l| HiddenState(l.layer.h_init.clone()))
        .collect();
    let mut bits: Vec<Vec<bool>> = vec![Vec::new(); layers.len()];
    for x in inputs.iter() {
        let mut x = x.to_vec();
        for (li, layer) in layers.iter().enumerate() {
            let (h, out) = layer.step(&x, &states[li])?;
            states[li] = h;
            bits[li].extend_from_slice(&out);
            x = out;
        }
    }
    bits.into_iter()
        .zip(layers)
        .map(|(b, l)| Sequence::new(l.layer.n_out, b))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gru::{forward_sequential, Network, WeightCode};

    fn base() -> LayerParams {
        let w: Vec<WeightCode> = [0u8, 3, 1, 2, 2, 1]
            .iter()
            .map(|&c| WeightCode::new(c).unwrap())
            .collect();
        LayerParams::new(3, 2, w.clone(), w, 1.125, 1.0 / 16.0).unwrap()
    }

    #[test]
    fn zero_bias_is_identity() {
        let v = CandidateBiasLayer {
            layer: base(),
            candidate_bias: vec![0.0, 0.0],
        };
        assert_eq!(bias_equivalence_transform(&v).unwrap(), v.layer);
    }

    #[test]
    fn half_unit_bias() {
        let v = CandidateBiasLayer {
            layer: base(),
            candidate_bias: vec![0.5, 0.0],
        };
        let t = bias_equivalence_transform(&v).unwrap();
        assert_eq!(t.threshold(0), v.layer.threshold(0) - 0.5);
        assert_eq!(t.h_init, vec![-0.5, 0.0]);
        assert_eq!(t.b_h[0].code(), 40);

        let seq = Sequence::new(3, (0..60).map(|i| (i * 7 + i / 3) % 5 < 2).collect()).unwrap();
        let want = candidate_bias_outputs(&seq, &[v]).unwrap();
        let got = forward_sequential(&seq, &Network::new(vec![t]).unwrap()).unwrap();
        assert_eq!(got.outputs, want);
    }

    #[test]
    fn off_grid_bias_rejected() {
        let v = CandidateBiasLayer {
            layer: base(),
            candidate_bias: vec![0.03, 0.0],
        };
        assert!(matches!(
            bias_equivalence_transform(&v),
            Err(Error::UnrepresentableBias { unit: 0, .. })
        ));
        let v = CandidateBiasLayer {
            layer: base(),
            candidate_bias: vec![0.0, 4.0],
        };
        assert!(bias_equivalence_transform(&v).is_err());
    }
}
