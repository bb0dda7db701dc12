// SPDX-License-Identifier: Apache-2.0

//! Training forward pass and hand-written backpropagation through time.
//!
//! Each layer computes, per step and unit,
//!
//! ```text
//! h_tilde = c * (W_h u)          c = replication / rows
//! a       = alpha * c * (W_z u) + beta
//! z       = gate(a)
//! h       = z * h_tilde + (1 - z) * h_prev
//! y       = out(h - theta)        logistic, or Heaviside once binarized
//! ```
//!
//! and the loss is softmax cross-entropy on `scale * h` of the last layer at
//! the final step. With every constraint active the forward pass goes through
//! the deployed integer datapath, so it equals the inference engine exactly.

use crate::error::{Error, Result};
use crate::gru::{
    gate_preactivation, hard_sigmoid, mac, projection_mean, quantize_gate, LayerParams, Sequence,
};

use super::model::{Grads, LatentLayer, TrainModel};
use super::phase::QatPhase;

/// Steepness of the logistic output relaxation.
pub const OUTPUT_GAIN: f64 = 4.0;

fn logistic(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Parameters as seen by the forward pass of one phase.
struct Effective {
    w_h: Vec<f64>,
    w_z: Vec<f64>,
    beta: Vec<f64>,
    theta: Vec<f64>,
    /// Deployed layer, present when weights are quantized.
    hard: Option<LayerParams>,
    c: f64,
    alpha: f64,
}

impl Effective {
    fn new(l: &LatentLayer, phase: QatPhase) -> Result<Self> {
        let c = {
            let rows = crate::gru::column_height(l.n_in);
            (rows / l.n_in) as f64 / rows as f64
        };
        if !phase.quantize_weights {
            return Ok(Self {
                w_h: l.w_h.clone(),
                w_z: l.w_z.clone(),
                beta: l.beta.clone(),
                theta: l.theta.clone(),
                hard: None,
                c,
                alpha: l.gate_scale,
            });
        }
        let hard = l.export()?;
        Ok(Self {
            w_h: hard.w_h.iter().map(|w| w.value() as f64).collect(),
            w_z: hard.w_z.iter().map(|w| w.value() as f64).collect(),
            beta: hard
                .b_z
                .iter()
                .map(|&b| crate::gru::gate_offset(b))
                .collect(),
            theta: (0..hard.n_out).map(|u| hard.threshold(u)).collect(),
            c,
            alpha: l.gate_scale,
            hard: Some(hard),
        })
    }
}

/// A model prepared for one phase; shared by every example of a batch.
pub struct Prepared<'a> {
    pub model: &'a TrainModel,
    pub phase: QatPhase,
    /// Multiplier applied to the final state before the softmax.
    pub logit_scale: f64,
    eff: Vec<Effective>,
}

impl<'a> Prepared<'a> {
    pub fn new(model: &'a TrainModel, phase: QatPhase, logit_scale: f64) -> Result<Self> {
        let eff = model
            .layers
            .iter()
            .map(|l| Effective::new(l, phase))
            .collect::<Result<_>>()?;
        Ok(Self {
            model,
            phase,
            logit_scale,
            eff,
        })
    }
}

/// Saved activations of one layer, step-major.
#[derive(Clone, Debug)]
struct LayerCache {
    u: Vec<f64>,
    h_tilde: Vec<f64>,
    /// Surrogate derivative of the gate with respect to its pre-activation.
    dgate: Vec<f64>,
    z: Vec<f64>,
    /// `steps + 1` rows; row 0 is the initial state.
    h: Vec<f64>,
    pre: Vec<f64>,
}

/// Everything the backward pass needs.
#[derive(Clone, Debug)]
pub struct Cache {
    layers: Vec<LayerCache>,
    steps: usize,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub label: usize,
    pub loss: f64,
}

impl Cache {
    pub fn predicted(&self) -> usize {
        crate::gru::argmax(&self.logits)
    }

    /// State of every unit of layer `l` after each step, step-major.
    pub fn states(&self, l: usize) -> &[f64] {
        let n = self.layers[l].h.len() / (self.steps + 1);
        &self.layers[l].h[n..]
    }
}

fn forward_layer(
    eff: &Effective,
    n_in: usize,
    n_out: usize,
    phase: QatPhase,
    u: Vec<f64>,
    binary_input: bool,
    steps: usize,
) -> Result<(LayerCache, Vec<f64>)> {
    let mut cache = LayerCache {
        u,
        h_tilde: Vec::with_capacity(steps * n_out),
        dgate: Vec::with_capacity(steps * n_out),
        z: Vec::with_capacity(steps * n_out),
        h: vec![0.0; n_out],
        pre: Vec::with_capacity(steps * n_out),
    };
    cache.h.reserve(steps * n_out);
    let mut y = Vec::with_capacity(steps * n_out);
    let integer = match &eff.hard {
        Some(hard) if binary_input => Some(hard),
        _ => None,
    };
    let mut bits = vec![false; n_in];
    for t in 0..steps {
        let x = &cache.u[t * n_in..(t + 1) * n_in];
        if integer.is_some() {
            for (b, &v) in bits.iter_mut().zip(x) {
                *b = v != 0.0;
            }
        }
        for j in 0..n_out {
            let (cand, a) = match integer {
                Some(hard) => {
                    let m_h = mac(hard.w_h_row(j), &bits)?;
                    let m_z = mac(hard.w_z_row(j), &bits)?;
                    (projection_mean(m_h, hard), gate_preactivation(m_z, hard, j))
                }
                None => {
                    let row = j * n_in..(j + 1) * n_in;
                    let dot = |w: &[f64]| w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
                    let m_h = dot(&eff.w_h[row.clone()]);
                    let m_z = dot(&eff.w_z[row]);
                    (eff.c * m_h, eff.alpha * (eff.c * m_z) + eff.beta[j])
                }
            };
            let (s, ds) = if phase.hard_sigmoid_gate {
                let d = if a > -3.0 && a < 3.0 { 1.0 / 6.0 } else { 0.0 };
                (hard_sigmoid(a), d)
            } else {
                let s = logistic(a);
                (s, s * (1.0 - s))
            };
            let z = if phase.quantize_gate {
                quantize_gate(s).z_eff()
            } else {
                s
            };
            let prev = cache.h[t * n_out + j];
            let h = z * cand + (1.0 - z) * prev;
            let theta = eff.theta[j];
            let out = if phase.binarize_output {
                (h >= theta) as u8 as f64
            } else {
                logistic(OUTPUT_GAIN * (h - theta))
            };
            cache.h_tilde.push(cand);
            cache.dgate.push(ds);
            cache.z.push(z);
            cache.h.push(h);
            cache.pre.push(h - theta);
            y.push(out);
        }
    }
    Ok((cache, y))
}

/// Runs one labelled sequence and returns its loss and saved activations.
pub fn forward_train(prep: &Prepared, input: &Sequence, label: usize) -> Result<Cache> {
    let model = prep.model;
    if input.is_empty() {
        return Err(Error::EmptySequence);
    }
    if input.width() != model.n_in() {
        return Err(Error::DimMismatch(format!(
            "sequence width {} does not match network input size {}",
            input.width(),
            model.n_in()
        )));
    }
    if label >= model.n_out() {
        return Err(Error::Dataset(format!(
            "label {label} out of range for {} classes",
            model.n_out()
        )));
    }
    let steps = input.steps();
    let mut u: Vec<f64> = input.bits().iter().map(|&b| b as u8 as f64).collect();
    let mut binary = true;
    let mut layers = Vec::with_capacity(model.layers.len());
    for (l, eff) in model.layers.iter().zip(&prep.eff) {
        let (cache, y) = forward_layer(eff, l.n_in, l.n_out, prep.phase, u, binary, steps)?;
        layers.push(cache);
        u = y;
        binary = prep.phase.binarize_output;
    }
    let last = layers.last().expect("non-empty");
    let n = model.n_out();
    let h_final = &last.h[steps * n..];
    let logits: Vec<f64> = h_final.iter().map(|h| prep.logit_scale * h).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    let loss = max + sum.ln() - logits[label];
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("loss {loss} (logits {logits:?})")));
    }
    Ok(Cache {
        layers,
        steps,
        logits,
        probs,
        label,
        loss,
    })
}

/// Gradients of the cached loss with respect to every latent parameter.
pub fn backward_train(prep: &Prepared, cache: &Cache) -> Grads {
    let model = prep.model;
    let phase = prep.phase;
    let steps = cache.steps;
    let mut grads = Grads::zeros_like(model);

    // dL/dy of the layer above; the last layer only feeds the loss
    let n_last = model.n_out();
    let mut dh_final: Vec<f64> = cache
        .probs
        .iter()
        .enumerate()
        .map(|(k, &p)| prep.logit_scale * (p - (k == cache.label) as u8 as f64))
        .collect();
    let mut dy: Option<Vec<f64>> = None;

    for li in (0..model.layers.len()).rev() {
        let l = &model.layers[li];
        let eff = &prep.eff[li];
        let c = &cache.layers[li];
        let (n_in, n_out) = (l.n_in, l.n_out);
        let [g_wh, g_wz, g_beta, g_theta] = grads.layer_mut(li);
        let mut du = if li > 0 {
            Some(vec![0.0; steps * n_in])
        } else {
            None
        };
        // dL/dh_t carried backwards through the recurrence
        let mut carry = if li + 1 == model.layers.len() {
            std::mem::take(&mut dh_final)
        } else {
            vec![0.0; n_out]
        };
        debug_assert!(li + 1 < model.layers.len() || carry.len() == n_last);

        for t in (0..steps).rev() {
            let x = &c.u[t * n_in..(t + 1) * n_in];
            for j in 0..n_out {
                let k = t * n_out + j;
                let mut g = carry[j];
                if let Some(dy) = &dy {
                    let dyk = dy[k];
                    let local = if phase.binarize_output {
                        if c.pre[k].abs() <= 1.0 {
                            dyk
                        } else {
                            0.0
                        }
                    } else {
                        let sg = logistic(OUTPUT_GAIN * c.pre[k]);
                        dyk * OUTPUT_GAIN * sg * (1.0 - sg)
                    };
                    g += local;
                    g_theta[j] -= local;
                }
                let z = c.z[k];
                let prev = c.h[t * n_out + j];
                let d_z = g * (c.h_tilde[k] - prev);
                let d_cand = g * z;
                carry[j] = g * (1.0 - z);
                let d_a = d_z * c.dgate[k];
                g_beta[j] += d_a;
                let d_mh = d_cand * eff.c;
                let d_mz = d_a * eff.alpha * eff.c;
                let row = j * n_in..(j + 1) * n_in;
                for (gw, &xi) in g_wh[row.clone()].iter_mut().zip(x) {
                    *gw += d_mh * xi;
                }
                for (gw, &xi) in g_wz[row.clone()].iter_mut().zip(x) {
                    *gw += d_mz * xi;
                }
                if let Some(du) = du.as_mut() {
                    let dut = &mut du[t * n_in..(t + 1) * n_in];
                    for ((d, &wh), &wz) in
                        dut.iter_mut().zip(&eff.w_h[row.clone()]).zip(&eff.w_z[row])
                    {
                        *d += d_mh * wh + d_mz * wz;
                    }
                }
            }
        }
        dy = du;
    }
    grads
}

/// Loss and gradients of one example.
pub fn loss_and_grads(prep: &Prepared, input: &Sequence, label: usize) -> Result<(Cache, Grads)> {
    let cache = forward_train(prep, input, label)?;
    let grads = backward_train(prep, &cache);
    Ok((cache, grads))
}
