// SPDX-License-Identifier: Apache-2.0

//! Latent (real-valued) parameters, their quantizers and export.

use rand::Rng;

use crate::circuit::CircuitParams;
use crate::error::{Error, Result};
use crate::gru::{
    gate_offset, BiasCode, LayerParams, Network, NetworkConfig, WeightCode, GATE_OFFSET_STEP,
    NEUTRAL_BIAS,
};

/// Largest weight magnitude.
pub const W_MAX: f64 = 3.0;

/// Gate offset grid endpoints, in hard-sigmoid input units.
pub fn beta_range() -> (f64, f64) {
    (
        gate_offset(BiasCode::new(0).expect("code 0")),
        gate_offset(BiasCode::new(BiasCode::MAX).expect("max code")),
    )
}

/// Bias code of the offset nearest to `beta`.
pub fn beta_code(beta: f64) -> BiasCode {
    BiasCode::saturating(NEUTRAL_BIAS as i64 + (beta / GATE_OFFSET_STEP).round() as i64)
}

/// Comparator code of the threshold nearest to `theta`.
pub fn theta_code(theta: f64, scale: f64) -> BiasCode {
    if scale == 0.0 {
        return BiasCode::NEUTRAL;
    }
    BiasCode::saturating(NEUTRAL_BIAS as i64 - (theta / scale).round() as i64)
}

/// Threshold endpoints for a given threshold step.
pub fn theta_range(scale: f64) -> (f64, f64) {
    (
        -((BiasCode::MAX - NEUTRAL_BIAS) as f64) * scale,
        NEUTRAL_BIAS as f64 * scale,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatentLayer {
    pub n_in: usize,
    pub n_out: usize,
    pub w_h: Vec<f64>,
    pub w_z: Vec<f64>,
    /// Gate offsets in hard-sigmoid input units.
    pub beta: Vec<f64>,
    /// Output thresholds in value units.
    pub theta: Vec<f64>,
    pub slope_segments: u32,
    pub gate_scale: f64,
    pub threshold_scale: f64,
}

impl LatentLayer {
    /// Quantized, deployable form of this layer.
    pub fn export(&self) -> Result<LayerParams> {
        let q = |w: &[f64]| w.iter().map(|&v| WeightCode::nearest(v)).collect();
        let mut l = LayerParams::new(
            self.n_in,
            self.n_out,
            q(&self.w_h),
            q(&self.w_z),
            self.gate_scale,
            self.threshold_scale,
        )?;
        l.slope_segments = self.slope_segments;
        l.b_z = self.beta.iter().map(|&b| beta_code(b)).collect();
        l.b_h = self
            .theta
            .iter()
            .map(|&t| theta_code(t, self.threshold_scale))
            .collect();
        Ok(l)
    }

    /// Latent parameters reproducing a deployed layer exactly.
    pub fn from_layer(l: &LayerParams) -> Self {
        Self {
            n_in: l.n_in,
            n_out: l.n_out,
            w_h: l.w_h.iter().map(|w| w.value() as f64).collect(),
            w_z: l.w_z.iter().map(|w| w.value() as f64).collect(),
            beta: l.b_z.iter().map(|&b| gate_offset(b)).collect(),
            theta: (0..l.n_out).map(|u| l.threshold(u)).collect(),
            slope_segments: l.slope_segments,
            gate_scale: l.gate_scale,
            threshold_scale: l.threshold_scale,
        }
    }

    fn clamp(&mut self) {
        for w in self.w_h.iter_mut().chain(self.w_z.iter_mut()) {
            *w = w.clamp(-W_MAX, W_MAX);
        }
        let (lo, hi) = beta_range();
        for b in &mut self.beta {
            *b = b.clamp(lo, hi);
        }
        let (lo, hi) = theta_range(self.threshold_scale);
        for t in &mut self.theta {
            *t = t.clamp(lo, hi);
        }
    }
}

/// Initial parameter distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitConfig {
    /// Latent weights are drawn uniformly from `[-weight_scale, weight_scale]`.
    pub weight_scale: f64,
    /// Initial gate offset of every unit.
    pub gate_bias: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            weight_scale: 1.5,
            gate_bias: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainModel {
    pub layers: Vec<LatentLayer>,
}

impl TrainModel {
    /// Random model whose gate and threshold scales match `circuit`.
    pub fn init<R: Rng>(
        config: &NetworkConfig,
        slope_segments: u32,
        circuit: &CircuitParams,
        init: &InitConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let gate_scale = circuit.gate_gain(slope_segments)?;
        let threshold_scale = circuit.threshold_scale();
        let mut layers = Vec::new();
        for (n_in, n_out) in config.layer_shapes() {
            let mut draw = |n: usize| -> Vec<f64> {
                (0..n)
                    .map(|_| init.weight_scale * (2.0 * rng.random::<f64>() - 1.0))
                    .collect()
            };
            let w_h = draw(n_in * n_out);
            let w_z = draw(n_in * n_out);
            let mut l = LatentLayer {
                n_in,
                n_out,
                w_h,
                w_z,
                beta: vec![init.gate_bias; n_out],
                theta: vec![0.0; n_out],
                slope_segments,
                gate_scale,
                threshold_scale,
            };
            l.clamp();
            if slope_segments as usize > crate::gru::column_height(n_in) {
                return Err(Error::Config(format!(
                    "slope_segments {slope_segments} exceeds column height of a {n_in}-input layer"
                )));
            }
            layers.push(l);
        }
        Ok(Self { layers })
    }

    pub fn from_network(net: &Network) -> Self {
        Self {
            layers: net.layers().iter().map(LatentLayer::from_layer).collect(),
        }
    }

    pub fn export(&self) -> Result<Network> {
        Network::new(
            self.layers
                .iter()
                .map(LatentLayer::export)
                .collect::<Result<_>>()?,
        )
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_out(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out
    }

    /// Parameter blocks in a fixed order: per layer `w_h, w_z, beta, theta`.
    pub fn blocks(&self) -> Vec<&Vec<f64>> {
        self.layers
            .iter()
            .flat_map(|l| [&l.w_h, &l.w_z, &l.beta, &l.theta])
            .collect()
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.w_h, &mut l.w_z, &mut l.beta, &mut l.theta])
            .collect()
    }

    /// Projects every parameter back onto its representable range.
    pub fn clamp(&mut self) {
        self.layers.iter_mut().for_each(LatentLayer::clamp);
    }
}

/// Gradients, laid out like [`TrainModel::blocks`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    pub blocks: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(model: &TrainModel) -> Self {
        Self {
            blocks: model.blocks().iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn add(&mut self, other: &Grads) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, f: f64) {
        self.blocks.iter_mut().flatten().for_each(|x| *x *= f);
    }

    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().flatten().all(|x| x.is_finite())
    }

    /// Gradient blocks of layer `l`: `(w_h, w_z, beta, theta)`.
    pub fn layer_mut(&mut self, l: usize) -> [&mut Vec<f64>; 4] {
        let [a, b, c, d] = &mut self.blocks[4 * l..4 * l + 4] else {
            unreachable!("four blocks per layer")
        };
        [a, b, c, d]
    }
}
