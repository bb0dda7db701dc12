// SPDX-License-Identifier: Apache-2.0

use crate::error::{Error, Result};

/// Number of gate levels produced by the 6-bit ADC.
pub const GATE_LEVELS: u32 = 64;
/// Bias code that leaves both the gate offset and the output threshold at zero.
pub const NEUTRAL_BIAS: u8 = 32;
/// Granularity of the capacitor banks; column heights are multiples of this.
pub const BANK_GRANULE: usize = 64;

/// 2-bit synapse weight. Codes 0..=3 select one of four equidistant
/// potentials around V0, i.e. the values -3, -1, +1, +3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WeightCode(u8);

impl WeightCode {
    pub const MAX: u8 = 3;

    pub fn new(code: u8) -> Result<Self> {
        if code > Self::MAX {
            return Err(Error::CodeOutOfRange {
                field: "weight",
                value: code as i64,
                max: Self::MAX as u32,
            });
        }
        Ok(Self(code))
    }

    pub const fn code(self) -> u8 {
        self.0
    }

    pub const fn value(self) -> i32 {
        2 * self.0 as i32 - 3
    }

    /// Nearest representable weight to a real value (ties toward the larger code).
    pub fn nearest(value: f64) -> Self {
        let code = ((value + 3.0) / 2.0).round().clamp(0.0, Self::MAX as f64);
        Self(code as u8)
    }
}

/// 6-bit bias. Used as the ADC offset for gates and as the comparator
/// reference for outputs; 32 is neutral.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BiasCode(u8);

impl BiasCode {
    pub const MAX: u8 = 63;
    pub const NEUTRAL: Self = Self(NEUTRAL_BIAS);

    pub fn new(code: u8) -> Result<Self> {
        if code > Self::MAX {
            return Err(Error::CodeOutOfRange {
                field: "bias",
                value: code as i64,
                max: Self::MAX as u32,
            });
        }
        Ok(Self(code))
    }

    pub const fn code(self) -> u8 {
        self.0
    }

    /// Signed distance from the neutral code.
    pub const fn offset(self) -> i32 {
        self.0 as i32 - NEUTRAL_BIAS as i32
    }

    pub fn saturating(code: i64) -> Self {
        Self(code.clamp(0, Self::MAX as i64) as u8)
    }
}

impl Default for BiasCode {
    fn default() -> Self {
        Self::NEUTRAL
    }
}

/// Digitised gate value; the effective mixing coefficient is `code / 64`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GateCode(u8);

impl GateCode {
    pub const MAX: u8 = 63;

    pub fn new(code: u8) -> Result<Self> {
        if code > Self::MAX {
            return Err(Error::CodeOutOfRange {
                field: "gate",
                value: code as i64,
                max: Self::MAX as u32,
            });
        }
        Ok(Self(code))
    }

    pub const fn code(self) -> u8 {
        self.0
    }

    pub fn z_eff(self) -> f64 {
        self.0 as f64 / GATE_LEVELS as f64
    }
}

/// Quantized parameters of one GRU block, laid out as it is mapped onto a core:
/// one column per unit, `rows()` rows of synapses.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub n_in: usize,
    pub n_out: usize,
    /// Candidate projection, row-major `n_out x n_in`.
    pub w_h: Vec<WeightCode>,
    /// Gate projection, row-major `n_out x n_in`.
    pub w_z: Vec<WeightCode>,
    /// Per-unit gate offset (ADC pre-set).
    pub b_z: Vec<BiasCode>,
    /// Per-unit output threshold (comparator reference).
    pub b_h: Vec<BiasCode>,
    /// Number of gate sampling capacitors left on the ADC node.
    pub slope_segments: u32,
    /// Gain from the projection mean to hard-sigmoid input units.
    pub gate_scale: f64,
    /// Threshold step per bias code, in value units.
    pub threshold_scale: f64,
    pub h_init: Vec<f64>,
}

impl LayerParams {
    /// Layer with all-neutral biases, zero initial state and the given weights.
    pub fn new(
        n_in: usize,
        n_out: usize,
        w_h: Vec<WeightCode>,
        w_z: Vec<WeightCode>,
        gate_scale: f64,
        threshold_scale: f64,
    ) -> Result<Self> {
        let layer = Self {
            n_in,
            n_out,
            w_h,
            w_z,
            b_z: vec![BiasCode::NEUTRAL; n_out],
            b_h: vec![BiasCode::NEUTRAL; n_out],
            slope_segments: 0,
            gate_scale,
            threshold_scale,
            h_init: vec![0.0; n_out],
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_in == 0 || self.n_out == 0 {
            return Err(Error::DimMismatch(format!(
                "layer sizes must be positive (got {}x{})",
                self.n_out, self.n_in
            )));
        }
        let cells = self.n_in * self.n_out;
        for (name, len, want) in [
            ("w_h", self.w_h.len(), cells),
            ("w_z", self.w_z.len(), cells),
            ("b_z", self.b_z.len(), self.n_out),
            ("b_h", self.b_h.len(), self.n_out),
            ("h_init", self.h_init.len(), self.n_out),
        ] {
            if len != want {
                return Err(Error::DimMismatch(format!(
                    "{name} has {len} entries, expected {want}"
                )));
            }
        }
        if !(self.gate_scale > 0.0 && self.gate_scale.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "gate_scale must be positive and finite (got {})",
                self.gate_scale
            )));
        }
        if !(self.threshold_scale >= 0.0 && self.threshold_scale.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "threshold_scale must be non-negative and finite (got {})",
                self.threshold_scale
            )));
        }
        if self.slope_segments as usize > self.rows() {
            return Err(Error::InvalidModel(format!(
                "slope_segments {} exceeds column height {}",
                self.slope_segments,
                self.rows()
            )));
        }
        if let Some(h) = self.h_init.iter().find(|h| !h.is_finite()) {
            return Err(Error::InvalidModel(format!("non-finite h_init {h}")));
        }
        Ok(())
    }

    /// Column height of the core this layer maps onto.
    pub fn rows(&self) -> usize {
        column_height(self.n_in)
    }

    /// How many rows each input drives.
    pub fn replication(&self) -> usize {
        self.rows() / self.n_in
    }

    pub fn w_h_row(&self, unit: usize) -> &[WeightCode] {
        &self.w_h[unit * self.n_in..(unit + 1) * self.n_in]
    }

    pub fn w_z_row(&self, unit: usize) -> &[WeightCode] {
        &self.w_z[unit * self.n_in..(unit + 1) * self.n_in]
    }

    /// Output threshold of `unit` in value units.
    pub fn threshold(&self, unit: usize) -> f64 {
        threshold(self.b_h[unit], self.threshold_scale)
    }
}

/// Rows of a core column holding `n_in` inputs.
pub fn column_height(n_in: usize) -> usize {
    n_in.div_ceil(BANK_GRANULE).max(1) * BANK_GRANULE
}

pub(crate) fn threshold(code: BiasCode, scale: f64) -> f64 {
    -(code.offset() as f64) * scale
}

/// Per-unit hidden state in the value domain.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenState(pub Vec<f64>);

impl HiddenState {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Readout {
    #[default]
    LastStepArgmax,
}

impl Readout {
    pub fn as_str(self) -> &'static str {
        match self {
            Readout::LastStepArgmax => "last-step-argmax",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "last-step-argmax" => Some(Readout::LastStepArgmax),
            _ => None,
        }
    }
}

/// A feed-forward stack of GRU blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<LayerParams>,
    readout: Readout,
}

impl Network {
    pub fn new(layers: Vec<LayerParams>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidModel(
                "network needs at least one layer".into(),
            ));
        }
        for layer in &layers {
            layer.validate()?;
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].n_out != pair[1].n_in {
                return Err(Error::DimMismatch(format!(
                    "layer {} has {} outputs but layer {} expects {} inputs",
                    i,
                    pair[0].n_out,
                    i + 1,
                    pair[1].n_in
                )));
            }
        }
        Ok(Self {
            layers,
            readout: Readout::LastStepArgmax,
        })
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    pub fn into_layers(self) -> Vec<LayerParams> {
        self.layers
    }

    pub fn readout(&self) -> Readout {
        self.readout
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_out(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out
    }

    pub fn config(&self) -> NetworkConfig {
        let mut sizes = vec![self.n_in()];
        sizes.extend(self.layers.iter().map(|l| l.n_out));
        NetworkConfig {
            layer_sizes: sizes,
            readout: self.readout,
        }
    }
}

/// Shape of a network, e.g. `1-64-64-64-64-10`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkConfig {
    pub layer_sizes: Vec<usize>,
    pub readout: Readout,
}

impl NetworkConfig {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(
                "need an input size and at least one GRU layer".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        Ok(Self {
            layer_sizes,
            readout: Readout::LastStepArgmax,
        })
    }

    /// `(n_in, n_out)` of every GRU layer.
    pub fn layer_shapes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.layer_sizes.windows(2).map(|w| (w[0], w[1]))
    }
}

impl std::fmt::Display for NetworkConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.layer_sizes.iter().map(|s| s.to_string()).collect();
        f.write_str(&parts.join("-"))
    }
}

impl std::str::FromStr for NetworkConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let sizes = s
            .split('-')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad layer size {p:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sizes)
    }
}

/// Binary input sequence, `steps x width`, stored step-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sequence {
    width: usize,
    bits: Vec<bool>,
}

impl Sequence {
    pub fn new(width: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || !bits.len().is_multiple_of(width) {
            return Err(Error::DimMismatch(format!(
                "{} bits do not form whole steps of width {}",
                bits.len(),
                width
            )));
        }
        Ok(Self { width, bits })
    }

    pub fn from_steps(steps: &[Vec<bool>]) -> Result<Self> {
        let width = steps.first().map_or(0, Vec::len);
        if steps.iter().any(|s| s.len() != width) {
            return Err(Error::DimMismatch("ragged input steps".into()));
        }
        Self::new(width, steps.concat())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn steps(&self) -> usize {
        self.bits.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn step(&self, t: usize) -> &[bool] {
        &self.bits[t * self.width..(t + 1) * self.width]
    }

    pub fn iter(&self) -> std::slice::Chunks<'_, bool> {
        self.bits.chunks(self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}
