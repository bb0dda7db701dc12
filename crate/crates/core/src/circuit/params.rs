// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gru::{BiasCode, LayerParams, WeightCode};

/// Rail and reference potentials of a core.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoltageParams {
    /// Zero-activation potential, midpoint of the four weight levels.
    pub v0: f64,
    /// Half the spacing between adjacent weight levels.
    pub v_lsb: f64,
    pub v_ref_lo: f64,
    pub v_ref_hi: f64,
}

impl Default for VoltageParams {
    fn default() -> Self {
        Self {
            v0: 0.5,
            v_lsb: 0.0625,
            v_ref_lo: 0.0,
            v_ref_hi: 1.0,
        }
    }
}

impl VoltageParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.v_lsb > 0.0
            && self.v_ref_lo < self.v0
            && self.v0 < self.v_ref_hi
            && [self.v0, self.v_lsb, self.v_ref_lo, self.v_ref_hi]
                .iter()
                .all(|v| v.is_finite());
        if !ok {
            return Err(Error::Config(format!(
                "voltages need v_lsb > 0 and v_ref_lo < v0 < v_ref_hi (got {self:?})"
            )));
        }
        Ok(())
    }

    pub fn span(&self) -> f64 {
        self.v_ref_hi - self.v_ref_lo
    }

    /// Potential selected by a stored weight when its row is active.
    pub fn weight_level(&self, w: WeightCode) -> f64 {
        self.v0 + w.value() as f64 * self.v_lsb
    }

    pub fn to_value(&self, volts: f64) -> f64 {
        (volts - self.v0) / self.v_lsb
    }

    pub fn from_value(&self, value: f64) -> f64 {
        self.v0 + value * self.v_lsb
    }
}

/// Physical parameters shared by every core.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircuitParams {
    pub volts: VoltageParams,
    /// Unit sampling capacitance in farads.
    pub unit_cap: f64,
    /// Total SAR DAC capacitance in units of `unit_cap`.
    pub dac_units: f64,
    /// Load on the comparator's reference input, in units of `unit_cap`.
    pub ref_load_units: f64,
    /// Input-referred comparator offset in volts.
    pub comparator_offset: f64,
}

impl Default for CircuitParams {
    fn default() -> Self {
        Self {
            volts: VoltageParams::default(),
            unit_cap: 2e-15,
            dac_units: 8.0,
            ref_load_units: 24.0,
            comparator_offset: 0.0,
        }
    }
}

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        self.volts.validate()?;
        if !(self.unit_cap > 0.0 && self.dac_units >= 0.0 && self.ref_load_units >= 0.0) {
            return Err(Error::Config(format!(
                "capacitances must be non-negative (unit_cap > 0): {self:?}"
            )));
        }
        if self.dac_units + self.ref_load_units <= 0.0 {
            return Err(Error::Config(
                "threshold DAC node has no capacitance".into(),
            ));
        }
        Ok(())
    }

    pub fn adc(&self, slope_segments: u32, offset: BiasCode) -> AdcConfig {
        AdcConfig {
            dac_units: self.dac_units,
            slope_segments,
            offset_code: offset,
            comparator_offset: self.comparator_offset,
        }
    }

    /// Gate gain a layer must carry to match this circuit at `slope_segments`.
    pub fn gate_gain(&self, slope_segments: u32) -> Result<f64> {
        super::adc::adc_gain(&self.adc(slope_segments, BiasCode::NEUTRAL), &self.volts)
    }

    /// Threshold step per bias code in value units.
    pub fn threshold_scale(&self) -> f64 {
        (self.dac_units * self.volts.span())
            / ((self.dac_units + self.ref_load_units) * 64.0 * self.volts.v_lsb)
    }

    /// Sets `gate_scale` and `threshold_scale` of `layer` from this circuit.
    pub fn calibrate(&self, layer: &mut LayerParams) -> Result<()> {
        layer.gate_scale = self.gate_gain(layer.slope_segments)?;
        layer.threshold_scale = self.threshold_scale();
        Ok(())
    }

    pub fn check_calibration(&self, layer: &LayerParams, index: usize) -> Result<()> {
        let gain = self.gate_gain(layer.slope_segments)?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        if !close(layer.gate_scale, gain) {
            return Err(Error::Calibration {
                layer: index,
                what: "gate_scale",
                model: layer.gate_scale,
                circuit: gain,
            });
        }
        let ts = self.threshold_scale();
        if !close(layer.threshold_scale, ts) {
            return Err(Error::Calibration {
                layer: index,
                what: "threshold_scale",
                model: layer.threshold_scale,
                circuit: ts,
            });
        }
        Ok(())
    }
}

/// One SAR conversion setup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdcConfig {
    /// Total DAC capacitance in unit capacitors.
    pub dac_units: f64,
    /// Sampling capacitors kept on the node during conversion.
    pub slope_segments: u32,
    /// DAC pattern pre-set during sampling.
    pub offset_code: BiasCode,
    pub comparator_offset: f64,
}

impl AdcConfig {
    pub const BITS: u32 = 6;
}
