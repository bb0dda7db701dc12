// SPDX-License-Identifier: Apache-2.0

//! 6-bit SAR conversion of a sampled gate voltage.
//!
//! During sampling the top plates of the signal capacitors and of the DAC sit
//! at the input while the DAC bottom plates hold the offset pattern. Each
//! trial then drives the bottom plates with the inverted trial pattern, so
//! raising the trial code pulls the node down by one DAC step per code, and a
//! bit is kept when the node stays at or above `v0`. The DAC is 63 binary
//! weighted units plus one dummy unit that stays on the high reference.

use super::params::{AdcConfig, VoltageParams};
use crate::error::{Error, Result};
use crate::gru::GateCode;

const LEVELS: u32 = 1 << AdcConfig::BITS;

fn check(adc: &AdcConfig, signal_units: f64) -> Result<f64> {
    let c_tot = signal_units + adc.dac_units;
    if !(adc.dac_units > 0.0 && c_tot > 0.0 && c_tot.is_finite()) {
        return Err(Error::DegenerateAdc);
    }
    Ok(c_tot)
}

/// Sum over DAC bits of `unit * 2^b * bottom(pattern, b)` plus the dummy.
fn dac_bottom_charge(pattern: u32, unit: f64, volts: &VoltageParams) -> f64 {
    let mut q = unit * volts.v_ref_hi;
    for b in 0..AdcConfig::BITS {
        let bottom = if pattern >> b & 1 == 1 {
            volts.v_ref_lo
        } else {
            volts.v_ref_hi
        };
        q += unit * (1u32 << b) as f64 * bottom;
    }
    q
}

/// Converts `v_in` sampled on `signal_units` unit capacitors.
///
/// Decisions are taken on the sign of the node's charge excess over
/// `v0 + comparator_offset`, which is what the comparator resolves.
pub fn sar_convert(
    v_in: f64,
    signal_units: f64,
    adc: &AdcConfig,
    volts: &VoltageParams,
) -> Result<GateCode> {
    let c_tot = check(adc, signal_units)?;
    let unit = adc.dac_units / LEVELS as f64;
    let offset = adc.offset_code.code() as u32;
    // node charge referenced to the bottom plates at the end of sampling
    let q_sample = c_tot * v_in - dac_bottom_charge(offset, unit, volts);
    let reference = c_tot * (volts.v0 + adc.comparator_offset);
    let mut code = 0u32;
    for bit in (0..AdcConfig::BITS).rev() {
        let trial = code | 1 << bit;
        let excess = (q_sample + dac_bottom_charge(trial, unit, volts)) - reference;
        if excess >= 0.0 {
            code = trial;
        }
    }
    Ok(GateCode::new(code as u8).expect("6-bit code"))
}

/// Input span mapped onto the 64 codes: `(C_dac / C_tot) * (V_hi - V_lo)`.
pub fn full_scale(adc: &AdcConfig, signal_units: f64, volts: &VoltageParams) -> Result<f64> {
    let c_tot = check(adc, signal_units)?;
    Ok(adc.dac_units / c_tot * volts.span())
}

/// Gain from the mean projection (value units) to the hard-sigmoid input so
/// that the conversion equals `floor(64 * hard_sigmoid(gain * h + offset))`.
pub fn adc_gain(adc: &AdcConfig, volts: &VoltageParams) -> Result<f64> {
    let c_tot = check(adc, adc.slope_segments as f64)?;
    Ok(6.0 * volts.v_lsb * c_tot / (adc.dac_units * volts.span()))
}

/// Closed-form transfer `clamp(floor((v_in - v0 - v_os) / lsb + offset), 0, 63)`.
pub fn sar_ideal_code(
    v_in: f64,
    signal_units: f64,
    adc: &AdcConfig,
    volts: &VoltageParams,
) -> Result<GateCode> {
    let lsb = full_scale(adc, signal_units, volts)? / LEVELS as f64;
    let x = (v_in - volts.v0 - adc.comparator_offset) / lsb + adc.offset_code.code() as f64;
    let code = x.floor().clamp(0.0, (LEVELS - 1) as f64);
    Ok(GateCode::new(code as u8).expect("clamped"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitParams;
    use crate::gru::BiasCode;

    fn adc(s: u32, o: u8) -> (AdcConfig, VoltageParams) {
        let c = CircuitParams::default();
        (c.adc(s, BiasCode::new(o).unwrap()), c.volts)
    }

    #[test]
    fn mid_scale_and_rails() {
        let (a, v) = adc(0, 32);
        assert_eq!(sar_convert(0.5, 0.0, &a, &v).unwrap().code(), 32);
        assert_eq!(sar_convert(0.0, 0.0, &a, &v).unwrap().code(), 0);
        assert_eq!(sar_convert(1.0, 0.0, &a, &v).unwrap().code(), 63);
        // one LSB is 1/64 V without signal capacitors
        assert_eq!(
            sar_convert(0.5 + 1.0 / 64.0, 0.0, &a, &v).unwrap().code(),
            33
        );
        assert_eq!(
            sar_convert(0.5 + 1.0 / 64.0 - 1e-9, 0.0, &a, &v)
                .unwrap()
                .code(),
            32
        );
    }

    #[test]
    fn slope_capacitors_shrink_full_scale() {
        let (a, v) = adc(8, 32);
        assert_eq!(full_scale(&a, 8.0, &v).unwrap(), 0.5);
        assert_eq!(
            sar_convert(0.5 + 1.0 / 128.0, 8.0, &a, &v).unwrap().code(),
            33
        );
        assert_eq!(adc_gain(&a, &v).unwrap(), 0.75);
    }

    #[test]
    fn degenerate_dac() {
        let v = VoltageParams::default();
        let a = AdcConfig {
            dac_units: 0.0,
            slope_segments: 0,
            offset_code: BiasCode::NEUTRAL,
            comparator_offset: 0.0,
        };
        assert!(matches!(
            sar_convert(0.5, 0.0, &a, &v),
            Err(Error::DegenerateAdc)
        ));
        assert!(adc_gain(&a, &v).is_err());
    }

    #[test]
    fn staircase_matches_closed_form() {
        for s in [0u32, 1, 8, 24] {
            for o in [0u8, 5, 32, 63] {
                let (a, v) = adc(s, o);
                let lsb = full_scale(&a, s as f64, &v).unwrap() / 64.0;
                for i in 0..1024 {
                    let vin = i as f64 / 1023.0;
                    let got = sar_convert(vin, s as f64, &a, &v).unwrap().code() as i32;
                    let want = sar_ideal_code(vin, s as f64, &a, &v).unwrap().code() as i32;
                    // an input exactly on a code edge may round to either side
                    let x = (vin - v.v0) / lsb + o as f64;
                    let on_edge = (x - x.round()).abs() < 1e-9;
                    assert!(
                        got == want || (on_edge && (got - want).abs() == 1),
                        "s {s} o {o} vin {vin}: {got} vs {want}"
                    );
                }
            }
        }
    }
}
