// SPDX-License-Identifier: Apache-2.0

//! Versioned JSON model files.
//!
//! Files are written in one canonical layout (fixed key order, one weight row
//! per line, shortest round-trip float formatting) so that saving a loaded
//! model reproduces the file byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::gru::{BiasCode, LayerParams, Network, Readout, WeightCode};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    format_version: i64,
    layer_sizes: Vec<i64>,
    readout: String,
    layers: Vec<RawLayer>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdc {
    slope_segments: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    n_in: i64,
    n_out: i64,
    gate_scale: f64,
    threshold_scale: f64,
    adc: RawAdc,
    b_z: Vec<i64>,
    b_h: Vec<i64>,
    h_init: Vec<f64>,
    w_h: Vec<Vec<i64>>,
    w_z: Vec<Vec<i64>>,
}

fn size(field: &str, v: i64) -> Result<usize> {
    usize::try_from(v)
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidModel(format!("{field} must be a positive integer, got {v}")))
}

fn code(field: &'static str, v: i64, max: u8) -> Result<u8> {
    if (0..=max as i64).contains(&v) {
        Ok(v as u8)
    } else {
        Err(Error::CodeOutOfRange {
            field,
            value: v,
            max: max as u32,
        })
    }
}

fn weights(
    field: &'static str,
    rows: &[Vec<i64>],
    n_in: usize,
    n_out: usize,
) -> Result<Vec<WeightCode>> {
    if rows.len() != n_out || rows.iter().any(|r| r.len() != n_in) {
        return Err(Error::DimMismatch(format!(
            "{field} must be {n_out} rows of {n_in} codes"
        )));
    }
    rows.iter()
        .flatten()
        .map(|&v| WeightCode::new(code(field, v, WeightCode::MAX)?))
        .collect()
}

fn biases(field: &'static str, codes: &[i64], n_out: usize) -> Result<Vec<BiasCode>> {
    if codes.len() != n_out {
        return Err(Error::DimMismatch(format!(
            "{field} has {} codes for {n_out} units",
            codes.len()
        )));
    }
    codes
        .iter()
        .map(|&v| BiasCode::new(code(field, v, BiasCode::MAX)?))
        .collect()
}

impl RawLayer {
    fn into_layer(self) -> Result<LayerParams> {
        let n_in = size("n_in", self.n_in)?;
        let n_out = size("n_out", self.n_out)?;
        let slope = u32::try_from(self.adc.slope_segments).map_err(|_| {
            Error::InvalidModel(format!(
                "slope_segments must be non-negative, got {}",
                self.adc.slope_segments
            ))
        })?;
        let layer = LayerParams {
            n_in,
            n_out,
            w_h: weights("w_h", &self.w_h, n_in, n_out)?,
            w_z: weights("w_z", &self.w_z, n_in, n_out)?,
            b_z: biases("b_z", &self.b_z, n_out)?,
            b_h: biases("b_h", &self.b_h, n_out)?,
            slope_segments: slope,
            gate_scale: self.gate_scale,
            threshold_scale: self.threshold_scale,
            h_init: self.h_init,
        };
        layer.validate()?;
        Ok(layer)
    }
}

/// Parses a model from JSON text.
pub fn model_from_json(text: &str) -> Result<Network> {
    let value: Value = serde_json::from_str(text)?;
    let version = value
        .get("format_version")
        .and_then(Value::as_i64)
        .ok_or_else(|| Error::InvalidModel("missing integer format_version".into()))?;
    if version != FORMAT_VERSION as i64 {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let raw: RawModel = serde_json::from_value(value)?;
    debug_assert_eq!(raw.format_version, FORMAT_VERSION as i64);
    if Readout::parse(&raw.readout).is_none() {
        return Err(Error::InvalidModel(format!(
            "unknown readout {:?}",
            raw.readout
        )));
    }
    let sizes = raw
        .layer_sizes
        .iter()
        .map(|&s| size("layer_sizes entry", s))
        .collect::<Result<Vec<_>>>()?;
    if sizes.len() != raw.layers.len() + 1 {
        return Err(Error::DimMismatch(format!(
            "layer_sizes lists {} sizes for {} layers",
            sizes.len(),
            raw.layers.len()
        )));
    }
    let layers = raw
        .layers
        .into_iter()
        .map(RawLayer::into_layer)
        .collect::<Result<Vec<_>>>()?;
    for (i, l) in layers.iter().enumerate() {
        if (l.n_in, l.n_out) != (sizes[i], sizes[i + 1]) {
            return Err(Error::DimMismatch(format!(
                "layer {i} is {}x{} but layer_sizes says {}x{}",
                l.n_out,
                l.n_in,
                sizes[i + 1],
                sizes[i]
            )));
        }
    }
    Network::new(layers)
}

fn float(v: f64) -> String {
    serde_json::to_string(&v).expect("finite float")
}

fn list<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    let parts: Vec<String> = items.into_iter().map(|t| t.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

fn matrix(out: &mut String, name: &str, w: &[WeightCode], n_in: usize, last: bool) {
    let _ = writeln!(out, "      \"{name}\": [");
    let rows: Vec<String> = w
        .chunks(n_in)
        .map(|r| format!("        {}", list(r.iter().map(|c| c.code()))))
        .collect();
    let _ = writeln!(out, "{}", rows.join(",\n"));
    let _ = writeln!(out, "      ]{}", if last { "" } else { "," });
}

/// Canonical JSON text of a model.
pub fn model_to_json(net: &Network) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"format_version\": {FORMAT_VERSION},");
    let _ = writeln!(
        out,
        "  \"layer_sizes\": {},",
        list(net.config().layer_sizes)
    );
    let _ = writeln!(out, "  \"readout\": \"{}\",", net.readout().as_str());
    out.push_str("  \"layers\": [\n");
    let n = net.layers().len();
    for (i, l) in net.layers().iter().enumerate() {
        out.push_str("    {\n");
        let _ = writeln!(out, "      \"n_in\": {},", l.n_in);
        let _ = writeln!(out, "      \"n_out\": {},", l.n_out);
        let _ = writeln!(out, "      \"gate_scale\": {},", float(l.gate_scale));
        let _ = writeln!(
            out,
            "      \"threshold_scale\": {},",
            float(l.threshold_scale)
        );
        let _ = writeln!(
            out,
            "      \"adc\": {{\"slope_segments\": {}}},",
            l.slope_segments
        );
        let _ = writeln!(
            out,
            "      \"b_z\": {},",
            list(l.b_z.iter().map(|b| b.code()))
        );
        let _ = writeln!(
            out,
            "      \"b_h\": {},",
            list(l.b_h.iter().map(|b| b.code()))
        );
        let _ = writeln!(
            out,
            "      \"h_init\": {},",
            list(l.h_init.iter().map(|&h| float(h)))
        );
        matrix(&mut out, "w_h", &l.w_h, l.n_in, false);
        matrix(&mut out, "w_z", &l.w_z, l.n_in, true);
        let _ = writeln!(out, "    }}{}", if i + 1 < n { "," } else { "" });
    }
    out.push_str("  ]\n}\n");
    out
}

pub fn load_model(path: &Path) -> Result<Network> {
    model_from_json(&std::fs::read_to_string(path)?)
}

pub fn save_model(path: &Path, net: &Network) -> Result<()> {
    std::fs::write(path, model_to_json(net))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Network {
        let w = |c: &[u8]| c.iter().map(|&c| WeightCode::new(c).unwrap()).collect();
        let mut l = LayerParams::new(2, 1, w(&[0, 3]), w(&[1, 2]), 0.375, 0.0625).unwrap();
        l.h_init = vec![-0.1];
        l.b_z = vec![BiasCode::new(7).unwrap()];
        Network::new(vec![l]).unwrap()
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let text = model_to_json(&tiny());
        let back = model_from_json(&text).unwrap();
        assert_eq!(back, tiny());
        assert_eq!(model_to_json(&back), text);
    }

    #[test]
    fn rejects_bad_files() {
        let text = model_to_json(&tiny());
        assert!(matches!(
            model_from_json(&text.replace("\"format_version\": 1", "\"format_version\": 2")),
            Err(Error::UnsupportedVersion { found: 2, .. })
        ));
        assert!(matches!(
            model_from_json(&text.replace("[0, 3]", "[0, 4]")),
            Err(Error::CodeOutOfRange {
                field: "w_h",
                value: 4,
                ..
            })
        ));
        assert!(matches!(
            model_from_json(&text.replace("\"b_h\": [32]", "\"b_h\": [64]")),
            Err(Error::CodeOutOfRange { field: "b_h", .. })
        ));
        assert!(matches!(
            model_from_json(&text.replace("[0, 3]", "[0, 3, 1]")),
            Err(Error::DimMismatch(_))
        ));
        assert!(matches!(
            model_from_json(&text.replace("[2, 1]", "[3, 1]")),
            Err(Error::DimMismatch(_))
        ));
        assert!(model_from_json(&text.replace("last-step-argmax", "mean")).is_err());
        assert!(model_from_json("{}").is_err());
    }
}
