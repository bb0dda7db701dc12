// SPDX-License-Identifier: Apache-2.0

//! Per-step, per-unit traces shared by both engines.
//!
//! `v_htilde` and `v_h` are in value units: the circuit engine reports
//! `(V - v0) / v_lsb`, so traces of the two engines compare directly.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub layer: usize,
    pub unit: usize,
    pub z_code: u8,
    #[serde(rename = "v_htilde")]
    pub h_tilde: f64,
    #[serde(rename = "v_h")]
    pub h: f64,
    #[serde(with = "bit")]
    pub out: bool,
}

mod bit {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*v as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(D::Error::custom(format!(
                "output bit must be 0 or 1, got {v}"
            ))),
        }
    }
}

pub fn write_traces<W: Write>(writer: W, records: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_traces_file(path: &Path, records: &[TraceRecord]) -> Result<()> {
    write_traces(std::fs::File::create(path)?, records)
}

pub fn read_traces<R: Read>(reader: R) -> Result<Vec<TraceRecord>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Into::into))
        .collect()
}

/// Disagreement between two traces of the same run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceDiff {
    pub records: usize,
    pub z_mismatches: usize,
    pub out_mismatches: usize,
    pub max_h_err: f64,
    pub max_h_tilde_err: f64,
    /// Index of the first record that differs beyond the tolerance.
    pub first: Option<usize>,
    pub length_mismatch: bool,
}

impl TraceDiff {
    pub fn within(&self, tol: f64) -> bool {
        !self.length_mismatch
            && self.z_mismatches == 0
            && self.out_mismatches == 0
            && self.max_h_err <= tol
            && self.max_h_tilde_err <= tol
    }
}

pub fn compare_traces(a: &[TraceRecord], b: &[TraceRecord], tol: f64) -> TraceDiff {
    let mut d = TraceDiff {
        records: a.len().min(b.len()),
        length_mismatch: a.len() != b.len(),
        ..TraceDiff::default()
    };
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let eh = (x.h - y.h).abs();
        let et = (x.h_tilde - y.h_tilde).abs();
        let key = (x.step, x.layer, x.unit) != (y.step, y.layer, y.unit);
        let z = x.z_code != y.z_code;
        let o = x.out != y.out;
        d.z_mismatches += z as usize;
        d.out_mismatches += o as usize;
        d.max_h_err = d.max_h_err.max(eh);
        d.max_h_tilde_err = d.max_h_tilde_err.max(et);
        if d.first.is_none() && (key || z || o || eh > tol || et > tol) {
            d.first = Some(i);
        }
        if key {
            d.length_mismatch = true;
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(step: usize, h: f64, out: bool) -> TraceRecord {
        TraceRecord {
            step,
            layer: 0,
            unit: 1,
            z_code: 17,
            h_tilde: -0.75,
            h,
            out,
        }
    }

    #[test]
    fn csv_round_trip() {
        let recs = vec![rec(0, 0.1, true), rec(1, -1.0 / 3.0, false)];
        let mut buf = Vec::new();
        write_traces(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("step,layer,unit,z_code,v_htilde,v_h,out\n"));
        assert_eq!(read_traces(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn bad_bit_rejected() {
        let text = "step,layer,unit,z_code,v_htilde,v_h,out\n0,0,0,1,0.5,0.5,2\n";
        assert!(read_traces(text.as_bytes()).is_err());
    }

    #[test]
    fn diff_reports_first_divergence() {
        let a = vec![rec(0, 1.0, true), rec(1, 2.0, true)];
        let mut b = a.clone();
        assert!(compare_traces(&a, &b, 0.0).within(0.0));
        b[1].h += 1e-9;
        let d = compare_traces(&a, &b, 1e-12);
        assert_eq!(d.first, Some(1));
        assert!(!d.within(1e-12));
        assert!(d.within(1e-8));
        b[0].out = false;
        assert_eq!(compare_traces(&a, &b, 1e-8).out_mismatches, 1);
        assert!(compare_traces(&a, &b[..1], 1.0).length_mismatch);
    }
}
