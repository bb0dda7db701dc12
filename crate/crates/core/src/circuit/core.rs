// SPDX-License-Identifier: Apache-2.0

//! One recurrent core: a column of capacitors per hidden unit.
//!
//! Every row of a column owns three capacitors. Two of them (A and B) take
//! turns holding the state `h` and the candidate `h_tilde`; the third samples
//! the gate projection. Updating the state moves `k * R / 64` rows' candidate
//! capacitors into the state bank and shares it, which realises
//! `h = z * h_tilde + (1 - z) * h_prev` with `z = k / 64`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::adc::sar_convert;
use super::bank::{share_indices, Capacitor, ChargeMonitor};
use super::params::{CircuitParams, VoltageParams};
use crate::error::{Error, Result};
use crate::gru::{GateCode, LayerParams, WeightCode, BANK_GRANULE};
use crate::io::trace::TraceRecord;

/// Which quantity a row's A capacitor currently holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    State,
    Candidate,
}

/// Per-step energy-relevant events of one core, summed over columns.
///
/// Charge terms are in unit-capacitor square volts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventLog {
    /// `sum rel * (V_target - V_old)^2` over precharged capacitors.
    pub precharge: f64,
    /// Sharing losses of the gate and candidate banks.
    pub share: f64,
    /// Sharing losses of the state bank after a swap.
    pub swap_share: f64,
    /// Switch transitions.
    pub toggles: u64,
    /// Rows whose roles were exchanged.
    pub swapped_rows: u64,
    pub columns: usize,
    pub rows: usize,
}

impl EventLog {
    pub fn add(&mut self, other: &EventLog) {
        self.precharge += other.precharge;
        self.share += other.share;
        self.swap_share += other.swap_share;
        self.toggles += other.toggles;
        self.swapped_rows += other.swapped_rows;
        self.columns += other.columns;
        self.rows = self.rows.max(other.rows);
    }
}

/// Switch transitions of one row per in-memory MAC (row select on and off,
/// precharge on and off).
pub const TOGGLES_PER_MAC_ROW: u64 = 4;
/// Switch transitions per swapped row.
pub const TOGGLES_PER_SWAP_ROW: u64 = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    /// `[A; R] ++ [B; R] ++ [Z; R]`.
    pub caps: Vec<Capacitor>,
    /// `true` where the A capacitor holds the state.
    pub state_in_a: Vec<bool>,
}

impl Column {
    fn rows(&self) -> usize {
        self.state_in_a.len()
    }

    fn state_index(&self, row: usize) -> usize {
        if self.state_in_a[row] {
            row
        } else {
            self.rows() + row
        }
    }

    fn candidate_index(&self, row: usize) -> usize {
        if self.state_in_a[row] {
            self.rows() + row
        } else {
            row
        }
    }

    fn gate_index(&self, row: usize) -> usize {
        2 * self.rows() + row
    }

    pub fn state_indices(&self) -> Vec<usize> {
        (0..self.rows()).map(|r| self.state_index(r)).collect()
    }

    pub fn candidate_indices(&self) -> Vec<usize> {
        (0..self.rows()).map(|r| self.candidate_index(r)).collect()
    }

    pub fn gate_indices(&self) -> Vec<usize> {
        (0..self.rows()).map(|r| self.gate_index(r)).collect()
    }

    pub fn roles(&self) -> Vec<Role> {
        self.state_in_a
            .iter()
            .map(|&a| if a { Role::State } else { Role::Candidate })
            .collect()
    }

    pub fn state_volts(&self) -> f64 {
        self.caps[self.state_index(0)].volts
    }
}

/// Drives `caps[i]` to `V(w_i)` where `x_i` is set and to `v0` elsewhere,
/// then shares the group. Returns the shared potential.
pub fn precharge_and_share(
    x: &[bool],
    w: &[WeightCode],
    caps: &mut [Capacitor],
    volts: &VoltageParams,
) -> Result<f64> {
    if x.len() != caps.len() || w.len() != caps.len() {
        return Err(Error::DimMismatch(format!(
            "{} inputs, {} weights, {} capacitors",
            x.len(),
            w.len(),
            caps.len()
        )));
    }
    for ((c, &on), &w) in caps.iter_mut().zip(x).zip(w) {
        c.volts = if on { volts.weight_level(w) } else { volts.v0 };
    }
    let idx: Vec<usize> = (0..caps.len()).collect();
    Ok(share_indices(caps, &idx, &mut ChargeMonitor::default(), "precharge")?.volts)
}

/// Moves `k * R / 64` candidate capacitors (lowest rows first) into the state
/// bank, hands the displaced state capacitors the candidate role and shares
/// the new state bank. Returns the state potential and the sharing loss.
pub fn swap_and_share(
    column: &mut Column,
    k: GateCode,
    monitor: &mut ChargeMonitor,
) -> Result<(f64, f64)> {
    let rows = column.rows();
    let n = k.code() as usize * rows / BANK_GRANULE;
    if n > rows {
        return Err(Error::SwapOverflow {
            k: k.code() as usize,
            n: rows,
        });
    }
    for r in 0..n {
        column.state_in_a[r] = !column.state_in_a[r];
    }
    let idx = column.state_indices();
    let s = share_indices(&mut column.caps, &idx, monitor, "swap")?;
    Ok((s.volts, s.loss))
}

/// Output comparator: the state potential against the threshold DAC.
///
/// The threshold node is reset to `v0` with the DAC at mid code and a load
/// capacitor to ground, then the DAC is switched to `b_h`.
pub fn comparator_output(v_h: f64, b_h: u8, circuit: &CircuitParams) -> bool {
    let v = &circuit.volts;
    let unit = circuit.dac_units / BANK_GRANULE as f64;
    let node = circuit.dac_units + circuit.ref_load_units;
    let shift = unit * v.span() * (b_h as f64 - 32.0);
    let v_th = (node * v.v0 - shift) / node;
    v_h - v_th >= circuit.comparator_offset
}

/// Capacitor mismatch: every array capacitor is `1 + sigma * N(0, 1)` units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mismatch {
    pub sigma: f64,
    pub seed: u64,
}

/// Charge-domain state of one layer.
#[derive(Clone, Debug)]
pub struct CoreState {
    pub layer: LayerParams,
    pub circuit: CircuitParams,
    pub columns: Vec<Column>,
    pub monitor: ChargeMonitor,
    /// Events of the most recent step.
    pub log: EventLog,
    rows: usize,
}

impl CoreState {
    /// Builds a calibrated core with nominal capacitors.
    pub fn new(layer: LayerParams, circuit: CircuitParams, index: usize) -> Result<Self> {
        Self::build(layer, circuit, index, |_| 1.0)
    }

    /// Builds a core whose array capacitors carry Gaussian mismatch drawn from `rng`.
    pub fn with_mismatch<R: Rng>(
        layer: LayerParams,
        circuit: CircuitParams,
        index: usize,
        sigma: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!(
                "mismatch sigma {sigma} must be >= 0"
            )));
        }
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut draws = |_| {
            // a negative capacitor is unphysical; keep a small floor
            (1.0 + sigma * normal.sample(&mut *rng)).max(1e-3)
        };
        Self::build(layer, circuit, index, &mut draws)
    }

    fn build(
        layer: LayerParams,
        circuit: CircuitParams,
        index: usize,
        mut rel: impl FnMut(usize) -> f64,
    ) -> Result<Self> {
        circuit.validate()?;
        layer.validate()?;
        circuit.check_calibration(&layer, index)?;
        let rows = layer.rows();
        if layer.slope_segments as usize > rows {
            return Err(Error::Config(format!(
                "slope_segments {} exceeds column height {rows}",
                layer.slope_segments
            )));
        }
        let columns = (0..layer.n_out)
            .map(|_| Column {
                caps: (0..3 * rows)
                    .map(|i| Capacitor::new(rel(i), circuit.volts.v0))
                    .collect(),
                state_in_a: vec![true; rows],
            })
            .collect();
        let mut core = Self {
            layer,
            circuit,
            columns,
            monitor: ChargeMonitor::default(),
            log: EventLog::default(),
            rows,
        };
        core.reset();
        Ok(core)
    }

    /// Restores the initial state and roles, keeping capacitor values.
    pub fn reset(&mut self) {
        let v = self.circuit.volts;
        for (unit, col) in self.columns.iter_mut().enumerate() {
            col.state_in_a.iter_mut().for_each(|a| *a = true);
            let h0 = v.from_value(self.layer.h_init[unit]);
            for (i, c) in col.caps.iter_mut().enumerate() {
                c.volts = if i < self.rows { h0 } else { v.v0 };
            }
        }
        self.log = EventLog::default();
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// State potentials in value units.
    pub fn state_values(&self) -> Vec<f64> {
        self.columns
            .iter()
            .map(|c| self.circuit.volts.to_value(c.state_volts()))
            .collect()
    }

    /// Input bit driving `row`, or `None` for idle rows.
    fn row_input(&self, row: usize) -> Option<usize> {
        let r = self.layer.replication();
        let i = row / r;
        (i < self.layer.n_in).then_some(i)
    }

    /// One recurrent step: both in-memory MACs, gate conversion, swap and
    /// threshold comparison in every column.
    pub fn step(&mut self, x: &[bool], step: usize, layer_index: usize) -> Result<StepResult> {
        if x.len() != self.layer.n_in {
            return Err(Error::DimMismatch(format!(
                "input has {} entries, layer expects {}",
                x.len(),
                self.layer.n_in
            )));
        }
        let rows = self.rows;
        let v = self.circuit.volts;
        let drive: Vec<Option<usize>> = (0..rows).map(|r| self.row_input(r)).collect();
        let mut log = EventLog {
            columns: self.columns.len(),
            rows,
            ..EventLog::default()
        };
        let mut out = Vec::with_capacity(self.columns.len());
        let mut traces = Vec::with_capacity(self.columns.len());

        for unit in 0..self.columns.len() {
            let w_z = self.layer.w_z_row(unit).to_vec();
            let w_h = self.layer.w_h_row(unit).to_vec();
            let col = &mut self.columns[unit];
            let target = |row: usize, w: &[WeightCode]| match drive[row] {
                Some(i) if x[i] => v.weight_level(w[i]),
                _ => v.v0,
            };

            // gate projection
            let gate_idx = col.gate_indices();
            for (row, &ci) in gate_idx.iter().enumerate() {
                let c = &mut col.caps[ci];
                let t = target(row, &w_z);
                log.precharge += c.rel * (t - c.volts).powi(2);
                c.volts = t;
            }
            let s = share_indices(&mut col.caps, &gate_idx, &mut self.monitor, "gate share")?;
            log.share += s.loss;
            let slope = self.layer.slope_segments as usize;
            let signal_units: f64 = gate_idx[..slope].iter().map(|&i| col.caps[i].rel).sum();
            let adc = self
                .circuit
                .adc(self.layer.slope_segments, self.layer.b_z[unit]);
            let k = sar_convert(s.volts, signal_units, &adc, &v)?;

            // candidate projection
            let cand_idx = col.candidate_indices();
            for (row, &ci) in cand_idx.iter().enumerate() {
                let c = &mut col.caps[ci];
                let t = target(row, &w_h);
                log.precharge += c.rel * (t - c.volts).powi(2);
                c.volts = t;
            }
            let s = share_indices(
                &mut col.caps,
                &cand_idx,
                &mut self.monitor,
                "candidate share",
            )?;
            log.share += s.loss;
            let v_cand = s.volts;

            let n_swap = k.code() as u64 * rows as u64 / BANK_GRANULE as u64;
            let (v_h, loss) = swap_and_share(col, k, &mut self.monitor)?;
            log.swap_share += loss;
            log.swapped_rows += n_swap;
            log.toggles += 2 * TOGGLES_PER_MAC_ROW * rows as u64 + TOGGLES_PER_SWAP_ROW * n_swap;

            let fire = comparator_output(v_h, self.layer.b_h[unit].code(), &self.circuit);
            out.push(fire);
            traces.push(TraceRecord {
                step,
                layer: layer_index,
                unit,
                z_code: k.code(),
                h_tilde: v.to_value(v_cand),
                h: v.to_value(v_h),
                out: fire,
            });
        }
        self.log = log;
        Ok(StepResult { out, traces })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub out: Vec<bool>,
    pub traces: Vec<TraceRecord>,
}

/// Functional form of [`CoreState::step`].
pub fn core_step(x: &[bool], state: &mut CoreState) -> Result<StepResult> {
    state.step(x, 0, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gru::{gru_step, BiasCode, HiddenState};

    fn codes(c: &[u8]) -> Vec<WeightCode> {
        c.iter().map(|&c| WeightCode::new(c).unwrap()).collect()
    }

    fn calibrated(n_in: usize, n_out: usize, w_h: &[u8], w_z: &[u8], s: u32) -> LayerParams {
        let mut l = LayerParams::new(n_in, n_out, codes(w_h), codes(w_z), 1.0, 1.0).unwrap();
        l.slope_segments = s;
        CircuitParams::default().calibrate(&mut l).unwrap();
        l
    }

    #[test]
    fn precharge_mean() {
        let v = VoltageParams::default();
        let mut caps = vec![Capacitor::new(1.0, 0.0); 4];
        let got = precharge_and_share(
            &[true, true, false, true],
            &codes(&[3, 0, 3, 2]),
            &mut caps,
            &v,
        )
        .unwrap();
        // (3 - 3 + 0 + 1) / 4 levels above v0
        assert_eq!(v.to_value(got), 0.25);
        assert!(precharge_and_share(&[true], &codes(&[1, 2]), &mut caps, &v).is_err());
    }

    #[test]
    fn role_swap_hand_trace() {
        // 64 rows; gate code 16 swaps rows 0..16
        let l = calibrated(1, 1, &[3], &[3], 0);
        let mut core = CoreState::new(l, CircuitParams::default(), 0).unwrap();
        let col = &mut core.columns[0];
        let v = VoltageParams::default();
        for i in col.candidate_indices() {
            col.caps[i].volts = v.from_value(2.0);
        }
        let mut mon = ChargeMonitor::enabled();
        let (vh, _) = swap_and_share(col, GateCode::new(16).unwrap(), &mut mon).unwrap();
        assert_eq!(v.to_value(vh), 0.5);
        let roles = col.roles();
        assert!(roles[..16].iter().all(|&r| r == Role::Candidate));
        assert!(roles[16..].iter().all(|&r| r == Role::State));
        // the displaced state capacitors now hold the candidate role at h_prev
        assert_eq!(col.caps[0].volts, v.from_value(0.0));
        assert_eq!(col.caps[64].volts, v.from_value(0.5));
        assert_eq!(col.caps[64 + 16].volts, v.from_value(2.0));
        let (vh, _) = swap_and_share(col, GateCode::new(0).unwrap(), &mut mon).unwrap();
        assert_eq!(v.to_value(vh), 0.5);
    }

    #[test]
    fn comparator_thresholds() {
        let c = CircuitParams::default();
        let v = c.volts;
        for b in [0u8, 20, 32, 45, 63] {
            let theta = -(b as f64 - 32.0) / 16.0;
            assert!(comparator_output(v.from_value(theta), b, &c));
            assert!(!comparator_output(v.from_value(theta - 1e-9), b, &c));
        }
    }

    #[test]
    fn step_matches_value_domain() {
        let l = calibrated(3, 2, &[3, 1, 0, 2, 2, 3], &[3, 3, 2, 0, 1, 1], 8);
        let mut core = CoreState::new(l.clone(), CircuitParams::default(), 0).unwrap();
        core.monitor = ChargeMonitor::enabled();
        let mut h = HiddenState::zeros(2);
        for t in 0..20 {
            let x = [t % 2 == 0, t % 3 == 0, t % 5 != 0];
            let ideal = gru_step(&x, &h, &l).unwrap();
            let res = core.step(&x, t, 0).unwrap();
            for u in 0..2 {
                assert_eq!(res.traces[u].z_code, ideal.z[u].code());
                assert!((res.traces[u].h - ideal.h.0[u]).abs() < 1e-12);
            }
            h = ideal.h;
        }
        assert!(core.monitor.events > 0);
    }

    #[test]
    fn uncalibrated_layer_rejected() {
        let mut l = calibrated(2, 1, &[1, 1], &[1, 1], 0);
        l.gate_scale = 1.0;
        assert!(matches!(
            CoreState::new(l, CircuitParams::default(), 2),
            Err(Error::Calibration { layer: 2, .. })
        ));
    }

    #[test]
    fn toggles_grow_with_gate() {
        let mut l = calibrated(1, 1, &[3], &[3], 0);
        let rows = l.rows() as u64;
        let mut core = CoreState::new(l.clone(), CircuitParams::default(), 0).unwrap();
        l.b_z[0] = BiasCode::new(63).unwrap();
        let mut open = CoreState::new(l, CircuitParams::default(), 0).unwrap();
        core.step(&[false], 0, 0).unwrap();
        open.step(&[true], 0, 0).unwrap();
        assert_eq!(core.log.toggles, 8 * rows + 4 * 32);
        assert_eq!(open.log.toggles, 12 * rows - 4);
    }
}
