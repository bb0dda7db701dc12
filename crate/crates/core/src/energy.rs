// SPDX-License-Identifier: Apache-2.0

//! Per-step energy estimate from simulator event logs.
//!
//! Each capacitor recharge dissipates `C (dV)^2 / 2`, each switch transition
//! costs a fixed energy. ADC, comparator, row driver and control energy are
//! not modelled.
//!
//! The default unit capacitance and switch energy are calibration values:
//! they put a four-layer 64x64 network at its all-open-gate worst case near
//! 169 pJ per step. They are not measured device parameters.

use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitParams, EventLog};
use crate::error::{Error, Result};
use crate::gru::{column_height, NetworkConfig};

/// Capacitor events per row and column in one step: two precharges, two
/// bank shares and the state share.
pub const CAP_EVENTS_PER_ROW: u64 = 5;
/// Switch transitions per row and column when every row is swapped.
pub const MAX_TOGGLES_PER_ROW: u64 = 12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyParams {
    /// Unit capacitance in farads.
    pub unit_cap: f64,
    /// Energy per switch transition in joules.
    pub e_switch: f64,
    /// Weight-level spacing half-step in volts.
    pub v_lsb: f64,
    /// Largest weight magnitude in `v_lsb` units; bounds every capacitor swing
    /// to `2 * swing_levels * v_lsb`.
    pub swing_levels: u32,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self::from_circuit(&CircuitParams::default())
    }
}

impl EnergyParams {
    /// Calibrated switch energy with the circuit's capacitance and levels.
    pub fn from_circuit(c: &CircuitParams) -> Self {
        Self {
            unit_cap: c.unit_cap,
            e_switch: 0.8e-15,
            v_lsb: c.volts.v_lsb,
            swing_levels: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.unit_cap, self.e_switch, self.v_lsb]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0);
        if !ok {
            return Err(Error::Config(format!(
                "energy parameters must be finite and non-negative: {self:?}"
            )));
        }
        Ok(())
    }

    fn half_c(&self) -> f64 {
        0.5 * self.unit_cap
    }
}

/// Energy of one or more steps, in joules.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EnergyReport {
    pub precharge: f64,
    pub share: f64,
    pub swap: f64,
    pub switching: f64,
    pub total: f64,
    pub toggles: u64,
}

impl EnergyReport {
    pub fn add(&mut self, o: &EnergyReport) {
        self.precharge += o.precharge;
        self.share += o.share;
        self.swap += o.swap;
        self.switching += o.switching;
        self.toggles += o.toggles;
        self.total = self.precharge + self.share + self.swap + self.switching;
    }

    pub fn scaled(&self, f: f64) -> EnergyReport {
        EnergyReport {
            precharge: self.precharge * f,
            share: self.share * f,
            swap: self.swap * f,
            switching: self.switching * f,
            total: self.total * f,
            toggles: self.toggles,
        }
    }
}

/// Energy of one core's step.
pub fn energy_of_log(log: &EventLog, p: &EnergyParams) -> EnergyReport {
    let precharge = p.half_c() * log.precharge;
    let share = p.half_c() * log.share;
    let swap = p.half_c() * log.swap_share;
    let switching = p.e_switch * log.toggles as f64;
    EnergyReport {
        precharge,
        share,
        swap,
        switching,
        total: precharge + share + swap + switching,
        toggles: log.toggles,
    }
}

/// Energy of one network step given every core's log.
pub fn energy_of_step(events: &[EventLog], p: &EnergyParams) -> EnergyReport {
    let mut r = EnergyReport::default();
    for log in events {
        r.add(&energy_of_log(log, p));
    }
    r
}

/// Per-layer and total energy of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunEnergy {
    pub per_step: Vec<EnergyReport>,
    pub per_layer: Vec<EnergyReport>,
    pub total: EnergyReport,
}

pub fn energy_of_run(events: &[Vec<EventLog>], p: &EnergyParams) -> RunEnergy {
    let mut run = RunEnergy::default();
    for step in events {
        if run.per_layer.len() < step.len() {
            run.per_layer.resize(step.len(), EnergyReport::default());
        }
        for (l, log) in step.iter().enumerate() {
            run.per_layer[l].add(&energy_of_log(log, p));
        }
        let e = energy_of_step(step, p);
        run.total.add(&e);
        run.per_step.push(e);
    }
    run
}

/// Upper bound on one step's energy: every capacitor swings across the full
/// weight range at each of its events and every row of every column swaps.
pub fn worst_case_bound(net: &NetworkConfig, p: &EnergyParams) -> EnergyReport {
    let swing = 2.0 * p.swing_levels as f64 * p.v_lsb;
    let per_event = p.half_c() * swing * swing;
    let mut r = EnergyReport::default();
    for (n_in, n_out) in net.layer_shapes() {
        let rows = column_height(n_in) as u64 * n_out as u64;
        let cap = |events: u64| per_event * (events * rows) as f64;
        let toggles = MAX_TOGGLES_PER_ROW * rows;
        r.add(&EnergyReport {
            precharge: cap(2),
            share: cap(2),
            swap: cap(CAP_EVENTS_PER_ROW - 4),
            switching: p.e_switch * toggles as f64,
            total: 0.0,
            toggles,
        });
    }
    r
}
