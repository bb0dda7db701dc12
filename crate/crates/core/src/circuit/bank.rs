// SPDX-License-Identifier: Apache-2.0

//! Capacitors and ideal charge sharing.

use crate::error::{Error, Result};

/// A capacitor with its capacitance in unit capacitors and its top-plate
/// potential in volts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Capacitor {
    pub rel: f64,
    pub volts: f64,
}

impl Capacitor {
    pub fn new(rel: f64, volts: f64) -> Self {
        Self { rel, volts }
    }

    /// Stored charge in unit-capacitor volts.
    pub fn charge(&self) -> f64 {
        self.rel * self.volts
    }
}

/// Compensated (Neumaier) sum.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Checks that every share and swap leaves the total charge unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct ChargeMonitor {
    pub enabled: bool,
    /// Largest admissible relative change of a shared group's charge.
    pub tolerance: f64,
    /// Largest relative change seen so far.
    pub worst: f64,
    pub events: u64,
}

impl Default for ChargeMonitor {
    fn default() -> Self {
        Self {
            enabled: false,
            tolerance: 1e-15,
            worst: 0.0,
            events: 0,
        }
    }
}

impl ChargeMonitor {
    pub fn enabled() -> Self {
        Self {
            enabled: true,
            ..Self::default()
        }
    }

    pub fn record(&mut self, event: &'static str, before: f64, after: f64) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        self.events += 1;
        let scale = before.abs().max(f64::MIN_POSITIVE);
        let rel_err = (after - before).abs() / scale;
        self.worst = self.worst.max(rel_err);
        if rel_err > self.tolerance {
            return Err(Error::ChargeViolation { event, rel_err });
        }
        Ok(())
    }
}

/// Result of connecting a group of capacitors together.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Share {
    /// Common final potential.
    pub volts: f64,
    /// Dissipated energy in unit-capacitor square volts, `sum rel (V_i - V_f)^2`.
    pub loss: f64,
}

/// Connects the capacitors selected by `idx` and lets them settle to a
/// common potential.
pub fn share_indices(
    caps: &mut [Capacitor],
    idx: &[usize],
    monitor: &mut ChargeMonitor,
    event: &'static str,
) -> Result<Share> {
    let total = neumaier_sum(idx.iter().map(|&i| caps[i].rel));
    if total <= 0.0 {
        return Err(Error::Config(format!("{event}: group has no capacitance")));
    }
    let before = neumaier_sum(idx.iter().map(|&i| caps[i].charge()));
    let volts = before / total;
    let loss = neumaier_sum(idx.iter().map(|&i| {
        let d = caps[i].volts - volts;
        caps[i].rel * d * d
    }));
    for &i in idx {
        caps[i].volts = volts;
    }
    let after = neumaier_sum(idx.iter().map(|&i| caps[i].charge()));
    monitor.record(event, before, after)?;
    Ok(Share { volts, loss })
}

/// Shares a whole slice.
pub fn share(caps: &mut [Capacitor], monitor: &mut ChargeMonitor) -> Result<Share> {
    let idx: Vec<usize> = (0..caps.len()).collect();
    share_indices(caps, &idx, monitor, "share")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(neumaier_sum(v), 2.0);
        assert_eq!(neumaier_sum([]), 0.0);
    }

    #[test]
    fn sharing_weights_by_capacitance() {
        let mut caps = vec![Capacitor::new(1.0, 1.0), Capacitor::new(3.0, 0.0)];
        let mut mon = ChargeMonitor::enabled();
        let s = share(&mut caps, &mut mon).unwrap();
        assert_eq!(s.volts, 0.25);
        // 1 * 0.75^2 + 3 * 0.25^2
        assert_eq!(s.loss, 0.75);
        assert!(caps.iter().all(|c| c.volts == 0.25));
        assert_eq!(mon.events, 1);
    }

    #[test]
    fn loss_equals_stored_energy_drop() {
        let mut caps: Vec<Capacitor> = (0..9)
            .map(|i| Capacitor::new(0.9 + 0.03 * i as f64, 0.1 * i as f64))
            .collect();
        let e0: f64 = caps.iter().map(|c| c.rel * c.volts * c.volts).sum();
        let s = share(&mut caps, &mut ChargeMonitor::default()).unwrap();
        let e1: f64 = caps.iter().map(|c| c.rel * c.volts * c.volts).sum();
        assert!((e0 - e1 - s.loss).abs() < 1e-14);
    }

    #[test]
    fn monitor_flags_violation() {
        let mut mon = ChargeMonitor::enabled();
        mon.record("ok", 1.0, 1.0).unwrap();
        assert!(matches!(
            mon.record("bad", 1.0, 1.0 + 1e-9),
            Err(Error::ChargeViolation { event: "bad", .. })
        ));
    }

    #[test]
    fn empty_group_rejected() {
        let mut caps = vec![Capacitor::new(0.0, 1.0)];
        assert!(share(&mut caps, &mut ChargeMonitor::default()).is_err());
    }
}
