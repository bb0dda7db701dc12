// SPDX-License-Identifier: Apache-2.0

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::bank::ChargeMonitor;
use super::core::{CoreState, EventLog, Mismatch};
use super::params::CircuitParams;
use crate::error::Result;
use crate::gru::{argmax, check_input, Forward, Network, Sequence};

/// A network mapped onto one charge-domain core per layer.
#[derive(Clone, Debug)]
pub struct CircuitNetwork {
    pub cores: Vec<CoreState>,
    network: Network,
}

/// Circuit forward pass plus the per-step, per-layer event logs.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitForward {
    pub forward: Forward,
    pub events: Vec<Vec<EventLog>>,
}

impl CircuitNetwork {
    pub fn new(
        network: Network,
        circuit: CircuitParams,
        mismatch: Option<Mismatch>,
    ) -> Result<Self> {
        let mut rng = mismatch.map(|m| ChaCha8Rng::seed_from_u64(m.seed));
        let cores = network
            .layers()
            .iter()
            .enumerate()
            .map(|(i, l)| match (&mismatch, rng.as_mut()) {
                (Some(m), Some(rng)) if m.sigma > 0.0 => {
                    CoreState::with_mismatch(l.clone(), circuit, i, m.sigma, rng)
                }
                _ => CoreState::new(l.clone(), circuit, i),
            })
            .collect::<Result<_>>()?;
        Ok(Self { cores, network })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    /// Turns charge-conservation checking on for every core.
    pub fn monitor_charge(&mut self, tolerance: f64) {
        for c in &mut self.cores {
            c.monitor = ChargeMonitor {
                tolerance,
                ..ChargeMonitor::enabled()
            };
        }
    }

    /// Largest relative charge error seen so far and the number of checked events.
    pub fn charge_report(&self) -> (f64, u64) {
        self.cores.iter().fold((0.0, 0), |(w, n), c| {
            (w.max(c.monitor.worst), n + c.monitor.events)
        })
    }

    pub fn reset(&mut self) {
        self.cores.iter_mut().for_each(CoreState::reset);
    }

    /// Runs one sequence from the initial state.
    pub fn run(&mut self, inputs: &Sequence) -> Result<CircuitForward> {
        self.run_with(inputs, true)
    }

    /// Runs one sequence keeping only logits, class and event logs.
    pub fn run_fast(&mut self, inputs: &Sequence) -> Result<CircuitForward> {
        self.run_with(inputs, false)
    }

    fn run_with(&mut self, inputs: &Sequence, record: bool) -> Result<CircuitForward> {
        check_input(inputs, &self.network)?;
        self.reset();
        let steps = inputs.steps();
        let mut bits: Vec<Vec<bool>> = vec![Vec::new(); self.cores.len()];
        let mut traces = Vec::new();
        let mut events = Vec::with_capacity(steps);
        for (t, x) in inputs.iter().enumerate() {
            let mut x = x.to_vec();
            let mut step_events = Vec::with_capacity(self.cores.len());
            for (li, core) in self.cores.iter_mut().enumerate() {
                let res = core.step(&x, t, li)?;
                step_events.push(core.log.clone());
                if record {
                    bits[li].extend_from_slice(&res.out);
                    traces.extend(res.traces);
                }
                x = res.out;
            }
            events.push(step_events);
        }
        let logits = self.cores.last().expect("non-empty network").state_values();
        let class = argmax(&logits);
        let outputs = if record {
            bits.into_iter()
                .zip(&self.cores)
                .map(|(b, c)| Sequence::new(c.layer.n_out, b))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(CircuitForward {
            forward: Forward {
                logits,
                class,
                outputs,
                traces,
            },
            events,
        })
    }
}

/// Circuit forward pass of `net` with nominal capacitors.
pub fn simulate(
    inputs: &Sequence,
    net: &Network,
    circuit: &CircuitParams,
) -> Result<CircuitForward> {
    CircuitNetwork::new(net.clone(), *circuit, None)?.run(inputs)
}
