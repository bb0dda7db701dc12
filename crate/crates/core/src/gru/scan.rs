// SPDX-License-Identifier: Apache-2.0

//! Time-parallel forward pass.
//!
//! Gates and candidates depend only on the current input, so once a layer's
//! input sequence is known every step's `(z, h_tilde)` can be computed
//! independently and the state recurrence `h_t = (1 - z_t) h_{t-1} + z_t h_tilde_t`
//! becomes a prefix scan over affine maps. Binary activations between layers
//! mean layers are still processed one after another.

use rayon::prelude::*;

use super::forward::{argmax, check_input, Forward};
use super::ops::{gate_code, mac, projection_mean};
use super::types::{GateCode, LayerParams, Network, Sequence};
use crate::error::Result;
use crate::io::trace::TraceRecord;

/// The map `h -> a * h + b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub a: f64,
    pub b: f64,
}

impl Affine {
    pub const IDENTITY: Self = Self { a: 1.0, b: 0.0 };

    /// Map applied by one gated update.
    pub fn gate(z: GateCode, candidate: f64) -> Self {
        let z = z.z_eff();
        Self {
            a: 1.0 - z,
            b: z * candidate,
        }
    }

    /// `then` after `self`: `(a2 a1, a2 b1 + b2)`.
    pub fn then(self, then: Self) -> Self {
        Self {
            a: then.a * self.a,
            b: then.a * self.b + then.b,
        }
    }

    pub fn apply(self, h: f64) -> f64 {
        self.a * h + self.b
    }
}

const SCAN_CHUNK: usize = 16;

/// Inclusive scan of `maps` applied to `h0`: element `t` is the state after step `t`.
///
/// Two-level scan: chunk aggregates are reduced in parallel, their prefix is
/// taken serially, then every chunk is expanded in parallel from its start state.
pub fn affine_scan(maps: &[Affine], h0: f64) -> Vec<f64> {
    let aggregates: Vec<Affine> = maps
        .par_chunks(SCAN_CHUNK)
        .map(|chunk| chunk.iter().fold(Affine::IDENTITY, |acc, &m| acc.then(m)))
        .collect();
    let mut starts = Vec::with_capacity(aggregates.len());
    let mut h = h0;
    for agg in &aggregates {
        starts.push(h);
        h = agg.apply(h);
    }
    maps.par_chunks(SCAN_CHUNK)
        .zip(starts)
        .flat_map_iter(|(chunk, start)| {
            chunk.iter().scan(start, |h, m| {
                *h = m.apply(*h);
                Some(*h)
            })
        })
        .collect()
}

struct LayerRun {
    z: Vec<GateCode>,
    h_tilde: Vec<f64>,
    h: Vec<f64>,
    out: Vec<bool>,
}

fn run_layer(layer: &LayerParams, inputs: &Sequence) -> Result<LayerRun> {
    let steps = inputs.steps();
    let n = layer.n_out;
    // (z, h_tilde) for every (step, unit), step-major
    let per_step: Vec<Vec<(GateCode, f64)>> = (0..steps)
        .into_par_iter()
        .map(|t| {
            let x = inputs.step(t);
            (0..n)
                .map(|u| {
                    let cand = projection_mean(mac(layer.w_h_row(u), x)?, layer);
                    let z = gate_code(mac(layer.w_z_row(u), x)?, layer, u);
                    Ok((z, cand))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|u| {
            let maps: Vec<Affine> = per_step
                .iter()
                .map(|row| Affine::gate(row[u].0, row[u].1))
                .collect();
            affine_scan(&maps, layer.h_init[u])
        })
        .collect();

    let mut run = LayerRun {
        z: Vec::with_capacity(steps * n),
        h_tilde: Vec::with_capacity(steps * n),
        h: Vec::with_capacity(steps * n),
        out: Vec::with_capacity(steps * n),
    };
    for (t, row) in per_step.iter().enumerate() {
        for (u, &(z, cand)) in row.iter().enumerate() {
            let h = columns[u][t];
            run.z.push(z);
            run.h_tilde.push(cand);
            run.h.push(h);
            run.out.push(h >= layer.threshold(u));
        }
    }
    Ok(run)
}

/// Same contract as [`forward_sequential`](super::forward_sequential), computed
/// with a per-layer parallel scan over time.
pub fn parallel_scan_forward(inputs: &Sequence, net: &Network) -> Result<Forward> {
    check_input(inputs, net)?;
    let steps = inputs.steps();
    let mut layer_input = inputs.clone();
    let mut runs = Vec::with_capacity(net.layers().len());
    let mut outputs = Vec::with_capacity(net.layers().len());
    for layer in net.layers() {
        let run = run_layer(layer, &layer_input)?;
        layer_input = Sequence::new(layer.n_out, run.out.clone())?;
        outputs.push(layer_input.clone());
        runs.push(run);
    }

    let mut traces = Vec::new();
    for t in 0..steps {
        for (li, (layer, run)) in net.layers().iter().zip(&runs).enumerate() {
            for unit in 0..layer.n_out {
                let k = t * layer.n_out + unit;
                traces.push(TraceRecord {
                    step: t,
                    layer: li,
                    unit,
                    z_code: run.z[k].code(),
                    h_tilde: run.h_tilde[k],
                    h: run.h[k],
                    out: run.out[k],
                });
            }
        }
    }

    let last = runs.last().expect("non-empty network");
    let n = net.n_out();
    let logits = last.h[(steps - 1) * n..].to_vec();
    let class = argmax(&logits);
    Ok(Forward {
        logits,
        class,
        outputs,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_matches_fold() {
        let maps: Vec<Affine> = (0..100)
            .map(|i| Affine {
                a: 1.0 - (i % 7) as f64 / 8.0,
                b: ((i * 13) % 11) as f64 / 10.0 - 0.5,
            })
            .collect();
        let scanned = affine_scan(&maps, 0.3);
        let mut h = 0.3;
        for (m, s) in maps.iter().zip(&scanned) {
            h = m.apply(h);
            assert!((h - s).abs() < 1e-12);
        }
    }

    #[test]
    fn scan_of_identities() {
        let maps = vec![Affine::gate(GateCode::default(), 2.5); 37];
        assert!(affine_scan(&maps, -0.75).iter().all(|&h| h == -0.75));
        assert!(affine_scan(&[], 1.0).is_empty());
    }

    #[test]
    fn composition_is_associative() {
        let p = Affine { a: 0.5, b: 1.0 };
        let q = Affine { a: 0.25, b: -2.0 };
        let r = Affine { a: 0.75, b: 0.125 };
        assert_eq!(p.then(q).then(r), p.then(q.then(r)));
        assert_eq!(p.then(q).apply(3.0), q.apply(p.apply(3.0)));
    }
}
