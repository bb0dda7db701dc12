// SPDX-License-Identifier: Apache-2.0

use super::ops::{gru_step, output_activation};
use super::types::{HiddenState, Network, Sequence};
use crate::error::{Error, Result};
use crate::io::trace::TraceRecord;

/// Result of running a network over one sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Forward {
    /// Final layer state at the last step.
    pub logits: Vec<f64>,
    pub class: usize,
    /// Binary output sequence of every layer.
    pub outputs: Vec<Sequence>,
    pub traces: Vec<TraceRecord>,
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_input(inputs: &Sequence, net: &Network) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::EmptySequence);
    }
    if inputs.width() != net.n_in() {
        return Err(Error::DimMismatch(format!(
            "sequence width {} does not match network input size {}",
            inputs.width(),
            net.n_in()
        )));
    }
    Ok(())
}

/// Step-by-step forward pass with full traces.
pub fn forward_sequential(inputs: &Sequence, net: &Network) -> Result<Forward> {
    run(inputs, net, true)
}

/// Forward pass that only keeps logits and the predicted class.
pub fn predict(inputs: &Sequence, net: &Network) -> Result<(Vec<f64>, usize)> {
    let fwd = run(inputs, net, false)?;
    Ok((fwd.logits, fwd.class))
}

fn run(inputs: &Sequence, net: &Network, record: bool) -> Result<Forward> {
    check_input(inputs, net)?;
    let steps = inputs.steps();
    let mut states: Vec<HiddenState> = net
        .layers()
        .iter()
        .map(|l| HiddenState(l.h_init.clone()))
        .collect();
    let mut out_bits: Vec<Vec<bool>> = net
        .layers()
        .iter()
        .map(|l| Vec::with_capacity(if record { steps * l.n_out } else { 0 }))
        .collect();
    let mut traces = Vec::new();

    for (t, x) in inputs.iter().enumerate() {
        let mut x = x.to_vec();
        for (li, layer) in net.layers().iter().enumerate() {
            let step = gru_step(&x, &states[li], layer)?;
            let out = output_activation(&step.h, &layer.b_h, layer.threshold_scale);
            if record {
                for (unit, &o) in out.iter().enumerate() {
                    traces.push(TraceRecord {
                        step: t,
                        layer: li,
                        unit,
                        z_code: step.z[unit].code(),
                        h_tilde: step.h_tilde[unit],
                        h: step.h.0[unit],
                        out: o,
                    });
                }
                out_bits[li].extend_from_slice(&out);
            }
            states[li] = step.h;
            x = out;
        }
    }

    let logits = states.pop().expect("non-empty network").0;
    let class = argmax(&logits);
    let outputs = if record {
        out_bits
            .into_iter()
            .zip(net.layers())
            .map(|(bits, l)| Sequence::new(l.n_out, bits))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
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
    use crate::gru::{BiasCode, LayerParams, WeightCode};

    fn uniform_layer(n_in: usize, n_out: usize, w: u8, b_z: u8) -> LayerParams {
        let w = WeightCode::new(w).unwrap();
        let mut l = LayerParams::new(
            n_in,
            n_out,
            vec![w; n_in * n_out],
            vec![w; n_in * n_out],
            1.5,
            1.0 / 16.0,
        )
        .unwrap();
        l.b_z = vec![BiasCode::new(b_z).unwrap(); n_out];
        l
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
        assert_eq!(argmax(&[-1.0]), 0);
    }

    #[test]
    fn zero_input_neutral_gives_zero_logits() {
        let net =
            Network::new(vec![uniform_layer(3, 4, 3, 32), uniform_layer(4, 2, 1, 32)]).unwrap();
        // second layer sees all-ones from the tie rule, so give it a zero MAC
        let mut net = net;
        net.layers_mut()[1].w_h = [0u8, 3, 3, 0, 0, 3, 3, 0]
            .iter()
            .map(|&c| WeightCode::new(c).unwrap())
            .collect();
        let seq = Sequence::new(3, vec![false; 3]).unwrap();
        let fwd = forward_sequential(&seq, &net).unwrap();
        assert_eq!(fwd.logits, vec![0.0, 0.0]);
        assert_eq!(fwd.class, 0);
        assert_eq!(fwd.traces.len(), 6);
    }

    #[test]
    fn closed_gates_return_h_init() {
        let mut l1 = uniform_layer(2, 3, 2, 0);
        let mut l2 = uniform_layer(3, 2, 1, 0);
        // b_z = 0 and a non-positive gate MAC keep every gate at code 0
        l1.w_z = vec![WeightCode::new(0).unwrap(); 6];
        l2.w_z = vec![WeightCode::new(0).unwrap(); 6];
        l2.h_init = vec![0.25, -1.5];
        let net = Network::new(vec![l1, l2]).unwrap();
        let seq = Sequence::new(2, vec![true, false, true, true, false, true]).unwrap();
        let fwd = forward_sequential(&seq, &net).unwrap();
        assert!(fwd.traces.iter().all(|r| r.z_code == 0));
        assert_eq!(fwd.logits, vec![0.25, -1.5]);
        assert_eq!(fwd.class, 0);
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        let net = Network::new(vec![uniform_layer(2, 2, 1, 32)]).unwrap();
        let empty = Sequence::new(2, vec![]).unwrap();
        assert!(matches!(
            forward_sequential(&empty, &net),
            Err(Error::EmptySequence)
        ));
        let wrong = Sequence::new(3, vec![true; 3]).unwrap();
        assert!(forward_sequential(&wrong, &net).is_err());
    }
}
