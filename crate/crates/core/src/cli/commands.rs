// SPDX-License-Identifier: Apache-2.0

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::*;
use crate::circuit::{
    full_scale, sar_convert, sar_ideal_code, CircuitForward, CircuitNetwork, Mismatch,
};
use crate::energy::{energy_of_run, worst_case_bound, EnergyReport};
use crate::gru::{forward_sequential, BiasCode, Forward, Network, NetworkConfig, GATE_LEVELS};
use crate::io::{load_model, save_model, write_csv_sequences, write_traces_file, TraceRecord};
use crate::train::{run_schedule, TrainConfig};

fn csv_writer(path: &Path) -> CmdResult<csv::Writer<BufWriter<File>>> {
    let f = File::create(path)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> CmdResult {
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn load_network(path: &Path) -> CmdResult<Network> {
    require_file(path, "model")?;
    Ok(load_model(path)?)
}

fn data_source(d: &DataArgs) -> CmdResult<DatasetSource> {
    dataset_source(&d.data, &d.split, d.threshold, d.presentation, d.limit)
}

fn circuit_engine(net: &Network, c: &CircuitArgs) -> CmdResult<CircuitNetwork> {
    if !(c.mismatch_sigma >= 0.0 && c.mismatch_sigma.is_finite()) {
        return Err(Failure::Usage(
            "--mismatch-sigma must be a finite value >= 0".into(),
        ));
    }
    let params = circuit_params(c.circuit.as_deref())?;
    let mismatch = (c.mismatch_sigma > 0.0).then_some(Mismatch {
        sigma: c.mismatch_sigma,
        seed: c.seed,
    });
    Ok(CircuitNetwork::new(net.clone(), params, mismatch)?)
}

/// Runs every sequence through the ideal engine, in dataset order.
fn run_ideal(net: &Network, data: &Dataset, traces: bool) -> CmdResult<Vec<Forward>> {
    Ok(data
        .examples
        .par_iter()
        .map(|ex| {
            let mut f = forward_sequential(&ex.input, net)?;
            if !traces {
                f.traces = Vec::new();
            }
            Ok(f)
        })
        .collect::<crate::Result<_>>()?)
}

/// Runs every sequence through the circuit engine, in dataset order.
fn run_circuit(
    engine: &CircuitNetwork,
    data: &Dataset,
    traces: bool,
) -> CmdResult<Vec<CircuitForward>> {
    Ok(data
        .examples
        .par_iter()
        .map_init(
            || engine.clone(),
            |e, ex| {
                if traces {
                    e.run(&ex.input)
                } else {
                    e.run_fast(&ex.input)
                }
            },
        )
        .collect::<crate::Result<_>>()?)
}

#[derive(Serialize)]
struct Prediction {
    seq: usize,
    label: usize,
    predicted: usize,
}

pub fn simulate(a: &SimulateArgs) -> CmdResult {
    let source = data_source(&a.data)?;
    let out = out_dir(&a.out)?;
    let net = load_network(&a.model)?;
    let engine = match a.engine {
        Engine::Circuit => Some(circuit_engine(&net, &a.circuit)?),
        Engine::Ideal => None,
    };
    let data = load_dataset(&source)?;
    if let Some(i) = a.trace_seq {
        if i >= data.len() {
            return Err(Failure::Usage(format!(
                "--trace-seq {i} is past the last sequence ({})",
                data.len() - 1
            )));
        }
    }
    let forwards: Vec<Forward> = match &engine {
        None => run_ideal(&net, &data, false)?,
        Some(e) => run_circuit(e, &data, false)?
            .into_iter()
            .map(|r| r.forward)
            .collect(),
    };

    let name = a.engine.name();
    let mut preds = csv_writer(&out.join(format!("predictions_{name}.csv")))?;
    let mut logits = csv_writer(&out.join(format!("logits_{name}.csv")))?;
    let n_out = net.n_out();
    let mut header = vec!["seq".to_string()];
    header.extend((0..n_out).map(|k| format!("logit_{k}")));
    logits.write_record(&header).map_err(csv_err)?;
    let mut hits = 0;
    for (i, (f, ex)) in forwards.iter().zip(&data.examples).enumerate() {
        preds
            .serialize(Prediction {
                seq: i,
                label: ex.label,
                predicted: f.class,
            })
            .map_err(csv_err)?;
        let mut row = vec![i.to_string()];
        row.extend(f.logits.iter().map(|v| format!("{v:e}")));
        logits.write_record(&row).map_err(csv_err)?;
        hits += (f.class == ex.label) as usize;
    }
    finish(preds)?;
    finish(logits)?;

    if let Some(i) = a.trace_seq {
        let input = &data.examples[i].input;
        let traces = match &engine {
            None => forward_sequential(input, &net)?.traces,
            Some(e) => e.clone().run(input)?.forward.traces,
        };
        write_traces_file(&out.join(format!("traces_{name}.csv")), &traces)?;
    }
    println!(
        "{name}: {} sequences, accuracy {:.4}",
        data.len(),
        hits as f64 / data.len() as f64
    );
    Ok(())
}

/// Largest per-signal differences between two traces of the same run.
#[derive(Clone, Copy, Debug, Default, Serialize)]
struct SignalDiff {
    z: f64,
    h_tilde: f64,
    h: f64,
    out: f64,
}

impl SignalDiff {
    fn of(a: &TraceRecord, b: &TraceRecord) -> Self {
        Self {
            z: (a.z_code as f64 - b.z_code as f64).abs() / GATE_LEVELS as f64,
            h_tilde: (a.h_tilde - b.h_tilde).abs(),
            h: (a.h - b.h).abs(),
            out: (a.out != b.out) as u8 as f64,
        }
    }

    fn max(self, o: Self) -> Self {
        Self {
            z: self.z.max(o.z),
            h_tilde: self.h_tilde.max(o.h_tilde),
            h: self.h.max(o.h),
            out: self.out.max(o.out),
        }
    }

    fn worst(&self) -> f64 {
        self.z.max(self.h_tilde).max(self.h).max(self.out)
    }
}

#[derive(Serialize)]
struct SequenceDiff {
    seq: usize,
    records: usize,
    max_z: f64,
    max_h_tilde: f64,
    max_h: f64,
    out_flips: usize,
    ideal_class: usize,
    circuit_class: usize,
}

pub fn compare(a: &CompareArgs) -> CmdResult {
    if a.tolerance.is_nan() || a.tolerance < 0.0 {
        return Err(Failure::Usage("--tolerance must be >= 0".into()));
    }
    let source = data_source(&a.data)?;
    let out = out_dir(&a.out)?;
    let net = load_network(&a.model)?;
    let engine = circuit_engine(&net, &a.circuit)?;
    let data = load_dataset(&source)?;
    let ideal = run_ideal(&net, &data, true)?;
    let circuit = run_circuit(&engine, &data, true)?;

    let mut total = SignalDiff::default();
    let mut first: Option<(usize, TraceRecord)> = None;
    let mut report = csv_writer(&out.join("compare.csv"))?;
    for (seq, (i, c)) in ideal.iter().zip(&circuit).enumerate() {
        let (ti, tc) = (&i.traces, &c.forward.traces);
        if ti.len() != tc.len() {
            return Err(Failure::Check(format!(
                "sequence {seq}: trace lengths differ ({} vs {})",
                ti.len(),
                tc.len()
            )));
        }
        let mut seq_diff = SignalDiff::default();
        let mut flips = 0;
        for (x, y) in ti.iter().zip(tc) {
            let d = SignalDiff::of(x, y);
            flips += (x.out != y.out) as usize;
            seq_diff = seq_diff.max(d);
            if first.is_none() && d.worst() > a.tolerance {
                first = Some((seq, *x));
            }
        }
        total = total.max(seq_diff);
        report
            .serialize(SequenceDiff {
                seq,
                records: ti.len(),
                max_z: seq_diff.z,
                max_h_tilde: seq_diff.h_tilde,
                max_h: seq_diff.h,
                out_flips: flips,
                ideal_class: i.class,
                circuit_class: c.forward.class,
            })
            .map_err(csv_err)?;
    }
    finish(report)?;

    println!("sequences: {}", data.len());
    println!("max |dz|       {:e}", total.z);
    println!("max |dh_tilde| {:e}", total.h_tilde);
    println!("max |dh|       {:e}", total.h);
    println!("output flips   {}", total.out > 0.0);
    match first {
        None => {
            println!("within tolerance {:e}", a.tolerance);
            Ok(())
        }
        Some((seq, r)) => Err(Failure::Check(format!(
            "engines diverge beyond {:e}: first at sequence {seq}, step {}, layer {}, unit {}",
            a.tolerance, r.step, r.layer, r.unit
        ))),
    }
}

pub fn train(a: &TrainArgs) -> CmdResult {
    let mut config = match &a.config {
        Some(p) => {
            require_file(p, "training config")?;
            TrainConfig::load(p)?
        }
        None => match a.task {
            TaskPreset::DelayedParity => TrainConfig::delayed_parity_default(),
            TaskPreset::RowSmnist => TrainConfig::row_smnist_default(),
        },
    };
    if let Some(s) = a.seed {
        config.seed = s;
    }
    config.validate()?;
    let circuit = circuit_params(a.circuit.as_deref())?;
    let out = out_dir(&a.out)?;
    let metrics = File::create(out.join("metrics.csv"))?;
    let mut metrics = BufWriter::new(metrics);
    let outcome = run_schedule(&config, &circuit, Some(&mut metrics))?;
    metrics.flush()?;
    let model_path = out.join("model.mgru.json");
    save_model(&model_path, &outcome.network)?;
    write_csv_sequences(File::create(out.join("test.csv"))?, &outcome.test)?;
    for m in outcome.metrics.iter().filter(|m| m.regression) {
        eprintln!("warning: {} phase ended at or below chance", m.phase);
    }
    println!(
        "trained {} in {:.1} s: hardened test accuracy {:.4}; model {}",
        config.network,
        outcome.seconds,
        outcome.test_accuracy,
        model_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EnergyRow<'a> {
    kind: &'a str,
    seq: Option<usize>,
    step: Option<usize>,
    precharge_j: f64,
    share_j: f64,
    swap_j: f64,
    switching_j: f64,
    total_j: f64,
    toggles: u64,
}

impl<'a> EnergyRow<'a> {
    fn new(kind: &'a str, seq: Option<usize>, step: Option<usize>, r: &EnergyReport) -> Self {
        Self {
            kind,
            seq,
            step,
            precharge_j: r.precharge,
            share_j: r.share,
            swap_j: r.swap,
            switching_j: r.switching,
            total_j: r.total,
            toggles: r.toggles,
        }
    }
}

pub fn energy(a: &EnergyArgs) -> CmdResult {
    let circuit = circuit_params(a.circuit.circuit.as_deref())?;
    let params = energy_params(a.energy_config.as_deref(), &circuit)?;
    let measured = match (&a.model, &a.data) {
        (Some(m), Some(d)) => Some((
            m,
            dataset_source(d, &a.split, a.threshold, a.presentation, a.limit)?,
        )),
        _ => None,
    };
    let out = out_dir(&a.out)?;
    let mut w = csv_writer(&out.join("energy.csv"))?;

    let Some((model, source)) = measured else {
        let Some(shape) = &a.network else {
            return Err(Failure::Usage(
                "give --network, or --model with --data".into(),
            ));
        };
        let cfg: NetworkConfig = shape.parse()?;
        let bound = worst_case_bound(&cfg, &params);
        w.serialize(EnergyRow::new("bound", None, None, &bound))
            .map_err(csv_err)?;
        finish(w)?;
        println!("worst-case bound per step: {:.4} pJ", bound.total * 1e12);
        return Ok(());
    };

    let net = load_network(model)?;
    let engine = circuit_engine(&net, &a.circuit)?;
    let data = load_dataset(&source)?;
    let bound = worst_case_bound(&net.config(), &params);
    let runs = run_circuit(&engine, &data, false)?;
    let mut worst = EnergyReport::default();
    let mut sum = EnergyReport::default();
    let mut steps = 0usize;
    for (seq, r) in runs.iter().enumerate() {
        let e = energy_of_run(&r.events, &params);
        for (t, s) in e.per_step.iter().enumerate() {
            w.serialize(EnergyRow::new("step", Some(seq), Some(t), s))
                .map_err(csv_err)?;
            if s.total > worst.total {
                worst = *s;
            }
        }
        sum.add(&e.total);
        steps += e.per_step.len();
    }
    let mut mean = sum.scaled(1.0 / steps.max(1) as f64);
    mean.toggles = sum.toggles / steps.max(1) as u64;
    for (kind, report) in [("mean", mean), ("max", worst), ("bound", bound)] {
        w.serialize(EnergyRow::new(kind, None, None, &report))
            .map_err(csv_err)?;
    }
    finish(w)?;
    println!(
        "per step: mean {:.4} pJ, max {:.4} pJ, bound {:.4} pJ",
        mean.total * 1e12,
        worst.total * 1e12,
        bound.total * 1e12
    );
    if worst.total > bound.total {
        return Err(Failure::Check(format!(
            "measured step energy {:e} J exceeds the worst-case bound {:e} J",
            worst.total, bound.total
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    slope_segments: u32,
    offset_code: u8,
    v_in: f64,
    code: u8,
    ideal_code: u8,
    full_scale: f64,
}

pub fn sweep_adc(a: &SweepAdcArgs) -> CmdResult {
    let slopes = parse_list(&a.slopes)?;
    let offsets = parse_list(&a.offsets)?;
    if let Some(o) = offsets.iter().find(|&&o| o > BiasCode::MAX as u32) {
        return Err(Failure::Usage(format!(
            "offset code {o} exceeds {}",
            BiasCode::MAX
        )));
    }
    if a.points == 0 {
        return Err(Failure::Usage("--points must be at least 1".into()));
    }
    let circuit = circuit_params(a.circuit.as_deref())?;
    let out = out_dir(&a.out)?;
    let v = circuit.volts;
    let mut w = csv_writer(&out.join("sweep_adc.csv"))?;
    let mut rows = 0;
    for &s in &slopes {
        for &o in &offsets {
            let adc = circuit.adc(s, BiasCode::new(o as u8)?);
            let fs = full_scale(&adc, s as f64, &v)?;
            for i in 0..a.points {
                let v_in = if a.points == 1 {
                    v.v0
                } else {
                    v.v_ref_lo + v.span() * i as f64 / (a.points - 1) as f64
                };
                w.serialize(SweepRow {
                    slope_segments: s,
                    offset_code: o as u8,
                    v_in,
                    code: sar_convert(v_in, s as f64, &adc, &v)?.code(),
                    ideal_code: sar_ideal_code(v_in, s as f64, &adc, &v)?.code(),
                    full_scale: fs,
                })
                .map_err(csv_err)?;
                rows += 1;
            }
        }
    }
    finish(w)?;
    println!("{rows} conversions written");
    Ok(())
}
