// SPDX-License-Identifier: Apache-2.0

//! Command-line front end.
//!
//! Exit codes: 0 success, 1 tolerance or assertion failure, 2 usage or I/O
//! error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::circuit::CircuitParams;
use crate::energy::EnergyParams;
use crate::error::Error;
use crate::io::{Dataset, DatasetSource, Presentation};

mod commands;

/// Simulation, training and energy estimation for switched-capacitor minGRU cores.
#[derive(Debug, Parser)]
#[command(name = "minimalist", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a model over a dataset and write predictions (and optionally traces).
    Simulate(SimulateArgs),
    /// Run both engines and report per-signal differences.
    Compare(CompareArgs),
    /// Quantization-aware training; writes the hardened model, a metrics CSV and the test set.
    Train(TrainArgs),
    /// Per-step energy of circuit runs and the worst-case bound.
    Energy(EnergyArgs),
    /// Gate ADC transfer curves over slope and offset settings.
    SweepAdc(SweepAdcArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    /// Quantized minGRU arithmetic.
    Ideal,
    /// Charge-domain simulation of the capacitor cores.
    Circuit,
}

impl Engine {
    fn name(self) -> &'static str {
        match self {
            Self::Ideal => "ideal",
            Self::Circuit => "circuit",
        }
    }
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory (created if missing).
    #[arg(long, env = "MINIMALIST_OUT", default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset: a sequence CSV, an IDX image file, or a directory holding an IDX pair.
    #[arg(long)]
    pub data: PathBuf,
    /// IDX file prefix inside a data directory.
    #[arg(long, default_value = "t10k")]
    pub split: String,
    /// Pixel binarization threshold as a fraction of full brightness.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Image unrolling: `pixel` (one pixel per step) or `row` (one row per step).
    #[arg(long, default_value = "pixel")]
    pub presentation: Presentation,
    /// Use only the first N sequences.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CircuitArgs {
    /// JSON circuit parameters; omitted fields keep their defaults.
    #[arg(long)]
    pub circuit: Option<PathBuf>,
    /// Relative standard deviation of capacitor mismatch in the circuit engine.
    #[arg(long, default_value_t = 0.0)]
    pub mismatch_sigma: f64,
    /// Seed for mismatch draws.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "ideal")]
    pub engine: Engine,
    /// Also write the full trace of this sequence index.
    #[arg(long)]
    pub trace_seq: Option<usize>,
    #[command(flatten)]
    pub circuit: CircuitArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Largest accepted difference in z (as a fraction of full gate), h_tilde and h.
    /// Output flips count as a difference of 1.
    #[arg(long, default_value_t = 1e-12)]
    pub tolerance: f64,
    #[command(flatten)]
    pub circuit: CircuitArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TaskPreset {
    /// XOR of two bits presented several steps apart.
    DelayedParity,
    /// Digits presented one 28-pixel row per step.
    RowSmnist,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON training configuration; overrides --task.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in schedule used when no --config is given.
    #[arg(long, value_enum, default_value = "delayed-parity")]
    pub task: TaskPreset,
    /// Overrides the configuration's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON circuit parameters the model is calibrated for.
    #[arg(long)]
    pub circuit: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct EnergyArgs {
    /// Model file; with --data, energy is measured on circuit runs.
    #[arg(long, requires = "data")]
    pub model: Option<PathBuf>,
    /// Dataset for measured runs.
    #[arg(long, requires = "model")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "t10k")]
    pub split: String,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value = "pixel")]
    pub presentation: Presentation,
    #[arg(long)]
    pub limit: Option<usize>,
    /// Network shape for the bound alone, e.g. `64-64-64-64-64`.
    #[arg(long, conflicts_with = "model")]
    pub network: Option<String>,
    /// JSON energy parameters; defaults derive from the circuit.
    #[arg(long)]
    pub energy_config: Option<PathBuf>,
    #[command(flatten)]
    pub circuit: CircuitArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SweepAdcArgs {
    /// Slope settings (sampling capacitors on the ADC node), e.g. `1,2,4` or `0:64`.
    #[arg(long, default_value = "1,2,4,8,16,32,64")]
    pub slopes: String,
    /// Offset codes, e.g. `0,32,63` or `0:63`.
    #[arg(long, default_value = "0,16,32,48,63")]
    pub offsets: String,
    /// Input voltages per curve, spread evenly over the reference range.
    #[arg(long, default_value_t = 257)]
    pub points: usize,
    /// JSON circuit parameters.
    #[arg(long)]
    pub circuit: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

/// Why a command stopped.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments, unreadable inputs, unwritable outputs.
    Usage(String),
    /// A result fell outside its tolerance or an internal check fired.
    Check(String),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Usage(_) => ExitCode::from(2),
            Self::Check(_) => ExitCode::from(1),
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) | Self::Check(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ChargeViolation { .. } | Error::NonFinite(_) => Self::Check(e.to_string()),
            _ => Self::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Usage(e.to_string())
    }
}

pub type CmdResult<T = ()> = std::result::Result<T, Failure>;

/// Parses the process arguments and runs the selected command.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Compare(a) => commands::compare(&a),
        Command::Train(a) => commands::train(&a),
        Command::Energy(a) => commands::energy(&a),
        Command::SweepAdc(a) => commands::sweep_adc(&a),
    }
}

fn require_file(path: &Path, what: &str) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "{what} {} not found",
            path.display()
        )))
    }
}

fn out_dir(out: &OutArgs) -> CmdResult<PathBuf> {
    std::fs::create_dir_all(&out.out).map_err(|e| {
        Failure::Usage(format!(
            "cannot create output directory {}: {e}",
            out.out.display()
        ))
    })?;
    Ok(out.out.clone())
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> CmdResult<T> {
    require_file(path, what)?;
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{what} {}: {e}", path.display())))
}

fn circuit_params(path: Option<&Path>) -> CmdResult<CircuitParams> {
    let c = match path {
        Some(p) => load_json::<CircuitParams>(p, "circuit config")?,
        None => CircuitParams::default(),
    };
    c.validate()?;
    Ok(c)
}

fn energy_params(path: Option<&Path>, circuit: &CircuitParams) -> CmdResult<EnergyParams> {
    let e = match path {
        Some(p) => load_json::<EnergyParams>(p, "energy config")?,
        None => EnergyParams::from_circuit(circuit),
    };
    e.validate()?;
    Ok(e)
}

/// Resolves a dataset path without reading it.
fn dataset_source(
    data: &Path,
    split: &str,
    threshold: f64,
    presentation: Presentation,
    limit: Option<usize>,
) -> CmdResult<DatasetSource> {
    let source = if data.is_dir() {
        let s = DatasetSource::idx_dir(data, split, threshold, presentation);
        if let DatasetSource::Idx { images, labels, .. } = &s {
            require_file(images, "image file")?;
            require_file(labels, "label file")?;
        }
        s
    } else {
        require_file(data, "dataset")?;
        let name = data
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default();
        if name.contains("images-idx3") {
            let labels = data.with_file_name(name.replace("images-idx3", "labels-idx1"));
            require_file(&labels, "label file")?;
            DatasetSource::Idx {
                images: data.to_path_buf(),
                labels,
                threshold,
                presentation,
                limit: None,
            }
        } else {
            DatasetSource::Csv {
                path: data.to_path_buf(),
                limit: None,
            }
        }
    };
    Ok(source.with_limit(limit))
}

fn load_dataset(source: &DatasetSource) -> CmdResult<Dataset> {
    let data = source.load()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset.into());
    }
    Ok(data)
}

/// `a,b,c` and inclusive ranges `lo:hi`.
fn parse_list(text: &str) -> CmdResult<Vec<u32>> {
    let bad = || Failure::Usage(format!("cannot parse list {text:?}"));
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item.split_once(':') {
            Some((lo, hi)) => {
                let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
                let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
                out.extend(lo..=hi);
            }
            None => out.push(item.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(Failure::Usage(format!("empty range {text:?}")));
    }
    Ok(out)
}
