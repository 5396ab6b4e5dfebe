// SPDX-License-Identifier: MIT OR Apache-2.0

//! `mlnet-cpd`: simulate, detect, infer and benchmark change points in
//! dynamic multilayer networks.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use mlnet_cpd::config::CONFIG_ENV;
use mlnet_cpd::io::{read_edge_list, read_json, write_edge_list, write_json};
use mlnet_cpd::localize::split_series;
use mlnet_cpd::metrics::evaluate;
use mlnet_cpd::{bench, detect, infer, infer_detection, Error, Mode, RunConfig, Series};

#[derive(Parser)]
#[command(name = "mlnet-cpd", version, about = "Change point detection and inference for dynamic multilayer networks")]
struct Cli {
    /// Flat TOML run configuration; command-line flags override its values.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario as two edge lists plus its ground truth.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// Directory receiving a.csv, b.csv and truth.json.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Localize change points in one or two edge-list series.
    Detect {
        #[command(flatten)]
        inputs: InputArgs,
        #[command(flatten)]
        detect: DetectArgs,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Final estimates and confidence intervals for given or detected change points.
    Infer {
        #[command(flatten)]
        inputs: InputArgs,
        /// JSON file with a `change_points` array; detection runs when omitted.
        #[arg(long)]
        change_points: Option<PathBuf>,
        #[command(flatten)]
        detect: DetectArgs,
        #[command(flatten)]
        law: LawArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Monte-Carlo benchmark over simulated trials, written as CSV.
    Benchmark {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        detect: DetectArgs,
        #[command(flatten)]
        law: LawArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Also compute confidence intervals.
        #[arg(long)]
        inference: bool,
        /// Add a wall-time column (output is then not reproducible).
        #[arg(long)]
        timing: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Threshold-constant sweep on shared simulated trials, written as CSV.
    Sensitivity {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        detect: DetectArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated threshold constants.
        #[arg(long, value_delimiter = ',')]
        c_values: Option<Vec<f64>>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Compare an estimated change point file against a reference one.
    Metrics {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Scenario 1..=4, or 0 for the change-free block model.
    #[arg(long)]
    scenario: Option<u8>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "horizon", short = 'T')]
    horizon: Option<usize>,
    #[arg(long, short = 'L')]
    layers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct InputArgs {
    /// Edge list of the first sample.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Edge list of the second sample.
    #[arg(long)]
    input_b: Option<PathBuf>,
    /// Build both samples from `--input` by odd/even splitting.
    #[arg(long)]
    split: bool,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    c_tau1: Option<f64>,
    #[arg(long)]
    c_j: Option<f64>,
    /// Absolute Stage-I threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Tucker ranks as `r1,r2,r3`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    ranks: Option<Vec<usize>>,
    #[arg(long)]
    hpca_max_iterations: Option<usize>,
    #[arg(long)]
    hpca_tolerance: Option<f64>,
}

#[derive(Args)]
struct LawArgs {
    /// Monte-Carlo draws `B`.
    #[arg(long)]
    draws: Option<usize>,
    /// Limiting-law half-width `M` (default `T`).
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    trials: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl ModelArgs {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.scenario, self.scenario);
        set(&mut cfg.n, self.n);
        set(&mut cfg.horizon, self.horizon);
        set(&mut cfg.layers, self.layers);
        set(&mut cfg.seed, self.seed);
    }
}

impl InputArgs {
    fn apply(self, cfg: &mut RunConfig) {
        if self.input.is_some() {
            cfg.input = self.input;
        }
        if self.input_b.is_some() {
            cfg.input_b = self.input_b;
        }
        cfg.split |= self.split;
    }
}

impl DetectArgs {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.c_tau1, self.c_tau1);
        set(&mut cfg.c_j, self.c_j);
        if self.threshold.is_some() {
            cfg.threshold = self.threshold;
        }
        if let Some(r) = self.ranks {
            cfg.ranks = Some([r[0], r[1], r[2]]);
        }
        set(&mut cfg.hpca_max_iterations, self.hpca_max_iterations);
        set(&mut cfg.hpca_tolerance, self.hpca_tolerance);
    }
}

impl LawArgs {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.draws, self.draws);
        if self.m.is_some() {
            cfg.m = self.m;
        }
        set(&mut cfg.alpha, self.alpha);
    }
}

fn load_config(path: Option<&Path>) -> mlnet_cpd::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn sink(path: Option<&Path>) -> mlnet_cpd::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> mlnet_cpd::Result<()> {
    match path {
        Some(p) => write_json(p, value),
        None => {
            let mut out = io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, value)?;
            writeln!(out)?;
            Ok(())
        }
    }
}

/// The two samples, and whether they came from splitting one series.
fn load_samples(cfg: &RunConfig) -> mlnet_cpd::Result<(Series, Series, bool)> {
    let a_path = cfg
        .input
        .as_deref()
        .ok_or_else(|| Error::Config("no input series given (use --input)".into()))?;
    let a: Series = read_edge_list(a_path, None)?;
    match (&cfg.input_b, cfg.split) {
        (Some(b_path), false) => Ok((a, read_edge_list(b_path, None)?, false)),
        (None, true) => {
            let parts = split_series(&a)?;
            Ok((parts.odd, parts.even, true))
        }
        (Some(_), true) => Err(Error::Config("give either --input-b or --split, not both".into())),
        (None, false) => Err(Error::Config("a second sample is required (use --input-b or --split)".into())),
    }
}

#[derive(serde::Serialize)]
struct DetectOutput<'a> {
    horizon: usize,
    change_points: Vec<usize>,
    split: bool,
    detection: &'a mlnet_cpd::Detection,
}

#[derive(Deserialize)]
struct ChangePoints {
    horizon: usize,
    change_points: Vec<usize>,
}

fn run(cli: Cli) -> mlnet_cpd::Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate { model, out_dir } => {
            cfg.mode = Mode::Simulate;
            model.apply(&mut cfg);
            cfg.validate()?;
            let data = bench::generate(&cfg, cfg.seed)?;
            std::fs::create_dir_all(&out_dir)?;
            write_edge_list(&out_dir.join("a.csv"), &data.a)?;
            write_edge_list(&out_dir.join("b.csv"), &data.b)?;
            write_json(&out_dir.join("truth.json"), &data.truth)?;
            if data.clipped > 0 {
                eprintln!("note: {} probabilities were clipped into [0, 1]", data.clipped);
            }
            for note in &data.truth.notes {
                eprintln!("note: {note}");
            }
        }
        Command::Detect { inputs, detect: d, output } => {
            cfg.mode = Mode::Detect;
            inputs.apply(&mut cfg);
            d.apply(&mut cfg);
            cfg.validate()?;
            let (a, b, split) = load_samples(&cfg)?;
            let found = detect(&a, &b, None, None, &cfg.detect_config())?;
            let (horizon, change_points) = if split {
                (2 * a.len(), found.change_points().iter().map(|&t| 2 * t).collect())
            } else {
                (a.len(), found.change_points())
            };
            let out = DetectOutput {
                horizon,
                change_points,
                split,
                detection: &found,
            };
            emit_json(output.as_deref(), &out)?;
        }
        Command::Infer {
            inputs,
            change_points,
            detect: d,
            law,
            seed,
            output,
        } => {
            cfg.mode = Mode::Infer;
            inputs.apply(&mut cfg);
            d.apply(&mut cfg);
            law.apply(&mut cfg);
            set(&mut cfg.seed, seed);
            cfg.validate()?;
            let (a, b, split) = load_samples(&cfg)?;
            let icfg = cfg.infer_config();
            let mut estimates = match change_points {
                Some(path) => {
                    let cps: ChangePoints = read_json(&path)?;
                    let scale = if split { 2 } else { 1 };
                    if cps.horizon / scale != a.len() {
                        return Err(Error::Validation(format!(
                            "change points refer to T = {}, series has T = {}",
                            cps.horizon,
                            a.len() * scale
                        )));
                    }
                    let eta: Vec<usize> = cps.change_points.iter().map(|&t| t / scale).collect();
                    infer(&a, &b, &eta, &icfg)?
                }
                None => {
                    let found = detect(&a, &b, None, None, &cfg.detect_config())?;
                    infer_detection(&a, &b, &found, &icfg)?
                }
            };
            if split {
                for e in &mut estimates {
                    e.b_k = e.b_k.map(|t| 2 * t);
                    e.eta_tilde *= 2;
                    e.eta_hat *= 2;
                    e.ci = (2.0 * e.ci.0, 2.0 * e.ci.1);
                }
            }
            emit_json(output.as_deref(), &estimates)?;
        }
        Command::Benchmark {
            model,
            detect: d,
            law,
            run,
            inference,
            timing,
            output,
        } => {
            cfg.mode = Mode::Benchmark;
            model.apply(&mut cfg);
            d.apply(&mut cfg);
            law.apply(&mut cfg);
            set(&mut cfg.trials, run.trials);
            cfg.inference |= inference;
            cfg.timing |= timing;
            cfg.validate()?;
            let out = output.or_else(|| cfg.output.clone());
            let mut w = sink(out.as_deref())?;
            bench::run_benchmark(&cfg, &mut w)?;
            w.flush()?;
        }
        Command::Sensitivity {
            model,
            detect: d,
            run,
            c_values,
            output,
        } => {
            cfg.mode = Mode::Sensitivity;
            model.apply(&mut cfg);
            d.apply(&mut cfg);
            set(&mut cfg.trials, run.trials);
            set(&mut cfg.c_values, c_values);
            cfg.validate()?;
            let out = output.or_else(|| cfg.output.clone());
            let mut w = sink(out.as_deref())?;
            bench::run_sensitivity(&cfg, &cfg.c_values, &mut w)?;
            w.flush()?;
        }
        Command::Metrics { truth, estimate, output } => {
            let truth: ChangePoints = read_json(&truth)?;
            let est: ChangePoints = read_json(&estimate)?;
            if truth.horizon != est.horizon {
                return Err(Error::Validation(format!(
                    "horizons differ: {} vs {}",
                    truth.horizon, est.horizon
                )));
            }
            let report = evaluate(&est.change_points, &truth.change_points, truth.horizon)?;
            emit_json(output.as_deref(), &report)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) | Error::Csv(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
