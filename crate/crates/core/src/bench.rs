// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte-Carlo benchmark and threshold-sensitivity sweeps with CSV output.
//!
//! Trial `i` draws its data from `derive_seed(seed, [scenario, i])`, so any
//! trial can be reproduced alone and the output does not depend on how the
//! trials are scheduled. Output is byte-identical across runs of the same
//! configuration unless the optional wall-time column is enabled.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Result;
use crate::inference::{infer_detection, ChangePointEstimate, InferConfig};
use crate::localize::{detect_with_scores, DetectConfig, StageOneScores};
use crate::metrics::{evaluate, MetricReport};
use crate::rng::derive_seed;
use crate::scalar::pairwise_sum;
use crate::simgen::{gen_null_msbm, gen_scenario, ScenarioData};

const INFER_KEY: u64 = 0x1F;

/// CSV rendering of a real number: `Inf` for infinities, empty for values
/// that do not apply.
fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x.is_infinite() {
        if x > 0.0 { "Inf" } else { "-Inf" }.to_string()
    } else {
        format!("{x}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn list(xs: &[usize]) -> String {
    xs.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    if xs.iter().any(|x| x.is_infinite()) {
        return f64::INFINITY;
    }
    pairwise_sum(xs) / xs.len() as f64
}

pub fn trial_seed(base: u64, scenario: u8, trial: usize) -> u64 {
    derive_seed(base, &[scenario as u64, trial as u64])
}

pub fn generate(cfg: &RunConfig, seed: u64) -> Result<ScenarioData<f64>> {
    if cfg.scenario == 0 {
        gen_null_msbm(cfg.n, cfg.horizon, cfg.layers, seed)
    } else {
        gen_scenario(cfg.scenario, cfg.n, cfg.horizon, cfg.layers, seed)
    }
}

/// Confidence-interval outcome of one trial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CiOutcome {
    /// True change points covered by the interval of their nearest estimate.
    pub hits: usize,
    pub total: usize,
    pub mean_length: Option<f64>,
    pub eta_hat: Vec<usize>,
}

/// Matches each true change point to its nearest final estimate (earlier
/// estimate on ties) and checks coverage.
pub fn ci_outcome<S>(estimates: &[ChangePointEstimate<S>], truth: &[usize]) -> CiOutcome {
    let hits = truth
        .iter()
        .filter(|&&c| {
            estimates
                .iter()
                .min_by_key(|e| (e.eta_hat.abs_diff(c), e.eta_hat))
                .is_some_and(|e| e.covers(c))
        })
        .count();
    let lengths: Vec<f64> = estimates.iter().map(|e| e.ci_length()).collect();
    CiOutcome {
        hits,
        total: truth.len(),
        mean_length: (!lengths.is_empty()).then(|| mean(&lengths)),
        eta_hat: estimates.iter().map(|e| e.eta_hat).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub eta_tilde: Vec<usize>,
    pub metrics: MetricReport,
    pub ci: Option<CiOutcome>,
    pub degenerate: bool,
    pub clipped: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// `Err` holds the failure message of a trial that did not complete.
    pub outcome: std::result::Result<TrialResult, String>,
}

/// Means over completed trials.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkSummary {
    pub trials: usize,
    pub completed: usize,
    pub mean_k_hat: f64,
    pub mean_count_error: f64,
    pub mean_hausdorff_est_truth: f64,
    pub mean_hausdorff_truth_est: f64,
    pub mean_coverage: f64,
    /// Fraction of trials with at least one detection.
    pub detection_rate: f64,
    /// Pooled fraction of true change points covered by their interval.
    pub ci_coverage: Option<f64>,
    pub ci_mean_length: Option<f64>,
}

impl BenchmarkSummary {
    fn from_records(records: &[TrialRecord]) -> Self {
        let ok: Vec<&TrialResult> = records.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
        let col = |f: &dyn Fn(&TrialResult) -> f64| mean(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
        let cis: Vec<&CiOutcome> = ok.iter().filter_map(|r| r.ci.as_ref()).collect();
        let (hits, total): (usize, usize) = cis.iter().fold((0, 0), |(h, t), c| (h + c.hits, t + c.total));
        let lengths: Vec<f64> = cis.iter().filter_map(|c| c.mean_length).collect();
        Self {
            trials: records.len(),
            completed: ok.len(),
            mean_k_hat: col(&|r| r.metrics.k_hat as f64),
            mean_count_error: col(&|r| r.metrics.count_error as f64),
            mean_hausdorff_est_truth: col(&|r| r.metrics.hausdorff_est_given_truth),
            mean_hausdorff_truth_est: col(&|r| r.metrics.hausdorff_truth_given_est),
            mean_coverage: col(&|r| r.metrics.coverage),
            detection_rate: col(&|r| if r.metrics.k_hat > 0 { 1.0 } else { 0.0 }),
            ci_coverage: (total > 0).then(|| hits as f64 / total as f64),
            ci_mean_length: (!lengths.is_empty()).then(|| mean(&lengths)),
        }
    }
}

fn run_trial(cfg: &RunConfig, detect: &DetectConfig, infer: &InferConfig, trial: usize, seed: u64) -> Result<TrialResult> {
    let start = Instant::now();
    let data = generate(cfg, seed)?;
    let scores = StageOneScores::compute(&data.a, &data.b, detect.c_j)?;
    let detection = detect_with_scores(&scores, &data.a, &data.b, None, None, detect)?;
    let eta_tilde = detection.change_points();
    let metrics = evaluate(&eta_tilde, &data.truth.change_points, cfg.horizon)?;
    let mut degenerate = detection.refinements.iter().any(|r| r.degenerate);
    let ci = if cfg.inference {
        let mut icfg = infer.clone();
        icfg.law.seed = derive_seed(seed, &[INFER_KEY]);
        let estimates = infer_detection(&data.a, &data.b, &detection, &icfg)?;
        degenerate |= estimates.iter().any(|e| e.degenerate);
        Some(ci_outcome(&estimates, &data.truth.change_points))
    } else {
        None
    };
    Ok(TrialResult {
        trial,
        seed,
        eta_tilde,
        metrics,
        ci,
        degenerate,
        clipped: data.clipped,
        seconds: start.elapsed().as_secs_f64(),
    })
}

const BENCH_HEADER: [&str; 16] = [
    "trial",
    "seed",
    "status",
    "k_true",
    "k_hat",
    "count_error",
    "hausdorff_est_truth",
    "hausdorff_truth_est",
    "coverage",
    "eta_tilde",
    "eta_hat",
    "ci_hits",
    "ci_total",
    "ci_coverage",
    "ci_mean_length",
    "clipped",
];

fn record_row(rec: &TrialRecord, timing: bool) -> Vec<String> {
    let mut row = vec![rec.trial.to_string(), rec.seed.to_string()];
    match &rec.outcome {
        Err(msg) => {
            row.push(format!("error: {msg}"));
            row.resize(BENCH_HEADER.len() + usize::from(timing), String::new());
        }
        Ok(r) => {
            let m = &r.metrics;
            row.push(if r.degenerate { "degenerate" } else { "ok" }.to_string());
            row.extend([
                m.k_true.to_string(),
                m.k_hat.to_string(),
                m.count_error.to_string(),
                num(m.hausdorff_est_given_truth),
                num(m.hausdorff_truth_given_est),
                num(m.coverage),
                list(&r.eta_tilde),
            ]);
            match &r.ci {
                Some(ci) => row.extend([
                    list(&ci.eta_hat),
                    ci.hits.to_string(),
                    ci.total.to_string(),
                    opt((ci.total > 0).then(|| ci.hits as f64 / ci.total as f64)),
                    opt(ci.mean_length),
                ]),
                None => row.extend(std::iter::repeat_n(String::new(), 5)),
            }
            row.push(r.clipped.to_string());
            if timing {
                row.push(num(r.seconds));
            }
        }
    }
    row
}

fn summary_row(s: &BenchmarkSummary, timing: bool) -> Vec<String> {
    let mut row = vec![
        "mean".to_string(),
        String::new(),
        format!("{}/{} completed", s.completed, s.trials),
        String::new(),
        num(s.mean_k_hat),
        num(s.mean_count_error),
        num(s.mean_hausdorff_est_truth),
        num(s.mean_hausdorff_truth_est),
        num(s.mean_coverage),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        opt(s.ci_coverage),
        opt(s.ci_mean_length),
        String::new(),
    ];
    if timing {
        row.push(String::new());
    }
    row
}

/// Result of [`run_benchmark`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub records: Vec<TrialRecord>,
    pub summary: BenchmarkSummary,
}

/// Runs `cfg.trials` independent trials of generate, detect, evaluate and
/// (with `cfg.inference`) infer. Failed trials are recorded, not fatal.
pub fn run_trials(cfg: &RunConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let detect = cfg.detect_config();
    let infer = cfg.infer_config();
    let records: Vec<TrialRecord> = (0..cfg.trials)
        .map(|trial| {
            let seed = trial_seed(cfg.seed, cfg.scenario, trial);
            TrialRecord {
                trial,
                seed,
                outcome: run_trial(cfg, &detect, &infer, trial, seed).map_err(|e| e.to_string()),
            }
        })
        .collect();
    let summary = BenchmarkSummary::from_records(&records);
    Ok(BenchmarkReport { records, summary })
}

/// Writes a benchmark report as CSV: one row per trial and a final `mean`
/// row (omitted when there are no trials).
pub fn write_benchmark_csv<W: Write>(report: &BenchmarkReport, timing: bool, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = BENCH_HEADER.to_vec();
    if timing {
        header.push("wall_seconds");
    }
    w.write_record(&header)?;
    for rec in &report.records {
        w.write_record(record_row(rec, timing))?;
    }
    if !report.records.is_empty() {
        w.write_record(summary_row(&report.summary, timing))?;
    }
    w.flush()?;
    Ok(())
}

/// [`run_trials`] followed by [`write_benchmark_csv`].
pub fn run_benchmark<W: Write>(cfg: &RunConfig, out: W) -> Result<BenchmarkReport> {
    let report = run_trials(cfg)?;
    write_benchmark_csv(&report, cfg.timing, out)?;
    Ok(report)
}

/// Means over trials for one threshold constant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityRow {
    pub c_tau1: f64,
    pub trials: usize,
    pub completed: usize,
    pub mean_k_hat: f64,
    pub mean_count_error: f64,
    pub mean_hausdorff_est_truth: f64,
    pub mean_hausdorff_truth_est: f64,
    pub mean_coverage: f64,
}

/// Repeats detection for every `c` in `c_values` on the same simulated
/// trials; Stage-I scores are computed once per trial and shared.
pub fn sensitivity_rows(cfg: &RunConfig, c_values: &[f64]) -> Result<Vec<SensitivityRow>> {
    cfg.validate()?;
    if c_values.is_empty() {
        return Err(crate::error::Error::arg("sensitivity needs at least one c value"));
    }
    let configs: Vec<DetectConfig> = c_values
        .iter()
        .map(|&c| {
            let d = DetectConfig {
                c_tau1: c,
                threshold_override: None,
                ..cfg.detect_config()
            };
            d.validate().map(|_| d)
        })
        .collect::<Result<_>>()?;
    let mut per_c: Vec<Vec<Option<MetricReport>>> = vec![Vec::with_capacity(cfg.trials); c_values.len()];
    for trial in 0..cfg.trials {
        let seed = trial_seed(cfg.seed, cfg.scenario, trial);
        let prepared = generate(cfg, seed)
            .and_then(|data| StageOneScores::compute(&data.a, &data.b, cfg.c_j).map(|s| (data, s)));
        for (slot, dcfg) in per_c.iter_mut().zip(&configs) {
            let report = prepared.as_ref().ok().and_then(|(data, scores)| {
                detect_with_scores(scores, &data.a, &data.b, None, None, dcfg)
                    .and_then(|det| evaluate(&det.change_points(), &data.truth.change_points, cfg.horizon))
                    .ok()
            });
            slot.push(report);
        }
    }
    Ok(c_values
        .iter()
        .zip(per_c)
        .map(|(&c, reports)| {
            let ok: Vec<MetricReport> = reports.into_iter().flatten().collect();
            let col = |f: &dyn Fn(&MetricReport) -> f64| mean(&ok.iter().map(f).collect::<Vec<_>>());
            SensitivityRow {
                c_tau1: c,
                trials: cfg.trials,
                completed: ok.len(),
                mean_k_hat: col(&|m| m.k_hat as f64),
                mean_count_error: col(&|m| m.count_error as f64),
                mean_hausdorff_est_truth: col(&|m| m.hausdorff_est_given_truth),
                mean_hausdorff_truth_est: col(&|m| m.hausdorff_truth_given_est),
                mean_coverage: col(&|m| m.coverage),
            }
        })
        .collect())
}

pub fn write_sensitivity_csv<W: Write>(rows: &[SensitivityRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "c_tau1",
        "trials",
        "completed",
        "mean_k_hat",
        "count_error",
        "hausdorff_est_truth",
        "hausdorff_truth_est",
        "coverage",
    ])?;
    for r in rows {
        w.write_record([
            num(r.c_tau1),
            r.trials.to_string(),
            r.completed.to_string(),
            num(r.mean_k_hat),
            num(r.mean_count_error),
            num(r.mean_hausdorff_est_truth),
            num(r.mean_hausdorff_truth_est),
            num(r.mean_coverage),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// [`sensitivity_rows`] followed by [`write_sensitivity_csv`].
pub fn run_sensitivity<W: Write>(cfg: &RunConfig, c_values: &[f64], out: W) -> Result<Vec<SensitivityRow>> {
    let rows = sensitivity_rows(cfg, c_values)?;
    write_sensitivity_csv(&rows, out)?;
    Ok(rows)
}
