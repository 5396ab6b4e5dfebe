// SPDX-License-Identifier: MIT OR Apache-2.0

//! Two-stage change point localization.
//!
//! Stage I runs greedy seeded binary segmentation on the CUSUM inner-product
//! statistic of two independent samples; Stage II re-localizes every
//! candidate inside its neighbourhood with the low-rank refined scan.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lowrank::{HpcaConfig, TuckerRanks};
use crate::scalar::Scalar;
use crate::scan::{refined_scan_profile, seeded_intervals, CrossGram, SeededInterval};
use crate::tensor::TensorSeries;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub c_tau1: f64,
    pub c_j: f64,
    /// `None` means [`TuckerRanks::default_for`] the series shape.
    pub ranks: Option<TuckerRanks>,
    pub hpca: HpcaConfig,
    pub threshold_override: Option<f64>,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            c_tau1: 0.1,
            c_j: 1.0,
            ranks: None,
            hpca: HpcaConfig::default(),
            threshold_override: None,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_tau1 > 0.0 && self.c_tau1.is_finite()) {
            return Err(Error::arg(format!("c_tau1 must be positive, got {}", self.c_tau1)));
        }
        if !(self.c_j > 0.0 && self.c_j.is_finite()) {
            return Err(Error::arg(format!("c_J must be positive, got {}", self.c_j)));
        }
        if let Some(t) = self.threshold_override {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::arg(format!("threshold override must be finite and >= 0, got {t}")));
            }
        }
        self.hpca.validate()
    }

    /// `tau = c_tau1 * n * sqrt(L) * ln(T)^{3/2}` unless overridden.
    pub fn threshold(&self, n: usize, layers: usize, horizon: usize) -> f64 {
        self.threshold_override.unwrap_or_else(|| {
            self.c_tau1 * n as f64 * (layers as f64).sqrt() * (horizon as f64).ln().powf(1.5)
        })
    }

    pub fn ranks_for(&self, dims: (usize, usize, usize)) -> TuckerRanks {
        self.ranks.unwrap_or_else(|| TuckerRanks::default_for(dims))
    }
}

/// A Stage-I detection.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Candidate {
    pub time: usize,
    /// Seeded interval `(start, end]` that produced the detection.
    pub interval: (usize, usize),
    /// The trimmed window actually scanned.
    pub scanned: (usize, usize),
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateSet {
    pub horizon: usize,
    pub threshold: f64,
    /// Sorted by time.
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn times(&self) -> Vec<usize> {
        self.candidates.iter().map(|c| c.time).collect()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

#[derive(Clone, Copy, Debug)]
struct IntervalScore {
    interval: SeededInterval,
    scanned: (usize, usize),
    /// `-1` for windows too short to scan.
    score: f64,
    arg: usize,
}

/// Stage-I scores of every seeded interval. Scores do not depend on the
/// threshold, so one set can be segmented at several thresholds.
#[derive(Clone, Debug)]
pub struct StageOneScores {
    horizon: usize,
    scores: Vec<IntervalScore>,
}

impl StageOneScores {
    pub fn compute<S: Scalar>(a: &TensorSeries<S>, b: &TensorSeries<S>, c_j: f64) -> Result<Self> {
        a.check_compatible(b)?;
        let horizon = a.len();
        if horizon < 4 {
            return Err(Error::arg(format!("detection needs T >= 4, got {horizon}")));
        }
        let family = seeded_intervals(horizon, c_j)?;
        let gram = CrossGram::new(a, b)?;
        let scores = family
            .intervals
            .iter()
            .map(|iv| {
                let (alpha, beta) = iv.trimmed();
                if beta < alpha + 2 {
                    return Ok(IntervalScore {
                        interval: *iv,
                        scanned: (alpha, beta),
                        score: -1.0,
                        arg: 0,
                    });
                }
                let (arg, score) = gram.profile(alpha, beta)?.argmax_abs().expect("nonempty profile");
                Ok(IntervalScore {
                    interval: *iv,
                    scanned: (alpha, beta),
                    score: score.as_f64(),
                    arg,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { horizon, scores })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Greedy binary segmentation at threshold `tau`.
    pub fn segment(&self, tau: f64) -> CandidateSet {
        let mut found = Vec::new();
        let mut stack = vec![(0usize, self.horizon)];
        while let Some((s, e)) = stack.pop() {
            let mut best: Option<&IntervalScore> = None;
            for sc in &self.scores {
                if !sc.interval.within(s, e) || sc.score < 0.0 {
                    continue;
                }
                if best.is_none_or(|b| sc.score > b.score) {
                    best = Some(sc);
                }
            }
            let Some(best) = best else { continue };
            if best.score > tau {
                found.push(Candidate {
                    time: best.arg,
                    interval: (best.interval.start, best.interval.end),
                    scanned: best.scanned,
                    score: best.score,
                });
                stack.push((best.arg, e));
                stack.push((s, best.arg));
            }
        }
        found.sort_by_key(|c| c.time);
        CandidateSet {
            horizon: self.horizon,
            threshold: tau,
            candidates: found,
        }
    }
}

/// Stage I: seeded binary segmentation.
pub fn sbs_detect<S: Scalar>(a: &TensorSeries<S>, b: &TensorSeries<S>, cfg: &DetectConfig) -> Result<CandidateSet> {
    cfg.validate()?;
    let scores = StageOneScores::compute(a, b, cfg.c_j)?;
    let (n, _, layers) = a.shape();
    Ok(scores.segment(cfg.threshold(n, layers, a.len())))
}

/// Stage-II result for one candidate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Refinement {
    pub candidate: usize,
    /// Refinement window `(s_k, e_k]`.
    pub window: (usize, usize),
    pub eta_tilde: usize,
    /// The refined scan was unusable (vanishing low-rank CUSUM or a window
    /// too short to scan) and the candidate was kept as is.
    pub degenerate: bool,
    pub rank_deficient: bool,
}

/// Stage II: local refinement of every candidate.
pub fn local_refine<S: Scalar>(
    a_prime: &TensorSeries<S>,
    b_prime: &TensorSeries<S>,
    candidates: &CandidateSet,
    cfg: &DetectConfig,
) -> Result<Vec<Refinement>> {
    cfg.validate()?;
    a_prime.check_compatible(b_prime)?;
    let horizon = a_prime.len();
    if candidates.horizon != horizon {
        return Err(Error::dims(format!(
            "candidates were found on T = {}, series has T = {horizon}",
            candidates.horizon
        )));
    }
    let times = candidates.times();
    if times.windows(2).any(|w| w[0] >= w[1]) || times.iter().any(|&t| t == 0 || t >= horizon) {
        return Err(Error::arg("candidates must be strictly increasing inside (0, T)"));
    }
    let ranks = cfg.ranks_for(a_prime.shape());
    let mut out = Vec::with_capacity(times.len());
    for (k, &b) in times.iter().enumerate() {
        let prev = if k == 0 { 0 } else { times[k - 1] };
        let next = times.get(k + 1).copied().unwrap_or(horizon);
        let s = (prev + b) / 2;
        let e = (b + next).div_ceil(2);
        let mut refinement = Refinement {
            candidate: b,
            window: (s, e),
            eta_tilde: b,
            degenerate: true,
            rank_deficient: false,
        };
        if e - s >= 3 {
            let scan = refined_scan_profile(a_prime, b_prime, s, b, e, ranks, &cfg.hpca)?;
            refinement.rank_deficient = scan.rank_deficient;
            if !scan.degenerate {
                let (t, _) = scan.profile.argmax().expect("nonempty profile");
                refinement.eta_tilde = t;
                refinement.degenerate = false;
            }
        }
        out.push(refinement);
    }
    Ok(out)
}

/// Full two-stage output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Detection {
    pub candidates: CandidateSet,
    pub refinements: Vec<Refinement>,
}

impl Detection {
    /// The refined change points `eta~_k`, increasing.
    pub fn change_points(&self) -> Vec<usize> {
        self.refinements.iter().map(|r| r.eta_tilde).collect()
    }
}

/// Runs Stage I on `(a, b)` and Stage II on `(a2, b2)`, falling back to
/// `(a, b)` for Stage II when the second pair is not supplied.
pub fn detect<S: Scalar>(
    a: &TensorSeries<S>,
    b: &TensorSeries<S>,
    a2: Option<&TensorSeries<S>>,
    b2: Option<&TensorSeries<S>>,
    cfg: &DetectConfig,
) -> Result<Detection> {
    let scores = StageOneScores::compute(a, b, cfg.c_j)?;
    detect_with_scores(&scores, a, b, a2, b2, cfg)
}

/// [`detect`] with precomputed Stage-I scores (shared across thresholds).
pub fn detect_with_scores<S: Scalar>(
    scores: &StageOneScores,
    a: &TensorSeries<S>,
    b: &TensorSeries<S>,
    a2: Option<&TensorSeries<S>>,
    b2: Option<&TensorSeries<S>>,
    cfg: &DetectConfig,
) -> Result<Detection> {
    cfg.validate()?;
    a.check_compatible(b)?;
    if scores.horizon() != a.len() {
        return Err(Error::dims("stage-one scores were computed on a different horizon"));
    }
    let (a2, b2) = match (a2, b2) {
        (Some(x), Some(y)) => (x, y),
        (None, None) => (a, b),
        _ => return Err(Error::arg("supply both refinement series or neither")),
    };
    a.check_compatible(a2)?;
    let (n, _, layers) = a.shape();
    let candidates = scores.segment(cfg.threshold(n, layers, a.len()));
    let refinements = if candidates.is_empty() {
        Vec::new()
    } else {
        local_refine(a2, b2, &candidates, cfg)?
    };
    Ok(Detection { candidates, refinements })
}

/// A series split into odd and even time points.
#[derive(Clone, Debug)]
pub struct SplitSeries<S> {
    /// Snapshots at original times 1, 3, 5, ...
    pub odd: TensorSeries<S>,
    /// Snapshots at original times 2, 4, 6, ...
    pub even: TensorSeries<S>,
    /// Set when `T` is odd and the last snapshot was discarded.
    pub dropped_last: bool,
}

impl<S> SplitSeries<S> {
    /// Maps a time of the half-length series back to original time `2 t'`.
    pub fn to_original(&self, t: usize) -> usize {
        2 * t
    }
}

/// Splits one series into two half-length series for the two-sample statistics.
pub fn split_series<S: Scalar>(x: &TensorSeries<S>) -> Result<SplitSeries<S>> {
    if x.len() < 4 {
        return Err(Error::arg(format!("splitting needs T >= 4, got {}", x.len())));
    }
    let half = x.len() / 2;
    let snaps = x.snapshots();
    let odd = (0..half).map(|k| snaps[2 * k].clone()).collect();
    let even = (0..half).map(|k| snaps[2 * k + 1].clone()).collect();
    Ok(SplitSeries {
        odd: TensorSeries::new(odd)?,
        even: TensorSeries::new(even)?,
        dropped_last: x.len() % 2 == 1,
    })
}
