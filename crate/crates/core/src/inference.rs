// SPDX-License-Identifier: MIT OR Apache-2.0

//! Final change point estimates and their confidence intervals.
//!
//! Given refined change points `eta~_k`, each is re-estimated by least
//! squares against low-rank segment means, the jump and its direction are
//! estimated from the neighbouring segment means, and a confidence interval
//! is read off Monte-Carlo quantiles of the argmin of a two-sided drifted
//! random walk that approximates the limiting law.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localize::Detection;
use crate::lowrank::{thpca, HpcaConfig, TuckerRanks};
use crate::rng::{derive_seed, keyed_rng};
use crate::scalar::Scalar;
use crate::tensor::{Tensor3, TensorSeries};

/// Jumps at or below this Frobenius norm are treated as zero.
pub const ZERO_JUMP: f64 = 1e-12;

const VANISHING: u64 = 11;
const NONVANISHING: u64 = 12;

/// Low-rank estimate of the mean probability tensor of one segment.
#[derive(Clone, Debug)]
pub struct SegmentEstimate<S> {
    /// Segment `(l, r]`.
    pub interval: (usize, usize),
    pub p_hat: Tensor3<S>,
    pub ranks: TuckerRanks,
    pub rank_deficient: bool,
}

/// Averages snapshots `l+1..=r` and denoises the mean with TH-PCA clipped
/// into `[0, 1]`.
pub fn segment_mean_estimate<S: Scalar>(
    b: &TensorSeries<S>,
    l: usize,
    r: usize,
    ranks: TuckerRanks,
    cfg: &HpcaConfig,
) -> Result<SegmentEstimate<S>> {
    if l >= r || r > b.len() {
        return Err(Error::arg(format!("segment ({l}, {r}] is empty or outside 0..={}", b.len())));
    }
    let mean = b.window_mean(l, r)?;
    let out = thpca(&mean, ranks, S::one(), S::zero(), cfg)?;
    let rank_deficient = out.any_rank_deficient();
    Ok(SegmentEstimate {
        interval: (l, r),
        p_hat: out.estimate,
        ranks,
        rank_deficient,
    })
}

/// Result of the least-squares re-estimation of one change point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FinalRefinement {
    pub eta_tilde: usize,
    pub eta_hat: usize,
    /// Search window `(s~_k, e~_k]`.
    pub window: (usize, usize),
    /// The neighbouring segment means coincide, so the objective is flat.
    pub degenerate: bool,
    /// The window held fewer than three points; `eta_hat = eta_tilde`.
    pub short_window: bool,
}

fn check_change_points(eta: &[usize], horizon: usize) -> Result<()> {
    if eta.windows(2).any(|w| w[0] >= w[1]) || eta.iter().any(|&t| t == 0 || t >= horizon) {
        return Err(Error::arg("change points must be strictly increasing inside (0, T)"));
    }
    Ok(())
}

fn boundaries(eta: &[usize], horizon: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(eta.len() + 2);
    out.push(0);
    out.extend_from_slice(eta);
    out.push(horizon);
    out
}

fn segment_estimates<S: Scalar>(
    b: &TensorSeries<S>,
    eta: &[usize],
    ranks: TuckerRanks,
    cfg: &HpcaConfig,
) -> Result<Vec<SegmentEstimate<S>>> {
    boundaries(eta, b.len())
        .windows(2)
        .map(|w| segment_mean_estimate(b, w[0], w[1], ranks, cfg))
        .collect()
}

/// Least-squares objective `Q(t)` for `t` in `s+1..e`, with
/// `Q(t) = sum_{u <= t} |A(u) - left|^2 + sum_{u > t} |A(u) - right|^2`
/// over `u` in `(s, e]`. Returns the first minimizer.
fn minimize_q<S: Scalar>(a: &TensorSeries<S>, left: &Tensor3<S>, right: &Tensor3<S>, s: usize, e: usize) -> Result<usize> {
    let mut lterms = Vec::with_capacity(e - s);
    let mut rterms = Vec::with_capacity(e - s);
    for u in s + 1..=e {
        lterms.push(a.get(u).dist_sq(left)?);
        rterms.push(a.get(u).dist_sq(right)?);
    }
    let mut best = (s + 1, S::infinity());
    for t in s + 1..e {
        let split = t - s;
        let q = lterms[..split].iter().fold(S::zero(), |acc, &x| acc + x)
            + rterms[split..].iter().fold(S::zero(), |acc, &x| acc + x);
        if q < best.1 {
            best = (t, q);
        }
    }
    Ok(best.0)
}

fn refine_with_segments<S: Scalar>(
    a: &TensorSeries<S>,
    eta_tilde: &[usize],
    segments: &[SegmentEstimate<S>],
) -> Result<Vec<FinalRefinement>> {
    let horizon = a.len();
    let bounds = boundaries(eta_tilde, horizon);
    let mut out = Vec::with_capacity(eta_tilde.len());
    for k in 1..=eta_tilde.len() {
        let s = (bounds[k - 1] + bounds[k]) / 2;
        let e = (bounds[k] + bounds[k + 1]).div_ceil(2);
        let (left, right) = (&segments[k - 1].p_hat, &segments[k].p_hat);
        let degenerate = left.dist_sq(right)?.as_f64().sqrt() <= ZERO_JUMP;
        let mut rec = FinalRefinement {
            eta_tilde: bounds[k],
            eta_hat: bounds[k],
            window: (s, e),
            degenerate,
            short_window: e - s < 3,
        };
        if !rec.short_window {
            rec.eta_hat = minimize_q(a, left, right, s, e)?;
        }
        out.push(rec);
    }
    Ok(out)
}

/// Re-estimates every `eta~_k` as the least-squares split between the
/// low-rank means (estimated from `b`) of its two neighbouring segments,
/// evaluated on `a`. Ties go to the earliest time.
pub fn final_refine<S: Scalar>(
    a: &TensorSeries<S>,
    b: &TensorSeries<S>,
    eta_tilde: &[usize],
    ranks: TuckerRanks,
    cfg: &HpcaConfig,
) -> Result<Vec<FinalRefinement>> {
    a.check_compatible(b)?;
    check_change_points(eta_tilde, a.len())?;
    let segments = segment_estimates(b, eta_tilde, ranks, cfg)?;
    refine_with_segments(a, eta_tilde, &segments)
}

/// Jump size `kappa = |right - left|_F` and unit direction `psi`; a jump at
/// or below [`ZERO_JUMP`] is reported as `(0, 0)`.
pub fn jump_estimate<S: Scalar>(left: &SegmentEstimate<S>, right: &SegmentEstimate<S>) -> Result<(f64, Tensor3<S>)> {
    jump_between(&left.p_hat, &right.p_hat)
}

fn jump_between<S: Scalar>(left: &Tensor3<S>, right: &Tensor3<S>) -> Result<(f64, Tensor3<S>)> {
    let diff = right.sub(left)?;
    let kappa = diff.frob_norm();
    if kappa.as_f64() <= ZERO_JUMP {
        return Ok((0.0, Tensor3::zeros(diff.dims())));
    }
    Ok((kappa.as_f64(), diff.scaled(S::one() / kappa)))
}

/// `sigma^2 = (r - l - 1)^{-1} sum_{t = l+1}^{r} <psi, A(t) - p_hat>^2`.
pub fn variance_estimate<S: Scalar>(
    a: &TensorSeries<S>,
    psi: &Tensor3<S>,
    l: usize,
    r: usize,
    p_hat: &Tensor3<S>,
) -> Result<f64> {
    if r < l + 2 || r > a.len() {
        return Err(Error::arg(format!("variance needs a segment of length >= 2 inside 0..={}, got ({l}, {r}]", a.len())));
    }
    let offset = psi.inner(p_hat)?.as_f64();
    let mut acc = 0.0;
    for t in l + 1..=r {
        let proj = psi.inner(a.get(t))?.as_f64() - offset;
        acc += proj * proj;
    }
    Ok(acc / (r - l - 1) as f64)
}

/// Monte-Carlo settings of the limiting-law simulation and the interval level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitLawConfig {
    /// Number of draws `B`.
    pub draws: usize,
    /// Half-width `M` of the search range; `None` means `M = T`.
    pub m: Option<f64>,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for LimitLawConfig {
    fn default() -> Self {
        Self {
            draws: 500,
            m: None,
            alpha: 0.05,
            seed: 0,
        }
    }
}

impl LimitLawConfig {
    pub fn validate(&self) -> Result<()> {
        if self.draws < 2 {
            return Err(Error::arg(format!("need B >= 2 draws, got {}", self.draws)));
        }
        if let Some(m) = self.m {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::arg(format!("M must be positive, got {m}")));
            }
        }
        check_alpha(self.alpha)
    }

    pub fn m_for(&self, horizon: usize) -> f64 {
        self.m.unwrap_or(horizon as f64)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::arg(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Running argmin with ties broken by smallest `|r|`, then smallest `r`.
#[derive(Clone, Copy)]
struct ArgMin {
    value: f64,
    at: i64,
}

impl ArgMin {
    fn offer(&mut self, value: f64, at: i64) {
        let better = value < self.value
            || (value == self.value && (at.unsigned_abs(), at) < (self.at.unsigned_abs(), self.at));
        if better {
            *self = ArgMin { value, at };
        }
    }
}

fn vanishing_draw(rng: &mut ChaCha8Rng, sigma_left: f64, sigma_right: f64, horizon: usize, left: u64, right: u64) -> f64 {
    let t = horizon as f64;
    let mut best = ArgMin { value: 0.0, at: 0 };
    let scale = 2.0 * sigma_right / t.sqrt();
    let mut walk = 0.0;
    for i in 1..=right {
        walk += rng.sample::<f64, _>(StandardNormal);
        let r = i as f64 / t;
        best.offer(r + scale * walk, i as i64);
    }
    let scale = 2.0 * sigma_left / t.sqrt();
    walk = 0.0;
    for i in 1..=left {
        walk += rng.sample::<f64, _>(StandardNormal);
        let r = i as f64 / t;
        best.offer(r + scale * walk, -(i as i64));
    }
    best.at as f64 / t
}

/// Draws `B` argmins of the two-sided process
/// `P(r) = |r| + 2 sigma / sqrt(T) * (partial sum of i.i.d. N(0, 1))` on the grid
/// `r = i / T`, `i in [-floor(TM), ceil(TM)]`, with `sigma_left` for `r < 0`
/// and `sigma_right` for `r > 0`.
pub fn simulate_vanishing_law(sigma_left: f64, sigma_right: f64, horizon: usize, cfg: &LimitLawConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if !(sigma_left >= 0.0 && sigma_right >= 0.0 && sigma_left.is_finite() && sigma_right.is_finite()) {
        return Err(Error::arg("standard deviations must be finite and nonnegative"));
    }
    if horizon == 0 {
        return Err(Error::arg("T must be positive"));
    }
    let span = horizon as f64 * cfg.m_for(horizon);
    let (left, right) = (span.floor() as u64, span.ceil() as u64);
    Ok((0..cfg.draws as u64)
        .map(|b| {
            let mut rng = keyed_rng(cfg.seed, &[VANISHING, b]);
            vanishing_draw(&mut rng, sigma_left, sigma_right, horizon, left, right)
        })
        .collect())
}

/// Draws `B` argmins of the two-sided random walk
/// `P(r) = |r| rho^2 + 2 rho W(r)` on integers `r in [-r_max, r_max]`, where
/// `W(r) = sum_{t=1}^{r} right(t)` for `r > 0` and `-sum_{t=r+1}^{0} left(t)`
/// for `r < 0`.
pub fn simulate_nonvanishing_law<L, R>(
    rho: f64,
    mut left: L,
    mut right: R,
    r_max: usize,
    draws: usize,
    seed: u64,
) -> Result<Vec<i64>>
where
    L: FnMut(&mut ChaCha8Rng) -> f64,
    R: FnMut(&mut ChaCha8Rng) -> f64,
{
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::arg(format!("rho must be positive, got {rho}")));
    }
    if r_max == 0 || draws < 2 {
        return Err(Error::arg("need r_max >= 1 and at least two draws"));
    }
    let drift = rho * rho;
    Ok((0..draws as u64)
        .map(|b| {
            let mut rng = keyed_rng(seed, &[NONVANISHING, b]);
            let mut best = ArgMin { value: 0.0, at: 0 };
            let mut walk = 0.0;
            for r in 1..=r_max as i64 {
                walk += right(&mut rng);
                best.offer(r as f64 * drift + 2.0 * rho * walk, r);
            }
            walk = 0.0;
            for r in 1..=r_max as i64 {
                walk += left(&mut rng);
                best.offer(r as f64 * drift - 2.0 * rho * walk, -r);
            }
            best.at
        })
        .collect())
}

/// Empirical `p`-quantile with linear interpolation between order statistics
/// (`h = (n - 1) p`).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `[eta - q_{1-alpha/2} / kappa^2, eta - q_{alpha/2} / kappa^2]`, or the
/// single point `eta` when `kappa = 0`.
pub fn confidence_interval(eta_hat: usize, kappa: f64, draws: &[f64], alpha: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if draws.is_empty() {
        return Err(Error::arg("confidence interval needs at least one draw"));
    }
    let eta = eta_hat as f64;
    if kappa == 0.0 {
        return Ok((eta, eta));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k2 = kappa * kappa;
    Ok((
        eta - quantile(&sorted, 1.0 - alpha / 2.0) / k2,
        eta - quantile(&sorted, alpha / 2.0) / k2,
    ))
}

/// Inference record for one change point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChangePointEstimate<S> {
    /// 1-based index of the change point.
    pub k: usize,
    /// Stage-I candidate, when known.
    pub b_k: Option<usize>,
    pub eta_tilde: usize,
    pub eta_hat: usize,
    pub kappa_hat: f64,
    pub psi_hat: Tensor3<S>,
    pub sigma_left: f64,
    pub sigma_right: f64,
    pub ci: (f64, f64),
    pub alpha: f64,
    /// Zero estimated jump: flat objective and a single-point interval.
    pub degenerate: bool,
    pub short_window: bool,
    /// A flanking segment was too short for a variance estimate; its
    /// standard deviation is reported as 0.
    pub short_segment: bool,
    pub rank_deficient: bool,
}

impl<S> ChangePointEstimate<S> {
    pub fn ci_length(&self) -> f64 {
        self.ci.1 - self.ci.0
    }

    pub fn covers(&self, t: usize) -> bool {
        self.ci.0 <= t as f64 && t as f64 <= self.ci.1
    }
}

/// Settings of [`infer`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InferConfig {
    /// `None` means [`TuckerRanks::default_for`] the series shape.
    pub ranks: Option<TuckerRanks>,
    pub hpca: HpcaConfig,
    pub law: LimitLawConfig,
}

fn segment_sigma<S: Scalar>(a: &TensorSeries<S>, psi: &Tensor3<S>, seg: &SegmentEstimate<S>) -> Result<Option<f64>> {
    let (l, r) = seg.interval;
    if r < l + 2 {
        return Ok(None);
    }
    Ok(Some(variance_estimate(a, psi, l, r, &seg.p_hat)?.sqrt()))
}

/// Final estimates, jumps, variances and confidence intervals for refined
/// change points `eta_tilde`. Segment means come from `b`, everything else
/// from `a`.
pub fn infer<S: Scalar>(
    a: &TensorSeries<S>,
    b: &TensorSeries<S>,
    eta_tilde: &[usize],
    cfg: &InferConfig,
) -> Result<Vec<ChangePointEstimate<S>>> {
    a.check_compatible(b)?;
    check_change_points(eta_tilde, a.len())?;
    cfg.hpca.validate()?;
    cfg.law.validate()?;
    if eta_tilde.is_empty() {
        return Ok(Vec::new());
    }
    let ranks = cfg.ranks.unwrap_or_else(|| TuckerRanks::default_for(a.shape()));
    let segments = segment_estimates(b, eta_tilde, ranks, &cfg.hpca)?;
    let refined = refine_with_segments(a, eta_tilde, &segments)?;
    let mut out = Vec::with_capacity(refined.len());
    for (idx, rec) in refined.into_iter().enumerate() {
        let (left, right) = (&segments[idx], &segments[idx + 1]);
        let (kappa, psi) = jump_estimate(left, right)?;
        let sl = segment_sigma(a, &psi, left)?;
        let sr = segment_sigma(a, &psi, right)?;
        let (sigma_left, sigma_right) = (sl.unwrap_or(0.0), sr.unwrap_or(0.0));
        let ci = if kappa == 0.0 {
            let eta = rec.eta_hat as f64;
            (eta, eta)
        } else {
            let law = LimitLawConfig {
                seed: derive_seed(cfg.law.seed, &[idx as u64 + 1]),
                ..cfg.law
            };
            let draws = simulate_vanishing_law(sigma_left, sigma_right, a.len(), &law)?;
            confidence_interval(rec.eta_hat, kappa, &draws, cfg.law.alpha)?
        };
        out.push(ChangePointEstimate {
            k: idx + 1,
            b_k: None,
            eta_tilde: rec.eta_tilde,
            eta_hat: rec.eta_hat,
            kappa_hat: kappa,
            psi_hat: psi,
            sigma_left,
            sigma_right,
            ci,
            alpha: cfg.law.alpha,
            degenerate: rec.degenerate || kappa == 0.0,
            short_window: rec.short_window,
            short_segment: sl.is_none() || sr.is_none(),
            rank_deficient: left.rank_deficient || right.rank_deficient,
        });
    }
    Ok(out)
}

/// [`infer`] on the output of [`crate::localize::detect`], recording the
/// Stage-I candidates.
pub fn infer_detection<S: Scalar>(
    a: &TensorSeries<S>,
    b: &TensorSeries<S>,
    detection: &Detection,
    cfg: &InferConfig,
) -> Result<Vec<ChangePointEstimate<S>>> {
    let mut out = infer(a, b, &detection.change_points(), cfg)?;
    for (rec, refinement) in out.iter_mut().zip(&detection.refinements) {
        rec.b_k = Some(refinement.candidate);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_series(p: &Tensor3<f64>, len: usize) -> TensorSeries<f64> {
        TensorSeries::new(vec![p.clone(); len]).unwrap()
    }

    #[test]
    fn quantile_interpolates() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&x, 0.0), 1.0);
        assert_eq!(quantile(&x, 1.0), 4.0);
        assert!((quantile(&x, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile(&x, 0.25) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn zero_jump_interval_is_a_point() {
        assert_eq!(confidence_interval(10, 0.0, &[1.0, -1.0], 0.05).unwrap(), (10.0, 10.0));
        assert!(confidence_interval(10, 1.0, &[1.0], 1.0).is_err());
        assert!(confidence_interval(10, 1.0, &[], 0.5).is_err());
    }

    #[test]
    fn hand_jump() {
        let left = Tensor3::<f64>::zeros((2, 2, 1));
        let right = Tensor3::from_fn((2, 2, 1), |_, _, _| 0.3);
        let (kappa, psi) = jump_between(&left, &right).unwrap();
        assert!((kappa - 0.6).abs() < 1e-12);
        assert!((psi.frob_norm() - 1.0).abs() < 1e-12);
        let (kappa, psi) = jump_between(&right, &right).unwrap();
        assert_eq!(kappa, 0.0);
        assert_eq!(psi.frob_norm(), 0.0);
    }

    #[test]
    fn hand_variance() {
        let psi = Tensor3::from_vec((1, 1, 1), vec![1.0]).unwrap();
        let p = Tensor3::from_vec((1, 1, 1), vec![0.5]).unwrap();
        let snaps = [1.5, -0.5, 2.5]
            .iter()
            .map(|&v| Tensor3::from_vec((1, 1, 1), vec![v]).unwrap())
            .collect();
        let a = TensorSeries::new(snaps).unwrap();
        assert!((variance_estimate(&a, &psi, 0, 3, &p).unwrap() - 3.0).abs() < 1e-12);
        assert!(variance_estimate(&a, &psi, 0, 1, &p).is_err());
        let a = constant_series(&p, 3);
        assert_eq!(variance_estimate(&a, &psi, 0, 3, &p).unwrap(), 0.0);
    }

    #[test]
    fn zero_variance_law_is_zero() {
        let cfg = LimitLawConfig {
            draws: 20,
            m: Some(5.0),
            ..Default::default()
        };
        let draws = simulate_vanishing_law(0.0, 0.0, 40, &cfg).unwrap();
        assert!(draws.iter().all(|&u| u == 0.0));
        let nv = simulate_nonvanishing_law(1.0, |_| 0.0, |_| 0.0, 10, 10, 1).unwrap();
        assert!(nv.iter().all(|&r| r == 0));
    }

    #[test]
    fn flat_objective_picks_first_point() {
        let p = Tensor3::from_fn((3, 3, 1), |_, _, _| 0.5);
        let a = constant_series(&p, 12);
        let out = final_refine(&a, &a, &[6], TuckerRanks::full((3, 3, 1)), &HpcaConfig::default()).unwrap();
        assert_eq!(out[0].window, (3, 9));
        assert_eq!(out[0].eta_hat, 4);
        assert!(out[0].degenerate);
    }

    #[test]
    fn empty_input_gives_empty_output() {
        let p = Tensor3::from_fn((2, 2, 1), |_, _, _| 0.5);
        let a = constant_series(&p, 6);
        assert!(infer(&a, &a, &[], &InferConfig::default()).unwrap().is_empty());
    }
}
