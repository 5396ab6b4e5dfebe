// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded intervals, CUSUM transforms and the two scan statistics.
//!
//! Times follow the usual change-point convention: a series has snapshots
//! `1..=T` and window boundaries are integers in `0..=T`, so `(s, e]` covers
//! snapshots `s+1..=e`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lowrank::{thpca, HpcaConfig, TuckerRanks};
use crate::scalar::Scalar;
use crate::tensor::{dot, Tensor3, TensorSeries};

/// Half-open interval `(start, end]` from scale `scale` of the seeded family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct SeededInterval {
    pub start: usize,
    pub end: usize,
    pub scale: usize,
}

impl SeededInterval {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Whether `(start, end]` lies inside `(s, e]`.
    pub fn within(&self, s: usize, e: usize) -> bool {
        s <= self.start && self.end <= e
    }

    /// Shrinks both ends by `floor(len / 64)`; the interval used for scoring.
    pub fn trimmed(&self) -> (usize, usize) {
        let cut = self.len() / 64;
        (self.start + cut, self.end - cut)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SeededIntervalSet {
    pub horizon: usize,
    pub c_j: f64,
    /// Number of scales `J = ceil(c_J log2 T)`.
    pub depth: usize,
    /// Deduplicated, ordered by scale then left endpoint.
    pub intervals: Vec<SeededInterval>,
}

impl SeededIntervalSet {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn scale(&self, j: usize) -> impl Iterator<Item = &SeededInterval> {
        self.intervals.iter().filter(move |iv| iv.scale == j)
    }
}

/// Multiscale seeded intervals on `(0, T]`.
///
/// Scale `j` contributes `(floor((i-1) T / 2^j), ceil((i+1) T / 2^j)]` for
/// `i = 1..2^j - 1`; right ends are clamped to `T`, empty and repeated
/// intervals dropped (the first occurrence wins).
pub fn seeded_intervals(horizon: usize, c_j: f64) -> Result<SeededIntervalSet> {
    if horizon < 2 {
        return Err(Error::arg(format!("seeded intervals need T >= 2, got {horizon}")));
    }
    if !(c_j > 0.0 && c_j.is_finite()) {
        return Err(Error::arg(format!("c_J must be positive and finite, got {c_j}")));
    }
    // guard against log2 rounding pushing an exact integer over the ceiling
    let depth = ((c_j * (horizon as f64).log2()) - 1e-12).ceil().max(1.0) as usize;
    let t = horizon as u128;
    let mut seen = std::collections::HashSet::new();
    let mut intervals = Vec::new();
    for j in 1..=depth {
        if j >= 120 {
            // 2^j would overflow; every deeper scale only repeats length-1 cells
            break;
        }
        let pow = 1u128 << j;
        let before = intervals.len();
        for i in 1..pow {
            let start = ((i - 1) * t / pow) as usize;
            let end = ((i + 1) * t).div_ceil(pow).min(t) as usize;
            if end <= start || !seen.insert((start, end)) {
                continue;
            }
            intervals.push(SeededInterval { start, end, scale: j });
        }
        // beyond 2^j >= 4T the scales only repeat cells of length 1 and 2
        if pow >= 4 * t && intervals.len() == before {
            break;
        }
    }
    Ok(SeededIntervalSet {
        horizon,
        c_j,
        depth,
        intervals,
    })
}

#[inline]
fn left_weight(s: usize, t: usize, e: usize) -> f64 {
    (((e - t) as f64) / (((e - s) * (t - s)) as f64)).sqrt()
}

#[inline]
fn right_weight(s: usize, t: usize, e: usize) -> f64 {
    (((t - s) as f64) / (((e - s) * (e - t)) as f64)).sqrt()
}

/// CUSUM weights over `u = s+1..=e` for a split at `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct CusumWeights<S> {
    pub s: usize,
    pub t: usize,
    pub e: usize,
    pub weights: Vec<S>,
}

impl<S: Scalar> CusumWeights<S> {
    /// Weight for 1-based time `u` in `(s, e]`.
    pub fn weight(&self, u: usize) -> S {
        assert!(u > self.s && u <= self.e);
        self.weights[u - self.s - 1]
    }
}

fn check_split(s: usize, t: usize, e: usize) -> Result<()> {
    if !(s < t && t < e) {
        return Err(Error::arg(format!("CUSUM needs s < t < e, got ({s}, {t}, {e})")));
    }
    Ok(())
}

pub fn cusum_weights<S: Scalar>(s: usize, t: usize, e: usize) -> Result<CusumWeights<S>> {
    check_split(s, t, e)?;
    let a = S::lit(left_weight(s, t, e));
    let b = -S::lit(right_weight(s, t, e));
    let weights = (s + 1..=e).map(|u| if u <= t { a } else { b }).collect();
    Ok(CusumWeights { s, t, e, weights })
}

/// CUSUM transform `sum_{u=s+1}^{e} w(u) X(u)`, evaluated as
/// `a (S(t) - S(s)) - b (S(e) - S(t))` with window sums.
pub fn cusum_transform<S: Scalar>(series: &TensorSeries<S>, s: usize, t: usize, e: usize) -> Result<Tensor3<S>> {
    check_split(s, t, e)?;
    if e > series.len() {
        return Err(Error::arg(format!("e = {e} exceeds series length {}", series.len())));
    }
    let a = S::lit(left_weight(s, t, e));
    let b = S::lit(right_weight(s, t, e));
    let mut out = series.window_sum(s, t)?;
    let after = series.window_sum(t, e)?;
    for (x, &y) in out.data_mut().iter_mut().zip(after.data()) {
        *x = a * *x - b * y;
    }
    Ok(out)
}

/// Scan statistic values for the interior times `first..first + values.len()`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Profile<S> {
    pub first: usize,
    pub values: Vec<S>,
}

impl<S: Scalar> Profile<S> {
    pub fn times(&self) -> std::ops::Range<usize> {
        self.first..self.first + self.values.len()
    }

    pub fn get(&self, t: usize) -> S {
        self.values[t - self.first]
    }

    /// `(t, value)` of the largest value; the smallest `t` wins ties.
    pub fn argmax(&self) -> Option<(usize, S)> {
        let mut best: Option<(usize, S)> = None;
        for (k, &v) in self.values.iter().enumerate() {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((self.first + k, v));
            }
        }
        best
    }

    /// Largest absolute value and its time; smallest `t` on ties.
    pub fn argmax_abs(&self) -> Option<(usize, S)> {
        let mut best: Option<(usize, S)> = None;
        for (k, &v) in self.values.iter().enumerate() {
            let v = v.abs();
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((self.first + k, v));
            }
        }
        best
    }
}

fn check_scan_window<S: Scalar>(a: &TensorSeries<S>, b: &TensorSeries<S>, alpha: usize, beta: usize) -> Result<()> {
    a.check_compatible(b)?;
    if beta > a.len() || beta < alpha + 2 {
        return Err(Error::arg(format!(
            "scan window ({alpha}, {beta}] must have length >= 2 and lie in (0, {}]",
            a.len()
        )));
    }
    Ok(())
}

/// `<A~(t), B~(t)>` over `t` in `(alpha, beta)` for a single window.
///
/// Runs one pass over the window, keeping the running partial sums
/// `X_A = S_A(t) - S_A(alpha)` and `X_B` together with the scalar products
/// needed to expand the CUSUM inner product; each step costs one pass over a
/// snapshot.
pub fn cusum_inner_profile<S: Scalar>(
    a: &TensorSeries<S>,
    b: &TensorSeries<S>,
    alpha: usize,
    beta: usize,
) -> Result<Profile<S>> {
    check_scan_window(a, b, alpha, beta)?;
    let da = a.window_sum(alpha, beta)?;
    let db = b.window_sum(alpha, beta)?;
    let dd = dot(da.data(), db.data());
    let mut xa = Tensor3::zeros(a.shape());
    let mut xb = Tensor3::zeros(a.shape());
    // <X_A, X_B>, <X_A, D_B>, <D_A, X_B>
    let (mut xx, mut xdb, mut dxb) = (S::zero(), S::zero(), S::zero());
    let mut values = Vec::with_capacity(beta - alpha - 1);
    for t in alpha + 1..beta {
        let at = a.get(t);
        let bt = b.get(t);
        xx += dot(xa.data(), bt.data()) + dot(at.data(), xb.data()) + dot(at.data(), bt.data());
        xdb += dot(at.data(), db.data());
        dxb += dot(da.data(), bt.data());
        xa.add_assign(at)?;
        xb.add_assign(bt)?;
        // with Y = D - X: <aX - bY, aX' - bY'> expanded over X and D
        let wa = S::lit(left_weight(alpha, t, beta));
        let wb = S::lit(right_weight(alpha, t, beta));
        let c = wa + wb;
        values.push(c * c * xx - c * wb * (xdb + dxb) + wb * wb * dd);
    }
    Ok(Profile {
        first: alpha + 1,
        values,
    })
}

/// Gram matrix of prefix sums `G(u, v) = <S_A(u), S_B(v)>`, `u, v = 0..=T`.
///
/// With it every CUSUM inner product `<A~^{s,e}(t), B~^{s,e}(t)>` costs O(1),
/// so scoring the whole seeded family is linear in its total length.
#[derive(Clone, Debug)]
pub struct CrossGram<S> {
    horizon: usize,
    g: Vec<S>,
}

impl<S: Scalar> CrossGram<S> {
    pub fn new(a: &TensorSeries<S>, b: &TensorSeries<S>) -> Result<Self> {
        a.check_compatible(b)?;
        let t = a.len();
        let raw = if a.is_binary() && b.is_binary() {
            binary_cross_inner(a, b)
        } else {
            let mut h = vec![S::zero(); t * t];
            for i in 0..t {
                for j in 0..t {
                    h[i * t + j] = dot(a.snapshots()[i].data(), b.snapshots()[j].data());
                }
            }
            h
        };
        let w = t + 1;
        let mut g = vec![S::zero(); w * w];
        for u in 1..=t {
            for v in 1..=t {
                g[u * w + v] = raw[(u - 1) * t + (v - 1)] + g[(u - 1) * w + v] + g[u * w + v - 1]
                    - g[(u - 1) * w + v - 1];
            }
        }
        Ok(Self { horizon: t, g })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    fn at(&self, u: usize, v: usize) -> S {
        self.g[u * (self.horizon + 1) + v]
    }

    /// `<S_A(u1) - S_A(u0), S_B(v1) - S_B(v0)>`.
    #[inline]
    fn block(&self, u0: usize, u1: usize, v0: usize, v1: usize) -> S {
        self.at(u1, v1) - self.at(u1, v0) - self.at(u0, v1) + self.at(u0, v0)
    }

    /// CUSUM inner product at split `t` of window `(s, e]`.
    pub fn cusum_inner(&self, s: usize, t: usize, e: usize) -> S {
        let wa = S::lit(left_weight(s, t, e));
        let wb = S::lit(right_weight(s, t, e));
        wa * wa * self.block(s, t, s, t) - wa * wb * (self.block(s, t, t, e) + self.block(t, e, s, t))
            + wb * wb * self.block(t, e, t, e)
    }

    pub fn profile(&self, alpha: usize, beta: usize) -> Result<Profile<S>> {
        if beta > self.horizon || beta < alpha + 2 {
            return Err(Error::arg(format!(
                "scan window ({alpha}, {beta}] must have length >= 2 and lie in (0, {}]",
                self.horizon
            )));
        }
        Ok(Profile {
            first: alpha + 1,
            values: (alpha + 1..beta).map(|t| self.cusum_inner(alpha, t, beta)).collect(),
        })
    }
}

/// `<A(i), B(j)>` for all pairs of 0/1 snapshots via packed popcounts.
fn binary_cross_inner<S: Scalar>(a: &TensorSeries<S>, b: &TensorSeries<S>) -> Vec<S> {
    fn pack<S: Scalar>(x: &Tensor3<S>) -> Vec<u64> {
        let mut words = vec![0u64; x.len().div_ceil(64)];
        for (k, &v) in x.data().iter().enumerate() {
            if v != S::zero() {
                words[k / 64] |= 1 << (k % 64);
            }
        }
        words
    }
    let pa: Vec<Vec<u64>> = a.snapshots().iter().map(pack).collect();
    let pb: Vec<Vec<u64>> = b.snapshots().iter().map(pack).collect();
    let t = a.len();
    let mut h = vec![S::zero(); t * t];
    for i in 0..t {
        for j in 0..t {
            let count: u32 = pa[i].iter().zip(&pb[j]).map(|(x, y)| (x & y).count_ones()).sum();
            h[i * t + j] = S::lit(count as f64);
        }
    }
    h
}

/// Output of [`refined_scan_profile`].
#[derive(Clone, Debug)]
pub struct RefinedProfile<S> {
    pub profile: Profile<S>,
    /// The low-rank CUSUM estimate vanished; the profile is identically zero.
    pub degenerate: bool,
    pub rank_deficient: bool,
}

/// Refined scan statistic `|<P^/||P^||_F, A'~^{s,e}(t)>|` for `t` in `(s, e)`.
///
/// `P^` is the truncated low-rank estimate of the CUSUM of `b_prime` at the
/// candidate `b`, clipped to `+-sqrt((e-b)(b-s)/(e-s))`.
pub fn refined_scan_profile<S: Scalar>(
    a_prime: &TensorSeries<S>,
    b_prime: &TensorSeries<S>,
    s: usize,
    b: usize,
    e: usize,
    ranks: TuckerRanks,
    cfg: &HpcaConfig,
) -> Result<RefinedProfile<S>> {
    a_prime.check_compatible(b_prime)?;
    if !(s < b && b < e) || e > a_prime.len() {
        return Err(Error::arg(format!(
            "refinement needs s < b < e <= T, got ({s}, {b}, {e}) with T = {}",
            a_prime.len()
        )));
    }
    if e - s < 3 {
        return Err(Error::arg(format!("refinement window ({s}, {e}] is shorter than 3")));
    }
    let cusum = cusum_transform(b_prime, s, b, e)?;
    let tau = S::lit((((e - b) * (b - s)) as f64 / (e - s) as f64).sqrt());
    let est = thpca(&cusum, ranks, tau, tau, cfg)?;
    let norm = est.estimate.frob_norm();
    let n_interior = e - s - 1;
    if norm <= S::lit(1e-12) {
        return Ok(RefinedProfile {
            profile: Profile {
                first: s + 1,
                values: vec![S::zero(); n_interior],
            },
            degenerate: true,
            rank_deficient: est.any_rank_deficient(),
        });
    }
    let direction = est.estimate.scaled(S::one() / norm);
    // prefix sums of c(u) = <direction, A'(u)> over the window
    let mut prefix = Vec::with_capacity(e - s + 1);
    prefix.push(S::zero());
    for u in s + 1..=e {
        let c = dot(direction.data(), a_prime.get(u).data());
        prefix.push(*prefix.last().expect("nonempty") + c);
    }
    let total = prefix[e - s];
    let values = (s + 1..e)
        .map(|t| {
            let before = prefix[t - s];
            let wa = S::lit(left_weight(s, t, e));
            let wb = S::lit(right_weight(s, t, e));
            (wa * before - wb * (total - before)).abs()
        })
        .collect();
    Ok(RefinedProfile {
        profile: Profile { first: s + 1, values },
        degenerate: false,
        rank_deficient: est.any_rank_deficient(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(set: &SeededIntervalSet, j: usize) -> Vec<(usize, usize)> {
        set.scale(j).map(|iv| (iv.start, iv.end)).collect()
    }

    #[test]
    fn seeded_intervals_small_horizons() {
        let two = seeded_intervals(2, 1.0).unwrap();
        assert_eq!(two.depth, 1);
        assert_eq!(pairs(&two, 1), vec![(0, 2)]);

        let eight = seeded_intervals(8, 1.0).unwrap();
        assert_eq!(eight.depth, 3);
        assert_eq!(pairs(&eight, 1), vec![(0, 8)]);
        assert_eq!(pairs(&eight, 2), vec![(0, 4), (2, 6), (4, 8)]);
        assert_eq!(
            pairs(&eight, 3),
            vec![(0, 2), (1, 3), (2, 4), (3, 5), (4, 6), (5, 7), (6, 8)]
        );
        assert!(seeded_intervals(1, 1.0).is_err());
        assert!(seeded_intervals(10, 0.0).is_err());
    }

    #[test]
    fn trimming_only_bites_long_intervals() {
        let iv = SeededInterval { start: 3, end: 5, scale: 1 };
        assert_eq!(iv.trimmed(), (3, 5));
        let iv = SeededInterval { start: 0, end: 200, scale: 1 };
        assert_eq!(iv.trimmed(), (3, 197));
    }

    #[test]
    fn cusum_weight_examples() {
        let w = cusum_weights::<f64>(0, 2, 4).unwrap();
        assert_eq!(w.weights, vec![0.5, 0.5, -0.5, -0.5]);
        let w = cusum_weights::<f64>(0, 1, 3).unwrap();
        let want = [(2.0f64 / 3.0).sqrt(), -(1.0f64 / 6.0).sqrt(), -(1.0f64 / 6.0).sqrt()];
        for (got, want) in w.weights.iter().zip(want) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(w.weight(1), w.weights[0]);
        assert!(cusum_weights::<f64>(2, 2, 4).is_err());
        assert!(cusum_weights::<f64>(0, 4, 4).is_err());
    }

    #[test]
    fn profile_argmax_prefers_smallest_time() {
        let p = Profile {
            first: 3,
            values: vec![1.0, 2.0, 2.0, -5.0],
        };
        assert_eq!(p.argmax(), Some((4, 2.0)));
        assert_eq!(p.argmax_abs(), Some((6, 5.0)));
    }
}
