// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic multilayer networks: MRDPG sampling and the four benchmark
//! scenarios (a Dirichlet latent-position model and three multilayer
//! stochastic block models), plus a change-free block model for threshold
//! calibration.
//!
//! Every random stream is keyed by `(seed, purpose, index)`, so a trial can
//! be regenerated in isolation and the two returned series are independent
//! given the shared probability path.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::keyed_rng;
use crate::scalar::Scalar;
use crate::tensor::{Matrix, Tensor3, TensorSeries};

const LATENT: u64 = 1;
const WEIGHTS: u64 = 2;
const SEGMENT: u64 = 3;
const SAMPLE_A: u64 = 4;
const SAMPLE_B: u64 = 5;
const SAMPLE_ONE: u64 = 6;

/// Latent positions and per-layer weights of one MRDPG snapshot.
#[derive(Clone, Debug)]
pub struct MrdpgParams {
    /// `n x d` left latent positions.
    pub x: Matrix<f64>,
    /// `n x d` right latent positions for the directed variant; `None`
    /// samples an undirected graph (`i <= j`, mirrored).
    pub y: Option<Matrix<f64>>,
    /// One `d x d` weight matrix per layer.
    pub weights: Vec<Matrix<f64>>,
}

impl MrdpgParams {
    fn validate(&self) -> Result<()> {
        let (n, d) = (self.x.rows(), self.x.cols());
        if n == 0 || d == 0 || self.weights.is_empty() {
            return Err(Error::arg("MRDPG needs n >= 1, d >= 1 and at least one layer"));
        }
        if let Some(y) = &self.y {
            if (y.rows(), y.cols()) != (n, d) {
                return Err(Error::dims(format!("Y is {}x{}, expected {n}x{d}", y.rows(), y.cols())));
            }
        }
        if let Some(w) = self.weights.iter().find(|w| (w.rows(), w.cols()) != (d, d)) {
            return Err(Error::dims(format!("weight matrix is {}x{}, expected {d}x{d}", w.rows(), w.cols())));
        }
        Ok(())
    }

    /// `P[i, j, l] = x_i^T W_l y_j` clipped into `[0, 1]`, with the number of
    /// entries that needed clipping.
    pub fn probabilities(&self) -> Result<(Tensor3<f64>, usize)> {
        self.validate()?;
        let n = self.x.rows();
        let layers = self.weights.len();
        let right = self.y.as_ref().unwrap_or(&self.x).transpose();
        let mut p = Tensor3::zeros((n, n, layers));
        let mut clipped = 0;
        for (l, w) in self.weights.iter().enumerate() {
            let xw_y = self.x.matmul(w)?.matmul(&right)?;
            for i in 0..n {
                for j in 0..n {
                    let v = xw_y.data()[i * n + j];
                    let c = v.clamp(0.0, 1.0);
                    if c != v {
                        clipped += 1;
                    }
                    p.data_mut()[(i * n + j) * layers + l] = c;
                }
            }
        }
        Ok((p, clipped))
    }
}

/// One MRDPG draw.
#[derive(Clone, Debug)]
pub struct MrdpgSample<S> {
    pub adjacency: Tensor3<S>,
    pub clipped: usize,
}

pub fn sample_mrdpg<S: Scalar>(params: &MrdpgParams, seed: u64) -> Result<MrdpgSample<S>> {
    let (p, clipped) = params.probabilities()?;
    let mut rng = keyed_rng(seed, &[SAMPLE_ONE]);
    let adjacency = if params.y.is_none() {
        sample_symmetric(&p, &mut rng)
    } else {
        sample_bernoulli(&p, &mut rng)
    };
    Ok(MrdpgSample { adjacency, clipped })
}

/// Independent Bernoulli draw for every entry of `p`.
pub fn sample_bernoulli<S: Scalar, R: Rng>(p: &Tensor3<f64>, rng: &mut R) -> Tensor3<S> {
    let data = p
        .data()
        .iter()
        .map(|&q| if rng.random::<f64>() < q { S::one() } else { S::zero() })
        .collect();
    Tensor3::from_vec(p.dims(), data).expect("same dims")
}

fn sample_symmetric<S: Scalar, R: Rng>(p: &Tensor3<f64>, rng: &mut R) -> Tensor3<S> {
    let (n, _, layers) = p.dims();
    let mut out = Tensor3::zeros(p.dims());
    for l in 0..layers {
        for i in 0..n {
            for j in i..n {
                let q = p.data()[(i * n + j) * layers + l];
                let v = if rng.random::<f64>() < q { S::one() } else { S::zero() };
                out.data_mut()[(i * n + j) * layers + l] = v;
                out.data_mut()[(j * n + i) * layers + l] = v;
            }
        }
    }
    out
}

/// Parameters of one segment of a synthetic scenario.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentInfo {
    /// Segment `(start, end]`.
    pub start: usize,
    pub end: usize,
    pub communities: Option<usize>,
    pub reversed_layers: bool,
    pub rho: Option<f64>,
    pub delta: Option<u32>,
    /// Per-layer within-community probability (block models only).
    pub p_within: Vec<f64>,
    /// Per-layer between-community probability (block models only).
    pub p_between: Vec<f64>,
    /// Community sizes of the first layer when they differ from equal sizes.
    pub first_layer_sizes: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioTruth {
    /// Scenario id `1..=4`, or `0` for the change-free calibration model.
    pub scenario: u8,
    pub horizon: usize,
    pub change_points: Vec<usize>,
    pub segments: Vec<SegmentInfo>,
    pub notes: Vec<String>,
}

impl ScenarioTruth {
    pub fn k(&self) -> usize {
        self.change_points.len()
    }
}

/// Deterministic probability path `P(1..=T)`; snapshots sharing a
/// probability tensor share one entry of `tensors`.
#[derive(Clone, Debug)]
pub struct ProbabilityPath {
    pub tensors: Vec<Tensor3<f64>>,
    /// `index[t - 1]` selects the tensor used at time `t`.
    pub index: Vec<usize>,
    pub clipped: usize,
}

impl ProbabilityPath {
    pub fn at(&self, t: usize) -> &Tensor3<f64> {
        &self.tensors[self.index[t - 1]]
    }

    pub fn horizon(&self) -> usize {
        self.index.len()
    }

    /// Probability tensors as a series, one per time point.
    pub fn to_series(&self) -> Result<TensorSeries<f64>> {
        TensorSeries::new((1..=self.horizon()).map(|t| self.at(t).clone()).collect())
    }
}

/// Two independent samples from one scenario and its ground truth.
#[derive(Clone, Debug)]
pub struct ScenarioData<S> {
    pub a: TensorSeries<S>,
    pub b: TensorSeries<S>,
    pub truth: ScenarioTruth,
    /// Probability entries pulled back into `[0, 1]` before sampling.
    pub clipped: usize,
}

/// Change points of a scenario at its reference horizon `T = 200`.
fn reference_change_points(id: u8) -> &'static [usize] {
    match id {
        1 => &[70, 140],
        2 | 4 => &[20, 60, 80, 160, 180],
        3 => &[50, 100, 150],
        _ => &[],
    }
}

/// Change points for horizon `T`; scaled proportionally when `T != 200`.
pub fn scenario_change_points(id: u8, horizon: usize) -> Result<Vec<usize>> {
    if !(1..=4).contains(&id) {
        return Err(Error::arg(format!("scenario id must be 1..=4, got {id}")));
    }
    let cps: Vec<usize> = reference_change_points(id)
        .iter()
        .map(|&c| ((c * horizon) as f64 / 200.0).round() as usize)
        .collect();
    if cps.first().is_some_and(|&c| c == 0)
        || cps.last().is_some_and(|&c| c >= horizon)
        || cps.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::arg(format!("horizon T = {horizon} is too short for scenario {id}")));
    }
    Ok(cps)
}

fn segment_bounds(cps: &[usize], horizon: usize) -> Vec<(usize, usize)> {
    let mut bounds = Vec::with_capacity(cps.len() + 1);
    let mut prev = 0;
    for &c in cps.iter().chain(std::iter::once(&horizon)) {
        bounds.push((prev, c));
        prev = c;
    }
    bounds
}

/// Integer sizes proportional to `fractions`, summing to `n`, by the
/// largest-remainder rule (earlier blocks win ties).
pub fn largest_remainder(n: usize, fractions: &[f64]) -> Vec<usize> {
    let total: f64 = fractions.iter().sum();
    let quotas: Vec<f64> = fractions.iter().map(|f| f / total * n as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut rest = n - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &k in &order {
        if rest == 0 {
            break;
        }
        sizes[k] += 1;
        rest -= 1;
    }
    sizes
}

fn labels(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &m)| std::iter::repeat_n(c, m))
        .collect()
}

fn check_dims(n: usize, horizon: usize, layers: usize) -> Result<()> {
    if n == 0 || layers == 0 {
        return Err(Error::arg(format!("need n >= 1 and L >= 1, got n = {n}, L = {layers}")));
    }
    if horizon < 4 {
        return Err(Error::arg(format!("need T >= 4, got {horizon}")));
    }
    Ok(())
}

/// Block-model probability tensor: `p_within[l]` inside a community of
/// layer `l`, `p_between[l]` otherwise.
fn msbm_tensor(n: usize, per_layer_labels: &[Vec<usize>], p_within: &[f64], p_between: &[f64]) -> Tensor3<f64> {
    let layers = p_within.len();
    Tensor3::from_fn((n, n, layers), |i, j, l| {
        let lab = &per_layer_labels[l];
        if lab[i] == lab[j] {
            p_within[l]
        } else {
            p_between[l]
        }
    })
}

/// Layer index used when drawing parameters; reversal maps `l -> L + 1 - l`.
fn drawn_layer(l: usize, layers: usize, reversed: bool) -> usize {
    if reversed {
        layers + 1 - l
    } else {
        l
    }
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// `p1, p2` for the default block models at 1-based layer `l`.
fn draw_block_probs<R: Rng>(rng: &mut R, l: usize, layers: usize) -> (f64, f64) {
    let big_l = layers as f64;
    let lf = l as f64;
    let p1 = uniform(rng, (3.0 * big_l + lf - 1.0) / (4.0 * big_l), (3.0 * big_l + lf) / (4.0 * big_l));
    let p2 = uniform(rng, (2.0 * big_l + lf - 1.0) / (4.0 * big_l), (2.0 * big_l + lf) / (4.0 * big_l));
    (p1, p2)
}

fn dirichlet_rows<R: Rng>(rng: &mut R, n: usize, d: usize) -> Matrix<f64> {
    let mut m = Matrix::zeros(n, d);
    for i in 0..n {
        let draws: Vec<f64> = (0..d).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        for (k, v) in draws.into_iter().enumerate() {
            m.data_mut()[i * d + k] = v / total;
        }
    }
    m
}

const DDM_LATENT_DIM: usize = 5;

fn ddm_path(n: usize, horizon: usize, layers: usize, seed: u64, cps: &[usize]) -> Result<(ProbabilityPath, Vec<SegmentInfo>)> {
    let mut rng = keyed_rng(seed, &[LATENT]);
    let x = dirichlet_rows(&mut rng, n, DDM_LATENT_DIM);
    let y = dirichlet_rows(&mut rng, n, DDM_LATENT_DIM);
    let bounds = segment_bounds(cps, horizon);
    let seg_of = |t: usize| bounds.iter().position(|&(s, e)| s < t && t <= e).expect("t in (0, T]");
    let big_l = layers as f64;
    let mut tensors = Vec::with_capacity(horizon);
    let mut clipped = 0;
    for t in 1..=horizon {
        let middle = seg_of(t) == 1;
        let rho = if middle { 3.0 } else { 2.0 };
        let mut wrng = keyed_rng(seed, &[WEIGHTS, t as u64]);
        let weights = (1..=layers)
            .map(|l| {
                let lp = drawn_layer(l, layers, middle) as f64;
                let lo = (rho * big_l + lp) / (4.0 * big_l);
                let hi = (rho * big_l + lp + 1.0) / (4.0 * big_l);
                Matrix::from_fn(DDM_LATENT_DIM, DDM_LATENT_DIM, |_, _| uniform(&mut wrng, lo, hi))
            })
            .collect();
        let params = MrdpgParams {
            x: x.clone(),
            y: Some(y.clone()),
            weights,
        };
        let (p, c) = params.probabilities()?;
        clipped += c;
        tensors.push(p);
    }
    let segments = bounds
        .iter()
        .enumerate()
        .map(|(k, &(start, end))| SegmentInfo {
            start,
            end,
            communities: None,
            reversed_layers: k == 1,
            rho: Some(if k == 1 { 3.0 } else { 2.0 }),
            delta: None,
            p_within: vec![],
            p_between: vec![],
            first_layer_sizes: None,
        })
        .collect();
    Ok((
        ProbabilityPath {
            tensors,
            index: (0..horizon).collect(),
            clipped,
        },
        segments,
    ))
}

struct BlockSegment {
    communities: usize,
    reversed: bool,
    delta: Option<u32>,
    first_layer: Option<Vec<f64>>,
    /// Stream index for the parameter draw; equal keys share parameters.
    param_key: u64,
}

fn msbm_path(
    n: usize,
    horizon: usize,
    layers: usize,
    seed: u64,
    cps: &[usize],
    plan: &[BlockSegment],
    notes: &mut Vec<String>,
) -> (ProbabilityPath, Vec<SegmentInfo>) {
    let bounds = segment_bounds(cps, horizon);
    let mut tensors = Vec::with_capacity(plan.len());
    let mut segments = Vec::with_capacity(plan.len());
    for (seg, &(start, end)) in plan.iter().zip(&bounds) {
        let mut rng = keyed_rng(seed, &[SEGMENT, seg.param_key]);
        let (p_within, p_between): (Vec<f64>, Vec<f64>) = (1..=layers)
            .map(|l| match seg.delta {
                Some(delta) => {
                    let shift = delta as f64 * 0.1;
                    let p1 = uniform(&mut rng, 0.5 * (0.21 + shift), 0.5 * (0.25 + shift));
                    let p2 = uniform(&mut rng, 0.21 + shift, 0.25 + shift);
                    (p1, p2)
                }
                None => draw_block_probs(&mut rng, drawn_layer(l, layers, seg.reversed), layers),
            })
            .unzip();
        let equal = vec![1.0; seg.communities];
        let equal_sizes = largest_remainder(n, &equal);
        if !n.is_multiple_of(seg.communities) {
            notes.push(format!(
                "segment ({start}, {end}]: {n} nodes split into {} communities of sizes {equal_sizes:?}",
                seg.communities
            ));
        }
        let first_sizes = seg.first_layer.as_ref().map(|f| {
            let sizes = largest_remainder(n, f);
            if f.iter().any(|x| (x * n as f64).fract() != 0.0) {
                notes.push(format!("segment ({start}, {end}]: first-layer sizes rounded to {sizes:?}"));
            }
            sizes
        });
        let per_layer: Vec<Vec<usize>> = (0..layers)
            .map(|l| match (&first_sizes, l) {
                (Some(sizes), 0) => labels(sizes),
                _ => labels(&equal_sizes),
            })
            .collect();
        tensors.push(msbm_tensor(n, &per_layer, &p_within, &p_between));
        segments.push(SegmentInfo {
            start,
            end,
            communities: Some(seg.communities),
            reversed_layers: seg.reversed,
            rho: None,
            delta: seg.delta,
            p_within,
            p_between,
            first_layer_sizes: first_sizes,
        });
    }
    let index = (1..=horizon)
        .map(|t| bounds.iter().position(|&(s, e)| s < t && t <= e).expect("t in (0, T]"))
        .collect();
    (
        ProbabilityPath {
            tensors,
            index,
            clipped: 0,
        },
        segments,
    )
}

fn block(communities: usize, reversed: bool, param_key: u64) -> BlockSegment {
    BlockSegment {
        communities,
        reversed,
        delta: None,
        first_layer: None,
        param_key,
    }
}

/// Probability path and truth of scenario `id` without sampling.
pub fn scenario_path(id: u8, n: usize, horizon: usize, layers: usize, seed: u64) -> Result<(ProbabilityPath, ScenarioTruth)> {
    check_dims(n, horizon, layers)?;
    let cps = scenario_change_points(id, horizon)?;
    let mut notes = Vec::new();
    let (path, segments) = match id {
        1 => ddm_path(n, horizon, layers, seed, &cps)?,
        2 => {
            let plan = [
                block(4, false, 0),
                block(2, false, 1),
                block(4, false, 2),
                block(4, true, 3),
                block(3, false, 4),
                block(4, false, 5),
            ];
            msbm_path(n, horizon, layers, seed, &cps, &plan, &mut notes)
        }
        3 => {
            // connection probabilities are shared by all segments; only the
            // first layer's community sizes move
            let profiles = [[0.3, 0.4, 0.3], [0.4, 0.3, 0.3], [0.5, 0.3, 0.2], [0.3, 0.4, 0.3]];
            let plan: Vec<BlockSegment> = profiles
                .iter()
                .map(|p| BlockSegment {
                    first_layer: Some(p.to_vec()),
                    ..block(3, false, 0)
                })
                .collect();
            msbm_path(n, horizon, layers, seed, &cps, &plan, &mut notes)
        }
        _ => {
            let deltas = [0, 1, 2, 1, 0, 1];
            let plan: Vec<BlockSegment> = deltas
                .iter()
                .enumerate()
                .map(|(k, &d)| BlockSegment {
                    delta: Some(d),
                    ..block(4, false, k as u64)
                })
                .collect();
            msbm_path(n, horizon, layers, seed, &cps, &plan, &mut notes)
        }
    };
    let truth = ScenarioTruth {
        scenario: id,
        horizon,
        change_points: cps,
        segments,
        notes,
    };
    Ok((path, truth))
}

fn sample_path<S: Scalar>(path: &ProbabilityPath, seed: u64, purpose: u64) -> Result<TensorSeries<S>> {
    TensorSeries::new(
        (1..=path.horizon())
            .map(|t| sample_bernoulli(path.at(t), &mut keyed_rng(seed, &[purpose, t as u64])))
            .collect(),
    )
}

fn sample_pair<S: Scalar>(path: ProbabilityPath, truth: ScenarioTruth, seed: u64) -> Result<ScenarioData<S>> {
    Ok(ScenarioData {
        a: sample_path(&path, seed, SAMPLE_A)?,
        b: sample_path(&path, seed, SAMPLE_B)?,
        truth,
        clipped: path.clipped,
    })
}

/// Generates scenario `id` (1..=4): two independent adjacency series that
/// share one probability path, and the ground truth.
pub fn gen_scenario<S: Scalar>(id: u8, n: usize, horizon: usize, layers: usize, seed: u64) -> Result<ScenarioData<S>> {
    let (path, truth) = scenario_path(id, n, horizon, layers, seed)?;
    sample_pair(path, truth, seed)
}

/// Change-free block model with four equal communities.
pub fn null_msbm_path(n: usize, horizon: usize, layers: usize, seed: u64) -> Result<(ProbabilityPath, ScenarioTruth)> {
    check_dims(n, horizon, layers)?;
    let mut notes = Vec::new();
    let (path, segments) = msbm_path(n, horizon, layers, seed, &[], &[block(4, false, 0)], &mut notes);
    Ok((
        path,
        ScenarioTruth {
            scenario: 0,
            horizon,
            change_points: vec![],
            segments,
            notes,
        },
    ))
}

pub fn gen_null_msbm<S: Scalar>(n: usize, horizon: usize, layers: usize, seed: u64) -> Result<ScenarioData<S>> {
    let (path, truth) = null_msbm_path(n, horizon, layers, seed)?;
    sample_pair(path, truth, seed)
}
