// SPDX-License-Identifier: MIT OR Apache-2.0

//! Change point localization and inference for dynamic multilayer networks.
//!
//! A dynamic multilayer network is a series of `n x n x L` adjacency tensors
//! `A(1), ..., A(T)`. The pipeline takes two independent samples `A` and `B`
//! of the same network series and
//!
//! 1. scans seeded intervals with the CUSUM inner product of the two samples
//!    and segments greedily above a threshold ([`localize::sbs_detect`]),
//! 2. re-localizes each candidate with a low-rank (TH-PCA) estimate of the
//!    CUSUM tensor ([`localize::local_refine`]),
//! 3. re-estimates each change point by least squares against low-rank
//!    segment means and builds a confidence interval from the simulated
//!    limiting law ([`inference::infer`]).
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`.
//!
//! ```
//! use mlnet_cpd::{detect, gen_scenario, DetectConfig, Series};
//!
//! let data = gen_scenario::<f64>(3, 20, 40, 2, 7).unwrap();
//! let found = detect(&data.a, &data.b, None, None, &DetectConfig::default()).unwrap();
//! let _: &Series = &data.a;
//! assert!(found.change_points().iter().all(|&t| 0 < t && t < 40));
//! ```

pub mod bench;
pub mod config;
pub mod error;
pub mod inference;
pub mod io;
pub mod localize;
pub mod lowrank;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod scan;
pub mod simgen;
pub mod tensor;

pub use config::{Mode, RunConfig};
pub use error::{Error, Result};
pub use inference::{
    confidence_interval, final_refine, infer, infer_detection, jump_estimate, segment_mean_estimate,
    simulate_nonvanishing_law, simulate_vanishing_law, variance_estimate, ChangePointEstimate, InferConfig,
    LimitLawConfig, SegmentEstimate,
};
pub use localize::{detect, local_refine, sbs_detect, split_series, DetectConfig, Detection};
pub use lowrank::{hpca, thpca, HpcaConfig, TuckerRanks};
pub use metrics::{count_error, coverage, hausdorff_one_sided, Partition};
pub use scalar::Scalar;
pub use scan::{cusum_inner_profile, cusum_transform, refined_scan_profile, seeded_intervals, CrossGram};
pub use simgen::{gen_null_msbm, gen_scenario, ScenarioData, ScenarioTruth};
pub use tensor::{Matrix, Tensor3, TensorSeries};

/// Double-precision tensor.
pub type Tensor = Tensor3<f64>;
/// Single-precision tensor.
pub type Tensor32 = Tensor3<f32>;
/// Double-precision tensor series.
pub type Series = TensorSeries<f64>;
/// Single-precision tensor series.
pub type Series32 = TensorSeries<f32>;
/// Double-precision dense matrix.
pub type Matrix64 = Matrix<f64>;
