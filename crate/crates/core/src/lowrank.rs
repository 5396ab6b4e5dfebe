// SPDX-License-Identifier: MIT OR Apache-2.0

//! Heteroskedastic PCA and its tensor extension with entrywise truncation.
//!
//! [`hpca`] estimates the leading subspace of a Gram matrix whose diagonal is
//! contaminated by heteroskedastic noise: the diagonal is deleted and then
//! repeatedly re-imputed from a rank-`r` approximation. [`thpca`] applies it
//! to each mode-Gram of a tensor, projects the tensor onto the three
//! estimated subspaces and clips the result into `[-tau2, tau1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Matrix, Tensor3};

/// Iteration controls for [`hpca`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HpcaConfig {
    pub max_iterations: usize,
    pub rel_tolerance: f64,
}

impl Default for HpcaConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            rel_tolerance: 1e-6,
        }
    }
}

impl HpcaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::arg("hpca max_iterations must be at least 1"));
        }
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance.is_finite()) {
            return Err(Error::arg("hpca rel_tolerance must be a positive finite number"));
        }
        Ok(())
    }
}

/// Tucker ranks `(r1, r2, r3)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuckerRanks {
    pub r1: usize,
    pub r2: usize,
    pub r3: usize,
}

impl TuckerRanks {
    pub fn new(r1: usize, r2: usize, r3: usize) -> Self {
        Self { r1, r2, r3 }
    }

    /// The default working ranks for an `n x n x L` tensor: `(min(15, n), min(15, n), L)`.
    pub fn default_for(dims: (usize, usize, usize)) -> Self {
        Self::new(dims.0.min(15), dims.1.min(15), dims.2)
    }

    pub fn full(dims: (usize, usize, usize)) -> Self {
        Self::new(dims.0, dims.1, dims.2)
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.r1, self.r2, self.r3]
    }

    pub fn validate_for(&self, dims: (usize, usize, usize)) -> Result<()> {
        let d = [dims.0, dims.1, dims.2];
        for (s, (&r, &p)) in self.as_array().iter().zip(&d).enumerate() {
            if r == 0 || r > p {
                return Err(Error::arg(format!(
                    "rank r{} = {r} must lie in 1..={p} for dims {dims:?}",
                    s + 1
                )));
            }
        }
        Ok(())
    }
}

/// Output of [`hpca`].
#[derive(Clone, Debug)]
pub struct HpcaResult<S> {
    /// `n x r` basis with orthonormal columns.
    pub basis: Matrix<S>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the working matrix has numerical rank below `r`; the missing
    /// directions come from the trailing eigenbasis. Informational.
    pub rank_deficient: bool,
}

const RANK_EPS: f64 = 1e-12;

/// Eigenpairs of a symmetric matrix by decreasing (signed) eigenvalue.
struct SortedEigen<S> {
    values: Vec<S>,
    /// column-major: vector k is `vectors[k * n..(k + 1) * n]`
    vectors: Vec<S>,
    n: usize,
}

impl<S: Scalar> SortedEigen<S> {
    fn new(n: usize, data: &[S]) -> Self {
        let (vals, vecs) = S::symmetric_eigen(n, data);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let (x, y) = (vals[a], vals[b]);
            y.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut values = Vec::with_capacity(n);
        let mut vectors = Vec::with_capacity(n * n);
        for &k in &order {
            values.push(vals[k]);
            vectors.extend((0..n).map(|r| vecs[r * n + k]));
        }
        Self { values, vectors, n }
    }

    fn vector(&self, k: usize) -> &[S] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }

    /// Diagonal of the rank-`r` truncation `sum_k lambda_k v_k v_k^T`.
    fn truncated_diagonal(&self, r: usize) -> Vec<S> {
        let mut diag = vec![S::zero(); self.n];
        for k in 0..r {
            let lambda = self.values[k];
            for (d, &v) in diag.iter_mut().zip(self.vector(k)) {
                *d += lambda * v * v;
            }
        }
        diag
    }
}

fn sign_fixed<S: Scalar>(v: &[S]) -> Vec<S> {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < S::zero() {
        v.iter().map(|&x| -x).collect()
    } else {
        v.to_vec()
    }
}

/// Heteroskedastic PCA of a symmetric `n x n` matrix.
///
/// Starts from `sigma` with its diagonal zeroed; each pass takes the rank-`r`
/// truncation of the working matrix and copies its diagonal back. Stops
/// when the relative change of the imputed diagonal drops below
/// `cfg.rel_tolerance` or after `cfg.max_iterations` passes, then returns
/// the top-`r` eigenvectors of the final working matrix, each signed so that
/// its largest-magnitude entry is positive.
///
/// The truncation keeps the `r` largest eigenvalues by signed value. For a
/// positive semidefinite limit this is the truncated SVD; deleting the
/// diagonal makes the early iterates indefinite, and ranking by `|lambda|`
/// there can lock onto negative directions.
///
/// If `sigma` is already a fixed point of the reimputation (its own diagonal
/// matches that of its rank-`r` truncation within the tolerance) it is used
/// as is and `iterations` is 0. Exactly low-rank Grams are then recovered
/// even when the deleted-diagonal problem alone does not determine them.
pub fn hpca<S: Scalar>(sigma: &Matrix<S>, r: usize, cfg: &HpcaConfig) -> Result<HpcaResult<S>> {
    cfg.validate()?;
    let n = sigma.rows();
    if sigma.cols() != n {
        return Err(Error::arg(format!("hpca needs a square matrix, got {}x{}", n, sigma.cols())));
    }
    if r == 0 || r > n {
        return Err(Error::arg(format!("hpca rank {r} must lie in 1..={n}")));
    }
    if !sigma.is_finite() {
        return Err(Error::arg("hpca input has non-finite entries"));
    }
    let scale = sigma.data().iter().fold(S::zero(), |m, x| m.max(x.abs()));
    let mut asym = S::zero();
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((sigma.at(i, j) - sigma.at(j, i)).abs());
        }
    }
    if asym > S::lit(1e-9) * scale.max(S::one()) {
        return Err(Error::arg(format!("hpca input is not symmetric (max asymmetry {asym})")));
    }

    let half = S::lit(0.5);
    let mut work: Vec<S> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            if i == j {
                S::zero()
            } else {
                half * (sigma.at(i, j) + sigma.at(j, i))
            }
        })
        .collect();

    let tol = S::lit(cfg.rel_tolerance);
    // one reimputation pass; true once the diagonal has settled
    let step = |work: &mut [S]| {
        let next = SortedEigen::new(n, work).truncated_diagonal(r);
        let mut change = S::zero();
        let mut size = S::zero();
        for i in 0..n {
            let d = next[i] - work[i * n + i];
            change += d * d;
            size += next[i] * next[i];
            work[i * n + i] = next[i];
        }
        change <= tol * tol * size
    };

    let mut iterations = 0;
    let mut converged = false;
    let mut exact: Vec<S> = work.clone();
    for i in 0..n {
        exact[i * n + i] = sigma.at(i, i);
    }
    if step(&mut exact) {
        work = exact;
        converged = true;
    }
    while !converged && iterations < cfg.max_iterations {
        iterations += 1;
        converged = step(&mut work);
    }

    let eig = SortedEigen::new(n, &work);
    let top = eig.values.iter().fold(S::zero(), |m, v| m.max(v.abs()));
    let rank_deficient = top == S::zero() || eig.values[r - 1].abs() < S::lit(RANK_EPS) * top;
    let mut basis = Matrix::zeros(n, r);
    for k in 0..r {
        let col = if top == S::zero() {
            // all-zero working matrix: canonical basis, independent of the solver
            (0..n).map(|i| if i == k { S::one() } else { S::zero() }).collect()
        } else {
            sign_fixed(eig.vector(k))
        };
        for (i, v) in col.into_iter().enumerate() {
            basis.data_mut()[i * r + k] = v;
        }
    }
    Ok(HpcaResult {
        basis,
        iterations,
        converged,
        rank_deficient,
    })
}

/// Output of [`thpca`].
#[derive(Clone, Debug)]
pub struct ThpcaResult<S> {
    pub estimate: Tensor3<S>,
    pub bases: [Matrix<S>; 3],
    /// Per-mode rank-deficiency warnings from [`hpca`].
    pub rank_deficient: [bool; 3],
}

impl<S> ThpcaResult<S> {
    pub fn any_rank_deficient(&self) -> bool {
        self.rank_deficient.iter().any(|&x| x)
    }
}

/// Tensor heteroskedastic PCA with truncation.
///
/// Estimates a subspace per mode with [`hpca`] on the mode-Gram, projects
/// `a` onto them and clips every entry to `min(tau1, max(-tau2, x))`.
/// Either threshold may be `+inf`.
pub fn thpca<S: Scalar>(
    a: &Tensor3<S>,
    ranks: TuckerRanks,
    tau1: S,
    tau2: S,
    cfg: &HpcaConfig,
) -> Result<ThpcaResult<S>> {
    ranks.validate_for(a.dims())?;
    if tau1.is_nan() || tau2.is_nan() || tau1 < S::zero() || tau2 < S::zero() {
        return Err(Error::arg("truncation thresholds must be nonnegative"));
    }
    if !a.is_finite() {
        return Err(Error::arg("thpca input has non-finite entries"));
    }
    let mut bases = Vec::with_capacity(3);
    let mut rank_deficient = [false; 3];
    for (s, r) in ranks.as_array().into_iter().enumerate() {
        let gram = a.mode_gram(s + 1)?;
        let out = hpca(&gram, r, cfg)?;
        rank_deficient[s] = out.rank_deficient;
        bases.push(out.basis);
    }
    let projected = a.project_tucker(&bases[0], &bases[1], &bases[2])?;
    let lo = -tau2;
    let estimate = projected.map(|x| tau1.min(lo.max(x)));
    let [u1, u2, u3]: [Matrix<S>; 3] = bases.try_into().expect("three bases");
    Ok(ThpcaResult {
        estimate,
        bases: [u1, u2, u3],
        rank_deficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ones_gram_recovers_constant_direction() {
        let sigma = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let out = hpca(&sigma, 1, &HpcaConfig::default()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.basis.get(1, 1) - h).abs() < 1e-9);
        assert!((out.basis.get(2, 1) - h).abs() < 1e-9);
        assert!(out.converged);
        assert!(!out.rank_deficient);
    }

    #[test]
    fn exact_low_rank_gram_is_a_fixed_point() {
        let sigma = Matrix::from_rows(&[vec![4.0, 2.0, 0.0], vec![2.0, 1.0, 0.0], vec![0.0, 0.0, 0.0]]).unwrap();
        let out = hpca(&sigma, 1, &HpcaConfig::default()).unwrap();
        assert_eq!(out.iterations, 0);
        let s5 = 5f64.sqrt();
        assert!((out.basis.get(1, 1) - 2.0 / s5).abs() < 1e-12);
        assert!((out.basis.get(2, 1) - 1.0 / s5).abs() < 1e-12);
    }

    #[test]
    fn reimputation_removes_diagonal_noise() {
        // U0 diag(9, 4) U0^T plus a positive diagonal, n = 8
        let n = 8;
        let raw = Matrix::from_fn(n, 2, |i, j| ((i * 5 + j * 3 + 1) % 7) as f64 - 3.0 + if i == j { 2.0 } else { 0.0 });
        let u0 = hpca(&raw.gram(), 2, &HpcaConfig::default()).unwrap().basis;
        let core = Matrix::from_rows(&[vec![9.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let mut sigma = u0.matmul(&core).unwrap().matmul(&u0.transpose()).unwrap();
        for i in 1..=n {
            sigma.set(i, i, sigma.get(i, i) + 0.5 + 0.25 * i as f64);
        }
        let cfg = HpcaConfig {
            max_iterations: 20_000,
            rel_tolerance: 1e-13,
        };
        let out = hpca(&sigma, 2, &cfg).unwrap();
        assert!(out.converged);
        // residual of the true basis outside the estimated span
        let back = out.basis.matmul(&out.basis.transpose().matmul(&u0).unwrap()).unwrap();
        let err: f64 = back.data().iter().zip(u0.data()).map(|(a, b)| (a - b) * (a - b)).sum();
        assert!(err.sqrt() < 1e-6, "residual {}", err.sqrt());
    }

    #[test]
    fn pure_diagonal_is_rank_deficient() {
        let mut sigma = Matrix::<f64>::identity(3);
        for x in sigma.data_mut() {
            *x *= 4.0;
        }
        let out = hpca(&sigma, 1, &HpcaConfig::default()).unwrap();
        assert!(out.rank_deficient);
        assert_eq!(out.basis.column(0), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn hpca_argument_errors() {
        let cfg = HpcaConfig::default();
        let sigma = Matrix::<f64>::identity(2);
        assert!(hpca(&sigma, 3, &cfg).is_err());
        assert!(hpca(&sigma, 0, &cfg).is_err());
        let bad = Matrix::from_rows(&[vec![1.0, f64::NAN], vec![f64::NAN, 1.0]]).unwrap();
        assert!(hpca(&bad, 1, &cfg).is_err());
        let asym = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(hpca(&asym, 1, &cfg).is_err());
        let rect = Matrix::<f64>::zeros(2, 3);
        assert!(hpca(&rect, 1, &cfg).is_err());
        let zero_iter = HpcaConfig {
            max_iterations: 0,
            ..cfg
        };
        assert!(hpca(&sigma, 1, &zero_iter).is_err());
    }

    #[test]
    fn thpca_clips_into_thresholds() {
        let t = Tensor3::from_vec((1, 1, 2), vec![0.7, -0.2]).unwrap();
        let out = thpca(&t, TuckerRanks::full(t.dims()), 0.5, 0.0, &HpcaConfig::default()).unwrap();
        assert_eq!(out.estimate.data(), &[0.5, 0.0]);
    }

    #[test]
    fn thpca_zero_tensor() {
        let t = Tensor3::<f64>::zeros((3, 3, 2));
        let out = thpca(&t, TuckerRanks::new(1, 1, 1), f64::INFINITY, f64::INFINITY, &HpcaConfig::default())
            .unwrap();
        assert_eq!(out.estimate, t);
        assert!(out.any_rank_deficient());
    }

    #[test]
    fn thpca_rejects_bad_ranks_and_thresholds() {
        let t = Tensor3::<f64>::ones((2, 2, 2));
        let cfg = HpcaConfig::default();
        assert!(thpca(&t, TuckerRanks::new(3, 1, 1), 1.0, 1.0, &cfg).is_err());
        assert!(thpca(&t, TuckerRanks::new(1, 1, 1), -1.0, 1.0, &cfg).is_err());
    }

    #[test]
    fn default_ranks_cap_at_fifteen() {
        assert_eq!(TuckerRanks::default_for((100, 100, 4)), TuckerRanks::new(15, 15, 4));
        assert_eq!(TuckerRanks::default_for((8, 8, 3)), TuckerRanks::new(8, 8, 3));
    }
}
