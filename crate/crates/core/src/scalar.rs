// SPDX-License-Identifier: MIT OR Apache-2.0

//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All tensor, low-rank and scan code is written against [`Scalar`], which is
//! implemented for `f32` and `f64`. The symmetric eigensolver is the only
//! routine that needs a concrete backend, so it lives on the trait itself.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + serde::Serialize
    + 'static
{
    /// Eigen-decomposition of a symmetric `n x n` matrix given in row-major
    /// order. Returns `(eigenvalues, eigenvectors)` where eigenvector `k`
    /// occupies column `k` of the row-major `n x n` output. Order unspecified.
    fn symmetric_eigen(n: usize, data: &[Self]) -> (Vec<Self>, Vec<Self>);

    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn symmetric_eigen(n: usize, data: &[Self]) -> (Vec<Self>, Vec<Self>) {
                assert_eq!(data.len(), n * n);
                if n == 0 {
                    return (Vec::new(), Vec::new());
                }
                let m = nalgebra::DMatrix::<$t>::from_row_slice(n, n, data);
                let eig = nalgebra::SymmetricEigen::new(m);
                let values = eig.eigenvalues.iter().copied().collect();
                let mut vectors = vec![0.0; n * n];
                for c in 0..n {
                    for r in 0..n {
                        vectors[r * n + c] = eig.eigenvectors[(r, c)];
                    }
                }
                (values, vectors)
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// Pairwise (cascade) summation; keeps the rounding error of long sums
/// at O(log n) instead of O(n).
pub fn pairwise_sum<S: Scalar>(xs: &[S]) -> S {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().copied().fold(S::zero(), |acc, x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_diagonal() {
        let (vals, vecs) = f64::symmetric_eigen(2, &[3.0, 0.0, 0.0, 1.0]);
        let mut v = vals.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(v, vec![1.0, 3.0]);
        assert_eq!(vecs.len(), 4);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|x| x as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
        let ys: Vec<f32> = vec![0.5; 100];
        assert_eq!(pairwise_sum(&ys), 50.0);
    }
}
