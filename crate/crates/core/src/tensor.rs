// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dense order-3 tensors, matrices and tensor sequences.
//!
//! Storage is row-major over `(i, j, l)`. Every index accepted by the public
//! accessors (`get`, `set`, time indices of [`TensorSeries`]) is 1-based;
//! the flat `data` slices are exposed for bulk arithmetic only.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = S::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::dims("ragged rows"));
        }
        Self::from_vec(r, c, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    /// Entry at 1-based `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> S {
        assert!(row >= 1 && row <= self.rows && col >= 1 && col <= self.cols);
        self.data[(row - 1) * self.cols + (col - 1)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: S) {
        assert!(row >= 1 && row <= self.rows && col >= 1 && col <= self.cols);
        self.data[(row - 1) * self.cols + (col - 1)] = value;
    }

    #[inline]
    pub(crate) fn at(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    pub(crate) fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.at(c, r))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::dims(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let orow = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.at(r, k);
                if a == S::zero() {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * self^T`.
    pub fn gram(&self) -> Self {
        let n = self.rows;
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            let ri = &self.data[i * self.cols..(i + 1) * self.cols];
            for k in i..n {
                let rk = &self.data[k * self.cols..(k + 1) * self.cols];
                let v = dot(ri, rk);
                out.data[i * n + k] = v;
                out.data[k * n + i] = v;
            }
        }
        out
    }

    pub fn frob_norm(&self) -> S {
        dot(&self.data, &self.data).sqrt()
    }

    /// `||self^T self - I||_F`; zero for a matrix with orthonormal columns.
    pub fn orthonormality_defect(&self) -> S {
        let gram = self.transpose().gram();
        let mut acc = S::zero();
        for r in 0..gram.rows {
            for c in 0..gram.cols {
                let target = if r == c { S::one() } else { S::zero() };
                let d = gram.at(r, c) - target;
                acc += d * d;
            }
        }
        acc.sqrt()
    }

    pub fn column(&self, c: usize) -> Vec<S> {
        (0..self.rows).map(|r| self.at(r, c)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

#[inline]
pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    // four accumulators so the loop vectorizes
    let mut acc = [S::zero(); 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = S::zero();
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Dense order-3 tensor with dimensions `(p1, p2, p3)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tensor3<S> {
    dims: (usize, usize, usize),
    data: Vec<S>,
}

impl<S: Scalar> Tensor3<S> {
    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Self {
            dims,
            data: vec![S::zero(); dims.0 * dims.1 * dims.2],
        }
    }

    pub fn ones(dims: (usize, usize, usize)) -> Self {
        Self::filled(dims, S::one())
    }

    pub fn filled(dims: (usize, usize, usize), value: S) -> Self {
        Self {
            dims,
            data: vec![value; dims.0 * dims.1 * dims.2],
        }
    }

    pub fn from_vec(dims: (usize, usize, usize), data: Vec<S>) -> Result<Self> {
        if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
            return Err(Error::arg(format!("tensor dimensions must be positive: {dims:?}")));
        }
        if data.len() != dims.0 * dims.1 * dims.2 {
            return Err(Error::dims(format!(
                "tensor {dims:?} needs {} values, got {}",
                dims.0 * dims.1 * dims.2,
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    /// Builds a tensor from a function of 0-based `(i, j, l)`.
    pub fn from_fn(dims: (usize, usize, usize), mut f: impl FnMut(usize, usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(dims.0 * dims.1 * dims.2);
        for i in 0..dims.0 {
            for j in 0..dims.1 {
                for l in 0..dims.2 {
                    data.push(f(i, j, l));
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.dims.1 + j) * self.dims.2 + l
    }

    /// Entry at 1-based `(i, j, l)`.
    pub fn get(&self, i: usize, j: usize, l: usize) -> S {
        self.check_index(i, j, l);
        self.data[self.offset(i - 1, j - 1, l - 1)]
    }

    /// Sets the entry at 1-based `(i, j, l)`.
    pub fn set(&mut self, i: usize, j: usize, l: usize, value: S) {
        self.check_index(i, j, l);
        let o = self.offset(i - 1, j - 1, l - 1);
        self.data[o] = value;
    }

    fn check_index(&self, i: usize, j: usize, l: usize) {
        let (p1, p2, p3) = self.dims;
        assert!(
            (1..=p1).contains(&i) && (1..=p2).contains(&j) && (1..=p3).contains(&l),
            "index ({i}, {j}, {l}) outside 1-based dims {:?}",
            self.dims
        );
    }

    fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::dims(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(())
    }

    pub fn inner(&self, other: &Self) -> Result<S> {
        self.check_same_dims(other)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn frob_norm(&self) -> S {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn scaled(&self, c: S) -> Self {
        self.map(|x| x * c)
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(S, S) -> S) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(Self {
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: S, other: &Self) -> Result<()> {
        self.check_same_dims(other)?;
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x += c * y;
        }
        Ok(())
    }

    /// `self += other`.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same_dims(other)?;
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x += y;
        }
        Ok(())
    }

    /// Squared Frobenius distance `||self - other||_F^2`.
    pub fn dist_sq(&self, other: &Self) -> Result<S> {
        self.check_same_dims(other)?;
        let mut acc = S::zero();
        for (&a, &b) in self.data.iter().zip(&other.data) {
            let d = a - b;
            acc += d * d;
        }
        Ok(acc)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    fn mode_size(&self, mode: usize) -> Result<usize> {
        match mode {
            1 => Ok(self.dims.0),
            2 => Ok(self.dims.1),
            3 => Ok(self.dims.2),
            _ => Err(Error::arg(format!("mode must be 1, 2 or 3, got {mode}"))),
        }
    }

    /// Mode-`mode` unfolding. Mode 1 is `p1 x (p2 p3)` with column
    /// `(i2-1) p3 + i3`; modes 2 and 3 follow the cyclic pattern
    /// (`p2 x (p3 p1)`, column `(i3-1) p1 + i1`; `p3 x (p1 p2)`, column
    /// `(i1-1) p2 + i2`).
    pub fn matricize(&self, mode: usize) -> Result<Matrix<S>> {
        let (p1, p2, p3) = self.dims;
        match mode {
            1 => Matrix::from_vec(p1, p2 * p3, self.data.clone()),
            2 => {
                let mut out = Matrix::zeros(p2, p3 * p1);
                for i in 0..p1 {
                    for j in 0..p2 {
                        for l in 0..p3 {
                            out.data[j * (p3 * p1) + l * p1 + i] = self.data[self.offset(i, j, l)];
                        }
                    }
                }
                Ok(out)
            }
            3 => {
                let mut out = Matrix::zeros(p3, p1 * p2);
                for i in 0..p1 {
                    for j in 0..p2 {
                        for l in 0..p3 {
                            out.data[l * (p1 * p2) + i * p2 + j] = self.data[self.offset(i, j, l)];
                        }
                    }
                }
                Ok(out)
            }
            _ => Err(Error::arg(format!("mode must be 1, 2 or 3, got {mode}"))),
        }
    }

    /// Inverse of [`Tensor3::matricize`].
    pub fn from_matricized(m: &Matrix<S>, mode: usize, dims: (usize, usize, usize)) -> Result<Self> {
        let (p1, p2, p3) = dims;
        let expected = match mode {
            1 => (p1, p2 * p3),
            2 => (p2, p3 * p1),
            3 => (p3, p1 * p2),
            _ => return Err(Error::arg(format!("mode must be 1, 2 or 3, got {mode}"))),
        };
        if (m.rows, m.cols) != expected {
            return Err(Error::dims(format!(
                "mode-{mode} unfolding of {dims:?} must be {}x{}, got {}x{}",
                expected.0, expected.1, m.rows, m.cols
            )));
        }
        let mut out = Self::zeros(dims);
        for i in 0..p1 {
            for j in 0..p2 {
                for l in 0..p3 {
                    let v = match mode {
                        1 => m.at(i, j * p3 + l),
                        2 => m.at(j, l * p1 + i),
                        _ => m.at(l, i * p2 + j),
                    };
                    let o = out.offset(i, j, l);
                    out.data[o] = v;
                }
            }
        }
        Ok(out)
    }

    /// Marginal multiplication `self x_mode m`: contracts the `mode` index
    /// against the columns of `m`, replacing that dimension with `m.rows()`.
    pub fn mode_multiply(&self, m: &Matrix<S>, mode: usize) -> Result<Self> {
        let size = self.mode_size(mode)?;
        if m.cols != size {
            return Err(Error::dims(format!(
                "mode-{mode} size is {size} but matrix has {} columns",
                m.cols
            )));
        }
        let (p1, p2, p3) = self.dims;
        let q = m.rows;
        match mode {
            1 => {
                // out (q x p2p3) = m (q x p1) * unfold (p1 x p2p3)
                let block = p2 * p3;
                let mut out = vec![S::zero(); q * block];
                for r in 0..q {
                    let orow = &mut out[r * block..(r + 1) * block];
                    for k in 0..p1 {
                        let c = m.at(r, k);
                        if c == S::zero() {
                            continue;
                        }
                        let src = &self.data[k * block..(k + 1) * block];
                        for (o, &x) in orow.iter_mut().zip(src) {
                            *o += c * x;
                        }
                    }
                }
                Ok(Self { dims: (q, p2, p3), data: out })
            }
            2 => {
                // each slab i is a p2 x p3 matrix; out slab = m * slab
                let mut out = vec![S::zero(); p1 * q * p3];
                for i in 0..p1 {
                    let slab = &self.data[i * p2 * p3..(i + 1) * p2 * p3];
                    let oslab = &mut out[i * q * p3..(i + 1) * q * p3];
                    for r in 0..q {
                        let orow = &mut oslab[r * p3..(r + 1) * p3];
                        for k in 0..p2 {
                            let c = m.at(r, k);
                            if c == S::zero() {
                                continue;
                            }
                            for (o, &x) in orow.iter_mut().zip(&slab[k * p3..(k + 1) * p3]) {
                                *o += c * x;
                            }
                        }
                    }
                }
                Ok(Self { dims: (p1, q, p3), data: out })
            }
            _ => {
                // fibres along l are contiguous: out fibre = m * fibre
                let fibres = p1 * p2;
                let mut out = vec![S::zero(); fibres * q];
                for f in 0..fibres {
                    let src = &self.data[f * p3..(f + 1) * p3];
                    let dst = &mut out[f * q..(f + 1) * q];
                    for (r, o) in dst.iter_mut().enumerate() {
                        *o = dot(&m.data[r * p3..(r + 1) * p3], src);
                    }
                }
                Ok(Self { dims: (p1, p2, q), data: out })
            }
        }
    }

    /// Gram matrix of the mode-`mode` unfolding, `M_s M_s^T`, computed
    /// without materializing the unfolding.
    pub fn mode_gram(&self, mode: usize) -> Result<Matrix<S>> {
        let (p1, p2, p3) = self.dims;
        match mode {
            1 => Ok(Matrix::from_vec(p1, p2 * p3, self.data.clone())?.gram()),
            2 => {
                let mut g = Matrix::zeros(p2, p2);
                for i in 0..p1 {
                    let slab = &self.data[i * p2 * p3..(i + 1) * p2 * p3];
                    for j in 0..p2 {
                        let rj = &slab[j * p3..(j + 1) * p3];
                        for k in j..p2 {
                            let v = dot(rj, &slab[k * p3..(k + 1) * p3]);
                            g.data[j * p2 + k] += v;
                        }
                    }
                }
                for j in 0..p2 {
                    for k in 0..j {
                        g.data[j * p2 + k] = g.data[k * p2 + j];
                    }
                }
                Ok(g)
            }
            3 => {
                let mut g = Matrix::zeros(p3, p3);
                for fibre in self.data.chunks_exact(p3) {
                    for l in 0..p3 {
                        let x = fibre[l];
                        if x == S::zero() {
                            continue;
                        }
                        for (m, &y) in fibre.iter().enumerate().skip(l) {
                            g.data[l * p3 + m] += x * y;
                        }
                    }
                }
                for l in 0..p3 {
                    for m in 0..l {
                        g.data[l * p3 + m] = g.data[m * p3 + l];
                    }
                }
                Ok(g)
            }
            _ => Err(Error::arg(format!("mode must be 1, 2 or 3, got {mode}"))),
        }
    }

    /// Orthogonal Tucker projection `self x1 U1U1^T x2 U2U2^T x3 U3U3^T`.
    ///
    /// Evaluated as a compress-then-expand pass through the core
    /// `self x1 U1^T x2 U2^T x3 U3^T`, which is exact and cheaper when the
    /// ranks are small.
    pub fn project_tucker(&self, u1: &Matrix<S>, u2: &Matrix<S>, u3: &Matrix<S>) -> Result<Self> {
        let (p1, p2, p3) = self.dims;
        for (s, (u, p)) in [(u1, p1), (u2, p2), (u3, p3)].into_iter().enumerate() {
            if u.rows != p {
                return Err(Error::dims(format!(
                    "basis for mode {} has {} rows, tensor size is {p}",
                    s + 1,
                    u.rows
                )));
            }
            if u.cols == 0 || u.cols > p {
                return Err(Error::dims(format!(
                    "basis for mode {} has {} columns, expected 1..={p}",
                    s + 1,
                    u.cols
                )));
            }
        }
        let core = self
            .mode_multiply(&u1.transpose(), 1)?
            .mode_multiply(&u2.transpose(), 2)?
            .mode_multiply(&u3.transpose(), 3)?;
        core.mode_multiply(u1, 1)?.mode_multiply(u2, 2)?.mode_multiply(u3, 3)
    }
}

/// Time-indexed sequence of equally shaped tensors, `t = 1..=T`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSeries<S> {
    shape: (usize, usize, usize),
    snapshots: Vec<Tensor3<S>>,
}

impl<S: Scalar> TensorSeries<S> {
    pub fn new(snapshots: Vec<Tensor3<S>>) -> Result<Self> {
        let Some(first) = snapshots.first() else {
            return Err(Error::arg("a tensor series needs at least two snapshots"));
        };
        let shape = first.dims();
        if snapshots.len() < 2 {
            return Err(Error::arg("a tensor series needs at least two snapshots"));
        }
        if let Some((t, bad)) = snapshots.iter().enumerate().find(|(_, x)| x.dims() != shape) {
            return Err(Error::dims(format!(
                "snapshot {} has dims {:?}, expected {shape:?}",
                t + 1,
                bad.dims()
            )));
        }
        Ok(Self { shape, snapshots })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    /// Number of time points `T`.
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Snapshot at 1-based time `t`.
    pub fn get(&self, t: usize) -> &Tensor3<S> {
        assert!(t >= 1 && t <= self.len(), "time {t} outside 1..={}", self.len());
        &self.snapshots[t - 1]
    }

    pub fn snapshots(&self) -> &[Tensor3<S>] {
        &self.snapshots
    }

    pub fn into_snapshots(self) -> Vec<Tensor3<S>> {
        self.snapshots
    }

    pub(crate) fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape || self.len() != other.len() {
            return Err(Error::dims(format!(
                "series shapes differ: {:?} x {} vs {:?} x {}",
                self.shape,
                self.len(),
                other.shape,
                other.len()
            )));
        }
        Ok(())
    }

    /// Average of snapshots `l+1..=r`.
    pub fn window_mean(&self, l: usize, r: usize) -> Result<Tensor3<S>> {
        let mut sum = self.window_sum(l, r)?;
        let inv = S::one() / S::lit((r - l) as f64);
        for x in sum.data_mut() {
            *x *= inv;
        }
        Ok(sum)
    }

    /// Sum of snapshots `l+1..=r`.
    pub fn window_sum(&self, l: usize, r: usize) -> Result<Tensor3<S>> {
        if l >= r || r > self.len() {
            return Err(Error::arg(format!(
                "window ({l}, {r}] is empty or outside 0..={}",
                self.len()
            )));
        }
        let mut acc = Tensor3::zeros(self.shape);
        for snap in &self.snapshots[l..r] {
            acc.add_assign(snap)?;
        }
        Ok(acc)
    }

    pub fn is_binary(&self) -> bool {
        self.snapshots
            .iter()
            .all(|x| x.data().iter().all(|&v| v == S::zero() || v == S::one()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(dims: (usize, usize, usize)) -> Tensor3<f64> {
        let mut k = 0.0;
        Tensor3::from_fn(dims, |_, _, _| {
            k += 1.0;
            (k * 0.37_f64).sin()
        })
    }

    #[test]
    fn matricize_singleton() {
        let t = Tensor3::from_vec((1, 1, 1), vec![4.5]).unwrap();
        for mode in 1..=3 {
            let m = t.matricize(mode).unwrap();
            assert_eq!((m.rows(), m.cols()), (1, 1));
            assert_eq!(m.get(1, 1), 4.5);
        }
    }

    #[test]
    fn matricize_mode1_first_slab() {
        let mut t = Tensor3::<f64>::zeros((2, 2, 2));
        t.set(1, 1, 1, 1.0);
        t.set(1, 1, 2, 2.0);
        t.set(1, 2, 1, 3.0);
        t.set(1, 2, 2, 4.0);
        let m = t.matricize(1).unwrap();
        assert_eq!(m.column(0)[0], 1.0);
        assert_eq!((1..=4).map(|c| m.get(1, c)).collect::<Vec<_>>(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn matricize_index_maps_follow_cyclic_pattern() {
        let t = seq((2, 3, 4));
        let m2 = t.matricize(2).unwrap();
        let m3 = t.matricize(3).unwrap();
        for i in 1..=2 {
            for j in 1..=3 {
                for l in 1..=4 {
                    assert_eq!(m2.get(j, (l - 1) * 2 + i), t.get(i, j, l));
                    assert_eq!(m3.get(l, (i - 1) * 3 + j), t.get(i, j, l));
                }
            }
        }
    }

    #[test]
    fn matricize_round_trip_and_bad_mode() {
        let t = seq((3, 2, 4));
        for mode in 1..=3 {
            let m = t.matricize(mode).unwrap();
            assert_eq!(Tensor3::from_matricized(&m, mode, t.dims()).unwrap(), t);
            assert!((m.frob_norm() - t.frob_norm()).abs() < 1e-12);
        }
        assert!(matches!(t.matricize(0), Err(Error::InvalidArgument(_))));
        assert!(matches!(t.matricize(4), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn mode_multiply_identity_and_contraction() {
        let t = seq((2, 3, 4));
        for (mode, p) in [(1, 2), (2, 3), (3, 4)] {
            assert_eq!(t.mode_multiply(&Matrix::identity(p), mode).unwrap(), t);
        }
        let ones = Tensor3::<f64>::ones((2, 2, 2));
        let m = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let out = ones.mode_multiply(&m, 1).unwrap();
        assert_eq!(out.dims(), (1, 2, 2));
        assert!(out.data().iter().all(|&x| x == 2.0));
        assert!(t.mode_multiply(&Matrix::identity(3), 1).is_err());
    }

    #[test]
    fn mode_multiply_matches_matricized_product() {
        let t = seq((3, 4, 2));
        let m = Matrix::from_fn(5, 4, |r, c| (r as f64 + 1.0) * 0.1 - c as f64 * 0.3);
        let direct = t.mode_multiply(&m, 2).unwrap();
        let via = m.matmul(&t.matricize(2).unwrap()).unwrap();
        let back = Tensor3::from_matricized(&via, 2, (3, 5, 2)).unwrap();
        assert!(direct.sub(&back).unwrap().frob_norm() < 1e-12);
    }

    #[test]
    fn mode_gram_matches_unfolding() {
        let t = seq((3, 4, 5));
        for mode in 1..=3 {
            let g = t.mode_gram(mode).unwrap();
            let want = t.matricize(mode).unwrap().gram();
            let diff: f64 = g.data().iter().zip(want.data()).map(|(a, b)| (a - b).abs()).sum();
            assert!(diff < 1e-12, "mode {mode}");
        }
    }

    #[test]
    fn inner_and_norm_examples() {
        let ones = Tensor3::<f64>::ones((2, 2, 2));
        assert_eq!(ones.inner(&ones).unwrap(), 8.0);
        assert_eq!(ones.frob_norm(), 8f64.sqrt());
        let t = seq((2, 3, 2));
        assert_eq!(t.inner(&Tensor3::zeros(t.dims())).unwrap(), 0.0);
        assert!((t.inner(&t).unwrap() - t.frob_norm().powi(2)).abs() < 1e-12);
        assert!((t.scaled(-3.0).frob_norm() - 3.0 * t.frob_norm()).abs() < 1e-12);
        assert_eq!(Tensor3::<f64>::zeros((2, 2, 2)).frob_norm(), 0.0);
        assert!(t.inner(&ones).is_err());
    }

    #[test]
    fn project_tucker_identity_and_shape_errors() {
        let t = seq((2, 3, 4));
        let p = t
            .project_tucker(&Matrix::identity(2), &Matrix::identity(3), &Matrix::identity(4))
            .unwrap();
        assert!(p.sub(&t).unwrap().frob_norm() < 1e-12);
        assert!(t
            .project_tucker(&Matrix::identity(3), &Matrix::identity(3), &Matrix::identity(4))
            .is_err());
    }

    #[test]
    fn series_validation() {
        let a = Tensor3::<f64>::zeros((2, 2, 1));
        assert!(TensorSeries::new(vec![a.clone()]).is_err());
        assert!(TensorSeries::new(vec![a.clone(), Tensor3::zeros((2, 2, 2))]).is_err());
        let s = TensorSeries::new(vec![a.clone(), Tensor3::ones((2, 2, 1))]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.get(2).get(1, 1, 1), 1.0);
        assert_eq!(s.window_mean(0, 2).unwrap().get(2, 2, 1), 0.5);
        assert!(s.is_binary());
    }
}
