//! Dense row-major tensor.
//!
//! Feature maps use the batch, channel, frequency, time layout (`[B, C, F, T]`)
//! throughout the crate.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S> {
    dims: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    /// Wraps a buffer. Every extent must be positive and the buffer length must
    /// equal the product of the extents.
    pub fn new(dims: impl Into<Vec<usize>>, data: Vec<S>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::shape(format!("extents must be positive, got {dims:?}")));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::shape(format!(
                "dims {dims:?} hold {n} elements but buffer has {}",
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    pub fn full(dims: impl Into<Vec<usize>>, value: S) -> Self {
        let dims = dims.into();
        assert!(
            !dims.is_empty() && dims.iter().all(|&d| d > 0),
            "extents must be positive, got {dims:?}"
        );
        let n = dims.iter().product();
        Tensor { dims, data: vec![value; n] }
    }

    pub fn zeros(dims: impl Into<Vec<usize>>) -> Self {
        Self::full(dims, S::zero())
    }

    /// Builds a tensor from a function of the flat row-major index.
    pub fn from_fn(dims: impl Into<Vec<usize>>, f: impl FnMut(usize) -> S) -> Self {
        let mut t = Self::zeros(dims);
        t.data.iter_mut().enumerate().for_each({
            let mut f = f;
            move |(i, v)| *v = f(i)
        });
        t
    }

    /// Uniform samples on `[lo, hi)`.
    pub fn random_uniform<R: Rng + ?Sized>(
        dims: impl Into<Vec<usize>>,
        lo: f64,
        hi: f64,
        rng: &mut R,
    ) -> Self {
        Self::from_fn(dims, |_| S::of(rng.gen_range(lo..hi)))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
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

    /// Extents of a rank-4 tensor.
    pub fn dims4(&self) -> Result<[usize; 4]> {
        match self.dims[..] {
            [a, b, c, d] => Ok([a, b, c, d]),
            _ => Err(Error::shape(format!("expected rank 4, got {:?}", self.dims))),
        }
    }

    pub fn dims3(&self) -> Result<[usize; 3]> {
        match self.dims[..] {
            [a, b, c] => Ok([a, b, c]),
            _ => Err(Error::shape(format!("expected rank 3, got {:?}", self.dims))),
        }
    }

    pub fn dims2(&self) -> Result<[usize; 2]> {
        match self.dims[..] {
            [a, b] => Ok([a, b]),
            _ => Err(Error::shape(format!("expected rank 2, got {:?}", self.dims))),
        }
    }

    pub fn reshape(self, dims: impl Into<Vec<usize>>) -> Result<Self> {
        Self::new(dims, self.data)
    }

    fn offset(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.dims.len(), "index rank mismatch");
        idx.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| {
            assert!(i < d, "index {idx:?} out of bounds for {:?}", self.dims);
            acc * d + i
        })
    }

    pub fn at(&self, idx: &[usize]) -> S {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: S) {
        let o = self.offset(idx);
        self.data[o] = value;
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Tensor { dims: self.dims.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(S, S) -> S) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, k: S) -> Self {
        self.map(|v| v * k)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::shape(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(())
    }

    pub fn sum(&self) -> S {
        self.data.iter().copied().sum()
    }

    pub fn mean(&self) -> S {
        self.sum() / S::of(self.len() as f64)
    }

    /// Sum of elementwise products.
    pub fn dot(&self, other: &Self) -> Result<S> {
        self.check_same_dims(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum())
    }

    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<S> {
        self.check_same_dims(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(S::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(context.to_string()))
        }
    }

    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor { dims: self.dims.clone(), data: self.data.iter().map(|v| T::of(v.as_f64())).collect() }
    }

    /// Circular shift along `axis`; element `i` moves to `(i + shift) mod n`.
    pub fn roll(&self, axis: usize, shift: i64) -> Result<Self> {
        if axis >= self.ndim() {
            return Err(Error::invalid(format!("axis {axis} out of range for {:?}", self.dims)));
        }
        let n = self.dims[axis];
        let inner: usize = self.dims[axis + 1..].iter().product();
        let outer: usize = self.dims[..axis].iter().product();
        let s = shift.rem_euclid(n as i64) as usize;
        let mut out = self.data.clone();
        for o in 0..outer {
            for i in 0..n {
                let src = (o * n + i) * inner;
                let dst = (o * n + (i + s) % n) * inner;
                out[dst..dst + inner].copy_from_slice(&self.data[src..src + inner]);
            }
        }
        Ok(Tensor { dims: self.dims.clone(), data: out })
    }
}
