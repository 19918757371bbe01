//! Dense real and complex tensors in `(n, c, h, w)` row-major layout.

mod conv;
mod fft;
mod gradcheck;
mod ops;

pub use conv::{conv2d, conv2d_backward_input, conv2d_backward_kernel, conv2d_with, Padding};
pub use fft::{fft2, fft2c, ifft2, ifft2c};
pub use gradcheck::{finite_diff_grad, finite_diff_report, relative_error, GradCheckReport};
pub use ops::{
    avg_pool2, avg_pool2_backward, concat_channels, split_channels, upsample_nearest2,
    upsample_nearest2_backward,
};

use crate::error::{ensure_shape, Error, Result};
use crate::scalar::Scalar;

/// `[n, c, h, w]`.
pub type Shape4 = [usize; 4];

#[derive(Debug, Clone, PartialEq)]
pub struct RealTensor<T> {
    shape: Shape4,
    data: Vec<T>,
}

impl<T: Scalar> RealTensor<T> {
    /// Checked constructor: rejects length mismatches and non-finite entries.
    pub fn new(shape: Shape4, data: Vec<T>) -> Result<Self> {
        ensure_shape!(
            data.len() == shape.iter().product::<usize>(),
            "data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerics(format!(
                "non-finite entry at flat index {pos}"
            )));
        }
        Ok(Self { shape, data })
    }

    /// Unchecked constructor used on hot paths. Only the length is asserted.
    pub fn from_vec(shape: Shape4, data: Vec<T>) -> Self {
        assert_eq!(data.len(), shape.iter().product::<usize>(), "shape {shape:?}");
        Self { shape, data }
    }

    /// Single-sample tensor of shape `(1, c, h, w)`.
    pub fn from_chw(c: usize, h: usize, w: usize, data: Vec<T>) -> Result<Self> {
        Self::new([1, c, h, w], data)
    }

    pub fn zeros(shape: Shape4) -> Self {
        Self {
            shape,
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn full(shape: Shape4, value: T) -> Self {
        Self {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_fn(shape: Shape4, mut f: impl FnMut([usize; 4]) -> T) -> Self {
        let [n, c, h, w] = shape;
        let mut data = Vec::with_capacity(n * c * h * w);
        for b in 0..n {
            for ch in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        data.push(f([b, ch, y, x]));
                    }
                }
            }
        }
        Self { shape, data }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.shape)
    }

    pub fn shape(&self) -> Shape4 {
        self.shape
    }
    pub fn n(&self) -> usize {
        self.shape[0]
    }
    pub fn c(&self) -> usize {
        self.shape[1]
    }
    pub fn h(&self) -> usize {
        self.shape[2]
    }
    pub fn w(&self) -> usize {
        self.shape[3]
    }
    pub fn len(&self) -> usize {
        self.data.len()
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
    pub fn plane_len(&self) -> usize {
        self.shape[2] * self.shape[3]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn idx(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        ((b * self.shape[1] + c) * self.shape[2] + y) * self.shape[3] + x
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, y: usize, x: usize) -> T {
        self.data[self.idx(b, c, y, x)]
    }

    pub fn set(&mut self, b: usize, c: usize, y: usize, x: usize, v: T) {
        let i = self.idx(b, c, y, x);
        self.data[i] = v;
    }

    pub fn plane(&self, b: usize, c: usize) -> &[T] {
        let p = self.plane_len();
        let start = (b * self.shape[1] + c) * p;
        &self.data[start..start + p]
    }

    pub fn plane_mut(&mut self, b: usize, c: usize) -> &mut [T] {
        let p = self.plane_len();
        let start = (b * self.shape[1] + c) * p;
        &mut self.data[start..start + p]
    }

    /// Reinterpret with a new shape of identical element count.
    pub fn reshape(mut self, shape: Shape4) -> Result<Self> {
        ensure_shape!(
            shape.iter().product::<usize>() == self.data.len(),
            "cannot reshape {:?} into {:?}",
            self.shape,
            shape
        );
        self.shape = shape;
        Ok(self)
    }

    /// Batch entry `b` as a `(1, c, h, w)` tensor.
    pub fn sample(&self, b: usize) -> Self {
        let per = self.shape[1] * self.plane_len();
        Self::from_vec(
            [1, self.shape[1], self.shape[2], self.shape[3]],
            self.data[b * per..(b + 1) * per].to_vec(),
        )
    }

    /// Stack same-shaped tensors along the batch axis.
    pub fn stack(items: &[Self]) -> Result<Self> {
        ensure_shape!(!items.is_empty(), "cannot stack an empty list");
        let [_, c, h, w] = items[0].shape;
        let mut data = Vec::new();
        let mut n = 0;
        for t in items {
            ensure_shape!(
                t.shape[1..] == [c, h, w],
                "stack: {:?} vs {:?}",
                t.shape,
                items[0].shape
            );
            n += t.shape[0];
            data.extend_from_slice(&t.data);
        }
        Ok(Self::from_vec([n, c, h, w], data))
    }

    /// Channels `[start, end)` of every sample.
    pub fn slice_channels(&self, start: usize, end: usize) -> Result<Self> {
        ensure_shape!(
            start <= end && end <= self.c(),
            "channel range {start}..{end} out of bounds for {} channels",
            self.c()
        );
        let [n, c, h, w] = self.shape;
        let p = h * w;
        let mut data = Vec::with_capacity(n * (end - start) * p);
        for b in 0..n {
            let base = b * c * p;
            data.extend_from_slice(&self.data[base + start * p..base + end * p]);
        }
        Ok(Self::from_vec([n, end - start, h, w], data))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        ensure_shape!(
            self.shape == other.shape,
            "elementwise shape mismatch {:?} vs {:?}",
            self.shape,
            other.shape
        );
        Ok(Self {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.axpy(T::one(), other)
    }

    pub fn sub_assign(&mut self, other: &Self) -> Result<()> {
        self.axpy(-T::one(), other)
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: T, other: &Self) -> Result<()> {
        ensure_shape!(
            self.shape == other.shape,
            "accumulate shape mismatch {:?} vs {:?}",
            self.shape,
            other.shape
        );
        for (d, &s) in self.data.iter_mut().zip(&other.data) {
            *d += a * s;
        }
        Ok(())
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|d| *d = v);
    }

    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v)
    }

    pub fn sum_sq(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v * v)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> RealTensor<U> {
        RealTensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Complex tensor stored as two real tensors of identical shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor<T> {
    pub re: RealTensor<T>,
    pub im: RealTensor<T>,
}

impl<T: Scalar> ComplexTensor<T> {
    pub fn new(re: RealTensor<T>, im: RealTensor<T>) -> Result<Self> {
        ensure_shape!(
            re.shape() == im.shape(),
            "real {:?} and imaginary {:?} parts differ",
            re.shape(),
            im.shape()
        );
        Ok(Self { re, im })
    }

    pub fn zeros(shape: Shape4) -> Self {
        Self {
            re: RealTensor::zeros(shape),
            im: RealTensor::zeros(shape),
        }
    }

    pub fn from_real(re: RealTensor<T>) -> Self {
        let im = re.zeros_like();
        Self { re, im }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.shape())
    }

    pub fn shape(&self) -> Shape4 {
        self.re.shape()
    }
    pub fn n(&self) -> usize {
        self.re.n()
    }
    pub fn c(&self) -> usize {
        self.re.c()
    }
    pub fn h(&self) -> usize {
        self.re.h()
    }
    pub fn w(&self) -> usize {
        self.re.w()
    }

    pub fn sample(&self, b: usize) -> Self {
        Self {
            re: self.re.sample(b),
            im: self.im.sample(b),
        }
    }

    pub fn stack(items: &[Self]) -> Result<Self> {
        let re: Vec<_> = items.iter().map(|t| t.re.clone()).collect();
        let im: Vec<_> = items.iter().map(|t| t.im.clone()).collect();
        Ok(Self {
            re: RealTensor::stack(&re)?,
            im: RealTensor::stack(&im)?,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            re: self.re.add(&other.re)?,
            im: self.im.add(&other.im)?,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            re: self.re.sub(&other.re)?,
            im: self.im.sub(&other.im)?,
        })
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            re: self.re.scale(s),
            im: self.im.scale(s),
        }
    }

    /// Pointwise complex product with another tensor of the same shape.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        let re = self.re.zip_map(&other.re, |a, b| a * b)?;
        let re = re.sub(&self.im.zip_map(&other.im, |a, b| a * b)?)?;
        let im = self.re.zip_map(&other.im, |a, b| a * b)?;
        let im = im.add(&self.im.zip_map(&other.re, |a, b| a * b)?)?;
        Ok(Self { re, im })
    }

    pub fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: self.im.scale(-T::one()),
        }
    }

    /// Pointwise multiplication by a real tensor of shape `(1|n, 1|c, h, w)`,
    /// broadcast over batch and channel where the factor has extent one.
    pub fn mul_real_broadcast(&self, factor: &RealTensor<T>) -> Result<Self> {
        let [n, c, h, w] = self.shape();
        let [fn_, fc, fh, fw] = factor.shape();
        ensure_shape!(
            fh == h && fw == w && (fn_ == 1 || fn_ == n) && (fc == 1 || fc == c),
            "cannot broadcast {:?} onto {:?}",
            factor.shape(),
            self.shape()
        );
        let mut out = self.clone();
        for b in 0..n {
            for ch in 0..c {
                let f = factor.plane(if fn_ == 1 { 0 } else { b }, if fc == 1 { 0 } else { ch });
                for (v, &m) in out.re.plane_mut(b, ch).iter_mut().zip(f) {
                    *v *= m;
                }
                for (v, &m) in out.im.plane_mut(b, ch).iter_mut().zip(f) {
                    *v *= m;
                }
            }
        }
        Ok(out)
    }

    /// Squared magnitude per element.
    pub fn abs_sq(&self) -> RealTensor<T> {
        self.re.zip_map(&self.im, |a, b| a * a + b * b).unwrap()
    }

    pub fn norm2(&self) -> T {
        (self.re.sum_sq() + self.im.sum_sq()).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.re
            .max_abs_diff(&other.re)
            .max(self.im.max_abs_diff(&other.im))
    }

    pub fn concat_channels(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            re: concat_channels(&self.re, &other.re)?,
            im: concat_channels(&self.im, &other.im)?,
        })
    }

    pub fn slice_channels(&self, start: usize, end: usize) -> Result<Self> {
        Ok(Self {
            re: self.re.slice_channels(start, end)?,
            im: self.im.slice_channels(start, end)?,
        })
    }

    /// Stack real and imaginary parts as `[re; im]` along channels.
    pub fn to_stacked(&self) -> RealTensor<T> {
        concat_channels(&self.re, &self.im).expect("parts share shape")
    }

    /// Inverse of [`ComplexTensor::to_stacked`]: first half real, second half imaginary.
    pub fn from_stacked(x: &RealTensor<T>) -> Result<Self> {
        ensure_shape!(x.c().is_multiple_of(2), "stacked tensor needs an even channel count, got {}", x.c());
        let half = x.c() / 2;
        Ok(Self {
            re: x.slice_channels(0, half)?,
            im: x.slice_channels(half, x.c())?,
        })
    }

    pub fn all_finite(&self) -> bool {
        self.re.all_finite() && self.im.all_finite()
    }

    pub fn cast<U: Scalar>(&self) -> ComplexTensor<U> {
        ComplexTensor {
            re: self.re.cast(),
            im: self.im.cast(),
        }
    }
}
