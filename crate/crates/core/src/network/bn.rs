//! Per-channel batch normalisation and the split (real-valued) ReLU.

use crate::error::{ensure_shape, Result};
use crate::scalar::Scalar;
use crate::tensor::RealTensor;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// How normalisation layers behave during a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Normalise with batch statistics.
    Train,
    /// Normalise with running statistics.
    Eval,
    /// Normalisation is the identity map. Used for algebraic tests.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    /// Scale, shape `(1, c, 1, 1)`.
    pub gamma: RealTensor<T>,
    /// Shift, shape `(1, c, 1, 1)`.
    pub beta: RealTensor<T>,
    pub running_mean: RealTensor<T>,
    pub running_var: RealTensor<T>,
}

#[derive(Debug, Clone)]
pub struct BnCache<T> {
    mode: NormMode,
    xhat: RealTensor<T>,
    /// `1 / sqrt(var + eps)` per channel.
    inv_std: Vec<T>,
    /// Batch mean and unbiased variance, for the running-statistics update.
    pub batch_mean: Vec<T>,
    pub batch_var: Vec<T>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(c: usize) -> Self {
        Self {
            gamma: RealTensor::full([1, c, 1, 1], T::one()),
            beta: RealTensor::zeros([1, c, 1, 1]),
            running_mean: RealTensor::zeros([1, c, 1, 1]),
            running_var: RealTensor::full([1, c, 1, 1], T::one()),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.c()
    }

    pub fn forward(&self, x: &RealTensor<T>, mode: NormMode) -> Result<(RealTensor<T>, BnCache<T>)> {
        let [n, c, h, w] = x.shape();
        ensure_shape!(
            c == self.channels(),
            "batch norm over {} channels applied to {c}",
            self.channels()
        );
        let eps = T::lit(BN_EPS);
        let count = n * h * w;
        let mut mean = vec![T::zero(); c];
        let mut var = vec![T::zero(); c];
        let mut inv_std = vec![T::one(); c];
        let mut unbiased = vec![T::zero(); c];
        match mode {
            NormMode::Train => {
                let cnt = T::lit(count as f64);
                for ch in 0..c {
                    let mut s = T::zero();
                    for b in 0..n {
                        s += x.plane(b, ch).iter().fold(T::zero(), |a, &v| a + v);
                    }
                    let m = s / cnt;
                    let mut q = T::zero();
                    for b in 0..n {
                        q += x.plane(b, ch).iter().fold(T::zero(), |a, &v| a + (v - m) * (v - m));
                    }
                    mean[ch] = m;
                    var[ch] = q / cnt;
                    unbiased[ch] = if count > 1 { q / T::lit((count - 1) as f64) } else { T::zero() };
                    inv_std[ch] = T::one() / (var[ch] + eps).sqrt();
                }
            }
            NormMode::Eval => {
                for ch in 0..c {
                    mean[ch] = self.running_mean.data()[ch];
                    inv_std[ch] = T::one() / (self.running_var.data()[ch] + eps).sqrt();
                }
            }
            NormMode::Identity => {}
        }
        let mut xhat = x.clone();
        let mut y = x.clone();
        if mode != NormMode::Identity {
            for b in 0..n {
                for ch in 0..c {
                    let (m, s) = (mean[ch], inv_std[ch]);
                    let (g, be) = (self.gamma.data()[ch], self.beta.data()[ch]);
                    for v in xhat.plane_mut(b, ch).iter_mut() {
                        *v = (*v - m) * s;
                    }
                    for (o, &xh) in y.plane_mut(b, ch).iter_mut().zip(xhat.plane(b, ch)) {
                        *o = g * xh + be;
                    }
                }
            }
        }
        Ok((
            y,
            BnCache {
                mode,
                xhat,
                inv_std,
                batch_mean: mean,
                batch_var: unbiased,
            },
        ))
    }

    /// Returns `(d x, d gamma, d beta)`.
    pub fn backward(
        &self,
        grad: &RealTensor<T>,
        cache: &BnCache<T>,
    ) -> Result<(RealTensor<T>, RealTensor<T>, RealTensor<T>)> {
        let [n, c, h, w] = grad.shape();
        ensure_shape!(grad.shape() == cache.xhat.shape(), "batch norm gradient shape mismatch");
        let mut dgamma = RealTensor::zeros([1, c, 1, 1]);
        let mut dbeta = RealTensor::zeros([1, c, 1, 1]);
        if cache.mode == NormMode::Identity {
            return Ok((grad.clone(), dgamma, dbeta));
        }
        let mut dx = grad.zeros_like();
        let cnt = T::lit((n * h * w) as f64);
        for ch in 0..c {
            let mut sg = T::zero();
            let mut sgx = T::zero();
            for b in 0..n {
                for (&g, &xh) in grad.plane(b, ch).iter().zip(cache.xhat.plane(b, ch)) {
                    sg += g;
                    sgx += g * xh;
                }
            }
            dgamma.data_mut()[ch] = sgx;
            dbeta.data_mut()[ch] = sg;
            let scale = self.gamma.data()[ch] * cache.inv_std[ch];
            for b in 0..n {
                let xh = cache.xhat.plane(b, ch);
                let g = grad.plane(b, ch);
                let out = dx.plane_mut(b, ch);
                match cache.mode {
                    NormMode::Train => {
                        for i in 0..out.len() {
                            out[i] = scale * (g[i] - sg / cnt - xh[i] * sgx / cnt);
                        }
                    }
                    _ => {
                        for i in 0..out.len() {
                            out[i] = scale * g[i];
                        }
                    }
                }
            }
        }
        Ok((dx, dgamma, dbeta))
    }

    /// Exponential moving average of batch statistics.
    pub fn update_running(&mut self, cache: &BnCache<T>) {
        if cache.mode != NormMode::Train {
            return;
        }
        let m = T::lit(BN_MOMENTUM);
        let keep = T::one() - m;
        for ch in 0..self.channels() {
            let rm = &mut self.running_mean.data_mut()[ch];
            *rm = keep * *rm + m * cache.batch_mean[ch];
            let rv = &mut self.running_var.data_mut()[ch];
            *rv = keep * *rv + m * cache.batch_var[ch];
        }
    }
}

pub fn relu<T: Scalar>(x: &RealTensor<T>) -> RealTensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient of [`relu`] given its output.
pub fn relu_backward<T: Scalar>(grad: &RealTensor<T>, out: &RealTensor<T>) -> Result<RealTensor<T>> {
    grad.zip_map(out, |g, o| if o > T::zero() { g } else { T::zero() })
}
