//! Adam with bias correction.

use crate::error::{ensure_shape, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::RealTensor;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    /// First moments, one per parameter tensor.
    pub m: Vec<RealTensor<T>>,
    /// Second moments.
    pub v: Vec<RealTensor<T>>,
    /// Completed update steps.
    pub step: u64,
    /// Coupled L2 coefficient added to every gradient (zero by default).
    pub weight_decay: f64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a RealTensor<T>>) -> Self {
        let m: Vec<_> = params.into_iter().map(|p| p.zeros_like()).collect();
        Self {
            v: m.clone(),
            m,
            step: 0,
            weight_decay: 0.0,
        }
    }
}

/// One bias-corrected Adam update with learning rate `lr_t`. Non-finite
/// gradients reject the step and leave parameters and state untouched.
pub fn adam_step<T: Scalar>(
    params: &mut [&mut RealTensor<T>],
    grads: &[&RealTensor<T>],
    state: &mut AdamState<T>,
    lr_t: f64,
) -> Result<()> {
    ensure_shape!(
        params.len() == grads.len() && params.len() == state.m.len(),
        "adam got {} parameters, {} gradients and {} moments",
        params.len(),
        grads.len(),
        state.m.len()
    );
    if !(lr_t >= 0.0) || !lr_t.is_finite() {
        return Err(Error::Config(format!("learning rate {lr_t} must be finite and non-negative")));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        ensure_shape!(
            p.shape() == g.shape() && p.shape() == state.m[i].shape(),
            "parameter {i}: shape {:?}, gradient {:?}, moment {:?}",
            p.shape(),
            g.shape(),
            state.m[i].shape()
        );
        if !g.all_finite() {
            return Err(Error::Numerics(format!("gradient {i} is not finite")));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::lit(BETA1), T::lit(BETA2));
    let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
    let c1 = T::lit(1.0 - BETA1.powi(t));
    let c2 = T::lit(1.0 - BETA2.powi(t));
    let (lr, eps, wd) = (T::lit(lr_t), T::lit(EPSILON), T::lit(state.weight_decay));
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (j, (pv, &gv)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            let gv = gv + wd * *pv;
            m[j] = b1 * m[j] + one_b1 * gv;
            v[j] = b2 * v[j] + one_b2 * gv * gv;
            let mh = m[j] / c1;
            let vh = v[j] / c2;
            *pv -= lr * mh / (vh.sqrt() + eps);
        }
    }
    Ok(())
}
