//! Parameter initialisation.

use std::f64::consts::PI;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Weibull;

use crate::error::{Error, Result};
use crate::network::{CascadeConfig, Donet};
use crate::scalar::Scalar;
use crate::tensor::{RealTensor, Shape4};

/// Complex kernel with Rayleigh magnitude (`σ = 1/√fan_in`) and uniform
/// phase on `(−π, π)`: `K_r = ρ cos θ`, `K_i = ρ sin θ`.
pub fn init_complex_kernel<T: Scalar>(
    shape: Shape4,
    fan_in: usize,
    seed: u64,
) -> Result<(RealTensor<T>, RealTensor<T>)> {
    if fan_in == 0 {
        return Err(Error::Config("fan_in must be at least 1".into()));
    }
    let sigma = 1.0 / (fan_in as f64).sqrt();
    // a Rayleigh(σ) variable is Weibull with shape 2 and scale σ√2
    let rho = Weibull::new(sigma * std::f64::consts::SQRT_2, 2.0).expect("valid Weibull parameters");
    let theta = Uniform::new(-PI, PI).expect("valid range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len: usize = shape.iter().product();
    let mut re = Vec::with_capacity(len);
    let mut im = Vec::with_capacity(len);
    for _ in 0..len {
        let r: f64 = rho.sample(&mut rng);
        let (s, c) = theta.sample(&mut rng).sin_cos();
        re.push(T::lit(r * c));
        im.push(T::lit(r * s));
    }
    Ok((RealTensor::from_vec(shape, re), RealTensor::from_vec(shape, im)))
}

/// He-uniform kernel for a real conv preceded by a ReLU:
/// `U(−b, b)` with `b = √(6 / fan_in)`.
pub fn init_real_kernel<T: Scalar>(shape: Shape4, seed: u64) -> RealTensor<T> {
    let fan_in = (shape[1] * shape[2] * shape[3]).max(1);
    let bound = (6.0 / fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("valid range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RealTensor::from_vec(shape, (0..shape.iter().product()).map(|_| T::lit(dist.sample(&mut rng))).collect())
}

fn tensor_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64)
}

/// A trainable cascade: complex banks get the Rayleigh/phase scheme with
/// `fan_in = (input channels of the layer) · k²`, dense-fusion convs get
/// He-uniform weights, BN starts at unit scale and zero shift.
pub fn init_model<T: Scalar>(config: CascadeConfig, seed: u64) -> Result<Donet<T>> {
    let mut model = Donet::zeros(config)?;
    let mut idx = 0;
    for block in model.blocks.iter_mut() {
        let k2 = block.config.kernel_size * block.config.kernel_size;
        let s = block.lift.re.shape();
        let (re, im) = init_complex_kernel(s, s[1] * k2, tensor_seed(seed, idx))?;
        block.lift.re = re;
        block.lift.im = im;
        idx += 1;
        for layer in block.layers.iter_mut() {
            let fan_in = layer.in_split.total() * k2;
            for p in crate::octconv::Path::ALL {
                let bank = layer.bank_mut(p);
                let (re, im) = init_complex_kernel(bank.re.shape(), fan_in, tensor_seed(seed, idx))?;
                bank.re = re;
                bank.im = im;
                idx += 1;
            }
        }
        for fuse in block.fuses.iter_mut() {
            for g in fuse.groups.iter_mut() {
                g.conv1 = init_real_kernel(g.conv1.shape(), tensor_seed(seed, idx));
                g.conv2 = init_real_kernel(g.conv2.shape(), tensor_seed(seed, idx + 1));
                idx += 2;
            }
        }
    }
    Ok(model)
}
