//! Synthetic receive-coil sensitivity maps.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;
use crate::tensor::{ComplexTensor, RealTensor};

#[derive(Debug, Clone, PartialEq)]
pub struct CoilSensitivities<T> {
    /// Shape `(1, coils, h, w)`; root-sum-of-squares of magnitudes is one.
    pub maps: ComplexTensor<T>,
}

const LOBE_WIDTH: f64 = 0.7;

/// Gaussian lobes centred on equally spaced points of the field-of-view
/// border, each with a gentle phase ramp, normalised pixelwise to unit RSS.
pub fn make_coils<T: Scalar>(h: usize, w: usize, coils: usize, seed: u64) -> CoilSensitivities<T> {
    let coils = coils.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = rng.random_range(0.0..2.0 * PI / coils as f64);
    let mut re = vec![0.0f64; coils * h * w];
    let mut im = vec![0.0f64; coils * h * w];
    for k in 0..coils {
        let theta = offset + 2.0 * PI * k as f64 / coils as f64;
        let (cy, cx) = theta.sin_cos();
        let slope = rng.random_range(0.5..1.5);
        for i in 0..h {
            for j in 0..w {
                let x = (2 * j + 1) as f64 / w as f64 - 1.0;
                let y = 1.0 - (2 * i + 1) as f64 / h as f64;
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                let mag = (-d2 / (2.0 * LOBE_WIDTH * LOBE_WIDTH)).exp();
                let phase = theta + slope * (x * cx + y * cy);
                let idx = (k * h + i) * w + j;
                re[idx] = mag * phase.cos();
                im[idx] = mag * phase.sin();
            }
        }
    }
    for p in 0..h * w {
        let rss = (0..coils)
            .map(|k| re[k * h * w + p].powi(2) + im[k * h * w + p].powi(2))
            .sum::<f64>()
            .sqrt();
        for k in 0..coils {
            re[k * h * w + p] /= rss;
            im[k * h * w + p] /= rss;
        }
    }
    let cast = |v: Vec<f64>| RealTensor::from_vec([1, coils, h, w], v.into_iter().map(T::lit).collect());
    CoilSensitivities {
        maps: ComplexTensor { re: cast(re), im: cast(im) },
    }
}

impl<T: Scalar> CoilSensitivities<T> {
    pub fn coils(&self) -> usize {
        self.maps.c()
    }

    /// Coil images `S_i x` for a single-channel image `x` of shape `(1, 1, h, w)`.
    pub fn apply(&self, x: &ComplexTensor<T>) -> crate::Result<ComplexTensor<T>> {
        crate::error::ensure_shape!(
            x.shape() == [1, 1, self.maps.h(), self.maps.w()],
            "image {:?} does not match coil maps {:?}",
            x.shape(),
            self.maps.shape()
        );
        let mut out = self.maps.clone();
        for k in 0..self.coils() {
            let (sr, si) = (self.maps.re.plane(0, k), self.maps.im.plane(0, k));
            let (xr, xi) = (x.re.plane(0, 0), x.im.plane(0, 0));
            let ore: Vec<T> = (0..xr.len()).map(|p| sr[p] * xr[p] - si[p] * xi[p]).collect();
            let oim: Vec<T> = (0..xr.len()).map(|p| sr[p] * xi[p] + si[p] * xr[p]).collect();
            out.re.plane_mut(0, k).copy_from_slice(&ore);
            out.im.plane_mut(0, k).copy_from_slice(&oim);
        }
        Ok(out)
    }
}
