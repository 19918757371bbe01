//! Synthetic ground-truth images.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{ComplexTensor, RealTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    SheppLogan,
    Blobs,
    Checker,
}

impl PhantomKind {
    pub fn name(self) -> &'static str {
        match self {
            PhantomKind::SheppLogan => "shepp_logan",
            PhantomKind::Blobs => "blobs",
            PhantomKind::Checker => "checker",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom<T> {
    /// Shape `(1, 1, h, w)`, magnitude in `[0, 1]`.
    pub image: ComplexTensor<T>,
    pub kind: PhantomKind,
    pub seed: u64,
}

// (intensity, semi-axis a, semi-axis b, x0, y0, rotation in degrees), the
// higher-contrast variant of the classic head phantom.
const SHEPP_LOGAN: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];

/// Pixel centre in normalised coordinates, `x` to the right and `y` up.
fn coords(i: usize, j: usize, h: usize, w: usize) -> (f64, f64) {
    let x = (2 * j + 1) as f64 / w as f64 - 1.0;
    let y = 1.0 - (2 * i + 1) as f64 / h as f64;
    (x, y)
}

fn shepp_logan(h: usize, w: usize, seed: u64) -> Vec<f64> {
    // seed 0 is the canonical phantom; other seeds jitter every ellipse
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ellipses = SHEPP_LOGAN;
    if seed != 0 {
        for e in ellipses.iter_mut() {
            e[0] *= rng.random_range(0.8..1.2);
            e[1] *= rng.random_range(0.9..1.1);
            e[2] *= rng.random_range(0.9..1.1);
            e[3] += rng.random_range(-0.03..0.03);
            e[4] += rng.random_range(-0.03..0.03);
            e[5] += rng.random_range(-10.0..10.0);
        }
    }
    let mut img = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            let (x, y) = coords(i, j, h, w);
            let mut v = 0.0;
            for &[a0, a, b, x0, y0, deg] in &ellipses {
                let (s, c) = (deg * PI / 180.0).sin_cos();
                let (dx, dy) = (x - x0, y - y0);
                let u = dx * c + dy * s;
                let t = -dx * s + dy * c;
                if (u / a).powi(2) + (t / b).powi(2) <= 1.0 {
                    v += a0;
                }
            }
            img[i * w + j] = v.max(0.0);
        }
    }
    img
}

fn blobs(h: usize, w: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(4..=8);
    let blobs: Vec<[f64; 4]> = (0..count)
        .map(|_| {
            [
                rng.random_range(0.3..1.0),
                rng.random_range(-0.6..0.6),
                rng.random_range(-0.6..0.6),
                rng.random_range(0.08..0.3),
            ]
        })
        .collect();
    let mut img = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            let (x, y) = coords(i, j, h, w);
            img[i * w + j] = blobs
                .iter()
                .map(|&[amp, cx, cy, s]| amp * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp())
                .sum();
        }
    }
    img
}

fn checker(h: usize, w: usize) -> Vec<f64> {
    (0..h * w)
        .map(|k| (((k / w) / 4 + (k % w) / 4) % 2) as f64)
        .collect()
}

/// Generates a magnitude phantom, normalised so its maximum is one.
pub fn make_phantom<T: Scalar>(kind: PhantomKind, h: usize, w: usize, seed: u64) -> Result<Phantom<T>> {
    if h < 16 || w < 16 || !h.is_multiple_of(2) || !w.is_multiple_of(2) {
        return Err(Error::Config(format!("phantom size {h}x{w} must be even and at least 16")));
    }
    let mut img = match kind {
        PhantomKind::SheppLogan => shepp_logan(h, w, seed),
        PhantomKind::Blobs => blobs(h, w, seed),
        PhantomKind::Checker => checker(h, w),
    };
    let peak = img.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        img.iter_mut().for_each(|v| *v /= peak);
    }
    let re = RealTensor::from_vec([1, 1, h, w], img.into_iter().map(T::lit).collect());
    Ok(Phantom {
        image: ComplexTensor::from_real(re),
        kind,
        seed,
    })
}

impl<T: Scalar> Phantom<T> {
    /// Multiplies by `exp(i (kx x + ky y))` in normalised coordinates.
    pub fn with_linear_phase(mut self, kx: f64, ky: f64) -> Self {
        let (h, w) = (self.image.h(), self.image.w());
        for i in 0..h {
            for j in 0..w {
                let (x, y) = coords(i, j, h, w);
                let (s, c) = (kx * x + ky * y).sin_cos();
                let m = self.image.re.at(0, 0, i, j).as_f64();
                self.image.re.set(0, 0, i, j, T::lit(m * c));
                self.image.im.set(0, 0, i, j, T::lit(m * s));
            }
        }
        self
    }

    pub fn magnitude(&self) -> RealTensor<T> {
        self.image.abs_sq().map(|v| v.sqrt())
    }
}
