//! SAME-padded, stride-1 2D cross-correlation and its two adjoints.
//!
//! All three kernels are written as row-wise axpy loops over shifted slices so
//! the inner loop vectorizes. Each output plane is owned by one task and
//! accumulated in a fixed `(in_channel, ky, kx)` order.

use super::RealTensor;
use crate::error::{ensure_shape, Error, Result};
use crate::par;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Padding {
    /// Zero padding such that the output has the input's spatial size.
    #[default]
    Same,
}

/// Convolution with explicit stride and padding. Only `stride == 1` with
/// [`Padding::Same`] is supported.
pub fn conv2d_with<T: Scalar>(
    x: &RealTensor<T>,
    k: &RealTensor<T>,
    stride: usize,
    pad: Padding,
) -> Result<RealTensor<T>> {
    if stride != 1 {
        return Err(Error::Config(format!("unsupported stride {stride}")));
    }
    match pad {
        Padding::Same => conv2d(x, k),
    }
}

/// Row range `[lo, hi)` of output positions whose tap at offset `d` stays
/// inside `[0, len)`.
#[inline]
fn valid_range(len: usize, d: isize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (len as isize - d).clamp(0, len as isize) as usize;
    (lo.min(hi), hi)
}

#[inline]
fn axpy_row<T: Scalar>(dst: &mut [T], a: T, src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

/// `y[b, o] = sum_i sum_{ky,kx} k[o, i, ky, kx] * x[b, i, y + ky - ph, x + kx - pw]`.
///
/// `k` has shape `(out, in, kh, kw)`. Output shape is `(n, out, h, w)`.
pub fn conv2d<T: Scalar>(x: &RealTensor<T>, k: &RealTensor<T>) -> Result<RealTensor<T>> {
    let [n, cin, h, w] = x.shape();
    let [cout, kin, kh, kw] = k.shape();
    ensure_shape!(
        kin == cin,
        "conv2d: input has {cin} channels, kernel expects {kin}"
    );
    let (ph, pw) = ((kh as isize - 1) / 2, (kw as isize - 1) / 2);
    let plane = h * w;
    let mut out = RealTensor::zeros([n, cout, h, w]);
    par::for_each_chunk_mut(out.data_mut(), plane, |idx, o| {
        let (b, oc) = (idx / cout, idx % cout);
        for ic in 0..cin {
            let src = x.plane(b, ic);
            for ky in 0..kh {
                let dy = ky as isize - ph;
                let (ylo, yhi) = valid_range(h, dy);
                for kx in 0..kw {
                    let dx = kx as isize - pw;
                    let (xlo, xhi) = valid_range(w, dx);
                    if xlo >= xhi {
                        continue;
                    }
                    let kv = k.at(oc, ic, ky, kx);
                    for y in ylo..yhi {
                        let sy = (y as isize + dy) as usize;
                        let sx = (xlo as isize + dx) as usize;
                        axpy_row(
                            &mut o[y * w + xlo..y * w + xhi],
                            kv,
                            &src[sy * w + sx..sy * w + sx + (xhi - xlo)],
                        );
                    }
                }
            }
        }
    });
    Ok(out)
}

/// Gradient of [`conv2d`] with respect to its input.
pub fn conv2d_backward_input<T: Scalar>(
    grad_out: &RealTensor<T>,
    k: &RealTensor<T>,
) -> Result<RealTensor<T>> {
    let [n, cout, h, w] = grad_out.shape();
    let [kout, cin, kh, kw] = k.shape();
    ensure_shape!(
        kout == cout,
        "conv2d backward: gradient has {cout} channels, kernel produces {kout}"
    );
    let (ph, pw) = ((kh as isize - 1) / 2, (kw as isize - 1) / 2);
    let plane = h * w;
    let mut gin = RealTensor::zeros([n, cin, h, w]);
    par::for_each_chunk_mut(gin.data_mut(), plane, |idx, gi| {
        let (b, ic) = (idx / cin, idx % cin);
        for oc in 0..cout {
            let g = grad_out.plane(b, oc);
            for ky in 0..kh {
                let dy = ky as isize - ph;
                let (ylo, yhi) = valid_range(h, dy);
                for kx in 0..kw {
                    let dx = kx as isize - pw;
                    let (xlo, xhi) = valid_range(w, dx);
                    if xlo >= xhi {
                        continue;
                    }
                    let kv = k.at(oc, ic, ky, kx);
                    for y in ylo..yhi {
                        let sy = (y as isize + dy) as usize;
                        let sx = (xlo as isize + dx) as usize;
                        axpy_row(
                            &mut gi[sy * w + sx..sy * w + sx + (xhi - xlo)],
                            kv,
                            &g[y * w + xlo..y * w + xhi],
                        );
                    }
                }
            }
        }
    });
    Ok(gin)
}

/// Gradient of [`conv2d`] with respect to its kernel, summed over the batch.
pub fn conv2d_backward_kernel<T: Scalar>(
    x: &RealTensor<T>,
    grad_out: &RealTensor<T>,
    kh: usize,
    kw: usize,
) -> Result<RealTensor<T>> {
    let [n, cin, h, w] = x.shape();
    let [gn, cout, gh, gw] = grad_out.shape();
    ensure_shape!(
        n == gn && h == gh && w == gw,
        "conv2d kernel gradient: input {:?} vs gradient {:?}",
        x.shape(),
        grad_out.shape()
    );
    let (ph, pw) = ((kh as isize - 1) / 2, (kw as isize - 1) / 2);
    let mut gk = RealTensor::zeros([cout, cin, kh, kw]);
    par::for_each_chunk_mut(gk.data_mut(), kh * kw, |idx, taps| {
        let (oc, ic) = (idx / cin, idx % cin);
        for ky in 0..kh {
            let dy = ky as isize - ph;
            let (ylo, yhi) = valid_range(h, dy);
            for kx in 0..kw {
                let dx = kx as isize - pw;
                let (xlo, xhi) = valid_range(w, dx);
                let mut acc = T::zero();
                if xlo < xhi {
                    for b in 0..n {
                        let src = x.plane(b, ic);
                        let g = grad_out.plane(b, oc);
                        for y in ylo..yhi {
                            let sy = (y as isize + dy) as usize;
                            let sx = (xlo as isize + dx) as usize;
                            let gr = &g[y * w + xlo..y * w + xhi];
                            let sr = &src[sy * w + sx..sy * w + sx + (xhi - xlo)];
                            acc += gr.iter().zip(sr).fold(T::zero(), |a, (&p, &q)| a + p * q);
                        }
                    }
                }
                taps[ky * kw + kx] = acc;
            }
        }
    });
    Ok(gk)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(shape: [usize; 4], rng: &mut ChaCha8Rng) -> RealTensor<f64> {
        RealTensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    /// Sliding-window oracle with explicit zero padding.
    fn brute_conv(x: &RealTensor<f64>, k: &RealTensor<f64>) -> RealTensor<f64> {
        let [n, cin, h, w] = x.shape();
        let [cout, _, kh, kw] = k.shape();
        let (ph, pw) = ((kh as isize - 1) / 2, (kw as isize - 1) / 2);
        RealTensor::from_fn([n, cout, h, w], |[b, o, y, xx]| {
            let mut s = 0.0;
            for i in 0..cin {
                for a in 0..kh {
                    for c in 0..kw {
                        let sy = y as isize + a as isize - ph;
                        let sx = xx as isize + c as isize - pw;
                        if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w {
                            s += k.at(o, i, a, c) * x.at(b, i, sy as usize, sx as usize);
                        }
                    }
                }
            }
            s
        })
    }

    #[test]
    fn one_by_one_kernel_scales() {
        let x = RealTensor::full([1, 1, 3, 3], 1.0f32);
        let k = RealTensor::full([1, 1, 1, 1], 2.0f32);
        assert!(conv2d(&x, &k).unwrap().data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn impulse_reproduces_flipped_kernel() {
        let mut x = RealTensor::<f64>::zeros([1, 1, 3, 3]);
        x.set(0, 0, 1, 1, 1.0);
        let k = RealTensor::from_vec([1, 1, 3, 3], (1..=9).map(|v| v as f64).collect());
        let y = conv2d(&x, &k).unwrap();
        // y[p] = k[c - p + 1]: the kernel appears rotated by 180 degrees
        for p in 0..3 {
            for q in 0..3 {
                assert_eq!(y.at(0, 0, p, q), k.at(0, 0, 2 - p, 2 - q));
            }
        }
    }

    #[test]
    fn averaging_kernel_on_ramp() {
        let x = RealTensor::from_fn([1, 1, 4, 4], |[_, _, y, xx]| (y * 4 + xx) as f64);
        let k = RealTensor::full([1, 1, 3, 3], 1.0 / 9.0);
        let y = conv2d(&x, &k).unwrap();
        for cy in 1..3 {
            for cx in 1..3 {
                let mut mean = 0.0;
                for dy in 0..3 {
                    for dx in 0..3 {
                        mean += x.at(0, 0, cy + dy - 1, cx + dx - 1) / 9.0;
                    }
                }
                assert!((y.at(0, 0, cy, cx) - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matches_brute_force_for_odd_and_even_kernels() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(kh, kw) in &[(3, 3), (1, 1), (5, 3), (2, 2)] {
            let x = rand_tensor([2, 3, 6, 5], &mut rng);
            let k = rand_tensor([4, 3, kh, kw], &mut rng);
            let d = conv2d(&x, &k).unwrap().max_abs_diff(&brute_conv(&x, &k));
            assert!(d < 1e-12, "{kh}x{kw}: {d}");
        }
    }

    #[test]
    fn rejects_channel_mismatch_and_stride() {
        let x = RealTensor::<f32>::zeros([1, 2, 4, 4]);
        let k = RealTensor::<f32>::zeros([1, 3, 3, 3]);
        assert!(matches!(conv2d(&x, &k), Err(Error::Shape(_))));
        let k = RealTensor::<f32>::zeros([1, 2, 3, 3]);
        assert!(conv2d_with(&x, &k, 2, Padding::Same).is_err());
        assert!(conv2d_with(&x, &k, 1, Padding::Same).is_ok());
    }

    #[test]
    fn linearity_f32() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: RealTensor<f32> = rand_tensor([1, 2, 5, 5], &mut rng).cast();
        let z: RealTensor<f32> = rand_tensor([1, 2, 5, 5], &mut rng).cast();
        let k: RealTensor<f32> = rand_tensor([3, 2, 3, 3], &mut rng).cast();
        let (a, b) = (0.7f32, -1.3f32);
        let mut mix = x.scale(a);
        mix.axpy(b, &z).unwrap();
        let lhs = conv2d(&mix, &k).unwrap();
        let mut rhs = conv2d(&x, &k).unwrap().scale(a);
        rhs.axpy(b, &conv2d(&z, &k).unwrap()).unwrap();
        let rel = lhs.max_abs_diff(&rhs) / rhs.max_abs();
        assert!(rel <= 1e-5, "{rel}");
    }

    #[test]
    fn backward_passes_are_adjoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = rand_tensor([2, 3, 5, 6], &mut rng);
        let k = rand_tensor([4, 3, 3, 3], &mut rng);
        let g = rand_tensor([2, 4, 5, 6], &mut rng);
        let dot = |a: &RealTensor<f64>, b: &RealTensor<f64>| -> f64 {
            a.data().iter().zip(b.data()).map(|(p, q)| p * q).sum()
        };
        let y = conv2d(&x, &k).unwrap();
        let gx = conv2d_backward_input(&g, &k).unwrap();
        let gk = conv2d_backward_kernel(&x, &g, 3, 3).unwrap();
        // <conv(x,k), g> is bilinear, so both adjoints reproduce it
        assert!((dot(&y, &g) - dot(&x, &gx)).abs() < 1e-10);
        assert!((dot(&y, &g) - dot(&k, &gk)).abs() < 1e-10);
    }
}
