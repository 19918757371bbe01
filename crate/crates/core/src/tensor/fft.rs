//! Orthonormal 2D DFTs over the trailing two axes, backed by `rustfft`.
//!
//! Both directions scale by `1/sqrt(h*w)`, so the transforms are unitary and
//! Parseval holds exactly up to rounding. The `*c` variants use the centered
//! k-space layout (DC at `(h/2, w/2)`) used for masks and measurements.

use rustfft::num_complex::Complex;

use super::{ComplexTensor, RealTensor};
use crate::par;
use crate::scalar::Scalar;

fn transform<T: Scalar>(x: &ComplexTensor<T>, inverse: bool, centered: bool) -> ComplexTensor<T> {
    let [n, c, h, w] = x.shape();
    let plane = h * w;
    if plane == 0 || n * c == 0 {
        return x.clone();
    }
    let scale = T::one() / T::lit((plane as f64).sqrt());
    let planes: Vec<Vec<Complex<T>>> = par::map_range(n * c, |idx| {
        let (b, ch) = (idx / c, idx % c);
        let (re, im) = (x.re.plane(b, ch), x.im.plane(b, ch));
        let mut buf: Vec<Complex<T>> = if centered {
            // ifftshift: output[i] = input[(i + floor(n/2)) mod n]
            let (sh, sw) = (h / 2, w / 2);
            let mut v = Vec::with_capacity(plane);
            for y in 0..h {
                let sy = (y + sh) % h;
                for xx in 0..w {
                    let sx = (xx + sw) % w;
                    v.push(Complex::new(re[sy * w + sx], im[sy * w + sx]));
                }
            }
            v
        } else {
            re.iter().zip(im).map(|(&a, &b)| Complex::new(a, b)).collect()
        };
        T::fft_plan(w, inverse).process(&mut buf);
        let mut col = vec![Complex::new(T::zero(), T::zero()); plane];
        for y in 0..h {
            for xx in 0..w {
                col[xx * h + y] = buf[y * w + xx];
            }
        }
        T::fft_plan(h, inverse).process(&mut col);
        for y in 0..h {
            for xx in 0..w {
                buf[y * w + xx] = col[xx * h + y] * scale;
            }
        }
        if centered {
            // fftshift: output[i] = input[(i + ceil(n/2)) mod n]
            let (sh, sw) = (h - h / 2, w - w / 2);
            let mut v = Vec::with_capacity(plane);
            for y in 0..h {
                let sy = (y + sh) % h;
                for xx in 0..w {
                    v.push(buf[sy * w + (xx + sw) % w]);
                }
            }
            buf = v;
        }
        buf
    });
    let mut re = Vec::with_capacity(n * c * plane);
    let mut im = Vec::with_capacity(n * c * plane);
    for p in planes {
        for z in p {
            re.push(z.re);
            im.push(z.im);
        }
    }
    ComplexTensor {
        re: RealTensor::from_vec([n, c, h, w], re),
        im: RealTensor::from_vec([n, c, h, w], im),
    }
}

/// Forward DFT with DC at index `(0, 0)`.
pub fn fft2<T: Scalar>(x: &ComplexTensor<T>) -> ComplexTensor<T> {
    transform(x, false, false)
}

/// Inverse of [`fft2`].
pub fn ifft2<T: Scalar>(x: &ComplexTensor<T>) -> ComplexTensor<T> {
    transform(x, true, false)
}

/// Forward DFT in centered layout: image origin and DC both at `(h/2, w/2)`.
pub fn fft2c<T: Scalar>(x: &ComplexTensor<T>) -> ComplexTensor<T> {
    transform(x, false, true)
}

/// Inverse of [`fft2c`].
pub fn ifft2c<T: Scalar>(x: &ComplexTensor<T>) -> ComplexTensor<T> {
    transform(x, true, true)
}
