use crate::error::{ensure_shape, Result};
use crate::scalar::Scalar;
use crate::tensor::{conv2d, conv2d_backward_input, conv2d_backward_kernel, ComplexTensor, RealTensor};

/// Complex convolution written as its real block form:
///
/// ```text
/// [re]   [Kr  -Ki] [Xr]
/// [im] = [Ki   Kr] [Xi]
/// ```
pub fn complex_conv2d<T: Scalar>(
    x: &ComplexTensor<T>,
    kr: &RealTensor<T>,
    ki: &RealTensor<T>,
) -> Result<ComplexTensor<T>> {
    let (re, im) = cconv(&x.re, &x.im, kr, ki)?;
    Ok(ComplexTensor { re, im })
}

pub(crate) fn cconv<T: Scalar>(
    xr: &RealTensor<T>,
    xi: &RealTensor<T>,
    kr: &RealTensor<T>,
    ki: &RealTensor<T>,
) -> Result<(RealTensor<T>, RealTensor<T>)> {
    ensure_shape!(
        kr.shape() == ki.shape(),
        "real kernel {:?} and imaginary kernel {:?} differ",
        kr.shape(),
        ki.shape()
    );
    let re = conv2d(xr, kr)?.sub(&conv2d(xi, ki)?)?;
    let im = conv2d(xr, ki)?.add(&conv2d(xi, kr)?)?;
    Ok((re, im))
}

#[derive(Debug, Clone)]
pub struct ComplexConvGrad<T> {
    pub x: ComplexTensor<T>,
    pub kr: RealTensor<T>,
    pub ki: RealTensor<T>,
}

/// Gradients of [`complex_conv2d`] with respect to the input and both kernels.
pub fn complex_conv2d_backward<T: Scalar>(
    x: &ComplexTensor<T>,
    kr: &RealTensor<T>,
    ki: &RealTensor<T>,
    grad: &ComplexTensor<T>,
) -> Result<ComplexConvGrad<T>> {
    let (gxr, gxi, gkr, gki) = cconv_backward(&x.re, &x.im, kr, ki, &grad.re, &grad.im)?;
    Ok(ComplexConvGrad {
        x: ComplexTensor { re: gxr, im: gxi },
        kr: gkr,
        ki: gki,
    })
}

pub(crate) type CconvGrads<T> = (RealTensor<T>, RealTensor<T>, RealTensor<T>, RealTensor<T>);

/// Returns `(d xr, d xi, d kr, d ki)`; the transpose of the block matrix.
pub(crate) fn cconv_backward<T: Scalar>(
    xr: &RealTensor<T>,
    xi: &RealTensor<T>,
    kr: &RealTensor<T>,
    ki: &RealTensor<T>,
    gre: &RealTensor<T>,
    gim: &RealTensor<T>,
) -> Result<CconvGrads<T>> {
    let [_, _, kh, kw] = kr.shape();
    let gxr = conv2d_backward_input(gre, kr)?.add(&conv2d_backward_input(gim, ki)?)?;
    let gxi = conv2d_backward_input(gim, kr)?.sub(&conv2d_backward_input(gre, ki)?)?;
    let gkr = conv2d_backward_kernel(xr, gre, kh, kw)?.add(&conv2d_backward_kernel(xi, gim, kh, kw)?)?;
    let gki = conv2d_backward_kernel(xr, gim, kh, kw)?.sub(&conv2d_backward_kernel(xi, gre, kh, kw)?)?;
    Ok((gxr, gxi, gkr, gki))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: f64) -> RealTensor<f64> {
        RealTensor::from_vec([1, 1, 1, 1], vec![v])
    }

    #[test]
    fn multiplication_by_i() {
        let x = ComplexTensor { re: scalar(1.0), im: scalar(0.0) };
        let y = complex_conv2d(&x, &scalar(0.0), &scalar(1.0)).unwrap();
        assert_eq!((y.re.data()[0], y.im.data()[0]), (0.0, 1.0));
    }

    #[test]
    fn scalar_complex_product() {
        let (a, b, c, d) = (1.5, -0.25, 2.0, 3.0);
        let x = ComplexTensor { re: scalar(a), im: scalar(b) };
        let y = complex_conv2d(&x, &scalar(c), &scalar(d)).unwrap();
        assert_eq!(y.re.data()[0], a * c - b * d);
        assert_eq!(y.im.data()[0], a * d + b * c);
    }

    #[test]
    fn matches_brute_force_complex_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut r = |s: [usize; 4]| RealTensor::from_fn(s, |_| rng.random_range(-1.0..1.0f64));
        let x = ComplexTensor { re: r([1, 2, 6, 6]), im: r([1, 2, 6, 6]) };
        let (kr, ki) = (r([3, 2, 3, 3]), r([3, 2, 3, 3]));
        let y = complex_conv2d(&x, &kr, &ki).unwrap();
        for o in 0..3 {
            for py in 0..6 {
                for px in 0..6 {
                    let (mut sr, mut si) = (0.0f64, 0.0f64);
                    for i in 0..2 {
                        for a in 0..3 {
                            for b in 0..3 {
                                let (sy, sx) = (py as isize + a as isize - 1, px as isize + b as isize - 1);
                                if sy < 0 || sx < 0 || sy >= 6 || sx >= 6 {
                                    continue;
                                }
                                let (xr, xi) = (x.re.at(0, i, sy as usize, sx as usize), x.im.at(0, i, sy as usize, sx as usize));
                                let (kre, kim) = (kr.at(o, i, a, b), ki.at(o, i, a, b));
                                sr += kre * xr - kim * xi;
                                si += kre * xi + kim * xr;
                            }
                        }
                    }
                    assert!((y.re.at(0, o, py, px) - sr).abs() < 1e-12);
                    assert!((y.im.at(0, o, py, px) - si).abs() < 1e-12);
                }
            }
        }
        // same composition of four real convolutions, same summation order
        let re = conv2d(&x.re, &kr).unwrap().sub(&conv2d(&x.im, &ki).unwrap()).unwrap();
        let im = conv2d(&x.re, &ki).unwrap().add(&conv2d(&x.im, &kr).unwrap()).unwrap();
        assert_eq!(y.re, re);
        assert_eq!(y.im, im);
    }

    #[test]
    fn scalar_gradients_match_closed_form() {
        // L = gr * Re(kx) + gi * Im(kx) with x = a+bi, k = c+di
        let (a, b, c, d, gr, gi) = (0.3, -0.7, 1.1, 0.4, 0.9, -0.2);
        let x = ComplexTensor { re: scalar(a), im: scalar(b) };
        let g = ComplexTensor { re: scalar(gr), im: scalar(gi) };
        let grads = complex_conv2d_backward(&x, &scalar(c), &scalar(d), &g).unwrap();
        let close = |p: f64, q: f64| assert!((p - q).abs() < 1e-15, "{p} vs {q}");
        close(grads.x.re.data()[0], gr * c + gi * d);
        close(grads.x.im.data()[0], -gr * d + gi * c);
        close(grads.kr.data()[0], gr * a + gi * b);
        close(grads.ki.data()[0], -gr * b + gi * a);
    }

    #[test]
    fn mismatched_kernels_rejected() {
        let x = ComplexTensor::<f32>::zeros([1, 1, 3, 3]);
        let kr = RealTensor::zeros([1, 1, 3, 3]);
        let ki = RealTensor::zeros([1, 1, 1, 1]);
        assert!(complex_conv2d(&x, &kr, &ki).is_err());
    }
}
