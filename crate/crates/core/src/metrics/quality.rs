//! Coil combination and image-quality metrics.

use crate::error::{ensure_shape, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{ComplexTensor, RealTensor};

/// Returned when the error is negligible relative to the peak.
pub const PSNR_SENTINEL: f64 = 99.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Root-sum-of-squares over coils: `(n, coils, h, w)` → `(n, 1, h, w)`.
pub fn coil_combine<T: Scalar>(x: &ComplexTensor<T>) -> RealTensor<T> {
    let [n, c, h, w] = x.shape();
    let mut out = RealTensor::zeros([n, 1, h, w]);
    for b in 0..n {
        let o: &mut [T] = out.plane_mut(b, 0);
        for ch in 0..c {
            for ((acc, &r), &i) in o.iter_mut().zip(x.re.plane(b, ch)).zip(x.im.plane(b, ch)) {
                *acc += r * r + i * i;
            }
        }
        o.iter_mut().for_each(|v| *v = v.sqrt());
    }
    out
}

fn single_plane<T: Scalar>(x: &RealTensor<T>) -> Result<Vec<f64>> {
    ensure_shape!(
        x.n() == 1 && x.c() == 1,
        "metrics take one image plane, got {:?}",
        x.shape()
    );
    Ok(x.data().iter().map(|v| v.as_f64()).collect())
}

/// `10 log10(peak² / MSE)` with `peak = max(reference)`.
pub fn psnr<T: Scalar>(test: &RealTensor<T>, reference: &RealTensor<T>) -> Result<f64> {
    ensure_shape!(
        test.shape() == reference.shape(),
        "psnr operands differ: {:?} vs {:?}",
        test.shape(),
        reference.shape()
    );
    let t = single_plane(test)?;
    let r = single_plane(reference)?;
    let peak = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Config("psnr reference must have a positive maximum".into()));
    }
    let mse = t.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / r.len() as f64;
    if !mse.is_finite() {
        return Err(Error::Numerics("psnr of a non-finite image".into()));
    }
    if mse < 1e-12 * peak * peak {
        return Ok(PSNR_SENTINEL);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Mean luminance, contrast and structure terms alongside the index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimTerms {
    pub ssim: f64,
    pub luminance: f64,
    pub contrast: f64,
    pub structure: f64,
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - r).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian filter, valid positions only.
fn filter(x: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut rows = vec![0.0; h * ow];
    for i in 0..h {
        for j in 0..ow {
            rows[i * ow + j] = (0..k).map(|t| g[t] * x[i * w + j + t]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            out[i * ow + j] = (0..k).map(|t| g[t] * rows[(i + t) * ow + j]).sum();
        }
    }
    out
}

/// Local statistics under an 11x11 Gaussian window (σ = 1.5) with the
/// dynamic range taken from the reference: `L = max(ref) − min(ref)`.
pub fn ssim_terms<T: Scalar>(test: &RealTensor<T>, reference: &RealTensor<T>) -> Result<SsimTerms> {
    ensure_shape!(
        test.shape() == reference.shape(),
        "ssim operands differ: {:?} vs {:?}",
        test.shape(),
        reference.shape()
    );
    let (h, w) = (test.h(), test.w());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Config(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {h}x{w}"
        )));
    }
    let x = single_plane(test)?;
    let y = single_plane(reference)?;
    let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let range = hi - lo;
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let c3 = c2 / 2.0;
    let g = gaussian_window();
    let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mx = filter(&x, h, w, &g);
    let my = filter(&y, h, w, &g);
    let mxx = filter(&prod(&x, &x), h, w, &g);
    let myy = filter(&prod(&y, &y), h, w, &g);
    let mxy = filter(&prod(&x, &y), h, w, &g);
    let count = mx.len() as f64;
    let (mut s_sum, mut l_sum, mut c_sum, mut st_sum) = (0.0, 0.0, 0.0, 0.0);
    for p in 0..mx.len() {
        let vx = (mxx[p] - mx[p] * mx[p]).max(0.0);
        let vy = (myy[p] - my[p] * my[p]).max(0.0);
        let cov = mxy[p] - mx[p] * my[p];
        let l = (2.0 * mx[p] * my[p] + c1) / (mx[p] * mx[p] + my[p] * my[p] + c1);
        let cs = (2.0 * cov + c2) / (vx + vy + c2);
        let sd = (vx * vy).sqrt();
        l_sum += l;
        c_sum += (2.0 * sd + c2) / (vx + vy + c2);
        st_sum += (cov + c3) / (sd + c3);
        s_sum += l * cs;
    }
    let terms = SsimTerms {
        ssim: s_sum / count,
        luminance: l_sum / count,
        contrast: c_sum / count,
        structure: st_sum / count,
    };
    if !terms.ssim.is_finite() {
        return Err(Error::Numerics("ssim is not finite".into()));
    }
    Ok(terms)
}

pub fn ssim<T: Scalar>(test: &RealTensor<T>, reference: &RealTensor<T>) -> Result<f64> {
    Ok(ssim_terms(test, reference)?.ssim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{make_coils, make_phantom, PhantomKind};
    use proptest::prelude::*;

    fn img(h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> RealTensor<f64> {
        RealTensor::from_fn([1, 1, h, w], |[_, _, i, j]| f(i, j))
    }

    #[test]
    fn combine_single_coil_is_magnitude() {
        let x = ComplexTensor {
            re: img(2, 2, |i, j| (i as f64) - 0.5 * j as f64),
            im: img(2, 2, |i, j| (i + j) as f64 * 0.3),
        };
        let c = coil_combine(&x);
        for p in 0..4 {
            assert_eq!(c.data()[p], x.re.data()[p].hypot(x.im.data()[p]));
        }
    }

    #[test]
    fn combine_recovers_magnitude_under_unit_rss_coils() {
        let x = make_phantom::<f64>(PhantomKind::SheppLogan, 32, 32, 2).unwrap().with_linear_phase(1.0, 0.5);
        let s = make_coils::<f64>(32, 32, 4, 0);
        let c = coil_combine(&s.apply(&x.image).unwrap());
        assert!(c.max_abs_diff(&x.magnitude()) < 1e-12);
        assert_eq!(coil_combine(&ComplexTensor::<f32>::zeros([1, 3, 4, 4])).max_abs(), 0.0);
    }

    #[test]
    fn psnr_cases() {
        let r = img(16, 16, |i, j| ((i * j) % 7) as f64 / 6.0);
        assert_eq!(psnr(&r, &r).unwrap(), PSNR_SENTINEL);
        let t = r.map(|v| v + 0.1);
        assert!((psnr(&t, &r).unwrap() - 20.0).abs() < 1e-9);
        let (t2, r2) = (t.scale(2.0), r.scale(2.0));
        assert!((psnr(&t2, &r2).unwrap() - psnr(&t, &r).unwrap()).abs() < 1e-9);
        assert!(psnr(&t, &r.scale(0.0)).is_err());
        assert!(psnr(&img(4, 4, |_, _| 1.0), &r).is_err());
    }

    #[test]
    fn ssim_of_identical_is_one() {
        let r = make_phantom::<f64>(PhantomKind::SheppLogan, 32, 32, 0).unwrap().magnitude();
        assert!((ssim(&r, &r).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverted_binary_image_has_low_ssim() {
        let r = make_phantom::<f64>(PhantomKind::Checker, 32, 32, 0).unwrap().magnitude();
        let t = r.map(|v| 1.0 - v);
        assert!(ssim(&t, &r).unwrap() < 0.1);
    }

    #[test]
    fn offset_only_penalises_luminance() {
        let r = make_phantom::<f64>(PhantomKind::Blobs, 32, 32, 3).unwrap().magnitude();
        let range = r.data().iter().cloned().fold(0.0, f64::max) - r.data().iter().cloned().fold(1.0, f64::min);
        let t = r.map(|v| v + 0.5 * range);
        let terms = ssim_terms(&t, &r).unwrap();
        assert!(terms.ssim < 1.0);
        assert!((terms.structure - 1.0).abs() < 1e-9);
        assert!((terms.contrast - 1.0).abs() < 1e-9);
        assert!(terms.luminance < 1.0);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let r = img(10, 32, |i, _| i as f64);
        assert!(matches!(ssim(&r, &r), Err(Error::Config(_))));
    }

    #[test]
    fn window_is_normalised() {
        let g = gaussian_window();
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(g.len(), 11);
        assert!(g[5] > g[4] && (g[4] - g[6]).abs() < 1e-18);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn ssim_self_is_one_and_psnr_scale_invariant(seed in 0u64..500, s in 0.1f64..10.0) {
            let r = make_phantom::<f64>(PhantomKind::Blobs, 16, 16, seed).unwrap().magnitude();
            prop_assert!((ssim(&r, &r).unwrap() - 1.0).abs() < 1e-9);
            let t = make_phantom::<f64>(PhantomKind::Blobs, 16, 16, seed + 1).unwrap().magnitude();
            let a = psnr(&t, &r).unwrap();
            let b = psnr(&t.scale(s), &r.scale(s)).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
            let v = ssim(&t, &r).unwrap();
            prop_assert!((-1.0..=1.0).contains(&v));
        }
    }
}
