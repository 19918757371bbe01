use crate::error::{ensure_shape, Result};
use crate::scalar::Scalar;
use crate::tensor::ComplexTensor;

/// Mean absolute error over every real and imaginary entry. With equally
/// sized samples this equals the per-sample mean averaged over the batch.
pub fn l1_loss<T: Scalar>(pred: &ComplexTensor<T>, target: &ComplexTensor<T>) -> Result<T> {
    ensure_shape!(
        pred.shape() == target.shape(),
        "loss operands differ: {:?} vs {:?}",
        pred.shape(),
        target.shape()
    );
    let count = T::lit((2 * pred.re.len()) as f64);
    let sum = |a: &[T], b: &[T]| a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + (x - y).abs());
    Ok((sum(pred.re.data(), target.re.data()) + sum(pred.im.data(), target.im.data())) / count)
}

/// Gradient of [`l1_loss`] with respect to `pred` (zero at exact ties).
pub fn l1_loss_grad<T: Scalar>(pred: &ComplexTensor<T>, target: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
    ensure_shape!(pred.shape() == target.shape(), "loss operands differ");
    let inv = T::one() / T::lit((2 * pred.re.len()) as f64);
    let sign = move |a: T, b: T| {
        let d = a - b;
        if d > T::zero() {
            inv
        } else if d < T::zero() {
            -inv
        } else {
            T::zero()
        }
    };
    Ok(ComplexTensor {
        re: pred.re.zip_map(&target.re, sign)?,
        im: pred.im.zip_map(&target.im, sign)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::RealTensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng) -> ComplexTensor<f64> {
        ComplexTensor {
            re: RealTensor::from_fn([2, 3, 4, 5], |_| rng.random_range(-1.0..1.0)),
            im: RealTensor::from_fn([2, 3, 4, 5], |_| rng.random_range(-1.0..1.0)),
        }
    }

    #[test]
    fn identical_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = random(&mut rng);
        assert_eq!(l1_loss(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(&mut rng);
        let b = ComplexTensor {
            re: a.re.map(|v| v + 0.5),
            im: a.im.map(|v| v - 0.5),
        };
        assert!((l1_loss(&b, &a).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (a, b) = (random(&mut rng), random(&mut rng));
        let mut s = 0.0;
        let mut count = 0;
        for i in 0..a.re.len() {
            s += (a.re.data()[i] - b.re.data()[i]).abs();
            s += (a.im.data()[i] - b.im.data()[i]).abs();
            count += 2;
        }
        assert!((l1_loss(&a, &b).unwrap() - s / count as f64).abs() < 1e-14);
    }

    #[test]
    fn shape_mismatch() {
        let a = ComplexTensor::<f32>::zeros([1, 1, 2, 2]);
        let b = ComplexTensor::<f32>::zeros([1, 2, 2, 2]);
        assert!(l1_loss(&a, &b).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b) = (random(&mut rng), random(&mut rng));
        let g = l1_loss_grad(&a, &b).unwrap();
        let eps = 1e-7;
        for i in [0, 7, 31] {
            let mut p = a.clone();
            p.re.data_mut()[i] += eps;
            let mut m = a.clone();
            m.re.data_mut()[i] -= eps;
            let fd = (l1_loss(&p, &b).unwrap() - l1_loss(&m, &b).unwrap()) / (2.0 * eps);
            assert!((fd - g.re.data()[i]).abs() < 1e-8);
        }
    }
}
