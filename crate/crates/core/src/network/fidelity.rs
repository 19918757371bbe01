//! k-space data fidelity: measured frequencies replace predicted ones.

use crate::error::{ensure_shape, Result};
use crate::scalar::Scalar;
use crate::sim::KSpaceMeasurement;
use crate::tensor::{fft2c, ifft2c, ComplexTensor, RealTensor};

fn check<T: Scalar>(x: &ComplexTensor<T>, y: &ComplexTensor<T>, mask: &RealTensor<T>) -> Result<()> {
    ensure_shape!(
        x.shape() == y.shape(),
        "prediction {:?} and k-space {:?} differ",
        x.shape(),
        y.shape()
    );
    let [mn, mc, mh, mw] = mask.shape();
    ensure_shape!(
        mc == 1 && mh == x.h() && mw == x.w() && (mn == 1 || mn == x.n()),
        "mask {:?} does not fit k-space {:?}",
        mask.shape(),
        y.shape()
    );
    Ok(())
}

/// `F⁻¹((1 − M) F(x̂) + M y)` per coil on a batch. `mask` has shape
/// `(1|n, 1, h, w)` with entries 0 or 1.
pub fn data_fidelity_batch<T: Scalar>(
    x_hat: &ComplexTensor<T>,
    y: &ComplexTensor<T>,
    mask: &RealTensor<T>,
) -> Result<ComplexTensor<T>> {
    check(x_hat, y, mask)?;
    let mut k = fft2c(x_hat);
    let [n, c, _, _] = k.shape();
    for b in 0..n {
        let m = mask.plane(if mask.n() == 1 { 0 } else { b }, 0);
        for ch in 0..c {
            let (yr, yi) = (y.re.plane(b, ch), y.im.plane(b, ch));
            let kr = k.re.plane_mut(b, ch);
            for p in 0..m.len() {
                if m[p] != T::zero() {
                    kr[p] = yr[p];
                }
            }
            let ki = k.im.plane_mut(b, ch);
            for p in 0..m.len() {
                if m[p] != T::zero() {
                    ki[p] = yi[p];
                }
            }
        }
    }
    Ok(ifft2c(&k))
}

/// Gradient with respect to `x̂`: `F⁻¹((1 − M) F(g))`. The map is the
/// self-adjoint projection onto unmeasured frequencies.
pub fn data_fidelity_backward<T: Scalar>(grad: &ComplexTensor<T>, mask: &RealTensor<T>) -> Result<ComplexTensor<T>> {
    let zero = grad.zeros_like();
    data_fidelity_batch(grad, &zero, mask)
}

/// Fidelity against a single measurement.
pub fn data_fidelity<T: Scalar>(x_hat: &ComplexTensor<T>, y: &KSpaceMeasurement<T>) -> Result<ComplexTensor<T>> {
    data_fidelity_batch(x_hat, &y.y, &y.mask.to_tensor())
}
