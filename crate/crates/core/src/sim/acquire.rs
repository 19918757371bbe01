//! The multi-coil forward model and its zero-filled inverse.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_shape, Result};
use crate::scalar::Scalar;
use crate::sim::{CoilSensitivities, MaskPattern, Phantom, SamplingMask};
use crate::tensor::{fft2c, ifft2c, ComplexTensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionMeta {
    pub seed: u64,
    pub pattern: MaskPattern,
    pub acceleration: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSpaceMeasurement<T> {
    /// Centred k-space, shape `(1, coils, h, w)`, zero where not sampled.
    pub y: ComplexTensor<T>,
    pub mask: SamplingMask,
    pub meta: AcquisitionMeta,
}

impl<T: Scalar> KSpaceMeasurement<T> {
    /// Wraps existing k-space, zeroing every unsampled entry.
    pub fn new(y: ComplexTensor<T>, mask: SamplingMask, seed: u64) -> Result<Self> {
        ensure_shape!(
            y.n() == 1 && y.h() == mask.h && y.w() == mask.w,
            "k-space {:?} does not match a {}x{} mask",
            y.shape(),
            mask.h,
            mask.w
        );
        let mut y = y;
        for c in 0..y.c() {
            for (p, &b) in mask.bits.iter().enumerate() {
                if b == 0 {
                    y.re.plane_mut(0, c)[p] = T::zero();
                    y.im.plane_mut(0, c)[p] = T::zero();
                }
            }
        }
        let meta = AcquisitionMeta {
            seed,
            pattern: mask.pattern,
            acceleration: mask.acceleration,
        };
        Ok(Self { y, mask, meta })
    }

    pub fn coils(&self) -> usize {
        self.y.c()
    }
}

/// `y_i = M ⊙ F(S_i x)` for every coil, the same mask for all coils.
pub fn forward_acquire<T: Scalar>(
    x: &Phantom<T>,
    s: &CoilSensitivities<T>,
    m: &SamplingMask,
) -> Result<KSpaceMeasurement<T>> {
    ensure_shape!(
        x.image.h() == m.h && x.image.w() == m.w,
        "phantom {:?} does not match a {}x{} mask",
        x.image.shape(),
        m.h,
        m.w
    );
    let coil_images = s.apply(&x.image)?;
    KSpaceMeasurement::new(fft2c(&coil_images), m.clone(), x.seed)
}

/// Per-coil inverse FFT of the zero-filled k-space.
pub fn zero_filled_recon<T: Scalar>(y: &KSpaceMeasurement<T>) -> ComplexTensor<T> {
    ifft2c(&y.y)
}
