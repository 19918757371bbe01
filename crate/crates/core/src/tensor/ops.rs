use super::RealTensor;
use crate::error::{ensure_shape, Result};
use crate::par;
use crate::scalar::Scalar;

/// 2x2 average pooling with stride 2.
pub fn avg_pool2<T: Scalar>(x: &RealTensor<T>) -> Result<RealTensor<T>> {
    let [n, c, h, w] = x.shape();
    ensure_shape!(
        h % 2 == 0 && w % 2 == 0,
        "avg_pool2 needs even spatial dims, got {h}x{w}"
    );
    let (oh, ow) = (h / 2, w / 2);
    let quarter = T::lit(0.25);
    let mut out = RealTensor::zeros([n, c, oh, ow]);
    par::for_each_chunk_mut(out.data_mut(), oh * ow, |plane, o| {
        let src = &x.data()[plane * h * w..(plane + 1) * h * w];
        for y in 0..oh {
            let r0 = &src[2 * y * w..2 * y * w + w];
            let r1 = &src[(2 * y + 1) * w..(2 * y + 1) * w + w];
            for xx in 0..ow {
                let s = (r0[2 * xx] + r0[2 * xx + 1]) + (r1[2 * xx] + r1[2 * xx + 1]);
                o[y * ow + xx] = s * quarter;
            }
        }
    });
    Ok(out)
}

/// Adjoint of [`avg_pool2`]: each gradient is spread as `g/4` over its 2x2 block.
pub fn avg_pool2_backward<T: Scalar>(grad: &RealTensor<T>) -> RealTensor<T> {
    upsample_nearest2(grad).scale(T::lit(0.25))
}

/// Nearest-neighbour 2x upsampling.
pub fn upsample_nearest2<T: Scalar>(x: &RealTensor<T>) -> RealTensor<T> {
    let [n, c, h, w] = x.shape();
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = RealTensor::zeros([n, c, oh, ow]);
    par::for_each_chunk_mut(out.data_mut(), oh * ow, |plane, o| {
        let src = &x.data()[plane * h * w..(plane + 1) * h * w];
        for y in 0..oh {
            let row = &src[(y / 2) * w..(y / 2) * w + w];
            for (xx, v) in o[y * ow..(y + 1) * ow].iter_mut().enumerate() {
                *v = row[xx / 2];
            }
        }
    });
    out
}

/// Adjoint of [`upsample_nearest2`]: 2x2 block sums.
pub fn upsample_nearest2_backward<T: Scalar>(grad: &RealTensor<T>) -> Result<RealTensor<T>> {
    Ok(avg_pool2(grad)?.scale(T::lit(4.0)))
}

/// Concatenate along channels, `a` first.
pub fn concat_channels<T: Scalar>(a: &RealTensor<T>, b: &RealTensor<T>) -> Result<RealTensor<T>> {
    let [na, ca, ha, wa] = a.shape();
    let [nb, cb, hb, wb] = b.shape();
    // a zero-channel operand carries no spatial information worth checking
    if ca == 0 && na == nb {
        return Ok(b.clone());
    }
    if cb == 0 && na == nb {
        return Ok(a.clone());
    }
    ensure_shape!(
        na == nb && ha == hb && wa == wb,
        "concat_channels: {:?} vs {:?}",
        a.shape(),
        b.shape()
    );
    let p = ha * wa;
    let mut data = Vec::with_capacity(na * (ca + cb) * p);
    for s in 0..na {
        data.extend_from_slice(&a.data()[s * ca * p..(s + 1) * ca * p]);
        data.extend_from_slice(&b.data()[s * cb * p..(s + 1) * cb * p]);
    }
    Ok(RealTensor::from_vec([na, ca + cb, ha, wa], data))
}

/// Split channels at `first`: the adjoint of [`concat_channels`].
pub fn split_channels<T: Scalar>(
    x: &RealTensor<T>,
    first: usize,
) -> Result<(RealTensor<T>, RealTensor<T>)> {
    Ok((x.slice_channels(0, first)?, x.slice_channels(first, x.c())?))
}
