use crate::error::{ensure_shape, Result};
use crate::scalar::Scalar;
use crate::tensor::{
    avg_pool2, avg_pool2_backward, concat_channels, upsample_nearest2, upsample_nearest2_backward,
    ComplexTensor, RealTensor,
};

/// Number of high- and low-frequency channels in a group of `c` channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct ChannelSplit {
    pub high: usize,
    pub low: usize,
}

impl ChannelSplit {
    pub fn total(&self) -> usize {
        self.high + self.low
    }
}

/// `low = round_half_up(alpha * c)`, `high = c - low`.
pub fn split_counts(c: usize, alpha: f64) -> ChannelSplit {
    let low = ((alpha * c as f64) + 0.5).floor().clamp(0.0, c as f64) as usize;
    ChannelSplit { high: c - low, low }
}

/// Complex features split into a full-resolution high-frequency branch and
/// a half-resolution low-frequency branch.
#[derive(Debug, Clone, PartialEq)]
pub struct OctComplexFeature<T> {
    pub r_h: RealTensor<T>,
    pub i_h: RealTensor<T>,
    pub r_l: RealTensor<T>,
    pub i_l: RealTensor<T>,
    pub alpha: f64,
}

impl<T: Scalar> OctComplexFeature<T> {
    /// Zero feature with `split` channels on an `h x w` high-resolution grid.
    pub fn zeros(n: usize, split: ChannelSplit, h: usize, w: usize, alpha: f64) -> Self {
        let hs = [n, split.high, h, w];
        let ls = [n, split.low, h / 2, w / 2];
        Self {
            r_h: RealTensor::zeros(hs),
            i_h: RealTensor::zeros(hs),
            r_l: RealTensor::zeros(ls),
            i_l: RealTensor::zeros(ls),
            alpha,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            r_h: self.r_h.zeros_like(),
            i_h: self.i_h.zeros_like(),
            r_l: self.r_l.zeros_like(),
            i_l: self.i_l.zeros_like(),
            alpha: self.alpha,
        }
    }

    pub fn split(&self) -> ChannelSplit {
        ChannelSplit {
            high: self.r_h.c(),
            low: self.r_l.c(),
        }
    }

    pub fn batch(&self) -> usize {
        self.r_h.n()
    }

    /// High-resolution spatial size.
    pub fn hw(&self) -> (usize, usize) {
        (self.r_h.h(), self.r_h.w())
    }

    /// The four groups in the fixed order `r_h, i_h, r_l, i_l`.
    pub fn groups(&self) -> [&RealTensor<T>; 4] {
        [&self.r_h, &self.i_h, &self.r_l, &self.i_l]
    }

    pub fn groups_mut(&mut self) -> [&mut RealTensor<T>; 4] {
        [&mut self.r_h, &mut self.i_h, &mut self.r_l, &mut self.i_l]
    }

    pub fn from_groups(groups: [RealTensor<T>; 4], alpha: f64) -> Result<Self> {
        let [r_h, i_h, r_l, i_l] = groups;
        let f = Self {
            r_h,
            i_h,
            r_l,
            i_l,
            alpha,
        };
        f.validate()?;
        Ok(f)
    }

    /// Check the pairing and half-resolution invariants.
    pub fn validate(&self) -> Result<()> {
        ensure_shape!(
            self.r_h.shape() == self.i_h.shape() && self.r_l.shape() == self.i_l.shape(),
            "real/imaginary groups disagree: {:?}/{:?}, {:?}/{:?}",
            self.r_h.shape(),
            self.i_h.shape(),
            self.r_l.shape(),
            self.i_l.shape()
        );
        let [nh, _, h, w] = self.r_h.shape();
        let [nl, _, lh, lw] = self.r_l.shape();
        ensure_shape!(
            nh == nl && lh * 2 == h && lw * 2 == w,
            "low-frequency grid {lh}x{lw} is not half of {h}x{w}"
        );
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            r_h: self.r_h.add(&other.r_h)?,
            i_h: self.i_h.add(&other.i_h)?,
            r_l: self.r_l.add(&other.r_l)?,
            i_l: self.i_l.add(&other.i_l)?,
            alpha: self.alpha,
        })
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.r_h.add_assign(&other.r_h)?;
        self.i_h.add_assign(&other.i_h)?;
        self.r_l.add_assign(&other.r_l)?;
        self.i_l.add_assign(&other.i_l)?;
        Ok(())
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            r_h: self.r_h.scale(s),
            i_h: self.i_h.scale(s),
            r_l: self.r_l.scale(s),
            i_l: self.i_l.scale(s),
            alpha: self.alpha,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.groups()
            .iter()
            .zip(other.groups())
            .fold(T::zero(), |m, (a, b)| m.max(a.max_abs_diff(b)))
    }

    pub fn max_abs(&self) -> T {
        self.groups().iter().fold(T::zero(), |m, g| m.max(g.max_abs()))
    }
}

/// Pool the first `round(alpha * c)` channels into the low-frequency branch;
/// the rest pass through as the high-frequency branch.
pub fn split_frequency<T: Scalar>(x: &ComplexTensor<T>, alpha: f64) -> Result<OctComplexFeature<T>> {
    ensure_shape!(
        (0.0..=1.0).contains(&alpha),
        "alpha must lie in [0, 1], got {alpha}"
    );
    let [_, c, h, w] = x.shape();
    ensure_shape!(
        h % 2 == 0 && w % 2 == 0,
        "frequency split needs even spatial dims, got {h}x{w}"
    );
    let s = split_counts(c, alpha);
    Ok(OctComplexFeature {
        r_l: avg_pool2(&x.re.slice_channels(0, s.low)?)?,
        i_l: avg_pool2(&x.im.slice_channels(0, s.low)?)?,
        r_h: x.re.slice_channels(s.low, c)?,
        i_h: x.im.slice_channels(s.low, c)?,
        alpha,
    })
}

/// Adjoint of [`split_frequency`].
pub fn split_frequency_backward<T: Scalar>(grad: &OctComplexFeature<T>) -> Result<ComplexTensor<T>> {
    Ok(ComplexTensor {
        re: concat_channels(&avg_pool2_backward(&grad.r_l), &grad.r_h)?,
        im: concat_channels(&avg_pool2_backward(&grad.i_l), &grad.i_h)?,
    })
}

/// `u(c(r_l, i_l), 2) + c(r_h, i_h)`. Output channels: real half, then
/// imaginary half. An empty branch contributes nothing; otherwise both
/// branches must carry the same number of channels.
pub fn merge_frequency<T: Scalar>(x: &OctComplexFeature<T>) -> Result<RealTensor<T>> {
    x.validate()?;
    let high = concat_channels(&x.r_h, &x.i_h)?;
    if x.r_l.c() == 0 {
        return Ok(high);
    }
    let low = upsample_nearest2(&concat_channels(&x.r_l, &x.i_l)?);
    if x.r_h.c() == 0 {
        return Ok(low);
    }
    ensure_shape!(
        x.r_l.c() == x.r_h.c(),
        "merge needs equal branch widths, got {} low vs {} high",
        x.r_l.c(),
        x.r_h.c()
    );
    low.add(&high)
}

/// Adjoint of [`merge_frequency`] for a feature with the given split on an
/// `h x w` grid.
pub fn merge_frequency_backward<T: Scalar>(
    grad: &RealTensor<T>,
    split: ChannelSplit,
    alpha: f64,
) -> Result<OctComplexFeature<T>> {
    let [n, c, h, w] = grad.shape();
    let width = split.high.max(split.low);
    ensure_shape!(
        c == 2 * width,
        "merge gradient has {c} channels, expected {}",
        2 * width
    );
    let mut out = OctComplexFeature::zeros(n, split, h, w, alpha);
    if split.high > 0 {
        out.r_h = grad.slice_channels(0, width)?;
        out.i_h = grad.slice_channels(width, c)?;
    }
    if split.low > 0 {
        let g = upsample_nearest2_backward(grad)?;
        out.r_l = g.slice_channels(0, width)?;
        out.i_l = g.slice_channels(width, c)?;
    }
    Ok(out)
}
