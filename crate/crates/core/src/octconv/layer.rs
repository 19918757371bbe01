use super::complex::{cconv, cconv_backward};
use super::feature::{ChannelSplit, OctComplexFeature};
use crate::error::{ensure_shape, Result};
use crate::scalar::Scalar;
use crate::tensor::{
    avg_pool2, avg_pool2_backward, upsample_nearest2, upsample_nearest2_backward, RealTensor,
};

/// One of the four octave routing paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Path {
    HighToHigh,
    HighToLow,
    LowToHigh,
    LowToLow,
}

impl Path {
    pub const ALL: [Path; 4] = [
        Path::HighToHigh,
        Path::HighToLow,
        Path::LowToHigh,
        Path::LowToLow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Path::HighToHigh => "hh",
            Path::HighToLow => "hl",
            Path::LowToHigh => "lh",
            Path::LowToLow => "ll",
        }
    }

    /// Whether the convolution for this path runs on the half-resolution grid.
    pub fn at_low_resolution(self) -> bool {
        !matches!(self, Path::HighToHigh)
    }

    fn channels(self, input: ChannelSplit, output: ChannelSplit) -> (usize, usize) {
        match self {
            Path::HighToHigh => (output.high, input.high),
            Path::HighToLow => (output.low, input.high),
            Path::LowToHigh => (output.high, input.low),
            Path::LowToLow => (output.low, input.low),
        }
    }
}

/// Real and imaginary kernels of one complex convolution, `(out, in, k, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexBank<T> {
    pub re: RealTensor<T>,
    pub im: RealTensor<T>,
}

impl<T: Scalar> ComplexBank<T> {
    pub fn zeros(out: usize, inp: usize, k: usize) -> Self {
        Self {
            re: RealTensor::zeros([out, inp, k, k]),
            im: RealTensor::zeros([out, inp, k, k]),
        }
    }
}

/// The eight kernel banks of a dual-octave layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DualOctKernel<T> {
    pub hh: ComplexBank<T>,
    pub hl: ComplexBank<T>,
    pub lh: ComplexBank<T>,
    pub ll: ComplexBank<T>,
    pub kernel_size: usize,
    pub in_split: ChannelSplit,
    pub out_split: ChannelSplit,
}

impl<T: Scalar> DualOctKernel<T> {
    pub fn zeros(in_split: ChannelSplit, out_split: ChannelSplit, kernel_size: usize) -> Self {
        let bank = |p: Path| {
            let (o, i) = p.channels(in_split, out_split);
            ComplexBank::zeros(o, i, kernel_size)
        };
        Self {
            hh: bank(Path::HighToHigh),
            hl: bank(Path::HighToLow),
            lh: bank(Path::LowToHigh),
            ll: bank(Path::LowToLow),
            kernel_size,
            in_split,
            out_split,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.in_split, self.out_split, self.kernel_size)
    }

    pub fn bank(&self, p: Path) -> &ComplexBank<T> {
        match p {
            Path::HighToHigh => &self.hh,
            Path::HighToLow => &self.hl,
            Path::LowToHigh => &self.lh,
            Path::LowToLow => &self.ll,
        }
    }

    pub fn bank_mut(&mut self, p: Path) -> &mut ComplexBank<T> {
        match p {
            Path::HighToHigh => &mut self.hh,
            Path::HighToLow => &mut self.hl,
            Path::LowToHigh => &mut self.lh,
            Path::LowToLow => &mut self.ll,
        }
    }

    /// The eight real tensors with stable names such as `hh.re`.
    pub fn tensors(&self) -> Vec<(String, &RealTensor<T>)> {
        Path::ALL
            .iter()
            .flat_map(|&p| {
                let b = self.bank(p);
                [
                    (format!("{}.re", p.name()), &b.re),
                    (format!("{}.im", p.name()), &b.im),
                ]
            })
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut RealTensor<T>)> {
        let Self { hh, hl, lh, ll, .. } = self;
        let mut out = Vec::with_capacity(8);
        for (p, b) in [
            (Path::HighToHigh, hh),
            (Path::HighToLow, hl),
            (Path::LowToHigh, lh),
            (Path::LowToLow, ll),
        ] {
            out.push((format!("{}.re", p.name()), &mut b.re));
            out.push((format!("{}.im", p.name()), &mut b.im));
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn output_alpha(&self, fallback: f64) -> f64 {
        let total = self.out_split.total();
        if total == 0 {
            fallback
        } else {
            self.out_split.low as f64 / total as f64
        }
    }
}

fn check_input<T: Scalar>(x: &OctComplexFeature<T>, k: &DualOctKernel<T>) -> Result<()> {
    x.validate()?;
    ensure_shape!(
        x.split() == k.in_split,
        "feature split {:?} does not match kernel input split {:?}",
        x.split(),
        k.in_split
    );
    Ok(())
}

/// Octave routing combined with complex arithmetic:
///
/// ```text
/// Y^H = K^{H→H} * X^H + u(K^{L→H} * X^L)
/// Y^L = K^{L→L} * X^L + K^{H→L} * p(X^H)
/// ```
///
/// where every `*` is a complex convolution, `u` nearest 2x upsampling and
/// `p` 2x2 average pooling. There are no bias terms.
pub fn dual_octconv_forward<T: Scalar>(
    x: &OctComplexFeature<T>,
    k: &DualOctKernel<T>,
) -> Result<OctComplexFeature<T>> {
    check_input(x, k)?;
    let (hh_r, hh_i) = cconv(&x.r_h, &x.i_h, &k.hh.re, &k.hh.im)?;
    let (lh_r, lh_i) = cconv(&x.r_l, &x.i_l, &k.lh.re, &k.lh.im)?;
    let (ll_r, ll_i) = cconv(&x.r_l, &x.i_l, &k.ll.re, &k.ll.im)?;
    let (pr, pi) = (avg_pool2(&x.r_h)?, avg_pool2(&x.i_h)?);
    let (hl_r, hl_i) = cconv(&pr, &pi, &k.hl.re, &k.hl.im)?;
    Ok(OctComplexFeature {
        r_h: hh_r.add(&upsample_nearest2(&lh_r))?,
        i_h: hh_i.add(&upsample_nearest2(&lh_i))?,
        r_l: ll_r.add(&hl_r)?,
        i_l: ll_i.add(&hl_i)?,
        alpha: k.output_alpha(x.alpha),
    })
}

#[derive(Debug, Clone)]
pub struct DualOctGrad<T> {
    pub x: OctComplexFeature<T>,
    pub k: DualOctKernel<T>,
}

/// Exact adjoint of [`dual_octconv_forward`] given the saved layer input.
pub fn dual_octconv_backward<T: Scalar>(
    grad_out: &OctComplexFeature<T>,
    x: &OctComplexFeature<T>,
    k: &DualOctKernel<T>,
) -> Result<DualOctGrad<T>> {
    check_input(x, k)?;
    ensure_shape!(
        grad_out.split() == k.out_split && grad_out.hw() == x.hw(),
        "output gradient split {:?} does not match kernel output split {:?}",
        grad_out.split(),
        k.out_split
    );
    let mut gk = k.zeros_like();

    // H→H
    let (gxr_h, gxi_h, gkr, gki) =
        cconv_backward(&x.r_h, &x.i_h, &k.hh.re, &k.hh.im, &grad_out.r_h, &grad_out.i_h)?;
    gk.hh = super::ComplexBank { re: gkr, im: gki };

    // L→H: the path output was upsampled before being added
    let (gu_r, gu_i) = (
        upsample_nearest2_backward(&grad_out.r_h)?,
        upsample_nearest2_backward(&grad_out.i_h)?,
    );
    let (mut gxr_l, mut gxi_l, gkr, gki) =
        cconv_backward(&x.r_l, &x.i_l, &k.lh.re, &k.lh.im, &gu_r, &gu_i)?;
    gk.lh = super::ComplexBank { re: gkr, im: gki };

    // L→L
    let (a, b, gkr, gki) =
        cconv_backward(&x.r_l, &x.i_l, &k.ll.re, &k.ll.im, &grad_out.r_l, &grad_out.i_l)?;
    gxr_l.add_assign(&a)?;
    gxi_l.add_assign(&b)?;
    gk.ll = super::ComplexBank { re: gkr, im: gki };

    // H→L: the path input was pooled
    let (pr, pi) = (avg_pool2(&x.r_h)?, avg_pool2(&x.i_h)?);
    let (gpr, gpi, gkr, gki) =
        cconv_backward(&pr, &pi, &k.hl.re, &k.hl.im, &grad_out.r_l, &grad_out.i_l)?;
    gk.hl = super::ComplexBank { re: gkr, im: gki };
    let gxr_h = gxr_h.add(&avg_pool2_backward(&gpr))?;
    let gxi_h = gxi_h.add(&avg_pool2_backward(&gpi))?;

    Ok(DualOctGrad {
        x: OctComplexFeature {
            r_h: gxr_h,
            i_h: gxi_h,
            r_l: gxr_l,
            i_l: gxi_l,
            alpha: x.alpha,
        },
        k: gk,
    })
}
