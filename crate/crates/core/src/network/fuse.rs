//! Dense fusion: each working layer's output is concatenated with every
//! earlier feature of the block and squeezed back to the working width by
//! `BN → ReLU → 1x1 conv → BN → ReLU → 3x3 conv`, separately for each of
//! the four feature groups.

use crate::error::{ensure_shape, Result};
use crate::network::bn::{relu, relu_backward, BatchNorm, BnCache, NormMode};
use crate::octconv::{ChannelSplit, OctComplexFeature};
use crate::scalar::Scalar;
use crate::tensor::{conv2d, conv2d_backward_input, conv2d_backward_kernel, RealTensor};

pub const FUSE_KERNEL: usize = 3;
pub const GROUP_NAMES: [&str; 4] = ["r_h", "i_h", "r_l", "i_l"];

#[derive(Debug, Clone, PartialEq)]
pub struct GroupFuse<T> {
    pub bn1: BatchNorm<T>,
    /// Shape `(width, history * width, 1, 1)`.
    pub conv1: RealTensor<T>,
    pub bn2: BatchNorm<T>,
    /// Shape `(width, width, 3, 3)`.
    pub conv2: RealTensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseFuseUnit<T> {
    /// In the order `r_h, i_h, r_l, i_l`.
    pub groups: [GroupFuse<T>; 4],
    pub history: usize,
    pub split: ChannelSplit,
}

#[derive(Debug, Clone)]
pub struct GroupCache<T> {
    bn1: BnCache<T>,
    a1: RealTensor<T>,
    bn2: BnCache<T>,
    a2: RealTensor<T>,
}

#[derive(Debug, Clone)]
pub struct FuseCache<T> {
    groups: Vec<Option<GroupCache<T>>>,
}

impl<T: Scalar> GroupFuse<T> {
    fn new(width: usize, history: usize) -> Self {
        Self {
            bn1: BatchNorm::new(history * width),
            conv1: RealTensor::zeros([width, history * width, 1, 1]),
            bn2: BatchNorm::new(width),
            conv2: RealTensor::zeros([width, width, FUSE_KERNEL, FUSE_KERNEL]),
        }
    }

    fn width(&self) -> usize {
        self.conv2.n()
    }
}

impl<T: Scalar> DenseFuseUnit<T> {
    /// Zero kernels and unit BN scales for `history` concatenated features.
    pub fn new(split: ChannelSplit, history: usize) -> Self {
        let g = |w| GroupFuse::new(w, history);
        Self {
            groups: [g(split.high), g(split.high), g(split.low), g(split.low)],
            history,
            split,
        }
    }

    /// Learnable tensors, named like `r_h.conv1`.
    pub fn tensors(&self) -> Vec<(String, &RealTensor<T>)> {
        let mut out = Vec::new();
        for (name, g) in GROUP_NAMES.iter().zip(&self.groups) {
            out.push((format!("{name}.bn1.gamma"), &g.bn1.gamma));
            out.push((format!("{name}.bn1.beta"), &g.bn1.beta));
            out.push((format!("{name}.conv1"), &g.conv1));
            out.push((format!("{name}.bn2.gamma"), &g.bn2.gamma));
            out.push((format!("{name}.bn2.beta"), &g.bn2.beta));
            out.push((format!("{name}.conv2"), &g.conv2));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut RealTensor<T>)> {
        let mut out = Vec::new();
        for (name, g) in GROUP_NAMES.iter().zip(self.groups.iter_mut()) {
            out.push((format!("{name}.bn1.gamma"), &mut g.bn1.gamma));
            out.push((format!("{name}.bn1.beta"), &mut g.bn1.beta));
            out.push((format!("{name}.conv1"), &mut g.conv1));
            out.push((format!("{name}.bn2.gamma"), &mut g.bn2.gamma));
            out.push((format!("{name}.bn2.beta"), &mut g.bn2.beta));
            out.push((format!("{name}.conv2"), &mut g.conv2));
        }
        out
    }

    /// Running BN statistics.
    pub fn buffers(&self) -> Vec<(String, &RealTensor<T>)> {
        let mut out = Vec::new();
        for (name, g) in GROUP_NAMES.iter().zip(&self.groups) {
            out.push((format!("{name}.bn1.running_mean"), &g.bn1.running_mean));
            out.push((format!("{name}.bn1.running_var"), &g.bn1.running_var));
            out.push((format!("{name}.bn2.running_mean"), &g.bn2.running_mean));
            out.push((format!("{name}.bn2.running_var"), &g.bn2.running_var));
        }
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<(String, &mut RealTensor<T>)> {
        let mut out = Vec::new();
        for (name, g) in GROUP_NAMES.iter().zip(self.groups.iter_mut()) {
            out.push((format!("{name}.bn1.running_mean"), &mut g.bn1.running_mean));
            out.push((format!("{name}.bn1.running_var"), &mut g.bn1.running_var));
            out.push((format!("{name}.bn2.running_mean"), &mut g.bn2.running_mean));
            out.push((format!("{name}.bn2.running_var"), &mut g.bn2.running_var));
        }
        out
    }

    pub fn update_running(&mut self, cache: &FuseCache<T>) {
        for (g, c) in self.groups.iter_mut().zip(&cache.groups) {
            if let Some(c) = c {
                g.bn1.update_running(&c.bn1);
                g.bn2.update_running(&c.bn2);
            }
        }
    }
}

fn concat_many<T: Scalar>(parts: &[&RealTensor<T>]) -> RealTensor<T> {
    let [n, _, h, w] = parts[0].shape();
    let c: usize = parts.iter().map(|p| p.c()).sum();
    let mut out = RealTensor::zeros([n, c, h, w]);
    for b in 0..n {
        let mut ch = 0;
        for p in parts {
            for pc in 0..p.c() {
                out.plane_mut(b, ch).copy_from_slice(p.plane(b, pc));
                ch += 1;
            }
        }
    }
    out
}

/// Fuses `history` (newest first) into a feature of the working width.
pub fn dense_fuse<T: Scalar>(
    history: &[&OctComplexFeature<T>],
    unit: &DenseFuseUnit<T>,
    mode: NormMode,
) -> Result<(OctComplexFeature<T>, FuseCache<T>)> {
    ensure_shape!(
        history.len() == unit.history,
        "fusion unit expects {} features, got {}",
        unit.history,
        history.len()
    );
    for f in history {
        f.validate()?;
        ensure_shape!(
            f.split() == unit.split && f.hw() == history[0].hw() && f.batch() == history[0].batch(),
            "inconsistent fusion history: split {:?} at {:?} vs {:?} at {:?}",
            f.split(),
            f.hw(),
            unit.split,
            history[0].hw()
        );
    }
    let mut outs = Vec::with_capacity(4);
    let mut caches = Vec::with_capacity(4);
    for (gi, g) in unit.groups.iter().enumerate() {
        let parts: Vec<&RealTensor<T>> = history.iter().map(|f| f.groups()[gi]).collect();
        let [n, _, h, w] = parts[0].shape();
        if g.width() == 0 {
            outs.push(RealTensor::zeros([n, 0, h, w]));
            caches.push(None);
            continue;
        }
        let cat = concat_many(&parts);
        let (z1, bn1) = g.bn1.forward(&cat, mode)?;
        let a1 = relu(&z1);
        let c1 = conv2d(&a1, &g.conv1)?;
        let (z2, bn2) = g.bn2.forward(&c1, mode)?;
        let a2 = relu(&z2);
        outs.push(conv2d(&a2, &g.conv2)?);
        caches.push(Some(GroupCache { bn1, a1, bn2, a2 }));
    }
    let [r_h, i_h, r_l, i_l]: [RealTensor<T>; 4] = outs.try_into().expect("four groups");
    Ok((
        OctComplexFeature {
            r_h,
            i_h,
            r_l,
            i_l,
            alpha: history[0].alpha,
        },
        FuseCache { groups: caches },
    ))
}

/// Returns gradients for each history entry (newest first) and the unit's
/// parameters (BN running statistics in the result are zero).
pub fn dense_fuse_backward<T: Scalar>(
    grad: &OctComplexFeature<T>,
    unit: &DenseFuseUnit<T>,
    cache: &FuseCache<T>,
    template: &OctComplexFeature<T>,
) -> Result<(Vec<OctComplexFeature<T>>, DenseFuseUnit<T>)> {
    let mut gunit = DenseFuseUnit::new(unit.split, unit.history);
    for g in gunit.groups.iter_mut() {
        g.bn1.gamma.fill(T::zero());
        g.bn2.gamma.fill(T::zero());
        g.bn1.running_var.fill(T::zero());
        g.bn2.running_var.fill(T::zero());
    }
    let mut ghist = vec![template.zeros_like(); unit.history];
    for (gi, g) in unit.groups.iter().enumerate() {
        let Some(c) = &cache.groups[gi] else { continue };
        let gout = grad.groups()[gi];
        let [_, _, kh, kw] = g.conv2.shape();
        let ga2 = conv2d_backward_input(gout, &g.conv2)?;
        let gconv2 = conv2d_backward_kernel(&c.a2, gout, kh, kw)?;
        let gz2 = relu_backward(&ga2, &c.a2)?;
        let (gc1, dg2, db2) = g.bn2.backward(&gz2, &c.bn2)?;
        let ga1 = conv2d_backward_input(&gc1, &g.conv1)?;
        let gconv1 = conv2d_backward_kernel(&c.a1, &gc1, 1, 1)?;
        let gz1 = relu_backward(&ga1, &c.a1)?;
        let (gcat, dg1, db1) = g.bn1.backward(&gz1, &c.bn1)?;
        let width = g.width();
        for (k, gh) in ghist.iter_mut().enumerate() {
            *gh.groups_mut()[gi] = gcat.slice_channels(k * width, (k + 1) * width)?;
        }
        let gg = &mut gunit.groups[gi];
        gg.conv1 = gconv1;
        gg.conv2 = gconv2;
        gg.bn1.gamma = dg1;
        gg.bn1.beta = db1;
        gg.bn2.gamma = dg2;
        gg.bn2.beta = db2;
    }
    Ok((ghist, gunit))
}
