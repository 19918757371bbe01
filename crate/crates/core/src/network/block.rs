//! One dual-octave block: lift to the working width, split into frequency
//! branches, `K` dual-octave layers with optional dense fusion between the
//! working layers, and a final merge back to `coils` complex channels.

use crate::error::{ensure_shape, Result};
use crate::network::bn::NormMode;
use crate::network::config::BlockConfig;
use crate::network::fuse::{dense_fuse, dense_fuse_backward, DenseFuseUnit, FuseCache};
use crate::octconv::{
    complex_conv2d, complex_conv2d_backward, dual_octconv_backward, dual_octconv_forward,
    merge_frequency, merge_frequency_backward, split_frequency, split_frequency_backward, ComplexBank,
    DualOctKernel, OctComplexFeature,
};
use crate::scalar::Scalar;
use crate::tensor::{ComplexTensor, RealTensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Block<T> {
    /// Complex conv from `coils` to `channels` feature maps.
    pub lift: ComplexBank<T>,
    /// `K` layers; the last one is the merging layer.
    pub layers: Vec<DualOctKernel<T>>,
    /// Fusion after working layer `k` (1-based) sits at index `k - 1`.
    pub fuses: Vec<DenseFuseUnit<T>>,
    pub config: BlockConfig,
    pub coils: usize,
}

#[derive(Debug, Clone)]
pub struct BlockCache<T> {
    input: ComplexTensor<T>,
    /// `X_0 .. X_{K-1}`: the input of every layer.
    feats: Vec<OctComplexFeature<T>>,
    fuse: Vec<FuseCache<T>>,
}

impl<T: Scalar> BlockCache<T> {
    pub(crate) fn fuse_caches(&self) -> &[FuseCache<T>] {
        &self.fuse
    }
}

impl<T: Scalar> Block<T> {
    /// A block with zero kernels and unit BN scales.
    pub fn zeros(config: BlockConfig, coils: usize) -> Self {
        let work = config.working_split();
        let k = config.kernel_size;
        let mut layers: Vec<DualOctKernel<T>> = (1..config.num_layers)
            .map(|_| DualOctKernel::zeros(work, work, k))
            .collect();
        layers.push(DualOctKernel::zeros(work, config.merge_split(coils), k));
        let fuses = if config.dense {
            (1..config.num_layers).map(|k| DenseFuseUnit::new(work, k + 1)).collect()
        } else {
            Vec::new()
        };
        Self {
            lift: ComplexBank::zeros(config.channels, coils, k),
            layers,
            fuses,
            config,
            coils,
        }
    }

    /// Learnable tensors with stable dotted names.
    pub fn tensors(&self) -> Vec<(String, &RealTensor<T>)> {
        let mut out = vec![("lift.re".to_string(), &self.lift.re), ("lift.im".to_string(), &self.lift.im)];
        for (i, l) in self.layers.iter().enumerate() {
            out.extend(l.tensors().into_iter().map(|(n, t)| (format!("layer{}.{n}", i + 1), t)));
        }
        for (i, f) in self.fuses.iter().enumerate() {
            out.extend(f.tensors().into_iter().map(|(n, t)| (format!("fuse{}.{n}", i + 1), t)));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut RealTensor<T>)> {
        let mut out = vec![
            ("lift.re".to_string(), &mut self.lift.re),
            ("lift.im".to_string(), &mut self.lift.im),
        ];
        for (i, l) in self.layers.iter_mut().enumerate() {
            out.extend(l.tensors_mut().into_iter().map(|(n, t)| (format!("layer{}.{n}", i + 1), t)));
        }
        for (i, f) in self.fuses.iter_mut().enumerate() {
            out.extend(f.tensors_mut().into_iter().map(|(n, t)| (format!("fuse{}.{n}", i + 1), t)));
        }
        out
    }

    pub fn buffers(&self) -> Vec<(String, &RealTensor<T>)> {
        let mut out = Vec::new();
        for (i, f) in self.fuses.iter().enumerate() {
            out.extend(f.buffers().into_iter().map(|(n, t)| (format!("fuse{}.{n}", i + 1), t)));
        }
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<(String, &mut RealTensor<T>)> {
        let mut out = Vec::new();
        for (i, f) in self.fuses.iter_mut().enumerate() {
            out.extend(f.buffers_mut().into_iter().map(|(n, t)| (format!("fuse{}.{n}", i + 1), t)));
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Same structure with every tensor set to zero, used for gradients.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(T::zero());
        }
        for (_, t) in z.buffers_mut() {
            t.fill(T::zero());
        }
        z
    }

    pub fn update_running(&mut self, cache: &BlockCache<T>) {
        for (f, c) in self.fuses.iter_mut().zip(cache.fuse_caches()) {
            f.update_running(c);
        }
    }

    /// Maps `(n, coils, h, w)` complex images to `(n, 2·coils, h, w)` real
    /// channels: real parts first, then imaginary parts.
    pub fn forward(&self, x: &ComplexTensor<T>, mode: NormMode) -> Result<(RealTensor<T>, BlockCache<T>)> {
        ensure_shape!(
            x.c() == self.coils,
            "block built for {} coils received {} channels",
            self.coils,
            x.c()
        );
        let lifted = complex_conv2d(x, &self.lift.re, &self.lift.im)?;
        let mut feats = vec![split_frequency(&lifted, self.config.alpha)?];
        let mut fuse = Vec::new();
        let k_total = self.layers.len();
        for k in 1..k_total {
            let y = dual_octconv_forward(&feats[k - 1], &self.layers[k - 1])?;
            let next = if self.config.dense {
                let mut hist: Vec<&OctComplexFeature<T>> = vec![&y];
                hist.extend(feats.iter().rev());
                let (out, cache) = dense_fuse(&hist, &self.fuses[k - 1], mode)?;
                fuse.push(cache);
                out
            } else {
                y
            };
            feats.push(next);
        }
        let last = dual_octconv_forward(&feats[k_total - 1], &self.layers[k_total - 1])?;
        let out = merge_frequency(&last)?;
        Ok((
            out,
            BlockCache {
                input: x.clone(),
                feats,
                fuse,
            },
        ))
    }

    /// Returns the input gradient and the parameter gradients.
    pub fn backward(&self, grad: &RealTensor<T>, cache: &BlockCache<T>) -> Result<(ComplexTensor<T>, Block<T>)> {
        let mut g = self.zeros_like();
        let k_total = self.layers.len();
        let merge_split = self.layers[k_total - 1].out_split;
        let g_last = merge_frequency_backward(grad, merge_split, self.config.alpha)?;
        let mut gfeat: Vec<OctComplexFeature<T>> = cache.feats.iter().map(|f| f.zeros_like()).collect();
        let lg = dual_octconv_backward(&g_last, &cache.feats[k_total - 1], &self.layers[k_total - 1])?;
        gfeat[k_total - 1].add_assign(&lg.x)?;
        g.layers[k_total - 1] = lg.k;
        for k in (1..k_total).rev() {
            // gfeat[k] is complete: later layers and fusions were handled
            let gy = if self.config.dense {
                let (gh, gu) =
                    dense_fuse_backward(&gfeat[k], &self.fuses[k - 1], &cache.fuse[k - 1], &cache.feats[0])?;
                g.fuses[k - 1] = gu;
                // gh[0] belongs to the fresh layer output, gh[j] to X_{k-j}
                for (j, gx) in gh.iter().enumerate().skip(1) {
                    gfeat[k - j].add_assign(gx)?;
                }
                gh.into_iter().next().expect("non-empty history")
            } else {
                gfeat[k].clone()
            };
            let lg = dual_octconv_backward(&gy, &cache.feats[k - 1], &self.layers[k - 1])?;
            gfeat[k - 1].add_assign(&lg.x)?;
            g.layers[k - 1] = lg.k;
        }
        let glifted = split_frequency_backward(&gfeat[0])?;
        let cg = complex_conv2d_backward(&cache.input, &self.lift.re, &self.lift.im, &glifted)?;
        g.lift = ComplexBank { re: cg.kr, im: cg.ki };
        Ok((cg.x, g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::testutil::{random_complex, randomize, small_config};
    use crate::network::Donet;
    use crate::octconv::ChannelSplit;
    use crate::tensor::finite_diff_report;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_block(cfg: crate::network::CascadeConfig, seed: u64) -> Block<f64> {
        let mut m = Donet::<f64>::zeros(cfg).unwrap();
        randomize(&mut m, seed);
        m.blocks.remove(0)
    }

    #[test]
    fn identity_kernels_give_identity_block() {
        let cfg = BlockConfig {
            num_layers: 1,
            channels: 3,
            alpha: 0.0,
            kernel_size: 1,
            dense: false,
        };
        let mut b = Block::<f64>::zeros(cfg, 3);
        for o in 0..3 {
            b.lift.re.set(o, o, 0, 0, 1.0);
            b.layers[0].hh.re.set(o, o, 0, 0, 1.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = random_complex::<f64>(&mut rng, [2, 3, 6, 6]);
        let (y, _) = b.forward(&x, NormMode::Identity).unwrap();
        assert_eq!(y, x.to_stacked());
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let b = random_block(small_config(1, 3, 6, 0.5, 2), 1);
        let x = ComplexTensor::zeros([1, 2, 8, 8]);
        let (y, _) = b.forward(&x, NormMode::Identity).unwrap();
        assert_eq!(y.shape(), [1, 4, 8, 8]);
        assert_eq!(y.max_abs(), 0.0);
    }

    #[test]
    fn matches_hand_chained_operators() {
        let cfg = small_config(1, 2, 8, 0.25, 4);
        let b = random_block(cfg, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_complex::<f64>(&mut rng, [1, 4, 16, 16]);
        let (y, _) = b.forward(&x, NormMode::Train).unwrap();

        let lifted = complex_conv2d(&x, &b.lift.re, &b.lift.im).unwrap();
        let x0 = split_frequency(&lifted, 0.25).unwrap();
        assert_eq!(x0.split(), ChannelSplit { high: 6, low: 2 });
        let y1 = dual_octconv_forward(&x0, &b.layers[0]).unwrap();
        let (x1, _) = dense_fuse(&[&y1, &x0], &b.fuses[0], NormMode::Train).unwrap();
        let y2 = dual_octconv_forward(&x1, &b.layers[1]).unwrap();
        assert_eq!(y2.split(), ChannelSplit { high: 4, low: 4 });
        let expect = merge_frequency(&y2).unwrap();
        assert_eq!(y, expect);
    }

    #[test]
    fn dense_history_grows_per_layer() {
        let b = Block::<f32>::zeros(small_config(1, 4, 8, 0.25, 2).block, 2);
        assert_eq!(b.fuses.len(), 3);
        for (i, f) in b.fuses.iter().enumerate() {
            assert_eq!(f.groups[0].conv1.c(), (i + 2) * 6);
            assert_eq!(f.groups[2].conv1.c(), (i + 2) * 2);
        }
    }

    #[test]
    fn coil_mismatch_is_shape_error() {
        let b = Block::<f32>::zeros(small_config(1, 1, 4, 0.0, 2).block, 2);
        let x = ComplexTensor::zeros([1, 3, 8, 8]);
        assert!(matches!(b.forward(&x, NormMode::Eval), Err(crate::Error::Shape(_))));
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (alpha, dense) in [(0.5, true), (0.0, false), (1.0, true)] {
            let mut cfg = small_config(1, 3, 4, alpha, 2);
            cfg.block.dense = dense;
            let b = random_block(cfg, 4);
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let x = random_complex::<f64>(&mut rng, [2, 2, 4, 4]);
            let wts = random_complex::<f64>(&mut rng, [2, 2, 4, 4]).to_stacked();
            let (_, cache) = b.forward(&x, NormMode::Train).unwrap();
            let (gx, gb) = b.backward(&wts, &cache).unwrap();
            let mut names = vec!["x.re".to_string(), "x.im".to_string()];
            let mut params = vec![x.re.data().to_vec(), x.im.data().to_vec()];
            let mut analytic = vec![gx.re.data().to_vec(), gx.im.data().to_vec()];
            for ((n, t), (_, g)) in b.tensors().into_iter().zip(gb.tensors()) {
                names.push(n);
                params.push(t.data().to_vec());
                analytic.push(g.data().to_vec());
            }
            let f = |p: &[Vec<f64>]| -> crate::Result<f64> {
                let mut bb = b.clone();
                for ((_, t), v) in bb.tensors_mut().into_iter().zip(&p[2..]) {
                    t.data_mut().copy_from_slice(v);
                }
                let xx = ComplexTensor {
                    re: RealTensor::from_vec(x.shape(), p[0].clone()),
                    im: RealTensor::from_vec(x.shape(), p[1].clone()),
                };
                let (y, _) = bb.forward(&xx, NormMode::Train)?;
                Ok(y.data().iter().zip(wts.data()).map(|(a, c)| a * c).sum())
            };
            let rep = finite_diff_report(f, &names, &params, &analytic, 1e-6).unwrap();
            assert!(rep.max_rel_error < 1e-5, "alpha {alpha}: {:?}", rep.worst());
        }
    }
}
