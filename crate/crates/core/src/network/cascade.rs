//! The unrolled cascade: zero-filled start, then `T` rounds of block and
//! data fidelity.

use crate::error::{ensure_shape, Result};
use crate::network::block::{Block, BlockCache};
use crate::network::bn::NormMode;
use crate::network::config::CascadeConfig;
use crate::network::fidelity::{data_fidelity_backward, data_fidelity_batch};
use crate::scalar::Scalar;
use crate::sim::{KSpaceMeasurement, Sample};
use crate::tensor::{ifft2c, ComplexTensor, RealTensor};

/// A stack of measurements with matching geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    /// Centred k-space `(n, coils, h, w)`, zero where unsampled.
    pub kspace: ComplexTensor<T>,
    /// `(n, 1, h, w)` zeros and ones.
    pub mask: RealTensor<T>,
    /// Fully-sampled coil images, when known.
    pub target: Option<ComplexTensor<T>>,
}

impl<T: Scalar> Batch<T> {
    pub fn from_measurement(y: &KSpaceMeasurement<T>) -> Self {
        Self {
            kspace: y.y.clone(),
            mask: y.mask.to_tensor(),
            target: None,
        }
    }

    pub fn from_samples(samples: &[&Sample<T>]) -> Result<Self> {
        ensure_shape!(!samples.is_empty(), "empty batch");
        let kspace: Vec<_> = samples.iter().map(|s| s.measurement.y.clone()).collect();
        let masks: Vec<_> = samples.iter().map(|s| s.measurement.mask.to_tensor()).collect();
        let targets: Vec<_> = samples.iter().map(|s| s.target.clone()).collect();
        Ok(Self {
            kspace: ComplexTensor::stack(&kspace)?,
            mask: RealTensor::stack(&masks)?,
            target: Some(ComplexTensor::stack(&targets)?),
        })
    }

    pub fn len(&self) -> usize {
        self.kspace.n()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Zero-filled images, the cascade input.
    pub fn zero_filled(&self) -> ComplexTensor<T> {
        ifft2c(&self.kspace)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Donet<T> {
    pub config: CascadeConfig,
    pub blocks: Vec<Block<T>>,
}

#[derive(Debug, Clone)]
pub struct CascadeCache<T> {
    blocks: Vec<BlockCache<T>>,
    mask: RealTensor<T>,
}

impl<T: Scalar> Donet<T> {
    /// A cascade with zero kernels and unit BN scales; see
    /// `train::init_model` for a trainable starting point.
    pub fn zeros(config: CascadeConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            blocks: (0..config.num_blocks)
                .map(|_| Block::zeros(config.block, config.coils))
                .collect(),
        })
    }

    pub fn tensors(&self) -> Vec<(String, &RealTensor<T>)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            out.extend(b.tensors().into_iter().map(|(n, t)| (format!("block{}.{n}", i + 1), t)));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut RealTensor<T>)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter_mut().enumerate() {
            out.extend(b.tensors_mut().into_iter().map(|(n, t)| (format!("block{}.{n}", i + 1), t)));
        }
        out
    }

    pub fn buffers(&self) -> Vec<(String, &RealTensor<T>)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            out.extend(b.buffers().into_iter().map(|(n, t)| (format!("block{}.{n}", i + 1), t)));
        }
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<(String, &mut RealTensor<T>)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter_mut().enumerate() {
            out.extend(b.buffers_mut().into_iter().map(|(n, t)| (format!("block{}.{n}", i + 1), t)));
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.blocks.iter().map(|b| b.param_count()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config,
            blocks: self.blocks.iter().map(|b| b.zeros_like()).collect(),
        }
    }

    pub fn update_running(&mut self, cache: &CascadeCache<T>) {
        for (b, c) in self.blocks.iter_mut().zip(&cache.blocks) {
            b.update_running(c);
        }
    }

    fn check_batch(&self, batch: &Batch<T>) -> Result<()> {
        ensure_shape!(
            batch.kspace.c() == self.config.coils,
            "model expects {} coils, measurement has {}",
            self.config.coils,
            batch.kspace.c()
        );
        ensure_shape!(
            batch.kspace.h().is_multiple_of(2) && batch.kspace.w().is_multiple_of(2),
            "image dims must be even, got {}x{}",
            batch.kspace.h(),
            batch.kspace.w()
        );
        Ok(())
    }

    /// Reconstructs a batch, keeping what the backward pass needs.
    pub fn forward_batch(&self, batch: &Batch<T>, mode: NormMode) -> Result<(ComplexTensor<T>, CascadeCache<T>)> {
        self.check_batch(batch)?;
        let mut x = batch.zero_filled();
        let mut caches = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (out, cache) = block.forward(&x, mode)?;
            let xc = ComplexTensor::from_stacked(&out)?;
            x = data_fidelity_batch(&xc, &batch.kspace, &batch.mask)?;
            caches.push(cache);
        }
        Ok((
            x,
            CascadeCache {
                blocks: caches,
                mask: batch.mask.clone(),
            },
        ))
    }

    /// Parameter gradients given the gradient of the loss with respect to
    /// the reconstruction.
    pub fn backward(&self, grad: &ComplexTensor<T>, cache: &CascadeCache<T>) -> Result<Donet<T>> {
        let mut g = self.zeros_like();
        let mut gx = grad.clone();
        for (t, block) in self.blocks.iter().enumerate().rev() {
            let gxc = data_fidelity_backward(&gx, &cache.mask)?;
            let (gin, gb) = block.backward(&gxc.to_stacked(), &cache.blocks[t])?;
            g.blocks[t] = gb;
            gx = gin;
        }
        Ok(g)
    }

    /// Inference on a single measurement with running BN statistics.
    pub fn reconstruct(&self, y: &KSpaceMeasurement<T>) -> Result<ComplexTensor<T>> {
        Ok(self.forward_batch(&Batch::from_measurement(y), NormMode::Eval)?.0)
    }
}

/// Cascade output for one measurement: `x⁰ = F⁻¹(y)`, then for each block
/// `xᵗ = DF(block(xᵗ⁻¹), y)`.
pub fn donet_forward<T: Scalar>(y: &KSpaceMeasurement<T>, model: &Donet<T>, mode: NormMode) -> Result<ComplexTensor<T>> {
    Ok(model.forward_batch(&Batch::from_measurement(y), mode)?.0)
}

/// Multiply-adds of one forward pass on an `h x w` image, counted like
/// [`crate::octconv::count_flops`]: each real kernel bank costs
/// `out * in * k * k` per output pixel. FFTs and pointwise work are excluded.
pub fn model_flops(config: &CascadeConfig, h: usize, w: usize) -> u64 {
    let b = &config.block;
    let k2 = (b.kernel_size * b.kernel_size) as u64;
    let hw = (h * w) as u64;
    let work = b.working_split();
    let mut per_block = 2 * (b.channels * config.coils) as u64 * k2 * hw;
    for _ in 1..b.num_layers {
        per_block += crate::octconv::count_flops_split(work, work, h, w, b.kernel_size).total_mul_adds;
    }
    per_block += crate::octconv::count_flops_split(work, b.merge_split(config.coils), h, w, b.kernel_size).total_mul_adds;
    if b.dense {
        let fk = (crate::network::FUSE_KERNEL * crate::network::FUSE_KERNEL) as u64;
        let lhw = ((h / 2) * (w / 2)) as u64;
        for k in 1..b.num_layers {
            let hist = (k + 1) as u64;
            for (width, pixels) in [(work.high as u64, hw), (work.low as u64, lhw)] {
                // real and imaginary groups
                per_block += 2 * (width * hist * width + width * width * fk) * pixels;
            }
        }
    }
    per_block * config.num_blocks as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::testutil::{random_complex, randomize, small_config};
    use crate::network::{data_fidelity, l1_loss, l1_loss_grad, BlockConfig};
    use crate::sim::{make_mask, MaskPattern, SamplingMask};
    use crate::tensor::{fft2c, finite_diff_report};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn measurement<T: Scalar>(
        rng: &mut ChaCha8Rng,
        coils: usize,
        h: usize,
        mask: SamplingMask,
    ) -> (KSpaceMeasurement<T>, ComplexTensor<T>) {
        let target = random_complex::<T>(rng, [1, coils, h, h]);
        (KSpaceMeasurement::new(fft2c(&target), mask, 0).unwrap(), target)
    }

    #[test]
    fn full_sampling_returns_target_regardless_of_weights() {
        let mut m = Donet::<f32>::zeros(small_config(2, 2, 4, 0.25, 2)).unwrap();
        randomize(&mut m, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (y, target) = measurement::<f32>(&mut rng, 2, 8, SamplingMask::full(8, 8));
        let out = donet_forward(&y, &m, NormMode::Eval).unwrap();
        assert!(out.max_abs_diff(&target) <= 1e-5);
    }

    #[test]
    fn identity_blocks_keep_zero_filled_input() {
        let cfg = CascadeConfig {
            num_blocks: 3,
            block: BlockConfig {
                num_layers: 1,
                channels: 2,
                alpha: 0.0,
                kernel_size: 1,
                dense: false,
            },
            coils: 2,
        };
        let mut m = Donet::<f64>::zeros(cfg).unwrap();
        for b in m.blocks.iter_mut() {
            for o in 0..2 {
                b.lift.re.set(o, o, 0, 0, 1.0);
                b.layers[0].hh.re.set(o, o, 0, 0, 1.0);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mask = make_mask(MaskPattern::Random2d, 3, 16, 16, 0.0, 1).unwrap();
        let (y, _) = measurement::<f64>(&mut rng, 2, 16, mask);
        let out = donet_forward(&y, &m, NormMode::Identity).unwrap();
        assert!(out.max_abs_diff(&ifft2c(&y.y)) < 1e-12);
    }

    #[test]
    fn matches_hand_chained_blocks_and_fidelity() {
        let mut m = Donet::<f64>::zeros(small_config(2, 2, 4, 0.5, 2)).unwrap();
        randomize(&mut m, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mask = make_mask(MaskPattern::Cartesian1d, 3, 8, 8, 0.0, 0).unwrap();
        let (y, _) = measurement::<f64>(&mut rng, 2, 8, mask);
        let out = donet_forward(&y, &m, NormMode::Eval).unwrap();
        let mut x = ifft2c(&y.y);
        for b in &m.blocks {
            let (o, _) = b.forward(&x, NormMode::Eval).unwrap();
            x = data_fidelity(&ComplexTensor::from_stacked(&o).unwrap(), &y).unwrap();
        }
        assert_eq!(out, x);
    }

    #[test]
    fn block_count_scales_parameters() {
        let one = Donet::<f32>::zeros(small_config(1, 3, 8, 0.125, 4)).unwrap();
        let two = Donet::<f32>::zeros(small_config(2, 3, 8, 0.125, 4)).unwrap();
        assert_eq!(two.param_count(), 2 * one.param_count());
    }

    #[test]
    fn flops_scale_with_blocks_and_match_layer_count() {
        let mut cfg = small_config(1, 1, 64, 0.0, 64);
        cfg.block.dense = false;
        // lift plus one 64 -> 64 complex layer at 32x32
        assert_eq!(model_flops(&cfg, 32, 32), 2 * 75_497_472);
        let two = CascadeConfig { num_blocks: 2, ..cfg };
        assert_eq!(model_flops(&two, 32, 32), 2 * model_flops(&cfg, 32, 32));
    }

    #[test]
    fn coil_mismatch_rejected() {
        let m = Donet::<f32>::zeros(small_config(1, 1, 4, 0.0, 2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (y, _) = measurement::<f32>(&mut rng, 3, 8, SamplingMask::full(8, 8));
        assert!(matches!(donet_forward(&y, &m, NormMode::Eval), Err(crate::Error::Shape(_))));
    }

    fn end_to_end_check(cfg: CascadeConfig, n: usize, h: usize, seed: u64) -> crate::tensor::GradCheckReport {
        let mut m = Donet::<f64>::zeros(cfg).unwrap();
        randomize(&mut m, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let mask = make_mask(MaskPattern::Uniform1d, 2, h, h, 0.0, 0).unwrap();
        let samples: Vec<_> = (0..n)
            .map(|_| {
                let (measurement, target) = measurement::<f64>(&mut rng, cfg.coils, h, mask.clone());
                // the loss is measured against a perturbed target so no
                // residual sits on the kink of |.|
                let target = target.add(&random_complex(&mut rng, target.shape()).scale(0.3)).unwrap();
                Sample { measurement, target }
            })
            .collect();
        let refs: Vec<_> = samples.iter().collect();
        let batch = Batch::from_samples(&refs).unwrap();
        let target = batch.target.clone().unwrap();
        let (pred, cache) = m.forward_batch(&batch, NormMode::Train).unwrap();
        let residual = pred.sub(&target).unwrap();
        let min_res = residual.re.data().iter().chain(residual.im.data()).fold(f64::MAX, |a, v| a.min(v.abs()));
        assert!(min_res > 1e-6, "residual {min_res} too close to the kink");
        let g = m.backward(&l1_loss_grad(&pred, &target).unwrap(), &cache).unwrap();
        let mut names = Vec::new();
        let mut params = Vec::new();
        let mut analytic = Vec::new();
        for ((n, t), (_, gt)) in m.tensors().into_iter().zip(g.tensors()) {
            names.push(n);
            params.push(t.data().to_vec());
            analytic.push(gt.data().to_vec());
        }
        let f = |p: &[Vec<f64>]| -> crate::Result<f64> {
            let mut mm = m.clone();
            for ((_, t), v) in mm.tensors_mut().into_iter().zip(p) {
                t.data_mut().copy_from_slice(v);
            }
            let (out, _) = mm.forward_batch(&batch, NormMode::Train)?;
            l1_loss(&out, &target)
        };
        finite_diff_report(f, &names, &params, &analytic, 1e-6).unwrap()
    }

    #[test]
    fn end_to_end_gradient_single_block() {
        let rep = end_to_end_check(small_config(1, 1, 4, 0.5, 2), 1, 8, 11);
        assert!(rep.max_rel_error <= 1e-4, "{:?}", rep.worst());
    }

    #[test]
    fn end_to_end_gradient_dense_cascade() {
        let rep = end_to_end_check(small_config(2, 2, 4, 0.5, 2), 2, 4, 21);
        assert!(rep.max_rel_error <= 1e-4, "{:?}", rep.worst());
    }
}
