//! Per-sample evaluation against fully-sampled ground truth.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::metrics::quality::{coil_combine, psnr, ssim};
use crate::network::{model_flops, Donet};
use crate::par;
use crate::scalar::Scalar;
use crate::sim::{zero_filled_recon, Dataset, MaskPattern};
use crate::tensor::RealTensor;

/// Metrics of one reconstruction method on one sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconReport {
    pub sample: usize,
    pub psnr_db: f64,
    pub ssim: f64,
    pub pattern: MaskPattern,
    pub acceleration: usize,
    pub alpha: f64,
    pub blocks: usize,
    pub layers: usize,
    pub flops: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

/// Combined-magnitude images kept for rendering.
#[derive(Debug, Clone)]
pub struct SampleImages<T> {
    pub recon: RealTensor<T>,
    pub zero_filled: RealTensor<T>,
    pub truth: RealTensor<T>,
}

#[derive(Debug, Clone)]
pub struct EvalSummary<T> {
    pub model: Vec<ReconReport>,
    pub zero_filled: Vec<ReconReport>,
    pub model_psnr: MeanStd,
    pub model_ssim: MeanStd,
    pub zf_psnr: MeanStd,
    pub zf_ssim: MeanStd,
    pub images: Vec<SampleImages<T>>,
}

/// Runs the cascade (running BN statistics) and the zero-filled baseline
/// on every sample. Samples are processed in parallel; results keep
/// dataset order.
pub fn evaluate<T: Scalar>(model: &Donet<T>, data: &Dataset<T>) -> Result<EvalSummary<T>> {
    let cfg = &model.config;
    let flops = model_flops(cfg, data.h, data.w);
    let per_sample = par::map_range(data.len(), |i| -> Result<_> {
        let s = &data.samples[i];
        let truth = coil_combine(&s.target);
        let recon = coil_combine(&model.reconstruct(&s.measurement)?);
        let zf = coil_combine(&zero_filled_recon(&s.measurement));
        let scores = (psnr(&recon, &truth)?, ssim(&recon, &truth)?, psnr(&zf, &truth)?, ssim(&zf, &truth)?);
        Ok((scores, SampleImages { recon, zero_filled: zf, truth }))
    });
    let mut summary = EvalSummary {
        model: Vec::new(),
        zero_filled: Vec::new(),
        model_psnr: MeanStd::of(&[]),
        model_ssim: MeanStd::of(&[]),
        zf_psnr: MeanStd::of(&[]),
        zf_ssim: MeanStd::of(&[]),
        images: Vec::new(),
    };
    for (i, r) in per_sample.into_iter().enumerate() {
        let ((p, s, zp, zs), imgs) = r?;
        let report = |psnr_db, ssim, flops| ReconReport {
            sample: i,
            psnr_db,
            ssim,
            pattern: data.pattern,
            acceleration: data.acceleration,
            alpha: cfg.block.alpha,
            blocks: cfg.num_blocks,
            layers: cfg.block.num_layers,
            flops,
        };
        summary.model.push(report(p, s, flops));
        summary.zero_filled.push(report(zp, zs, 0));
        summary.images.push(imgs);
    }
    let col = |v: &[ReconReport], f: fn(&ReconReport) -> f64| MeanStd::of(&v.iter().map(f).collect::<Vec<_>>());
    summary.model_psnr = col(&summary.model, |r| r.psnr_db);
    summary.model_ssim = col(&summary.model, |r| r.ssim);
    summary.zf_psnr = col(&summary.zero_filled, |r| r.psnr_db);
    summary.zf_ssim = col(&summary.zero_filled, |r| r.ssim);
    Ok(summary)
}

pub const REPORT_HEADER: &str =
    "sample,psnr_db,ssim,zf_psnr_db,zf_ssim,pattern,acceleration,alpha,blocks,layers,flops,psnr_std,ssim_std,zf_psnr_std,zf_ssim_std";

impl<T: Scalar> EvalSummary<T> {
    /// One row per sample, then a `mean` row carrying the standard
    /// deviations in the trailing columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for (m, z) in self.model.iter().zip(&self.zero_filled) {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6},{},{},{},{},{},{},,,,",
                m.sample,
                m.psnr_db,
                m.ssim,
                z.psnr_db,
                z.ssim,
                m.pattern.name(),
                m.acceleration,
                m.alpha,
                m.blocks,
                m.layers,
                m.flops
            );
        }
        if let Some(m) = self.model.first() {
            let _ = writeln!(
                out,
                "mean,{:.6},{:.6},{:.6},{:.6},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6}",
                self.model_psnr.mean,
                self.model_ssim.mean,
                self.zf_psnr.mean,
                self.zf_ssim.mean,
                m.pattern.name(),
                m.acceleration,
                m.alpha,
                m.blocks,
                m.layers,
                m.flops,
                self.model_psnr.std,
                self.model_ssim.std,
                self.zf_psnr.std,
                self.zf_ssim.std
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}
