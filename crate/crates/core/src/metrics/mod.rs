//! Coil combination, PSNR/SSIM, evaluation reports and error-map images.

mod eval;
mod quality;
mod render;

pub use eval::{evaluate, EvalSummary, MeanStd, ReconReport, SampleImages, REPORT_HEADER};
pub use quality::{
    coil_combine, psnr, ssim, ssim_terms, SsimTerms, PSNR_SENTINEL, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW,
};
pub use render::{hot, render_grid, write_error_grid, ERROR_GAIN};
