//! Complex convolution, octave frequency split/merge and the dual-octave
//! layer.
//!
//! A dual-octave feature carries four real groups: real/imaginary parts of a
//! full-resolution high-frequency branch and a half-resolution low-frequency
//! branch. A layer routes information along four paths (H→H, H→L, L→H, L→L)
//! and each path is a complex convolution, giving eight real kernel banks.

mod complex;
mod feature;
mod flops;
mod layer;

pub use complex::{complex_conv2d, complex_conv2d_backward, ComplexConvGrad};
pub use feature::{
    merge_frequency, merge_frequency_backward, split_counts, split_frequency,
    split_frequency_backward, ChannelSplit, OctComplexFeature,
};
pub use flops::{count_flops, count_flops_split, FlopsReport};
pub use layer::{
    dual_octconv_backward, dual_octconv_forward, ComplexBank, DualOctGrad, DualOctKernel, Path,
};
