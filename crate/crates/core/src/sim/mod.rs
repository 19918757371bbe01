//! Synthetic parallel-MRI acquisition.

mod acquire;
mod coils;
mod dataset;
mod mask;
mod phantom;

pub use acquire::{forward_acquire, zero_filled_recon, AcquisitionMeta, KSpaceMeasurement};
pub use coils::{make_coils, CoilSensitivities};
pub use dataset::{simulate_dataset, ArrayEntry, Dataset, DatasetManifest, Sample, SimConfig, DATASET_FORMAT};
pub use mask::{make_mask, MaskPattern, SamplingMask};
pub use phantom::{make_phantom, Phantom, PhantomKind};
