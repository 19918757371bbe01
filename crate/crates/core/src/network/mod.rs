//! Dense dual-octave blocks, k-space data fidelity, the unrolled cascade
//! and the ℓ1 objective.

mod block;
mod bn;
mod cascade;
mod checkpoint;
mod config;
mod fidelity;
mod fuse;
mod loss;

pub use block::{Block, BlockCache};
pub use bn::{relu, relu_backward, BatchNorm, BnCache, NormMode, BN_EPS, BN_MOMENTUM};
pub use cascade::{donet_forward, model_flops, Batch, CascadeCache, Donet};
pub use checkpoint::{
    payload_path, read_checkpoint, write_checkpoint, CheckpointManifest, TensorRecord, CHECKPOINT_FORMAT,
};
pub use config::{BlockConfig, CascadeConfig};
pub use fidelity::{data_fidelity, data_fidelity_backward, data_fidelity_batch};
pub use fuse::{dense_fuse, dense_fuse_backward, DenseFuseUnit, FuseCache, GroupFuse, FUSE_KERNEL, GROUP_NAMES};
pub use loss::{l1_loss, l1_loss_grad};

#[cfg(test)]
pub(crate) mod testutil;
