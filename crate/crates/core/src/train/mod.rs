//! Initialisation, Adam and the training loop.

mod adam;
mod config;
mod fit;
mod init;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use config::{DecayMode, TrainConfig};
pub use fit::{
    epoch_order, fit, resume, FitReport, LogRow, BEST_FILE, FINAL_FILE, LAST_GOOD_FILE, LOG_FILE, LOG_HEADER,
    STATE_FILE,
};
pub use init::{init_complex_kernel, init_model, init_real_kernel};
