use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::octconv::{split_counts, ChannelSplit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    /// Dual-octave layers per block, the last one being the merging layer.
    pub num_layers: usize,
    /// Complex feature maps per working layer.
    pub channels: usize,
    /// Fraction of channels in the low-frequency branch.
    pub alpha: f64,
    pub kernel_size: usize,
    /// Dense connections between the working layers.
    pub dense: bool,
}

impl Default for BlockConfig {
    fn default() -> Self {
        Self {
            num_layers: 4,
            channels: 64,
            alpha: 0.125,
            kernel_size: 3,
            dense: true,
        }
    }
}

impl BlockConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::Config("a block needs at least one layer".into()));
        }
        if self.channels == 0 {
            return Err(Error::Config("channels must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.kernel_size == 0 {
            return Err(Error::Config("kernel size must be positive".into()));
        }
        Ok(())
    }

    /// Channel split of the working layers.
    pub fn working_split(&self) -> ChannelSplit {
        split_counts(self.channels, self.alpha)
    }

    /// Output split of the merging layer: both branches carry `coils`
    /// channels so they can be summed, unless one branch is empty.
    pub fn merge_split(&self, coils: usize) -> ChannelSplit {
        let s = self.working_split();
        match (s.high, s.low) {
            (_, 0) => ChannelSplit { high: coils, low: 0 },
            (0, _) => ChannelSplit { high: 0, low: coils },
            _ => ChannelSplit { high: coils, low: coils },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeConfig {
    pub num_blocks: usize,
    pub block: BlockConfig,
    pub coils: usize,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            num_blocks: 10,
            block: BlockConfig::default(),
            coils: 4,
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_blocks == 0 {
            return Err(Error::Config("the cascade needs at least one block".into()));
        }
        if self.coils == 0 {
            return Err(Error::Config("coils must be positive".into()));
        }
        self.block.validate()
    }
}
