use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use donet::network::{BlockConfig, CascadeConfig};
use donet::sim::{MaskPattern, PhantomKind, SimConfig};
use donet::train::{DecayMode, TrainConfig};
use donet::{Error, Precision, Result};

/// Flat run description shared by every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub phantom: PhantomKind,
    pub h: usize,
    pub w: usize,
    pub coils: usize,
    pub pattern: MaskPattern,
    #[serde(rename = "R")]
    pub r: usize,
    pub center_fraction: f64,
    pub samples: usize,
    pub alpha: f64,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub channels: usize,
    pub kernel: usize,
    pub lr: f64,
    pub decay: f64,
    pub decay_mode: DecayMode,
    pub batch: usize,
    pub iters: u64,
    pub val_fraction: f64,
    pub seed: u64,
    pub precision: Precision,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        let block = BlockConfig::default();
        let cascade = CascadeConfig::default();
        let train = TrainConfig::default();
        Self {
            phantom: sim.phantom,
            h: sim.h,
            w: sim.w,
            coils: sim.coils,
            pattern: sim.pattern,
            r: sim.acceleration,
            center_fraction: sim.center_fraction,
            samples: sim.samples,
            alpha: block.alpha,
            t: cascade.num_blocks,
            k: block.num_layers,
            channels: block.channels,
            kernel: block.kernel_size,
            lr: train.lr,
            decay: train.decay,
            decay_mode: train.decay_mode,
            batch: train.batch_size,
            iters: train.iters,
            val_fraction: train.val_fraction,
            seed: sim.seed,
            precision: Precision::F32,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Defaults, then the optional JSON file, then command-line overrides.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut merged = serde_json::to_value(Self::default())?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            let value: Value = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
            let Value::Object(obj) = value else {
                return Err(Error::Config(format!("config {} must be a JSON object", path.display())));
            };
            overlay(&mut merged, obj);
        }
        if let Value::Object(obj) = serde_json::to_value(overrides)? {
            overlay(&mut merged, obj);
        }
        let cfg: Self = serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.cascade(self.coils)?;
        self.train().validate()?;
        if self.samples == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        Ok(())
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            phantom: self.phantom,
            h: self.h,
            w: self.w,
            coils: self.coils,
            pattern: self.pattern,
            acceleration: self.r,
            center_fraction: self.center_fraction,
            samples: self.samples,
            seed: self.seed,
            phase_ramp: false,
        }
    }

    /// Model geometry for data with `coils` receiver channels.
    pub fn cascade(&self, coils: usize) -> Result<CascadeConfig> {
        let c = CascadeConfig {
            num_blocks: self.t,
            coils,
            block: BlockConfig {
                num_layers: self.k,
                channels: self.channels,
                alpha: self.alpha,
                kernel_size: self.kernel,
                ..BlockConfig::default()
            },
        };
        c.validate()?;
        Ok(c)
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            decay: self.decay,
            decay_mode: self.decay_mode,
            batch_size: self.batch,
            iters: self.iters,
            seed: self.seed,
            val_fraction: self.val_fraction,
        }
    }
}

fn overlay(base: &mut Value, obj: Map<String, Value>) {
    if let Value::Object(b) = base {
        b.extend(obj);
    }
}

fn json_enum<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(Value::String(s.to_owned())).map_err(|e| e.to_string())
}

/// Command-line mirrors of the [`RunConfig`] keys.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct Overrides {
    #[arg(long, value_parser = json_enum::<PhantomKind>)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phantom: Option<PhantomKind>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coils: Option<usize>,
    #[arg(long, value_parser = json_enum::<MaskPattern>)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<MaskPattern>,
    /// Acceleration factor.
    #[arg(long = "R", visible_alias = "acceleration")]
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_fraction: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Number of cascaded blocks.
    #[arg(long = "T", visible_alias = "blocks")]
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    /// Dual-octave layers per block.
    #[arg(long = "K", visible_alias = "layers")]
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channels: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[arg(long, value_parser = json_enum::<DecayMode>)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_mode: Option<DecayMode>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iters: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long, value_parser = json_enum::<Precision>)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<Precision>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}
