mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Split, Sweep};
use config::{Overrides, RunConfig};
use donet::{par, Error, Precision, Result};

#[derive(Debug, Parser)]
#[command(name = "donet", version, about = "Dual-octave MRI reconstruction: simulate, train, evaluate, ablate")]
struct Cli {
    /// Worker threads for the numeric kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run every kernel sequentially in a fixed order.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic multi-coil dataset to out_dir.
    Simulate(Common),
    /// Train on a dataset directory; writes the log and checkpoints to out_dir.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Continue from out_dir/state.json.
        #[arg(long)]
        resume: bool,
    },
    /// Score a checkpoint against the zero-filled baseline.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "val")]
        split: Split,
    },
    /// Sweep alpha or the block count.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        sweep: Sweep,
        /// Comma-separated sweep values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Train each setting on this dataset for `iters` steps.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Print multiply-add counts for the configured model.
    Flops(Common),
}

#[derive(Debug, clap::Args)]
struct Common {
    /// JSON file with RunConfig keys; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        RunConfig::resolve(self.config.as_deref(), &self.overrides)
    }
}

macro_rules! dispatch {
    ($cfg:expr, $f:ident ( $($arg:expr),* )) => {
        match $cfg.precision {
            Precision::F32 => commands::$f::<f32>($($arg),*).map(drop),
            Precision::F64 => commands::$f::<f64>($($arg),*).map(drop),
        }
    };
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    if cli.deterministic {
        par::set_parallel(false);
    }
    match &cli.command {
        Command::Simulate(c) => {
            let cfg = c.resolve()?;
            dispatch!(cfg, simulate(&cfg))
        }
        Command::Train { common, data, resume } => {
            let cfg = common.resolve()?;
            dispatch!(cfg, train(&cfg, data, *resume))
        }
        Command::Eval {
            common,
            data,
            checkpoint,
            split,
        } => {
            let cfg = common.resolve()?;
            dispatch!(cfg, eval(&cfg, data, checkpoint, *split))
        }
        Command::Ablate {
            common,
            sweep,
            values,
            data,
        } => {
            let cfg = common.resolve()?;
            let csv = match cfg.precision {
                Precision::F32 => commands::ablate::<f32>(&cfg, *sweep, values, data.as_deref())?,
                Precision::F64 => commands::ablate::<f64>(&cfg, *sweep, values, data.as_deref())?,
            };
            print!("{csv}");
            Ok(())
        }
        Command::Flops(c) => commands::flops(&c.resolve()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numerics(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
