use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::json;

use donet::metrics::{evaluate, write_error_grid};
use donet::network::{model_flops, Donet};
use donet::octconv::count_flops;
use donet::sim::{simulate_dataset, Dataset};
use donet::train::{fit, init_model, resume, FitReport};
use donet::{par, Error, Result, Scalar};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Split {
    All,
    Train,
    Val,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Sweep {
    Alpha,
    Blocks,
}

impl Sweep {
    fn key(self) -> &'static str {
        match self {
            Sweep::Alpha => "alpha",
            Sweep::Blocks => "T",
        }
    }
}

/// Resolved config plus wall-clock data, kept apart from the reproducible
/// outputs.
fn write_meta(cfg: &RunConfig, command: &str) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(
        cfg.out_dir.join("config.json"),
        serde_json::to_string_pretty(cfg)? + "\n",
    )?;
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = json!({
        "command": command,
        "unix_time": secs,
        "parallel": par::is_parallel(),
        "version": env!("CARGO_PKG_VERSION"),
    });
    fs::write(cfg.out_dir.join("run_meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

fn load_dataset<T: Scalar>(dir: &Path) -> Result<Dataset<T>> {
    Dataset::load(dir).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("cannot read dataset {}: {io}", dir.display())),
        e => e,
    })
}

fn split<T: Scalar>(cfg: &RunConfig, data: &Dataset<T>) -> (Dataset<T>, Dataset<T>) {
    data.split_tail(cfg.train().val_count(data.len()))
}

pub fn simulate<T: Scalar>(cfg: &RunConfig) -> Result<()> {
    let data = simulate_dataset::<T>(&cfg.sim())?;
    let m = data.save(&cfg.out_dir)?;
    let sampled = (m.sampled_fraction * (m.samples * m.h * m.w) as f64).round() as usize / m.samples;
    println!(
        "wrote {} samples to {}: sampled {}/{} per image (fraction {:.4}, effective R {:.3})",
        m.samples,
        cfg.out_dir.display(),
        sampled,
        m.h * m.w,
        m.sampled_fraction,
        m.effective_acceleration
    );
    Ok(())
}

pub fn train<T: Scalar>(cfg: &RunConfig, data_dir: &Path, resume_run: bool) -> Result<FitReport> {
    let data = load_dataset::<T>(data_dir)?;
    let (tr, va) = split(cfg, &data);
    let tc = cfg.train();
    let report = if resume_run {
        resume(&cfg.out_dir, &tr, &va, &tc)?.1
    } else {
        write_meta(cfg, "train")?;
        let mut model = init_model::<T>(cfg.cascade(data.coils)?, cfg.seed)?;
        fit(&mut model, &tr, &va, &tc, Some(&cfg.out_dir))?
    };
    let last = report.rows.last();
    println!(
        "trained {} steps on {} samples ({} held out); final train l1 {}",
        last.map_or(0, |r| r.iter),
        tr.len(),
        va.len(),
        last.map_or(f64::NAN, |r| r.train_l1)
    );
    if let Some(v) = report.last_validation() {
        println!(
            "final val psnr {:.4} dB, ssim {:.4}",
            v.val_psnr.unwrap_or(f64::NAN),
            v.val_ssim.unwrap_or(f64::NAN)
        );
    }
    Ok(report)
}

pub fn eval<T: Scalar>(cfg: &RunConfig, data_dir: &Path, checkpoint: &Path, which: Split) -> Result<()> {
    let (model, _) = Donet::<T>::load(checkpoint)?;
    let data = load_dataset::<T>(data_dir)?;
    if data.coils != model.config.coils {
        return Err(Error::Shape(format!(
            "checkpoint expects {} coils, dataset has {}",
            model.config.coils, data.coils
        )));
    }
    let (tr, va) = split(cfg, &data);
    let subset = match which {
        Split::All => data,
        Split::Train => tr,
        Split::Val => va,
    };
    if subset.is_empty() {
        return Err(Error::Config("selected split is empty".into()));
    }
    let summary = evaluate(&model, &subset)?;
    fs::create_dir_all(&cfg.out_dir)?;
    summary.write_csv(&cfg.out_dir.join("report.csv"))?;
    write_error_grid(&cfg.out_dir.join("errors.png"), &summary.images, 4)?;
    println!(
        "model psnr {:.4} ± {:.4} dB, ssim {:.4} ± {:.4}",
        summary.model_psnr.mean, summary.model_psnr.std, summary.model_ssim.mean, summary.model_ssim.std
    );
    println!(
        "zero-filled psnr {:.4} ± {:.4} dB, ssim {:.4} ± {:.4}",
        summary.zf_psnr.mean, summary.zf_psnr.std, summary.zf_ssim.mean, summary.zf_ssim.std
    );
    Ok(())
}

pub const ABLATE_COLUMNS: &str = "layer_flops,model_flops,params,psnr,ssim";

/// One row per sweep value. `layer_flops` is a single working layer at the
/// configured width; `model_flops` the full cascade. Quality columns stay
/// empty unless a dataset and a positive iteration budget are given.
pub fn ablate<T: Scalar>(cfg: &RunConfig, sweep: Sweep, values: &[f64], data_dir: Option<&Path>) -> Result<String> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let data = data_dir.map(load_dataset::<T>).transpose()?;
    let coils = data.as_ref().map_or(cfg.coils, |d| d.coils);
    let (h, w) = data.as_ref().map_or((cfg.h, cfg.w), |d| (d.h, d.w));
    let mut out = format!("{},{ABLATE_COLUMNS}\n", sweep.key());
    for &v in values {
        let mut c = cfg.clone();
        match sweep {
            Sweep::Alpha => c.alpha = v,
            Sweep::Blocks => {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(Error::Config(format!("block count {v} is not a positive integer")));
                }
                c.t = v as usize;
            }
        }
        let cascade = c.cascade(coils)?;
        let layer = count_flops(c.channels, c.channels, h, w, c.alpha, c.kernel).total_mul_adds;
        let total = model_flops(&cascade, h, w);
        let mut model = init_model::<T>(cascade, c.seed)?;
        let params = model.param_count();
        let (mut psnr, mut ssim) = (String::new(), String::new());
        if let Some(d) = data.as_ref().filter(|_| c.iters > 0) {
            let (tr, va) = split(&c, d);
            let eval_set = if va.is_empty() { &tr } else { &va };
            fit(&mut model, &tr, &va, &c.train(), None)?;
            let s = evaluate(&model, eval_set)?;
            psnr = format!("{:.6}", s.model_psnr.mean);
            ssim = format!("{:.6}", s.model_ssim.mean);
        }
        let _ = writeln!(out, "{v},{layer},{total},{params},{psnr},{ssim}");
    }
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join(format!("ablate_{}.csv", sweep.key())), &out)?;
    Ok(out)
}

pub fn flops(cfg: &RunConfig) -> Result<()> {
    let cascade = cfg.cascade(cfg.coils)?;
    let r = count_flops(cfg.channels, cfg.channels, cfg.h, cfg.w, cfg.alpha, cfg.kernel);
    println!(
        "working layer {}->{} at {}x{}, alpha {}: {} multiply-adds",
        cfg.channels, cfg.channels, cfg.h, cfg.w, cfg.alpha, r.total_mul_adds
    );
    for (path, n) in &r.per_path {
        println!("  {path}: {n}");
    }
    println!(
        "cascade T={} K={}: {} multiply-adds per forward pass",
        cfg.t,
        cfg.k,
        model_flops(&cascade, cfg.h, cfg.w)
    );
    Ok(())
}
