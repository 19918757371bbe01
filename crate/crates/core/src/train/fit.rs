//! The training loop: shuffled mini-batches, ℓ1 loss, Adam, per-epoch
//! validation and checkpoints. Every random choice derives from the seed
//! and the epoch index, so a resumed run replays the same batches.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::{Error, Result};
use crate::metrics::evaluate;
use crate::network::{l1_loss, l1_loss_grad, read_checkpoint, write_checkpoint, Batch, Donet, NormMode};
use crate::scalar::Scalar;
use crate::sim::Dataset;
use crate::tensor::RealTensor;
use crate::train::adam::{adam_step, AdamState};
use crate::train::config::TrainConfig;

pub const LOG_HEADER: &str = "iter,epoch,lr,train_l1,val_psnr,val_ssim";
pub const LOG_FILE: &str = "log.csv";
pub const STATE_FILE: &str = "state.json";
pub const BEST_FILE: &str = "best.json";
pub const FINAL_FILE: &str = "final.json";
pub const LAST_GOOD_FILE: &str = "last_good.json";

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    /// 1-based optimizer step.
    pub iter: u64,
    pub epoch: u64,
    pub lr: f64,
    pub train_l1: f64,
    pub val_psnr: Option<f64>,
    pub val_ssim: Option<f64>,
}

impl LogRow {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{}",
            self.iter,
            self.epoch,
            self.lr,
            self.train_l1,
            opt(self.val_psnr),
            opt(self.val_ssim)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub rows: Vec<LogRow>,
    /// Best mean validation PSNR and the step that reached it.
    pub best: Option<(f64, u64)>,
}

impl FitReport {
    pub fn last_validation(&self) -> Option<&LogRow> {
        self.rows.iter().rev().find(|r| r.val_psnr.is_some())
    }
}

/// Sample order of one epoch.
pub fn epoch_order(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

/// Trains `model` in place from step zero. With `out` set, writes the
/// CSV log and checkpoints there.
pub fn fit<T: Scalar>(
    model: &mut Donet<T>,
    train: &Dataset<T>,
    val: &Dataset<T>,
    cfg: &TrainConfig,
    out: Option<&Path>,
) -> Result<FitReport> {
    cfg.validate()?;
    let mut adam = AdamState::new(model.tensors().into_iter().map(|(_, t)| t));
    adam.weight_decay = cfg.weight_decay();
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(LOG_FILE), format!("{LOG_HEADER}\n"))?;
    }
    run(model, &mut adam, Vec::new(), None, train, val, cfg, out)
}

/// Continues a run from `dir/state.json` up to `cfg.iters` steps. The log
/// is truncated to the checkpointed step before new rows are appended.
pub fn resume<T: Scalar>(
    dir: &Path,
    train: &Dataset<T>,
    val: &Dataset<T>,
    cfg: &TrainConfig,
) -> Result<(Donet<T>, FitReport)> {
    cfg.validate()?;
    let (manifest, tensors) = read_checkpoint::<T>(&dir.join(STATE_FILE))?;
    let extra = &manifest.extra;
    let saved: TrainConfig = serde_json::from_value(extra["train"].clone())?;
    let same = TrainConfig { iters: cfg.iters, ..saved.clone() };
    if &same != cfg {
        return Err(Error::Config("training settings differ from the checkpointed run".into()));
    }
    let step = extra["step"]
        .as_u64()
        .ok_or_else(|| Error::Format("state checkpoint lacks a step".into()))?;
    let best = match (extra["best_psnr_bits"].as_u64(), extra["best_iter"].as_u64()) {
        (Some(bits), Some(it)) => Some((f64::from_bits(bits), it)),
        _ => None,
    };
    let (mut optim, state): (Vec<_>, Vec<_>) = tensors.into_iter().partition(|(n, _)| n.starts_with("optim."));
    let mut model = Donet::from_tensors(manifest.config, state)?;
    let mut adam = AdamState::new(model.tensors().into_iter().map(|(_, t)| t));
    adam.weight_decay = cfg.weight_decay();
    adam.step = step;
    let mut take = |name: &str| -> Result<RealTensor<T>> {
        let i = optim
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::Format(format!("state checkpoint lacks {name}")))?;
        Ok(optim.swap_remove(i).1)
    };
    for (i, (name, _)) in model.tensors().into_iter().enumerate() {
        adam.m[i] = take(&format!("optim.m.{name}"))?;
        adam.v[i] = take(&format!("optim.v.{name}"))?;
    }
    let rows = read_log(&dir.join(LOG_FILE), step)?;
    let mut text = format!("{LOG_HEADER}\n");
    for r in &rows {
        text.push_str(&r.to_csv());
        text.push('\n');
    }
    fs::write(dir.join(LOG_FILE), text)?;
    let report = run(&mut model, &mut adam, rows, best, train, val, cfg, Some(dir))?;
    Ok((model, report))
}

fn read_log(path: &Path, upto: u64) -> Result<Vec<LogRow>> {
    let text = fs::read_to_string(path)?;
    let bad = |line: &str| Error::Format(format!("malformed log line {line:?}"));
    let mut rows = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad(line));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
        let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        let row = LogRow {
            iter: f[0].parse().map_err(|_| bad(line))?,
            epoch: f[1].parse().map_err(|_| bad(line))?,
            lr: num(f[2])?,
            train_l1: num(f[3])?,
            val_psnr: opt(f[4])?,
            val_ssim: opt(f[5])?,
        };
        if row.iter <= upto {
            rows.push(row);
        }
    }
    Ok(rows)
}

fn save_state<T: Scalar>(
    path: &Path,
    model: &Donet<T>,
    adam: &AdamState<T>,
    best: Option<(f64, u64)>,
    cfg: &TrainConfig,
) -> Result<()> {
    let mut named = model.named_state();
    let params = model.tensors();
    let m_names: Vec<_> = params.iter().map(|(n, _)| format!("optim.m.{n}")).collect();
    let v_names: Vec<_> = params.iter().map(|(n, _)| format!("optim.v.{n}")).collect();
    for (i, name) in m_names.into_iter().enumerate() {
        named.push((name, &adam.m[i]));
    }
    for (i, name) in v_names.into_iter().enumerate() {
        named.push((name, &adam.v[i]));
    }
    let extra = json!({
        "step": adam.step,
        "best_psnr": best.map(|b| b.0),
        "best_psnr_bits": best.map(|b| b.0.to_bits()),
        "best_iter": best.map(|b| b.1),
        "train": cfg,
    });
    write_checkpoint(path, &model.config, &named, extra)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run<T: Scalar>(
    model: &mut Donet<T>,
    adam: &mut AdamState<T>,
    mut rows: Vec<LogRow>,
    mut best: Option<(f64, u64)>,
    train: &Dataset<T>,
    val: &Dataset<T>,
    cfg: &TrainConfig,
    out: Option<&Path>,
) -> Result<FitReport> {
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let n = train.len();
    let spe = cfg.steps_per_epoch(n);
    let mut log = match out {
        Some(dir) => Some(fs::OpenOptions::new().append(true).open(dir.join(LOG_FILE))?),
        None => None,
    };
    // parameters that last produced a finite loss
    let mut last_good: Option<Donet<T>> = None;
    let mut order: Option<(u64, Vec<usize>)> = None;
    while adam.step < cfg.iters {
        let done = adam.step;
        let epoch = done / spe;
        if order.as_ref().map(|o| o.0) != Some(epoch) {
            order = Some((epoch, epoch_order(n, cfg.seed, epoch)));
        }
        let perm = &order.as_ref().expect("order set above").1;
        let pos = (done % spe) as usize * cfg.batch_size;
        let picked: Vec<_> = perm[pos..(pos + cfg.batch_size).min(n)]
            .iter()
            .map(|&i| &train.samples[i])
            .collect();
        let batch = Batch::from_samples(&picked)?;
        let target = batch.target.as_ref().expect("training batches carry targets");
        let (pred, cache) = model.forward_batch(&batch, NormMode::Train)?;
        let loss = l1_loss(&pred, target)?.as_f64();
        let abort = |good: Option<&Donet<T>>, msg: String| -> Result<FitReport> {
            if let (Some(dir), Some(m)) = (out, good) {
                m.save(&dir.join(LAST_GOOD_FILE), json!({ "step": done }))?;
            }
            Err(Error::Numerics(msg))
        };
        if !loss.is_finite() {
            return abort(last_good.as_ref(), format!("loss became {loss} at step {}", done + 1));
        }
        let grads = model.backward(&l1_loss_grad(&pred, target)?, &cache)?;
        let lr = cfg.lr_at(done, spe);
        let snapshot = model.clone();
        {
            let g = grads.tensors();
            let gr: Vec<&RealTensor<T>> = g.iter().map(|(_, t)| *t).collect();
            let mut p = model.tensors_mut();
            let mut pr: Vec<&mut RealTensor<T>> = p.iter_mut().map(|(_, t)| &mut **t).collect();
            if let Err(e) = adam_step(&mut pr, &gr, adam, lr) {
                drop(pr);
                drop(p);
                return match e {
                    Error::Numerics(msg) => abort(Some(&snapshot), format!("{msg} at step {}", done + 1)),
                    e => Err(e),
                };
            }
        }
        model.update_running(&cache);
        last_good = Some(snapshot);

        let step = adam.step;
        let epoch_end = step.is_multiple_of(spe);
        let mut row = LogRow {
            iter: step,
            epoch,
            lr,
            train_l1: loss,
            val_psnr: None,
            val_ssim: None,
        };
        if (epoch_end || step == cfg.iters) && !val.is_empty() {
            let s = evaluate(model, val)?;
            row.val_psnr = Some(s.model_psnr.mean);
            row.val_ssim = Some(s.model_ssim.mean);
            if best.is_none_or(|b| s.model_psnr.mean > b.0) {
                best = Some((s.model_psnr.mean, step));
                if let Some(dir) = out {
                    model.save(&dir.join(BEST_FILE), json!({ "step": step, "val_psnr": s.model_psnr.mean }))?;
                }
            }
        }
        if let Some(f) = log.as_mut() {
            writeln!(f, "{}", row.to_csv())?;
        }
        rows.push(row);
        if let Some(dir) = out {
            if epoch_end || step == cfg.iters {
                save_state(&dir.join(STATE_FILE), model, adam, best, cfg)?;
            }
        }
    }
    if let Some(dir) = out {
        model.save(&dir.join(FINAL_FILE), json!({ "step": adam.step }))?;
        if val.is_empty() {
            model.save(&dir.join(BEST_FILE), json!({ "step": adam.step }))?;
        }
    }
    Ok(FitReport { rows, best })
}
