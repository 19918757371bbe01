//! Simulated datasets and their on-disk format.
//!
//! A dataset directory holds `manifest.json` plus three little-endian
//! row-major `f32`/`u8` arrays: `kspace.bin` `(n, coils, h, w)` complex
//! interleaved `re, im`; `mask.bin` `(n, h, w)` bytes; `target.bin`
//! `(n, coils, h, w)` complex interleaved. Files produced elsewhere in the
//! same layout load through [`Dataset::load`] unchanged.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sim::{
    forward_acquire, make_coils, make_mask, make_phantom, KSpaceMeasurement, MaskPattern, PhantomKind,
    SamplingMask,
};
use crate::tensor::{ComplexTensor, RealTensor};

pub const DATASET_FORMAT: &str = "donet-dataset";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub phantom: PhantomKind,
    pub h: usize,
    pub w: usize,
    pub coils: usize,
    pub pattern: MaskPattern,
    pub acceleration: usize,
    pub center_fraction: f64,
    pub samples: usize,
    pub seed: u64,
    /// Adds a random smooth phase ramp to every phantom.
    pub phase_ramp: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            phantom: PhantomKind::SheppLogan,
            h: 32,
            w: 32,
            coils: 4,
            pattern: MaskPattern::Uniform1d,
            acceleration: 3,
            center_fraction: 0.08,
            samples: 20,
            seed: 0,
            phase_ramp: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub measurement: KSpaceMeasurement<T>,
    /// Fully-sampled coil images, shape `(1, coils, h, w)`.
    pub target: ComplexTensor<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub file: String,
    pub offset: u64,
    pub bytes: u64,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub dtype: String,
    pub samples: usize,
    pub coils: usize,
    pub h: usize,
    pub w: usize,
    pub pattern: MaskPattern,
    pub acceleration: usize,
    pub center_fraction: f64,
    pub seed: u64,
    #[serde(default)]
    pub phantom: Option<PhantomKind>,
    pub sample_seeds: Vec<u64>,
    pub sampled_fraction: f64,
    pub effective_acceleration: f64,
    pub kspace: ArrayEntry,
    pub mask: ArrayEntry,
    pub target: ArrayEntry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub samples: Vec<Sample<T>>,
    pub coils: usize,
    pub h: usize,
    pub w: usize,
    pub pattern: MaskPattern,
    pub acceleration: usize,
    pub center_fraction: f64,
    pub seed: u64,
    pub phantom: Option<PhantomKind>,
}

fn sample_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(10_007).wrapping_add(i as u64 + 1)
}

/// Phantoms vary per sample; coil geometry and mask are shared.
pub fn simulate_dataset<T: Scalar>(cfg: &SimConfig) -> Result<Dataset<T>> {
    if cfg.samples == 0 || cfg.coils == 0 {
        return Err(Error::Config("dataset needs at least one sample and one coil".into()));
    }
    let coils = make_coils::<T>(cfg.h, cfg.w, cfg.coils, cfg.seed);
    let mask = make_mask(cfg.pattern, cfg.acceleration, cfg.h, cfg.w, cfg.center_fraction, cfg.seed)?;
    let samples = (0..cfg.samples)
        .map(|i| {
            let s = sample_seed(cfg.seed, i);
            let mut x = make_phantom::<T>(cfg.phantom, cfg.h, cfg.w, s)?;
            if cfg.phase_ramp {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(s);
                let (kx, ky) = (rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
                x = x.with_linear_phase(kx, ky);
            }
            let measurement = forward_acquire(&x, &coils, &mask)?;
            let target = coils.apply(&x.image)?;
            Ok(Sample { measurement, target })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        samples,
        coils: cfg.coils,
        h: cfg.h,
        w: cfg.w,
        pattern: cfg.pattern,
        acceleration: cfg.acceleration,
        center_fraction: cfg.center_fraction,
        seed: cfg.seed,
        phantom: Some(cfg.phantom),
    })
}

fn write_complex_f32<T: Scalar>(out: &mut Vec<u8>, x: &ComplexTensor<T>) {
    for (r, i) in x.re.data().iter().zip(x.im.data()) {
        out.extend_from_slice(&(r.as_f64() as f32).to_le_bytes());
        out.extend_from_slice(&(i.as_f64() as f32).to_le_bytes());
    }
}

fn read_complex_f32<T: Scalar>(bytes: &[u8], shape: [usize; 4]) -> ComplexTensor<T> {
    let len = shape.iter().product::<usize>();
    let mut re = Vec::with_capacity(len);
    let mut im = Vec::with_capacity(len);
    for chunk in bytes.chunks_exact(8) {
        re.push(T::lit(f32::from_le_bytes(chunk[..4].try_into().unwrap()) as f64));
        im.push(T::lit(f32::from_le_bytes(chunk[4..].try_into().unwrap()) as f64));
    }
    ComplexTensor {
        re: RealTensor::from_vec(shape, re),
        im: RealTensor::from_vec(shape, im),
    }
}

impl<T: Scalar> Dataset<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn manifest(&self) -> DatasetManifest {
        let (n, c, h, w) = (self.len(), self.coils, self.h, self.w);
        let cbytes = (n * c * h * w * 8) as u64;
        let sampled: usize = self.samples.iter().map(|s| s.measurement.mask.sampled()).sum();
        let fraction = sampled as f64 / (n * h * w) as f64;
        DatasetManifest {
            format: DATASET_FORMAT.into(),
            version: 1,
            dtype: "f32".into(),
            samples: n,
            coils: c,
            h,
            w,
            pattern: self.pattern,
            acceleration: self.acceleration,
            center_fraction: self.center_fraction,
            seed: self.seed,
            phantom: self.phantom,
            sample_seeds: self.samples.iter().map(|s| s.measurement.meta.seed).collect(),
            sampled_fraction: fraction,
            effective_acceleration: if fraction > 0.0 { 1.0 / fraction } else { f64::INFINITY },
            kspace: ArrayEntry {
                file: "kspace.bin".into(),
                offset: 0,
                bytes: cbytes,
                shape: vec![n, c, h, w, 2],
            },
            mask: ArrayEntry {
                file: "mask.bin".into(),
                offset: 0,
                bytes: (n * h * w) as u64,
                shape: vec![n, h, w],
            },
            target: ArrayEntry {
                file: "target.bin".into(),
                offset: 0,
                bytes: cbytes,
                shape: vec![n, c, h, w, 2],
            },
        }
    }

    pub fn save(&self, dir: &Path) -> Result<DatasetManifest> {
        fs::create_dir_all(dir)?;
        let manifest = self.manifest();
        let mut kspace = Vec::new();
        let mut mask = Vec::new();
        let mut target = Vec::new();
        for s in &self.samples {
            write_complex_f32(&mut kspace, &s.measurement.y);
            mask.extend_from_slice(&s.measurement.mask.bits);
            write_complex_f32(&mut target, &s.target);
        }
        fs::write(dir.join(&manifest.kspace.file), kspace)?;
        fs::write(dir.join(&manifest.mask.file), mask)?;
        fs::write(dir.join(&manifest.target.file), target)?;
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(manifest)
    }

    /// Loads and validates a dataset directory.
    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join("manifest.json"))?;
        let m: DatasetManifest = serde_json::from_str(&text)?;
        if m.format != DATASET_FORMAT || m.version != 1 || m.dtype != "f32" {
            return Err(Error::Format(format!(
                "unsupported dataset {} v{} ({})",
                m.format, m.version, m.dtype
            )));
        }
        let (n, c, h, w) = (m.samples, m.coils, m.h, m.w);
        if n == 0 || c == 0 || h == 0 || w == 0 || m.sample_seeds.len() != n {
            return Err(Error::Format("dataset manifest has empty or inconsistent dimensions".into()));
        }
        let read = |e: &ArrayEntry, shape: Vec<usize>, elem: usize| -> Result<Vec<u8>> {
            if e.shape != shape {
                return Err(Error::Format(format!("{} has shape {:?}, expected {shape:?}", e.file, e.shape)));
            }
            let want = shape.iter().product::<usize>() / if elem == 8 { 2 } else { 1 } * elem;
            if e.bytes as usize != want {
                return Err(Error::Format(format!("{} declares {} bytes, expected {want}", e.file, e.bytes)));
            }
            let raw = fs::read(dir.join(&e.file))?;
            let start = e.offset as usize;
            raw.get(start..start + want)
                .map(|s| s.to_vec())
                .ok_or_else(|| Error::Format(format!("{} is shorter than declared", e.file)))
        };
        let kspace = read(&m.kspace, vec![n, c, h, w, 2], 8)?;
        let mask = read(&m.mask, vec![n, h, w], 1)?;
        let target = read(&m.target, vec![n, c, h, w, 2], 8)?;
        if mask.iter().any(|&b| b > 1) {
            return Err(Error::Format("mask entries must be 0 or 1".into()));
        }
        let per = c * h * w * 8;
        let samples = (0..n)
            .map(|i| {
                let bits = mask[i * h * w..(i + 1) * h * w].to_vec();
                let sm = SamplingMask {
                    h,
                    w,
                    bits,
                    pattern: m.pattern,
                    acceleration: m.acceleration,
                    center_fraction: m.center_fraction,
                };
                let y = read_complex_f32(&kspace[i * per..(i + 1) * per], [1, c, h, w]);
                let target = read_complex_f32(&target[i * per..(i + 1) * per], [1, c, h, w]);
                if !y.all_finite() || !target.all_finite() {
                    return Err(Error::Format(format!("sample {i} contains non-finite values")));
                }
                Ok(Sample {
                    measurement: KSpaceMeasurement::new(y, sm, m.sample_seeds[i])?,
                    target,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            samples,
            coils: c,
            h,
            w,
            pattern: m.pattern,
            acceleration: m.acceleration,
            center_fraction: m.center_fraction,
            seed: m.seed,
            phantom: m.phantom,
        })
    }

    /// Splits off the last `count` samples.
    pub fn split_tail(&self, count: usize) -> (Self, Self) {
        let k = self.len().saturating_sub(count);
        let mut head = self.clone();
        let tail_samples = head.samples.split_off(k);
        let tail = Self {
            samples: tail_samples,
            ..self.clone_meta()
        };
        (head, tail)
    }

    fn clone_meta(&self) -> Self {
        Self {
            samples: Vec::new(),
            coils: self.coils,
            h: self.h,
            w: self.w,
            pattern: self.pattern,
            acceleration: self.acceleration,
            center_fraction: self.center_fraction,
            seed: self.seed,
            phantom: self.phantom,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            h: 16,
            w: 16,
            coils: 2,
            samples: 3,
            ..SimConfig::default()
        }
    }

    #[test]
    fn save_load_roundtrip_is_exact_in_f32() {
        let dir = tempfile::tempdir().unwrap();
        let ds = simulate_dataset::<f32>(&small()).unwrap();
        ds.save(dir.path()).unwrap();
        let back = Dataset::<f32>::load(dir.path()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        simulate_dataset::<f32>(&small()).unwrap().save(a.path()).unwrap();
        simulate_dataset::<f32>(&small()).unwrap().save(b.path()).unwrap();
        for f in ["manifest.json", "kspace.bin", "mask.bin", "target.bin"] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        }
    }

    #[test]
    fn manifest_reports_fraction() {
        let cfg = SimConfig {
            h: 64,
            w: 64,
            center_fraction: 0.0,
            samples: 1,
            ..SimConfig::default()
        };
        let m = simulate_dataset::<f32>(&cfg).unwrap().manifest();
        assert_eq!(m.sampled_fraction, 22.0 / 64.0);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        simulate_dataset::<f32>(&small()).unwrap().save(dir.path()).unwrap();
        let p = dir.path().join("target.bin");
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(Dataset::<f32>::load(dir.path()), Err(Error::Format(_))));
    }

    #[test]
    fn samples_differ_but_share_mask() {
        let ds = simulate_dataset::<f32>(&small()).unwrap();
        assert_ne!(ds.samples[0].target, ds.samples[1].target);
        assert_eq!(ds.samples[0].measurement.mask, ds.samples[1].measurement.mask);
    }
}
