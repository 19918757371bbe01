//! Error-map grids: zero-filled, reconstruction, ground truth and the
//! reconstruction error amplified five times, one row per sample.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::eval::SampleImages;
use crate::scalar::Scalar;

pub const ERROR_GAIN: f64 = 5.0;
const GAP: usize = 2;

/// Black → red → yellow → white.
pub fn hot(v: f64) -> [u8; 3] {
    let v = v.clamp(0.0, 1.0) * 3.0;
    let ch = |x: f64| (x.clamp(0.0, 1.0) * 255.0).round() as u8;
    [ch(v), ch(v - 1.0), ch(v - 2.0)]
}

fn gray(v: f64) -> [u8; 3] {
    let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    [g, g, g]
}

/// Renders up to `max_rows` samples into an RGB image buffer.
pub fn render_grid<T: Scalar>(images: &[SampleImages<T>], max_rows: usize) -> Result<(usize, usize, Vec<u8>)> {
    let rows = images.len().min(max_rows);
    if rows == 0 {
        return Err(Error::Config("nothing to render".into()));
    }
    let (h, w) = (images[0].truth.h(), images[0].truth.w());
    let (width, height) = (4 * w + 3 * GAP, rows * h + (rows - 1) * GAP);
    let mut buf = vec![255u8; width * height * 3];
    for (r, s) in images.iter().take(rows).enumerate() {
        let peak = s.truth.data().iter().fold(0.0f64, |m, v| m.max(v.as_f64())).max(1e-12);
        let tiles: [&dyn Fn(usize) -> [u8; 3]; 4] = [
            &|p| gray(s.zero_filled.data()[p].as_f64() / peak),
            &|p| gray(s.recon.data()[p].as_f64() / peak),
            &|p| gray(s.truth.data()[p].as_f64() / peak),
            &|p| hot(ERROR_GAIN * (s.recon.data()[p] - s.truth.data()[p]).abs().as_f64() / peak),
        ];
        for (t, tile) in tiles.iter().enumerate() {
            for i in 0..h {
                for j in 0..w {
                    let (y, x) = (r * (h + GAP) + i, t * (w + GAP) + j);
                    let o = (y * width + x) * 3;
                    buf[o..o + 3].copy_from_slice(&tile(i * w + j));
                }
            }
        }
    }
    Ok((width, height, buf))
}

pub fn write_error_grid<T: Scalar>(path: &Path, images: &[SampleImages<T>], max_rows: usize) -> Result<()> {
    let (width, height, buf) = render_grid(images, max_rows)?;
    let file = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(file, width as u32, height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(|e| Error::Format(e.to_string()))?;
    writer.write_image_data(&buf).map_err(|e| Error::Format(e.to_string()))?;
    writer.finish().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}
