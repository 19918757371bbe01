use std::collections::BTreeMap;

use super::feature::{split_counts, ChannelSplit};
use super::layer::Path;

/// Multiply-add count of one dual-octave layer.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FlopsReport {
    pub total_mul_adds: u64,
    /// Keyed by bank name, e.g. `hh.re`.
    pub per_path: BTreeMap<String, u64>,
    pub alpha: f64,
}

/// Count for a `c_in -> c_out` layer where both sides are split by `alpha`
/// on an `h x w` high-resolution grid.
pub fn count_flops(c_in: usize, c_out: usize, h: usize, w: usize, alpha: f64, kernel_size: usize) -> FlopsReport {
    let mut r = count_flops_split(
        split_counts(c_in, alpha),
        split_counts(c_out, alpha),
        h,
        w,
        kernel_size,
    );
    r.alpha = alpha;
    r
}

/// Each bank costs `out * in * k * k` multiply-adds per output pixel of its
/// path. Paths that touch the low branch convolve on the `h/2 x w/2` grid.
pub fn count_flops_split(
    input: ChannelSplit,
    output: ChannelSplit,
    h: usize,
    w: usize,
    kernel_size: usize,
) -> FlopsReport {
    let mut per_path = BTreeMap::new();
    let k2 = (kernel_size * kernel_size) as u64;
    for p in Path::ALL {
        let (o, i) = match p {
            Path::HighToHigh => (output.high, input.high),
            Path::HighToLow => (output.low, input.high),
            Path::LowToHigh => (output.high, input.low),
            Path::LowToLow => (output.low, input.low),
        };
        let pixels = if p.at_low_resolution() {
            (h / 2) * (w / 2)
        } else {
            h * w
        } as u64;
        let bank = o as u64 * i as u64 * k2 * pixels;
        per_path.insert(format!("{}.re", p.name()), bank);
        per_path.insert(format!("{}.im", p.name()), bank);
    }
    let total = per_path.values().sum();
    let alpha = if input.total() == 0 {
        0.0
    } else {
        input.low as f64 / input.total() as f64
    };
    FlopsReport {
        total_mul_adds: total,
        per_path,
        alpha,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_conv_closed_form() {
        let r = count_flops(64, 64, 32, 32, 0.0, 3);
        assert_eq!(r.total_mul_adds, 2 * 64 * 64 * 9 * 32 * 32);
        assert_eq!(r.total_mul_adds, 75_497_472);
        assert_eq!(r.per_path.values().sum::<u64>(), r.total_mul_adds);
    }

    #[test]
    fn enumeration_cross_check() {
        // count one multiply-add per (bank, out, in, tap, output pixel)
        let (si, so) = (ChannelSplit { high: 3, low: 2 }, ChannelSplit { high: 2, low: 4 });
        let (h, w, k) = (8usize, 6usize, 3usize);
        let mut n = 0u64;
        for p in Path::ALL {
            let (o, i, gh, gw) = match p {
                Path::HighToHigh => (so.high, si.high, h, w),
                Path::HighToLow => (so.low, si.high, h / 2, w / 2),
                Path::LowToHigh => (so.high, si.low, h / 2, w / 2),
                Path::LowToLow => (so.low, si.low, h / 2, w / 2),
            };
            for _bank in 0..2 {
                for _ in 0..o * i * k * k * gh * gw {
                    n += 1;
                }
            }
        }
        assert_eq!(count_flops_split(si, so, h, w, k).total_mul_adds, n);
    }

    #[test]
    fn all_low_is_a_quarter() {
        let zero = count_flops(64, 64, 32, 32, 0.0, 3).total_mul_adds;
        let one = count_flops(64, 64, 32, 32, 1.0, 3).total_mul_adds;
        assert_eq!(one * 4, zero);
    }

    #[test]
    fn strictly_decreasing_in_alpha() {
        let counts: Vec<u64> = (0..8)
            .map(|i| count_flops(64, 64, 32, 32, i as f64 * 0.125, 3).total_mul_adds)
            .collect();
        assert!(counts.windows(2).all(|p| p[1] < p[0]), "{counts:?}");
    }
}
