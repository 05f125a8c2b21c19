use serde::{Deserialize, Serialize};

use super::GrayImage;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub threshold: f64,
    /// One intensity class was empty; the threshold is the global mean.
    pub degenerate: bool,
    pub iterations: usize,
}

const MAX_ITERATIONS: usize = 256;

/// Iterates `T ← ½(mean(p ≤ T) + mean(p > T))` from the global mean until
/// successive thresholds differ by less than `eps`.
pub fn iterative_threshold(img: &GrayImage, eps: f64) -> Result<ThresholdResult> {
    if !(eps > 0.0) {
        return Err(Error::Config("threshold tolerance must be positive".into()));
    }
    let mut hist = [0u64; 256];
    for &p in img.pixels() {
        hist[p as usize] += 1;
    }
    let n = img.pixels().len() as f64;
    let mean = hist.iter().enumerate().map(|(v, &c)| v as f64 * c as f64).sum::<f64>() / n;

    let mut t = mean;
    for iteration in 1..=MAX_ITERATIONS {
        let (mut lo_sum, mut lo_n, mut hi_sum, mut hi_n) = (0.0, 0u64, 0.0, 0u64);
        for (v, &c) in hist.iter().enumerate() {
            if (v as f64) <= t {
                lo_sum += v as f64 * c as f64;
                lo_n += c;
            } else {
                hi_sum += v as f64 * c as f64;
                hi_n += c;
            }
        }
        if lo_n == 0 || hi_n == 0 {
            return Ok(ThresholdResult { threshold: mean, degenerate: true, iterations: iteration });
        }
        let next = 0.5 * (lo_sum / lo_n as f64 + hi_sum / hi_n as f64);
        let delta = (next - t).abs();
        t = next;
        if delta < eps {
            return Ok(ThresholdResult { threshold: t, degenerate: false, iterations: iteration });
        }
    }
    Ok(ThresholdResult { threshold: t, degenerate: false, iterations: MAX_ITERATIONS })
}
