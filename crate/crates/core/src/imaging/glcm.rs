use serde::{Deserialize, Serialize};

use super::{GrayImage, RoiMask};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlcmOptions {
    pub levels: usize,
    pub offset: (i32, i32),
    /// Also count each pair in the reverse direction.
    pub symmetric: bool,
}

impl Default for GlcmOptions {
    fn default() -> Self {
        Self { levels: 8, offset: (1, 0), symmetric: false }
    }
}

/// Normalized gray-level co-occurrence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    levels: usize,
    matrix: Vec<f64>,
}

impl Glcm {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.levels + j]
    }

    /// Cells `(i, j, p)` in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.matrix.iter().enumerate().map(move |(k, &p)| (k / self.levels, k % self.levels, p))
    }

    pub fn energy(&self) -> f64 {
        self.cells().map(|(_, _, p)| p * p).sum()
    }

    pub fn contrast(&self) -> f64 {
        self.cells()
            .map(|(i, j, p)| {
                let d = i as f64 - j as f64;
                d * d * p
            })
            .sum()
    }

    /// `Σ p(i,j) / (1 + |i − j|)`.
    pub fn homogeneity(&self) -> f64 {
        self.cells().map(|(i, j, p)| p / (1.0 + (i as f64 - j as f64).abs())).sum()
    }
}

/// Uniform quantization of an 8-bit intensity into `levels` bins.
pub fn quantize(p: u8, levels: usize) -> usize {
    p as usize * levels / 256
}

pub fn glcm(img: &GrayImage, mask: &RoiMask, opts: &GlcmOptions) -> Result<Glcm> {
    let levels = opts.levels;
    if !(2..=256).contains(&levels) {
        return Err(Error::Config(format!("glcm levels must be in 2..=256, got {levels}")));
    }
    if opts.offset == (0, 0) {
        return Err(Error::Config("glcm offset must be nonzero".into()));
    }
    if mask.width() != img.width() || mask.height() != img.height() {
        return Err(Error::Dimension { expected: img.width() * img.height(), actual: mask.width() * mask.height() });
    }
    let (dx, dy) = (opts.offset.0 as isize, opts.offset.1 as isize);
    let mut counts = vec![0u64; levels * levels];
    let mut total = 0u64;
    for (x, y) in mask.members() {
        let (nx, ny) = (x as isize + dx, y as isize + dy);
        if nx < 0 || ny < 0 || !mask.contains(nx as usize, ny as usize) {
            continue;
        }
        let a = quantize(img.get(x, y), levels);
        let b = quantize(img.get(nx as usize, ny as usize), levels);
        counts[a * levels + b] += 1;
        total += 1;
        if opts.symmetric {
            counts[b * levels + a] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::Imaging("glcm undefined: no pixel pair inside the mask".into()));
    }
    let matrix = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(Glcm { levels, matrix })
}
