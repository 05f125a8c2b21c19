use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::GrayImage;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

impl Connectivity {
    fn neighbours(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)],
        }
    }
}

/// Binary pixel membership, same dimensions as the source image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl RoiMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Dimension { expected: width * height, actual: bits.len() });
        }
        Ok(Self { width, height, bits })
    }

    /// Mask covering every pixel.
    pub fn full(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![true; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.bits[y * self.width + x]
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Member pixel coordinates `(x, y)` in row-major order.
    pub fn members(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(move |(i, _)| (i % self.width, i / self.width))
    }
}

/// Largest connected component of `{pixel > t}`. Equal-sized components are
/// resolved in favour of the one met first in row-major order.
pub fn segment_roi(img: &GrayImage, t: f64, connectivity: Connectivity) -> Result<RoiMask> {
    let (w, h) = (img.width(), img.height());
    let above: Vec<bool> = img.pixels().iter().map(|&p| f64::from(p) > t).collect();
    let mut label = vec![usize::MAX; w * h];
    let mut best: Option<(usize, usize)> = None; // (label, size)
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !above[start] || label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for &(dx, dy) in connectivity.neighbours() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if above[j] && label[j] == usize::MAX {
                    label[j] = next;
                    queue.push_back(j);
                }
            }
        }
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((next, size));
        }
        next += 1;
    }
    let (keep, _) = best.ok_or_else(|| Error::Imaging("empty ROI: no pixel above threshold".into()))?;
    RoiMask::new(w, h, label.iter().map(|&l| l == keep).collect())
}
