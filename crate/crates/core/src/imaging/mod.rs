//! CT slice processing: iterative threshold selection, ROI extraction, GLCM
//! texture statistics, shape features and a linear SVM for ROI acceptance.

mod features;
mod glcm;
mod roi;
mod svm;
mod threshold;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::medrecords::{Finding, FindingSource};

pub use features::{convex_area, eccentricity, equivalent_diameter, roi_features, ImagingFeatures, FEATURE_NAMES};
pub use glcm::{glcm, Glcm, GlcmOptions};
pub use roi::{segment_roi, Connectivity, RoiMask};
pub use svm::{svm_classify, svm_train, LinearSvm, SvmParams};
pub use threshold::{iterative_threshold, ThresholdResult};

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Imaging("image must be non-empty".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::Dimension { expected: width * height, actual: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Decodes PNG or binary PGM bytes.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory(bytes).map_err(|e| Error::Imaging(e.to_string()))?;
        Self::from_luma(img.to_luma8())
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Imaging(e.to_string()))?;
        Self::from_luma(img.to_luma8())
    }

    fn from_luma(img: image::GrayImage) -> Result<Self> {
        let (w, h) = img.dimensions();
        Self::new(w as usize, h as usize, img.into_raw())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImagingConfig {
    pub epsilon: f64,
    pub connectivity: Connectivity,
    pub glcm: GlcmOptions,
}

impl Default for ImagingConfig {
    fn default() -> Self {
        Self { epsilon: 0.5, connectivity: Connectivity::Four, glcm: GlcmOptions::default() }
    }
}

/// Threshold → largest component → GLCM → eight features.
pub fn extract_features(img: &GrayImage, cfg: &ImagingConfig) -> Result<ImagingFeatures> {
    let t = iterative_threshold(img, cfg.epsilon)?;
    let mask = segment_roi(img, t.threshold, cfg.connectivity)?;
    let g = glcm(img, &mask, &cfg.glcm)?;
    roi_features(&mask, &g)
}

pub const CT_LOW_SOLIDITY: &str = "ct_low_solidity";
pub const CT_HIGH_CONTRAST: &str = "ct_high_contrast";
pub const IMAGING_FINDINGS: [&str; 2] = [CT_LOW_SOLIDITY, CT_HIGH_CONTRAST];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImagingCuts {
    /// Below this solidity the ROI is reported as irregular.
    pub low_solidity: f64,
    /// Raw GLCM contrast above which texture is reported as heterogeneous.
    pub high_contrast: f64,
}

impl Default for ImagingCuts {
    fn default() -> Self {
        Self { low_solidity: 0.8, high_contrast: 2.0 }
    }
}

pub fn imaging_findings(f: &ImagingFeatures, cuts: &ImagingCuts) -> Vec<Finding> {
    let mut out = Vec::new();
    if f.solidity < cuts.low_solidity {
        out.push(Finding::new(CT_LOW_SOLIDITY, FindingSource::Imaging));
    }
    if f.contrast > cuts.high_contrast {
        out.push(Finding::new(CT_HIGH_CONTRAST, FindingSource::Imaging));
    }
    out
}
