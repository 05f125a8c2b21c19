//! The reflective input vector: one fixed 181-slot layout shared by every
//! classifier.
//!
//! | slots (0-based) | content |
//! |---|---|
//! | `0..100`   | core response matrix M |
//! | `100..150` | professional response matrix N (zeros if absent) |
//! | `150..154` | subscores in name order, each divided by its maximum |
//! | `154..172` | medical `(flag, value)` pairs |
//! | `172`      | imaging presence flag |
//! | `173..181` | imaging features, normalized |

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{imaging_findings, ImagingCuts, ImagingFeatures};
use crate::medrecords::{
    decode_report, discretize_findings, encode_report, Finding, FindingCuts, FindingSource, FlaggedFeatureBlock,
    MedicalReport, ReferenceRanges, REPORT_SLOTS,
};
use crate::questionnaire::{
    compute_subscores, expand_response_matrix, QuestionnaireDefinition, ResponseMatrix, ResponseSet,
};

pub const LAYOUT_VERSION: u32 = 1;
pub const INPUT_LEN: usize = 181;

pub const M_SLOTS: Range<usize> = 0..100;
pub const N_SLOTS: Range<usize> = 100..150;
pub const SUBSCORE_SLOTS: Range<usize> = 150..154;
pub const MEDICAL_SLOTS: Range<usize> = 154..172;
pub const IMAGING_FLAG: usize = 172;
pub const IMAGING_SLOTS: Range<usize> = 173..181;

/// Subscore names in slot order.
pub const SUBSCORE_NAMES: [&str; 4] = ["bronchial_obstruction", "exertional", "nocturnal", "pollutant_effect"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReflectiveInputMatrix {
    pub values: Vec<f64>,
}

impl ReflectiveInputMatrix {
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Reference maxima that bring imaging features into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImagingScale {
    pub image_pixels: f64,
    pub glcm_levels: usize,
}

impl Default for ImagingScale {
    fn default() -> Self {
        Self { image_pixels: 512.0 * 512.0, glcm_levels: 8 }
    }
}

impl ImagingScale {
    fn divisors(&self) -> [f64; 8] {
        let l = self.glcm_levels as f64 - 1.0;
        let d = (4.0 * self.image_pixels / std::f64::consts::PI).sqrt();
        [self.image_pixels, self.image_pixels, d, 1.0, 1.0, l * l, 1.0, 1.0]
    }

    pub fn normalize(&self, f: &ImagingFeatures) -> [f64; 8] {
        let div = self.divisors();
        let mut v = f.to_array();
        v.iter_mut().zip(div).for_each(|(x, d)| *x /= d);
        v
    }

    pub fn denormalize(&self, v: &[f64]) -> ImagingFeatures {
        let div = self.divisors();
        let mut out = [0.0; 8];
        for i in 0..8 {
            out[i] = v[i] * div[i];
        }
        ImagingFeatures::from_array(out)
    }
}

/// Places already-expanded blocks into the fixed layout.
pub fn assemble_input(
    m: &ResponseMatrix,
    n: Option<&ResponseMatrix>,
    subscores: &[f64; 4],
    med: Option<&FlaggedFeatureBlock>,
    img: Option<&ImagingFeatures>,
    scale: &ImagingScale,
) -> Result<ReflectiveInputMatrix> {
    let check = |len: usize, expected: usize, what: &str| {
        if len == expected {
            Ok(())
        } else {
            Err(Error::Layout(format!("{what} has length {len}, expected {expected}")))
        }
    };
    check(m.len(), M_SLOTS.len(), "matrix M")?;
    let mut values = vec![0.0; INPUT_LEN];
    for (slot, &b) in values[M_SLOTS].iter_mut().zip(&m.bits) {
        *slot = f64::from(b);
    }
    if let Some(n) = n {
        check(n.len(), N_SLOTS.len(), "matrix N")?;
        for (slot, &b) in values[N_SLOTS].iter_mut().zip(&n.bits) {
            *slot = f64::from(b);
        }
    }
    if subscores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Layout("subscores must be finite".into()));
    }
    values[SUBSCORE_SLOTS].copy_from_slice(subscores);
    if let Some(med) = med {
        check(med.slots.len(), REPORT_SLOTS, "medical block")?;
        if med.slots.iter().any(|s| !s.is_finite()) {
            return Err(Error::Layout("medical block must be finite".into()));
        }
        values[MEDICAL_SLOTS].copy_from_slice(&med.slots);
    }
    if let Some(f) = img {
        let v = scale.normalize(f);
        if v.iter().any(|s| !s.is_finite()) {
            return Err(Error::Layout("imaging features must be finite".into()));
        }
        values[IMAGING_FLAG] = 1.0;
        values[IMAGING_SLOTS].copy_from_slice(&v);
    }
    Ok(ReflectiveInputMatrix { values })
}

/// Everything known about one patient before encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientInput {
    pub core: ResponseSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub professional: Option<ResponseSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<MedicalReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imaging: Option<ImagingFeatures>,
}

/// Encoding and sign-extraction settings bundled with the two definitions.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub core: QuestionnaireDefinition,
    pub professional: QuestionnaireDefinition,
    pub ranges: ReferenceRanges,
    pub finding_cuts: FindingCuts,
    pub imaging_cuts: ImagingCuts,
    pub imaging_scale: ImagingScale,
}

impl Default for Encoder {
    fn default() -> Self {
        Self {
            core: QuestionnaireDefinition::core(),
            professional: QuestionnaireDefinition::professional(),
            ranges: ReferenceRanges::default(),
            finding_cuts: FindingCuts::default(),
            imaging_cuts: ImagingCuts::default(),
            imaging_scale: ImagingScale::default(),
        }
    }
}

impl Encoder {
    /// Combined subscores over both definitions, each divided by its maximum.
    pub fn subscores(&self, m: &ResponseMatrix, n: Option<&ResponseMatrix>) -> Result<[f64; 4]> {
        let core = compute_subscores(&self.core, m, &self.core.subscore_index_sets())?;
        let prof = match n {
            Some(n) => compute_subscores(&self.professional, n, &self.professional.subscore_index_sets())?,
            None => BTreeMap::new(),
        };
        let mut out = [0.0; 4];
        for (slot, name) in out.iter_mut().zip(SUBSCORE_NAMES) {
            let max = self.core.subscore_max(name) + self.professional.subscore_max(name);
            let got = core.get(name).copied().unwrap_or(0) + prof.get(name).copied().unwrap_or(0);
            *slot = if max == 0 { 0.0 } else { f64::from(got) / f64::from(max) };
        }
        Ok(out)
    }

    pub fn encode(&self, p: &PatientInput) -> Result<ReflectiveInputMatrix> {
        let m = expand_response_matrix(&self.core, &p.core)?;
        let n = p.professional.as_ref().map(|r| expand_response_matrix(&self.professional, r)).transpose()?;
        let subs = self.subscores(&m, n.as_ref())?;
        let med = p.report.as_ref().map(|r| encode_report(r, &self.ranges));
        assemble_input(&m, n.as_ref(), &subs, med.as_ref(), p.imaging.as_ref(), &self.imaging_scale)
    }

    /// Discrete signs: one per yes answer, then report and imaging findings.
    pub fn findings(&self, p: &PatientInput) -> Vec<Finding> {
        let mut out: Vec<Finding> =
            p.core.yes_ids(&self.core).map(|id| Finding::new(id, FindingSource::Questionnaire)).collect();
        if let Some(r) = &p.professional {
            out.extend(r.yes_ids(&self.professional).map(|id| Finding::new(id, FindingSource::Questionnaire)));
        }
        if let Some(r) = &p.report {
            out.extend(discretize_findings(r, &self.finding_cuts));
        }
        if let Some(f) = &p.imaging {
            out.extend(imaging_findings(f, &self.imaging_cuts));
        }
        out
    }

    /// Recovers the same sign stream from an encoded vector. Report values
    /// pass through the clamped normalization, so a value beyond its
    /// reference range is read back as the range bound.
    pub fn findings_from_vector(&self, v: &[f64]) -> Result<Vec<Finding>> {
        if v.len() != INPUT_LEN {
            return Err(Error::Dimension { expected: INPUT_LEN, actual: v.len() });
        }
        let mut out = Vec::new();
        for (def, base) in [(&self.core, M_SLOTS.start), (&self.professional, N_SLOTS.start)] {
            for q in def.questions() {
                let block = def.block(&q.id).expect("question has a block");
                if v[base + block.start] != 0.0 {
                    out.push(Finding::new(&q.id, FindingSource::Questionnaire));
                }
            }
        }
        let report = decode_report(&v[MEDICAL_SLOTS], &self.ranges)?;
        out.extend(discretize_findings(&report, &self.finding_cuts));
        if v[IMAGING_FLAG] != 0.0 {
            let f = self.imaging_scale.denormalize(&v[IMAGING_SLOTS]);
            out.extend(imaging_findings(&f, &self.imaging_cuts));
        }
        Ok(out)
    }
}
