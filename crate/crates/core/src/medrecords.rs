//! Optional medical-report values: validation, presence-flagged encoding and
//! threshold findings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};

/// Report fields in their fixed encoding order.
pub const REPORT_FIELDS: [&str; 9] = [
    "fvc_l",
    "fev1_l",
    "fef_l_s",
    "fif_l_s",
    "mvv_l_min",
    "lung_volume_l",
    "airway_resistance_kpa_s_l",
    "ios_resistance_kpa_s_l",
    "ios_reactance_kpa_s_l",
];

/// Number of slots in an encoded report: one (flag, value) pair per field.
pub const REPORT_SLOTS: usize = 2 * REPORT_FIELDS.len();

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MedicalReport {
    pub fvc_l: Option<f64>,
    pub fev1_l: Option<f64>,
    pub fef_l_s: Option<f64>,
    pub fif_l_s: Option<f64>,
    pub mvv_l_min: Option<f64>,
    pub lung_volume_l: Option<f64>,
    pub airway_resistance_kpa_s_l: Option<f64>,
    pub ios_resistance_kpa_s_l: Option<f64>,
    /// Signed; negative values are normal for reactance.
    pub ios_reactance_kpa_s_l: Option<f64>,
}

impl MedicalReport {
    /// Field values in [`REPORT_FIELDS`] order.
    pub fn values(&self) -> [Option<f64>; 9] {
        [
            self.fvc_l,
            self.fev1_l,
            self.fef_l_s,
            self.fif_l_s,
            self.mvv_l_min,
            self.lung_volume_l,
            self.airway_resistance_kpa_s_l,
            self.ios_resistance_kpa_s_l,
            self.ios_reactance_kpa_s_l,
        ]
    }

    pub fn from_values(v: [Option<f64>; 9]) -> Self {
        Self {
            fvc_l: v[0],
            fev1_l: v[1],
            fef_l_s: v[2],
            fif_l_s: v[3],
            mvv_l_min: v[4],
            lung_volume_l: v[5],
            airway_resistance_kpa_s_l: v[6],
            ios_resistance_kpa_s_l: v[7],
            ios_reactance_kpa_s_l: v[8],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.values().iter().all(Option::is_none)
    }

    fn check(&self) -> Vec<FieldError> {
        let mut errors = Vec::new();
        for (name, value) in REPORT_FIELDS.iter().zip(self.values()) {
            let Some(v) = value else { continue };
            if !v.is_finite() {
                errors.push(FieldError::new(*name, "value must be finite"));
            } else if *name != "ios_reactance_kpa_s_l" && v <= 0.0 {
                errors.push(FieldError::new(*name, "value must be positive"));
            }
        }
        if let (Some(fev1), Some(fvc)) = (self.fev1_l, self.fvc_l) {
            if fev1 > fvc {
                errors.push(FieldError::new("fev1_l", "fev1 exceeds fvc"));
            }
        }
        errors
    }

    pub fn validated(self) -> Result<Self> {
        let errors = self.check();
        if errors.is_empty() {
            Ok(self)
        } else {
            Err(Error::Validation(errors))
        }
    }
}

/// Validates a raw JSON report: a map of field names to numbers, where an
/// absent key (or `null`) is an absent value.
pub fn validate_report(raw: &serde_json::Map<String, serde_json::Value>) -> Result<MedicalReport> {
    let mut errors = Vec::new();
    let mut values = [None; 9];
    for (key, value) in raw {
        let Some(pos) = REPORT_FIELDS.iter().position(|f| f == key) else {
            errors.push(FieldError::new(key, "unknown report field"));
            continue;
        };
        match value {
            serde_json::Value::Null => {}
            v => match v.as_f64() {
                Some(x) => values[pos] = Some(x),
                None => errors.push(FieldError::new(key, format!("expected a number, got {v}"))),
            },
        }
    }
    let report = MedicalReport::from_values(values);
    errors.extend(report.check());
    if errors.is_empty() {
        Ok(report)
    } else {
        Err(Error::Validation(errors))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn normalize(&self, x: f64) -> f64 {
        ((x - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    /// Inverse of [`Range::normalize`] for unclamped values.
    pub fn denormalize(&self, v: f64) -> f64 {
        self.lo + v * (self.hi - self.lo)
    }
}

/// Per-field reference ranges used for normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, Range>", into = "BTreeMap<String, Range>")]
pub struct ReferenceRanges([Range; 9]);

impl Default for ReferenceRanges {
    fn default() -> Self {
        Self([
            Range::new(2.0, 6.0),
            Range::new(1.0, 5.0),
            Range::new(0.5, 6.0),
            Range::new(1.0, 8.0),
            Range::new(40.0, 200.0),
            Range::new(3.0, 9.0),
            Range::new(0.05, 0.6),
            Range::new(0.1, 1.0),
            Range::new(-0.6, 0.1),
        ])
    }
}

impl TryFrom<BTreeMap<String, Range>> for ReferenceRanges {
    type Error = Error;

    /// Fields missing from the map keep their default range.
    fn try_from(map: BTreeMap<String, Range>) -> Result<Self> {
        let mut ranges = Self::default();
        for (key, range) in map {
            let pos = REPORT_FIELDS
                .iter()
                .position(|f| *f == key)
                .ok_or_else(|| Error::Config(format!("unknown report field `{key}`")))?;
            if !(range.hi > range.lo) {
                return Err(Error::Config(format!("range for `{key}` must have hi > lo")));
            }
            ranges.0[pos] = range;
        }
        Ok(ranges)
    }
}

impl From<ReferenceRanges> for BTreeMap<String, Range> {
    fn from(r: ReferenceRanges) -> Self {
        REPORT_FIELDS.iter().zip(r.0).map(|(k, v)| (k.to_string(), v)).collect()
    }
}

impl ReferenceRanges {
    pub fn get(&self, index: usize) -> Range {
        self.0[index]
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `(flag, value)` pairs in field order; flag 0 forces value 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedFeatureBlock {
    pub slots: Vec<f64>,
}

impl FlaggedFeatureBlock {
    pub fn zeros() -> Self {
        Self { slots: vec![0.0; REPORT_SLOTS] }
    }
}

pub fn encode_report(r: &MedicalReport, ranges: &ReferenceRanges) -> FlaggedFeatureBlock {
    let mut slots = Vec::with_capacity(REPORT_SLOTS);
    for (i, value) in r.values().into_iter().enumerate() {
        match value {
            Some(x) => {
                slots.push(1.0);
                slots.push(ranges.get(i).normalize(x));
            }
            None => {
                slots.push(0.0);
                slots.push(0.0);
            }
        }
    }
    FlaggedFeatureBlock { slots }
}

/// Reconstructs report values from an encoded block. Values that were
/// clamped at a range bound come back as that bound.
pub fn decode_report(block: &[f64], ranges: &ReferenceRanges) -> Result<MedicalReport> {
    if block.len() != REPORT_SLOTS {
        return Err(Error::Dimension { expected: REPORT_SLOTS, actual: block.len() });
    }
    let mut values = [None; 9];
    for (i, v) in values.iter_mut().enumerate() {
        if block[2 * i] != 0.0 {
            *v = Some(ranges.get(i).denormalize(block[2 * i + 1]));
        }
    }
    Ok(MedicalReport::from_values(values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FindingSource {
    Questionnaire,
    Report,
    Imaging,
}

/// A discrete sign presented to the associative memory.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Finding {
    pub id: String,
    pub source: FindingSource,
}

impl Finding {
    pub fn new(id: impl Into<String>, source: FindingSource) -> Self {
        Self { id: id.into(), source }
    }
}

pub const FEV1_FVC_LOW: &str = "fev1_fvc_low";
pub const AIRWAY_RESISTANCE_HIGH: &str = "airway_resistance_high";
pub const IOS_REACTANCE_LOW: &str = "ios_reactance_low";

/// Report findings in vocabulary order.
pub const REPORT_FINDINGS: [&str; 3] = [FEV1_FVC_LOW, AIRWAY_RESISTANCE_HIGH, IOS_REACTANCE_LOW];

/// Cut points for the report findings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FindingCuts {
    pub fev1_fvc_ratio: f64,
    pub airway_resistance: f64,
    pub ios_reactance: f64,
}

impl Default for FindingCuts {
    fn default() -> Self {
        Self { fev1_fvc_ratio: 0.70, airway_resistance: 0.3, ios_reactance: -0.2 }
    }
}

pub fn discretize_findings(r: &MedicalReport, cuts: &FindingCuts) -> Vec<Finding> {
    let mut out = Vec::new();
    if let (Some(fev1), Some(fvc)) = (r.fev1_l, r.fvc_l) {
        if fev1 / fvc < cuts.fev1_fvc_ratio {
            out.push(Finding::new(FEV1_FVC_LOW, FindingSource::Report));
        }
    }
    if matches!(r.airway_resistance_kpa_s_l, Some(x) if x > cuts.airway_resistance) {
        out.push(Finding::new(AIRWAY_RESISTANCE_HIGH, FindingSource::Report));
    }
    if matches!(r.ios_reactance_kpa_s_l, Some(x) if x < cuts.ios_reactance) {
        out.push(Finding::new(IOS_REACTANCE_LOW, FindingSource::Report));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    fn raw(v: serde_json::Value) -> serde_json::Map<String, serde_json::Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn validation() {
        let ok = validate_report(&raw(json!({"fvc_l": 4.0, "fev1_l": 3.2}))).unwrap();
        assert_eq!(ok.fvc_l, Some(4.0));

        let err = validate_report(&raw(json!({"fvc_l": 3.0, "fev1_l": 3.5}))).unwrap_err();
        assert_eq!(err.field_errors().unwrap()[0].message, "fev1 exceeds fvc");

        let empty = validate_report(&raw(json!({}))).unwrap();
        assert!(empty.is_empty());

        let err = validate_report(&raw(json!({"fvc_l": -1.0, "mvv_l_min": "lots"}))).unwrap_err();
        let fields: Vec<_> = err.field_errors().unwrap().iter().map(|f| f.field.clone()).collect();
        assert!(fields.contains(&"fvc_l".to_string()));
        assert!(fields.contains(&"mvv_l_min".to_string()));

        assert!(validate_report(&raw(json!({"ios_reactance_kpa_s_l": -0.3}))).is_ok());
    }

    #[test]
    fn encoding() {
        let ranges = ReferenceRanges::default();
        assert_eq!(encode_report(&MedicalReport::default(), &ranges).slots, vec![0.0; 18]);

        let hi = MedicalReport { fvc_l: Some(6.0), ..Default::default() };
        let slots = encode_report(&hi, &ranges).slots;
        assert_eq!(&slots[..4], &[1.0, 1.0, 0.0, 0.0]);

        let mid = MedicalReport { fvc_l: Some(4.0), ..Default::default() };
        assert_eq!(&encode_report(&mid, &ranges).slots[..2], &[1.0, 0.5]);

        let above = MedicalReport { fvc_l: Some(9.0), ..Default::default() };
        assert_eq!(encode_report(&above, &ranges).slots[1], 1.0);
    }

    #[test]
    fn findings() {
        let cuts = FindingCuts::default();
        let low = MedicalReport { fev1_l: Some(2.0), fvc_l: Some(4.0), ..Default::default() };
        assert!(discretize_findings(&low, &cuts).iter().any(|f| f.id == FEV1_FVC_LOW));
        let normal = MedicalReport { fev1_l: Some(3.9), fvc_l: Some(4.0), ..Default::default() };
        assert!(discretize_findings(&normal, &cuts).is_empty());
        assert!(discretize_findings(&MedicalReport::default(), &cuts).is_empty());

        let both = MedicalReport {
            airway_resistance_kpa_s_l: Some(0.45),
            ios_reactance_kpa_s_l: Some(-0.35),
            ..Default::default()
        };
        let ids: Vec<_> = discretize_findings(&both, &cuts).into_iter().map(|f| f.id).collect();
        assert_eq!(ids, vec![AIRWAY_RESISTANCE_HIGH, IOS_REACTANCE_LOW]);
    }

    #[test]
    fn range_config_overrides_defaults() {
        let r = ReferenceRanges::from_json(r#"{"fvc_l": {"lo": 1.0, "hi": 3.0}}"#).unwrap();
        assert_eq!(r.get(0), Range::new(1.0, 3.0));
        assert_eq!(r.get(1), ReferenceRanges::default().get(1));
        assert!(ReferenceRanges::from_json(r#"{"fvc_l": {"lo": 3.0, "hi": 1.0}}"#).is_err());
        assert!(ReferenceRanges::from_json(r#"{"nope": {"lo": 0.0, "hi": 1.0}}"#).is_err());
    }

    fn arb_report() -> impl Strategy<Value = MedicalReport> {
        proptest::collection::vec(proptest::option::of(0.01f64..300.0), 9)
            .prop_map(|v| MedicalReport::from_values(v.try_into().unwrap()))
    }

    proptest! {
        #[test]
        fn absent_flags_zero_values(r in arb_report()) {
            let block = encode_report(&r, &ReferenceRanges::default());
            for pair in block.slots.chunks(2) {
                prop_assert!(pair[0] == 0.0 || pair[0] == 1.0);
                if pair[0] == 0.0 { prop_assert_eq!(pair[1], 0.0); }
                prop_assert!((0.0..=1.0).contains(&pair[1]));
            }
        }

        #[test]
        fn encoding_is_monotone(a in 2.0f64..6.0, b in 2.0f64..6.0) {
            let ranges = ReferenceRanges::default();
            let enc = |x| encode_report(&MedicalReport { fvc_l: Some(x), ..Default::default() }, &ranges).slots[1];
            if a <= b { prop_assert!(enc(a) <= enc(b)); }
        }

        #[test]
        fn findings_only_for_present_fields(r in arb_report()) {
            for f in discretize_findings(&r, &FindingCuts::default()) {
                prop_assert!(REPORT_FINDINGS.contains(&f.id.as_str()));
                match f.id.as_str() {
                    FEV1_FVC_LOW => prop_assert!(r.fev1_l.is_some() && r.fvc_l.is_some()),
                    AIRWAY_RESISTANCE_HIGH => prop_assert!(r.airway_resistance_kpa_s_l.is_some()),
                    _ => prop_assert!(r.ios_reactance_kpa_s_l.is_some()),
                }
            }
        }
    }
}
