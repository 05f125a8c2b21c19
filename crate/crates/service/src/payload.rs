//! Request bodies. Parsing is hand-rolled over `serde_json::Value` so that
//! every problem is reported against a dotted field path.

use base64::Engine as _;
use bronchial_dx::cdamm::{InconclusivePolicy, RetrievalMode};
use bronchial_dx::cohort::CohortConfig;
use bronchial_dx::encoder::{Encoder, PatientInput};
use bronchial_dx::evaluate::Algo;
use bronchial_dx::imaging::{extract_features, GrayImage, ImagingConfig, ImagingFeatures};
use bronchial_dx::medrecords::validate_report;
use bronchial_dx::questionnaire::ResponseSet;
use bronchial_dx::FieldError;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{ServiceError, ServiceResult};

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseRequest {
    pub input: PatientInput,
    pub algo: Algo,
}

const DIAGNOSE_KEYS: [&str; 5] = ["responses", "professional", "report", "imaging", "algo"];

fn object<'a>(v: &'a Value, field: &str) -> ServiceResult<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| ServiceError::field(field, "expected an object"))
}

fn present<'a>(body: &'a Map<String, Value>, key: &str) -> Option<&'a Value> {
    body.get(key).filter(|v| !v.is_null())
}

/// Collects errors from several independent parts before failing.
#[derive(Default)]
struct Collector(Vec<FieldError>);

impl Collector {
    fn take<T>(&mut self, r: ServiceResult<T>) -> ServiceResult<Option<T>> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(ServiceError::Validation(f)) => {
                self.0.extend(f);
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    fn finish(self) -> ServiceResult<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(ServiceError::Validation(self.0))
        }
    }
}

fn parse_algo(v: Option<&Value>) -> ServiceResult<Algo> {
    match v {
        None => Ok(Algo::Cdamm),
        Some(Value::String(s)) => s.parse().map_err(|_| {
            ServiceError::field(
                "algo",
                format!("unknown algorithm `{s}`; expected cdamm, mlp, pso, c45bn or threshold"),
            )
        }),
        Some(_) => Err(ServiceError::field("algo", "expected a string")),
    }
}

fn parse_imaging(v: &Value, cfg: &ImagingConfig) -> ServiceResult<ImagingFeatures> {
    let obj = object(v, "imaging")?;
    match (obj.get("features"), obj.get("image_base64")) {
        (Some(f), None) => {
            let feats: ImagingFeatures = serde_json::from_value(f.clone())
                .map_err(|e| ServiceError::field("imaging.features", e.to_string()))?;
            let bad: Vec<FieldError> = bronchial_dx::imaging::FEATURE_NAMES
                .iter()
                .zip(feats.to_array())
                .filter(|(_, x)| !x.is_finite() || *x < 0.0)
                .map(|(n, _)| FieldError::new(format!("imaging.features.{n}"), "must be finite and non-negative"))
                .collect();
            if bad.is_empty() {
                Ok(feats)
            } else {
                Err(ServiceError::Validation(bad))
            }
        }
        (None, Some(Value::String(b64))) => {
            let field = "imaging.image_base64";
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(b64.trim())
                .map_err(|e| ServiceError::field(field, format!("invalid base64: {e}")))?;
            let img = GrayImage::decode(&bytes).map_err(|e| ServiceError::field(field, e.to_string()))?;
            extract_features(&img, cfg).map_err(|e| ServiceError::field(field, e.to_string()))
        }
        (None, Some(_)) => Err(ServiceError::field("imaging.image_base64", "expected a string")),
        _ => Err(ServiceError::field("imaging", "give exactly one of `features` or `image_base64`")),
    }
}

pub fn parse_diagnose(body: &Value, enc: &Encoder, imaging: &ImagingConfig) -> ServiceResult<DiagnoseRequest> {
    let body = object(body, "body")?;
    let mut errs = Collector::default();
    for key in body.keys() {
        if !DIAGNOSE_KEYS.contains(&key.as_str()) {
            errs.0.push(FieldError::new(key.as_str(), "unknown field"));
        }
    }
    let algo = errs.take(parse_algo(present(body, "algo")))?;
    let core = match present(body, "responses") {
        None => {
            errs.0.push(FieldError::new("responses", "required"));
            None
        }
        Some(v) => errs.take(
            object(v, "responses")
                .and_then(|m| ResponseSet::from_json_map(&enc.core, m).map_err(ServiceError::from))
                .map_err(|e| e.nested("responses")),
        )?,
    };
    let professional = match present(body, "professional") {
        None => None,
        Some(v) => errs.take(
            object(v, "professional")
                .and_then(|m| ResponseSet::from_json_map(&enc.professional, m).map_err(ServiceError::from))
                .map_err(|e| e.nested("professional")),
        )?,
    };
    let report = match present(body, "report") {
        None => None,
        Some(v) => errs.take(
            object(v, "report")
                .and_then(|m| validate_report(m).map_err(ServiceError::from))
                .map_err(|e| e.nested("report")),
        )?,
    };
    let report = report.filter(|r| !r.is_empty());
    let features = match present(body, "imaging") {
        None => None,
        Some(v) => errs.take(parse_imaging(v, imaging))?,
    };
    errs.finish()?;
    Ok(DiagnoseRequest {
        input: PatientInput { core: core.unwrap(), professional, report, imaging: features },
        algo: algo.unwrap(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackRequest {
    /// Confirmed diagnosis; triggers learning when present.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub rating: Option<u8>,
}

impl FeedbackRequest {
    pub fn parse(body: &Value, diseases: &[String]) -> ServiceResult<Self> {
        let req: Self = serde_json::from_value(body.clone()).map_err(|e| ServiceError::field("body", e.to_string()))?;
        let mut errs = Vec::new();
        if req.label.is_none() && req.rating.is_none() {
            errs.push(FieldError::new("body", "give a `label`, a `rating` or both"));
        }
        if let Some(r) = req.rating {
            if !(1..=5).contains(&r) {
                errs.push(FieldError::new("rating", format!("rating must be 1 to 5, got {r}")));
            }
        }
        if let Some(l) = &req.label {
            if !diseases.contains(l) {
                errs.push(FieldError::new("label", format!("unknown disease `{l}`")));
            }
        }
        if errs.is_empty() {
            Ok(req)
        } else {
            Err(ServiceError::Validation(errs))
        }
    }
}

/// Where evaluation data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CohortSource {
    Preset(String),
    Inline(Box<CohortConfig>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetPaths {
    pub train: String,
    pub test: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateRequest {
    pub algo: Algo,
    /// Ignored when `dataset` is given.
    pub cohort: CohortSource,
    /// Overrides the cohort size.
    pub size: Option<usize>,
    /// Overrides the cohort seed.
    pub seed: Option<u64>,
    pub train_fraction: f64,
    pub split_seed: u64,
    /// Train and test files, relative to the data directory.
    pub dataset: Option<DatasetPaths>,
    pub policy: InconclusivePolicy,
    pub mode: RetrievalMode,
    /// Seed for the baseline trainers.
    pub train_seed: u64,
}

impl Default for EvaluateRequest {
    fn default() -> Self {
        Self {
            algo: Algo::Cdamm,
            cohort: CohortSource::Preset("default".into()),
            size: None,
            seed: None,
            train_fraction: 0.5,
            split_seed: 1,
            dataset: None,
            policy: InconclusivePolicy::default(),
            mode: RetrievalMode::Sequential,
            train_seed: 1,
        }
    }
}

impl EvaluateRequest {
    pub fn parse(body: &Value) -> ServiceResult<Self> {
        let req: Self = serde_json::from_value(body.clone()).map_err(|e| ServiceError::field("body", e.to_string()))?;
        if !(req.train_fraction > 0.0 && req.train_fraction < 1.0) {
            return Err(ServiceError::field("train_fraction", "must lie strictly between 0 and 1"));
        }
        Ok(req)
    }

    pub fn cohort_config(&self) -> ServiceResult<CohortConfig> {
        let mut cfg = match &self.cohort {
            CohortSource::Preset(name) => {
                CohortConfig::preset(name).map_err(|e| ServiceError::field("cohort", e.to_string()))?
            }
            CohortSource::Inline(c) => (**c).clone(),
        };
        if let Some(n) = self.size {
            cfg.size = n;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}
