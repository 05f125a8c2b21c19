use std::collections::BTreeMap;
use std::path::Path;

use bronchial_dx::baselines::{Model, ModelDocument};
use bronchial_dx::cdamm::{sign_sequence, InconclusivePolicy, Memory, MemoryDocument, RetrievalMode, ASTHMA};
use bronchial_dx::cohort::{encode_records, generate, split, CohortConfig};
use bronchial_dx::dataset::read_dataset;
use bronchial_dx::encoder::{Encoder, PatientInput};
use bronchial_dx::evaluate::{evaluate, train_memory, Algo, EvalConfig, EvalReport};
use bronchial_dx::imaging::ImagingConfig;
use bronchial_dx::metrics::Verdict;
use bronchial_dx::questionnaire::{compute_score, threshold_classify};
use serde::{Deserialize, Serialize};

use crate::error::{ServiceError, ServiceResult};
use crate::payload::EvaluateRequest;

/// Label of the complementary class in binary baseline outputs.
pub const NOT_ASTHMA: &str = "not_asthma";

/// Result of one diagnosis, independent of the algorithm that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub algo: Algo,
    pub probabilities: BTreeMap<String, f64>,
    pub verdict: Verdict,
    pub top: Option<String>,
    #[serde(default)]
    pub zero_mass: bool,
    /// Signs presented to the memory, in order.
    pub signs: Vec<String>,
    /// Core questionnaire score (threshold baseline only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<u32>,
}

/// Stateless diagnosis settings plus any pre-trained baseline models.
#[derive(Debug, Clone)]
pub struct Engine {
    pub encoder: Encoder,
    pub policy: InconclusivePolicy,
    pub mode: RetrievalMode,
    pub imaging: ImagingConfig,
    pub threshold_phi: u32,
    pub models: BTreeMap<String, Model>,
}

impl Default for Engine {
    fn default() -> Self {
        Self {
            encoder: Encoder::default(),
            policy: InconclusivePolicy::default(),
            mode: RetrievalMode::Sequential,
            imaging: ImagingConfig::default(),
            threshold_phi: DEFAULT_PHI,
            models: BTreeMap::new(),
        }
    }
}

/// Threshold on the 0..=100 core score used when none is configured.
pub const DEFAULT_PHI: u32 = 5;

fn binary(p_positive: f64) -> BTreeMap<String, f64> {
    BTreeMap::from([(ASTHMA.to_string(), p_positive), (NOT_ASTHMA.to_string(), 1.0 - p_positive)])
}

impl Engine {
    /// Loads `mlp.json`, `pso.json` and `c45bn.json` model documents when present.
    pub fn load_models(&mut self, dir: &Path) -> ServiceResult<()> {
        for algo in [Algo::Mlp, Algo::Pso, Algo::C45bn] {
            let path = dir.join(format!("{algo}.json"));
            if path.exists() {
                let text = std::fs::read_to_string(&path)?;
                let doc = ModelDocument::from_json(&text)
                    .map_err(|e| ServiceError::Internal(format!("{}: {e}", path.display())))?;
                self.models.insert(algo.to_string(), doc.model);
            }
        }
        Ok(())
    }

    pub fn signs(&self, input: &PatientInput) -> Vec<String> {
        sign_sequence(&self.encoder.findings(input))
    }

    pub fn run(&self, memory: &Memory, input: &PatientInput, algo: Algo) -> ServiceResult<Outcome> {
        let signs = self.signs(input);
        match algo {
            Algo::Cdamm => {
                let d = memory.diagnose(&signs, &self.policy, self.mode)?;
                Ok(Outcome {
                    algo,
                    probabilities: d.probabilities,
                    verdict: d.verdict,
                    top: d.top,
                    zero_mass: d.zero_mass,
                    signs,
                    score: None,
                })
            }
            Algo::Threshold => {
                let score = compute_score(&self.encoder.core, &input.core)?;
                let verdict = threshold_classify(score, self.threshold_phi, self.encoder.core.capacity())?;
                let positive = verdict == Verdict::Positive;
                Ok(Outcome {
                    algo,
                    probabilities: binary(if positive { 1.0 } else { 0.0 }),
                    verdict,
                    top: Some(if positive { ASTHMA } else { NOT_ASTHMA }.to_string()),
                    zero_mass: false,
                    signs,
                    score: Some(score),
                })
            }
            other => {
                let model = self
                    .models
                    .get(other.name())
                    .ok_or_else(|| ServiceError::Unavailable(format!("no trained `{other}` model is loaded")))?;
                let x = self.encoder.encode(input)?;
                let p = model.predict(x.as_slice())?;
                let positive = model.predict_class(x.as_slice())? == 1;
                Ok(Outcome {
                    algo,
                    probabilities: binary(p[1]),
                    verdict: if positive { Verdict::Positive } else { Verdict::Negative },
                    top: Some(if positive { ASTHMA } else { NOT_ASTHMA }.to_string()),
                    zero_mass: false,
                    signs,
                    score: None,
                })
            }
        }
    }
}

/// Memory trained on the full default synthetic cohort; used when no model
/// directory supplies one.
pub fn bootstrap_memory(enc: &Encoder) -> ServiceResult<Memory> {
    let records = generate(&CohortConfig::default_preset(), enc)?;
    Ok(train_memory(enc, &encode_records(&records, enc)?)?)
}

/// Rejects absolute paths and parent components.
fn confined(base: &Path, rel: &str) -> ServiceResult<std::path::PathBuf> {
    let p = Path::new(rel);
    if p.is_absolute() || p.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
        return Err(ServiceError::field("dataset", "paths must stay inside the data directory"));
    }
    Ok(base.join(p))
}

/// Trains on one split and tallies the other.
pub fn run_evaluation(req: &EvaluateRequest, enc: &Encoder, data_dir: Option<&Path>) -> ServiceResult<EvalReport> {
    let (train, test) = match &req.dataset {
        Some(paths) => {
            let base = data_dir.ok_or_else(|| ServiceError::field("dataset", "no data directory is configured"))?;
            let train = read_dataset(confined(base, &paths.train)?)
                .map_err(|e| ServiceError::field("dataset.train", e.to_string()))?;
            let test = read_dataset(confined(base, &paths.test)?)
                .map_err(|e| ServiceError::field("dataset.test", e.to_string()))?;
            (train, test)
        }
        None => {
            let cfg = req.cohort_config()?;
            let records = generate(&cfg, enc).map_err(|e| ServiceError::field("cohort", e.to_string()))?;
            let (tr, te) = split(&records, req.train_fraction, req.split_seed)?;
            (encode_records(&tr, enc)?, encode_records(&te, enc)?)
        }
    };
    let cfg = EvalConfig { policy: req.policy.clone(), mode: req.mode, seed: req.train_seed };
    Ok(evaluate(req.algo, enc, &train, &test, &cfg)?)
}

pub fn memory_from_file(path: &Path) -> ServiceResult<Memory> {
    let text = std::fs::read_to_string(path)?;
    let doc: MemoryDocument =
        serde_json::from_str(&text).map_err(|e| ServiceError::Internal(format!("{}: {e}", path.display())))?;
    Memory::from_document(&doc).map_err(|e| ServiceError::Internal(format!("{}: {e}", path.display())))
}
