//! Train-on-split, tally-on-test harness shared by the CLI, the service and
//! the acceptance suite.

use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cdamm::{default_signs, sign_sequence, InconclusivePolicy, Memory, RetrievalMode, ASTHMA};
use crate::dataset::LabeledDataset;
use crate::encoder::{Encoder, M_SLOTS};
use crate::error::{Error, Result};
use crate::metrics::{summarize, ConfusionTally, MetricsReport, Verdict};
use crate::questionnaire::threshold_classify;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Cdamm,
    Mlp,
    Pso,
    C45bn,
    Threshold,
}

impl Algo {
    pub const ALL: [Algo; 5] = [Algo::Cdamm, Algo::Mlp, Algo::Pso, Algo::C45bn, Algo::Threshold];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Cdamm => "cdamm",
            Algo::Mlp => "mlp",
            Algo::Pso => "pso",
            Algo::C45bn => "c45bn",
            Algo::Threshold => "threshold",
        }
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            Error::Config(format!("unknown algorithm `{s}` (expected cdamm, mlp, pso, c45bn or threshold)"))
        })
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub policy: InconclusivePolicy,
    pub mode: RetrievalMode,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { policy: InconclusivePolicy::default(), mode: RetrievalMode::Sequential, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub algo: Algo,
    pub train_size: usize,
    pub test_size: usize,
    pub tally: ConfusionTally,
    pub metrics: MetricsReport,
    /// Threshold chosen on the training split (threshold baseline only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<u32>,
    /// Wall-clock time; excluded from equality.
    #[serde(skip_deserializing)]
    pub runtime_ms: f64,
}

impl EvalReport {
    /// Everything except the runtime.
    pub fn same_outcome(&self, other: &Self) -> bool {
        self.algo == other.algo
            && self.train_size == other.train_size
            && self.test_size == other.test_size
            && self.tally == other.tally
            && self.phi == other.phi
    }
}

/// Folds `learn_case` over the training rows, starting from an empty memory.
pub fn train_memory(enc: &Encoder, train: &LabeledDataset) -> Result<Memory> {
    let mut mem = Memory::empty_default(&default_signs(&enc.core, &enc.professional))?;
    for (row, label) in train.samples.iter().zip(&train.labels) {
        let signs = sign_sequence(&enc.findings_from_vector(row)?);
        mem.learn_case(label, &signs)?;
    }
    Ok(mem)
}

pub fn cdamm_verdicts(enc: &Encoder, mem: &Memory, test: &LabeledDataset, cfg: &EvalConfig) -> Result<Vec<Verdict>> {
    test.samples
        .iter()
        .map(|row| {
            let signs = sign_sequence(&enc.findings_from_vector(row)?);
            Ok(mem.diagnose(&signs, &cfg.policy, cfg.mode)?.verdict)
        })
        .collect()
}

fn core_score(row: &[f64]) -> u32 {
    row[M_SLOTS].iter().sum::<f64>().round() as u32
}

/// Picks the `phi` that maximizes training accuracy; ties go to the lowest.
pub fn fit_threshold(train: &LabeledDataset, positive: &str, capacity: usize) -> u32 {
    let scores: Vec<u32> = train.samples.iter().map(|r| core_score(r)).collect();
    let truths: Vec<bool> = train.labels.iter().map(|l| l == positive).collect();
    (0..=capacity as u32)
        .map(|phi| {
            let correct = scores.iter().zip(&truths).filter(|(&s, &t)| (s >= phi) == t).count();
            (phi, correct)
        })
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map_or(0, |(phi, _)| phi)
}

pub fn evaluate(
    algo: Algo,
    enc: &Encoder,
    train: &LabeledDataset,
    test: &LabeledDataset,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if train.is_empty() {
        return Err(Error::Training("training split is empty".into()));
    }
    let start = Instant::now();
    let positive = cfg.policy.positive.as_str();
    let mut phi = None;
    let verdicts: Vec<Verdict> = match algo {
        Algo::Cdamm => {
            let mem = train_memory(enc, train)?;
            cdamm_verdicts(enc, &mem, test, cfg)?
        }
        Algo::Threshold => {
            let capacity = enc.core.capacity();
            let p = fit_threshold(train, positive, capacity);
            phi = Some(p);
            test.samples.iter().map(|r| threshold_classify(core_score(r), p, capacity)).collect::<Result<_>>()?
        }
        other => crate::baselines::binary_verdicts(other, train, test, positive, cfg.seed)?,
    };
    let mut tally = ConfusionTally::default();
    for (v, label) in verdicts.iter().zip(&test.labels) {
        tally.record(*v, label == positive);
    }
    Ok(EvalReport {
        algo,
        train_size: train.len(),
        test_size: test.len(),
        metrics: summarize(&tally),
        tally,
        phi,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Positive class used throughout the harness.
pub const POSITIVE: &str = ASTHMA;
