//! Comparison classifiers over the reflective input vector: an incrementally
//! trained MLP, a PSO-trained network and a C4.5 tree fused with naive Bayes.

mod bayes;
mod c45;
mod mlp;
mod pso;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::encoder::{IMAGING_FLAG, INPUT_LEN, MEDICAL_SLOTS, M_SLOTS, N_SLOTS};
use crate::error::{Error, Result};
use crate::evaluate::Algo;
use crate::metrics::Verdict;

pub use bayes::{bayes_fit, NaiveBayes, SlotKind};
pub use c45::{c45_build, entropy, pessimistic_rate, C45Params, DecisionTree, Node};
pub use mlp::{mlp_predict, mlp_train_incremental, sigmoid, MlpModel, MlpParams, MlpTraining};
pub use pso::{pso_optimize, pso_train_classifier, PsoClassifierParams, PsoParams, PsoResult, PsoSwarm, Topology};

fn check_xy(x: &[Vec<f64>], y: &[usize]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension { expected: x.len(), actual: y.len() });
    }
    let mut seen: Vec<usize> = y.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() < 2 {
        return Err(Error::Training("training needs at least two classes".into()));
    }
    let d = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != d) {
        return Err(Error::Dimension { expected: d, actual: bad.len() });
    }
    Ok(())
}

/// Scalar `{0, 1}` targets for one output unit, one-hot otherwise.
fn targets(y: &[usize], outputs: usize) -> Result<Vec<Vec<f64>>> {
    if outputs == 1 {
        if y.iter().any(|&c| c > 1) {
            return Err(Error::Training("a single output unit needs binary classes".into()));
        }
        return Ok(y.iter().map(|&c| vec![c as f64]).collect());
    }
    y.iter()
        .map(|&c| {
            if c >= outputs {
                return Err(Error::Training(format!("class {c} has no output unit")));
            }
            let mut t = vec![0.0; outputs];
            t[c] = 1.0;
            Ok(t)
        })
        .collect()
}

/// Slot kinds of the reflective layout: questionnaire cells and presence
/// flags are binary, everything else continuous.
pub fn layout_slot_kinds() -> Vec<SlotKind> {
    (0..INPUT_LEN)
        .map(|i| {
            let binary = M_SLOTS.contains(&i)
                || N_SLOTS.contains(&i)
                || i == IMAGING_FLAG
                || (MEDICAL_SLOTS.contains(&i) && (i - MEDICAL_SLOTS.start) % 2 == 0);
            if binary {
                SlotKind::Binary
            } else {
                SlotKind::Continuous
            }
        })
        .collect()
}

/// Product of the tree leaf distribution and the Bayes posterior,
/// renormalized. Falls back to the posterior (flag `true`) on zero mass.
pub fn hybrid_predict(tree: &DecisionTree, bayes: &NaiveBayes, x: &[f64]) -> (Vec<f64>, bool) {
    combine(tree.leaf_for(x), &bayes.posterior(x))
}

pub fn combine(tree: &[f64], bayes: &[f64]) -> (Vec<f64>, bool) {
    let prod: Vec<f64> = tree.iter().zip(bayes).map(|(a, b)| a * b).collect();
    let s: f64 = prod.iter().sum();
    if s > 0.0 {
        (prod.iter().map(|p| p / s).collect(), false)
    } else {
        (bayes.to_vec(), true)
    }
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best })
}

/// Argmax of the fused distribution; ties go to the Bayes favourite.
pub fn hybrid_class(dist: &[f64], bayes: &[f64]) -> usize {
    let top = dist.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = (0..dist.len()).filter(|&i| (dist[i] - top).abs() <= 1e-12).collect();
    *tied.iter().max_by(|&&a, &&b| bayes[a].total_cmp(&bayes[b]).then(b.cmp(&a))).unwrap()
}

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Mlp(MlpModel),
    Pso(MlpModel),
    C45bn { tree: DecisionTree, bayes: NaiveBayes },
}

/// Versioned JSON wrapper for a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub version: u32,
    pub model: Model,
}

impl ModelDocument {
    pub fn new(model: Model) -> Self {
        Self { version: MODEL_VERSION, model }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.version != MODEL_VERSION {
            return Err(Error::Config(format!("unsupported model version {}", doc.version)));
        }
        Ok(doc)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineParams {
    pub mlp: MlpParams,
    pub pso: PsoClassifierParams,
    pub c45: C45Params,
}

/// Trains `algo` on `positive` versus the rest and labels every test row by
/// argmax; baselines never abstain.
pub fn binary_verdicts(
    algo: Algo,
    train: &LabeledDataset,
    test: &LabeledDataset,
    positive: &str,
    seed: u64,
) -> Result<Vec<Verdict>> {
    binary_verdicts_with(algo, train, test, positive, seed, &BaselineParams::default())
}

pub fn binary_verdicts_with(
    algo: Algo,
    train: &LabeledDataset,
    test: &LabeledDataset,
    positive: &str,
    seed: u64,
    params: &BaselineParams,
) -> Result<Vec<Verdict>> {
    let model = train_binary(algo, train, positive, seed, params)?;
    test.samples
        .iter()
        .map(|r| Ok(if model.predict_class(r)? == 1 { Verdict::Positive } else { Verdict::Negative }))
        .collect()
}

/// Fits `algo` on `positive` (class 1) versus every other label (class 0).
pub fn train_binary(
    algo: Algo,
    train: &LabeledDataset,
    positive: &str,
    seed: u64,
    params: &BaselineParams,
) -> Result<Model> {
    let y = train.binary_targets(positive);
    let x = &train.samples;
    if x.is_empty() {
        return Err(Error::Training("training split is empty".into()));
    }
    let dim = train.dim();
    match algo {
        Algo::Mlp => {
            let mut layers = vec![dim];
            layers.extend(&params.mlp.hidden);
            layers.push(2);
            let run = mlp_train_incremental(x, &y, &layers, params.mlp.lr, params.mlp.epochs, seed)?;
            Ok(Model::Mlp(run.model))
        }
        Algo::Pso => {
            let mut layers = vec![dim];
            layers.extend(&params.pso.hidden);
            layers.push(1);
            let (m, _) = pso_train_classifier(x, &y, &layers, &params.pso, seed)?;
            Ok(Model::Pso(m))
        }
        Algo::C45bn => {
            let tree = c45_build(x, &y, 2, &params.c45)?;
            let kinds = if dim == INPUT_LEN { layout_slot_kinds() } else { vec![SlotKind::Continuous; dim] };
            let bayes = bayes_fit(x, &y, 2, &kinds)?;
            Ok(Model::C45bn { tree, bayes })
        }
        other => Err(Error::Config(format!("`{other}` is not a baseline learner"))),
    }
}

impl Model {
    /// Class distribution for one input row.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Model::Mlp(m) | Model::Pso(m) => m.predict(x),
            Model::C45bn { tree, bayes } => {
                if x.len() != bayes.kinds.len() {
                    return Err(Error::Dimension { expected: bayes.kinds.len(), actual: x.len() });
                }
                Ok(hybrid_predict(tree, bayes, x).0)
            }
        }
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        match self {
            Model::C45bn { tree, bayes } => {
                if x.len() != bayes.kinds.len() {
                    return Err(Error::Dimension { expected: bayes.kinds.len(), actual: x.len() });
                }
                let post = bayes.posterior(x);
                let (dist, _) = combine(tree.leaf_for(x), &post);
                Ok(hybrid_class(&dist, &post))
            }
            _ => Ok(argmax(&self.predict(x)?)),
        }
    }
}
