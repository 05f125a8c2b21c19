//! Context-dependent auto-associative memory.
//!
//! Each disease `i` has a code `t_i` and an association set of sign codes
//! `s_j`. The memory matrix is `ψ = Σ_i t_i (t_i ⊗ Σ_j s_j)ᵀ`, so presenting a
//! context `c` together with a sign `s` yields `ψ (c ⊗ s) = Σ_i t_i (t_i·c)(S_i·s)`.
//! Context mass survives only on diseases associated with the presented sign.

mod codebook;
mod vocab;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Verdict;

pub use codebook::{Codebook, DiseaseCodebook, SignCodebook};
pub use vocab::{default_signs, sign_sequence, ASTHMA, DISEASES, HEALTHY, NO_FINDINGS};

/// Kronecker product: block `(i, j)` of the result is `a[i,j] · b`.
pub fn kronecker(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (p, q) = a.dim();
    let (e, f) = b.dim();
    let mut out = Array2::zeros((p * e, q * f));
    for ((i, j), &aij) in a.indexed_iter() {
        out.slice_mut(ndarray::s![i * e..(i + 1) * e, j * f..(j + 1) * f]).assign(&(b * aij));
    }
    out
}

/// Kronecker product of two column vectors.
pub fn kronecker_vec(a: &Array1<f64>, b: &Array1<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(a.len() * b.len());
    for (i, &ai) in a.iter().enumerate() {
        out.slice_mut(ndarray::s![i * b.len()..(i + 1) * b.len()]).assign(&(b * ai));
    }
    out
}

/// Decision thresholds applied to the final distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InconclusivePolicy {
    pub min_top: f64,
    pub min_gap: f64,
    /// Disease whose selection counts as a positive verdict.
    pub positive: String,
}

impl Default for InconclusivePolicy {
    fn default() -> Self {
        Self { min_top: 0.5, min_gap: 0.1, positive: ASTHMA.to_string() }
    }
}

/// How a list of signs is presented.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrievalMode {
    /// One retrieval per sign; each normalized output is the next context.
    #[default]
    Sequential,
    /// A single retrieval with the sum of all sign codes.
    Summed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub probabilities: BTreeMap<String, f64>,
    pub verdict: Verdict,
    pub top: Option<String>,
    /// Some retrieval step left no positive mass.
    pub zero_mass: bool,
}

/// Persisted form; ψ is rebuilt from the associations on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryDocument {
    pub version: u64,
    pub diseases: Vec<String>,
    pub signs: Vec<String>,
    pub associations: BTreeMap<String, Vec<String>>,
    pub case_counts: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Memory {
    diseases: DiseaseCodebook,
    signs: SignCodebook,
    associations: Vec<BTreeSet<usize>>,
    case_counts: Vec<u64>,
    version: u64,
    psi: Array2<f64>,
}

/// Rank-1 term `t (t ⊗ s_sum)ᵀ`.
fn term(t: &Array1<f64>, s_sum: &Array1<f64>) -> Array2<f64> {
    let row = kronecker_vec(t, s_sum);
    let col = t.view().insert_axis(Axis(1));
    col.dot(&row.view().insert_axis(Axis(0)))
}

fn resolve(
    dcb: &DiseaseCodebook,
    scb: &SignCodebook,
    assoc: &BTreeMap<String, BTreeSet<String>>,
) -> Result<Vec<BTreeSet<usize>>> {
    let mut out = vec![BTreeSet::new(); dcb.len()];
    for (disease, signs) in assoc {
        let i = dcb.index_of(disease).ok_or_else(|| Error::Association(format!("unknown disease `{disease}`")))?;
        for s in signs {
            let j = scb
                .index_of(s)
                .ok_or_else(|| Error::Association(format!("unknown sign `{s}` for disease `{disease}`")))?;
            out[i].insert(j);
        }
    }
    Ok(out)
}

/// Builds ψ from a complete association map; every disease of the codebook
/// must have at least one sign.
pub fn build_memory(
    dcb: DiseaseCodebook,
    scb: SignCodebook,
    assoc: &BTreeMap<String, BTreeSet<String>>,
) -> Result<Memory> {
    let sets = resolve(&dcb, &scb, assoc)?;
    if let Some(i) = sets.iter().position(BTreeSet::is_empty) {
        return Err(Error::Association(format!("disease `{}` has no associated sign", dcb.ids()[i])));
    }
    let counts = vec![0; dcb.len()];
    Ok(Memory::from_sets(dcb, scb, sets, counts, 0))
}

impl Memory {
    /// A memory with no associations, the starting point for learning.
    pub fn empty(dcb: DiseaseCodebook, scb: SignCodebook) -> Self {
        let k = dcb.len();
        Self::from_sets(dcb, scb, vec![BTreeSet::new(); k], vec![0; k], 0)
    }

    /// Canonical codebooks over the shipped disease list and sign vocabulary.
    pub fn empty_default(signs: &[String]) -> Result<Self> {
        Ok(Self::empty(Codebook::canonical(&DISEASES)?, Codebook::canonical(signs)?))
    }

    fn from_sets(
        dcb: DiseaseCodebook,
        scb: SignCodebook,
        associations: Vec<BTreeSet<usize>>,
        case_counts: Vec<u64>,
        version: u64,
    ) -> Self {
        let psi = Self::compose(&dcb, &scb, &associations);
        Self { diseases: dcb, signs: scb, associations, case_counts, version, psi }
    }

    fn compose(dcb: &DiseaseCodebook, scb: &SignCodebook, sets: &[BTreeSet<usize>]) -> Array2<f64> {
        let (k, d) = (dcb.len(), scb.len());
        let mut psi = Array2::zeros((k, k * d));
        for (i, set) in sets.iter().enumerate() {
            if set.is_empty() {
                continue;
            }
            let s_sum = set.iter().fold(Array1::zeros(d), |acc, &j| acc + scb.code(j));
            psi += &term(&dcb.code(i), &s_sum);
        }
        psi
    }

    pub fn psi(&self) -> &Array2<f64> {
        &self.psi
    }

    /// ψ recomposed from scratch out of the association lists.
    pub fn reconstruct(&self) -> Array2<f64> {
        Self::compose(&self.diseases, &self.signs, &self.associations)
    }

    pub fn diseases(&self) -> &DiseaseCodebook {
        &self.diseases
    }

    pub fn signs(&self) -> &SignCodebook {
        &self.signs
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn case_counts(&self) -> BTreeMap<String, u64> {
        self.diseases.ids().iter().cloned().zip(self.case_counts.iter().copied()).collect()
    }

    pub fn associations(&self) -> BTreeMap<String, BTreeSet<String>> {
        self.diseases
            .ids()
            .iter()
            .zip(&self.associations)
            .map(|(id, set)| {
                let signs = set.iter().map(|&j| self.signs.ids()[j].clone()).collect();
                (id.clone(), signs)
            })
            .collect()
    }

    pub fn is_associated(&self, disease: &str, sign: &str) -> bool {
        match (self.diseases.index_of(disease), self.signs.index_of(sign)) {
            (Some(i), Some(j)) => self.associations[i].contains(&j),
            _ => false,
        }
    }

    /// Disease frequencies among learned cases in code space; uniform before
    /// any case is learned.
    pub fn prior(&self) -> Array1<f64> {
        let total: u64 = self.case_counts.iter().sum();
        let k = self.diseases.len();
        let weights: Vec<f64> = if total == 0 {
            vec![1.0 / k as f64; k]
        } else {
            self.case_counts.iter().map(|&c| c as f64 / total as f64).collect()
        };
        self.to_context(&weights)
    }

    fn to_context(&self, weights: &[f64]) -> Array1<f64> {
        self.diseases.codes().dot(&Array1::from(weights.to_vec()))
    }

    fn sign_code(&self, id: &str) -> Result<Array1<f64>> {
        self.signs.index_of(id).map(|j| self.signs.code(j)).ok_or_else(|| Error::UnknownSign(id.to_string()))
    }

    /// `ψ (c ⊗ s)`.
    pub fn retrieve(&self, c: &Array1<f64>, s: &Array1<f64>) -> Result<Array1<f64>> {
        if c.len() != self.diseases.len() {
            return Err(Error::Dimension { expected: self.diseases.len(), actual: c.len() });
        }
        if s.len() != self.signs.len() {
            return Err(Error::Dimension { expected: self.signs.len(), actual: s.len() });
        }
        Ok(self.psi.dot(&kronecker_vec(c, s)))
    }

    /// Presents `signs` starting from context `prior` (code space) and reads
    /// the final context as a distribution over diseases.
    pub fn diagnose_sequence(
        &self,
        prior: &Array1<f64>,
        signs: &[String],
        policy: &InconclusivePolicy,
        mode: RetrievalMode,
    ) -> Result<Diagnosis> {
        if signs.is_empty() {
            return Err(Error::Validation(vec![crate::error::FieldError::new(
                "signs",
                "at least one sign is required",
            )]));
        }
        let codes: Vec<Array1<f64>> = signs.iter().map(|s| self.sign_code(s)).collect::<Result<_>>()?;
        let presentations: Vec<Array1<f64>> = match mode {
            RetrievalMode::Sequential => codes,
            RetrievalMode::Summed => vec![codes.into_iter().fold(Array1::zeros(self.signs.len()), |a, s| a + s)],
        };
        let mut weights = self.normalize(self.diseases.codes().t().dot(prior));
        let mut zero_mass = weights.is_none();
        if let Some(w0) = &weights {
            let mut c = self.to_context(w0);
            for s in &presentations {
                let o = self.retrieve(&c, s)?;
                match self.normalize(self.diseases.codes().t().dot(&o)) {
                    Some(w) => {
                        c = self.to_context(&w);
                        weights = Some(w);
                    }
                    None => {
                        zero_mass = true;
                        break;
                    }
                }
            }
        }
        let k = self.diseases.len();
        let w = weights.unwrap_or_else(|| vec![1.0 / k as f64; k]);
        let probabilities: BTreeMap<String, f64> = self.diseases.ids().iter().cloned().zip(w.iter().copied()).collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
        let (top, second) = (w[order[0]], order.get(1).map_or(0.0, |&i| w[i]));
        let conclusive = !zero_mass && top >= policy.min_top && top - second >= policy.min_gap;
        let (verdict, top) = if conclusive {
            let id = self.diseases.ids()[order[0]].clone();
            let v = if id == policy.positive { Verdict::Positive } else { Verdict::Negative };
            (v, Some(id))
        } else {
            (Verdict::Inconclusive, None)
        };
        Ok(Diagnosis { probabilities, verdict, top, zero_mass })
    }

    /// Convenience: starts from the learned prior.
    pub fn diagnose(&self, signs: &[String], policy: &InconclusivePolicy, mode: RetrievalMode) -> Result<Diagnosis> {
        self.diagnose_sequence(&self.prior(), signs, policy, mode)
    }

    /// Clamps negatives (and round-off below 1e-12) to zero and rescales to
    /// unit sum; `None` when nothing is left.
    fn normalize(&self, scores: Array1<f64>) -> Option<Vec<f64>> {
        let clamped: Vec<f64> = scores.iter().map(|&x| if x > 1e-12 { x } else { 0.0 }).collect();
        let total: f64 = clamped.iter().sum();
        (total > 0.0).then(|| clamped.iter().map(|x| x / total).collect())
    }

    /// Adds the signs not yet associated with `disease` and counts one case.
    pub fn learn_case<S: AsRef<str>>(&mut self, disease: &str, signs: &[S]) -> Result<()> {
        let i = self.diseases.index_of(disease).ok_or_else(|| Error::UnknownDisease(disease.to_string()))?;
        let mut new = BTreeSet::new();
        for s in signs {
            let j = self.signs.index_of(s.as_ref()).ok_or_else(|| Error::UnknownSign(s.as_ref().to_string()))?;
            if !self.associations[i].contains(&j) {
                new.insert(j);
            }
        }
        if !new.is_empty() {
            let s_sum = new.iter().fold(Array1::zeros(self.signs.len()), |acc, &j| acc + self.signs.code(j));
            self.psi += &term(&self.diseases.code(i), &s_sum);
            self.associations[i].extend(new);
        }
        self.case_counts[i] += 1;
        self.version += 1;
        Ok(())
    }

    pub fn to_document(&self) -> MemoryDocument {
        MemoryDocument {
            version: self.version,
            diseases: self.diseases.ids().to_vec(),
            signs: self.signs.ids().to_vec(),
            associations: self.associations().into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect(),
            case_counts: self.case_counts(),
        }
    }

    /// Rebuilds a memory with canonical codebooks. Diseases may have empty
    /// association lists here, unlike in [`build_memory`].
    pub fn from_document(doc: &MemoryDocument) -> Result<Self> {
        let dcb = Codebook::canonical(&doc.diseases)?;
        let scb = Codebook::canonical(&doc.signs)?;
        let assoc: BTreeMap<String, BTreeSet<String>> =
            doc.associations.iter().map(|(k, v)| (k.clone(), v.iter().cloned().collect())).collect();
        let sets = resolve(&dcb, &scb, &assoc)?;
        let mut counts = vec![0; dcb.len()];
        for (id, &n) in &doc.case_counts {
            let i =
                dcb.index_of(id).ok_or_else(|| Error::Association(format!("unknown disease `{id}` in case counts")))?;
            counts[i] = n;
        }
        Ok(Self::from_sets(dcb, scb, sets, counts, doc.version))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("memory document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_json())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
