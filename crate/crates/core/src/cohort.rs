//! Seeded synthetic patients, stratified splitting and the dataset file trio.
//!
//! All generated data is synthetic. Class-conditional distributions live in
//! versioned JSON config files under `data/`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal as NormalDist};
use serde::{Deserialize, Serialize};

use crate::cdamm::MemoryDocument;
use crate::dataset::{read_dataset, write_dataset, LabeledDataset};
use crate::encoder::{Encoder, PatientInput, LAYOUT_VERSION};
use crate::error::{Error, Result};
use crate::imaging::ImagingFeatures;
use crate::medrecords::{MedicalReport, REPORT_FIELDS};
use crate::questionnaire::{QuestionnaireDefinition, ResponseSet};

const DEFAULT_JSON: &str = include_str!("../data/cohort_default.json");
const SEPARABLE_JSON: &str = include_str!("../data/cohort_separable.json");

pub const SET_FILE: &str = "Asthma.set";
pub const DATA_FILE: &str = "Asthma.data";
pub const TEST_FILE: &str = "Asthma.test";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Ratio used to derive fev1 from fvc when present in a report profile.
pub const FEV1_FVC_RATIO: &str = "fev1_fvc_ratio";
const IMAGING_KEYS: [&str; 6] = ["area", "solidity", "energy", "contrast", "homogeneity", "eccentricity"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normal {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseProfile {
    pub prevalence: f64,
    /// Symptomatic patients answer yes to at least `min_positive_answers`.
    #[serde(default)]
    pub symptomatic: bool,
    /// Per-question yes-probabilities; unlisted questions are never answered yes.
    #[serde(default)]
    pub yes: BTreeMap<String, f64>,
    /// Overrides of the baseline report distributions.
    #[serde(default)]
    pub report: BTreeMap<String, Normal>,
    /// Overrides of the baseline imaging distributions.
    #[serde(default)]
    pub imaging: BTreeMap<String, Normal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortConfig {
    pub version: u32,
    pub synthetic: bool,
    #[serde(default)]
    pub description: String,
    pub size: usize,
    pub seed: u64,
    pub professional_rate: f64,
    pub report_rate: f64,
    pub imaging_rate: f64,
    pub min_positive_answers: usize,
    pub report_baseline: BTreeMap<String, Normal>,
    pub imaging_baseline: BTreeMap<String, Normal>,
    pub diseases: BTreeMap<String, DiseaseProfile>,
}

impl CohortConfig {
    /// Multi-disease clinical mix, questionnaire answers only.
    pub fn default_preset() -> Self {
        serde_json::from_str(DEFAULT_JSON).expect("shipped cohort config parses")
    }

    /// The clinical mix with every report and every CT feature set present.
    pub fn full_input() -> Self {
        Self { size: 1100, report_rate: 1.0, imaging_rate: 1.0, ..Self::default_preset() }
    }

    /// Asthmatic versus healthy with clean class separation.
    pub fn separable() -> Self {
        serde_json::from_str(SEPARABLE_JSON).expect("shipped cohort config parses")
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Self::default_preset()),
            "full_input" => Ok(Self::full_input()),
            "separable" => Ok(Self::separable()),
            other => Err(Error::Config(format!(
                "unknown cohort preset `{other}` (expected default, full_input or separable)"
            ))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self, enc: &Encoder) -> Result<()> {
        let prob = |what: String, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} = {p} is not a probability")))
            }
        };
        let normal = |what: String, n: &Normal| {
            if n.mean.is_finite() && n.sd > 0.0 && n.sd.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} needs a finite mean and sd > 0")))
            }
        };
        prob("professional_rate".into(), self.professional_rate)?;
        prob("report_rate".into(), self.report_rate)?;
        prob("imaging_rate".into(), self.imaging_rate)?;
        if self.diseases.is_empty() {
            return Err(Error::Config("cohort needs at least one disease".into()));
        }
        let total: f64 = self.diseases.values().map(|d| d.prevalence).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("prevalences sum to {total}, expected 1")));
        }
        let report_key = |k: &str| REPORT_FIELDS.contains(&k) || k == FEV1_FVC_RATIO;
        for (k, n) in &self.report_baseline {
            if !report_key(k) {
                return Err(Error::Config(format!("unknown report field `{k}`")));
            }
            normal(format!("report_baseline.{k}"), n)?;
        }
        for f in REPORT_FIELDS {
            if !self.report_baseline.contains_key(f) {
                return Err(Error::Config(format!("report_baseline lacks `{f}`")));
            }
        }
        for k in IMAGING_KEYS {
            match self.imaging_baseline.get(k) {
                Some(n) => normal(format!("imaging_baseline.{k}"), n)?,
                None => return Err(Error::Config(format!("imaging_baseline lacks `{k}`"))),
            }
        }
        for (name, d) in &self.diseases {
            prob(format!("{name}.prevalence"), d.prevalence)?;
            for (q, &p) in &d.yes {
                if !enc.core.contains(q) && !enc.professional.contains(q) {
                    return Err(Error::Config(format!("{name}: unknown question `{q}`")));
                }
                prob(format!("{name}.yes.{q}"), p)?;
            }
            for (k, n) in &d.report {
                if !report_key(k) {
                    return Err(Error::Config(format!("{name}: unknown report field `{k}`")));
                }
                normal(format!("{name}.report.{k}"), n)?;
            }
            for (k, n) in &d.imaging {
                if !IMAGING_KEYS.contains(&k.as_str()) {
                    return Err(Error::Config(format!("{name}: unknown imaging feature `{k}`")));
                }
                normal(format!("{name}.imaging.{k}"), n)?;
            }
        }
        Ok(())
    }

    /// Expected weighted core score of a disease, with parent gating.
    pub fn expected_score(&self, disease: &str, def: &QuestionnaireDefinition) -> f64 {
        let Some(d) = self.diseases.get(disease) else { return 0.0 };
        def.questions()
            .map(|q| {
                let p = d.yes.get(&q.id).copied().unwrap_or(0.0);
                let gate = q.parent.as_ref().map_or(1.0, |par| d.yes.get(par).copied().unwrap_or(0.0));
                f64::from(def.weight(&q.id).unwrap()) * p * gate
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub id: usize,
    pub label: String,
    pub input: PatientInput,
}

fn sample(rng: &mut ChaCha8Rng, n: &Normal) -> f64 {
    NormalDist::new(n.mean, n.sd).expect("validated normal").sample(rng)
}

fn answers(rng: &mut ChaCha8Rng, def: &QuestionnaireDefinition, yes: &BTreeMap<String, f64>) -> ResponseSet {
    let map = def
        .questions()
        .map(|q| {
            let p = yes.get(&q.id).copied().unwrap_or(0.0);
            (q.id.clone(), i64::from(rng.random_bool(p)))
        })
        .collect();
    ResponseSet::new(def, &map).expect("generated answers are valid")
}

fn report(rng: &mut ChaCha8Rng, cfg: &CohortConfig, d: &DiseaseProfile) -> MedicalReport {
    let dist = |k: &str| d.report.get(k).or_else(|| cfg.report_baseline.get(k));
    let mut values = [None; 9];
    for (i, field) in REPORT_FIELDS.iter().enumerate() {
        let n = dist(field).expect("validated baseline");
        let mut v = sample(rng, n);
        if *field != "ios_reactance_kpa_s_l" {
            v = v.max(n.mean.abs() * 0.05).max(1e-3);
        }
        values[i] = Some(v);
    }
    if let Some(ratio) = dist(FEV1_FVC_RATIO) {
        let r = sample(rng, ratio).clamp(0.05, 1.0);
        values[1] = Some(values[0].unwrap() * r);
    }
    if values[1] > values[0] {
        values[1] = values[0];
    }
    MedicalReport::from_values(values)
}

fn imaging(rng: &mut ChaCha8Rng, cfg: &CohortConfig, d: &DiseaseProfile) -> ImagingFeatures {
    let mut draw = |k: &str| sample(rng, d.imaging.get(k).or_else(|| cfg.imaging_baseline.get(k)).expect("validated"));
    let area = draw("area").round().max(1.0);
    let solidity = draw("solidity").clamp(0.05, 1.0);
    let energy = draw("energy").clamp(1e-3, 1.0);
    let contrast = draw("contrast").max(0.0);
    let homogeneity = draw("homogeneity").clamp(1e-3, 1.0);
    let eccentricity = draw("eccentricity").clamp(0.0, 1.0);
    ImagingFeatures {
        area,
        convex_area: area / solidity,
        equivalent_diameter: crate::imaging::equivalent_diameter(area),
        solidity,
        energy,
        contrast,
        homogeneity,
        eccentricity,
    }
}

pub fn generate(cfg: &CohortConfig, enc: &Encoder) -> Result<Vec<PatientRecord>> {
    cfg.validate(enc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let diseases: Vec<(&String, &DiseaseProfile)> = cfg.diseases.iter().collect();
    let mut out = Vec::with_capacity(cfg.size);
    for id in 0..cfg.size {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = diseases.len() - 1;
        for (i, (_, d)) in diseases.iter().enumerate() {
            acc += d.prevalence;
            if u < acc {
                pick = i;
                break;
            }
        }
        let (label, d) = diseases[pick];
        let with_prof = rng.random_bool(cfg.professional_rate);
        let mut tries = 0;
        let (core, professional) = loop {
            let core = answers(&mut rng, &enc.core, &d.yes);
            let prof = with_prof.then(|| answers(&mut rng, &enc.professional, &d.yes));
            let yes =
                core.yes_ids(&enc.core).count() + prof.as_ref().map_or(0, |p| p.yes_ids(&enc.professional).count());
            if !d.symptomatic || yes >= cfg.min_positive_answers {
                break (core, prof);
            }
            tries += 1;
            if tries >= 1000 {
                return Err(Error::Config(format!(
                    "profile `{label}` rarely yields {} yes answers",
                    cfg.min_positive_answers
                )));
            }
        };
        let report = rng.random_bool(cfg.report_rate).then(|| report(&mut rng, cfg, d));
        let imaging = rng.random_bool(cfg.imaging_rate).then(|| imaging(&mut rng, cfg, d));
        out.push(PatientRecord {
            id,
            label: label.clone(),
            input: PatientInput { core, professional, report, imaging },
        });
    }
    Ok(out)
}

/// Label-stratified index split. Each class contributes `n_c · fraction`
/// rounded by largest remainder so the train total is `round(n · fraction)`.
pub fn split_indices(labels: &[String], train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let target = (labels.len() as f64 * train_fraction).round() as usize;
    let mut quotas: Vec<(usize, f64)> = by_class
        .values()
        .map(|idx| {
            let exact = idx.len() as f64 * train_fraction;
            (exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let assigned: usize = quotas.iter().map(|q| q.0).sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].1.total_cmp(&quotas[a].1).then(a.cmp(&b)));
    for &c in order.iter().take(target.saturating_sub(assigned)) {
        quotas[c].0 += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (idx, (quota, _)) in by_class.values().zip(&quotas) {
        let mut shuffled = idx.clone();
        shuffled.shuffle(&mut rng);
        train.extend_from_slice(&shuffled[..*quota]);
        test.extend_from_slice(&shuffled[*quota..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(
    records: &[PatientRecord],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<PatientRecord>, Vec<PatientRecord>)> {
    let labels: Vec<String> = records.iter().map(|r| r.label.clone()).collect();
    let (tr, te) = split_indices(&labels, train_fraction, seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect();
    Ok((pick(&tr), pick(&te)))
}

pub fn encode_records(records: &[PatientRecord], enc: &Encoder) -> Result<LabeledDataset> {
    let mut ds = LabeledDataset::default();
    for r in records {
        ds.push(enc.encode(&r.input)?.values, r.label.clone());
    }
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub synthetic: bool,
    pub layout_version: u32,
    pub input_len: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub files: BTreeMap<String, String>,
    pub train_count: usize,
    pub test_count: usize,
    pub class_counts: BTreeMap<String, usize>,
}

/// Writes `Asthma.set`, `Asthma.data`, `Asthma.test` and the manifest.
pub fn write_trio(
    dir: impl AsRef<Path>,
    set: &MemoryDocument,
    train: &LabeledDataset,
    test: &LabeledDataset,
    seed: u64,
    train_fraction: f64,
) -> Result<Manifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(SET_FILE), serde_json::to_string_pretty(set)?)?;
    write_dataset(train, dir.join(DATA_FILE))?;
    write_dataset(test, dir.join(TEST_FILE))?;
    let mut class_counts = BTreeMap::new();
    for l in train.labels.iter().chain(&test.labels) {
        *class_counts.entry(l.clone()).or_insert(0) += 1;
    }
    let manifest = Manifest {
        synthetic: true,
        layout_version: LAYOUT_VERSION,
        input_len: crate::encoder::INPUT_LEN,
        seed,
        train_fraction,
        files: [("set", SET_FILE), ("data", DATA_FILE), ("test", TEST_FILE)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
        train_count: train.len(),
        test_count: test.len(),
        class_counts,
    };
    std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_trio(dir: impl AsRef<Path>) -> Result<(MemoryDocument, LabeledDataset, LabeledDataset)> {
    let dir = dir.as_ref();
    let set: MemoryDocument = serde_json::from_str(&std::fs::read_to_string(dir.join(SET_FILE))?)?;
    Ok((set, read_dataset(dir.join(DATA_FILE))?, read_dataset(dir.join(TEST_FILE))?))
}
