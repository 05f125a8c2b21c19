//! Weighted yes/no questionnaires.
//!
//! A definition is an ordered list of groups; every question in group `p`
//! carries the group's integer priority factor `a_p`. Answers expand into a
//! binary response matrix in which each answer occupies `a_p` consecutive
//! cells, so the matrix sum equals the weighted score.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::metrics::Verdict;

const CORE_JSON: &str = include_str!("../data/core_questionnaire.json");
const PROFESSIONAL_JSON: &str = include_str!("../data/professional_questionnaire.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionGroup {
    pub priority_factor: u32,
    pub questions: Vec<Question>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawDefinition {
    name: String,
    version: u32,
    groups: Vec<QuestionGroup>,
    #[serde(default)]
    subscores: BTreeMap<String, Vec<String>>,
}

/// Where one question's answer lives in the response matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Slot {
    group: usize,
    /// 0-based start of the block (the `h` of the index formula).
    offset: usize,
    weight: u32,
}

/// A validated questionnaire definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawDefinition", into = "RawDefinition")]
pub struct QuestionnaireDefinition {
    name: String,
    version: u32,
    groups: Vec<QuestionGroup>,
    subscores: BTreeMap<String, Vec<String>>,
    slots: HashMap<String, Slot>,
    capacity: usize,
}

impl TryFrom<RawDefinition> for QuestionnaireDefinition {
    type Error = Error;

    fn try_from(raw: RawDefinition) -> Result<Self> {
        let mut slots = HashMap::new();
        let mut offset = 0usize;
        for (g, group) in raw.groups.iter().enumerate() {
            if group.priority_factor == 0 {
                return Err(Error::Config(format!("group {} has a zero priority factor", g + 1)));
            }
            if group.questions.is_empty() {
                return Err(Error::Config(format!("group {} has no questions", g + 1)));
            }
            for q in &group.questions {
                if let Some(parent) = &q.parent {
                    if !slots.contains_key(parent) {
                        return Err(Error::Config(format!(
                            "question `{}` refers to parent `{}` which is not an earlier question",
                            q.id, parent
                        )));
                    }
                }
                let slot = Slot { group: g, offset, weight: group.priority_factor };
                if slots.insert(q.id.clone(), slot).is_some() {
                    return Err(Error::Config(format!("duplicate question id `{}`", q.id)));
                }
                offset += group.priority_factor as usize;
            }
        }
        if offset == 0 {
            return Err(Error::Config("definition has zero capacity".into()));
        }
        for (name, ids) in &raw.subscores {
            for id in ids {
                if !slots.contains_key(id) {
                    return Err(Error::Config(format!("subscore `{name}` names unknown question `{id}`")));
                }
            }
        }
        Ok(Self {
            name: raw.name,
            version: raw.version,
            groups: raw.groups,
            subscores: raw.subscores,
            slots,
            capacity: offset,
        })
    }
}

impl From<QuestionnaireDefinition> for RawDefinition {
    fn from(def: QuestionnaireDefinition) -> Self {
        RawDefinition { name: def.name, version: def.version, groups: def.groups, subscores: def.subscores }
    }
}

impl QuestionnaireDefinition {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The shipped 24-question symptom questionnaire.
    pub fn core() -> Self {
        Self::from_json(CORE_JSON).expect("shipped core questionnaire is valid")
    }

    /// The shipped 11-item professional questionnaire.
    pub fn professional() -> Self {
        Self::from_json(PROFESSIONAL_JSON).expect("shipped professional questionnaire is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn groups(&self) -> &[QuestionGroup] {
        &self.groups
    }

    /// Total capacity `x = Σ a_i·m_i`, the length of the response matrix.
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn question_count(&self) -> usize {
        self.slots.len()
    }

    pub fn questions(&self) -> impl Iterator<Item = &Question> {
        self.groups.iter().flat_map(|g| g.questions.iter())
    }

    pub fn question(&self, id: &str) -> Option<&Question> {
        self.questions().find(|q| q.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.slots.contains_key(id)
    }

    pub fn weight(&self, id: &str) -> Option<u32> {
        self.slots.get(id).map(|s| s.weight)
    }

    /// 0-based group index of a question.
    pub fn group_of(&self, id: &str) -> Option<usize> {
        self.slots.get(id).map(|s| s.group)
    }

    /// 0-based cell range occupied by a question's answer.
    pub fn block(&self, id: &str) -> Option<Range<usize>> {
        self.slots.get(id).map(|s| s.offset..s.offset + s.weight as usize)
    }

    /// Block start `h` for question `q` of group `p` (both 1-based), computed
    /// directly from the index formula `h = Σ_{i<p} a_i·m_i + a_p·(q−1)`.
    /// The answer occupies cells `h+1 ..= h+a_p` (1-based).
    pub fn block_start(&self, p: usize, q: usize) -> Option<usize> {
        if p == 0 || q == 0 || p > self.groups.len() || q > self.groups[p - 1].questions.len() {
            return None;
        }
        let before: usize = self.groups[..p - 1].iter().map(|g| g.priority_factor as usize * g.questions.len()).sum();
        Some(before + self.groups[p - 1].priority_factor as usize * (q - 1))
    }

    /// Named subscore question lists as shipped in the definition file.
    pub fn subscores(&self) -> &BTreeMap<String, Vec<String>> {
        &self.subscores
    }

    /// Subscore index sets as 1-based matrix positions.
    pub fn subscore_index_sets(&self) -> BTreeMap<String, Vec<usize>> {
        self.subscores
            .iter()
            .map(|(name, ids)| {
                let idx = ids.iter().flat_map(|id| self.block(id).expect("validated id")).map(|i| i + 1).collect();
                (name.clone(), idx)
            })
            .collect()
    }

    /// Largest value a named subscore can reach.
    pub fn subscore_max(&self, name: &str) -> u32 {
        self.subscores.get(name).map(|ids| ids.iter().filter_map(|id| self.weight(id)).sum()).unwrap_or(0)
    }
}

/// Validated binary answers for one definition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResponseSet {
    definition: String,
    answers: BTreeMap<String, u8>,
}

impl ResponseSet {
    /// Validates `answers` against `def`. Every question must be present with
    /// value 0 or 1; unknown ids are rejected. A child whose parent is answered
    /// 0 is forced to 0.
    pub fn new(def: &QuestionnaireDefinition, answers: &BTreeMap<String, i64>) -> Result<Self> {
        let mut errors = Vec::new();
        for id in answers.keys() {
            if !def.contains(id) {
                errors.push(FieldError::new(id, "unknown question id"));
            }
        }
        let mut out = BTreeMap::new();
        for q in def.questions() {
            match answers.get(&q.id) {
                None => errors.push(FieldError::new(&q.id, "missing answer")),
                Some(&v) if v == 0 || v == 1 => {
                    out.insert(q.id.clone(), v as u8);
                }
                Some(&v) => errors.push(FieldError::new(&q.id, format!("answer must be 0 or 1, got {v}"))),
            }
        }
        if !errors.is_empty() {
            return Err(Error::Validation(errors));
        }
        // Parents always precede children, so one ordered pass suffices.
        for q in def.questions() {
            if let Some(parent) = &q.parent {
                if out[parent] == 0 {
                    out.insert(q.id.clone(), 0);
                }
            }
        }
        Ok(Self { definition: def.name().to_string(), answers: out })
    }

    /// Parses a JSON object of `id → 0|1`.
    pub fn from_json_map(
        def: &QuestionnaireDefinition,
        map: &serde_json::Map<String, serde_json::Value>,
    ) -> Result<Self> {
        let mut errors = Vec::new();
        let mut answers = BTreeMap::new();
        for (id, value) in map {
            match value.as_i64() {
                Some(v) => {
                    answers.insert(id.clone(), v);
                }
                None => errors.push(FieldError::new(id, format!("answer must be 0 or 1, got {value}"))),
            }
        }
        match Self::new(def, &answers) {
            Ok(r) if errors.is_empty() => Ok(r),
            Ok(_) => Err(Error::Validation(errors)),
            Err(Error::Validation(more)) => {
                errors.extend(more);
                Err(Error::Validation(errors))
            }
            Err(e) => Err(e),
        }
    }

    /// All answers set to the same value (subject to parent gating).
    pub fn uniform(def: &QuestionnaireDefinition, value: u8) -> Self {
        let answers = def.questions().map(|q| (q.id.clone(), i64::from(value))).collect();
        Self::new(def, &answers).expect("uniform answers are valid")
    }

    pub fn definition(&self) -> &str {
        &self.definition
    }

    pub fn answers(&self) -> &BTreeMap<String, u8> {
        &self.answers
    }

    pub fn get(&self, id: &str) -> Option<u8> {
        self.answers.get(id).copied()
    }

    /// Ids answered yes, in definition order.
    pub fn yes_ids<'a>(&'a self, def: &'a QuestionnaireDefinition) -> impl Iterator<Item = &'a str> {
        def.questions().map(|q| q.id.as_str()).filter(move |id| self.get(id) == Some(1))
    }

    fn check_against(&self, def: &QuestionnaireDefinition) -> Result<()> {
        let expected: BTreeSet<&str> = def.questions().map(|q| q.id.as_str()).collect();
        let actual: BTreeSet<&str> = self.answers.keys().map(String::as_str).collect();
        let mut errors: Vec<FieldError> =
            expected.difference(&actual).map(|id| FieldError::new(*id, "missing answer")).collect();
        errors.extend(actual.difference(&expected).map(|id| FieldError::new(*id, "unknown question id")));
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors))
        }
    }
}

/// Flat binary response matrix (M for the core definition, N for the
/// professional one).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseMatrix {
    pub definition: String,
    pub bits: Vec<u8>,
}

impl ResponseMatrix {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn sum(&self) -> u32 {
        self.bits.iter().map(|&b| u32::from(b)).sum()
    }
}

/// Weighted score `A = Σ_i a_i · Σ_j e_ij`.
pub fn compute_score(def: &QuestionnaireDefinition, r: &ResponseSet) -> Result<u32> {
    r.check_against(def)?;
    Ok(def.questions().map(|q| def.weight(&q.id).unwrap() * u32::from(r.answers[&q.id])).sum())
}

pub fn expand_response_matrix(def: &QuestionnaireDefinition, r: &ResponseSet) -> Result<ResponseMatrix> {
    r.check_against(def)?;
    let mut bits = vec![0u8; def.capacity()];
    for q in def.questions() {
        let value = r.answers[&q.id];
        for cell in &mut bits[def.block(&q.id).unwrap()] {
            *cell = value;
        }
    }
    Ok(ResponseMatrix { definition: def.name().to_string(), bits })
}

/// No-learning baseline: positive iff `score ≥ phi`.
pub fn threshold_classify(score: u32, phi: u32, capacity: usize) -> Result<Verdict> {
    if phi as usize > capacity {
        return Err(Error::Config(format!("threshold {phi} outside [0, {capacity}]")));
    }
    Ok(if score >= phi { Verdict::Positive } else { Verdict::Negative })
}

/// Sums matrix cells at named 1-based positions.
pub fn compute_subscores(
    def: &QuestionnaireDefinition,
    m: &ResponseMatrix,
    index_sets: &BTreeMap<String, Vec<usize>>,
) -> Result<BTreeMap<String, u32>> {
    if m.len() != def.capacity() {
        return Err(Error::Dimension { expected: def.capacity(), actual: m.len() });
    }
    let mut out = BTreeMap::new();
    for (name, indices) in index_sets {
        let mut total = 0u32;
        for &i in indices {
            if i == 0 || i > m.len() {
                return Err(Error::Config(format!("subscore `{name}` index {i} outside 1..={}", m.len())));
            }
            total += u32::from(m.bits[i - 1]);
        }
        out.insert(name.clone(), total);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn answers_with(def: &QuestionnaireDefinition, yes: &[&str]) -> ResponseSet {
        let map = def.questions().map(|q| (q.id.clone(), i64::from(yes.contains(&q.id.as_str())))).collect();
        ResponseSet::new(def, &map).unwrap()
    }

    #[test]
    fn core_constants() {
        let def = QuestionnaireDefinition::core();
        let a: Vec<u32> = def.groups().iter().map(|g| g.priority_factor).collect();
        let m: Vec<usize> = def.groups().iter().map(|g| g.questions.len()).collect();
        assert_eq!(a, vec![6, 5, 4, 3, 2, 1]);
        assert_eq!(m, vec![6, 5, 6, 3, 2, 2]);
        assert_eq!(def.capacity(), 100);
        assert_eq!(def.question_count(), 24);
    }

    #[test]
    fn scores_at_extremes() {
        let core = QuestionnaireDefinition::core();
        let prof = QuestionnaireDefinition::professional();
        assert_eq!(compute_score(&core, &ResponseSet::uniform(&core, 1)).unwrap(), 100);
        assert_eq!(compute_score(&core, &ResponseSet::uniform(&core, 0)).unwrap(), 0);
        assert_eq!(compute_score(&core, &answers_with(&core, &["W"])).unwrap(), 1);
        // 8+4+4+3+3+3+2+5+5+5+8
        assert_eq!(compute_score(&prof, &ResponseSet::uniform(&prof, 1)).unwrap(), 50);
    }

    #[test]
    fn missing_and_extra_ids_are_named() {
        let def = QuestionnaireDefinition::core();
        let mut map: BTreeMap<String, i64> = def.questions().map(|q| (q.id.clone(), 0)).collect();
        map.remove("C");
        map.insert("ZZ".into(), 1);
        let err = ResponseSet::new(&def, &map).unwrap_err();
        let fields: Vec<&str> = err.field_errors().unwrap().iter().map(|f| f.field.as_str()).collect();
        assert!(fields.contains(&"C"));
        assert!(fields.contains(&"ZZ"));
    }

    #[test]
    fn answer_value_two_is_rejected() {
        let def = QuestionnaireDefinition::core();
        let mut map: BTreeMap<String, i64> = def.questions().map(|q| (q.id.clone(), 0)).collect();
        map.insert("K".into(), 2);
        let err = ResponseSet::new(&def, &map).unwrap_err();
        assert_eq!(err.field_errors().unwrap()[0].field, "K");
    }

    #[test]
    fn score_rejects_responses_for_another_definition() {
        let core = QuestionnaireDefinition::core();
        let prof = QuestionnaireDefinition::professional();
        let r = ResponseSet::uniform(&prof, 1);
        assert!(matches!(compute_score(&core, &r), Err(Error::Validation(_))));
    }

    #[test]
    fn question_i_block() {
        let def = QuestionnaireDefinition::core();
        assert_eq!(def.block_start(2, 3), Some(46));
        let m = expand_response_matrix(&def, &answers_with(&def, &["I"])).unwrap();
        for (i, &b) in m.bits.iter().enumerate() {
            let pos = i + 1;
            assert_eq!(b, u8::from((47..=51).contains(&pos)), "position {pos}");
        }
    }

    #[test]
    fn all_yes_and_all_no_matrices() {
        let def = QuestionnaireDefinition::core();
        let yes = expand_response_matrix(&def, &ResponseSet::uniform(&def, 1)).unwrap();
        assert!(yes.bits.iter().all(|&b| b == 1));
        assert_eq!(yes.sum(), 100);
        let no = expand_response_matrix(&def, &ResponseSet::uniform(&def, 0)).unwrap();
        assert_eq!(no.sum(), 0);
    }

    #[test]
    fn parent_no_forces_children() {
        let def = QuestionnaireDefinition::professional();
        let r = answers_with(&def, &["P1a", "P1e", "P2"]);
        assert_eq!(r.get("P1a"), Some(0));
        assert_eq!(r.get("P1e"), Some(0));
        assert_eq!(r.get("P2"), Some(1));
        let r = answers_with(&def, &["P1", "P1a"]);
        assert_eq!(r.get("P1a"), Some(1));
    }

    #[test]
    fn threshold_baseline() {
        assert_eq!(threshold_classify(100, 40, 100).unwrap(), Verdict::Positive);
        assert_eq!(threshold_classify(0, 40, 100).unwrap(), Verdict::Negative);
        assert_eq!(threshold_classify(40, 40, 100).unwrap(), Verdict::Positive);
        assert!(threshold_classify(10, 101, 100).is_err());
    }

    #[test]
    fn subscores() {
        let def = QuestionnaireDefinition::core();
        let all: BTreeMap<String, Vec<usize>> = [("all".to_string(), (1..=100).collect())].into_iter().collect();
        let yes = expand_response_matrix(&def, &ResponseSet::uniform(&def, 1)).unwrap();
        assert_eq!(compute_subscores(&def, &yes, &all).unwrap()["all"], 100);

        let empty: BTreeMap<String, Vec<usize>> = [("none".to_string(), vec![])].into_iter().collect();
        assert_eq!(compute_subscores(&def, &yes, &empty).unwrap()["none"], 0);

        let only_v = expand_response_matrix(&def, &answers_with(&def, &["V"])).unwrap();
        let sets = def.subscore_index_sets();
        assert_eq!(compute_subscores(&def, &only_v, &sets).unwrap()["pollutant_effect"], 2);

        let bad: BTreeMap<String, Vec<usize>> = [("bad".to_string(), vec![101])].into_iter().collect();
        assert!(matches!(compute_subscores(&def, &yes, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_bad_definitions() {
        let zero = r#"{"name":"z","version":1,"groups":[{"priority_factor":0,"questions":[{"id":"a","text":"?"}]}]}"#;
        assert!(QuestionnaireDefinition::from_json(zero).is_err());
        let dup = r#"{"name":"d","version":1,"groups":[{"priority_factor":1,"questions":[{"id":"a","text":"?"},{"id":"a","text":"?"}]}]}"#;
        assert!(QuestionnaireDefinition::from_json(dup).is_err());
        let late_parent = r#"{"name":"p","version":1,"groups":[{"priority_factor":1,"questions":[{"id":"b","text":"?","parent":"a"},{"id":"a","text":"?"}]}]}"#;
        assert!(QuestionnaireDefinition::from_json(late_parent).is_err());
    }

    #[test]
    fn definition_json_round_trip() {
        let def = QuestionnaireDefinition::core();
        let text = serde_json::to_string(&def).unwrap();
        let back = QuestionnaireDefinition::from_json(&text).unwrap();
        assert_eq!(back.capacity(), 100);
        assert_eq!(back.subscores(), def.subscores());
    }
}
