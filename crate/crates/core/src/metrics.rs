//! Confusion tallies and the binary screening statistics.
//!
//! Inconclusive verdicts are tallied on their own and never enter the
//! TP/TN/FP/FN cells, so the accuracy denominator excludes them. Any ratio
//! whose denominator is zero is reported as undefined, never as zero.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Positive,
    Negative,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Positive => "positive",
            Verdict::Negative => "negative",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionTally {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub inconclusive: u64,
}

impl ConfusionTally {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64, inconclusive: u64) -> Self {
        Self { tp, tn, fp, fn_, inconclusive }
    }

    /// Cases with a conclusive verdict.
    pub fn decided(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn total(&self) -> u64 {
        self.decided() + self.inconclusive
    }

    pub fn record(&mut self, verdict: Verdict, truth: bool) {
        match (verdict, truth) {
            (Verdict::Inconclusive, _) => self.inconclusive += 1,
            (Verdict::Positive, true) => self.tp += 1,
            (Verdict::Positive, false) => self.fp += 1,
            (Verdict::Negative, false) => self.tn += 1,
            (Verdict::Negative, true) => self.fn_ += 1,
        }
    }

    /// The same tally with the positive and negative classes exchanged.
    pub fn swapped(&self) -> Self {
        Self { tp: self.tn, tn: self.tp, fp: self.fn_, fn_: self.fp, inconclusive: self.inconclusive }
    }
}

pub fn tally(predictions: &[Verdict], truths: &[bool]) -> Result<ConfusionTally> {
    if predictions.len() != truths.len() {
        return Err(Error::Dimension { expected: predictions.len(), actual: truths.len() });
    }
    let mut t = ConfusionTally::default();
    for (&v, &truth) in predictions.iter().zip(truths) {
        t.record(v, truth);
    }
    Ok(t)
}

/// A ratio that may be undefined (0/0). Serializes as a number or as the
/// string `"undefined"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric(pub Option<f64>);

impl Metric {
    fn ratio(num: f64, den: f64) -> Self {
        if den == 0.0 {
            Metric(None)
        } else {
            Metric(Some(num / den))
        }
    }

    pub fn value(&self) -> Option<f64> {
        self.0
    }

    pub fn is_defined(&self) -> bool {
        self.0.is_some()
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v:.4}"),
            None => f.write_str("undefined"),
        }
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(v) => s.serialize_f64(v),
            None => s.serialize_str("undefined"),
        }
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Metric(Some(v))),
            Repr::Text(t) if t == "undefined" => Ok(Metric(None)),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"undefined\", got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tally: ConfusionTally,
    pub sensitivity: Metric,
    pub specificity: Metric,
    pub ppr: Metric,
    pub npr: Metric,
    pub mcc: Metric,
    pub accuracy: Metric,
    pub f1: Metric,
    pub inconclusive_rate: Metric,
}

pub fn summarize(t: &ConfusionTally) -> MetricsReport {
    let (tp, tn, fp, fn_) = (t.tp as f64, t.tn as f64, t.fp as f64, t.fn_ as f64);
    let mcc_den = ((tp + fp) * (tn + fn_) * (tn + fp) * (tp + fn_)).sqrt();
    MetricsReport {
        tally: *t,
        sensitivity: Metric::ratio(tp, tp + fn_),
        specificity: Metric::ratio(tn, tn + fp),
        ppr: Metric::ratio(tp, tp + fp),
        npr: Metric::ratio(tn, tn + fn_),
        mcc: Metric::ratio(tp * tn - fp * fn_, mcc_den),
        accuracy: Metric::ratio(tp + tn, tp + tn + fp + fn_),
        f1: Metric::ratio(2.0 * tp, 2.0 * tp + fp + fn_),
        inconclusive_rate: Metric::ratio(t.inconclusive as f64, t.total() as f64),
    }
}

impl MetricsReport {
    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let t = &self.tally;
        let pct = |m: Metric| match m.0 {
            Some(v) => format!("{:.2}%", v * 100.0),
            None => "undefined".to_string(),
        };
        let mut out = String::new();
        out.push_str(&format!("{:<28}{:>12}{:>12}\n", "Overall outcome", "Positive", "Negative"));
        out.push_str(&format!(
            "{:<28}{:>12}{:>12}\n",
            "Diagnosed correctly",
            format!("TP = {}", t.tp),
            format!("TN = {}", t.tn)
        ));
        out.push_str(&format!(
            "{:<28}{:>12}{:>12}\n",
            "Diagnosed incorrectly",
            format!("FP = {}", t.fp),
            format!("FN = {}", t.fn_)
        ));
        out.push_str(&format!("{:<28}{:>24}\n", "Inconclusive", t.inconclusive));
        let rows = [
            ("Sensitivity", pct(self.sensitivity)),
            ("Specificity", pct(self.specificity)),
            ("Positive prediction rate", pct(self.ppr)),
            ("Negative prediction rate", pct(self.npr)),
            ("Matthews correlation", self.mcc.to_string()),
            ("Accuracy", pct(self.accuracy)),
            ("F1 score", self.f1.to_string()),
            ("Inconclusive rate", pct(self.inconclusive_rate)),
        ];
        for (name, value) in rows {
            out.push_str(&format!("{name:<28}{value:>24}\n"));
        }
        out
    }
}
