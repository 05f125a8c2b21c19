//! Labeled reflective-input rows and their comma-separated file form.
//!
//! One row per line: the 181 slot values, then the class label. Value slots
//! whose presence flag is 0 are written `?`; lines starting with `|` are
//! comments.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::{IMAGING_FLAG, IMAGING_SLOTS, INPUT_LEN, MEDICAL_SLOTS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub samples: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

impl LabeledDataset {
    pub fn new(samples: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::Dimension { expected: samples.len(), actual: labels.len() });
        }
        if let Some(first) = samples.first() {
            if let Some(bad) = samples.iter().find(|s| s.len() != first.len()) {
                return Err(Error::Dimension { expected: first.len(), actual: bad.len() });
            }
        }
        Ok(Self { samples, labels })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// Distinct labels in sorted order.
    pub fn classes(&self) -> Vec<String> {
        let mut c = self.labels.clone();
        c.sort();
        c.dedup();
        c
    }

    /// `1` for rows labeled `positive`, else `0`.
    pub fn binary_targets(&self, positive: &str) -> Vec<usize> {
        self.labels.iter().map(|l| usize::from(l == positive)).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }

    pub fn push(&mut self, sample: Vec<f64>, label: impl Into<String>) {
        self.samples.push(sample);
        self.labels.push(label.into());
    }
}

const HEADER: &str = "| reflective input rows: 181 slot values, then the class label; '?' marks an absent value";

/// Slots written as `?` when the governing flag is 0.
fn absent_slots(row: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    for pair in MEDICAL_SLOTS.step_by(2) {
        if row[pair] == 0.0 {
            out.push(pair + 1);
        }
    }
    if row[IMAGING_FLAG] == 0.0 {
        out.extend(IMAGING_SLOTS);
    }
    out
}

fn check_label(label: &str) -> Result<()> {
    if label.is_empty() || label.contains([',', '\n', '\r']) || label.trim() != label || label.starts_with('|') {
        return Err(Error::Config(format!("label `{label}` cannot be written to a dataset file")));
    }
    Ok(())
}

pub fn format_dataset(ds: &LabeledDataset) -> Result<String> {
    let mut out = String::from(HEADER);
    out.push('\n');
    for (row, label) in ds.samples.iter().zip(&ds.labels) {
        if row.len() != INPUT_LEN {
            return Err(Error::Dimension { expected: INPUT_LEN, actual: row.len() });
        }
        check_label(label)?;
        let absent = absent_slots(row);
        for (i, v) in row.iter().enumerate() {
            if absent.contains(&i) {
                if *v != 0.0 {
                    return Err(Error::Layout(format!("slot {i} is flagged absent but holds {v}")));
                }
                out.push('?');
            } else {
                if !v.is_finite() {
                    return Err(Error::Layout(format!("slot {i} is not finite")));
                }
                write!(out, "{v}").unwrap();
            }
            out.push(',');
        }
        out.push_str(label);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_dataset(text: &str) -> Result<LabeledDataset> {
    let mut ds = LabeledDataset::default();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let err = |message: String| Error::Parse { line: line_no, message };
        if line.trim().is_empty() || line.starts_with('|') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != INPUT_LEN + 1 {
            return Err(err(format!("expected {} fields, found {}", INPUT_LEN + 1, fields.len())));
        }
        let mut row = Vec::with_capacity(INPUT_LEN);
        for (i, f) in fields[..INPUT_LEN].iter().enumerate() {
            let v = if *f == "?" {
                0.0
            } else {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("slot {i}: `{f}` is not a number")))?
            };
            row.push(v);
        }
        let label = fields[INPUT_LEN];
        check_label(label).map_err(|_| err(format!("invalid label `{label}`")))?;
        ds.push(row, label);
    }
    Ok(ds)
}

pub fn write_dataset(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, format_dataset(ds)?)?)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    parse_dataset(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(fill: f64) -> Vec<f64> {
        let mut r = vec![0.0; INPUT_LEN];
        r[0] = fill;
        r
    }

    #[test]
    fn empty_round_trip() {
        let text = format_dataset(&LabeledDataset::default()).unwrap();
        assert_eq!(parse_dataset(&text).unwrap(), LabeledDataset::default());
    }

    #[test]
    fn missing_report_is_marked() {
        let ds = LabeledDataset::new(vec![row(1.0)], vec!["asthma".into()]).unwrap();
        let text = format_dataset(&ds).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert_eq!(line.matches('?').count(), 9 + 8);
        assert_eq!(parse_dataset(&text).unwrap(), ds);
    }

    #[test]
    fn present_values_round_trip_exactly() {
        let mut r = row(1.0);
        r[MEDICAL_SLOTS.start] = 1.0;
        r[MEDICAL_SLOTS.start + 1] = 0.1 + 0.2;
        r[IMAGING_FLAG] = 1.0;
        r[IMAGING_SLOTS.start] = 1.0 / 3.0;
        let ds = LabeledDataset::new(vec![r], vec!["copd".into()]).unwrap();
        let text = format_dataset(&ds).unwrap();
        let back = parse_dataset(&text).unwrap();
        assert_eq!(back, ds);
        assert_eq!(format_dataset(&back).unwrap(), text);
    }

    #[test]
    fn absent_slot_with_value_is_rejected() {
        let mut r = row(0.0);
        r[MEDICAL_SLOTS.start + 1] = 0.5;
        let ds = LabeledDataset::new(vec![r], vec!["asthma".into()]).unwrap();
        assert!(matches!(format_dataset(&ds), Err(Error::Layout(_))));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let good = format_dataset(&LabeledDataset::new(vec![row(1.0)], vec!["asthma".into()]).unwrap()).unwrap();
        let bad = format!("{good}1,2,3\n");
        assert!(matches!(parse_dataset(&bad), Err(Error::Parse { line: 3, .. })));
        let bad = good.replacen(",0,", ",zero,", 1);
        assert!(matches!(parse_dataset(&bad), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let good = format_dataset(&LabeledDataset::new(vec![row(1.0)], vec!["asthma".into()]).unwrap()).unwrap();
        let text = format!("| note\n\n{good}");
        assert_eq!(parse_dataset(&text).unwrap().len(), 1);
    }
}
