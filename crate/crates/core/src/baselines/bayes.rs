use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotKind {
    /// Present when the value exceeds 0.5.
    Binary,
    Continuous,
}

/// Variance floor for continuous slots.
const MIN_VAR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    pub kinds: Vec<SlotKind>,
    pub priors: Vec<f64>,
    /// `P(x = 1 | class)` for binary slots, Laplace smoothed.
    pub p_one: Vec<Vec<f64>>,
    pub mean: Vec<Vec<f64>>,
    pub var: Vec<Vec<f64>>,
    /// Set when some class has no training sample.
    pub warning: Option<String>,
}

pub fn bayes_fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, kinds: &[SlotKind]) -> Result<NaiveBayes> {
    if x.is_empty() {
        return Err(Error::Training("cannot fit naive Bayes on an empty dataset".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Dimension { expected: x.len(), actual: y.len() });
    }
    let d = kinds.len();
    if let Some(bad) = x.iter().find(|r| r.len() != d) {
        return Err(Error::Dimension { expected: d, actual: bad.len() });
    }
    if y.iter().any(|&c| c >= n_classes) {
        return Err(Error::Training("class index out of range".into()));
    }
    let mut counts = vec![0usize; n_classes];
    for &c in y {
        counts[c] += 1;
    }
    let n = x.len() as f64;
    let priors = counts.iter().map(|&c| c as f64 / n).collect();
    let mut p_one = vec![vec![0.0; d]; n_classes];
    let mut mean = vec![vec![0.0; d]; n_classes];
    let mut var = vec![vec![1.0; d]; n_classes];
    for c in 0..n_classes {
        let rows: Vec<&Vec<f64>> = x.iter().zip(y).filter(|(_, &yc)| yc == c).map(|(r, _)| r).collect();
        let nc = rows.len() as f64;
        for j in 0..d {
            match kinds[j] {
                SlotKind::Binary => {
                    let ones = rows.iter().filter(|r| r[j] > 0.5).count() as f64;
                    p_one[c][j] = (ones + 1.0) / (nc + 2.0);
                }
                SlotKind::Continuous if nc > 0.0 => {
                    let m = rows.iter().map(|r| r[j]).sum::<f64>() / nc;
                    let v = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / nc;
                    mean[c][j] = m;
                    var[c][j] = v.max(MIN_VAR);
                }
                SlotKind::Continuous => {}
            }
        }
    }
    let missing: Vec<usize> = (0..n_classes).filter(|&c| counts[c] == 0).collect();
    let warning = (!missing.is_empty()).then(|| format!("degenerate prior: classes {missing:?} have no samples"));
    Ok(NaiveBayes { kinds: kinds.to_vec(), priors, p_one, mean, var, warning })
}

impl NaiveBayes {
    pub fn posterior(&self, x: &[f64]) -> Vec<f64> {
        let logs: Vec<f64> = (0..self.priors.len())
            .map(|c| {
                if self.priors[c] == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let mut lp = self.priors[c].ln();
                for (j, kind) in self.kinds.iter().enumerate() {
                    lp += match kind {
                        SlotKind::Binary => {
                            let p = self.p_one[c][j];
                            if x[j] > 0.5 {
                                p.ln()
                            } else {
                                (1.0 - p).ln()
                            }
                        }
                        SlotKind::Continuous => {
                            let v = self.var[c][j];
                            -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x[j] - self.mean[c][j]).powi(2) / v)
                        }
                    };
                }
                lp
            })
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let s: f64 = exps.iter().sum();
        exps.iter().map(|e| e / s).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_priors() {
        let x = vec![vec![0.0], vec![1.0], vec![1.0], vec![0.0]];
        let m = bayes_fit(&x, &[0, 0, 1, 1], 2, &[SlotKind::Binary]).unwrap();
        assert_eq!(m.priors, vec![0.5, 0.5]);
    }

    #[test]
    fn laplace_smoothing() {
        let x = vec![vec![1.0], vec![1.0], vec![1.0], vec![0.0]];
        let m = bayes_fit(&x, &[0, 0, 0, 1], 2, &[SlotKind::Binary]).unwrap();
        assert!((m.p_one[0][0] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn gaussian_means() {
        let x = vec![vec![0.0], vec![0.0], vec![1.0], vec![1.0]];
        let m = bayes_fit(&x, &[0, 0, 1, 1], 2, &[SlotKind::Continuous]).unwrap();
        assert_eq!(m.mean[0][0], 0.0);
        assert_eq!(m.mean[1][0], 1.0);
        let p = m.posterior(&[0.1]);
        assert!(p[0] > 0.99 && (p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_class_warns() {
        let m = bayes_fit(&[vec![1.0]], &[0], 2, &[SlotKind::Binary]).unwrap();
        assert!(m.warning.is_some());
        assert_eq!(m.posterior(&[1.0]), vec![1.0, 0.0]);
    }
}
