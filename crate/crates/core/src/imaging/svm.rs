use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ImagingFeatures;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { lambda: 0.01, epochs: 200, seed: 7 }
    }
}

/// Linear classifier over standardized inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub training_accuracy: f64,
}

impl LinearSvm {
    /// Pegasos hinge-loss subgradient descent; the bias is not regularized.
    pub fn fit(xs: &[Vec<f64>], ys: &[i8], params: &SvmParams) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Dimension { expected: xs.len(), actual: ys.len() });
        }
        if ys.iter().any(|&y| y != 1 && y != -1) {
            return Err(Error::Training("svm labels must be +1 or -1".into()));
        }
        if !(ys.contains(&1) && ys.contains(&-1)) {
            return Err(Error::Training("svm needs samples of both labels".into()));
        }
        if !(params.lambda > 0.0) {
            return Err(Error::Config("svm lambda must be positive".into()));
        }
        let d = xs[0].len();
        if let Some(bad) = xs.iter().find(|x| x.len() != d) {
            return Err(Error::Dimension { expected: d, actual: bad.len() });
        }
        let n = xs.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n).collect();
        let scale: Vec<f64> = (0..d)
            .map(|j| {
                let var = xs.iter().map(|x| (x[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let zs: Vec<Vec<f64>> = xs.iter().map(|x| (0..d).map(|j| (x[j] - mean[j]) / scale[j]).collect()).collect();

        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut order: Vec<usize> = (0..zs.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut t = 0usize;
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (params.lambda * t as f64);
                let y = f64::from(ys[i]);
                let margin = y * (dot(&w, &zs[i]) + b);
                let shrink = 1.0 - eta * params.lambda;
                w.iter_mut().for_each(|wj| *wj *= shrink);
                if margin < 1.0 {
                    for (wj, zj) in w.iter_mut().zip(&zs[i]) {
                        *wj += eta * y * zj;
                    }
                    b += eta * y;
                }
            }
        }
        let mut model = Self { weights: w, bias: b, mean, scale, training_accuracy: 0.0 };
        let correct = xs.iter().zip(ys).filter(|(x, &y)| model.predict(x).0 == y).count();
        model.training_accuracy = correct as f64 / n;
        Ok(model)
    }

    /// `(label, raw margin)`; a zero margin maps to +1.
    pub fn predict(&self, x: &[f64]) -> (i8, f64) {
        let z: Vec<f64> = x.iter().zip(self.mean.iter().zip(&self.scale)).map(|(v, (m, s))| (v - m) / s).collect();
        let margin = dot(&self.weights, &z) + self.bias;
        (if margin >= 0.0 { 1 } else { -1 }, margin)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn svm_train(samples: &[(ImagingFeatures, i8)], params: &SvmParams) -> Result<LinearSvm> {
    let xs: Vec<Vec<f64>> = samples.iter().map(|(f, _)| f.to_array().to_vec()).collect();
    let ys: Vec<i8> = samples.iter().map(|(_, y)| *y).collect();
    LinearSvm::fit(&xs, &ys, params)
}

pub fn svm_classify(model: &LinearSvm, f: &ImagingFeatures) -> (i8, f64) {
    model.predict(&f.to_array())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn separable_pair() {
        let xs = vec![vec![-1.0], vec![1.0]];
        let m = LinearSvm::fit(&xs, &[-1, 1], &SvmParams::default()).unwrap();
        assert_eq!(m.predict(&[-1.0]).0, -1);
        assert_eq!(m.predict(&[1.0]).0, 1);
        assert_eq!(m.training_accuracy, 1.0);
    }

    fn separable_set(seed: u64) -> (Vec<Vec<f64>>, Vec<i8>) {
        // Points at distance ≥ 1 from the plane x + 2y − 1 = 0.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        while xs.len() < 20 {
            let p = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let s = (p[0] + 2.0 * p[1] - 1.0) / 5f64.sqrt();
            if s.abs() >= 1.0 {
                let want = if xs.len() % 2 == 0 { 1 } else { -1 };
                if (s > 0.0) == (want == 1) {
                    xs.push(p.to_vec());
                    ys.push(want);
                }
            }
        }
        (xs, ys)
    }

    #[test]
    fn twenty_separable_points() {
        let (xs, ys) = separable_set(3);
        let m = LinearSvm::fit(&xs, &ys, &SvmParams::default()).unwrap();
        // Brute-force recheck of the reported accuracy.
        let correct = xs.iter().zip(&ys).filter(|(x, &y)| m.predict(x).0 == y).count();
        assert_eq!(correct, 20);
        assert_eq!(m.training_accuracy, 1.0);
    }

    #[test]
    fn label_flip_negates_model() {
        let (xs, ys) = separable_set(11);
        let flipped: Vec<i8> = ys.iter().map(|y| -y).collect();
        let p = SvmParams::default();
        let a = LinearSvm::fit(&xs, &ys, &p).unwrap();
        let b = LinearSvm::fit(&xs, &flipped, &p).unwrap();
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            assert!((wa + wb).abs() < 1e-6);
        }
        assert!((a.bias + b.bias).abs() < 1e-6);
    }

    #[test]
    fn single_class_is_rejected() {
        let xs = vec![vec![0.0], vec![1.0]];
        assert!(matches!(LinearSvm::fit(&xs, &[1, 1], &SvmParams::default()), Err(Error::Training(_))));
    }

    #[test]
    fn feature_wrapper() {
        let base = ImagingFeatures::from_array([100.0, 110.0, 11.3, 0.9, 0.3, 1.0, 0.7, 0.4]);
        let mut other = base;
        other.solidity = 0.5;
        other.contrast = 5.0;
        let m = svm_train(&[(base, 1), (other, -1)], &SvmParams::default()).unwrap();
        assert_eq!(svm_classify(&m, &base).0, 1);
        assert_eq!(svm_classify(&m, &other).0, -1);
    }
}
