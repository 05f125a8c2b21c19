use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_xy, targets};
use crate::error::{Error, Result};

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Per-layer weight and bias gradients.
pub type Gradients = (Vec<Array2<f64>>, Vec<Array1<f64>>);

/// Fully connected sigmoid network; `weights[l]` is `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl MlpModel {
    pub fn zeros(layers: &[usize]) -> Result<Self> {
        if layers.len() < 2 || layers.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {layers:?}")));
        }
        Ok(Self {
            layers: layers.to_vec(),
            weights: layers.windows(2).map(|w| Array2::zeros((w[1], w[0]))).collect(),
            biases: layers[1..].iter().map(|&n| Array1::zeros(n)).collect(),
        })
    }

    /// Uniform weights in `±1/√fan_in`, zero biases.
    pub fn random(layers: &[usize], seed: u64) -> Result<Self> {
        let mut m = Self::zeros(layers)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in &mut m.weights {
            let r = 1.0 / (w.ncols() as f64).sqrt();
            w.mapv_inplace(|_| rng.random_range(-r..r));
        }
        Ok(m)
    }

    pub fn input_len(&self) -> usize {
        self.layers[0]
    }

    pub fn output_len(&self) -> usize {
        *self.layers.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layers.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Parameters layer by layer: weights row-major, then biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn from_flat(layers: &[usize], params: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(layers)?;
        if params.len() != m.param_count() {
            return Err(Error::Dimension { expected: m.param_count(), actual: params.len() });
        }
        let mut it = params.iter().copied();
        for (w, b) in m.weights.iter_mut().zip(&mut m.biases) {
            w.iter_mut().for_each(|x| *x = it.next().unwrap());
            b.iter_mut().for_each(|x| *x = it.next().unwrap());
        }
        Ok(m)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.input_len() {
            Ok(())
        } else {
            Err(Error::Dimension { expected: self.input_len(), actual: x.len() })
        }
    }

    /// Activations of every layer, input first.
    fn forward(&self, x: &[f64]) -> Vec<Array1<f64>> {
        let mut acts = vec![Array1::from(x.to_vec())];
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let z = w.dot(acts.last().unwrap()) + b;
            acts.push(z.mapv(sigmoid));
        }
        acts
    }

    /// Raw output activations, each in `(0, 1)`.
    pub fn outputs(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.forward(x).pop().unwrap().to_vec())
    }

    /// Class distribution: `(1 − y, y)` for one output unit, otherwise the
    /// outputs rescaled to unit sum.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let y = self.outputs(x)?;
        if y.len() == 1 {
            return Ok(vec![1.0 - y[0], y[0]]);
        }
        let s: f64 = y.iter().sum();
        Ok(y.iter().map(|v| v / s).collect())
    }

    /// `½ Σ (y − t)²` for one sample.
    pub fn loss(&self, x: &[f64], t: &[f64]) -> Result<f64> {
        let y = self.outputs(x)?;
        Ok(0.5 * y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
    }

    /// Backpropagated gradients of [`MlpModel::loss`].
    pub fn gradients(&self, x: &[f64], t: &[f64]) -> Result<Gradients> {
        self.check_input(x)?;
        let acts = self.forward(x);
        let n = self.weights.len();
        let (mut gw, mut gb) = (vec![Array2::zeros((0, 0)); n], vec![Array1::zeros(0); n]);
        let out = &acts[n];
        let mut delta: Array1<f64> = Array1::from_iter(out.iter().zip(t).map(|(&y, &ti)| (y - ti) * y * (1.0 - y)));
        for l in (0..n).rev() {
            let a_prev = &acts[l];
            gw[l] = delta.view().insert_axis(ndarray::Axis(1)).dot(&a_prev.view().insert_axis(ndarray::Axis(0)));
            gb[l] = delta.clone();
            if l > 0 {
                let back = self.weights[l].t().dot(&delta);
                delta = Array1::from_iter(back.iter().zip(a_prev).map(|(&g, &a)| g * a * (1.0 - a)));
            }
        }
        Ok((gw, gb))
    }

    fn step(&mut self, x: &[f64], t: &[f64], lr: f64) -> Result<()> {
        let (gw, gb) = self.gradients(x, t)?;
        for (w, g) in self.weights.iter_mut().zip(&gw) {
            w.scaled_add(-lr, g);
        }
        for (b, g) in self.biases.iter_mut().zip(&gb) {
            b.scaled_add(-lr, g);
        }
        Ok(())
    }

    /// Mean per-sample loss over a dataset.
    pub fn mean_loss(&self, x: &[Vec<f64>], t: &[Vec<f64>]) -> Result<f64> {
        let mut total = 0.0;
        for (xi, ti) in x.iter().zip(t) {
            total += self.loss(xi, ti)?;
        }
        Ok(total / x.len().max(1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self { hidden: vec![24], lr: 0.1, epochs: 100, seed: 1 }
    }
}

/// Trained network plus the mean loss after every epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpTraining {
    pub model: MlpModel,
    pub trace: Vec<f64>,
}

/// Per-sample gradient steps in a freshly shuffled order each epoch.
/// `layers` spans input to output; an output width of 1 means a binary
/// target in `{0, 1}`, otherwise one-hot targets.
pub fn mlp_train_incremental(
    x: &[Vec<f64>],
    y: &[usize],
    layers: &[usize],
    lr: f64,
    epochs: usize,
    seed: u64,
) -> Result<MlpTraining> {
    check_xy(x, y)?;
    if !(lr > 0.0) {
        return Err(Error::Config("learning rate must be positive".into()));
    }
    let model = MlpModel::random(layers, seed)?;
    if x[0].len() != model.input_len() {
        return Err(Error::Dimension { expected: model.input_len(), actual: x[0].len() });
    }
    let t = targets(y, model.output_len())?;
    train_from(model, x, &t, lr, epochs, seed)
}

fn train_from(
    mut model: MlpModel,
    x: &[Vec<f64>],
    t: &[Vec<f64>],
    lr: f64,
    epochs: usize,
    seed: u64,
) -> Result<MlpTraining> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut trace = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            model.step(&x[i], &t[i], lr)?;
        }
        trace.push(model.mean_loss(x, t)?);
    }
    Ok(MlpTraining { model, trace })
}

pub fn mlp_predict(m: &MlpModel, x: &[f64]) -> Result<Vec<f64>> {
    m.predict(x)
}
