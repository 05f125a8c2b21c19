use std::collections::HashMap;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Ordered ids with one orthonormal code vector each (the columns of
/// `codes`).
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    codes: Array2<f64>,
}

pub type DiseaseCodebook = Codebook;
pub type SignCodebook = Codebook;

impl Codebook {
    /// Identity codes: id `i` maps to basis vector `e_i`.
    pub fn canonical<S: AsRef<str>>(ids: &[S]) -> Result<Self> {
        let n = ids.len();
        Self::with_codes(ids, Array2::eye(n))
    }

    /// Seeded random orthonormal codes (Gram–Schmidt on Gaussian columns).
    pub fn random_orthonormal<S: AsRef<str>>(ids: &[S], seed: u64) -> Result<Self> {
        let n = ids.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut codes = Array2::<f64>::zeros((n, n));
        let mut j = 0;
        while j < n {
            let mut v: Array1<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            // Two passes keep the columns orthogonal to machine precision.
            for _ in 0..2 {
                for i in 0..j {
                    let col = codes.column(i);
                    let proj = col.dot(&v);
                    v.scaled_add(-proj, &col);
                }
            }
            let norm = v.dot(&v).sqrt();
            if norm < 1e-8 {
                continue;
            }
            codes.column_mut(j).assign(&(v / norm));
            j += 1;
        }
        Self::with_codes(ids, codes)
    }

    fn with_codes<S: AsRef<str>>(ids: &[S], codes: Array2<f64>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::Config("codebook needs at least one id".into()));
        }
        let mut index = HashMap::new();
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.as_ref().to_string(), i).is_some() {
                return Err(Error::Config(format!("duplicate codebook id `{}`", id.as_ref())));
            }
        }
        Ok(Self { ids: ids.iter().map(|s| s.as_ref().to_string()).collect(), index, codes })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn code(&self, i: usize) -> Array1<f64> {
        self.codes.column(i).to_owned()
    }

    /// Columns are the code vectors.
    pub fn codes(&self) -> &Array2<f64> {
        &self.codes
    }

    /// `true` when the codes are the identity basis.
    pub fn is_canonical(&self) -> bool {
        self.codes == Array2::<f64>::eye(self.len())
    }
}
