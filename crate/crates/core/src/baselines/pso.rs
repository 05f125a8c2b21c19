use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::MlpModel;
use super::{check_xy, targets};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// Every particle follows the swarm-wide best.
    #[default]
    Gbest,
    /// Each particle follows the best of itself and its two ring neighbours.
    Ring,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoParams {
    pub particles: usize,
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
    /// Search box `[lo, hi]` for every coordinate.
    pub bounds: (f64, f64),
    /// Velocity clamp; half the search range when absent.
    pub v_max: Option<f64>,
    pub topology: Topology,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            particles: 30,
            inertia: 0.729,
            c1: 1.49445,
            c2: 1.49445,
            bounds: (-5.0, 5.0),
            v_max: None,
            topology: Topology::Gbest,
        }
    }
}

impl PsoParams {
    pub fn v_max(&self) -> f64 {
        self.v_max.unwrap_or((self.bounds.1 - self.bounds.0) / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoSwarm {
    pub params: PsoParams,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub pbest: Vec<Vec<f64>>,
    pub pbest_fitness: Vec<f64>,
    pub gbest: Vec<f64>,
    pub gbest_fitness: f64,
    rng: ChaCha8Rng,
}

impl PsoSwarm {
    pub fn new(objective: &impl Fn(&[f64]) -> f64, dims: usize, params: PsoParams, seed: u64) -> Result<Self> {
        if dims == 0 || params.particles == 0 {
            return Err(Error::Config("pso needs dims ≥ 1 and at least one particle".into()));
        }
        let (lo, hi) = params.bounds;
        if !(lo < hi) || !(params.v_max() > 0.0) {
            return Err(Error::Config("pso bounds must satisfy lo < hi and v_max > 0".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vm = params.v_max();
        let positions: Vec<Vec<f64>> =
            (0..params.particles).map(|_| (0..dims).map(|_| rng.random_range(lo..hi)).collect()).collect();
        let velocities =
            (0..params.particles).map(|_| (0..dims).map(|_| rng.random_range(-vm..vm)).collect()).collect();
        let pbest_fitness: Vec<f64> = positions.iter().map(|p| objective(p)).collect();
        let best = argmin(&pbest_fitness);
        Ok(Self {
            params,
            gbest: positions[best].clone(),
            gbest_fitness: pbest_fitness[best],
            pbest: positions.clone(),
            positions,
            velocities,
            pbest_fitness,
            rng,
        })
    }

    /// Best personal best among particle `i` and its ring neighbours.
    fn guide(&self, i: usize) -> &[f64] {
        match self.params.topology {
            Topology::Gbest => &self.gbest,
            Topology::Ring => {
                let n = self.positions.len();
                let cand = [(i + n - 1) % n, i, (i + 1) % n];
                let j =
                    cand.into_iter().min_by(|&a, &b| self.pbest_fitness[a].total_cmp(&self.pbest_fitness[b])).unwrap();
                &self.pbest[j]
            }
        }
    }

    pub fn step(&mut self, objective: &impl Fn(&[f64]) -> f64) {
        let p = self.params;
        let (lo, hi, vm) = (p.bounds.0, p.bounds.1, p.v_max());
        let n = self.positions.len();
        let guides: Vec<Vec<f64>> = (0..n).map(|i| self.guide(i).to_vec()).collect();
        for (i, guide) in guides.iter().enumerate() {
            for (d, &g) in guide.iter().enumerate() {
                let (r1, r2): (f64, f64) = (self.rng.random(), self.rng.random());
                let x = self.positions[i][d];
                let v = p.inertia * self.velocities[i][d] + p.c1 * r1 * (self.pbest[i][d] - x) + p.c2 * r2 * (g - x);
                let v = v.clamp(-vm, vm);
                self.velocities[i][d] = v;
                self.positions[i][d] = (x + v).clamp(lo, hi);
            }
            let f = objective(&self.positions[i]);
            if f < self.pbest_fitness[i] {
                self.pbest_fitness[i] = f;
                self.pbest[i].clone_from(&self.positions[i]);
                if f < self.gbest_fitness {
                    self.gbest_fitness = f;
                    self.gbest.clone_from(&self.positions[i]);
                }
            }
        }
    }
}

fn argmin(v: &[f64]) -> usize {
    (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoResult {
    pub best: Vec<f64>,
    pub fitness: f64,
    /// gbest fitness after initialization and after every iteration.
    pub trace: Vec<f64>,
}

pub fn pso_optimize(
    objective: impl Fn(&[f64]) -> f64,
    dims: usize,
    params: &PsoParams,
    iterations: usize,
    seed: u64,
) -> Result<PsoResult> {
    let mut swarm = PsoSwarm::new(&objective, dims, *params, seed)?;
    let mut trace = vec![swarm.gbest_fitness];
    for _ in 0..iterations {
        swarm.step(&objective);
        trace.push(swarm.gbest_fitness);
    }
    Ok(PsoResult { best: swarm.gbest, fitness: swarm.gbest_fitness, trace })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoClassifierParams {
    pub hidden: Vec<usize>,
    pub iterations: usize,
    pub swarm: PsoParams,
}

impl Default for PsoClassifierParams {
    fn default() -> Self {
        Self { hidden: vec![4], iterations: 200, swarm: PsoParams::default() }
    }
}

/// Searches the flattened weight space of a sigmoid network for the lowest
/// mean training loss.
pub fn pso_train_classifier(
    x: &[Vec<f64>],
    y: &[usize],
    layers: &[usize],
    params: &PsoClassifierParams,
    seed: u64,
) -> Result<(MlpModel, PsoResult)> {
    check_xy(x, y)?;
    let template = MlpModel::zeros(layers)?;
    if x[0].len() != template.input_len() {
        return Err(Error::Dimension { expected: template.input_len(), actual: x[0].len() });
    }
    let t = targets(y, template.output_len())?;
    let objective = |w: &[f64]| {
        let m = MlpModel::from_flat(layers, w).expect("particle has the model's dimension");
        m.mean_loss(x, &t).expect("inputs were checked")
    };
    let run = pso_optimize(objective, template.param_count(), &params.swarm, params.iterations, seed)?;
    Ok((MlpModel::from_flat(layers, &run.best)?, run))
}
