//! Distributed linear SVM benchmark: synthetic two-Gaussian data, per-node
//! problem construction with node-local slacks, and classifier evaluation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::catalog::substream;
use crate::cones_prox::{Cone, ProxFunction, SmoothFunction};
use crate::dpda_static::AgentProblem;
use crate::error::{Error, Result};

pub const SAMPLES: usize = 900;
pub const TRAIN: usize = 300;

#[derive(Debug, Clone)]
pub struct SvmDataset {
    /// Two-dimensional feature vectors.
    pub features: Vec<DVector<f64>>,
    /// Labels in {-1, +1}; +1 marks the (+1, +1)-mean class.
    pub labels: Vec<f64>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// 900 points from two Gaussians with covariance `diag(1, 2)` and means
/// `(-1, -1)` / `(+1, +1)` picked with equal probability; 300 train / 600
/// test. Deterministic per seed via the `data` sub-stream.
pub fn generate_svm_data(seed: u64) -> SvmDataset {
    let mut rng = substream(seed, "data");
    let mut features = Vec::with_capacity(SAMPLES);
    let mut labels = Vec::with_capacity(SAMPLES);
    for _ in 0..SAMPLES {
        let positive = rng.gen_bool(0.5);
        let m = if positive { 1.0 } else { -1.0 };
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        features.push(DVector::from_vec(vec![m + z0, m + 2.0f64.sqrt() * z1]));
        labels.push(if positive { 1.0 } else { -1.0 });
    }
    SvmDataset {
        features,
        labels,
        train: (0..TRAIN).collect(),
        test: (TRAIN..SAMPLES).collect(),
    }
}

/// Round-robin partition of the training indices over `n_agents` nodes.
pub fn partition_train(dataset: &SvmDataset, n_agents: usize) -> Vec<Vec<usize>> {
    let mut parts = vec![Vec::new(); n_agents];
    for (pos, &idx) in dataset.train.iter().enumerate() {
        parts[pos % n_agents].push(idx);
    }
    parts
}

/// Per-node soft-margin SVM agents: shared block `(w, b)` (dimension 3),
/// node-local slacks, margin rows `y_l (w'x_l + b) - 1 + xi_l >= 0`, slack
/// cost `N * C` per unit, and an optional shared-block ball (compact domain
/// for dynamic runs).
pub fn build_svm_instance(
    dataset: &SvmDataset,
    n_agents: usize,
    c_param: f64,
    ball_radius: Option<f64>,
) -> Result<Vec<AgentProblem>> {
    if c_param <= 0.0 {
        return Err(Error::invalid("svm cost C must be positive"));
    }
    if n_agents == 0 || n_agents > TRAIN {
        return Err(Error::invalid("agent count out of range"));
    }
    let parts = partition_train(dataset, n_agents);
    let slack_cost = n_agents as f64 * c_param;
    parts
        .iter()
        .map(|indices| {
            let n_l = indices.len();
            let dim = 3 + n_l;
            let mut a = DMatrix::zeros(n_l, dim);
            for (row, &l) in indices.iter().enumerate() {
                let y = dataset.labels[l];
                let x = &dataset.features[l];
                a[(row, 0)] = y * x[0];
                a[(row, 1)] = y * x[1];
                a[(row, 2)] = y;
                a[(row, 3 + row)] = 1.0;
            }
            let b = DVector::from_element(n_l, 1.0);
            let mut parts: Vec<(std::ops::Range<usize>, ProxFunction)> = Vec::new();
            if let Some(radius) = ball_radius {
                parts.push((
                    0..3,
                    ProxFunction::IndicatorBall {
                        center: DVector::zeros(3),
                        radius,
                    },
                ));
            }
            parts.push((
                3..dim,
                ProxFunction::WeightedLinearPlusNonneg(DVector::from_element(n_l, slack_cost)),
            ));
            AgentProblem::new(
                3,
                n_l,
                ProxFunction::SeparableSum(parts),
                SmoothFunction::HalfSquaredNormOfSubblock(0..2),
                a,
                b,
                Cone::NonnegativeOrthant(n_l),
            )
        })
        .collect()
}

/// Misclassification rate of `sign(w'x + b)` on the chosen split.
pub fn evaluate_classifier(w: &DVector<f64>, b: f64, dataset: &SvmDataset, which: Split) -> f64 {
    let indices = match which {
        Split::Train => &dataset.train,
        Split::Test => &dataset.test,
    };
    let wrong = indices
        .iter()
        .filter(|&&l| {
            let score = w.dot(&dataset.features[l]) + b;
            let predicted = if score >= 0.0 { 1.0 } else { -1.0 };
            predicted != dataset.labels[l]
        })
        .count();
    wrong as f64 / indices.len() as f64
}
