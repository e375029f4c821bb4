use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::Head;
use crate::rng;

/// Architecture of a two-hidden-layer ReLU perceptron d → h → h → 1.
///
/// Parameters are stored flat as `[W1 (h×d), b1, W2 (h×h), b2, w3, b3]`,
/// row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub dim: usize,
    pub hidden: usize,
}

struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
}

impl MlpShape {
    pub fn new(dim: usize, hidden: usize) -> Self {
        MlpShape { dim, hidden }
    }

    fn offsets(&self) -> Offsets {
        let (d, h) = (self.dim, self.hidden);
        let w1 = 0;
        let b1 = w1 + h * d;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let w3 = b2 + h;
        let b3 = w3 + h;
        Offsets { w1, b1, w2, b2, w3, b3 }
    }

    /// Index of the output bias.
    pub fn output_bias_index(&self) -> usize {
        self.offsets().b3
    }

    /// Xavier-uniform weights (gain 1) and zero biases.
    pub fn init(&self, seed: u64) -> Vec<f64> {
        let (d, h) = (self.dim, self.hidden);
        let o = self.offsets();
        let mut p = vec![0.0; self.num_params()];
        let mut r = rng::from_seed(seed);
        let mut fill = |slice: &mut [f64], fan_in: usize, fan_out: usize| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in slice {
                *v = r.random_range(-a..a);
            }
        };
        fill(&mut p[o.w1..o.b1], d, h);
        fill(&mut p[o.w2..o.b2], h, h);
        fill(&mut p[o.w3..o.b3], h, 1);
        p
    }

    fn hidden_layers(&self, p: &[f64], z: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let (d, h) = (self.dim, self.hidden);
        let o = self.offsets();
        let a1: Vec<f64> = (0..h)
            .map(|i| p[o.b1 + i] + crate::numeric::dot(&p[o.w1 + i * d..o.w1 + (i + 1) * d], z))
            .collect();
        let h1: Vec<f64> = a1.iter().map(|&a| a.max(0.0)).collect();
        let a2: Vec<f64> = (0..h)
            .map(|i| p[o.b2 + i] + crate::numeric::dot(&p[o.w2 + i * h..o.w2 + (i + 1) * h], &h1))
            .collect();
        let h2: Vec<f64> = a2.iter().map(|&a| a.max(0.0)).collect();
        (a1, h1, a2, h2)
    }
}

impl Head for MlpShape {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_params(&self) -> usize {
        let (d, h) = (self.dim, self.hidden);
        h * d + h + h * h + h + h + 1
    }

    fn reward(&self, p: &[f64], z: &[f64]) -> f64 {
        let o = self.offsets();
        let (_, _, _, h2) = self.hidden_layers(p, z);
        p[o.b3] + crate::numeric::dot(&p[o.w3..o.b3], &h2)
    }

    fn accumulate_grad(&self, p: &[f64], z: &[f64], coeff: f64, grad: &mut [f64]) {
        let (d, h) = (self.dim, self.hidden);
        let o = self.offsets();
        let (a1, h1, a2, h2) = self.hidden_layers(p, z);

        grad[o.b3] += coeff;
        for i in 0..h {
            grad[o.w3 + i] += coeff * h2[i];
        }
        let delta2: Vec<f64> = (0..h)
            .map(|i| if a2[i] > 0.0 { coeff * p[o.w3 + i] } else { 0.0 })
            .collect();
        let mut back1 = vec![0.0; h];
        for i in 0..h {
            let di = delta2[i];
            if di == 0.0 {
                continue;
            }
            grad[o.b2 + i] += di;
            let row = o.w2 + i * h;
            for j in 0..h {
                grad[row + j] += di * h1[j];
                back1[j] += di * p[row + j];
            }
        }
        for i in 0..h {
            if a1[i] <= 0.0 || back1[i] == 0.0 {
                continue;
            }
            let di = back1[i];
            grad[o.b1 + i] += di;
            let row = o.w1 + i * d;
            for j in 0..d {
                grad[row + j] += di * z[j];
            }
        }
    }
}

/// K independent MLP heads over the same embedding, with the snapshot of
/// each member's initial parameters used by the anchor regularizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpEnsembleModel {
    pub shape: MlpShape,
    pub members: Vec<Vec<f64>>,
    pub init_params: Vec<Vec<f64>>,
}

impl MlpEnsembleModel {
    pub fn member_rewards(&self, z: &[f64]) -> Vec<f64> {
        self.members.iter().map(|p| self.shape.reward(p, z)).collect()
    }
}
