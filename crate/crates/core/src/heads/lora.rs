use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Head;
use crate::numeric::dot;
use crate::rng;

/// A frozen linear backbone `W0` adapted by a low-rank update and read out
/// by a linear head: `r(z) = head · ((W0 + (α/rank)·A·B) z) + bias`.
///
/// Trainable parameters per member are `[A (d×rank), B (rank×d), head (d), bias]`.
/// `W0` is shared by every member and never receives a gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraShape {
    pub dim: usize,
    pub rank: usize,
    pub alpha: f64,
    /// Row-major d×d.
    pub backbone: Vec<f64>,
}

impl LoraShape {
    /// Backbone entries drawn i.i.d. N(0, 1/d) from `seed`.
    pub fn with_random_backbone(dim: usize, rank: usize, alpha: f64, seed: u64) -> Self {
        let mut r = rng::from_seed(seed);
        let normal = Normal::new(0.0, (1.0 / dim as f64).sqrt()).expect("valid normal");
        let backbone = (0..dim * dim).map(|_| normal.sample(&mut r)).collect();
        LoraShape { dim, rank, alpha, backbone }
    }

    pub fn scale(&self) -> f64 {
        self.alpha / self.rank as f64
    }

    fn a_off(&self) -> usize {
        0
    }
    fn b_off(&self) -> usize {
        self.dim * self.rank
    }
    fn head_off(&self) -> usize {
        2 * self.dim * self.rank
    }
    pub fn bias_index(&self) -> usize {
        2 * self.dim * self.rank + self.dim
    }

    /// Adapter up-projection A starts at zero, the down-projection B and the
    /// head are Xavier-uniform.
    pub fn init(&self, seed: u64) -> Vec<f64> {
        let (d, k) = (self.dim, self.rank);
        let mut p = vec![0.0; self.num_params()];
        let mut r = rng::from_seed(seed);
        let ab = (6.0 / (d + k) as f64).sqrt();
        for v in &mut p[self.b_off()..self.head_off()] {
            *v = r.random_range(-ab..ab);
        }
        let ah = (6.0 / (d + 1) as f64).sqrt();
        for v in &mut p[self.head_off()..self.bias_index()] {
            *v = r.random_range(-ah..ah);
        }
        p
    }

    /// Returns (adapted features x, down-projected v).
    fn features(&self, p: &[f64], z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (d, k) = (self.dim, self.rank);
        let s = self.scale();
        let b = &p[self.b_off()..self.head_off()];
        let a = &p[self.a_off()..self.b_off()];
        let v: Vec<f64> = (0..k).map(|j| dot(&b[j * d..(j + 1) * d], z)).collect();
        let x = (0..d)
            .map(|i| dot(&self.backbone[i * d..(i + 1) * d], z) + s * dot(&a[i * k..(i + 1) * k], &v))
            .collect();
        (x, v)
    }
}

impl Head for LoraShape {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_params(&self) -> usize {
        2 * self.dim * self.rank + self.dim + 1
    }

    fn reward(&self, p: &[f64], z: &[f64]) -> f64 {
        let (x, _) = self.features(p, z);
        dot(&p[self.head_off()..self.bias_index()], &x) + p[self.bias_index()]
    }

    fn accumulate_grad(&self, p: &[f64], z: &[f64], coeff: f64, grad: &mut [f64]) {
        let (d, k) = (self.dim, self.rank);
        let s = self.scale();
        let (x, v) = self.features(p, z);
        let head = &p[self.head_off()..self.bias_index()];
        let a = &p[self.a_off()..self.b_off()];

        grad[self.bias_index()] += coeff;
        for i in 0..d {
            grad[self.head_off() + i] += coeff * x[i];
        }
        for i in 0..d {
            let hi = coeff * s * head[i];
            for j in 0..k {
                grad[self.a_off() + i * k + j] += hi * v[j];
            }
        }
        // ∂r/∂B[j][c] = s · (Aᵀ head)_j · z_c
        for j in 0..k {
            let aj: f64 = (0..d).map(|i| a[i * k + j] * head[i]).sum();
            let cj = coeff * s * aj;
            if cj == 0.0 {
                continue;
            }
            for c in 0..d {
                grad[self.b_off() + j * d + c] += cj * z[c];
            }
        }
    }
}

/// K low-rank adapters with their own linear heads over one frozen backbone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankEnsembleModel {
    pub shape: LoraShape,
    pub members: Vec<Vec<f64>>,
    pub init_params: Vec<Vec<f64>>,
}

impl LowRankEnsembleModel {
    pub fn member_rewards(&self, z: &[f64]) -> Vec<f64> {
        self.members.iter().map(|p| self.shape.reward(p, z)).collect()
    }
}
