use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::corpus::{PreferenceDataset, PreferenceExample};
use crate::error::{Error, Result};
use crate::numeric::{dot, sigmoid, sigmoid_prime, softplus};
use crate::optim::{minimize_newton, NewtonConfig};

/// Gaussian approximation N(θ_MAP, H⁻¹) of the linear reward head posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplacePosterior {
    pub theta_map: Vec<f64>,
    /// Row-major d×d, symmetric.
    pub hessian: Vec<f64>,
    pub prior_precision: f64,
    /// Whether the Hessian carries the σ′(θᵀΔz) curvature weights.
    pub weighted: bool,
}

impl LaplacePosterior {
    /// Prior-only posterior: θ = 0, H = λI.
    pub fn prior(dim: usize, prior_precision: f64, weighted: bool) -> Result<Self> {
        check_precision(prior_precision)?;
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        let mut hessian = vec![0.0; dim * dim];
        for i in 0..dim {
            hessian[i * dim + i] = prior_precision;
        }
        Ok(LaplacePosterior {
            theta_map: vec![0.0; dim],
            hessian,
            prior_precision,
            weighted,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta_map.len()
    }

    pub fn hessian_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.hessian)
    }

    /// Cholesky factor of H. On failure a single jitter of 1e-10·tr(H)/d is
    /// added to the diagonal; a second failure is an error.
    pub fn factor(&self) -> Result<Cholesky<f64, Dyn>> {
        let h = self.hessian_matrix();
        if let Some(c) = Cholesky::new(h.clone()) {
            return Ok(c);
        }
        let d = self.dim();
        let jitter = 1e-10 * h.trace() / d as f64;
        let jittered = h + DMatrix::identity(d, d) * jitter;
        Cholesky::new(jittered).ok_or(Error::NotPositiveDefinite)
    }

    /// Re-solves θ_MAP on `dataset` while keeping the stored Hessian.
    pub fn refresh_map(&self, dataset: &PreferenceDataset, config: &NewtonConfig) -> Result<Self> {
        let diffs: Vec<Vec<f64>> = dataset.examples().iter().map(|e| e.difference()).collect();
        let theta = fit_map(&diffs, self.prior_precision, self.theta_map.clone(), config)?;
        Ok(LaplacePosterior {
            theta_map: theta,
            ..self.clone()
        })
    }
}

fn check_precision(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidConfig(format!("prior precision must be positive, got {lambda}")));
    }
    Ok(())
}

/// Negative log-posterior of the linear head, Σ softplus(−θᵀΔz) + (λ/2)‖θ‖².
pub fn neg_log_posterior(theta: &[f64], diffs: &[Vec<f64>], lambda: f64) -> f64 {
    diffs.iter().map(|dz| softplus(-dot(theta, dz))).sum::<f64>() + 0.5 * lambda * dot(theta, theta)
}

/// Gradient of [`neg_log_posterior`].
pub fn neg_log_posterior_grad(theta: &[f64], diffs: &[Vec<f64>], lambda: f64) -> Vec<f64> {
    let mut g: Vec<f64> = theta.iter().map(|t| lambda * t).collect();
    for dz in diffs {
        let c = -sigmoid(-dot(theta, dz));
        for (gi, zi) in g.iter_mut().zip(dz) {
            *gi += c * zi;
        }
    }
    g
}

/// λI + Σ w·ΔzΔzᵀ with w = σ′(θᵀΔz) when `weights` is given, else w = 1.
fn curvature(diffs: &[Vec<f64>], lambda: f64, weights_at: Option<&[f64]>) -> DMatrix<f64> {
    let d = diffs.first().map_or(0, Vec::len);
    let mut h = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        h[(i, i)] = lambda;
    }
    for dz in diffs {
        let w = weights_at.map_or(1.0, |theta| sigmoid_prime(dot(theta, dz)));
        add_rank_one(&mut h, dz, w);
    }
    h
}

fn add_rank_one(h: &mut DMatrix<f64>, v: &[f64], w: f64) {
    let d = v.len();
    for i in 0..d {
        let wi = w * v[i];
        for j in 0..d {
            h[(i, j)] += wi * v[j];
        }
    }
}

fn fit_map(diffs: &[Vec<f64>], lambda: f64, start: Vec<f64>, config: &NewtonConfig) -> Result<Vec<f64>> {
    let outcome = minimize_newton(
        |theta| neg_log_posterior(theta, diffs, lambda),
        |theta| {
            (
                neg_log_posterior_grad(theta, diffs, lambda),
                curvature(diffs, lambda, Some(theta)),
            )
        },
        start,
        config,
    )?;
    Ok(outcome.x)
}

/// Fits θ_MAP by Newton's method and builds the Laplace Hessian at it.
pub fn laplace_fit(
    dataset: &PreferenceDataset,
    prior_precision: f64,
    weighted: bool,
    config: &NewtonConfig,
) -> Result<LaplacePosterior> {
    check_precision(prior_precision)?;
    if dataset.is_empty() {
        return Err(Error::InvalidInput("laplace_fit needs a non-empty dataset".into()));
    }
    let diffs: Vec<Vec<f64>> = dataset.examples().iter().map(|e| e.difference()).collect();
    let theta = fit_map(&diffs, prior_precision, vec![0.0; dataset.dim()], config)?;
    let h = curvature(&diffs, prior_precision, weighted.then_some(theta.as_slice()));
    Ok(LaplacePosterior {
        theta_map: theta,
        hessian: row_major(&h),
        prior_precision,
        weighted,
    })
}

fn row_major(h: &DMatrix<f64>) -> Vec<f64> {
    let d = h.nrows();
    (0..d * d).map(|k| h[(k / d, k % d)]).collect()
}

/// H′ = H + ΔzΔzᵀ for one new comparison. θ_MAP is left untouched.
pub fn laplace_update(posterior: &LaplacePosterior, example: &PreferenceExample) -> Result<LaplacePosterior> {
    if posterior.weighted {
        return Err(Error::Unsupported(
            "incremental update of a weighted Hessian (weights depend on θ)".into(),
        ));
    }
    if example.dim() != posterior.dim() {
        return Err(Error::DimensionMismatch {
            expected: posterior.dim(),
            found: example.dim(),
            line: None,
        });
    }
    let dz = example.difference();
    let d = dz.len();
    let mut hessian = posterior.hessian.clone();
    for i in 0..d {
        for j in 0..d {
            hessian[i * d + j] += dz[i] * dz[j];
        }
    }
    Ok(LaplacePosterior {
        hessian,
        ..posterior.clone()
    })
}

/// sqrt(zᵀH⁻¹z) through the Cholesky factor L: ‖L⁻¹z‖.
pub fn laplace_uncertainty(posterior: &LaplacePosterior, z: &[f64]) -> Result<f64> {
    if z.len() != posterior.dim() {
        return Err(Error::DimensionMismatch {
            expected: posterior.dim(),
            found: z.len(),
            line: None,
        });
    }
    Ok(uncertainty_from_factor(&posterior.factor()?, z))
}

pub(crate) fn uncertainty_from_factor(factor: &Cholesky<f64, Dyn>, z: &[f64]) -> f64 {
    let rhs = DVector::from_column_slice(z);
    let y = factor
        .l_dirty()
        .solve_lower_triangular(&rhs)
        .expect("Cholesky factor has a positive diagonal");
    y.norm()
}

/// Linear reward head θᵀz with Laplace uncertainty; caches the factor of H.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "LaplacePosterior", try_from = "LaplacePosterior")]
pub struct BayesLinearModel {
    posterior: LaplacePosterior,
    factor: Cholesky<f64, Dyn>,
}

impl PartialEq for BayesLinearModel {
    fn eq(&self, other: &Self) -> bool {
        self.posterior == other.posterior
    }
}

impl BayesLinearModel {
    pub fn new(posterior: LaplacePosterior) -> Result<Self> {
        let factor = posterior.factor()?;
        Ok(BayesLinearModel { posterior, factor })
    }

    pub fn posterior(&self) -> &LaplacePosterior {
        &self.posterior
    }

    pub fn reward(&self, z: &[f64]) -> f64 {
        dot(&self.posterior.theta_map, z)
    }

    pub fn uncertainty(&self, z: &[f64]) -> f64 {
        uncertainty_from_factor(&self.factor, z)
    }
}

impl From<BayesLinearModel> for LaplacePosterior {
    fn from(m: BayesLinearModel) -> Self {
        m.posterior
    }
}

impl TryFrom<LaplacePosterior> for BayesLinearModel {
    type Error = Error;

    fn try_from(p: LaplacePosterior) -> Result<Self> {
        let d = p.dim();
        if p.hessian.len() != d * d {
            return Err(Error::InvalidInput("Hessian size does not match θ".into()));
        }
        BayesLinearModel::new(p)
    }
}
