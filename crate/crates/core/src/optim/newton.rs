use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct NewtonConfig {
    pub max_iter: usize,
    /// Stop once the Euclidean gradient norm falls below this value, or once
    /// the predicted decrease drops below the round-off of the objective.
    pub grad_tol: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            max_iter: 200,
            grad_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Objective value before each iteration.
    pub trace: Vec<f64>,
}

/// Damped Newton's method with Armijo backtracking for smooth, strictly
/// convex objectives. `grad_hess` must return a positive definite Hessian.
pub fn minimize_newton<F, G>(value: F, grad_hess: G, x0: Vec<f64>, config: &NewtonConfig) -> Result<NewtonOutcome>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> (Vec<f64>, DMatrix<f64>),
{
    let mut x = x0;
    let mut f = value(&x);
    let mut trace = Vec::new();
    for iter in 0..=config.max_iter {
        let (g, h) = grad_hess(&x);
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !gnorm.is_finite() || !f.is_finite() {
            return Err(Error::NotConverged { iterations: iter, grad_norm: gnorm });
        }
        if gnorm <= config.grad_tol {
            return Ok(NewtonOutcome { x, iterations: iter, grad_norm: gnorm, trace });
        }
        if iter == config.max_iter {
            return Err(Error::NotConverged { iterations: iter, grad_norm: gnorm });
        }
        trace.push(f);
        let chol = Cholesky::new(h).ok_or(Error::NotPositiveDefinite)?;
        let step = chol.solve(&(-DVector::from_column_slice(&g)));
        let slope: f64 = g.iter().zip(step.iter()).map(|(a, b)| a * b).sum();
        // Half the squared Newton decrement is the decrease the quadratic
        // model predicts; below round-off of f no step can make progress.
        if -0.5 * slope <= f64::EPSILON * (1.0 + f.abs()) {
            trace.pop();
            return Ok(NewtonOutcome { x, iterations: iter, grad_norm: gnorm, trace });
        }

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, si)| xi + t * si).collect();
            let fc = value(&cand);
            if fc <= f + 1e-4 * t * slope {
                x = cand;
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No representable decrease left; accept if the gradient is at
            // round-off level relative to the objective scale.
            if gnorm <= 1e-10 * (1.0 + f.abs()) {
                return Ok(NewtonOutcome { x, iterations: iter, grad_norm: gnorm, trace });
            }
            return Err(Error::NotConverged { iterations: iter, grad_norm: gnorm });
        }
    }
    unreachable!("loop returns on its last iteration")
}
