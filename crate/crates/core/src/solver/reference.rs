use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{SdaeProblem, SolverError};

/// Test problems with closed-form solutions along a Brownian path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExactReference {
    /// `dX = lambda X dt + mu X dW`.
    Gbm { lambda: f64, mu: f64, x0: f64 },
    /// `dx1 = (lambda x1 + x2) dt + mu x1 dW`, `0 = x2 - c x1`.
    ReducedSdae {
        lambda: f64,
        mu: f64,
        c: f64,
        x0: f64,
    },
}

impl ExactReference {
    pub fn dim(&self) -> usize {
        match self {
            ExactReference::Gbm { .. } => 1,
            ExactReference::ReducedSdae { .. } => 2,
        }
    }

    pub fn initial_state(&self) -> DVector<f64> {
        match *self {
            ExactReference::Gbm { x0, .. } => DVector::from_element(1, x0),
            ExactReference::ReducedSdae { c, x0, .. } => DVector::from_vec(vec![x0, c * x0]),
        }
    }

    /// The problem on `[t0, t_end]` with analytic Jacobians.
    pub fn problem(&self, t0: f64, t_end: f64) -> Result<SdaeProblem, SolverError> {
        match *self {
            ExactReference::Gbm { lambda, mu, .. } => Ok(SdaeProblem::sde(
                move |_, x: &DVector<f64>| x * lambda,
                move |_, x: &DVector<f64>| x * mu,
                self.initial_state(),
                t0,
                t_end,
            )?
            .with_drift_jacobian(move |_, _| DMatrix::from_element(1, 1, lambda))
            .with_diffusion_jacobian(move |_, _| DMatrix::from_element(1, 1, mu))),
            ExactReference::ReducedSdae { lambda, mu, c, .. } => Ok(SdaeProblem::sdae(
                DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0])),
                vec![1],
                move |_, x: &DVector<f64>| {
                    DVector::from_vec(vec![lambda * x[0] + x[1], x[1] - c * x[0]])
                },
                move |_, x: &DVector<f64>| DVector::from_vec(vec![mu * x[0], 0.0]),
                self.initial_state(),
                t0,
                t_end,
            )?
            .with_drift_jacobian(move |_, _| DMatrix::from_row_slice(2, 2, &[lambda, 1.0, -c, 1.0]))
            .with_diffusion_jacobian(move |_, _| {
                DMatrix::from_row_slice(2, 2, &[mu, 0.0, 0.0, 0.0])
            })),
        }
    }

    /// Exact state at `t` given the Brownian displacement `w = W_t - W_t0`.
    pub fn state_at(&self, elapsed: f64, w: f64) -> DVector<f64> {
        match *self {
            ExactReference::Gbm { lambda, mu, x0 } => {
                DVector::from_element(1, gbm(x0, lambda, mu, elapsed, w))
            }
            ExactReference::ReducedSdae { lambda, mu, c, x0 } => {
                let x1 = gbm(x0, lambda + c, mu, elapsed, w);
                DVector::from_vec(vec![x1, c * x1])
            }
        }
    }

    /// States at `times`, where `i1_path[n]` is the increment on
    /// `[times[n], times[n + 1]]`.
    pub fn evaluate(
        &self,
        times: &[f64],
        i1_path: &[f64],
    ) -> Result<Vec<DVector<f64>>, SolverError> {
        if times.is_empty() || i1_path.len() + 1 != times.len() {
            return Err(SolverError::InvalidProblem(format!(
                "{} increments do not align with {} times",
                i1_path.len(),
                times.len()
            )));
        }
        let mut w = 0.0;
        let mut out = Vec::with_capacity(times.len());
        out.push(self.state_at(0.0, 0.0));
        for (k, di) in i1_path.iter().enumerate() {
            w += di;
            out.push(self.state_at(times[k + 1] - times[0], w));
        }
        Ok(out)
    }
}

fn gbm(x0: f64, lambda: f64, mu: f64, t: f64, w: f64) -> f64 {
    x0 * ((lambda - 0.5 * mu * mu) * t + mu * w).exp()
}
