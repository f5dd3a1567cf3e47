//! Mean-square stability of SRK schemes on `dX = lambda X dt + mu X dW`.
//!
//! With `hhat = lambda h` and `k = mu sqrt(h)` one step maps `X_n` to
//! `R(xi) X_n`, where `R` is a polynomial in the normal sample `xi`. The
//! scheme is mean-square stable at `(hhat, k)` when `E|R|^2 < 1`.

mod closed_form;
mod poly;
mod probe;
mod region;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tableau::TableauError;

pub use closed_form::{closed_form_gain, ClosedFormScheme};
pub use poly::{
    deterministic_stability, gaussian_moment, ms_gain, response_polynomial, XiPolynomial,
    STAGE_SINGULARITY_TOLERANCE, TRUNCATION_TOLERANCE,
};
pub use probe::{
    a_stability_probe, Finding, PointReport, ProbeReport, ProbeSampler, ProbeSummary, ProbeVerdict,
};
pub use region::{region_grid, StabilityGrid};

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("stage {stage} denominator vanishes")]
    StageSingular { stage: usize },
    #[error("{scheme}: {reason}")]
    ParameterRegime {
        scheme: &'static str,
        reason: String,
    },
    #[error("bad range: {0}")]
    BadRange(String),
    #[error(transparent)]
    Tableau(#[from] TableauError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestPoint {
    pub hhat: Complex64,
    pub k: Complex64,
}

impl TestPoint {
    pub fn new(hhat: Complex64, k: Complex64) -> Self {
        Self { hhat, k }
    }

    /// Real point with `k = sqrt(ksq)`.
    pub fn real(hhat: f64, ksq: f64) -> Self {
        Self {
            hhat: Complex64::new(hhat, 0.0),
            k: Complex64::new(ksq.sqrt(), 0.0),
        }
    }

    pub fn from_equation(lambda: Complex64, mu: Complex64, h: f64) -> Self {
        Self {
            hhat: lambda * h,
            k: mu * h.sqrt(),
        }
    }

    /// Strictly inside the mean-square stability domain of the test equation.
    pub fn in_sde_domain(&self) -> bool {
        2.0 * self.hhat.re + self.k.norm_sqr() < 0.0
    }
}

/// Mean-square stability of the test equation itself.
pub fn sde_ms_stable(lambda: Complex64, mu: Complex64) -> bool {
    2.0 * lambda.re + mu.norm_sqr() < 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sde_domain_examples() {
        let c = Complex64::new;
        assert!(sde_ms_stable(c(-1.0, 0.0), c(1.0, 0.0)));
        assert!(!sde_ms_stable(c(-0.5, 0.0), c(1.0, 0.0)));
        assert!(!sde_ms_stable(c(-1.0, 2.0), c(1.0, 1.0)));
    }

    #[test]
    fn scaling() {
        let p = TestPoint::from_equation(Complex64::new(-2.0, 0.0), Complex64::new(1.0, 0.0), 0.25);
        assert_eq!(p.hhat.re, -0.5);
        assert_eq!(p.k.re, 0.5);
    }
}
