//! Empirical strong order from Monte Carlo studies on coupled Brownian paths.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::{
    coarsen_path, draw_path, format_float, path_rng, ExactReference, SolverConfig, SolverError,
    Stepper,
};
use crate::tableau::SrkTableau;

pub const DEFAULT_STEP_COUNTS: [usize; 6] = [16, 32, 64, 128, 256, 512];
pub const DEFAULT_PATHS: usize = 2000;

#[derive(Debug, Error)]
pub enum ConvergenceError {
    #[error("at least 3 step sizes are needed for a slope, got {levels}")]
    DegenerateFit { levels: usize },
    #[error("invalid step counts: {0}")]
    BadStepCounts(String),
    #[error("at least one path is required")]
    ZeroPaths,
    #[error("time horizon must be positive, got {0}")]
    BadHorizon(f64),
    #[error("error at h = {h} is {error}, cannot take its logarithm")]
    NonPositiveError { h: f64, error: f64 },
    #[error("path {path}, {steps} steps: {source}")]
    Solver {
        path: usize,
        steps: usize,
        #[source]
        source: SolverError,
    },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    /// Step sizes, decreasing.
    pub h_list: Vec<f64>,
    pub n_paths: usize,
    /// Root-mean-square endpoint error per step size.
    pub errors: Vec<f64>,
    /// Least-squares slope of `log2(error)` against `log2(h)`.
    pub slope: f64,
    pub seed: u64,
    /// Largest algebraic residual over every accepted step of every path.
    pub max_constraint_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StudySummary {
    pub slope: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl ConvergenceStudy {
    pub fn summary(&self) -> StudySummary {
        StudySummary {
            slope: self.slope,
            n_paths: self.n_paths,
            seed: self.seed,
        }
    }

    /// CSV `h,rms_error`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), ConvergenceError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["h", "rms_error"])?;
        for (h, e) in self.h_list.iter().zip(&self.errors) {
            out.write_record([format_float(*h), format_float(*e)])?;
        }
        out.flush()?;
        Ok(())
    }

    /// JSON `{slope, n_paths, seed}`.
    pub fn write_summary_json<W: Write>(&self, w: W) -> Result<(), ConvergenceError> {
        serde_json::to_writer_pretty(w, &self.summary())?;
        Ok(())
    }
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

struct PathResult {
    sq_errors: Vec<f64>,
    max_residual: f64,
}

/// Runs `n_paths` coupled paths on `[0, t_end]` for every step count in
/// `step_counts` (increasing, each dividing the largest) and fits the
/// strong order.
pub fn strong_order_estimate(
    reference: &ExactReference,
    tableau: &SrkTableau,
    t_end: f64,
    step_counts: &[usize],
    n_paths: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<ConvergenceStudy, ConvergenceError> {
    if step_counts.len() < 3 {
        return Err(ConvergenceError::DegenerateFit {
            levels: step_counts.len(),
        });
    }
    if step_counts[0] == 0 || step_counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConvergenceError::BadStepCounts(format!(
            "{step_counts:?} must be positive and strictly increasing"
        )));
    }
    let finest = *step_counts.last().expect("checked non-empty");
    if let Some(n) = step_counts.iter().find(|&&n| finest % n != 0) {
        return Err(ConvergenceError::BadStepCounts(format!(
            "{n} steps do not divide the finest grid of {finest} steps"
        )));
    }
    if n_paths == 0 {
        return Err(ConvergenceError::ZeroPaths);
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(ConvergenceError::BadHorizon(t_end));
    }
    let problem = reference
        .problem(0.0, t_end)
        .map_err(|source| ConvergenceError::Solver {
            path: 0,
            steps: 0,
            source,
        })?;
    problem
        .validate(cfg.consistency_tol)
        .map_err(|source| ConvergenceError::Solver {
            path: 0,
            steps: 0,
            source,
        })?;
    let h_fine = t_end / finest as f64;

    let results: Vec<PathResult> = (0..n_paths)
        .into_par_iter()
        .map(|path| -> Result<PathResult, ConvergenceError> {
            let wrap = |steps: usize| {
                move |source| ConvergenceError::Solver {
                    path,
                    steps,
                    source,
                }
            };
            let mut rng = path_rng(seed, path as u64);
            let fine = draw_path(&mut rng, h_fine, finest).map_err(wrap(finest))?;
            let w_end: f64 = fine.iter().map(|inc| inc.i1()).sum();
            let exact = reference.state_at(t_end, w_end);
            let mut sq_errors = Vec::with_capacity(step_counts.len());
            let mut max_residual: f64 = 0.0;
            for &n in step_counts {
                let incs = coarsen_path(&fine, finest / n).map_err(wrap(n))?;
                let mut stepper = Stepper::new(&problem, tableau, *cfg).map_err(wrap(n))?;
                let h = t_end / n as f64;
                let mut y = problem.x0().clone();
                for (k, inc) in incs.iter().enumerate() {
                    let tn = k as f64 * h;
                    let (y1, _) =
                        stepper
                            .step(&y, tn, inc)
                            .map_err(|e| ConvergenceError::Solver {
                                path,
                                steps: n,
                                source: SolverError::AtStep {
                                    step: k,
                                    source: Box::new(e),
                                },
                            })?;
                    y = y1;
                    if problem.is_singular() {
                        max_residual = max_residual.max(problem.constraint_residual(tn + h, &y));
                    }
                }
                sq_errors.push((&y - &exact).norm_squared());
            }
            Ok(PathResult {
                sq_errors,
                max_residual,
            })
        })
        .collect::<Result<_, _>>()?;

    let levels = step_counts.len();
    let mut sums = vec![0.0; levels];
    let mut max_constraint_residual: f64 = 0.0;
    for r in &results {
        for (s, e) in sums.iter_mut().zip(&r.sq_errors) {
            *s += e;
        }
        max_constraint_residual = max_constraint_residual.max(r.max_residual);
    }
    let h_list: Vec<f64> = step_counts.iter().map(|&n| t_end / n as f64).collect();
    let errors: Vec<f64> = sums.iter().map(|s| (s / n_paths as f64).sqrt()).collect();
    if let Some((h, e)) = h_list
        .iter()
        .zip(&errors)
        .find(|(_, e)| !(**e > 0.0 && e.is_finite()))
    {
        return Err(ConvergenceError::NonPositiveError { h: *h, error: *e });
    }
    let lx: Vec<f64> = h_list.iter().map(|h| h.log2()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.log2()).collect();
    Ok(ConvergenceStudy {
        slope: ols_slope(&lx, &ly),
        h_list,
        n_paths,
        errors,
        seed,
        max_constraint_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::FamilyId;

    #[test]
    fn ols_on_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v - 2.0).collect();
        assert!((ols_slope(&x, &y) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn argument_checks() {
        let r = ExactReference::Gbm {
            lambda: -1.0,
            mu: 0.5,
            x0: 1.0,
        };
        let t = FamilyId::Eff05.default_spec().build().unwrap();
        let cfg = SolverConfig::default();
        assert!(matches!(
            strong_order_estimate(&r, &t, 1.0, &[16, 32], 10, 1, &cfg),
            Err(ConvergenceError::DegenerateFit { levels: 2 })
        ));
        assert!(matches!(
            strong_order_estimate(&r, &t, 1.0, &[16, 24, 64], 10, 1, &cfg),
            Err(ConvergenceError::BadStepCounts(_))
        ));
        assert!(matches!(
            strong_order_estimate(&r, &t, 1.0, &[32, 16, 64], 10, 1, &cfg),
            Err(ConvergenceError::BadStepCounts(_))
        ));
        assert!(matches!(
            strong_order_estimate(&r, &t, 1.0, &[4, 8, 16], 0, 1, &cfg),
            Err(ConvergenceError::ZeroPaths)
        ));
    }

    #[test]
    fn small_study_is_reproducible() {
        let r = ExactReference::Gbm {
            lambda: -1.0,
            mu: 0.5,
            x0: 1.0,
        };
        let t = FamilyId::EffII.default_spec().build().unwrap();
        let cfg = SolverConfig::default();
        let a = strong_order_estimate(&r, &t, 1.0, &[4, 8, 16, 32], 50, 9, &cfg).unwrap();
        let b = strong_order_estimate(&r, &t, 1.0, &[4, 8, 16, 32], 50, 9, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.errors.iter().all(|e| *e > 0.0));
    }
}
