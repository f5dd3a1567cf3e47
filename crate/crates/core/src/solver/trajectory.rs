use std::io::Write;

use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

use super::{
    draw_increments, NoiseIncrement, SdaeProblem, SolverConfig, SolverError, StageStats, Stepper,
};
use crate::tableau::SrkTableau;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Counters of each step.
    pub stage_stats: Vec<StageStats>,
    /// Largest algebraic residual over the accepted states.
    pub max_constraint_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StatsSummary {
    pub f_evals: usize,
    pub g_evals: usize,
    pub newton_iters: usize,
    pub lu_factorizations: usize,
    pub jacobian_evals: usize,
    pub steps: usize,
}

impl Trajectory {
    pub fn endpoint(&self) -> &DVector<f64> {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }

    pub fn totals(&self) -> StageStats {
        let mut total = StageStats::default();
        for s in &self.stage_stats {
            total += *s;
        }
        total
    }

    pub fn summary(&self) -> StatsSummary {
        let t = self.totals();
        StatsSummary {
            f_evals: t.f_evals,
            g_evals: t.g_evals,
            newton_iters: t.newton_iters,
            lu_factorizations: t.lu_factorizations,
            jacobian_evals: t.jacobian_evals,
            steps: self.stage_stats.len(),
        }
    }

    /// CSV with header `t,x1,...,xd`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SolverError> {
        let mut out = csv::Writer::from_writer(w);
        let d = self.states.first().map_or(0, |s| s.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("x{i}")));
        out.write_record(&header)?;
        for (t, x) in self.times.iter().zip(&self.states) {
            let mut rec = vec![format_float(*t)];
            rec.extend(x.iter().map(|v| format_float(*v)));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// JSON totals `{f_evals, g_evals, newton_iters, lu_factorizations, ...}`.
    pub fn write_stats_json<W: Write>(&self, w: W) -> Result<(), SolverError> {
        serde_json::to_writer_pretty(w, &self.summary())?;
        Ok(())
    }
}

/// Shortest representation that parses back to the same value.
pub(crate) fn format_float(v: f64) -> String {
    format!("{v:?}")
}

/// Integrates on a uniform grid of `n_steps` steps, drawing increments
/// from `rng`.
pub fn simulate_path<R: Rng + ?Sized>(
    p: &SdaeProblem,
    t: &SrkTableau,
    n_steps: usize,
    rng: &mut R,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    if n_steps == 0 {
        return Err(SolverError::ZeroSteps);
    }
    let h = (p.t_end() - p.t0()) / n_steps as f64;
    let increments = (0..n_steps)
        .map(|_| draw_increments(rng, h))
        .collect::<Result<Vec<_>, _>>()?;
    simulate_with_increments(p, t, &increments, cfg)
}

/// Integrates from `t0` with the given increments; step `n` starts at
/// `t0 + sum of the first n step sizes`.
pub fn simulate_with_increments(
    p: &SdaeProblem,
    t: &SrkTableau,
    increments: &[NoiseIncrement],
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    if increments.is_empty() {
        return Err(SolverError::ZeroSteps);
    }
    p.validate(cfg.consistency_tol)?;
    let mut stepper = Stepper::new(p, t, *cfg)?;
    let n = increments.len();
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut stage_stats = Vec::with_capacity(n);
    let mut max_res = p.constraint_residual(p.t0(), p.x0());
    let uniform = increments.iter().all(|inc| inc.h() == increments[0].h());
    let h0 = increments[0].h();

    times.push(p.t0());
    states.push(p.x0().clone());
    let mut tn = p.t0();
    for (k, inc) in increments.iter().enumerate() {
        let y = states.last().expect("non-empty");
        let (y1, stats) = stepper.step(y, tn, inc).map_err(|e| SolverError::AtStep {
            step: k,
            source: Box::new(e),
        })?;
        tn = if uniform {
            p.t0() + (k + 1) as f64 * h0
        } else {
            tn + inc.h()
        };
        if p.is_singular() {
            max_res = max_res.max(p.constraint_residual(tn, &y1));
        }
        times.push(tn);
        states.push(y1);
        stage_stats.push(stats);
    }
    Ok(Trajectory {
        times,
        states,
        stage_stats,
        max_constraint_residual: max_res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::FamilyId;
    use crate::solver::{path_rng, srk_step};

    fn gbm() -> SdaeProblem {
        SdaeProblem::sde(
            |_, x: &DVector<f64>| -x,
            |_, x: &DVector<f64>| x * 0.5,
            DVector::from_element(1, 1.0),
            0.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn single_step_trajectory() {
        let p = gbm();
        let t = FamilyId::EffII.default_spec().build().unwrap();
        let inc = NoiseIncrement::from_xi(0.3, 1.0).unwrap();
        let cfg = SolverConfig::default();
        let tr = simulate_with_increments(&p, &t, &[inc], &cfg).unwrap();
        assert_eq!(tr.states.len(), 2);
        assert_eq!(tr.times, vec![0.0, 1.0]);
        let (y1, _) = srk_step(&p, &t, p.x0(), 0.0, &inc, &cfg.newton).unwrap();
        assert_eq!(tr.endpoint(), &y1);
    }

    #[test]
    fn csv_and_stats_export() {
        let p = gbm();
        let t = FamilyId::Eff05.default_spec().build().unwrap();
        let tr = simulate_path(&p, &t, 4, &mut path_rng(3, 0), &SolverConfig::default()).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1");
        assert_eq!(lines.len(), 6);
        assert!(lines[5].starts_with("1.0,"));

        let mut buf = Vec::new();
        tr.write_stats_json(&mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        for key in ["f_evals", "g_evals", "newton_iters", "lu_factorizations"] {
            assert!(v[key].is_u64(), "{key}");
        }
    }

    #[test]
    fn zero_steps_rejected() {
        let p = gbm();
        let t = FamilyId::Eff05.default_spec().build().unwrap();
        assert!(matches!(
            simulate_path(&p, &t, 0, &mut path_rng(0, 0), &SolverConfig::default()),
            Err(SolverError::ZeroSteps)
        ));
    }
}
