use std::ops::AddAssign;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use serde::{Deserialize, Serialize};

use super::{NoiseIncrement, SdaeProblem, SolverError};
use crate::tableau::SrkTableau;

/// Stage value with the drift and, when evaluated, the diffusion at it.
type StageSolution = (DVector<f64>, DVector<f64>, Option<DVector<f64>>);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    /// Use the problem's Jacobians, falling back to finite differences when
    /// none is supplied.
    #[default]
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Bound on `max|R|` relative to `max(1, max|rhs|)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Freeze the Jacobians at the step start and reuse factorizations.
    pub simplified: bool,
    pub jacobian_mode: JacobianMode,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 25,
            simplified: true,
            jacobian_mode: JacobianMode::Analytic,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(SolverError::InvalidConfig(format!(
                "Newton tolerance {} must be positive",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(SolverError::InvalidConfig(
                "max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Evaluation counters. `f_evals`/`g_evals` count stage evaluations, one per
/// stage whose value enters the scheme; Newton iterates and FSAL reuse do not
/// add to them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStats {
    pub f_evals: usize,
    pub g_evals: usize,
    /// Drift and diffusion calls made at non-final Newton iterates.
    pub iteration_f_evals: usize,
    pub iteration_g_evals: usize,
    pub newton_iters: usize,
    pub lu_factorizations: usize,
    pub jacobian_evals: usize,
}

impl AddAssign for StageStats {
    fn add_assign(&mut self, o: Self) {
        self.f_evals += o.f_evals;
        self.g_evals += o.g_evals;
        self.iteration_f_evals += o.iteration_f_evals;
        self.iteration_g_evals += o.iteration_g_evals;
        self.newton_iters += o.newton_iters;
        self.lu_factorizations += o.lu_factorizations;
        self.jacobian_evals += o.jacobian_evals;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub newton: NewtonConfig,
    /// Reuse last-stage evaluations as first-stage evaluations of the next
    /// step when the tableau allows it.
    pub fsal: bool,
    pub consistency_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton: NewtonConfig::default(),
            fsal: true,
            consistency_tol: super::DEFAULT_CONSISTENCY_TOLERANCE,
        }
    }
}

/// Which stage evaluations a tableau consumes.
#[derive(Debug, Clone)]
struct StagePlan {
    f_used: Vec<bool>,
    g_used: Vec<bool>,
    implicit: Vec<bool>,
    fsal: bool,
}

impl StagePlan {
    fn new(t: &SrkTableau, fsal_requested: bool) -> Self {
        let s = t.stages();
        let col_used = |m: &DMatrix<f64>, j: usize| (j..s).any(|i| m[(i, j)] != 0.0);
        let f_used: Vec<bool> = (0..s).map(|j| col_used(t.a(), j)).collect();
        let g_used: Vec<bool> = (0..s)
            .map(|j| col_used(t.b1(), j) || col_used(t.b2(), j) || col_used(t.b3(), j))
            .collect();
        let implicit = (0..s)
            .map(|i| t.a()[(i, i)] != 0.0 || t.b3()[(i, i)] != 0.0)
            .collect();
        let fsal = fsal_requested
            && t.structure().explicit_first_stage
            && t.c()[0] == 0.0
            && t.c()[s - 1] == 1.0;
        Self {
            f_used,
            g_used,
            implicit,
            fsal,
        }
    }
}

#[derive(Debug, Clone)]
struct FsalCache {
    t: f64,
    y: DVector<f64>,
    f: Option<DVector<f64>>,
    g: Option<DVector<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum MatrixKey {
    Stage { a: u64, b3: u64 },
    Constraint,
}

/// Advances one SRK step at a time, carrying FSAL values and frozen Newton
/// matrices.
pub struct Stepper<'a> {
    problem: &'a SdaeProblem,
    tableau: &'a SrkTableau,
    cfg: SolverConfig,
    plan: StagePlan,
    cache: Option<FsalCache>,
    mass_lu: Option<LU<f64, Dyn, Dyn>>,
    stats: StageStats,
}

/// Per-step frozen Jacobians and factorizations.
struct StepWork {
    jf: Option<DMatrix<f64>>,
    jg: Option<DMatrix<f64>>,
    lus: Vec<(MatrixKey, LU<f64, Dyn, Dyn>)>,
}

impl<'a> Stepper<'a> {
    pub fn new(
        problem: &'a SdaeProblem,
        tableau: &'a SrkTableau,
        cfg: SolverConfig,
    ) -> Result<Self, SolverError> {
        cfg.newton.validate()?;
        let report = tableau.require_admissible()?;
        if problem.is_singular() && !report.sdae_applicable {
            return Err(SolverError::NotApplicable(report.sdae_reason));
        }
        let mass_lu = if problem.is_singular() || problem.identity_mass() {
            None
        } else {
            Some(problem.mass().clone().lu())
        };
        Ok(Self {
            problem,
            tableau,
            plan: StagePlan::new(tableau, cfg.fsal),
            cfg,
            cache: None,
            mass_lu,
            stats: StageStats::default(),
        })
    }

    /// Counters accumulated since construction.
    pub fn stats(&self) -> StageStats {
        self.stats
    }

    pub fn fsal_active(&self) -> bool {
        self.plan.fsal
    }

    pub fn step(
        &mut self,
        y: &DVector<f64>,
        tn: f64,
        inc: &NoiseIncrement,
    ) -> Result<(DVector<f64>, StageStats), SolverError> {
        let before = self.stats;
        let result = self.step_inner(y, tn, inc);
        let mut delta = self.stats;
        delta.f_evals -= before.f_evals;
        delta.g_evals -= before.g_evals;
        delta.iteration_f_evals -= before.iteration_f_evals;
        delta.iteration_g_evals -= before.iteration_g_evals;
        delta.newton_iters -= before.newton_iters;
        delta.lu_factorizations -= before.lu_factorizations;
        delta.jacobian_evals -= before.jacobian_evals;
        result.map(|y1| (y1, delta))
    }

    fn step_inner(
        &mut self,
        y: &DVector<f64>,
        tn: f64,
        inc: &NoiseIncrement,
    ) -> Result<DVector<f64>, SolverError> {
        let p = self.problem;
        let t = self.tableau;
        let s = t.stages();
        let d = p.dim();
        if y.len() != d {
            return Err(SolverError::InvalidProblem(format!(
                "state has length {}, expected {d}",
                y.len()
            )));
        }
        let h = inc.h();
        let sqh = h.sqrt();
        let (i1, i11) = (inc.i1(), inc.i11());
        let tol = self.cfg.newton.tol;

        let my = if p.identity_mass() {
            y.clone()
        } else {
            p.mass() * y
        };
        let mut work = StepWork {
            jf: None,
            jg: None,
            lus: Vec::new(),
        };
        let mut stages: Vec<DVector<f64>> = Vec::with_capacity(s);
        let mut fs: Vec<Option<DVector<f64>>> = vec![None; s];
        let mut gs: Vec<Option<DVector<f64>>> = vec![None; s];

        let cached = match self.cache.take() {
            Some(c) if self.plan.fsal && same_time(c.t, tn) && c.y == *y => Some(c),
            _ => None,
        };

        for i in 0..s {
            let ti = tn + t.c()[i] * h;
            let mut rhs = my.clone();
            for j in 0..i {
                let a = t.a()[(i, j)];
                if a != 0.0 {
                    let fj = fs[j]
                        .as_ref()
                        .expect("drift evaluated for every used stage");
                    rhs.axpy(h * a, fj, 1.0);
                }
                let w = t.b1()[(i, j)] * i1 + t.b2()[(i, j)] * i11 / sqh + t.b3()[(i, j)] * sqh;
                if w != 0.0 {
                    let gj = gs[j]
                        .as_ref()
                        .expect("diffusion evaluated for every used stage");
                    rhs.axpy(w, gj, 1.0);
                }
            }
            let scale = 1.0f64.max(rhs.amax());

            let a_ii = t.a()[(i, i)];
            let b3_ii = t.b3()[(i, i)];
            let (hi, f_final, g_final) = if self.plan.implicit[i] {
                let guess = stages.last().unwrap_or(y).clone();
                let (hi, fv, gv) = self.solve_implicit(
                    &mut work,
                    i,
                    tn,
                    y,
                    ti,
                    &rhs,
                    guess,
                    h * a_ii,
                    sqh * b3_ii,
                    tol * scale,
                )?;
                (hi, Some(fv), gv)
            } else if p.is_singular() {
                let guess = stages.last().unwrap_or(y).clone();
                let prefetched = if i == 0 {
                    cached.as_ref().and_then(|c| c.f.clone())
                } else {
                    None
                };
                let (hi, fv) = self.solve_constraint(
                    &mut work,
                    i,
                    tn,
                    y,
                    ti,
                    &rhs,
                    guess,
                    prefetched,
                    tol * scale,
                )?;
                (hi, Some(fv), None)
            } else if i == 0 && rhs == my {
                (y.clone(), None, None)
            } else {
                let hi = match &self.mass_lu {
                    None => rhs,
                    Some(lu) => lu
                        .solve(&rhs)
                        .ok_or(SolverError::SingularIteration { stage: i + 1 })?,
                };
                (hi, None, None)
            };
            if hi.iter().any(|v| !v.is_finite()) {
                return Err(SolverError::NonFiniteStage { stage: i + 1 });
            }

            let from_cache = |pick: fn(&FsalCache) -> Option<&DVector<f64>>| {
                if i == 0 {
                    cached.as_ref().and_then(|c| pick(c).cloned())
                } else {
                    None
                }
            };
            if self.plan.f_used[i] {
                fs[i] = Some(match f_final {
                    Some(v) => v,
                    None => match from_cache(|c| c.f.as_ref()) {
                        Some(v) => v,
                        None => {
                            self.stats.f_evals += 1;
                            p.drift(ti, &hi)
                        }
                    },
                });
            }
            if self.plan.g_used[i] {
                let gv = match g_final {
                    Some(v) => v,
                    None => match from_cache(|c| c.g.as_ref()) {
                        Some(v) => v,
                        None => {
                            self.stats.g_evals += 1;
                            p.diffusion(ti, &hi)
                        }
                    },
                };
                if p.is_singular() {
                    p.check_noise_free(&gv, self.cfg.consistency_tol)?;
                }
                gs[i] = Some(gv);
            }
            stages.push(hi);
        }

        let y1 = stages.pop().expect("at least one stage");
        if self.plan.fsal {
            self.cache = Some(FsalCache {
                t: tn + h,
                y: y1.clone(),
                f: fs[s - 1].take(),
                g: gs[s - 1].take(),
            });
        }
        Ok(y1)
    }

    fn jacobians(&mut self, work: &mut StepWork, t: f64, x: &DVector<f64>, need_g: bool) {
        if work.jf.is_none() {
            work.jf = Some(self.drift_jacobian(t, x));
        }
        if need_g && work.jg.is_none() {
            work.jg = Some(self.diffusion_jacobian(t, x));
        }
    }

    fn drift_jacobian(&mut self, t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        self.stats.jacobian_evals += 1;
        let p = self.problem;
        match (
            self.cfg.newton.jacobian_mode,
            p.analytic_drift_jacobian(t, x),
        ) {
            (JacobianMode::Analytic, Some(j)) => j,
            _ => finite_difference(|x| p.drift(t, x), x),
        }
    }

    fn diffusion_jacobian(&mut self, t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        self.stats.jacobian_evals += 1;
        let p = self.problem;
        match (
            self.cfg.newton.jacobian_mode,
            p.analytic_diffusion_jacobian(t, x),
        ) {
            (JacobianMode::Analytic, Some(j)) => j,
            _ => finite_difference(|x| p.diffusion(t, x), x),
        }
    }

    fn factorize(
        &mut self,
        m: DMatrix<f64>,
        stage: usize,
    ) -> Result<LU<f64, Dyn, Dyn>, SolverError> {
        self.stats.lu_factorizations += 1;
        let lu = m.lu();
        let u = lu.u();
        let umax = u.amax();
        let umin = u
            .diagonal()
            .iter()
            .fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
        if !(umax.is_finite() && umin > 1e-14 * umax) {
            return Err(SolverError::SingularIteration { stage });
        }
        Ok(lu)
    }

    /// Newton on `M H - rhs - ha f(ti, H) - sb g(ti, H) = 0`.
    #[allow(clippy::too_many_arguments)]
    fn solve_implicit(
        &mut self,
        work: &mut StepWork,
        i: usize,
        tn: f64,
        y: &DVector<f64>,
        ti: f64,
        rhs: &DVector<f64>,
        mut x: DVector<f64>,
        ha: f64,
        sb: f64,
        tol: f64,
    ) -> Result<StageSolution, SolverError> {
        let p = self.problem;
        let stage = i + 1;
        let key = MatrixKey::Stage {
            a: ha.to_bits(),
            b3: sb.to_bits(),
        };
        let mut evals = 0usize;
        let mut iters = 0usize;
        loop {
            let fv = p.drift(ti, &x);
            let gv = (sb != 0.0).then(|| p.diffusion(ti, &x));
            evals += 1;
            let mut r = if p.identity_mass() {
                x.clone()
            } else {
                p.mass() * &x
            };
            r -= rhs;
            r.axpy(-ha, &fv, 1.0);
            if let Some(g) = &gv {
                r.axpy(-sb, g, 1.0);
            }
            let res = r.amax();
            if !res.is_finite() {
                return Err(SolverError::NonFiniteStage { stage });
            }
            if res <= tol {
                self.stats.f_evals += 1;
                self.stats.iteration_f_evals += evals - 1;
                if gv.is_some() {
                    self.stats.g_evals += 1;
                    self.stats.iteration_g_evals += evals - 1;
                }
                return Ok((x, fv, gv));
            }
            if iters == self.cfg.newton.max_iter {
                return Err(SolverError::NewtonDiverged {
                    stage,
                    residual: res,
                    iterations: iters,
                });
            }
            let dx = if self.cfg.newton.simplified {
                if !work.lus.iter().any(|(k, _)| *k == key) {
                    self.jacobians(work, tn, y, sb != 0.0);
                    let m = self.stage_matrix(work.jf.as_ref().unwrap(), work.jg.as_ref(), ha, sb);
                    let lu = self.factorize(m, stage)?;
                    work.lus.push((key, lu));
                }
                let lu = &work.lus.iter().find(|(k, _)| *k == key).unwrap().1;
                lu.solve(&r)
            } else {
                let jf = self.drift_jacobian(ti, &x);
                let jg = (sb != 0.0).then(|| self.diffusion_jacobian(ti, &x));
                let m = self.stage_matrix(&jf, jg.as_ref(), ha, sb);
                self.factorize(m, stage)?.solve(&r)
            }
            .ok_or(SolverError::SingularIteration { stage })?;
            x -= dx;
            iters += 1;
            self.stats.newton_iters += 1;
        }
    }

    fn stage_matrix(
        &self,
        jf: &DMatrix<f64>,
        jg: Option<&DMatrix<f64>>,
        ha: f64,
        sb: f64,
    ) -> DMatrix<f64> {
        let mut m = self.problem.mass() - jf * ha;
        if let Some(jg) = jg {
            m -= jg * sb;
        }
        m
    }

    /// Explicit stage with singular mass matrix: the differential rows give
    /// `(M H)_r = rhs_r`, the algebraic rows are closed by `f_r(ti, H) = 0`.
    #[allow(clippy::too_many_arguments)]
    fn solve_constraint(
        &mut self,
        work: &mut StepWork,
        i: usize,
        tn: f64,
        y: &DVector<f64>,
        ti: f64,
        rhs: &DVector<f64>,
        mut x: DVector<f64>,
        prefetched: Option<DVector<f64>>,
        tol: f64,
    ) -> Result<(DVector<f64>, DVector<f64>), SolverError> {
        let p = self.problem;
        let stage = i + 1;
        let alg = p.algebraic_rows();
        let mut prefetched = prefetched.filter(|_| x == *y);
        let mut evals = 0usize;
        let mut iters = 0usize;
        loop {
            let fv = match prefetched.take() {
                Some(v) => v,
                None => {
                    evals += 1;
                    p.drift(ti, &x)
                }
            };
            let mut r = p.mass() * &x - rhs;
            for &row in alg {
                r[row] = fv[row];
            }
            let res = r.amax();
            if !res.is_finite() {
                return Err(SolverError::NonFiniteStage { stage });
            }
            if res <= tol {
                // the converged drift is this stage's evaluation when the
                // tableau uses it, otherwise it was only needed for the solve
                if evals > 0 {
                    if self.plan.f_used[i] {
                        self.stats.f_evals += 1;
                        self.stats.iteration_f_evals += evals - 1;
                    } else {
                        self.stats.iteration_f_evals += evals;
                    }
                }
                return Ok((x, fv));
            }
            if iters == self.cfg.newton.max_iter {
                return Err(SolverError::NewtonDiverged {
                    stage,
                    residual: res,
                    iterations: iters,
                });
            }
            let build = |jf: &DMatrix<f64>| {
                let mut m = p.mass().clone();
                for &row in alg {
                    m.set_row(row, &jf.row(row));
                }
                m
            };
            let dx = if self.cfg.newton.simplified {
                if !work.lus.iter().any(|(k, _)| *k == MatrixKey::Constraint) {
                    self.jacobians(work, tn, y, false);
                    let m = build(work.jf.as_ref().unwrap());
                    let lu = self.factorize(m, stage)?;
                    work.lus.push((MatrixKey::Constraint, lu));
                }
                let lu = &work
                    .lus
                    .iter()
                    .find(|(k, _)| *k == MatrixKey::Constraint)
                    .unwrap()
                    .1;
                lu.solve(&r)
            } else {
                let jf = self.drift_jacobian(ti, &x);
                self.factorize(build(&jf), stage)?.solve(&r)
            }
            .ok_or(SolverError::SingularIteration { stage })?;
            x -= dx;
            iters += 1;
            self.stats.newton_iters += 1;
        }
    }
}

/// Grid times rebuilt as `t0 + n h` may differ from `tn + h` in the last bits.
fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0)
}

/// Central-difference Jacobian with step `sqrt(eps) * (1 + |x_j|)`.
pub fn finite_difference<F>(f: F, x: &DVector<f64>) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x.len();
    let sq = f64::EPSILON.sqrt();
    let mut cols = Vec::with_capacity(n);
    let mut xp = x.clone();
    for j in 0..n {
        let delta = sq * (1.0 + x[j].abs());
        xp[j] = x[j] + delta;
        let fp = f(&xp);
        xp[j] = x[j] - delta;
        let fm = f(&xp);
        xp[j] = x[j];
        cols.push((fp - fm) / (2.0 * delta));
    }
    let rows = cols.first().map_or(0, |c| c.len());
    DMatrix::from_fn(rows, n, |r, c| cols[c][r])
}

/// One step from `(tn, y)` without FSAL reuse.
pub fn srk_step(
    p: &SdaeProblem,
    t: &SrkTableau,
    y: &DVector<f64>,
    tn: f64,
    inc: &NoiseIncrement,
    cfg: &NewtonConfig,
) -> Result<(DVector<f64>, StageStats), SolverError> {
    let cfg = SolverConfig {
        newton: *cfg,
        fsal: false,
        ..SolverConfig::default()
    };
    Stepper::new(p, t, cfg)?.step(y, tn, inc)
}
