use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::SolverError;
use crate::tableau::is_nonsingular;

pub type VectorField = Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(f64, &DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Default bound on the algebraic residual of a consistent state.
pub const DEFAULT_CONSISTENCY_TOLERANCE: f64 = 1e-8;

/// `M dX = f(t, X) dt + g(t, X) dW` on `[t0, t_end]` with scalar noise.
///
/// Rows of `M` that vanish carry algebraic constraints `f_r(t, X) = 0`.
/// They must be declared through [`SdaeProblem::with_algebraic_rows`];
/// the diffusion must vanish in those rows.
#[derive(Clone)]
pub struct SdaeProblem {
    mass: DMatrix<f64>,
    identity_mass: bool,
    drift: VectorField,
    diffusion: VectorField,
    drift_jacobian: Option<MatrixField>,
    diffusion_jacobian: Option<MatrixField>,
    x0: DVector<f64>,
    t0: f64,
    t_end: f64,
    algebraic_rows: Vec<usize>,
}

impl fmt::Debug for SdaeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdaeProblem")
            .field("dim", &self.dim())
            .field("mass", &self.mass)
            .field("x0", &self.x0)
            .field("t0", &self.t0)
            .field("t_end", &self.t_end)
            .field("algebraic_rows", &self.algebraic_rows)
            .field("drift_jacobian", &self.drift_jacobian.is_some())
            .field("diffusion_jacobian", &self.diffusion_jacobian.is_some())
            .finish()
    }
}

impl SdaeProblem {
    pub fn new<F, G>(
        mass: DMatrix<f64>,
        drift: F,
        diffusion: G,
        x0: DVector<f64>,
        t0: f64,
        t_end: f64,
    ) -> Result<Self, SolverError>
    where
        F: Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        G: Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        let d = x0.len();
        if d == 0 {
            return Err(SolverError::InvalidProblem(
                "state dimension must be positive".into(),
            ));
        }
        if mass.nrows() != d || mass.ncols() != d {
            return Err(SolverError::InvalidProblem(format!(
                "mass matrix is {}x{}, state dimension is {d}",
                mass.nrows(),
                mass.ncols()
            )));
        }
        if !(t0.is_finite() && t_end.is_finite() && t_end > t0) {
            return Err(SolverError::InvalidProblem(format!(
                "time horizon [{t0}, {t_end}] is empty"
            )));
        }
        if x0.iter().chain(mass.iter()).any(|v| !v.is_finite()) {
            return Err(SolverError::InvalidProblem(
                "non-finite mass matrix or initial value".into(),
            ));
        }
        if !is_nonsingular(&mass, 1e-12) {
            return Err(SolverError::InvalidProblem(
                "mass matrix is singular; declare the algebraic rows".into(),
            ));
        }
        let identity_mass = mass == DMatrix::identity(d, d);
        Ok(Self {
            mass,
            identity_mass,
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            drift_jacobian: None,
            diffusion_jacobian: None,
            x0,
            t0,
            t_end,
            algebraic_rows: Vec::new(),
        })
    }

    /// SDE with identity mass matrix.
    pub fn sde<F, G>(
        drift: F,
        diffusion: G,
        x0: DVector<f64>,
        t0: f64,
        t_end: f64,
    ) -> Result<Self, SolverError>
    where
        F: Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        G: Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        let d = x0.len();
        Self::new(DMatrix::identity(d, d), drift, diffusion, x0, t0, t_end)
    }

    /// SDAE whose mass matrix has zero rows at `rows`. The remaining rows
    /// must have full rank (checked in debug builds).
    pub fn sdae<F, G>(
        mass: DMatrix<f64>,
        algebraic_rows: Vec<usize>,
        drift: F,
        diffusion: G,
        x0: DVector<f64>,
        t0: f64,
        t_end: f64,
    ) -> Result<Self, SolverError>
    where
        F: Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        G: Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        let d = x0.len();
        // validate everything except singularity against an identity stand-in
        let mut p = Self::new(DMatrix::identity(d, d), drift, diffusion, x0, t0, t_end)?;
        if mass.nrows() != d || mass.ncols() != d || mass.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::InvalidProblem(format!(
                "mass matrix is {}x{}, state dimension is {d}",
                mass.nrows(),
                mass.ncols()
            )));
        }
        p.identity_mass = mass == DMatrix::identity(d, d);
        p.mass = mass;
        p.with_algebraic_rows(algebraic_rows)
    }

    pub fn with_algebraic_rows(mut self, mut rows: Vec<usize>) -> Result<Self, SolverError> {
        rows.sort_unstable();
        rows.dedup();
        let d = self.dim();
        if let Some(&r) = rows.iter().find(|&&r| r >= d) {
            return Err(SolverError::InvalidProblem(format!(
                "algebraic row {r} out of range"
            )));
        }
        if let Some(&r) = rows
            .iter()
            .find(|&&r| self.mass.row(r).iter().any(|&v| v != 0.0))
        {
            return Err(SolverError::InvalidProblem(format!(
                "row {r} of the mass matrix is declared algebraic but is not zero"
            )));
        }
        debug_assert_eq!(
            self.mass
                .clone()
                .svd(false, false)
                .rank(1e-10 * self.mass.amax().max(1.0)),
            d - rows.len(),
            "differential rows of the mass matrix must have full rank"
        );
        self.identity_mass = rows.is_empty() && self.mass == DMatrix::identity(d, d);
        self.algebraic_rows = rows;
        Ok(self)
    }

    pub fn with_drift_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(f64, &DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.drift_jacobian = Some(Arc::new(jac));
        self
    }

    pub fn with_diffusion_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(f64, &DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.diffusion_jacobian = Some(Arc::new(jac));
        self
    }

    pub fn with_initial_value(mut self, x0: DVector<f64>) -> Result<Self, SolverError> {
        if x0.len() != self.dim() {
            return Err(SolverError::InvalidProblem(
                "initial value has the wrong dimension".into(),
            ));
        }
        self.x0 = x0;
        Ok(self)
    }

    pub fn with_horizon(mut self, t0: f64, t_end: f64) -> Result<Self, SolverError> {
        if !(t0.is_finite() && t_end.is_finite() && t_end > t0) {
            return Err(SolverError::InvalidProblem(format!(
                "time horizon [{t0}, {t_end}] is empty"
            )));
        }
        self.t0 = t0;
        self.t_end = t_end;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub(crate) fn identity_mass(&self) -> bool {
        self.identity_mass
    }

    pub fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn algebraic_rows(&self) -> &[usize] {
        &self.algebraic_rows
    }

    pub fn is_singular(&self) -> bool {
        !self.algebraic_rows.is_empty()
    }

    pub fn drift(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        (self.drift)(t, x)
    }

    pub fn diffusion(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        (self.diffusion)(t, x)
    }

    pub fn has_drift_jacobian(&self) -> bool {
        self.drift_jacobian.is_some()
    }

    pub fn has_diffusion_jacobian(&self) -> bool {
        self.diffusion_jacobian.is_some()
    }

    pub(crate) fn analytic_drift_jacobian(&self, t: f64, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        self.drift_jacobian.as_ref().map(|j| j(t, x))
    }

    pub(crate) fn analytic_diffusion_jacobian(
        &self,
        t: f64,
        x: &DVector<f64>,
    ) -> Option<DMatrix<f64>> {
        self.diffusion_jacobian.as_ref().map(|j| j(t, x))
    }

    /// Largest `|f_r(t, x)|` over the algebraic rows.
    pub fn constraint_residual(&self, t: f64, x: &DVector<f64>) -> f64 {
        if self.algebraic_rows.is_empty() {
            return 0.0;
        }
        let fx = self.drift(t, x);
        self.max_over_algebraic(&fx)
    }

    pub(crate) fn max_over_algebraic(&self, v: &DVector<f64>) -> f64 {
        self.algebraic_rows
            .iter()
            .map(|&r| v[r].abs())
            .fold(0.0, f64::max)
    }

    /// Checks the initial value against the constraints and that the
    /// diffusion vanishes in the algebraic rows at `x0`.
    pub fn validate(&self, consistency_tol: f64) -> Result<(), SolverError> {
        if self.algebraic_rows.is_empty() {
            return Ok(());
        }
        let residual = self.constraint_residual(self.t0, &self.x0);
        if !(residual <= consistency_tol) {
            return Err(SolverError::InconsistentInitialValue { residual });
        }
        let gx = self.diffusion(self.t0, &self.x0);
        self.check_noise_free(&gx, consistency_tol)
    }

    pub(crate) fn check_noise_free(&self, g: &DVector<f64>, tol: f64) -> Result<(), SolverError> {
        match self.algebraic_rows.iter().find(|&&r| !(g[r].abs() <= tol)) {
            Some(&row) => Err(SolverError::NoiseInConstraint { row, value: g[row] }),
            None => Ok(()),
        }
    }
}
