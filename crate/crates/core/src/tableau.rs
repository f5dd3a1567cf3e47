//! Extended Butcher tableaus for stiffly accurate SRK schemes.
//!
//! A scheme with `s` stages is described by the drift matrix `A`, the three
//! diffusion matrices `B1`, `B2`, `B3` (weighting `I_(1)`, `I_(1,1)/sqrt(h)`
//! and `sqrt(h)` respectively) and the abscissae `c = A e`. The step output
//! is the last stage, so the last rows of the matrices (`alpha`, `beta_k`)
//! carry the quadrature weights used by the strong order conditions.

use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest allowed deviation between a supplied `c` and the row sums of `A`.
pub const ABSCISSAE_TOLERANCE: f64 = 1e-12;

/// Relative tolerance of the determinant test used for nonsingularity.
pub const DEFAULT_SINGULARITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TableauError {
    #[error("tableau must have at least one stage")]
    Empty,
    #[error("{what} has shape {rows}x{cols}, expected {s}x{s}")]
    DimensionMismatch {
        what: &'static str,
        rows: usize,
        cols: usize,
        s: usize,
    },
    #[error("{what} has length {len}, expected {s}")]
    LengthMismatch {
        what: &'static str,
        len: usize,
        s: usize,
    },
    #[error("{what} contains a non-finite entry at ({row}, {col})")]
    NonFinite {
        what: &'static str,
        row: usize,
        col: usize,
    },
    #[error("c[{stage}] = {found} differs from the row sum of A ({expected})")]
    AbscissaeMismatch {
        stage: usize,
        expected: f64,
        found: f64,
    },
    #[error("tableau is not admissible for order checks: {0}")]
    StructureViolation(String),
}

/// Coefficients `(A, B1, B2, B3, c)` of an `s`-stage stiffly accurate SRK scheme.
///
/// Instances are validated on construction (square `s x s` matrices, finite
/// entries, `c = A e`) and immutable afterwards. Equality and hashing compare
/// the stored coefficients exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableauJson", into = "TableauJson")]
pub struct SrkTableau {
    a: DMatrix<f64>,
    b1: DMatrix<f64>,
    b2: DMatrix<f64>,
    b3: DMatrix<f64>,
    c: DVector<f64>,
}

impl Eq for SrkTableau {}

impl Hash for SrkTableau {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.stages().hash(state);
        for m in [&self.a, &self.b1, &self.b2, &self.b3] {
            for v in m.iter() {
                // +0.0 and -0.0 compare equal and must hash alike
                (v + 0.0).to_bits().hash(state);
            }
        }
    }
}

fn check_square(what: &'static str, m: &DMatrix<f64>, s: usize) -> Result<(), TableauError> {
    if m.nrows() != s || m.ncols() != s {
        return Err(TableauError::DimensionMismatch {
            what,
            rows: m.nrows(),
            cols: m.ncols(),
            s,
        });
    }
    for i in 0..s {
        for j in 0..s {
            if !m[(i, j)].is_finite() {
                return Err(TableauError::NonFinite {
                    what,
                    row: i,
                    col: j,
                });
            }
        }
    }
    Ok(())
}

impl SrkTableau {
    /// Builds a tableau and derives `c` as the row sums of `a`.
    pub fn new(
        a: DMatrix<f64>,
        b1: DMatrix<f64>,
        b2: DMatrix<f64>,
        b3: DMatrix<f64>,
    ) -> Result<Self, TableauError> {
        let s = a.nrows();
        if s == 0 {
            return Err(TableauError::Empty);
        }
        check_square("A", &a, s)?;
        check_square("B1", &b1, s)?;
        check_square("B2", &b2, s)?;
        check_square("B3", &b3, s)?;
        let c = row_sums(&a);
        Ok(Self { a, b1, b2, b3, c })
    }

    /// Builds a tableau with explicit abscissae, which must equal `A e`.
    pub fn with_abscissae(
        a: DMatrix<f64>,
        b1: DMatrix<f64>,
        b2: DMatrix<f64>,
        b3: DMatrix<f64>,
        c: DVector<f64>,
    ) -> Result<Self, TableauError> {
        let t = Self::new(a, b1, b2, b3)?;
        if c.len() != t.stages() {
            return Err(TableauError::LengthMismatch {
                what: "c",
                len: c.len(),
                s: t.stages(),
            });
        }
        for (i, (&found, &expected)) in c.iter().zip(t.c.iter()).enumerate() {
            if !found.is_finite() {
                return Err(TableauError::NonFinite {
                    what: "c",
                    row: i,
                    col: 0,
                });
            }
            if (found - expected).abs() > ABSCISSAE_TOLERANCE {
                return Err(TableauError::AbscissaeMismatch {
                    stage: i,
                    expected,
                    found,
                });
            }
        }
        Ok(t)
    }

    /// Builds a tableau from lower-triangular row lists. Row `i` may hold at
    /// most `s` entries; missing trailing entries are zero.
    pub fn from_lower_rows(
        a: &[&[f64]],
        b1: &[&[f64]],
        b2: &[&[f64]],
        b3: &[&[f64]],
    ) -> Result<Self, TableauError> {
        let s = a.len();
        Self::new(
            rows_to_matrix("A", a, s)?,
            rows_to_matrix("B1", b1, s)?,
            rows_to_matrix("B2", b2, s)?,
            rows_to_matrix("B3", b3, s)?,
        )
    }

    pub fn stages(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b1(&self) -> &DMatrix<f64> {
        &self.b1
    }

    pub fn b2(&self) -> &DMatrix<f64> {
        &self.b2
    }

    pub fn b3(&self) -> &DMatrix<f64> {
        &self.b3
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    /// Diffusion matrix `B^(k)` for `k` in `1..=3`.
    pub fn b(&self, k: usize) -> &DMatrix<f64> {
        match k {
            1 => &self.b1,
            2 => &self.b2,
            3 => &self.b3,
            _ => panic!("diffusion matrix index must be 1, 2 or 3, got {k}"),
        }
    }

    /// Last row of `A`.
    pub fn alpha(&self) -> DVector<f64> {
        last_row(&self.a)
    }

    /// Last row of `B^(k)`.
    pub fn beta(&self, k: usize) -> DVector<f64> {
        last_row(self.b(k))
    }

    pub fn structure(&self) -> StructureReport {
        self.structure_with_tolerance(DEFAULT_SINGULARITY_TOLERANCE)
    }

    /// Structural flags; `rel_tol` scales the determinant test (see
    /// [`is_nonsingular`]).
    pub fn structure_with_tolerance(&self, rel_tol: f64) -> StructureReport {
        let s = self.stages();
        let diagonally_implicit = is_lower(&self.a, 0) && is_lower(&self.b3, 0);
        let noise_explicit = is_lower(&self.b1, 1) && is_lower(&self.b2, 1);
        let explicit_first_stage = [&self.a, &self.b1, &self.b2, &self.b3]
            .iter()
            .all(|m| m.row(0).iter().all(|&v| v == 0.0));
        let singly_diagonal = (1..s).all(|i| self.a[(i, i)] == self.a[(0, 0)]);

        let (sdae_applicable, sdae_reason) = if is_nonsingular(&self.a, rel_tol) {
            (true, "A is nonsingular".to_string())
        } else if explicit_first_stage {
            let sub = self.a.view((1, 1), (s - 1, s - 1)).into_owned();
            if is_nonsingular(&sub, rel_tol) {
                (
                    true,
                    "first stage is explicit and A[2..s, 2..s] is nonsingular".to_string(),
                )
            } else {
                (
                    false,
                    "first stage is explicit but A[2..s, 2..s] is singular".to_string(),
                )
            }
        } else {
            (
                false,
                "A is singular and the first stage is not explicit".to_string(),
            )
        };

        StructureReport {
            diagonally_implicit,
            noise_explicit,
            sdae_applicable,
            sdae_reason,
            explicit_first_stage,
            singly_diagonal,
        }
    }

    /// Fails unless the matrices have the diagonally implicit, noise-explicit
    /// shape the order conditions and stage solvers assume.
    pub fn require_admissible(&self) -> Result<StructureReport, TableauError> {
        let report = self.structure();
        if !report.diagonally_implicit {
            return Err(TableauError::StructureViolation(
                "A and B3 must be lower triangular".into(),
            ));
        }
        if !report.noise_explicit {
            return Err(TableauError::StructureViolation(
                "B1 and B2 must be strictly lower triangular".into(),
            ));
        }
        Ok(report)
    }
}

impl fmt::Display for SrkTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.stages();
        for i in 0..s {
            write!(f, "{:>10.6} |", self.c[i])?;
            for m in [&self.a, &self.b1, &self.b2, &self.b3] {
                for j in 0..s {
                    write!(f, " {:>10.6}", m[(i, j)])?;
                }
                write!(f, " |")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn rows_to_matrix(
    what: &'static str,
    rows: &[&[f64]],
    s: usize,
) -> Result<DMatrix<f64>, TableauError> {
    if rows.len() != s {
        return Err(TableauError::DimensionMismatch {
            what,
            rows: rows.len(),
            cols: s,
            s,
        });
    }
    let mut m = DMatrix::zeros(s, s);
    for (i, row) in rows.iter().enumerate() {
        if row.len() > s {
            return Err(TableauError::DimensionMismatch {
                what,
                rows: s,
                cols: row.len(),
                s,
            });
        }
        for (j, &v) in row.iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

fn row_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.sum()))
}

fn last_row(m: &DMatrix<f64>) -> DVector<f64> {
    m.row(m.nrows() - 1).transpose()
}

/// True when every entry above the diagonal offset is zero: `offset = 0`
/// tests lower triangularity, `offset = 1` strict lower triangularity.
fn is_lower(m: &DMatrix<f64>, offset: usize) -> bool {
    let s = m.nrows();
    (0..s).all(|i| (0..s).filter(|&j| j + offset > i).all(|j| m[(i, j)] == 0.0))
}

/// Determinant test scaled by the largest entry: the matrix counts as
/// nonsingular when `|det| > rel_tol * max|m_ij|^n`. Empty matrices are
/// nonsingular; an all-zero matrix is singular.
pub fn is_nonsingular(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    let n = m.nrows();
    if n == 0 {
        return true;
    }
    let scale = m.amax();
    if scale == 0.0 {
        return false;
    }
    m.clone().determinant().abs() > rel_tol * scale.powi(n as i32)
}

/// Structural properties of a tableau.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureReport {
    /// `A` and `B3` are lower triangular.
    pub diagonally_implicit: bool,
    /// `B1` and `B2` are strictly lower triangular.
    pub noise_explicit: bool,
    /// Usable with a singular mass matrix.
    pub sdae_applicable: bool,
    pub sdae_reason: String,
    /// First rows of `A`, `B1`, `B2`, `B3` vanish.
    pub explicit_first_stage: bool,
    /// All diagonal entries of `A` coincide.
    pub singly_diagonal: bool,
}

pub fn validate_structure(t: &SrkTableau) -> StructureReport {
    t.structure()
}

/// Strong order targeted by a set of conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StrongOrder {
    Half,
    One,
}

impl StrongOrder {
    pub fn value(self) -> f64 {
        match self {
            StrongOrder::Half => 0.5,
            StrongOrder::One => 1.0,
        }
    }
}

impl fmt::Display for StrongOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrongOrder::Half => f.write_str("0.5"),
            StrongOrder::One => f.write_str("1.0"),
        }
    }
}

impl std::str::FromStr for StrongOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "0.5" | ".5" => Ok(StrongOrder::Half),
            "1" | "1.0" => Ok(StrongOrder::One),
            other => Err(format!(
                "unsupported strong order '{other}', expected 0.5 or 1.0"
            )),
        }
    }
}

impl Serialize for StrongOrder {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for StrongOrder {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        if v == 0.5 {
            Ok(StrongOrder::Half)
        } else if v == 1.0 {
            Ok(StrongOrder::One)
        } else {
            Err(serde::de::Error::custom(format!(
                "unsupported strong order {v}"
            )))
        }
    }
}

/// Residuals of the strong order conditions for one tableau.
///
/// Keys are `cond01` ... `cond14` for the order 1.0 conditions plus
/// `abscissae` for `c = A e`. The order 0.5 set uses `cond01` ... `cond04`
/// (shared with order 1.0) and `cond05_half` for the combined condition
/// `b1' B1 e + b2' B2 e / 2 + b3' B3 e = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub order_tested: StrongOrder,
    pub residuals: BTreeMap<String, f64>,
    /// `2 b1' B1 e`, reported for order 1.0 only.
    pub lambda: Option<f64>,
    pub max_residual: f64,
}

impl OrderReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }

    pub fn residual(&self, id: &str) -> Option<f64> {
        self.residuals.get(id).copied()
    }
}

fn dot(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    x.dot(y)
}

/// Evaluates the strong order conditions of the requested order.
pub fn order_residuals(t: &SrkTableau, order: StrongOrder) -> Result<OrderReport, TableauError> {
    t.require_admissible()?;
    let s = t.stages();
    let e = DVector::from_element(s, 1.0);
    let alpha = t.alpha();
    let (b1, b2, b3) = (t.beta(1), t.beta(2), t.beta(3));
    let b1e = t.b1() * &e;
    let b2e = t.b2() * &e;
    let b3e = t.b3() * &e;

    let mut residuals = BTreeMap::new();
    let mut put = |id: &str, v: f64| {
        residuals.insert(id.to_string(), v.abs());
    };
    put("cond01", alpha.sum() - 1.0);
    put("cond02", b1.sum() - 1.0);
    put("cond03", b2.sum());
    put("cond04", b3.sum());

    let lambda = match order {
        StrongOrder::Half => {
            put(
                "cond05_half",
                dot(&b1, &b1e) + 0.5 * dot(&b2, &b2e) + dot(&b3, &b3e),
            );
            None
        }
        StrongOrder::One => {
            let lambda = 2.0 * dot(&b1, &b1e);
            let ae = t.a() * &e;
            put("cond05", dot(&b1, &b1e) - 0.5 * lambda);
            put("cond06", dot(&b3, &b3e) + 0.5 * lambda);
            put("cond07", dot(&b2, &b3e) + dot(&b3, &b2e) - (1.0 - lambda));
            put("cond08", dot(&alpha, &b3e));
            put("cond09", dot(&b1, &b3e) + dot(&b3, &b1e));
            put("cond10", dot(&b2, &b2e));
            put("cond11", dot(&b1, &b2e) + dot(&b2, &b1e));
            put("cond12", dot(&b3, &ae));

            let sq = |v: &DVector<f64>| v.component_mul(v);
            let c13 = 2.0 * dot(&b1, &b1e.component_mul(&b2e))
                + 2.0 * dot(&b1, &b1e.component_mul(&b3e))
                + dot(&b2, &sq(&b1e))
                + dot(&b2, &sq(&b2e))
                + dot(&b2, &b2e.component_mul(&b3e))
                + dot(&b3, &sq(&b1e))
                + 0.5 * dot(&b3, &sq(&b2e))
                + dot(&b3, &sq(&b3e));
            put("cond13", c13);

            let (m1, m2, m3) = (t.b1(), t.b2(), t.b3());
            let c14 = dot(&b1, &(m1 * &b2e))
                + dot(&b1, &(m2 * &b1e))
                + dot(&b1, &(m1 * &b3e))
                + dot(&b1, &(m3 * &b1e))
                + dot(&b2, &(m1 * &b1e))
                + dot(&b2, &(m2 * &b2e))
                + 0.5 * dot(&b2, &(m2 * &b3e))
                + 0.5 * dot(&b2, &(m3 * &b2e))
                + dot(&b3, &(m1 * &b1e))
                + 0.5 * dot(&b3, &(m2 * &b2e))
                + dot(&b3, &(m3 * &b3e));
            put("cond14", c14);

            put("abscissae", (t.c() - &ae).amax());
            Some(lambda)
        }
    };

    let max_residual = residuals.values().copied().fold(0.0, f64::max);
    Ok(OrderReport {
        order_tested: order,
        residuals,
        lambda,
        max_residual,
    })
}

/// Highest strong order whose conditions hold, together with both reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderVerdict {
    pub order: Option<StrongOrder>,
    pub tolerance: f64,
    pub half: OrderReport,
    pub one: OrderReport,
}

impl OrderVerdict {
    pub fn meets(&self, order: StrongOrder) -> bool {
        self.order.is_some_and(|o| o >= order)
    }
}

pub fn effective_order(t: &SrkTableau, tol: f64) -> Result<OrderVerdict, TableauError> {
    assert!(tol > 0.0, "tolerance must be positive");
    let half = order_residuals(t, StrongOrder::Half)?;
    let one = order_residuals(t, StrongOrder::One)?;
    let order = if one.holds(tol) {
        Some(StrongOrder::One)
    } else if half.holds(tol) {
        Some(StrongOrder::Half)
    } else {
        None
    };
    Ok(OrderVerdict {
        order,
        tolerance: tol,
        half,
        one,
    })
}

/// Wire format: row-major nested arrays, `c` optional.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableauJson {
    pub s: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B1")]
    pub b1: Vec<Vec<f64>>,
    #[serde(rename = "B2")]
    pub b2: Vec<Vec<f64>>,
    #[serde(rename = "B3")]
    pub b3: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
}

fn nested_to_matrix(
    what: &'static str,
    rows: &[Vec<f64>],
    s: usize,
) -> Result<DMatrix<f64>, TableauError> {
    if rows.len() != s || rows.iter().any(|r| r.len() != s) {
        let cols = rows.iter().map(Vec::len).find(|&l| l != s).unwrap_or(s);
        return Err(TableauError::DimensionMismatch {
            what,
            rows: rows.len(),
            cols,
            s,
        });
    }
    Ok(DMatrix::from_fn(s, s, |i, j| rows[i][j]))
}

fn matrix_to_nested(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl TryFrom<TableauJson> for SrkTableau {
    type Error = TableauError;

    fn try_from(j: TableauJson) -> Result<Self, Self::Error> {
        if j.s == 0 {
            return Err(TableauError::Empty);
        }
        let a = nested_to_matrix("A", &j.a, j.s)?;
        let b1 = nested_to_matrix("B1", &j.b1, j.s)?;
        let b2 = nested_to_matrix("B2", &j.b2, j.s)?;
        let b3 = nested_to_matrix("B3", &j.b3, j.s)?;
        match j.c {
            Some(c) => SrkTableau::with_abscissae(a, b1, b2, b3, DVector::from_vec(c)),
            None => SrkTableau::new(a, b1, b2, b3),
        }
    }
}

impl From<SrkTableau> for TableauJson {
    fn from(t: SrkTableau) -> Self {
        TableauJson {
            s: t.stages(),
            a: matrix_to_nested(&t.a),
            b1: matrix_to_nested(&t.b1),
            b2: matrix_to_nested(&t.b2),
            b3: matrix_to_nested(&t.b3),
            c: Some(t.c.iter().copied().collect()),
        }
    }
}
