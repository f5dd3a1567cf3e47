use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{StabilityError, TestPoint};
use crate::tableau::SrkTableau;

/// Coefficients below this fraction of the largest one are dropped.
pub const TRUNCATION_TOLERANCE: f64 = 1e-15;
/// A stage denominator counts as zero below this relative size.
pub const STAGE_SINGULARITY_TOLERANCE: f64 = 1e-14;

/// Polynomial `c0 + c1 xi + ... + cD xi^D` in a standard normal `xi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiPolynomial {
    coeffs: Vec<Complex64>,
}

impl XiPolynomial {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    pub fn constant(c: Complex64) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient of `xi^j`, zero beyond the degree.
    pub fn coeff(&self, j: usize) -> Complex64 {
        self.coeffs.get(j).copied().unwrap_or_default()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, xi: f64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * xi + c)
    }

    /// `E|p(xi)|^2` for `xi ~ N(0, 1)`.
    pub fn mean_square(&self) -> f64 {
        let n = self.coeffs.len();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                if (i + j) % 2 == 0 {
                    total += (self.coeffs[i] * self.coeffs[j].conj()).re * gaussian_moment(i + j);
                }
            }
        }
        total
    }

    /// Zeroes coefficients that are negligible relative to the largest and
    /// strips trailing zeros.
    pub fn truncate(&mut self, rel_tol: f64) {
        let max = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for c in &mut self.coeffs {
            if c.norm() < rel_tol * max {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        self.trim();
    }

    fn trim(&mut self) {
        while self.coeffs.len() > 1 && *self.coeffs.last().unwrap() == Complex64::new(0.0, 0.0) {
            self.coeffs.pop();
        }
    }

    fn add_product(&mut self, w: &[Complex64; 3], other: &XiPolynomial) {
        let need = other.coeffs.len() + 2;
        if self.coeffs.len() < need {
            self.coeffs.resize(need, Complex64::new(0.0, 0.0));
        }
        for (m, &wm) in w.iter().enumerate() {
            if wm == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (j, &c) in other.coeffs.iter().enumerate() {
                self.coeffs[j + m] += wm * c;
            }
        }
    }

    fn scale(&mut self, f: Complex64) {
        for c in &mut self.coeffs {
            *c *= f;
        }
    }
}

impl fmt::Display for XiPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, c) in self.coeffs.iter().enumerate() {
            if j > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6e}{:+.6e}i)", c.re, c.im)?;
            match j {
                0 => {}
                1 => write!(f, " xi")?,
                _ => write!(f, " xi^{j}")?,
            }
        }
        Ok(())
    }
}

/// `E[xi^n]` for a standard normal: zero for odd `n`, `(n-1)!!` otherwise.
pub fn gaussian_moment(n: usize) -> f64 {
    if n % 2 == 1 {
        return 0.0;
    }
    (1..n).step_by(2).map(|k| k as f64).product()
}

/// One-step response of the scheme on `dX = lambda X dt + mu X dW` as a
/// polynomial in the normal sample `xi` (with `X_n = 1`).
pub fn response_polynomial(t: &SrkTableau, pt: TestPoint) -> Result<XiPolynomial, StabilityError> {
    t.require_admissible()?;
    response_unchecked(t, pt)
}

/// [`response_polynomial`] for a tableau already known to be admissible.
pub(crate) fn response_unchecked(
    t: &SrkTableau,
    pt: TestPoint,
) -> Result<XiPolynomial, StabilityError> {
    let s = t.stages();
    let (hh, k) = (pt.hhat, pt.k);
    let zero = Complex64::new(0.0, 0.0);
    let mut stages: Vec<XiPolynomial> = Vec::with_capacity(s);
    for i in 0..s {
        let diag = hh * t.a()[(i, i)] + k * t.b3()[(i, i)];
        let den = Complex64::new(1.0, 0.0) - diag;
        if den.norm() <= STAGE_SINGULARITY_TOLERANCE * (1.0 + diag.norm()) {
            return Err(StabilityError::StageSingular { stage: i + 1 });
        }
        let mut acc = XiPolynomial::constant(Complex64::new(1.0, 0.0));
        for (j, hj) in stages.iter().enumerate() {
            let b2 = t.b2()[(i, j)];
            let w = [
                hh * t.a()[(i, j)] + k * (t.b3()[(i, j)] - 0.5 * b2),
                k * t.b1()[(i, j)],
                k * (0.5 * b2),
            ];
            if w.iter().any(|&c| c != zero) {
                acc.add_product(&w, hj);
            }
        }
        acc.scale(den.inv());
        acc.trim();
        stages.push(acc);
    }
    let mut out = stages.pop().expect("at least one stage");
    out.truncate(TRUNCATION_TOLERANCE);
    Ok(out)
}

/// Mean-square amplification `E|R(hhat, k)|^2` of one step.
pub fn ms_gain(t: &SrkTableau, pt: TestPoint) -> Result<f64, StabilityError> {
    Ok(response_polynomial(t, pt)?.mean_square())
}

/// `e_s^T (I - hhat A)^{-1} e`, computed by a dense solve.
pub fn deterministic_stability(
    t: &SrkTableau,
    hhat: Complex64,
) -> Result<Complex64, StabilityError> {
    let s = t.stages();
    let m = nalgebra::DMatrix::<Complex64>::from_fn(s, s, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        Complex64::new(id, 0.0) - hhat * t.a()[(i, j)]
    });
    let e = nalgebra::DVector::<Complex64>::from_element(s, Complex64::new(1.0, 0.0));
    let x = m
        .lu()
        .solve(&e)
        .ok_or(StabilityError::StageSingular { stage: 0 })?;
    Ok(x[s - 1])
}
