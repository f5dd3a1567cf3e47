use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::poly::response_unchecked;
use super::{StabilityError, TestPoint};
use crate::tableau::SrkTableau;

/// Sampling plan for the A-stability probe.
///
/// Real samples lie on rays `k^2 = theta (-2 hhat)`, with `1 - theta`
/// log-spaced in `[margin, 1 - theta_min]` and `|hhat|` log-spaced in
/// `[r_min, r_max]`. Complex samples take `hhat = r e^{i phi}` with `phi`
/// spread over the open left half plane and `k` with `|k|^2 = theta (-2 Re hhat)`
/// and several phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSampler {
    pub ray_density: usize,
    pub radial_density: usize,
    pub complex_samples: usize,
    pub complex_radial_density: usize,
    pub complex_ray_density: usize,
    pub k_phases: usize,
    pub margin: f64,
    pub theta_min: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for ProbeSampler {
    fn default() -> Self {
        Self {
            ray_density: 256,
            radial_density: 512,
            complex_samples: 128,
            complex_radial_density: 64,
            complex_ray_density: 16,
            k_phases: 4,
            margin: 1e-3,
            theta_min: 0.01,
            r_min: 1e-4,
            r_max: 1e3,
        }
    }
}

impl ProbeSampler {
    pub fn validate(&self) -> Result<(), StabilityError> {
        let bad = |m: String| Err(StabilityError::BadRange(m));
        if self.ray_density < 16 || self.radial_density < 16 || self.complex_samples < 16 {
            return bad("probe densities must be at least 16".into());
        }
        if self.complex_radial_density == 0 || self.complex_ray_density == 0 || self.k_phases == 0 {
            return bad("complex sampling densities must be positive".into());
        }
        if !(self.margin > 0.0 && self.theta_min > 0.0 && self.margin + self.theta_min < 1.0) {
            return bad(format!(
                "need 0 < margin, 0 < theta_min and margin + theta_min < 1 (got {}, {})",
                self.margin, self.theta_min
            ));
        }
        if !(self.r_min > 0.0 && self.r_min < self.r_max && self.r_max.is_finite()) {
            return bad(format!(
                "radius range [{}, {}] is invalid",
                self.r_min, self.r_max
            ));
        }
        Ok(())
    }

    /// Ray parameters, ascending towards the boundary `theta = 1 - margin`.
    fn thetas(&self, n: usize) -> Vec<f64> {
        let lo = self.margin.ln();
        let hi = (1.0 - self.theta_min).ln();
        (0..n)
            .map(|i| {
                let u = if n == 1 {
                    1.0
                } else {
                    i as f64 / (n - 1) as f64
                };
                1.0 - (hi + (lo - hi) * u).exp()
            })
            .collect()
    }

    /// Radii, descending.
    fn radii(&self, n: usize) -> Vec<f64> {
        let (lo, hi) = (self.r_min.ln(), self.r_max.ln());
        (0..n)
            .map(|i| {
                let u = if n == 1 {
                    0.0
                } else {
                    i as f64 / (n - 1) as f64
                };
                (hi + (lo - hi) * u).exp()
            })
            .collect()
    }

    /// Real sample points in scan order: radius descending, then `theta`
    /// ascending.
    pub fn real_points(&self) -> Vec<TestPoint> {
        let thetas = self.thetas(self.ray_density);
        let mut out = Vec::with_capacity(self.radial_density * thetas.len());
        for r in self.radii(self.radial_density) {
            for &th in &thetas {
                out.push(TestPoint::real(-r, 2.0 * th * r));
            }
        }
        out
    }

    /// Complex sample points in scan order: radius, `hhat` phase, `theta`,
    /// `k` phase.
    pub fn complex_points(&self) -> Vec<TestPoint> {
        let thetas = self.thetas(self.complex_ray_density);
        let radii = self.radii(self.complex_radial_density);
        let m = self.complex_samples;
        let mut out = Vec::with_capacity(radii.len() * m * thetas.len() * self.k_phases);
        for &r in &radii {
            for p in 0..m {
                let phi = 0.5 * PI + PI * (p as f64 + 0.5) / m as f64;
                let hhat = Complex64::from_polar(r, phi);
                for &th in &thetas {
                    let kmod = (th * -2.0 * hhat.re).sqrt();
                    for q in 0..self.k_phases {
                        let psi = 2.0 * PI * q as f64 / self.k_phases as f64;
                        out.push(TestPoint::new(hhat, Complex64::from_polar(kmod, psi)));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeVerdict {
    /// No sampled point reached gain 1. A sampling certificate only.
    CertifiedSamplePass,
    Counterexample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub hhat_re: f64,
    pub hhat_im: f64,
    pub k_re: f64,
    pub k_im: f64,
}

impl From<TestPoint> for PointReport {
    fn from(p: TestPoint) -> Self {
        Self {
            hhat_re: p.hhat.re,
            hhat_im: p.hhat.im,
            k_re: p.k.re,
            k_im: p.k.im,
        }
    }
}

impl PointReport {
    pub fn point(&self) -> TestPoint {
        TestPoint::new(
            Complex64::new(self.hhat_re, self.hhat_im),
            Complex64::new(self.k_re, self.k_im),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub point: PointReport,
    /// `+inf` when a stage denominator vanishes at the point.
    pub gain: f64,
}

/// Outcome over one sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub samples: usize,
    pub max_gain: f64,
    pub worst_point: PointReport,
    pub counterexample: Option<Finding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub verdict: ProbeVerdict,
    pub max_gain: f64,
    pub worst_point: PointReport,
    pub samples: usize,
    /// First point in scan order with gain at least 1, real samples first.
    pub counterexample: Option<Finding>,
    pub real: ProbeSummary,
    pub complex: ProbeSummary,
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        self.verdict == ProbeVerdict::CertifiedSamplePass
    }
}

fn scan(t: &SrkTableau, points: &[TestPoint]) -> ProbeSummary {
    let gains: Vec<f64> = points
        .par_iter()
        .map(|&pt| match response_unchecked(t, pt) {
            Ok(p) => p.mean_square(),
            Err(_) => f64::INFINITY,
        })
        .collect();
    let mut worst = 0;
    for (i, &g) in gains.iter().enumerate() {
        // NaN ranks as worst so it cannot hide
        if g > gains[worst] || (g.is_nan() && !gains[worst].is_nan()) {
            worst = i;
        }
    }
    let counterexample = gains.iter().position(|&g| !(g < 1.0)).map(|i| Finding {
        point: points[i].into(),
        gain: gains[i],
    });
    ProbeSummary {
        samples: points.len(),
        max_gain: gains[worst],
        worst_point: points[worst].into(),
        counterexample,
    }
}

/// Samples points strictly inside the mean-square stability domain of the
/// test equation and reports the first one whose gain is at least 1.
pub fn a_stability_probe(
    t: &SrkTableau,
    sampler: &ProbeSampler,
) -> Result<ProbeReport, StabilityError> {
    sampler.validate()?;
    t.require_admissible()?;
    let real = scan(t, &sampler.real_points());
    let complex = scan(t, &sampler.complex_points());
    let counterexample = real.counterexample.or(complex.counterexample);
    let (max_gain, worst_point) = if complex.max_gain > real.max_gain || real.max_gain.is_nan() {
        (complex.max_gain, complex.worst_point)
    } else {
        (real.max_gain, real.worst_point)
    };
    Ok(ProbeReport {
        verdict: if counterexample.is_some() {
            ProbeVerdict::Counterexample
        } else {
            ProbeVerdict::CertifiedSamplePass
        },
        max_gain,
        worst_point,
        samples: real.samples + complex.samples,
        counterexample,
        real,
        complex,
    })
}
