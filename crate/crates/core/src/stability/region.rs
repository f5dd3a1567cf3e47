use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::poly::response_unchecked;
use super::{StabilityError, TestPoint};
use crate::solver::format_float;
use crate::tableau::SrkTableau;

/// Real `hhat`–`k^2` rectangle sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityGrid {
    pub hhat_axis: Vec<f64>,
    pub ksq_axis: Vec<f64>,
    /// Row-major: `gain[i * ksq_axis.len() + j]` belongs to
    /// `(hhat_axis[i], ksq_axis[j])`. Stage singularities hold `+inf`.
    pub gain: Vec<f64>,
    pub stable_mask: Vec<bool>,
}

impl StabilityGrid {
    pub fn gain_at(&self, i: usize, j: usize) -> f64 {
        self.gain[i * self.ksq_axis.len() + j]
    }

    pub fn stable_at(&self, i: usize, j: usize) -> bool {
        self.stable_mask[i * self.ksq_axis.len() + j]
    }

    pub fn len(&self) -> usize {
        self.gain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gain.is_empty()
    }

    /// Iterates `(hhat, ksq, gain, stable)` in row-major order.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64, bool)> + '_ {
        let nk = self.ksq_axis.len();
        self.gain.iter().enumerate().map(move |(idx, &g)| {
            (
                self.hhat_axis[idx / nk],
                self.ksq_axis[idx % nk],
                g,
                self.stable_mask[idx],
            )
        })
    }

    /// CSV with header `hhat,ksq,gain,stable`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), StabilityError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["hhat", "ksq", "gain", "stable"])?;
        for (h, k, g, s) in self.points() {
            out.write_record([
                format_float(h),
                format_float(k),
                format_float(g),
                s.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Evaluates the mean-square gain on `n_hhat x n_ksq` grid points spanning
/// both ranges inclusively.
pub fn region_grid(
    t: &SrkTableau,
    hhat_range: (f64, f64),
    ksq_range: (f64, f64),
    resolution: (usize, usize),
) -> Result<StabilityGrid, StabilityError> {
    let (h0, h1) = hhat_range;
    let (k0, k1) = ksq_range;
    let (nh, nk) = resolution;
    if !(h0.is_finite() && h1.is_finite() && h0 < h1) {
        return Err(StabilityError::BadRange(format!(
            "hhat range [{h0}, {h1}] is empty or not finite"
        )));
    }
    if !(k0.is_finite() && k1.is_finite() && k0 < k1) {
        return Err(StabilityError::BadRange(format!(
            "k^2 range [{k0}, {k1}] is empty or not finite"
        )));
    }
    if k0 < 0.0 {
        return Err(StabilityError::BadRange(format!(
            "k^2 range starts at {k0} < 0"
        )));
    }
    if nh < 2 || nk < 2 {
        return Err(StabilityError::BadRange(format!(
            "resolution {nh}x{nk} is below 2 per axis"
        )));
    }
    t.require_admissible()?;
    let hhat_axis = axis(h0, h1, nh);
    let ksq_axis = axis(k0, k1, nk);
    let rows: Vec<Vec<f64>> = hhat_axis
        .par_iter()
        .map(|&h| {
            ksq_axis
                .iter()
                .map(
                    |&ksq| match response_unchecked(t, TestPoint::real(h, ksq)) {
                        Ok(p) => p.mean_square(),
                        Err(_) => f64::INFINITY,
                    },
                )
                .collect()
        })
        .collect();
    let gain: Vec<f64> = rows.into_iter().flatten().collect();
    let stable_mask = gain.iter().map(|&g| g < 1.0).collect();
    Ok(StabilityGrid {
        hhat_axis,
        ksq_axis,
        gain,
        stable_mask,
    })
}
