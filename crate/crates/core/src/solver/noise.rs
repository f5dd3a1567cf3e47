use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SolverError;

/// Relative spread allowed between step sizes of increments being merged.
const STEP_MATCH_TOLERANCE: f64 = 1e-12;

/// Wiener increment `I_(1)` over a step of size `h` together with the double
/// integral `I_(1,1) = (I_(1)^2 - h) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseIncrement {
    i1: f64,
    i11: f64,
    h: f64,
}

impl NoiseIncrement {
    pub fn new(i1: f64, h: f64) -> Result<Self, SolverError> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(SolverError::NonpositiveStep { h });
        }
        if !i1.is_finite() {
            return Err(SolverError::NonFiniteIncrement { i1 });
        }
        Ok(Self {
            i1,
            i11: 0.5 * (i1 * i1 - h),
            h,
        })
    }

    /// Increment `sqrt(h) * xi` for a standard normal sample `xi`.
    pub fn from_xi(xi: f64, h: f64) -> Result<Self, SolverError> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(SolverError::NonpositiveStep { h });
        }
        Self::new(h.sqrt() * xi, h)
    }

    pub fn i1(&self) -> f64 {
        self.i1
    }

    pub fn i11(&self) -> f64 {
        self.i11
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// The standard normal sample behind the increment.
    pub fn xi(&self) -> f64 {
        self.i1 / self.h.sqrt()
    }
}

pub fn draw_increments<R: Rng + ?Sized>(
    rng: &mut R,
    h: f64,
) -> Result<NoiseIncrement, SolverError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(SolverError::NonpositiveStep { h });
    }
    let xi: f64 = rng.sample(StandardNormal);
    NoiseIncrement::from_xi(xi, h)
}

/// Draws `n` consecutive increments of size `h`.
pub fn draw_path<R: Rng + ?Sized>(
    rng: &mut R,
    h: f64,
    n: usize,
) -> Result<Vec<NoiseIncrement>, SolverError> {
    (0..n).map(|_| draw_increments(rng, h)).collect()
}

/// Merges contiguous increments of a common step size into one increment
/// over their union. `I_(1,1)` is recomputed from the summed `I_(1)`.
pub fn coarsen_increments(fine: &[NoiseIncrement]) -> Result<NoiseIncrement, SolverError> {
    let first = fine.first().ok_or(SolverError::EmptyInput)?;
    if fine.len() == 1 {
        return Ok(*first);
    }
    let h0 = first.h;
    if let Some(bad) = fine
        .iter()
        .find(|inc| (inc.h - h0).abs() > STEP_MATCH_TOLERANCE * h0)
    {
        return Err(SolverError::MismatchedSteps {
            expected: h0,
            found: bad.h,
        });
    }
    let i1 = fine.iter().map(|inc| inc.i1).sum();
    let h = fine.iter().map(|inc| inc.h).sum();
    NoiseIncrement::new(i1, h)
}

/// Coarsens a fine path by merging consecutive blocks of `factor` increments.
pub fn coarsen_path(
    fine: &[NoiseIncrement],
    factor: usize,
) -> Result<Vec<NoiseIncrement>, SolverError> {
    if factor == 0 || fine.len() % factor != 0 {
        return Err(SolverError::IncompatibleRefinement {
            len: fine.len(),
            factor,
        });
    }
    fine.chunks(factor).map(coarsen_increments).collect()
}

/// Independent generator for one Monte Carlo path: the base seed selects
/// the key and the path index selects the ChaCha stream.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn definition_examples() {
        let inc = NoiseIncrement::from_xi(0.0, 0.3).unwrap();
        assert_eq!(inc.i1(), 0.0);
        assert_eq!(inc.i11(), -0.15);
        let inc = NoiseIncrement::from_xi(1.0, 4.0).unwrap();
        assert_eq!(inc.i1(), 2.0);
        assert_eq!(inc.i11(), 0.0);
    }

    #[test]
    fn rejects_bad_steps() {
        let mut rng = path_rng(1, 0);
        assert!(matches!(
            draw_increments(&mut rng, 0.0),
            Err(SolverError::NonpositiveStep { .. })
        ));
        assert!(matches!(
            draw_increments(&mut rng, -1.0),
            Err(SolverError::NonpositiveStep { .. })
        ));
        assert!(NoiseIncrement::new(1.0, f64::NAN).is_err());
    }

    #[test]
    fn coarsening_examples() {
        let fine = [
            NoiseIncrement::new(1.0, 0.5).unwrap(),
            NoiseIncrement::new(-1.0, 0.5).unwrap(),
        ];
        let c = coarsen_increments(&fine).unwrap();
        assert_eq!((c.i1(), c.h(), c.i11()), (0.0, 1.0, -0.5));

        let single = [NoiseIncrement::new(0.7, 0.25).unwrap()];
        assert_eq!(coarsen_increments(&single).unwrap(), single[0]);
        assert!(matches!(
            coarsen_increments(&[]),
            Err(SolverError::EmptyInput)
        ));

        let mixed = [
            NoiseIncrement::new(1.0, 0.5).unwrap(),
            NoiseIncrement::new(1.0, 0.25).unwrap(),
        ];
        assert!(matches!(
            coarsen_increments(&mixed),
            Err(SolverError::MismatchedSteps { .. })
        ));
    }

    #[test]
    fn coarsen_random_sum() {
        let mut rng = path_rng(11, 3);
        let fine = draw_path(&mut rng, 0.125, 4).unwrap();
        let c = coarsen_increments(&fine).unwrap();
        let sum: f64 = fine.iter().map(|i| i.i1()).sum();
        assert_eq!(c.i1(), sum);
        assert_eq!(c.h(), 0.5);
        assert_eq!(c.i11(), 0.5 * (sum * sum - 0.5));
    }

    #[test]
    fn streams_differ_and_repeat() {
        let a: Vec<f64> = draw_path(&mut path_rng(5, 0), 1.0, 8)
            .unwrap()
            .iter()
            .map(|i| i.i1())
            .collect();
        let b: Vec<f64> = draw_path(&mut path_rng(5, 1), 1.0, 8)
            .unwrap()
            .iter()
            .map(|i| i.i1())
            .collect();
        let a2: Vec<f64> = draw_path(&mut path_rng(5, 0), 1.0, 8)
            .unwrap()
            .iter()
            .map(|i| i.i1())
            .collect();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }

    #[test]
    fn coarsen_path_blocks() {
        let fine = draw_path(&mut path_rng(2, 0), 0.25, 8).unwrap();
        let coarse = coarsen_path(&fine, 4).unwrap();
        assert_eq!(coarse.len(), 2);
        assert!(coarsen_path(&fine, 3).is_err());
    }
}
