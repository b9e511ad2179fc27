//! Interacting against single-particle expansion at a matched initial width
//! and effective temperature.
//!
//! The single-particle side uses the closed-form width
//! `σ(t)² = σ₀² + 4⟨v²⟩t²` (lengths in `1/k_L`, times in `ħ/E_R`), sampled at
//! the same times as the mean-field run and fitted over the same window.

use alloc::vec::Vec;

use crate::bands::{solve_bands, BlochProblem, ZoneMapping};
use crate::transport::{populated_bands, velocity_moments, weighted_linear_fit, TransportError};

/// Rates are fitted over the samples after this fraction of the run.
pub const LATE_WINDOW_START: f64 = 0.5;
pub const BAND_POINTS: usize = 513;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CrossoverError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("need at least four samples in the late window, got {0}")]
    Samples(usize),
    #[error("times and widths differ in length")]
    Shape,
    #[error("no temperature reproduces a late-window rate of {0}")]
    Calibration(f64),
}

/// `⟨v²⟩` [v_R²] of a Maxwell–Boltzmann cloud loaded adiabatically at `depth`.
pub fn mean_square_velocity(depth: f64, temperature: f64, cutoff: usize) -> Result<f64, CrossoverError> {
    let prob = BlochProblem::uniform(depth, cutoff, BAND_POINTS).map_err(TransportError::from)?;
    let bs = solve_bands(&prob, populated_bands(temperature)).map_err(TransportError::from)?;
    Ok(velocity_moments(&bs, &ZoneMapping::for_bands(&bs), temperature)?.mean_square)
}

pub fn ballistic_widths(mean_square: f64, sigma0: f64, times: &[f64]) -> Vec<f64> {
    times
        .iter()
        .map(|t| (sigma0 * sigma0 + 4.0 * mean_square * t * t).sqrt())
        .collect()
}

/// Unweighted dσ/dt [v_R] over the late part of a series.
pub fn late_rate(times: &[f64], sigma: &[f64]) -> Result<f64, CrossoverError> {
    if times.len() != sigma.len() {
        return Err(CrossoverError::Shape);
    }
    let first = (times.len() as f64 * LATE_WINDOW_START) as usize;
    let (x, y) = (&times[first..], &sigma[first..]);
    if x.len() < 4 {
        return Err(CrossoverError::Samples(x.len()));
    }
    let fit = weighted_linear_fit(x, y, &alloc::vec![1.0; x.len()]).ok_or(CrossoverError::Samples(x.len()))?;
    Ok(0.5 * fit.slope)
}

/// Free-space temperature whose ballistic widths, sampled like `times` from
/// `sigma0`, give the late-window rate `target` [v_R].
pub fn calibrate_temperature(sigma0: f64, times: &[f64], target: f64) -> Result<f64, CrossoverError> {
    let rate = |t: f64| late_rate(times, &ballistic_widths(t, sigma0, times));
    let (mut lo, mut hi) = (1e-8_f64, 10.0_f64);
    if !(target > rate(lo)? && target < rate(hi)?) {
        return Err(CrossoverError::Calibration(target));
    }
    // the late-window rate grows monotonically with T; bisect in log T
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if rate(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-13 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Late-window rates of an interacting run and of the single-particle model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub depth: f64,
    pub sigma0: f64,
    /// [v_R]
    pub interacting: f64,
    /// [v_R]
    pub single_particle: f64,
}

impl Comparison {
    pub fn ratio(&self) -> f64 {
        self.interacting / self.single_particle
    }
}

/// Compare a mean-field series (first sample is the initial width) with the
/// single-particle cloud at `temperature`.
pub fn compare(
    depth: f64,
    temperature: f64,
    times: &[f64],
    sigma: &[f64],
    cutoff: usize,
) -> Result<Comparison, CrossoverError> {
    if times.len() != sigma.len() || times.is_empty() {
        return Err(CrossoverError::Shape);
    }
    let sigma0 = sigma[0];
    let v2 = mean_square_velocity(depth, temperature, cutoff)?;
    Ok(Comparison {
        depth,
        sigma0,
        interacting: late_rate(times, sigma)?,
        single_particle: late_rate(times, &ballistic_widths(v2, sigma0, times))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn times() -> Vec<f64> {
        (0..=40).map(|i| 5.0 * i as f64).collect()
    }

    #[test]
    fn calibration_inverts_the_late_rate() {
        let t = times();
        for &temp in &[0.01, 0.06, 0.3] {
            let target = late_rate(&t, &ballistic_widths(temp, 9.0, &t)).unwrap();
            let back = calibrate_temperature(9.0, &t, target).unwrap();
            assert!((back / temp - 1.0).abs() < 1e-9, "{back} vs {temp}");
            // the window has not reached the asymptote
            assert!(target < temp.sqrt());
        }
        assert!(calibrate_temperature(9.0, &t, 100.0).is_err());
    }

    #[test]
    fn free_comparison_is_an_identity() {
        let t = times();
        let sigma = ballistic_widths(0.06, 9.0, &t);
        let c = compare(0.0, 0.06, &t, &sigma, 16).unwrap();
        assert!((c.ratio() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn late_rate_needs_samples() {
        assert!(matches!(late_rate(&[0.0, 1.0], &[1.0, 2.0]), Err(CrossoverError::Samples(1))));
        assert!(matches!(late_rate(&[0.0], &[1.0, 2.0]), Err(CrossoverError::Shape)));
    }
}
