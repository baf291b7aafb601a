//! Source counting (none / one / two) and two-source peak extraction.

pub mod dip;
pub mod hmm;

pub use dip::{dip_statistic, DipResult};
pub use hmm::{hmm_step, HmmParams, SourceCount, SourceCountState};

use crate::error::{Error, Result};
use crate::localization::{peak_confidence, DoaEstimate, SpatialSpectrum};
use crate::num::{circular_distance, Real};

/// Minimum separation between the two reported sources, radians.
pub const MIN_PEAK_SEPARATION: f64 = 20.0 * std::f64::consts::PI / 180.0;
/// Second peak must reach this fraction of the main peak.
pub const MIN_PEAK_RATIO: f64 = 0.1;

/// Indices of circular local maxima. Plateaus report their first point.
pub fn local_maxima<T: Real>(power: &[T]) -> Vec<usize> {
    let n = power.len();
    if n < 3 {
        return (0..n).filter(|&i| power.iter().all(|p| *p <= power[i])).take(1).collect();
    }
    (0..n)
        .filter(|&i| {
            let prev = power[(i + n - 1) % n];
            let next = power[(i + 1) % n];
            power[i] > prev && power[i] >= next
        })
        .collect()
}

/// The two strongest sufficiently separated peaks of the smoothed spectrum.
pub fn top_two_sources<T: Real>(
    spectrum: &SpatialSpectrum<T>,
    frame_index: usize,
) -> Result<(DoaEstimate<T>, DoaEstimate<T>)> {
    let grid = spectrum.theta_grid();
    let power = spectrum.smoothed_power();
    let total = power.iter().fold(T::zero(), |a, b| a + *b);
    if !(total > T::zero()) {
        return Err(Error::AllZeroSpectrum);
    }
    let mean = total / T::of(power.len() as f64);
    let mut peaks = local_maxima(power);
    // strongest first, ties to the smaller angle
    peaks.sort_by(|&a, &b| {
        power[b]
            .partial_cmp(&power[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(grid[a].partial_cmp(&grid[b]).unwrap_or(std::cmp::Ordering::Equal))
    });
    let &main = peaks.first().ok_or(Error::NoSecondPeak)?;
    let second = peaks[1..]
        .iter()
        .copied()
        .find(|&i| {
            circular_distance(grid[i], grid[main]) >= T::of(MIN_PEAK_SEPARATION) - T::of(1e-9)
                && power[i] >= T::of(MIN_PEAK_RATIO) * power[main]
        })
        .ok_or(Error::NoSecondPeak)?;
    let est = |i: usize| DoaEstimate {
        frame_index,
        theta_hat: grid[i],
        peak_power: power[i],
        confidence: peak_confidence(power[i] / mean),
    };
    Ok((est(main), est(second)))
}
