//! Steered response power over a beam bank, recursive smoothing and DOA
//! read-out.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::beamformer::BeamBank;
use crate::error::{Error, Result};
use crate::geometry::FrequencyGrid;
use crate::linalg::dot_conj;
use crate::num::{circular_distance, Real, C};

/// Scale of the peak-to-mean confidence mapping.
pub const CONFIDENCE_KAPPA: f64 = 2.0;

/// Multichannel spectrum of one STFT frame, `bins[k][m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSpectrum<T> {
    pub frame_index: usize,
    pub bins: Vec<Vec<C<T>>>,
}

impl<T: Real> FrameSpectrum<T> {
    pub fn new(frame_index: usize, bins: Vec<Vec<C<T>>>) -> Self {
        Self { frame_index, bins }
    }

    /// Builds a frame from per-channel one-sided spectra (`per_channel[m][k]`).
    pub fn from_channels(frame_index: usize, per_channel: &[Vec<C<T>>]) -> Self {
        let num_bins = per_channel.first().map_or(0, Vec::len);
        let bins = (0..num_bins)
            .map(|k| per_channel.iter().map(|ch| ch[k]).collect())
            .collect();
        Self { frame_index, bins }
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn num_channels(&self) -> usize {
        self.bins.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SrpConfig {
    pub low_hz: f64,
    pub high_hz: f64,
    pub phat: bool,
}

impl Default for SrpConfig {
    fn default() -> Self {
        Self {
            low_hz: 100.0,
            high_hz: 7000.0,
            phat: true,
        }
    }
}

impl SrpConfig {
    /// Inclusive bin range covered by the band.
    pub fn bin_range<T: Real>(&self, grid: &FrequencyGrid<T>) -> std::ops::RangeInclusive<usize> {
        let freqs = grid.frequencies();
        let lo = freqs
            .iter()
            .position(|f| f.to_f64_lossy() >= self.low_hz)
            .unwrap_or(freqs.len());
        let hi = freqs
            .iter()
            .rposition(|f| f.to_f64_lossy() <= self.high_hz)
            .unwrap_or(0);
        lo..=hi
    }
}

/// Instantaneous SRP for every beam in the bank.
pub fn frame_srp<T: Real>(
    frame: &FrameSpectrum<T>,
    bank: &BeamBank<T>,
    config: &SrpConfig,
) -> Result<Vec<T>> {
    let Some(first) = bank.beams().first() else {
        return Err(Error::Config("empty beam bank".into()));
    };
    if frame.num_bins() != bank.num_bins() {
        return Err(Error::DimensionMismatch {
            expected: bank.num_bins(),
            got: frame.num_bins(),
        });
    }
    if frame.num_channels() != bank.num_elements() {
        return Err(Error::DimensionMismatch {
            expected: bank.num_elements(),
            got: frame.num_channels(),
        });
    }
    let mut power = vec![T::zero(); bank.len()];
    let mut x = Vec::with_capacity(frame.num_channels());
    for k in config.bin_range(first.grid()) {
        x.clear();
        x.extend_from_slice(&frame.bins[k]);
        if config.phat {
            for v in x.iter_mut() {
                let n = v.norm();
                if n > T::zero() {
                    *v = *v / n;
                }
            }
        }
        for (p, beam) in power.iter_mut().zip(bank.beams()) {
            // y = h^H x
            *p += dot_conj(beam.weights(k), &x).norm_sqr();
        }
    }
    Ok(power)
}

/// Recursively smoothed spatial spectrum over a circular angle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSpectrum<T> {
    theta_grid: Vec<T>,
    smoothed_power: Vec<T>,
    history: Option<Vec<Vec<T>>>,
    alpha: T,
    primed: bool,
}

impl<T: Real> SpatialSpectrum<T> {
    pub fn new(theta_grid: Vec<T>, alpha: T, keep_history: bool) -> Result<Self> {
        if !(alpha >= T::zero() && alpha <= T::one()) {
            return Err(Error::Config(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        if theta_grid.is_empty() {
            return Err(Error::Config("empty angle grid".into()));
        }
        let g = theta_grid.len();
        Ok(Self {
            theta_grid,
            smoothed_power: vec![T::zero(); g],
            history: keep_history.then(Vec::new),
            alpha,
            primed: false,
        })
    }

    /// Starts from a given smoothed state.
    pub fn with_state(mut self, power: Vec<T>) -> Result<Self> {
        if power.len() != self.theta_grid.len() {
            return Err(Error::DimensionMismatch {
                expected: self.theta_grid.len(),
                got: power.len(),
            });
        }
        self.smoothed_power = power;
        self.primed = true;
        Ok(self)
    }

    pub fn theta_grid(&self) -> &[T] {
        &self.theta_grid
    }

    pub fn smoothed_power(&self) -> &[T] {
        &self.smoothed_power
    }

    pub fn history(&self) -> Option<&[Vec<T>]> {
        self.history.as_deref()
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }
}

/// `P̂_n = α P̂_{n-1} + (1-α) P_n`. The first update of an unprimed state
/// takes `P_n` as is.
pub fn smooth_srp<T: Real>(state: &mut SpatialSpectrum<T>, instantaneous: &[T]) -> Result<()> {
    if instantaneous.len() != state.smoothed_power.len() {
        return Err(Error::DimensionMismatch {
            expected: state.smoothed_power.len(),
            got: instantaneous.len(),
        });
    }
    let a = state.alpha;
    if state.primed {
        for (s, p) in state.smoothed_power.iter_mut().zip(instantaneous) {
            *s = a * *s + (T::one() - a) * *p;
        }
    } else {
        state.smoothed_power.copy_from_slice(instantaneous);
        state.primed = true;
    }
    if let Some(h) = state.history.as_mut() {
        h.push(state.smoothed_power.clone());
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoaEstimate<T> {
    pub frame_index: usize,
    pub theta_hat: T,
    pub peak_power: T,
    pub confidence: T,
}

/// Maps a peak-to-mean ratio to `[0, 1)`, zero for a flat spectrum.
pub fn peak_confidence<T: Real>(peak_to_mean: T) -> T {
    let x = (peak_to_mean - T::one()) / T::of(2.0 * CONFIDENCE_KAPPA);
    x.max(T::zero()).tanh()
}

/// Grid angle of the largest smoothed power; ties go to the smallest angle.
pub fn argmax_doa<T: Real>(state: &SpatialSpectrum<T>, frame_index: usize) -> Result<DoaEstimate<T>> {
    peak_of(&state.theta_grid, &state.smoothed_power, frame_index)
}

pub(crate) fn peak_of<T: Real>(grid: &[T], power: &[T], frame_index: usize) -> Result<DoaEstimate<T>> {
    let mut best: Option<(T, T)> = None;
    let mut total = T::zero();
    for (&theta, &p) in grid.iter().zip(power) {
        total += p;
        best = match best {
            Some((bt, bp)) if p < bp || (p == bp && theta >= bt) => Some((bt, bp)),
            _ => Some((theta, p)),
        };
    }
    let (theta_hat, peak_power) = best.ok_or(Error::AllZeroSpectrum)?;
    if !(total > T::zero()) {
        return Err(Error::AllZeroSpectrum);
    }
    let mean = total / T::of(power.len() as f64);
    Ok(DoaEstimate {
        frame_index,
        theta_hat,
        peak_power,
        confidence: peak_confidence(peak_power / mean),
    })
}

/// Member of `window` minimizing the summed circular distance to all
/// members. Ties go to the member nearest `center`, then the earlier one.
/// Entries are `(position, angle)`.
pub fn circular_median<T: Real>(window: &[(usize, T)], center: usize) -> Option<T> {
    let mut best: Option<(T, usize, usize, T)> = None;
    for &(pos, a) in window {
        let cost = window
            .iter()
            .fold(T::zero(), |acc, &(_, b)| acc + circular_distance(a, b));
        let off = pos.abs_diff(center);
        let better = match best {
            None => true,
            Some((bc, boff, bpos, _)) => {
                // costs within rounding of each other count as a tie
                let tol = T::of(1e-9) * (T::one() + bc.abs());
                cost < bc - tol
                    || ((cost - bc).abs() <= tol && (off < boff || (off == boff && pos < bpos)))
            }
        };
        if better {
            best = Some((cost, off, pos, a));
        }
    }
    best.map(|b| b.3)
}

/// Centered circular median filter over a stream of estimates. Output for
/// frame `t` is available once frame `t + (window-1)/2` has been pushed.
#[derive(Debug, Clone)]
pub struct AngleMedianFilter<T> {
    window: usize,
    min_confidence: T,
    pending: VecDeque<(usize, Option<T>)>,
    pushed: usize,
    emitted: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilteredAngle<T> {
    pub frame_index: usize,
    pub theta: Option<T>,
}

impl<T: Real> AngleMedianFilter<T> {
    pub fn new(window: usize, min_confidence: T) -> Result<Self> {
        if window == 0 || window % 2 == 0 {
            return Err(Error::Config(format!("median window must be odd and positive, got {window}")));
        }
        Ok(Self {
            window,
            min_confidence,
            pending: VecDeque::new(),
            pushed: 0,
            emitted: 0,
        })
    }

    /// Frames of lookahead.
    pub fn latency(&self) -> usize {
        (self.window - 1) / 2
    }

    /// Pushes the next frame's estimate (`None` when there was none) and
    /// returns any filtered outputs that became available.
    pub fn push(&mut self, estimate: Option<DoaEstimate<T>>) -> Vec<FilteredAngle<T>> {
        let idx = self.pushed;
        self.pushed += 1;
        let theta = estimate
            .filter(|e| e.confidence >= self.min_confidence)
            .map(|e| e.theta_hat);
        self.pending.push_back((idx, theta));
        let mut out = Vec::new();
        while self.emitted + self.latency() <= idx {
            out.push(self.emit_next());
        }
        out
    }

    /// Flushes the remaining frames with truncated windows.
    pub fn finish(&mut self) -> Vec<FilteredAngle<T>> {
        let mut out = Vec::new();
        while self.emitted < self.pushed {
            out.push(self.emit_next());
        }
        out
    }

    fn emit_next(&mut self) -> FilteredAngle<T> {
        let t = self.emitted;
        let h = self.latency();
        let lo = t.saturating_sub(h);
        let hi = t + h;
        let members: Vec<(usize, T)> = self
            .pending
            .iter()
            .filter(|(i, _)| *i >= lo && *i <= hi)
            .filter_map(|&(i, a)| a.map(|a| (i, a)))
            .collect();
        let theta = circular_median(&members, t);
        self.emitted += 1;
        let keep_from = self.emitted.saturating_sub(h);
        while self.pending.front().is_some_and(|p| p.0 < keep_from) {
            self.pending.pop_front();
        }
        FilteredAngle { frame_index: t, theta }
    }
}

/// Batch form of [`AngleMedianFilter`].
pub fn median_filter_angles<T: Real>(
    estimates: &[Option<DoaEstimate<T>>],
    window: usize,
    min_confidence: T,
) -> Result<Vec<Option<T>>> {
    let mut f = AngleMedianFilter::new(window, min_confidence)?;
    let mut out: Vec<Option<T>> = Vec::with_capacity(estimates.len());
    for e in estimates {
        out.extend(f.push(*e).into_iter().map(|a| a.theta));
    }
    out.extend(f.finish().into_iter().map(|a| a.theta));
    Ok(out)
}

/// Uniform grid of `n` angles starting at zero.
pub fn uniform_grid<T: Real>(n: usize) -> Vec<T> {
    (0..n)
        .map(|i| T::TAU() * T::of(i as f64) / T::of(n as f64))
        .collect()
}
