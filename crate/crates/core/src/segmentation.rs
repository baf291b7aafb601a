//! Speech/non-speech detection and speaker-change segmentation from the VAD
//! posterior stream and the filtered DOA stream.

use std::collections::VecDeque;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{circular_distance, circular_mean, circular_std, logistic, wrap_angle};

/// Energy of silent frames, dB.
pub const ENERGY_FLOOR_DB: f64 = -120.0;
/// Lowest noise floor the tracker will report, dB.
pub const MIN_NOISE_FLOOR_DB: f64 = -100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VadFrame {
    pub frame_index: usize,
    pub speech_posterior: f64,
}

/// Frame timing shared by all frame-indexed streams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameClock {
    pub hop: usize,
    pub frame_len: usize,
    pub sample_rate: f64,
}

impl FrameClock {
    /// Start time of a frame, seconds.
    pub fn time(&self, frame_index: usize) -> f64 {
        (frame_index * self.hop) as f64 / self.sample_rate
    }

    pub fn hop_s(&self) -> f64 {
        self.hop as f64 / self.sample_rate
    }

    /// Frame whose start time is nearest `t`.
    pub fn frame_at(&self, t: f64) -> usize {
        (t * self.sample_rate / self.hop as f64).round().max(0.0) as usize
    }
}

pub fn energy_db(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return ENERGY_FLOOR_DB;
    }
    let ms = samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64;
    10.0 * (ms + 1e-12).log10()
}

/// Posterior from the energy margin over the noise floor.
pub fn vad_posterior(frame_energy_db: f64, noise_floor_db: f64) -> f64 {
    logistic((frame_energy_db - noise_floor_db - 6.0) / 3.0)
}

/// Energy VAD on one frame of samples.
pub fn energy_vad(frame_index: usize, samples: &[f64], noise_floor_db: f64) -> VadFrame {
    VadFrame {
        frame_index,
        speech_posterior: vad_posterior(energy_db(samples), noise_floor_db),
    }
}

/// Running low percentile of recent frame energies.
#[derive(Debug, Clone)]
pub struct NoiseFloorTracker {
    history: VecDeque<f64>,
    capacity: usize,
    percentile: f64,
    scratch: Vec<f64>,
}

impl NoiseFloorTracker {
    pub fn new(capacity: usize, percentile: f64) -> Self {
        Self {
            history: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
            percentile: percentile.clamp(0.0, 1.0),
            scratch: Vec::with_capacity(capacity),
        }
    }

    /// Adds a frame energy and returns the updated floor.
    pub fn update(&mut self, energy_db: f64) -> f64 {
        if self.history.len() == self.capacity {
            self.history.pop_front();
        }
        self.history.push_back(energy_db);
        self.scratch.clear();
        self.scratch.extend(self.history.iter().copied());
        self.scratch.sort_by(f64::total_cmp);
        let k = (self.percentile * (self.scratch.len() - 1) as f64).floor() as usize;
        self.scratch[k].max(MIN_NOISE_FLOOR_DB)
    }
}

/// Source of per-frame speech posteriors.
pub trait VadProvider {
    /// Posterior for `frame_index`, given the energy of the selected channel.
    fn posterior(&mut self, frame_index: usize, energy_db: f64) -> f64;
}

#[derive(Debug, Clone)]
pub struct EnergyVad {
    tracker: NoiseFloorTracker,
}

impl EnergyVad {
    /// `history_frames` of energy feed the 10th-percentile floor.
    pub fn new(history_frames: usize) -> Self {
        Self {
            tracker: NoiseFloorTracker::new(history_frames, 0.1),
        }
    }
}

impl VadProvider for EnergyVad {
    fn posterior(&mut self, _frame_index: usize, energy_db: f64) -> f64 {
        let floor = self.tracker.update(energy_db);
        vad_posterior(energy_db, floor)
    }
}

/// Replays externally computed posteriors; frames past the end are silence.
#[derive(Debug, Clone)]
pub struct PosteriorReplay {
    posteriors: Vec<f64>,
}

impl PosteriorReplay {
    pub fn new(posteriors: Vec<f64>) -> Self {
        Self { posteriors }
    }

    /// Reads `frame_index,posterior` lines. A non-numeric first line is
    /// treated as a header.
    pub fn from_csv(reader: impl BufRead) -> Result<Self> {
        let mut posteriors = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split(',').map(str::trim);
            let (Some(idx), Some(p)) = (fields.next(), fields.next()) else {
                return Err(Error::Parse {
                    line: n + 1,
                    msg: "expected frame_index,posterior".into(),
                });
            };
            let Ok(idx) = idx.parse::<usize>() else {
                if n == 0 {
                    continue;
                }
                return Err(Error::Parse {
                    line: n + 1,
                    msg: format!("bad frame index {idx:?}"),
                });
            };
            let p: f64 = p.parse().map_err(|_| Error::Parse {
                line: n + 1,
                msg: format!("bad posterior {p:?}"),
            })?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Parse {
                    line: n + 1,
                    msg: format!("posterior {p} outside [0, 1]"),
                });
            }
            if idx >= posteriors.len() {
                posteriors.resize(idx + 1, 0.0);
            }
            posteriors[idx] = p;
        }
        Ok(Self { posteriors })
    }
}

impl VadProvider for PosteriorReplay {
    fn posterior(&mut self, frame_index: usize, _energy_db: f64) -> f64 {
        self.posteriors.get(frame_index).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmenterConfig {
    pub tolerance_deg: f64,
    pub vad_threshold: f64,
    pub hangover_frames: usize,
    pub min_segment_s: f64,
    /// Segments only merge across gaps up to this long.
    pub merge_gap_s: f64,
    /// Bound on how far a change timestamp may precede the last sample
    /// needed to detect it.
    pub max_lookahead_s: f64,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            tolerance_deg: 10.0,
            vad_threshold: 0.5,
            hangover_frames: 3,
            min_segment_s: 0.2,
            merge_gap_s: 0.3,
            max_lookahead_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleClusterState {
    pub current_center: Option<f64>,
    pub tolerance: f64,
    pub member_count: usize,
    sin_sum: f64,
    cos_sum: f64,
}

impl AngleClusterState {
    pub fn new(tolerance: f64) -> Self {
        assert!(tolerance > 0.0, "tolerance must be positive");
        Self {
            current_center: None,
            tolerance,
            member_count: 0,
            sin_sum: 0.0,
            cos_sum: 0.0,
        }
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.current_center
            .is_none_or(|c| circular_distance(c, theta) <= self.tolerance)
    }

    pub fn add(&mut self, theta: f64) {
        self.sin_sum += theta.sin();
        self.cos_sum += theta.cos();
        self.member_count += 1;
        self.current_center = Some(if self.sin_sum.hypot(self.cos_sum) > 1e-12 {
            wrap_angle(self.sin_sum.atan2(self.cos_sum))
        } else {
            theta
        });
    }

    pub fn reset(&mut self, theta: f64) {
        self.sin_sum = 0.0;
        self.cos_sum = 0.0;
        self.member_count = 0;
        self.add(theta);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    SpeechOnset,
    SpeechOffset,
    AngleChange,
}

impl ChangeKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::SpeechOnset => "speech_onset",
            Self::SpeechOffset => "speech_offset",
            Self::AngleChange => "angle_change",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeEvent {
    pub frame_index: usize,
    pub timestamp: f64,
    pub kind: ChangeKind,
    /// Frame at which the event was decided.
    pub detected_at: usize,
}

/// One frame of the fused streams, aligned by frame index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegFrame {
    pub frame_index: usize,
    pub vad: f64,
    /// Filtered angle.
    pub theta: Option<f64>,
    /// Unfiltered per-frame estimate, confident or not.
    pub raw_theta: Option<f64>,
}

/// Streaming change detector.
#[derive(Debug, Clone)]
pub struct ChangeDetector {
    config: SegmenterConfig,
    clock: FrameClock,
    /// Frames of lookahead already spent upstream (median filter).
    upstream_latency: usize,
    cluster: AngleClusterState,
    in_speech: bool,
    below: usize,
    first_below: usize,
    run_onset: usize,
    /// Latest frame in the current run whose angle matched the cluster.
    last_in_cluster: Option<usize>,
    /// Recent raw estimates, newest last.
    raw: VecDeque<Option<f64>>,
    next_frame: usize,
}

impl ChangeDetector {
    pub fn new(config: SegmenterConfig, clock: FrameClock, upstream_latency: usize) -> Self {
        Self {
            cluster: AngleClusterState::new(config.tolerance_deg.to_radians()),
            config,
            clock,
            upstream_latency,
            in_speech: false,
            below: 0,
            first_below: 0,
            run_onset: 0,
            last_in_cluster: None,
            raw: VecDeque::new(),
            next_frame: 0,
        }
    }

    pub fn cluster(&self) -> &AngleClusterState {
        &self.cluster
    }

    pub fn in_speech(&self) -> bool {
        self.in_speech
    }

    fn event(&self, frame_index: usize, kind: ChangeKind, detected_at: usize) -> ChangeEvent {
        ChangeEvent {
            frame_index,
            timestamp: self.clock.time(frame_index),
            kind,
            detected_at,
        }
    }

    /// Earliest frame a change decided at `t` may be stamped with.
    fn earliest_stamp(&self, t: usize) -> usize {
        let needed = ((t + self.upstream_latency) * self.clock.hop + self.clock.frame_len) as f64;
        let budget = self.config.max_lookahead_s * self.clock.sample_rate;
        let earliest = ((needed - budget) / self.clock.hop as f64).ceil();
        if earliest <= 0.0 {
            0
        } else {
            earliest as usize
        }
    }

    pub fn push(&mut self, frame: SegFrame) -> Vec<ChangeEvent> {
        assert_eq!(frame.frame_index, self.next_frame, "frames must arrive in order");
        self.next_frame += 1;
        let t = frame.frame_index;
        self.raw.push_back(frame.raw_theta);
        while self.raw.len() > t + 1 - self.earliest_stamp(t) {
            self.raw.pop_front();
        }
        let speech = frame.vad >= self.config.vad_threshold;
        let mut events = Vec::new();

        if !self.in_speech {
            if speech {
                self.in_speech = true;
                self.below = 0;
                self.run_onset = t;
                self.last_in_cluster = None;
                events.push(self.event(t, ChangeKind::SpeechOnset, t));
            }
        } else if speech {
            self.below = 0;
        } else {
            if self.below == 0 {
                self.first_below = t;
            }
            self.below += 1;
            if self.below >= self.config.hangover_frames {
                self.in_speech = false;
                self.below = 0;
                events.push(self.event(self.first_below, ChangeKind::SpeechOffset, t));
                return events;
            }
        }

        if speech {
            if let Some(theta) = frame.theta {
                if self.cluster.contains(theta) {
                    self.cluster.add(theta);
                    self.last_in_cluster = Some(t);
                } else {
                    let after_match = self.last_in_cluster.map_or(self.run_onset, |f| f + 1);
                    // The median filter lags the raw estimates; back up to
                    // where they started agreeing with the new angle.
                    let agreeing = self
                        .raw
                        .iter()
                        .rev()
                        .take_while(|r| r.is_some_and(|r| circular_distance(r, theta) <= self.cluster.tolerance))
                        .count();
                    let raw_start = (t + 1).saturating_sub(agreeing);
                    let stamp = after_match
                        .min(raw_start)
                        .max(self.run_onset)
                        .max(self.earliest_stamp(t))
                        .min(t);
                    self.cluster.reset(theta);
                    self.last_in_cluster = Some(t);
                    events.push(self.event(stamp, ChangeKind::AngleChange, t));
                }
            }
        }
        events
    }

    /// Closes an open speech run at end of input.
    pub fn finish(&mut self) -> Vec<ChangeEvent> {
        if !self.in_speech {
            return Vec::new();
        }
        self.in_speech = false;
        let at = if self.below > 0 { self.first_below } else { self.next_frame };
        vec![self.event(at, ChangeKind::SpeechOffset, self.next_frame)]
    }
}

/// Batch change detection over aligned streams.
pub fn detect_change(
    frames: &[SegFrame],
    config: SegmenterConfig,
    clock: FrameClock,
    upstream_latency: usize,
) -> Vec<ChangeEvent> {
    let mut det = ChangeDetector::new(config, clock, upstream_latency);
    let mut out: Vec<ChangeEvent> = frames.iter().flat_map(|f| det.push(*f)).collect();
    out.extend(det.finish());
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_time: f64,
    pub end_time: f64,
    pub mean_doa: Option<f64>,
    pub doa_spread: f64,
    pub frame_count: usize,
    pub start_frame: usize,
    pub end_frame: usize,
    #[serde(skip)]
    angles: Vec<f64>,
}

impl Segment {
    fn from_frames(start_frame: usize, end_frame: usize, angles: Vec<f64>, clock: &FrameClock) -> Self {
        let mut s = Self {
            start_time: clock.time(start_frame),
            end_time: clock.time(end_frame),
            mean_doa: None,
            doa_spread: 0.0,
            frame_count: end_frame - start_frame,
            start_frame,
            end_frame,
            angles,
        };
        s.refresh();
        s
    }

    fn refresh(&mut self) {
        self.mean_doa = circular_mean(self.angles.iter().map(|a| (*a, 1.0)));
        self.doa_spread = circular_std(&self.angles);
    }

    pub fn duration(&self) -> f64 {
        self.end_time - self.start_time
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    fn absorb(&mut self, other: Segment) {
        self.start_time = self.start_time.min(other.start_time);
        self.end_time = self.end_time.max(other.end_time);
        self.start_frame = self.start_frame.min(other.start_frame);
        self.end_frame = self.end_frame.max(other.end_frame);
        self.frame_count += other.frame_count;
        self.angles.extend(other.angles);
        self.refresh();
    }
}

/// Turns events and per-frame angles into raw segments as they close.
#[derive(Debug, Clone)]
pub struct SegmentTracker {
    clock: FrameClock,
    open_from: Option<usize>,
    angles: VecDeque<(usize, f64)>,
}

impl SegmentTracker {
    pub fn new(clock: FrameClock) -> Self {
        Self {
            clock,
            open_from: None,
            angles: VecDeque::new(),
        }
    }

    /// Records the filtered angle of a frame. Angles for frame `t` must be
    /// pushed before events detected at `t`.
    pub fn push_angle(&mut self, frame_index: usize, theta: Option<f64>) {
        if self.open_from.is_none() {
            // an onset detected at this frame may still claim it
            self.angles.clear();
        }
        if let Some(a) = theta {
            self.angles.push_back((frame_index, a));
        }
    }

    /// Start frame of the segment currently open, if any.
    pub fn open_from(&self) -> Option<usize> {
        self.open_from
    }

    pub fn push_event(&mut self, event: &ChangeEvent) -> Option<Segment> {
        let b = event.frame_index;
        let closed = match (event.kind, self.open_from) {
            (ChangeKind::SpeechOnset, _) => None,
            (_, Some(start)) if b > start => Some(self.close(start, b)),
            _ => None,
        };
        match event.kind {
            ChangeKind::SpeechOffset => self.open_from = None,
            ChangeKind::SpeechOnset => self.open_from = Some(b),
            ChangeKind::AngleChange => {
                if self.open_from.is_some() {
                    self.open_from = Some(b.max(self.open_from.unwrap_or(b)));
                }
            }
        }
        if self.open_from.is_none() {
            self.angles.clear();
        } else {
            let from = self.open_from.unwrap_or(0);
            while self.angles.front().is_some_and(|a| a.0 < from) {
                self.angles.pop_front();
            }
        }
        closed
    }

    fn close(&mut self, start: usize, end: usize) -> Segment {
        let members = self
            .angles
            .iter()
            .filter(|(f, _)| *f >= start && *f < end)
            .map(|(_, a)| *a)
            .collect();
        Segment::from_frames(start, end, members, &self.clock)
    }
}

/// Folds segments shorter than the minimum into the neighbour with the
/// nearer angle and joins same-direction segments across short pauses.
/// Holds back at most two segments.
#[derive(Debug, Clone)]
pub struct SegmentMerger {
    min_len: f64,
    max_gap: f64,
    tolerance: f64,
    last: Option<Segment>,
    short: Option<Segment>,
}

impl SegmentMerger {
    pub fn new(config: &SegmenterConfig) -> Self {
        Self {
            min_len: config.min_segment_s,
            max_gap: config.merge_gap_s,
            tolerance: config.tolerance_deg.to_radians(),
            last: None,
            short: None,
        }
    }

    fn gap(a: &Segment, b: &Segment) -> f64 {
        (b.start_time - a.end_time).max(0.0)
    }

    /// Adjacent segments from one direction separated by a short pause.
    fn continues(&self, prev: &Segment, next: &Segment) -> bool {
        Self::gap(prev, next) <= self.max_gap
            && matches!((prev.mean_doa, next.mean_doa), (Some(a), Some(b)) if circular_distance(a, b) <= self.tolerance)
    }

    /// True when `s` should join `prev` rather than `next`.
    fn prefer_previous(&self, prev: Option<&Segment>, s: &Segment, next: Option<&Segment>) -> Option<bool> {
        let ok_prev = prev.filter(|p| Self::gap(p, s) <= self.max_gap);
        let ok_next = next.filter(|n| Self::gap(s, n) <= self.max_gap);
        match (ok_prev, ok_next) {
            (None, None) => None,
            (Some(_), None) => Some(true),
            (None, Some(_)) => Some(false),
            (Some(p), Some(n)) => {
                let dist = |o: &Segment| match (s.mean_doa, o.mean_doa) {
                    (Some(a), Some(b)) => circular_distance(a, b),
                    _ => std::f64::consts::PI,
                };
                let (dp, dn) = (dist(p), dist(n));
                if dp != dn {
                    Some(dp < dn)
                } else {
                    Some(Self::gap(p, s) <= Self::gap(s, n))
                }
            }
        }
    }

    pub fn push(&mut self, mut seg: Segment) -> Vec<Segment> {
        let mut out = Vec::new();
        if let Some(s) = self.short.take() {
            match self.prefer_previous(self.last.as_ref(), &s, Some(&seg)) {
                Some(true) => self.last.as_mut().expect("previous exists").absorb(s),
                Some(false) => {
                    let mut merged = s;
                    merged.absorb(seg);
                    seg = merged;
                }
                None => {
                    out.extend(self.last.take());
                    self.last = Some(s);
                }
            }
        }
        if seg.duration() < self.min_len {
            self.short = Some(seg);
        } else if self.last.as_ref().is_some_and(|l| self.continues(l, &seg)) {
            self.last.as_mut().expect("checked above").absorb(seg);
        } else {
            out.extend(self.last.take());
            self.last = Some(seg);
        }
        out
    }

    /// Emits whatever no segment starting at or after `horizon` (seconds)
    /// could still change.
    pub fn advance(&mut self, horizon: f64) -> Vec<Segment> {
        let mut out = Vec::new();
        if let Some(s) = self.short.as_ref() {
            if horizon - s.end_time <= self.max_gap {
                return out;
            }
            let s = self.short.take().expect("checked above");
            if self.prefer_previous(self.last.as_ref(), &s, None) == Some(true) {
                self.last.as_mut().expect("previous exists").absorb(s);
            } else {
                out.extend(self.last.take());
                self.last = Some(s);
            }
        }
        if self.last.as_ref().is_some_and(|l| horizon - l.end_time > self.max_gap) {
            out.extend(self.last.take());
        }
        out
    }

    pub fn finish(&mut self) -> Vec<Segment> {
        let mut out = Vec::new();
        if let Some(s) = self.short.take() {
            if self.prefer_previous(self.last.as_ref(), &s, None) == Some(true) {
                self.last.as_mut().expect("previous exists").absorb(s);
            } else {
                out.extend(self.last.take());
                self.last = Some(s);
            }
        }
        out.extend(self.last.take());
        out
    }
}

/// Earliest start any segment closed after frame `f` can have.
pub fn segment_horizon(tracker: &SegmentTracker, f: usize, clock: &FrameClock) -> f64 {
    clock.time(tracker.open_from().unwrap_or(f + 1))
}

/// Batch segment construction from time-ordered events and the per-frame
/// filtered angles (`angles[frame]`).
pub fn build_segments(
    events: &[ChangeEvent],
    angles: &[Option<f64>],
    config: &SegmenterConfig,
    clock: FrameClock,
) -> Vec<Segment> {
    let mut tracker = SegmentTracker::new(clock);
    let mut merger = SegmentMerger::new(config);
    let mut out = Vec::new();
    let mut events = events.iter().peekable();
    for (f, a) in angles.iter().enumerate() {
        tracker.push_angle(f, *a);
        while let Some(e) = events.next_if(|e| e.detected_at <= f) {
            if let Some(seg) = tracker.push_event(e) {
                out.extend(merger.push(seg));
            }
        }
        out.extend(merger.advance(segment_horizon(&tracker, f, &clock)));
    }
    for e in events {
        if let Some(seg) = tracker.push_event(e) {
            out.extend(merger.push(seg));
        }
    }
    out.extend(merger.finish());
    out
}
