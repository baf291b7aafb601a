//! End-to-end streaming diarization: STFT front end, beam bank, SRP
//! localization, angle/VAD segmentation, source counting and online
//! joint clustering.

use std::collections::VecDeque;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::beamformer::{build_beam_bank, BeamBank, ConstraintSpec};
use crate::clustering::{
    Action, ClusteringConfig, EmbeddingProvider, FileEmbeddings, OnlineDiarizer, SegmentSample, SyntheticEmbeddingConfig,
    SyntheticEmbeddings,
};
use crate::error::{Error, Result};
use crate::geometry::{FrequencyGrid, GeometryConfig};
use crate::linalg::dot_conj;
use crate::localization::{
    argmax_doa, frame_srp, smooth_srp, uniform_grid, AngleMedianFilter, FilteredAngle, FrameSpectrum, SpatialSpectrum,
    SrpConfig,
};
use crate::metrics::{Annotation, Turn};
use crate::num::{circular_mean, C};
use crate::overlap::{dip_statistic, hmm_step, top_two_sources, HmmParams, SourceCount, SourceCountState};
use crate::scenesim::GroundTruth;
use crate::segmentation::{
    segment_horizon, ChangeDetector, ChangeEvent, EnergyVad, FrameClock, PosteriorReplay, SegFrame, Segment,
    SegmentMerger, SegmentTracker, SegmenterConfig, VadProvider, ENERGY_FLOOR_DB,
};
use crate::stft::{Framer, Stft, Window};
use crate::wav::Audio;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontendConfig {
    pub fft_size: usize,
    pub hop: usize,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self { fft_size: 512, hop: 256 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalizationConfig {
    pub num_beams: usize,
    pub alpha: f64,
    pub srp: SrpConfig,
    pub median_window: usize,
    /// Estimates below this confidence are left out of the median window.
    pub min_confidence: f64,
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        Self {
            num_beams: 72,
            alpha: 0.7,
            srp: SrpConfig::default(),
            median_window: 5,
            min_confidence: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VadConfig {
    Energy {
        #[serde(default = "default_floor_history")]
        floor_history_s: f64,
    },
    /// `frame_index,posterior` CSV at the pipeline's frame rate.
    File { path: PathBuf },
}

fn default_floor_history() -> f64 {
    5.0
}

impl Default for VadConfig {
    fn default() -> Self {
        Self::Energy {
            floor_history_s: default_floor_history(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OverlapConfig {
    /// Emit a second segment stream while two sources are active.
    pub enabled: bool,
    pub hmm: HmmParams,
}

impl Default for OverlapConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            hmm: HmmParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbeddingConfig {
    /// No clustering; segments only.
    None,
    /// Gaussian-per-speaker vectors drawn from ground truth.
    Synthetic {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    /// `ordinal,v0,v1,...` lines, one per segment.
    File { path: PathBuf },
}

fn default_dim() -> usize {
    64
}

fn default_sigma() -> f64 {
    0.05
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self::Synthetic {
            dim: default_dim(),
            sigma: default_sigma(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Same-speaker turns separated by less than this are joined.
    pub merge_gap_s: f64,
    pub keep_spectrum: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            merge_gap_s: 0.3,
            keep_spectrum: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub geometry: GeometryConfig,
    pub frontend: FrontendConfig,
    pub localization: LocalizationConfig,
    pub vad: VadConfig,
    pub segmentation: SegmenterConfig,
    pub overlap: OverlapConfig,
    pub clustering: ClusteringConfig,
    pub embeddings: EmbeddingConfig,
    pub output: OutputConfig,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.frontend;
        if f.fft_size < 2 || f.hop == 0 || f.hop > f.fft_size {
            return Err(Error::Config(format!(
                "frontend needs fft_size >= 2 and 0 < hop <= fft_size (got {} / {})",
                f.fft_size, f.hop
            )));
        }
        let l = &self.localization;
        if !(0.0..=1.0).contains(&l.alpha) {
            return Err(Error::Config(format!("localization.alpha must lie in [0, 1], got {}", l.alpha)));
        }
        if l.median_window == 0 || l.median_window % 2 == 0 {
            return Err(Error::Config(format!(
                "localization.median_window must be odd and positive, got {}",
                l.median_window
            )));
        }
        if l.num_beams < 2 {
            return Err(Error::Config("localization.num_beams must be at least 2".into()));
        }
        let s = &self.segmentation;
        if !(s.tolerance_deg > 0.0) || s.hangover_frames == 0 || !(0.0..=1.0).contains(&s.vad_threshold) {
            return Err(Error::Config("segmentation needs tolerance_deg > 0, hangover_frames >= 1 and vad_threshold in [0, 1]".into()));
        }
        let lookahead = self.lookahead_s();
        if lookahead > s.max_lookahead_s {
            return Err(Error::Config(format!(
                "median window and frame length need {lookahead:.3} s of lookahead, above the {:.3} s budget",
                s.max_lookahead_s
            )));
        }
        let c = &self.clustering;
        if !(c.theta_new <= c.theta_conf) || !(c.move_threshold_deg > 0.0) {
            return Err(Error::Config("clustering needs theta_new <= theta_conf and move_threshold_deg > 0".into()));
        }
        Ok(())
    }

    pub fn clock(&self) -> FrameClock {
        FrameClock {
            hop: self.frontend.hop,
            frame_len: self.frontend.fft_size,
            sample_rate: self.geometry.sample_rate as f64,
        }
    }

    /// Audio past a frame's start needed before its filtered angle exists.
    pub fn lookahead_s(&self) -> f64 {
        let l = (self.localization.median_window - 1) / 2;
        (l * self.frontend.hop + self.frontend.fft_size) as f64 / self.geometry.sample_rate as f64
    }

    pub fn median_latency(&self) -> usize {
        (self.localization.median_window - 1) / 2
    }

    /// VAD provider named by the config.
    pub fn build_vad(&self) -> Result<Box<dyn VadProvider + Send>> {
        Ok(match &self.vad {
            VadConfig::Energy { floor_history_s } => {
                let frames = (floor_history_s / self.clock().hop_s()).round().max(1.0) as usize;
                Box::new(EnergyVad::new(frames))
            }
            VadConfig::File { path } => {
                let f = std::fs::File::open(path)
                    .map_err(|e| Error::Config(format!("cannot open VAD posteriors {}: {e}", path.display())))?;
                Box::new(PosteriorReplay::from_csv(std::io::BufReader::new(f))?)
            }
        })
    }

    /// Embedding provider named by the config; synthetic vectors need the
    /// scene's ground truth.
    pub fn build_embeddings(&self, truth: Option<&GroundTruth>) -> Result<Option<Box<dyn EmbeddingProvider + Send>>> {
        Ok(match &self.embeddings {
            EmbeddingConfig::None => None,
            EmbeddingConfig::Synthetic { dim, sigma } => {
                let truth = truth.ok_or_else(|| {
                    Error::Config("synthetic embeddings need the scene ground truth (pass --truth)".into())
                })?;
                let cfg = SyntheticEmbeddingConfig {
                    dim: *dim,
                    sigma: *sigma,
                    seed: self.seed,
                    ..SyntheticEmbeddingConfig::default()
                };
                Some(Box::new(SyntheticEmbeddings::new(truth.speaker_turns(), cfg)?))
            }
            EmbeddingConfig::File { path } => {
                let f = std::fs::File::open(path)
                    .map_err(|e| Error::Config(format!("cannot open embeddings {}: {e}", path.display())))?;
                Some(Box::new(FileEmbeddings::from_reader(std::io::BufReader::new(f))?))
            }
        })
    }
}

/// Everything known about one frame once its filtered angle is out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameRecord {
    pub frame_index: usize,
    pub time_s: f64,
    /// Peak of the smoothed spectrum.
    pub theta_raw: Option<f64>,
    /// Peak of this frame's unsmoothed spectrum.
    pub theta_instant: Option<f64>,
    pub confidence: f64,
    pub theta_filtered: Option<f64>,
    pub vad: f64,
    pub energy_db: f64,
    pub dip: f64,
    pub state: SourceCount,
    pub secondary_theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiarizedSegment {
    pub ordinal: usize,
    pub start: f64,
    pub end: f64,
    pub doa: Option<f64>,
    /// From the parallel stream opened while two sources are active.
    pub secondary: bool,
    pub speaker_id: Option<usize>,
    pub tentative: bool,
    pub action: Option<Action>,
}

/// Outputs made available by one `push` or `finish` call.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PipelineOutput {
    pub frames: Vec<FrameRecord>,
    pub events: Vec<ChangeEvent>,
    pub segments: Vec<DiarizedSegment>,
}

impl PipelineOutput {
    pub fn extend(&mut self, other: PipelineOutput) {
        self.frames.extend(other.frames);
        self.events.extend(other.events);
        self.segments.extend(other.segments);
    }

    /// Labeled segments as turns, joining same-speaker gaps below `merge_gap_s`.
    pub fn annotation(&self, merge_gap_s: f64) -> Annotation {
        let mut by_speaker: std::collections::BTreeMap<usize, Vec<(f64, f64)>> = Default::default();
        for s in &self.segments {
            if let Some(id) = s.speaker_id {
                by_speaker.entry(id).or_default().push((s.start, s.end));
            }
        }
        let mut turns = Vec::new();
        for (id, mut iv) in by_speaker {
            iv.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut cur: Option<(f64, f64)> = None;
            for (a, b) in iv {
                cur = match cur {
                    Some((s, e)) if a - e < merge_gap_s => Some((s, e.max(b))),
                    Some(done) => {
                        turns.push((id, done));
                        Some((a, b))
                    }
                    None => Some((a, b)),
                };
            }
            turns.extend(cur.map(|c| (id, c)));
        }
        turns.sort_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)));
        Annotation::new(
            turns
                .into_iter()
                .map(|(id, (s, e))| Turn {
                    speaker: format!("spk{id}"),
                    start: s,
                    end: e,
                })
                .collect(),
        )
    }

    /// Timestamps of angle changes.
    pub fn change_times(&self) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| e.kind == crate::segmentation::ChangeKind::AngleChange)
            .map(|e| e.timestamp)
            .collect()
    }
}

struct SecondaryRun {
    start_frame: usize,
    end_frame: usize,
    angles: Vec<f64>,
}

/// Streaming pipeline. Feed audio with `push` in chunks of any size and
/// call `finish` once at the end.
pub struct Pipeline {
    config: PipelineConfig,
    clock: FrameClock,
    stft: Stft<f64>,
    window_power: f64,
    framer: Framer<f64>,
    bank: BeamBank<f64>,
    spectrum: SpatialSpectrum<f64>,
    median: AngleMedianFilter<f64>,
    vad: Box<dyn VadProvider + Send>,
    hmm: SourceCountState,
    detector: ChangeDetector,
    tracker: SegmentTracker,
    merger: SegmentMerger,
    embeddings: Option<Box<dyn EmbeddingProvider + Send>>,
    diarizer: OnlineDiarizer,
    pending: VecDeque<FrameRecord>,
    last_beam: usize,
    secondary: Option<SecondaryRun>,
    ordinal: usize,
    samples_in: usize,
    finished: bool,
}

impl Pipeline {
    pub fn new(
        config: PipelineConfig,
        vad: Box<dyn VadProvider + Send>,
        embeddings: Option<Box<dyn EmbeddingProvider + Send>>,
    ) -> Result<Self> {
        config.validate()?;
        let geometry = config.geometry.build::<f64>()?;
        let sr = config.geometry.sample_rate as f64;
        let grid = FrequencyGrid::new(sr, config.frontend.fft_size)?;
        let bank = build_beam_bank(
            &geometry,
            &grid,
            config.localization.num_beams,
            &ConstraintSpec::super_cardioid(),
        )?;
        let stft = Stft::new(config.frontend.fft_size, config.frontend.hop, Window::Hann);
        let window_power = stft.window().iter().map(|w| w * w).sum::<f64>();
        let spectrum = SpatialSpectrum::new(
            uniform_grid(config.localization.num_beams),
            config.localization.alpha,
            false,
        )?;
        let median = AngleMedianFilter::new(config.localization.median_window, config.localization.min_confidence)?;
        let clock = config.clock();
        Ok(Self {
            framer: Framer::new(geometry.num_elements(), config.frontend.fft_size, config.frontend.hop),
            detector: ChangeDetector::new(config.segmentation, clock, config.median_latency()),
            tracker: SegmentTracker::new(clock),
            merger: SegmentMerger::new(&config.segmentation),
            diarizer: OnlineDiarizer::new(config.clustering),
            hmm: SourceCountState::default(),
            clock,
            stft,
            window_power,
            bank,
            spectrum,
            median,
            vad,
            embeddings,
            pending: VecDeque::new(),
            last_beam: 0,
            secondary: None,
            ordinal: 0,
            samples_in: 0,
            finished: false,
            config,
        })
    }

    /// Builds providers from the config itself.
    pub fn from_config(config: PipelineConfig, truth: Option<&GroundTruth>) -> Result<Self> {
        let vad = config.build_vad()?;
        let emb = config.build_embeddings(truth)?;
        Self::new(config, vad, emb)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn clock(&self) -> FrameClock {
        self.clock
    }

    /// Samples consumed so far, per channel.
    pub fn samples_in(&self) -> usize {
        self.samples_in
    }

    /// Appends channel-major audio (`chunk[ch][i]`).
    pub fn push(&mut self, chunk: &[Vec<f64>]) -> Result<PipelineOutput> {
        if self.finished {
            return Err(Error::Config("pipeline already finished".into()));
        }
        if chunk.len() != self.framer.channels() {
            return Err(Error::DimensionMismatch {
                expected: self.framer.channels(),
                got: chunk.len(),
            });
        }
        let len = chunk.first().map_or(0, Vec::len);
        if chunk.iter().any(|c| c.len() != len) {
            return Err(Error::DegenerateInput("channels in a chunk differ in length".into()));
        }
        self.samples_in += len;
        self.framer.push(chunk);
        let mut out = PipelineOutput::default();
        while let Some((idx, frame)) = self.framer.next_frame() {
            self.process_frame(idx, &frame, &mut out)?;
        }
        Ok(out)
    }

    /// Pads the final partial frame with zeros and flushes every stage.
    pub fn finish(&mut self) -> Result<PipelineOutput> {
        if self.finished {
            return Ok(PipelineOutput::default());
        }
        let mut out = PipelineOutput::default();
        let tail = self.config.frontend.fft_size - self.config.frontend.hop;
        if self.samples_in > 0 && tail > 0 {
            self.framer.push(&vec![vec![0.0; tail]; self.framer.channels()]);
            while let Some((idx, frame)) = self.framer.next_frame() {
                self.process_frame(idx, &frame, &mut out)?;
            }
        }
        self.finished = true;
        for fa in self.median.finish() {
            self.on_filtered(fa, &mut out)?;
        }
        for e in self.detector.finish() {
            self.on_event(e, &mut out)?;
        }
        let segs = self.merger.finish();
        for s in segs {
            self.on_segment(s, false, &mut out)?;
        }
        self.close_secondary(&mut out)?;
        Ok(out)
    }

    fn beam_energy_db(&self, beam: usize, fs: &FrameSpectrum<f64>) -> f64 {
        let b = &self.bank.beams()[beam];
        let n = fs.num_bins();
        let mut total = 0.0;
        for (k, x) in fs.bins.iter().enumerate() {
            let p = dot_conj(b.weights(k), x).norm_sqr();
            total += if k == 0 || k + 1 == n { p } else { 2.0 * p };
        }
        let ms = total / (self.config.frontend.fft_size as f64 * self.window_power);
        if ms > 0.0 {
            10.0 * (ms + 1e-12).log10()
        } else {
            ENERGY_FLOOR_DB
        }
    }

    fn process_frame(&mut self, idx: usize, frame: &[Vec<f64>], out: &mut PipelineOutput) -> Result<()> {
        let spectra: Vec<Vec<C<f64>>> = frame.iter().map(|ch| self.stft.analyze(ch)).collect();
        let fs = FrameSpectrum::from_channels(idx, &spectra);
        let power = frame_srp(&fs, &self.bank, &self.config.localization.srp)?;
        let theta_instant = instant_peak(self.spectrum.theta_grid(), &power);
        smooth_srp(&mut self.spectrum, &power)?;
        let est = argmax_doa(&self.spectrum, idx).ok();
        if let Some(e) = est {
            self.last_beam = self.bank.nearest_beam(e.theta_hat);
        }
        let energy_db = self.beam_energy_db(self.last_beam, &fs);
        let v = self.vad.posterior(idx, energy_db).clamp(0.0, 1.0);
        let dip = spectrum_dip(self.spectrum.theta_grid(), self.spectrum.smoothed_power());
        self.hmm = hmm_step(&self.hmm, &self.config.overlap.hmm, v, dip);
        let state = self.hmm.state;
        let secondary_theta = if state == SourceCount::TwoSources {
            top_two_sources(&self.spectrum, idx).ok().map(|(_, s)| s.theta_hat)
        } else {
            None
        };
        self.track_secondary(idx, secondary_theta, out)?;
        self.pending.push_back(FrameRecord {
            frame_index: idx,
            time_s: self.clock.time(idx),
            theta_raw: est.map(|e| e.theta_hat),
            theta_instant,
            confidence: est.map_or(0.0, |e| e.confidence),
            theta_filtered: None,
            vad: v,
            energy_db,
            dip,
            state,
            secondary_theta,
            spectrum: self
                .config
                .output
                .keep_spectrum
                .then(|| self.spectrum.smoothed_power().to_vec()),
        });
        for fa in self.median.push(est) {
            self.on_filtered(fa, out)?;
        }
        Ok(())
    }

    fn on_filtered(&mut self, fa: FilteredAngle<f64>, out: &mut PipelineOutput) -> Result<()> {
        let mut rec = self.pending.pop_front().expect("a raw record per filtered frame");
        debug_assert_eq!(rec.frame_index, fa.frame_index);
        rec.theta_filtered = fa.theta;
        let f = rec.frame_index;
        self.tracker.push_angle(f, fa.theta);
        let events = self.detector.push(SegFrame {
            frame_index: f,
            vad: rec.vad,
            theta: fa.theta,
            raw_theta: rec.theta_instant,
        });
        out.frames.push(rec);
        for e in events {
            self.on_event(e, out)?;
        }
        let horizon = segment_horizon(&self.tracker, f, &self.clock);
        for s in self.merger.advance(horizon) {
            self.on_segment(s, false, out)?;
        }
        Ok(())
    }

    fn on_event(&mut self, e: ChangeEvent, out: &mut PipelineOutput) -> Result<()> {
        out.events.push(e);
        if let Some(seg) = self.tracker.push_event(&e) {
            for s in self.merger.push(seg) {
                self.on_segment(s, false, out)?;
            }
        }
        Ok(())
    }

    fn track_secondary(&mut self, idx: usize, theta: Option<f64>, out: &mut PipelineOutput) -> Result<()> {
        if !self.config.overlap.enabled {
            return Ok(());
        }
        match (theta, self.secondary.as_mut()) {
            (Some(t), Some(run)) => {
                run.angles.push(t);
                run.end_frame = idx + 1;
            }
            (Some(t), None) => {
                self.secondary = Some(SecondaryRun {
                    start_frame: idx,
                    end_frame: idx + 1,
                    angles: vec![t],
                })
            }
            (None, Some(_)) => self.close_secondary(out)?,
            (None, None) => {}
        }
        Ok(())
    }

    fn close_secondary(&mut self, out: &mut PipelineOutput) -> Result<()> {
        let Some(run) = self.secondary.take() else {
            return Ok(());
        };
        let start = self.clock.time(run.start_frame);
        let end = self.clock.time(run.end_frame);
        if end - start < self.config.segmentation.min_segment_s {
            return Ok(());
        }
        let doa = circular_mean(run.angles.iter().map(|a| (*a, 1.0)));
        self.label(start, end, doa, run.angles.len() as f64 / (run.end_frame - run.start_frame) as f64, true, out)
    }

    fn on_segment(&mut self, seg: Segment, secondary: bool, out: &mut PipelineOutput) -> Result<()> {
        let confident = seg.angles().len() as f64 / seg.frame_count.max(1) as f64;
        self.label(seg.start_time, seg.end_time, seg.mean_doa, confident, secondary, out)
    }

    fn label(
        &mut self,
        start: f64,
        end: f64,
        doa: Option<f64>,
        confident_fraction: f64,
        secondary: bool,
        out: &mut PipelineOutput,
    ) -> Result<()> {
        let ordinal = self.ordinal;
        self.ordinal += 1;
        let mut seg = DiarizedSegment {
            ordinal,
            start,
            end,
            doa,
            secondary,
            speaker_id: None,
            tentative: false,
            action: None,
        };
        if let Some(provider) = self.embeddings.as_mut() {
            let embedding = provider.embed(ordinal, start, end, doa)?;
            let sample = SegmentSample {
                embedding,
                doa,
                start,
                end,
                quality: confident_fraction * ((end - start) / 0.5).min(1.0),
            };
            let labeled = self.diarizer.push(&sample)?;
            seg.speaker_id = Some(labeled.speaker_id);
            seg.tentative = labeled.tentative;
            seg.action = Some(labeled.decision.action);
        }
        out.segments.push(seg);
        Ok(())
    }
}

/// Dip of the spectrum above its floor; a flat spectrum counts as unimodal.
pub fn spectrum_dip(grid: &[f64], power: &[f64]) -> f64 {
    let floor = power.iter().copied().fold(f64::INFINITY, f64::min);
    let above: Vec<f64> = power.iter().map(|p| p - floor).collect();
    dip_statistic(grid, &above).map_or(0.0, |d| d.dip)
}

fn instant_peak(grid: &[f64], power: &[f64]) -> Option<f64> {
    let (i, p) = power.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    (*p > 0.0).then(|| grid[i])
}

/// Runs the whole signal in one pass.
pub fn run_pipeline(audio: &Audio, config: PipelineConfig, truth: Option<&GroundTruth>) -> Result<PipelineOutput> {
    check_audio(audio, &config)?;
    let mut p = Pipeline::from_config(config, truth)?;
    let mut out = p.push(&audio.channels)?;
    out.extend(p.finish()?);
    Ok(out)
}

pub fn check_audio(audio: &Audio, config: &PipelineConfig) -> Result<()> {
    if audio.num_channels() != config.geometry.elements {
        return Err(Error::Config(format!(
            "audio has {} channels but the array geometry has {} elements",
            audio.num_channels(),
            config.geometry.elements
        )));
    }
    if audio.sample_rate != config.geometry.sample_rate {
        return Err(Error::Config(format!(
            "audio is {} Hz but the config expects {} Hz",
            audio.sample_rate, config.geometry.sample_rate
        )));
    }
    Ok(())
}
