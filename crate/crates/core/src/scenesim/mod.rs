//! Free-field multichannel scene synthesis with ground truth.

pub mod noise;
pub mod speech;

pub use noise::{make_noise, NoiseEvent, NoiseKind, NoiseSignal};
pub use speech::{speech_surrogate, word_bursts};

use std::path::PathBuf;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, FrequencyGrid, GeometryConfig};
use crate::metrics::{Annotation, Turn};
use crate::num::C;
use crate::stft::{Stft, Window};
use crate::wav::Audio;

/// Level the empty-schedule noise is referenced to, dBFS.
pub const REFERENCE_LEVEL_DB: f64 = -20.0;
pub const DIFFUSE_DIRECTIONS: usize = 36;
const RENDER_FFT: usize = 512;
const RENDER_HOP: usize = 128;

/// Zero-phase filtering by a real gain curve over the whole signal.
pub(crate) fn shape_spectrum(x: &mut [f64], sample_rate: f64, gain: impl Fn(f64) -> f64) {
    let n = x.len();
    if n == 0 {
        return;
    }
    let mut planner = FftPlanner::new();
    let mut buf: Vec<C<f64>> = x.iter().map(|v| C::new(*v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let kk = k.min(n - k);
        *c *= gain(kk as f64 * sample_rate / n as f64);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    for (v, c) in x.iter_mut().zip(&buf) {
        *v = c.re / n as f64;
    }
}

fn render_stft() -> Stft<f64> {
    Stft::new(RENDER_FFT, RENDER_HOP, Window::SqrtHann)
}

/// Renders a mono signal as a plane wave from `angle` by per-bin
/// multiplication with the steering vector.
pub fn render_plane_wave(signal: &[f64], geometry: &ArrayGeometry<f64>, angle: f64, sample_rate: f64) -> Result<Vec<Vec<f64>>> {
    let grid = FrequencyGrid::new(sample_rate, RENDER_FFT)?;
    let steer: Vec<Vec<C<f64>>> = (0..grid.num_bins())
        .map(|k| geometry.steering_vector(grid.omega(k), angle))
        .collect();
    let m = geometry.num_elements();
    Ok(render_stft().process_ola(signal, m, |_, spec| {
        (0..m)
            .map(|ch| spec.iter().zip(&steer).map(|(x, d)| x * d[ch]).collect())
            .collect()
    }))
}

fn energy(channels: &[Vec<f64>]) -> f64 {
    channels.iter().flatten().map(|v| v * v).sum()
}

/// Spreads mono noise over `DIFFUSE_DIRECTIONS` equal-power plane waves with
/// independent random phases per frame, then restores the input energy per
/// channel on average.
const PHASE_BITS: u32 = 12;
const PHASE_TABLE: usize = 1 << PHASE_BITS;

pub fn diffuse_noise_render(noise: &[f64], geometry: &ArrayGeometry<f64>, sample_rate: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    let m = geometry.num_elements();
    let input = noise.iter().map(|v| v * v).sum::<f64>();
    if input == 0.0 {
        return Ok(vec![vec![0.0; noise.len()]; m]);
    }
    let grid = FrequencyGrid::new(sample_rate, RENDER_FFT)?;
    let dirs: Vec<f64> = (0..DIFFUSE_DIRECTIONS)
        .map(|d| std::f64::consts::TAU * d as f64 / DIFFUSE_DIRECTIONS as f64)
        .collect();
    // steer[k][d][m], with each channel normalised to unit mean power over directions
    let steer: Vec<Vec<Vec<C<f64>>>> = (0..grid.num_bins())
        .map(|k| {
            let mut s: Vec<Vec<C<f64>>> = dirs.iter().map(|&t| geometry.steering_vector(grid.omega(k), t)).collect();
            for ch in 0..m {
                let p = s.iter().map(|v| v[ch].norm_sqr()).sum::<f64>() / DIFFUSE_DIRECTIONS as f64;
                let g = if p > 0.0 { 1.0 / (p * DIFFUSE_DIRECTIONS as f64).sqrt() } else { 0.0 };
                for v in s.iter_mut() {
                    v[ch] *= g;
                }
            }
            s
        })
        .collect();
    let phases: Vec<C<f64>> = (0..PHASE_TABLE)
        .map(|i| C::from_polar(1.0, std::f64::consts::TAU * i as f64 / PHASE_TABLE as f64))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![C::new(0.0, 0.0); m];
    let mut out = render_stft().process_ola(noise, m, |_, spec| {
        let mut chans = vec![vec![C::new(0.0, 0.0); spec.len()]; m];
        for (k, x) in spec.iter().enumerate() {
            acc.iter_mut().for_each(|a| *a = C::new(0.0, 0.0));
            for sd in &steer[k] {
                let xs = x * phases[(rng.next_u32() >> (32 - PHASE_BITS)) as usize];
                for (a, s) in acc.iter_mut().zip(sd) {
                    *a += xs * s;
                }
            }
            for (ch, a) in chans.iter_mut().zip(&acc) {
                ch[k] = *a;
            }
        }
        chans
    });
    let got = energy(&out);
    if got > 0.0 {
        let g = (m as f64 * input / got).sqrt();
        out.iter_mut().flatten().for_each(|v| *v *= g);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub angle_deg: f64,
    #[serde(default = "default_level")]
    pub level_db: f64,
}

fn default_level() -> f64 {
    REFERENCE_LEVEL_DB
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledUtterance {
    pub source: usize,
    pub start_s: f64,
    pub end_s: f64,
    /// Defaults to the source index; differs when a speaker changes seat.
    #[serde(default)]
    pub speaker: Option<usize>,
}

/// Speakers take turns in source order with a fixed interim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundRobin {
    pub utterances: usize,
    pub interim_ms: f64,
    #[serde(default = "default_min_utt")]
    pub min_utterance_s: f64,
    #[serde(default = "default_max_utt")]
    pub max_utterance_s: f64,
    #[serde(default = "default_lead_in")]
    pub lead_in_s: f64,
}

fn default_min_utt() -> f64 {
    1.0
}
fn default_max_utt() -> f64 {
    2.5
}
fn default_lead_in() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpeechSource {
    Surrogate {
        #[serde(default = "default_pauses")]
        pauses: bool,
    },
    /// Mono WAV; utterances take consecutive excerpts, looping.
    File { path: PathBuf },
}

fn default_pauses() -> bool {
    true
}

impl Default for SpeechSource {
    fn default() -> Self {
        Self::Surrogate { pauses: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default)]
    pub geometry: GeometryConfig,
    pub sources: Vec<SourceSpec>,
    #[serde(default)]
    pub schedule: Vec<ScheduledUtterance>,
    #[serde(default)]
    pub round_robin: Option<RoundRobin>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub speech: SpeechSource,
    /// Defaults to the end of the last utterance plus `tail_s`.
    #[serde(default)]
    pub duration_s: Option<f64>,
    #[serde(default = "default_tail")]
    pub tail_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub allow_overlap: bool,
}

fn default_tail() -> f64 {
    0.5
}

impl SceneConfig {
    /// Three sources 120 degrees apart taking turns, as in the change-point
    /// evaluation protocol.
    pub fn round_robin(utterances: usize, interim_ms: f64, noise: Option<NoiseSpec>, seed: u64) -> Self {
        Self {
            geometry: GeometryConfig::default(),
            sources: [0.0, 120.0, 240.0]
                .iter()
                .map(|&a| SourceSpec {
                    angle_deg: a,
                    level_db: REFERENCE_LEVEL_DB,
                })
                .collect(),
            schedule: Vec::new(),
            round_robin: Some(RoundRobin {
                utterances,
                interim_ms,
                min_utterance_s: default_min_utt(),
                max_utterance_s: default_max_utt(),
                lead_in_s: default_lead_in(),
            }),
            noise,
            speech: SpeechSource::default(),
            duration_s: None,
            tail_s: default_tail(),
            seed,
            allow_overlap: false,
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }

    /// The explicit schedule, or the generated round-robin one.
    pub fn resolved_schedule(&self) -> Result<Vec<ScheduledUtterance>> {
        match (&self.round_robin, self.schedule.is_empty()) {
            (Some(_), false) => Err(Error::Config("give either schedule or round_robin, not both".into())),
            (None, _) => Ok(self.schedule.clone()),
            (Some(rr), true) => {
                if self.sources.is_empty() {
                    return Err(Error::Config("round_robin needs at least one source".into()));
                }
                if !(rr.min_utterance_s > 0.0 && rr.max_utterance_s >= rr.min_utterance_s) {
                    return Err(Error::Config("utterance length range is empty".into()));
                }
                let mut rng = self.rng(1);
                let mut t = rr.lead_in_s;
                let mut out = Vec::with_capacity(rr.utterances);
                for i in 0..rr.utterances {
                    let len = if rr.max_utterance_s > rr.min_utterance_s {
                        rng.random_range(rr.min_utterance_s..rr.max_utterance_s)
                    } else {
                        rr.min_utterance_s
                    };
                    let source = i % self.sources.len();
                    out.push(ScheduledUtterance {
                        source,
                        start_s: t,
                        end_s: t + len,
                        speaker: None,
                    });
                    t += len + rr.interim_ms / 1000.0;
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker_id: usize,
    pub source: usize,
    pub start_s: f64,
    pub end_s: f64,
    /// Radians.
    pub angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interim {
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub utterances: Vec<Utterance>,
    pub interims: Vec<Interim>,
    pub noise_kind: Option<NoiseKind>,
    pub noise_events: Vec<NoiseEvent>,
}

impl GroundTruth {
    pub fn reference(&self) -> Annotation {
        Annotation::new(
            self.utterances
                .iter()
                .map(|u| Turn {
                    speaker: format!("spk{}", u.speaker_id),
                    start: u.start_s,
                    end: u.end_s,
                })
                .collect(),
        )
    }

    pub fn interim_bounds(&self) -> Vec<(f64, f64)> {
        self.interims.iter().map(|i| (i.start_s, i.end_s)).collect()
    }

    pub fn speaker_turns(&self) -> Vec<crate::clustering::SpeakerTurn> {
        self.utterances
            .iter()
            .map(|u| crate::clustering::SpeakerTurn {
                speaker_id: u.speaker_id,
                start: u.start_s,
                end: u.end_s,
                angle: Some(u.angle),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub audio: Audio,
    pub truth: GroundTruth,
}

fn interims_of(utts: &[Utterance]) -> Vec<Interim> {
    utts.windows(2)
        .filter(|w| w[0].speaker_id != w[1].speaker_id && w[1].start_s > w[0].end_s)
        .map(|w| Interim {
            start_s: w[0].end_s,
            end_s: w[1].start_s,
        })
        .collect()
}

fn file_excerpts(path: &std::path::Path, sample_rate: u32) -> Result<Vec<f64>> {
    let a = crate::wav::read_wav(path)?;
    if a.sample_rate != sample_rate {
        return Err(Error::Config(format!(
            "{} is {} Hz but the scene runs at {} Hz",
            path.display(),
            a.sample_rate,
            sample_rate
        )));
    }
    let x = a.channels.into_iter().next().unwrap_or_default();
    if x.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateInput(format!("{} is silent", path.display())));
    }
    Ok(x)
}

pub fn synthesize(config: &SceneConfig) -> Result<Scene> {
    let geometry = config.geometry.build::<f64>()?;
    let sr = config.geometry.sample_rate as f64;
    let m = geometry.num_elements();
    let mut schedule = config.resolved_schedule()?;
    for (i, u) in schedule.iter().enumerate() {
        if u.source >= config.sources.len() {
            return Err(Error::Config(format!("utterance {i} names source {} of {}", u.source, config.sources.len())));
        }
        if !(u.start_s >= 0.0 && u.end_s > u.start_s) {
            return Err(Error::Config(format!("utterance {i} has an empty or negative interval")));
        }
    }
    let mut order: Vec<usize> = (0..schedule.len()).collect();
    order.sort_by(|&a, &b| schedule[a].start_s.total_cmp(&schedule[b].start_s));
    if !config.allow_overlap {
        for w in order.windows(2) {
            if schedule[w[1]].start_s < schedule[w[0]].end_s {
                return Err(Error::ScheduleOverlap(w[0].min(w[1]), w[0].max(w[1])));
            }
        }
    }
    schedule = order.iter().map(|&i| schedule[i]).collect();

    let last_end = schedule.iter().map(|u| u.end_s).fold(0.0, f64::max);
    let duration = match config.duration_s {
        Some(d) if d >= last_end => d,
        Some(d) => return Err(Error::Config(format!("duration_s {d} ends before the last utterance ({last_end})"))),
        None if schedule.is_empty() => return Err(Error::Config("duration_s is required when nothing is scheduled".into())),
        None => last_end + config.tail_s,
    };
    let n = (duration * sr).round() as usize;

    let file_audio = match &config.speech {
        SpeechSource::File { path } => Some(file_excerpts(path, config.geometry.sample_rate)?),
        SpeechSource::Surrogate { .. } => None,
    };
    let mut file_pos = 0usize;

    let mut tracks = vec![vec![0.0; n]; config.sources.len()];
    let mut speech_mask = vec![false; n];
    let mut utterances = Vec::with_capacity(schedule.len());
    for (i, u) in schedule.iter().enumerate() {
        let i0 = ((u.start_s * sr).round() as usize).min(n);
        let i1 = ((u.end_s * sr).round() as usize).min(n);
        let len = i1 - i0;
        let mut sig = match (&config.speech, &file_audio) {
            (SpeechSource::File { .. }, Some(src)) => {
                let s: Vec<f64> = (0..len).map(|k| src[(file_pos + k) % src.len()]).collect();
                file_pos = (file_pos + len) % src.len();
                let rms = (s.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
                s.into_iter().map(|v| if rms > 0.0 { v / rms } else { 0.0 }).collect()
            }
            (SpeechSource::Surrogate { pauses }, _) => speech_surrogate(&mut config.rng(1000 + i as u64), len, sr, *pauses),
            _ => unreachable!("file audio loaded above"),
        };
        let gain = 10f64.powf(config.sources[u.source].level_db / 20.0);
        sig.iter_mut().for_each(|v| *v *= gain);
        for (t, v) in tracks[u.source][i0..i1].iter_mut().zip(&sig) {
            *t += v;
        }
        speech_mask[i0..i1].iter_mut().for_each(|b| *b = true);
        utterances.push(Utterance {
            speaker_id: u.speaker.unwrap_or(u.source),
            source: u.source,
            start_s: u.start_s,
            end_s: u.end_s,
            angle: crate::num::wrap_angle(config.sources[u.source].angle_deg.to_radians()),
        });
    }

    let mut mix = vec![vec![0.0; n]; m];
    for (s, track) in tracks.iter().enumerate() {
        if track.iter().all(|v| *v == 0.0) {
            continue;
        }
        let angle = config.sources[s].angle_deg.to_radians();
        let rendered = render_plane_wave(track, &geometry, angle, sr)?;
        for (mc, rc) in mix.iter_mut().zip(rendered) {
            for (a, b) in mc.iter_mut().zip(rc) {
                *a += b;
            }
        }
    }

    let mut noise_events = Vec::new();
    if let Some(spec) = config.noise {
        let noise_seed = config.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x6e6f_6973_65;
        let mono = make_noise(spec.kind, duration, sr, noise_seed);
        noise_events = mono.events;
        let rendered = diffuse_noise_render(&mono.samples, &geometry, sr, noise_seed ^ 0xd1ff)?;
        let masked = |chs: &[Vec<f64>]| -> (f64, usize) {
            let count = speech_mask.iter().filter(|b| **b).count();
            let e = chs
                .iter()
                .map(|c| c.iter().zip(&speech_mask).filter(|(_, b)| **b).map(|(v, _)| v * v).sum::<f64>())
                .sum::<f64>();
            (e, count * chs.len())
        };
        let (ns, _) = masked(&rendered);
        let speech_power = if utterances.is_empty() {
            m as f64 * n as f64 * 10f64.powf(REFERENCE_LEVEL_DB / 10.0)
        } else {
            masked(&mix).0
        };
        // sparse noise may miss every utterance; then calibrate on the whole file
        let (noise_energy, speech_energy) = if ns > 0.0 || utterances.is_empty() {
            (if utterances.is_empty() { energy(&rendered) } else { ns }, speech_power)
        } else {
            let whole = energy(&rendered);
            let speech_mean = speech_power / speech_mask.iter().filter(|b| **b).count().max(1) as f64;
            (whole, speech_mean * n as f64)
        };
        if noise_energy > 0.0 {
            let g = (speech_energy / (noise_energy * 10f64.powf(spec.snr_db / 10.0))).sqrt();
            for (mc, rc) in mix.iter_mut().zip(&rendered) {
                for (a, b) in mc.iter_mut().zip(rc) {
                    *a += g * b;
                }
            }
        }
    }

    let interims = interims_of(&utterances);
    Ok(Scene {
        audio: Audio {
            sample_rate: config.geometry.sample_rate,
            channels: mix,
        },
        truth: GroundTruth {
            utterances,
            interims,
            noise_kind: config.noise.map(|n| n.kind),
            noise_events,
        },
    })
}
