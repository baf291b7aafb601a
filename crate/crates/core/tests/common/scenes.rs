//! Scene recipes shared by the acceptance and pipeline tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spatial_diar::scenesim::{NoiseSpec, SceneConfig, ScheduledUtterance, SourceSpec, SpeechSource};

pub fn base_scene(sources: &[f64], schedule: Vec<ScheduledUtterance>, noise: Option<NoiseSpec>, seed: u64) -> SceneConfig {
    SceneConfig {
        sources: sources
            .iter()
            .map(|&a| SourceSpec {
                angle_deg: a,
                level_db: -20.0,
            })
            .collect(),
        schedule,
        round_robin: None,
        noise,
        seed,
        ..SceneConfig::round_robin(0, 0.0, None, 0)
    }
}

/// A seat change: from segment `at` on, `speaker` talks from `angle_deg`.
#[derive(Debug, Clone, Copy)]
pub struct SeatChange {
    pub at: usize,
    pub speaker: usize,
    pub angle_deg: f64,
}

/// Four talkers at least 50 degrees apart, 40 turns in random order with
/// no immediate repeats, 0.2 to 0.6 s of silence between turns.
pub fn meeting(seed: u64, moves: &[SeatChange]) -> SceneConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = rng.random_range(0.0..360.0);
    let mut angles: Vec<f64> = (0..4)
        .map(|i| {
            let jitter = if moves.is_empty() { rng.random_range(-20.0..20.0) } else { 0.0 };
            (base + 90.0 * i as f64 + jitter) % 360.0
        })
        .collect();
    let mut seat: Vec<usize> = (0..4).collect();
    let mut t = 0.5;
    let mut last = usize::MAX;
    let mut schedule = Vec::new();
    for i in 0..40 {
        for m in moves.iter().filter(|m| m.at == i) {
            angles.push((base + m.angle_deg) % 360.0);
            seat[m.speaker] = angles.len() - 1;
        }
        let speaker = if i < 4 {
            i
        } else {
            loop {
                let s = rng.random_range(0..4);
                if s != last {
                    break s;
                }
            }
        };
        // a mover speaks first after the change so the move is observable
        let speaker = moves.iter().find(|m| m.at == i).map_or(speaker, |m| m.speaker);
        let len = rng.random_range(1.0..2.5);
        schedule.push(ScheduledUtterance {
            source: seat[speaker],
            start_s: t,
            end_s: t + len,
            speaker: Some(speaker),
        });
        t += len + rng.random_range(0.2..0.6);
        last = speaker;
    }
    base_scene(&angles, schedule, None, seed)
}

/// One talker at 40 degrees for 6 s with a second at 160 degrees joining
/// from 2.5 s to 4.5 s.
pub fn two_talker_overlap(seed: u64) -> SceneConfig {
    let mut cfg = base_scene(
        &[40.0, 160.0],
        vec![
            ScheduledUtterance {
                source: 0,
                start_s: 0.5,
                end_s: 6.5,
                speaker: None,
            },
            ScheduledUtterance {
                source: 1,
                start_s: 2.5,
                end_s: 4.5,
                speaker: None,
            },
        ],
        Some(NoiseSpec {
            kind: spatial_diar::scenesim::NoiseKind::White,
            snr_db: 20.0,
        }),
        seed,
    );
    cfg.allow_overlap = true;
    cfg.speech = SpeechSource::Surrogate { pauses: true };
    cfg
}
