//! Meeting-room noise generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use super::shape_spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    White,
    Fan,
    Knock,
    Keyboard,
    Chair,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 5] = [Self::White, Self::Fan, Self::Knock, Self::Keyboard, Self::Chair];

    pub fn name(self) -> &'static str {
        match self {
            Self::White => "white",
            Self::Fan => "fan",
            Self::Knock => "knock",
            Self::Keyboard => "keyboard",
            Self::Chair => "chair",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseEvent {
    pub start_s: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSignal {
    pub samples: Vec<f64>,
    /// Onsets of sparse events; empty for stationary kinds.
    pub events: Vec<NoiseEvent>,
}

const KNOCK_RATE: f64 = 0.5;
const KEYBOARD_RATE: f64 = 3.0;
const CHAIR_RATE: f64 = 0.2;

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Poisson event onsets in `[0, duration)`.
fn poisson_onsets(rng: &mut ChaCha8Rng, rate: f64, duration: f64) -> Vec<f64> {
    let gap = Exp::new(rate).expect("positive rate");
    let mut t = gap.sample(rng);
    let mut out = Vec::new();
    while t < duration {
        out.push(t);
        t += gap.sample(rng);
    }
    out
}

fn add_at(out: &mut [f64], start: usize, burst: &[f64]) {
    for (o, b) in out.iter_mut().skip(start).zip(burst) {
        *o += b;
    }
}

pub fn make_noise(kind: NoiseKind, duration_s: f64, sample_rate: f64, seed: u64) -> NoiseSignal {
    let n = (duration_s * sample_rate).round().max(0.0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    let samples = match kind {
        NoiseKind::White => gaussian(&mut rng, n),
        NoiseKind::Fan => {
            let mut x = gaussian(&mut rng, n);
            shape_spectrum(&mut x, sample_rate, |f| 1.0 / (1.0 + (f / 500.0).powi(8)).sqrt());
            let (rate, phase) = (rng.random_range(0.2..0.6), rng.random_range(0.0..std::f64::consts::TAU));
            for (i, v) in x.iter_mut().enumerate() {
                let t = i as f64 / sample_rate;
                *v *= 1.0 + 0.3 * (std::f64::consts::TAU * rate * t + phase).sin();
            }
            x
        }
        NoiseKind::Knock => {
            let mut x = vec![0.0; n];
            for t0 in poisson_onsets(&mut rng, KNOCK_RATE, duration_s) {
                let f0 = rng.random_range(150.0..500.0);
                let tau = rng.random_range(0.01..0.03);
                let amp = rng.random_range(0.5..1.0);
                let len = ((8.0 * tau) * sample_rate) as usize;
                let burst: Vec<f64> = (0..len)
                    .map(|i| {
                        let t = i as f64 / sample_rate;
                        let click: f64 = StandardNormal.sample(&mut rng);
                        amp * ((std::f64::consts::TAU * f0 * t).sin() * (-t / tau).exp()
                            + 0.3 * click * (-t / 0.002).exp())
                    })
                    .collect();
                add_at(&mut x, (t0 * sample_rate) as usize, &burst);
                events.push(NoiseEvent {
                    start_s: t0,
                    duration_s: len as f64 / sample_rate,
                });
            }
            x
        }
        NoiseKind::Keyboard => {
            let mut x = vec![0.0; n];
            for t0 in poisson_onsets(&mut rng, KEYBOARD_RATE, duration_s) {
                let len = (0.012 * sample_rate) as usize;
                let mut burst = gaussian(&mut rng, len);
                shape_spectrum(&mut burst, sample_rate, |f| if (2000.0..=6000.0).contains(&f) { 1.0 } else { 0.0 });
                let amp = rng.random_range(0.5..1.0);
                for (i, b) in burst.iter_mut().enumerate() {
                    *b *= amp * (-(i as f64 / sample_rate) / 0.003).exp();
                }
                add_at(&mut x, (t0 * sample_rate) as usize, &burst);
                events.push(NoiseEvent {
                    start_s: t0,
                    duration_s: len as f64 / sample_rate,
                });
            }
            x
        }
        NoiseKind::Chair => {
            let mut x = vec![0.0; n];
            for t0 in poisson_onsets(&mut rng, CHAIR_RATE, duration_s) {
                let dur = rng.random_range(1.0..2.0);
                let len = (dur * sample_rate) as usize;
                let mut burst = gaussian(&mut rng, len);
                shape_spectrum(&mut burst, sample_rate, |f| if (200.0..=2000.0).contains(&f) { 1.0 } else { 0.0 });
                for (i, b) in burst.iter_mut().enumerate() {
                    let u = i as f64 / len as f64;
                    *b *= (std::f64::consts::PI * u).sin().powi(2);
                }
                add_at(&mut x, (t0 * sample_rate) as usize, &burst);
                events.push(NoiseEvent {
                    start_s: t0,
                    duration_s: dur,
                });
            }
            x
        }
    };
    NoiseSignal { samples, events }
}
