//! Speech surrogate: speech-shaped noise with syllabic modulation, gated
//! into word-like bursts.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::shape_spectrum;

pub const SYLLABLE_RATE_HZ: f64 = 4.0;
const MODULATION_DEPTH: f64 = 0.6;
const RAMP_S: f64 = 0.005;
const BURST_S: (f64, f64) = (0.15, 0.45);
const PAUSE_S: (f64, f64) = (0.04, 0.12);

/// Long-term speech spectrum: rises to ~200 Hz, rolls off 6 dB/octave
/// above ~800 Hz, band-limited to 80 Hz..7.5 kHz.
pub fn speech_spectrum_gain(f: f64) -> f64 {
    if !(80.0..=7500.0).contains(&f) {
        return 0.0;
    }
    let hp = (f / 200.0) / (1.0 + (f / 200.0).powi(2)).sqrt();
    let lp = 1.0 / (1.0 + (f / 800.0).powi(2)).sqrt();
    hp * lp
}

/// Burst intervals (seconds) covering `[0, duration]`: starts with a burst
/// at 0 and the last burst runs to the end.
pub fn word_bursts(rng: &mut ChaCha8Rng, duration: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        let burst = rng.random_range(BURST_S.0..BURST_S.1);
        let pause = rng.random_range(PAUSE_S.0..PAUSE_S.1);
        if t + burst + pause + BURST_S.0 >= duration {
            out.push((t, duration));
            return out;
        }
        out.push((t, t + burst));
        t += burst + pause;
    }
}

/// Unit-RMS surrogate of `n` samples.
pub fn speech_surrogate(rng: &mut ChaCha8Rng, n: usize, sample_rate: f64, pauses: bool) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    shape_spectrum(&mut x, sample_rate, speech_spectrum_gain);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let duration = n as f64 / sample_rate;
    let bursts = if pauses {
        word_bursts(rng, duration)
    } else {
        vec![(0.0, duration)]
    };
    let mut gate = vec![0.0; n];
    for (a, b) in bursts {
        let (i0, i1) = ((a * sample_rate) as usize, ((b * sample_rate) as usize).min(n));
        let ramp = ((RAMP_S * sample_rate) as usize).max(1).min((i1 - i0) / 2);
        for (i, g) in gate[i0..i1].iter_mut().enumerate() {
            let edge = i.min(i1 - i0 - 1 - i);
            *g = if edge >= ramp {
                1.0
            } else {
                0.5 - 0.5 * (std::f64::consts::PI * (edge as f64 + 0.5) / ramp as f64).cos()
            };
        }
    }
    for (i, (v, g)) in x.iter_mut().zip(&gate).enumerate() {
        let t = i as f64 / sample_rate;
        let am = 1.0 - MODULATION_DEPTH * (0.5 + 0.5 * (std::f64::consts::TAU * SYLLABLE_RATE_HZ * t + phase).cos());
        *v *= am * g;
    }
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v /= rms);
    }
    x
}
