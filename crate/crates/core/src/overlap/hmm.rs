//! Three-state source-count tracker driven by VAD posterior and dip.

use serde::{Deserialize, Serialize};

use crate::num::logistic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceCount {
    NoSpeech,
    OneSource,
    TwoSources,
}

impl SourceCount {
    pub const ALL: [SourceCount; 3] = [Self::NoSpeech, Self::OneSource, Self::TwoSources];

    pub fn name(self) -> &'static str {
        match self {
            Self::NoSpeech => "no_speech",
            Self::OneSource => "one_source",
            Self::TwoSources => "two_sources",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HmmParams {
    pub self_transition: f64,
    pub dip_center: f64,
    pub dip_scale: f64,
    /// Keeps the one/two-source emission split away from 0 and 1 so a
    /// single extreme dip cannot override the transition prior.
    pub emission_floor: f64,
}

impl Default for HmmParams {
    fn default() -> Self {
        Self {
            self_transition: 0.95,
            dip_center: 0.05,
            dip_scale: 0.015,
            emission_floor: 0.05,
        }
    }
}

impl HmmParams {
    /// Emission likelihoods in state order.
    pub fn emissions(&self, vad_posterior: f64, dip: f64) -> [f64; 3] {
        let v = vad_posterior.clamp(0.0, 1.0);
        let s = logistic((dip - self.dip_center) / self.dip_scale);
        let e = self.emission_floor;
        let s = e + (1.0 - 2.0 * e) * s;
        [1.0 - v, v * (1.0 - s), v * s]
    }

    fn log_transition(&self, from: usize, to: usize) -> f64 {
        if from == to {
            self.self_transition.ln()
        } else {
            ((1.0 - self.self_transition) / 2.0).ln()
        }
    }
}

/// Forward scores as normalized log posteriors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceCountState {
    pub state: SourceCount,
    pub log_likelihoods: [f64; 3],
}

impl Default for SourceCountState {
    fn default() -> Self {
        let u = (1.0f64 / 3.0).ln();
        Self {
            state: SourceCount::NoSpeech,
            log_likelihoods: [u; 3],
        }
    }
}

impl SourceCountState {
    pub fn posteriors(&self) -> [f64; 3] {
        self.log_likelihoods.map(f64::exp)
    }
}

const LOG_FLOOR: f64 = 1e-12;

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// One forward-algorithm step.
pub fn hmm_step(state: &SourceCountState, params: &HmmParams, vad_posterior: f64, dip: f64) -> SourceCountState {
    let emissions = params.emissions(vad_posterior, dip);
    let mut next = [0.0; 3];
    for (to, slot) in next.iter_mut().enumerate() {
        let terms: Vec<f64> = (0..3)
            .map(|from| state.log_likelihoods[from] + params.log_transition(from, to))
            .collect();
        *slot = log_sum_exp(&terms) + emissions[to].max(LOG_FLOOR).ln();
    }
    let z = log_sum_exp(&next);
    for v in &mut next {
        *v -= z;
    }
    let best = (0..3).fold(0, |b, i| if next[i] > next[b] { i } else { b });
    SourceCountState {
        state: SourceCount::ALL[best],
        log_likelihoods: next,
    }
}
