//! Speaker-embedding providers: precomputed vectors from a file, or a
//! synthetic Gaussian-per-speaker generator driven by ground truth.

use std::collections::HashMap;
use std::io::BufRead;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::cosine_similarity;
use crate::num::circular_distance;
use crate::error::{Error, Result};

pub trait EmbeddingProvider {
    /// Embedding for the `ordinal`-th segment of the session, extracted
    /// toward `doa` when known.
    fn embed(&mut self, ordinal: usize, start: f64, end: f64, doa: Option<f64>) -> Result<Vec<f64>>;
}

/// Vectors keyed by segment ordinal, one `key,v0,v1,...` line each.
#[derive(Debug, Clone, Default)]
pub struct FileEmbeddings {
    vectors: HashMap<String, Vec<f64>>,
}

impl FileEmbeddings {
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut vectors = HashMap::new();
        let mut dim = None;
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split(',').map(str::trim);
            let key = fields.next().unwrap_or_default().to_string();
            let v = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: n + 1,
                    msg: e.to_string(),
                })?;
            if v.is_empty() {
                return Err(Error::Parse {
                    line: n + 1,
                    msg: "embedding has no components".into(),
                });
            }
            if *dim.get_or_insert(v.len()) != v.len() {
                return Err(Error::Parse {
                    line: n + 1,
                    msg: format!("expected {} components, got {}", dim.unwrap_or(0), v.len()),
                });
            }
            vectors.insert(key, v);
        }
        Ok(Self { vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl EmbeddingProvider for FileEmbeddings {
    fn embed(&mut self, ordinal: usize, _start: f64, _end: f64, _doa: Option<f64>) -> Result<Vec<f64>> {
        self.vectors
            .get(&ordinal.to_string())
            .cloned()
            .ok_or_else(|| Error::Config(format!("embedding file has no vector for segment {ordinal}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeakerTurn {
    pub speaker_id: usize,
    pub start: f64,
    pub end: f64,
    /// Radians.
    #[serde(default)]
    pub angle: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticEmbeddingConfig {
    pub dim: usize,
    /// Per-component standard deviation of the segment noise.
    pub sigma: f64,
    pub max_pairwise_cosine: f64,
    pub seed: u64,
}

impl Default for SyntheticEmbeddingConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            sigma: 0.05,
            max_pairwise_cosine: 0.2,
            seed: 0,
        }
    }
}

fn gaussian_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Unit centroids with pairwise cosine at most `max_pairwise_cosine`.
pub fn synthetic_centroids(count: usize, config: &SyntheticEmbeddingConfig) -> Result<Vec<Vec<f64>>> {
    if config.dim == 0 {
        return Err(Error::Config("embedding dimension must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::Config(format!(
                "cannot place {count} centroids in {} dimensions with cosine <= {}",
                config.dim, config.max_pairwise_cosine
            )));
        }
        let c = gaussian_unit(&mut rng, config.dim);
        if out.iter().all(|o| cosine_similarity(o, &c) <= config.max_pairwise_cosine) {
            out.push(c);
        }
    }
    Ok(out)
}

/// Draws each segment's embedding around the centroid of the speaker who
/// talks most during it.
#[derive(Debug, Clone)]
pub struct SyntheticEmbeddings {
    config: SyntheticEmbeddingConfig,
    turns: Vec<SpeakerTurn>,
    centroids: Vec<Vec<f64>>,
}

impl SyntheticEmbeddings {
    pub fn new(turns: Vec<SpeakerTurn>, config: SyntheticEmbeddingConfig) -> Result<Self> {
        let speakers = turns.iter().map(|t| t.speaker_id + 1).max().unwrap_or(0);
        let centroids = synthetic_centroids(speakers, &config)?;
        Ok(Self {
            config,
            turns,
            centroids,
        })
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    /// Among speakers active in `[start, end]`, the one nearest `doa` when
    /// turn angles are known, else the one with the largest overlap. Falls
    /// back to the nearest turn in time.
    pub fn dominant_speaker(&self, start: f64, end: f64, doa: Option<f64>) -> Option<usize> {
        let mut overlap: HashMap<usize, (f64, f64)> = HashMap::new();
        for t in &self.turns {
            let o = end.min(t.end) - start.max(t.start);
            if o > 0.0 {
                let dist = match (doa, t.angle) {
                    (Some(d), Some(a)) => circular_distance(d, a),
                    _ => 0.0,
                };
                let e = overlap.entry(t.speaker_id).or_insert((0.0, f64::INFINITY));
                e.0 += o;
                e.1 = e.1.min(dist);
            }
        }
        let best = overlap
            .into_iter()
            .max_by(|a, b| {
                b.1 .1
                    .total_cmp(&a.1 .1)
                    .then(a.1 .0.total_cmp(&b.1 .0))
                    .then(b.0.cmp(&a.0))
            })
            .map(|(s, _)| s);
        best.or_else(|| {
            self.turns
                .iter()
                .map(|t| {
                    let gap = (t.start - end).max(start - t.end).max(0.0);
                    (gap, t.speaker_id)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|(_, s)| s)
        })
    }

    /// Noisy embedding of `speaker`, reproducible per ordinal.
    pub fn draw(&self, speaker: usize, ordinal: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(ordinal as u64 + 1);
        let v: Vec<f64> = self.centroids[speaker]
            .iter()
            .map(|c| c + self.config.sigma * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }
}

impl EmbeddingProvider for SyntheticEmbeddings {
    fn embed(&mut self, ordinal: usize, start: f64, end: f64, doa: Option<f64>) -> Result<Vec<f64>> {
        let speaker = self
            .dominant_speaker(start, end, doa)
            .ok_or_else(|| Error::DegenerateInput("synthetic embeddings need at least one speaker turn".into()))?;
        Ok(self.draw(speaker, ordinal))
    }
}
