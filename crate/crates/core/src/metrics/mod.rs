//! Diarization error rate and change-point segmentation accuracy.

pub mod rttm;

pub use rttm::{read_rttm, write_rttm};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scoring resolution, seconds.
pub const FRAME_S: f64 = 0.01;
/// Largest speaker count scored with exhaustive mapping.
pub const EXHAUSTIVE_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: String,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub turns: Vec<Turn>,
}

impl Annotation {
    pub fn new(turns: Vec<Turn>) -> Self {
        Self { turns }
    }

    pub fn speakers(&self) -> Vec<&str> {
        let mut s: Vec<&str> = self.turns.iter().map(|t| t.speaker.as_str()).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn end_time(&self) -> f64 {
        self.turns.iter().map(|t| t.end).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerBreakdown {
    pub missed_speech_s: f64,
    pub false_alarm_s: f64,
    pub speaker_confusion_s: f64,
    pub total_reference_speech_s: f64,
    pub der: f64,
}

/// Per-frame activity: `rows[frame]` lists active speaker indices.
fn activity(a: &Annotation, names: &[&str], frames: usize) -> Vec<Vec<usize>> {
    let mut rows = vec![Vec::new(); frames];
    for t in &a.turns {
        let s = names.binary_search(&t.speaker.as_str()).expect("speaker listed");
        let first = ((t.start / FRAME_S) - 0.5).ceil().max(0.0) as usize;
        let last = (((t.end / FRAME_S) - 0.5).ceil().max(0.0) as usize).min(frames);
        // frame i is active when start <= centre < end
        for row in rows.iter_mut().take(last).skip(first) {
            if !row.contains(&s) {
                row.push(s);
            }
        }
    }
    rows
}

fn best_mapping_exhaustive(co: &[Vec<u64>]) -> Vec<Option<usize>> {
    let nr = co.len();
    let nh = co.first().map_or(0, Vec::len);
    let mut best = (0u64, vec![None; nr]);
    let mut current = vec![None; nr];
    let mut used = vec![false; nh];
    // upper bound on what the remaining references can still add
    let remaining: Vec<u64> = (0..=nr)
        .map(|r| co[r.min(nr)..].iter().map(|row| row.iter().copied().max().unwrap_or(0)).sum())
        .collect();

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        r: usize,
        acc: u64,
        co: &[Vec<u64>],
        remaining: &[u64],
        used: &mut [bool],
        current: &mut [Option<usize>],
        best: &mut (u64, Vec<Option<usize>>),
    ) {
        if r == co.len() {
            if acc > best.0 {
                *best = (acc, current.to_vec());
            }
            return;
        }
        if acc + remaining[r] <= best.0 {
            return;
        }
        for h in 0..used.len() {
            if !used[h] && co[r][h] > 0 {
                used[h] = true;
                current[r] = Some(h);
                dfs(r + 1, acc + co[r][h], co, remaining, used, current, best);
                used[h] = false;
                current[r] = None;
            }
        }
        dfs(r + 1, acc, co, remaining, used, current, best);
    }
    dfs(0, 0, co, &remaining, &mut used, &mut current, &mut best);
    best.1
}

fn best_mapping_greedy(co: &[Vec<u64>]) -> Vec<Option<usize>> {
    let mut pairs: Vec<(u64, usize, usize)> = co
        .iter()
        .enumerate()
        .flat_map(|(r, row)| row.iter().enumerate().map(move |(h, &c)| (c, r, h)))
        .filter(|p| p.0 > 0)
        .collect();
    pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut map = vec![None; co.len()];
    let mut used = vec![false; co.first().map_or(0, Vec::len)];
    for (_, r, h) in pairs {
        if map[r].is_none() && !used[h] {
            map[r] = Some(h);
            used[h] = true;
        }
    }
    map
}

/// Frame-level DER with an optimal one-to-one speaker mapping. Frames whose
/// centre lies within `collar_s` of a reference boundary are not scored.
pub fn der(reference: &Annotation, hypothesis: &Annotation, collar_s: f64) -> Result<DerBreakdown> {
    let ref_names = reference.speakers();
    let hyp_names = hypothesis.speakers();
    let end = reference.end_time().max(hypothesis.end_time()) + collar_s;
    let frames = (end / FRAME_S).ceil() as usize + 1;
    let ref_act = activity(reference, &ref_names, frames);
    let hyp_act = activity(hypothesis, &hyp_names, frames);

    let mut scored = vec![true; frames];
    if collar_s > 0.0 {
        for t in &reference.turns {
            for b in [t.start, t.end] {
                let lo = ((b - collar_s) / FRAME_S - 0.5).floor().max(0.0) as usize;
                let hi = (((b + collar_s) / FRAME_S - 0.5).ceil().max(0.0) as usize).min(frames - 1);
                for (i, s) in scored.iter_mut().enumerate().take(hi + 1).skip(lo) {
                    let centre = (i as f64 + 0.5) * FRAME_S;
                    if (centre - b).abs() < collar_s {
                        *s = false;
                    }
                }
            }
        }
    }

    let mut co = vec![vec![0u64; hyp_names.len()]; ref_names.len()];
    for i in (0..frames).filter(|&i| scored[i]) {
        for &r in &ref_act[i] {
            for &h in &hyp_act[i] {
                co[r][h] += 1;
            }
        }
    }
    let mapping = if ref_names.len().max(hyp_names.len()) <= EXHAUSTIVE_LIMIT {
        best_mapping_exhaustive(&co)
    } else {
        best_mapping_greedy(&co)
    };

    let (mut total, mut missed, mut fa, mut conf) = (0u64, 0u64, 0u64, 0u64);
    for i in (0..frames).filter(|&i| scored[i]) {
        let nr = ref_act[i].len() as u64;
        let nh = hyp_act[i].len() as u64;
        let correct = ref_act[i]
            .iter()
            .filter(|&&r| mapping[r].is_some_and(|h| hyp_act[i].contains(&h)))
            .count() as u64;
        total += nr;
        missed += nr.saturating_sub(nh);
        fa += nh.saturating_sub(nr);
        conf += nr.min(nh) - correct;
    }
    if total == 0 {
        return Err(Error::EmptyReference);
    }
    Ok(DerBreakdown {
        missed_speech_s: missed as f64 * FRAME_S,
        false_alarm_s: fa as f64 * FRAME_S,
        speaker_confusion_s: conf as f64 * FRAME_S,
        total_reference_speech_s: total as f64 * FRAME_S,
        der: (missed + fa + conf) as f64 / total as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationScore {
    /// `None` when there are no interims to score.
    pub accuracy: Option<f64>,
    pub covered: usize,
    pub interims: usize,
    pub spurious_changes: usize,
}

/// Fraction of interims (closed intervals) holding at least one change.
pub fn segmentation_accuracy(interims: &[(f64, f64)], changes: &[f64]) -> SegmentationScore {
    let mut hits: BTreeMap<usize, usize> = BTreeMap::new();
    let mut spurious = 0;
    for &c in changes {
        // interims are sorted and disjoint
        let k = interims.partition_point(|iv| iv.1 < c);
        match interims.get(k) {
            Some(iv) if iv.0 <= c => *hits.entry(k).or_default() += 1,
            _ => spurious += 1,
        }
    }
    SegmentationScore {
        accuracy: (!interims.is_empty()).then(|| hits.len() as f64 / interims.len() as f64),
        covered: hits.len(),
        interims: interims.len(),
        spurious_changes: spurious,
    }
}
