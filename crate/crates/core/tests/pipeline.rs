//! End-to-end runs of the batch pipeline on rendered scenes.

mod common;

use common::scenes::base_scene;
use spatial_diar::localization::uniform_grid;
use spatial_diar::metrics::{der, segmentation_accuracy};
use spatial_diar::num::circular_distance;
use spatial_diar::overlap::dip_statistic;
use spatial_diar::pipeline::{run_pipeline, EmbeddingConfig, PipelineConfig};
use spatial_diar::scenesim::{synthesize, NoiseKind, NoiseSpec, SceneConfig, ScheduledUtterance};

fn no_embeddings() -> PipelineConfig {
    PipelineConfig {
        embeddings: EmbeddingConfig::None,
        ..PipelineConfig::default()
    }
}

fn white(snr_db: f64) -> Option<NoiseSpec> {
    Some(NoiseSpec {
        kind: NoiseKind::White,
        snr_db,
    })
}

#[test]
fn single_talker_on_grid_angle() {
    let cfg = base_scene(
        &[95.0],
        vec![ScheduledUtterance {
            source: 0,
            start_s: 0.2,
            end_s: 2.2,
            speaker: None,
        }],
        white(20.0),
        11,
    );
    let scene = synthesize(&cfg).unwrap();
    let out = run_pipeline(&scene.audio, no_embeddings(), None).unwrap();
    let mut hits: Vec<f64> = out.frames.iter().filter_map(|r| r.theta_filtered).map(f64::to_degrees).collect();
    assert!(hits.len() > 50);
    hits.sort_by(f64::total_cmp);
    let median = hits[hits.len() / 2];
    assert!((median - 95.0).abs() < 1e-9, "{median}");
}

#[test]
fn round_robin_gives_one_segment_per_turn() {
    let scene = synthesize(&SceneConfig::round_robin(9, 300.0, white(20.0), 21)).unwrap();
    let out = run_pipeline(&scene.audio, no_embeddings(), None).unwrap();
    let primary: Vec<_> = out.segments.iter().filter(|s| !s.secondary).collect();
    assert_eq!(primary.len(), scene.truth.utterances.len());
    for (seg, utt) in primary.iter().zip(&scene.truth.utterances) {
        let doa = seg.doa.expect("localized segment");
        assert!(circular_distance(doa, utt.angle) <= 5f64.to_radians(), "{seg:?} vs {utt:?}");
    }
}

#[test]
fn round_robin_changes_land_in_every_interim() {
    let scene = synthesize(&SceneConfig::round_robin(16, 300.0, white(10.0), 5)).unwrap();
    let out = run_pipeline(&scene.audio, no_embeddings(), None).unwrap();
    let score = segmentation_accuracy(&scene.truth.interim_bounds(), &out.change_times());
    assert_eq!(score.interims, 15);
    assert_eq!(score.accuracy, Some(1.0), "{score:?}");
    assert_eq!(score.spurious_changes, 0);
}

#[test]
fn three_speakers_diarize_cleanly() {
    let scene = synthesize(&SceneConfig::round_robin(12, 300.0, white(20.0), 8)).unwrap();
    let out = run_pipeline(&scene.audio, PipelineConfig::default(), Some(&scene.truth)).unwrap();
    let report = der(&scene.truth.reference(), &out.annotation(0.3), 0.25).unwrap();
    assert!(report.der < 0.05, "{report:?}");
}

#[test]
fn diffuse_noise_has_no_dominant_direction() {
    let mut cfg = base_scene(&[0.0], Vec::new(), white(0.0), 2);
    cfg.duration_s = Some(3.0);
    let scene = synthesize(&cfg).unwrap();
    let mut pc = no_embeddings();
    pc.output.keep_spectrum = true;
    let out = run_pipeline(&scene.audio, pc, None).unwrap();
    let grid = uniform_grid::<f64>(72);
    assert!(out.frames.len() > 150);
    for r in &out.frames {
        let d = dip_statistic(&grid, r.spectrum.as_deref().unwrap()).unwrap().dip;
        assert!(d < 0.02, "frame {}: dip {d}", r.frame_index);
    }
}
