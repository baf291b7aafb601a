//! Online speaker diarization for a circular microphone array.
//!
//! The numeric core is generic over `num_traits::Float`; the aliases below
//! fix it to `f64`, which is what the pipeline and CLI use.

pub mod beamformer;
pub mod clustering;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod localization;
pub mod metrics;
pub mod num;
pub mod overlap;
pub mod pipeline;
pub mod scenesim;
pub mod segmentation;
pub mod stft;
pub mod wav;

pub use error::{Error, Result};
pub use pipeline::{run_pipeline, Pipeline, PipelineConfig, PipelineOutput};

pub type ArrayGeometry = geometry::ArrayGeometry<f64>;
pub type FrequencyGrid = geometry::FrequencyGrid<f64>;
pub type Beamformer = beamformer::Beamformer<f64>;
pub type BeamBank = beamformer::BeamBank<f64>;
pub type SpatialSpectrum = localization::SpatialSpectrum<f64>;
pub type DoaEstimate = localization::DoaEstimate<f64>;
pub type Stft = stft::Stft<f64>;
