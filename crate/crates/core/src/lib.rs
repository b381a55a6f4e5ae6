//! Gaze-supervised attention toolkit, allocation-only core.
//!
//! Everything in this crate is pure computation over in-memory values:
//! gaze tracks and step statistics ([`gaze`]), power-law attention levels and
//! fixation filtering ([`segmentation`]), attention-map rendering and scoring
//! ([`attnmap`]), the CAM classifier with its attention-consistency objective
//! ([`net`]) and the synthetic lesion benchmark ([`synth`]).
//!
//! File formats, the CLI and the HTTP service live in the `gazestudio` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod attnmap;
pub mod gaze;
pub mod net;
pub mod pipeline;
pub mod segmentation;
pub mod synth;

mod rng;

pub use attnmap::{AttentionMap, BBox, KernelConfig};
pub use gaze::{GazeSample, GazeTrack, KlGrade, StepSeries, TrackMeta};
pub use segmentation::{AttentionLevelSeries, FixationMask, PowerLawFitConfig};
