//! File formats, dataset IO, statistics and the HTTP service around
//! `gazestudio-core`. The `gaze-studio` binary exposes these as subcommands.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod gamap;
pub mod manifest;
pub mod service;
pub mod stats;
pub mod track;

pub use gazestudio_core as core;
