//! Command-line pipeline around `lti-core`: configuration, dataset presets
//! and the decompose / train / calibrate / detect / evaluate commands.

pub mod commands;
pub mod config;
pub mod pipeline;

pub use commands::{exit_code, run, Cli};
pub use config::{Overrides, PipelineConfig, PRESETS};
