//! Pipeline orchestration for `semmap-core`: configuration, the end-to-end
//! run, subcommands over stored intermediates, SVG rendering and a
//! synthetic corpus generator.

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod svg;
pub mod synth;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
