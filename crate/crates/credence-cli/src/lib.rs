//! Library surface of the command-line tool, split out so integration tests
//! can drive the commands directly.

pub mod commands;
pub mod config;
pub mod records;

pub use commands::{cmd_attack, cmd_credibility, cmd_filter_curve, cmd_gamma_sweep, cmd_verify};
pub use config::{RunConfig, WeightConfig};
