//! Library surface of the pipeline driver; the `doorslam` binary is a thin
//! clap wrapper over these modules.

pub mod commands;
pub mod config;
pub mod scenario;
