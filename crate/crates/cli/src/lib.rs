//! Command-line front end: mesh and point-cloud files, config files,
//! bundled procedural meshes and the benchmark harnesses behind the
//! `otsample` binary.

pub mod assets;
pub mod commands;
pub mod config;
pub mod experiments;
pub mod io;

pub use commands::{run, Cli};
