//! Command-line front end for the DL-HIM solvers: configs, pipelines and scenario verdicts.

pub mod bench;
pub mod commands;
pub mod config;
pub mod pipeline;
