//! Command-line front end for the linear-rational Wishart joint mortality model:
//! JSON configuration, grid computations, CSV output and a self-check suite.

pub mod cli;
pub mod compute;
pub mod config;
pub mod report;
pub mod suite;
