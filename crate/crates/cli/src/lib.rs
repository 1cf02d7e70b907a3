//! Config parsing, experiment execution and verification suites behind the
//! `dispersim` binary.

pub mod commands;
pub mod config;
pub mod exec;
pub mod suites;
pub mod sweep;
