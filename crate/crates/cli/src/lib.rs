//! Command-line front end of the simulator: run, sweep, selftest and toy
//! data generation.

pub mod commands;
pub mod config;
pub mod report;

use std::fmt;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_SELFTEST: i32 = 3;

#[derive(Debug)]
pub enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
    /// Rendered check list.
    Selftest(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Runtime(_) => EXIT_RUNTIME,
            Failure::Selftest(_) => EXIT_SELFTEST,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(e) => write!(f, "invalid input: {e:#}"),
            Failure::Runtime(e) => write!(f, "runtime failure: {e:#}"),
            Failure::Selftest(s) => write!(f, "selftest failed:\n{s}"),
        }
    }
}
