//! Library surface of the `oscmodes` pipeline front end, kept separate from
//! the binary so integration and acceptance tests can drive commands
//! directly.

pub mod commands;
pub mod config;
pub mod report;
pub mod svg;
