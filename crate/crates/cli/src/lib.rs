//! Library side of the `hybrid-uc` command: running solves and seed sweeps
//! and writing their reports.

pub mod report;
pub mod run;
