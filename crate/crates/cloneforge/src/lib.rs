//! File formats and the command-line front end for `cloneforge-core`.

pub mod cli;
pub mod format;
