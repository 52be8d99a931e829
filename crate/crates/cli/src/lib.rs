//! Command-line front end for `colscan-core`, plus the live telemetry server.

pub mod protocol;
pub mod serve;
