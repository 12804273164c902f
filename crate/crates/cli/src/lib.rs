//! File formats, study configuration, the parallel replication harness and
//! report writers behind the `drmtest` command.

pub mod config;
pub mod formats;
pub mod harness;
pub mod report;
