//! Library half of the `wqed` binary: configuration loading, the CSV data
//! layer, and one module per subcommand. Kept as a library so integration
//! tests can ingest and render the same files the binary does.

pub mod config;
pub mod dataio;
pub mod error;
pub mod fitcmd;
pub mod predict;
pub mod reconstruct;
pub mod simulate;
