//! Role CLIs, wire protocol, server, configuration, and the benchmark
//! harness on top of `veilblock-core`.

pub mod bench;
pub mod commands;
pub mod config;
pub mod keyfiles;
pub mod server;
pub mod statedir;
pub mod util;
pub mod wire;
