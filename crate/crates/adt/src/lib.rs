//! Session server and command-line tools.

pub mod cli;
pub mod server;
