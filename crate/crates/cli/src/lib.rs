//! Command line and HTTP front end for `retrovote-core`.

pub mod cli;
pub mod server;

pub use cli::{run, Cli};
