//! Command-line front end of `semres-core`: theory curves, Monte Carlo
//! sweeps, decision profiles and toy-model training, written as CSV files
//! with a JSON manifest per run.

pub mod cli;
pub mod commands;
pub mod config;
pub mod manifest;
pub mod output;
pub mod parallel;

use anyhow::Result;
use clap::Parser;

pub use cli::Cli;
pub use commands::run;
pub use manifest::RunManifest;

/// Parses `args` (program name first) after expanding any `--config` file.
pub fn parse_args<I, S>(args: I) -> Result<Cli>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args = config::expand_args(args.into_iter().map(Into::into).collect())?;
    Ok(Cli::try_parse_from(args)?)
}
