//! Command-line front end for `blackbox-core`.

pub mod args;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod sim;

use std::path::PathBuf;

use args::{Cli, Command};
use error::Result;
use pipeline::RunConfig;

/// Executes a parsed command line and returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    match &cli.command {
        Command::Fit(a) => pipeline::run_fit(&RunConfig::from_fit_flags(&a.fit, None)?),
        Command::Pipeline(a) => pipeline::run_pipeline(&RunConfig::from_fit_flags(&a.fit, Some(&a.junction))?),
        Command::Quantize(a) => {
            let modes = a
                .modes
                .as_deref()
                .ok_or_else(|| error::CliError::config("--modes is required"))?;
            pipeline::run_quantize(modes, &a.junction, &a.output_dir)
        }
        Command::Rcsj(a) => sim::run_rcsj(a),
    }
}
