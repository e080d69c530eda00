use std::path::Path;

use spinbath::exact::loschmidt_echo_exact;
use spinbath::free_fermion::loschmidt_echo_determinant_with;
use spinbath::tebd::loschmidt_echo_tebd;
use spinbath::{EchoSeries, Method};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{write_run, RunMeta};

/// Runs the configured engine without touching the filesystem.
pub fn compute_echo(config: &RunConfig) -> Result<EchoSeries, CliError> {
    config.validate()?;
    let bath = config.bath()?;
    let coupling = config.coupling();
    let times = config.times();
    let series = match config.method {
        Method::Determinant => {
            loschmidt_echo_determinant_with(&bath, &coupling, &times, &config.determinant_options())?
        }
        Method::Exact => loschmidt_echo_exact(&bath, &coupling, &times, &config.exact_options())?,
        Method::Tebd => loschmidt_echo_tebd(&bath, &coupling, &times, &config.tebd_params())?,
    };
    Ok(series)
}

/// Computes the echo and writes `echo.csv` and `meta.json` into `dir`.
pub fn run_echo(config: &RunConfig, dir: &Path) -> Result<(RunMeta, EchoSeries), CliError> {
    let series = compute_echo(config)?;
    let meta = write_run(dir, config, &series)?;
    for flag in &series.meta.flags {
        log::warn!("{}: {flag}", dir.display());
    }
    Ok((meta, series))
}
