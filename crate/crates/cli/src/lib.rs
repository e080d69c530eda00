//! Configuration-driven runner around the `spinbath` engines: single echo
//! runs, parameter sweeps, analyses of stored series, gate compilation and
//! the cross-engine calibration check.
//!
//! Every run directory holds `echo.csv` (header `t,loschmidt`) and
//! `meta.json`, which records the resolved configuration, the engine
//! metadata and the convention hash. Files are written to a temporary name
//! and renamed into place.

pub mod analyze;
pub mod compile;
pub mod config;
pub mod error;
pub mod oracle;
pub mod output;
pub mod run;
pub mod sweep;

pub use config::RunConfig;
pub use error::CliError;
