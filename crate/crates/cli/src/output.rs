//! Run directories: `echo.csv`, `meta.json` and atomic file writes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spinbath::echo::ENGINE_VERSION;
use spinbath::{EchoMeta, EchoSeries};

use crate::config::RunConfig;
use crate::error::CliError;

pub const ECHO_FILE: &str = "echo.csv";
pub const META_FILE: &str = "meta.json";
pub const CSV_HEADER: &str = "t,loschmidt";

/// Physical and numerical conventions shared by all engines. Any change
/// here changes [`convention_hash`] and marks older outputs as incomparable.
pub const CONVENTIONS: &str = "\
H_E = -(J/2) sum_j [(1+gamma) X_j X_j+1 + (1-gamma) Y_j Y_j+1 + Delta Z_j Z_j+1 + 2 lambda Z_j]
H_e = H_E - epsilon Z_site, H_g = H_E
L(t) = |<psi0| exp(-i H_e t) |psi0>|^2, psi0 ground state of H_E
alpha defined by L = exp(-alpha t^2)
sites 1-based in configuration, basis bit k = site k+1, bit 0 = spin up
Jordan-Wigner: occupied mode = spin up
";

pub fn convention_hash() -> String {
    sha256_hex(CONVENTIONS.as_bytes())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config: RunConfig,
    pub config_sha256: String,
    pub engine_version: String,
    pub convention_hash: String,
    pub echo: EchoMeta,
}

impl RunMeta {
    pub fn new(config: &RunConfig, echo: &EchoMeta) -> Self {
        let mut config = config.clone();
        config.output = None;
        let canonical = serde_json::to_vec(&config).expect("configuration serializes");
        Self {
            config_sha256: sha256_hex(&canonical),
            config,
            engine_version: ENGINE_VERSION.to_string(),
            convention_hash: convention_hash(),
            echo: echo.clone(),
        }
    }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn echo_csv(series: &EchoSeries) -> String {
    let mut out = String::with_capacity(48 * (series.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (t, l) in series.iter() {
        writeln!(out, "{t:.17e},{l:.17e}").unwrap();
    }
    out
}

pub fn parse_echo_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(CliError::Validation(format!("echo CSV must start with '{CSV_HEADER}'")));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || CliError::Validation(format!("malformed echo CSV row {}: '{line}'", k + 2));
        let (t, l) = line.split_once(',').ok_or_else(bad)?;
        times.push(t.trim().parse().map_err(|_| bad())?);
        values.push(l.trim().parse().map_err(|_| bad())?);
    }
    Ok((times, values))
}

/// Writes a run directory; the CSV lands before the metadata.
pub fn write_run(dir: &Path, config: &RunConfig, series: &EchoSeries) -> Result<RunMeta, CliError> {
    let meta = RunMeta::new(config, &series.meta);
    write_atomic(&dir.join(ECHO_FILE), echo_csv(series).as_bytes())?;
    write_json(&dir.join(META_FILE), &meta)?;
    Ok(meta)
}

pub fn read_run(dir: &Path) -> Result<(RunMeta, EchoSeries), CliError> {
    let meta: RunMeta = read_json(&dir.join(META_FILE))?;
    let csv = dir.join(ECHO_FILE);
    let text = fs::read_to_string(&csv).map_err(|e| CliError::io(&csv, e))?;
    let (times, values) = parse_echo_csv(&text)?;
    let series = EchoSeries::new(times, values, meta.echo.clone())?;
    Ok((meta, series))
}

/// `--output` wins over the configuration's `output`.
pub fn resolve_output(flag: Option<&Path>, config: Option<&Path>) -> Result<PathBuf, CliError> {
    flag.or(config)
        .map(Path::to_path_buf)
        .ok_or_else(|| CliError::Validation("no output directory: pass --output or set `output`".into()))
}
