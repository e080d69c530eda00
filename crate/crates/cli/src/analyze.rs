//! Reports computed from stored runs. `gaussian`, `plateau` and `logdecay`
//! accept a run directory or a sweep directory (one row per completed
//! point); `critical` and `concurrence` need a sweep.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinbath::analysis::{
    coupled_pair_concurrence, decay_window, fit_critical_scaling, fit_exponential_decay, fit_gaussian_rate,
    fit_log_decay_window, plateau_value, predicted_alpha_with, ConcurrenceReport, ConcurrenceRow,
    CriticalScalingFit, ExponentialFit, GaussianFit, LogDecayFit, PlateauEstimate,
};
use spinbath::EchoSeries;

use crate::error::CliError;
use crate::output::{read_run, write_json, RunMeta};
use crate::sweep::{SweepIndex, INDEX_FILE};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisKind {
    Gaussian,
    Plateau,
    Critical,
    Logdecay,
    Concurrence,
}

impl AnalysisKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AnalysisKind::Gaussian => "gaussian",
            AnalysisKind::Plateau => "plateau",
            AnalysisKind::Critical => "critical",
            AnalysisKind::Logdecay => "logdecay",
            AnalysisKind::Concurrence => "concurrence",
        }
    }

    /// Report file written next to the input by default.
    pub fn default_report(&self, input: &Path) -> PathBuf {
        input.join(format!("analysis-{}.json", self.as_str()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianReport {
    pub fit: GaussianFit,
    /// `ε²(1 − ⟨σᶻ⟩²)` for the run's bath.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogDecayReport {
    pub log_decay: LogDecayFit,
    pub exponential: ExponentialFit,
    /// Lower rms residual for the logarithmic form on the same window.
    pub log_preferred: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow<T> {
    pub index: usize,
    pub dir: String,
    pub parameters: std::collections::BTreeMap<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub dir: String,
    pub n: usize,
    pub l_inf: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub points: Vec<CriticalPoint>,
    pub fit: CriticalScalingFit,
}

pub fn gaussian_report(meta: &RunMeta, series: &EchoSeries) -> Result<GaussianReport, CliError> {
    let fit = fit_gaussian_rate(series)?;
    let prediction = predicted_alpha_with(
        &series.meta.bath,
        &series.meta.coupling,
        meta.config.determinant.zero_modes,
        &meta.config.exact_options(),
    );
    let (predicted_alpha, prediction_error) = match prediction {
        Ok(a) => (Some(a), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(GaussianReport {
        fit,
        predicted_alpha,
        prediction_error,
    })
}

pub fn plateau_report(series: &EchoSeries) -> Result<PlateauEstimate, CliError> {
    Ok(plateau_value(series, &series.meta.bath)?)
}

pub fn logdecay_report(series: &EchoSeries) -> Result<LogDecayReport, CliError> {
    let window = decay_window(&series.meta.bath);
    let log_decay = fit_log_decay_window(series, window)?;
    let exponential = fit_exponential_decay(series, window)?;
    Ok(LogDecayReport {
        log_preferred: log_decay.rms_residual < exponential.rms_residual,
        log_decay,
        exponential,
    })
}

fn is_sweep(input: &Path) -> bool {
    input.join(INDEX_FILE).is_file()
}

fn per_point<T>(
    input: &Path,
    f: impl Fn(&RunMeta, &EchoSeries) -> Result<T, CliError>,
) -> Result<Vec<SweepRow<T>>, CliError> {
    let index = SweepIndex::load(input)?;
    Ok(index
        .completed_dirs(input)
        .map(|(entry, dir)| {
            let result = read_run(&dir).and_then(|(meta, series)| f(&meta, &series));
            SweepRow {
                index: entry.index,
                dir: entry.dir.clone(),
                parameters: entry.parameters.clone(),
                error: result.as_ref().err().map(|e| e.to_string()),
                report: result.ok(),
            }
        })
        .collect())
}

fn single_or_sweep<T: Serialize>(
    input: &Path,
    f: impl Fn(&RunMeta, &EchoSeries) -> Result<T, CliError>,
) -> Result<serde_json::Value, CliError> {
    let value = if is_sweep(input) {
        serde_json::to_value(per_point(input, f)?)
    } else {
        let (meta, series) = read_run(input)?;
        serde_json::to_value(f(&meta, &series)?)
    };
    Ok(value.expect("reports serialize"))
}

fn require_sweep(input: &Path, which: AnalysisKind) -> Result<(), CliError> {
    if is_sweep(input) {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "'{}' analysis needs a sweep directory containing {INDEX_FILE}",
            which.as_str()
        )))
    }
}

/// Plateaus of every completed point against `ln N`.
pub fn critical_report(input: &Path) -> Result<CriticalReport, CliError> {
    require_sweep(input, AnalysisKind::Critical)?;
    let index = SweepIndex::load(input)?;
    let mut points = Vec::new();
    for (entry, dir) in index.completed_dirs(input) {
        let (_, series) = read_run(&dir)?;
        points.push(CriticalPoint {
            dir: entry.dir.clone(),
            n: series.meta.bath.n_spins,
            l_inf: plateau_report(&series)?.l_inf,
        });
    }
    points.sort_by_key(|p| p.n);
    let pairs: Vec<(usize, f64)> = points.iter().map(|p| (p.n, p.l_inf)).collect();
    let fit = fit_critical_scaling(&pairs)?;
    Ok(CriticalReport { points, fit })
}

/// Measured `α` of every completed point next to the ground-state
/// concurrence of the coupled bond. The row parameter is the value of the
/// single numeric axis, or the point index otherwise.
pub fn concurrence_report(input: &Path) -> Result<ConcurrenceReport, CliError> {
    require_sweep(input, AnalysisKind::Concurrence)?;
    let index = SweepIndex::load(input)?;
    let mut rows = Vec::new();
    for (entry, dir) in index.completed_dirs(input) {
        let (meta, series) = read_run(&dir)?;
        let alpha = fit_gaussian_rate(&series)?.alpha;
        let c = coupled_pair_concurrence(&series.meta.bath, &series.meta.coupling, &meta.config.exact_options())?;
        let parameter = match (index.axes.len(), entry.parameters.values().next()) {
            (1, Some(v)) => v.as_f64().unwrap_or(entry.index as f64),
            _ => entry.index as f64,
        };
        rows.push(ConcurrenceRow::new(parameter, alpha, c));
    }
    Ok(ConcurrenceReport::from_rows(rows))
}

pub fn analyze(input: &Path, which: AnalysisKind) -> Result<serde_json::Value, CliError> {
    let value = match which {
        AnalysisKind::Gaussian => single_or_sweep(input, gaussian_report)?,
        AnalysisKind::Plateau => single_or_sweep(input, |_, s| plateau_report(s))?,
        AnalysisKind::Logdecay => single_or_sweep(input, |_, s| logdecay_report(s))?,
        AnalysisKind::Critical => serde_json::to_value(critical_report(input)?).expect("reports serialize"),
        AnalysisKind::Concurrence => serde_json::to_value(concurrence_report(input)?).expect("reports serialize"),
    };
    Ok(value)
}

/// Runs the analysis and writes the report; returns its path.
pub fn run_analysis(input: &Path, which: AnalysisKind, report: Option<&Path>) -> Result<PathBuf, CliError> {
    let value = analyze(input, which)?;
    let path = report.map(Path::to_path_buf).unwrap_or_else(|| which.default_report(input));
    write_json(&path, &value)?;
    Ok(path)
}
