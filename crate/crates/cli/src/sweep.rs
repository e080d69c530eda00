//! Parameter sweeps: a run template plus named axes, expanded to the
//! cartesian product and executed on a bounded worker pool.
//!
//! ```toml
//! workers = 4
//! output = "runs/fig2c"
//!
//! [template]            # a complete run configuration
//! method = "determinant"
//! model = { family = "xy", n = 300, gamma = 1.0 }
//! coupling = { epsilon = 0.25 }
//! time = { t_max = 200.0, steps = 2001 }
//!
//! [axes]                # dotted path into the template -> values
//! "model.lambda" = [0.5, 0.9, 0.99, 1.0, 1.01, 1.1, 1.5]
//! ```
//!
//! Axes are expanded in lexicographic order of their paths, the last one
//! varying fastest. Point `k` is written to `point-kkkk/` and `index.json`
//! lists every point with its parameters and status.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{read_json, write_json};
use crate::run::run_echo;

pub const INDEX_FILE: &str = "index.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub template: toml::Table,
    #[serde(default)]
    pub axes: BTreeMap<String, Vec<toml::Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub parameters: BTreeMap<String, toml::Value>,
    pub config: RunConfig,
}

impl SweepPoint {
    pub fn dir_name(&self) -> String {
        format!("point-{:04}", self.index)
    }
}

/// Expanded grid; every point's configuration has already been parsed.
#[derive(Clone, Debug)]
pub struct SweepPlan {
    pub axes: Vec<String>,
    pub points: Vec<SweepPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointStatus {
    Completed,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub index: usize,
    pub dir: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub status: PointStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepIndex {
    pub axes: Vec<String>,
    pub total: usize,
    pub completed: usize,
    pub failed: usize,
    pub points: Vec<IndexEntry>,
}

impl SweepIndex {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        read_json(&dir.join(INDEX_FILE))
    }

    pub fn completed_dirs<'a>(&'a self, root: &'a Path) -> impl Iterator<Item = (&'a IndexEntry, PathBuf)> + 'a {
        self.points
            .iter()
            .filter(|p| p.status == PointStatus::Completed)
            .map(move |p| (p, root.join(&p.dir)))
    }
}

fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), CliError> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Validation(format!("malformed axis path '{path}'")));
    }
    let (last, parents) = keys.split_last().expect("split yields at least one key");
    let mut current = table;
    for key in parents {
        let entry = current
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Validation(format!("axis '{path}': '{key}' is not a table")))?;
    }
    current.insert(last.to_string(), value);
    Ok(())
}

impl SweepPlan {
    /// Expands the grid and parses every point, so structural errors surface
    /// before anything runs.
    pub fn new(sweep: &SweepConfig) -> Result<Self, CliError> {
        let axes: Vec<String> = sweep.axes.keys().cloned().collect();
        if let Some((name, _)) = sweep.axes.iter().find(|(_, v)| v.is_empty()) {
            return Err(CliError::Validation(format!("axis '{name}' has no values")));
        }
        let total: usize = sweep.axes.values().map(Vec::len).product();
        let mut points = Vec::with_capacity(total);
        for index in 0..total {
            let mut rest = index;
            let mut parameters = BTreeMap::new();
            for (name, values) in sweep.axes.iter().rev() {
                parameters.insert(name.clone(), values[rest % values.len()].clone());
                rest /= values.len();
            }
            let mut table = sweep.template.clone();
            for (name, value) in &parameters {
                set_path(&mut table, name, value.clone())?;
            }
            let config = RunConfig::from_toml_value(toml::Value::Table(table))
                .map_err(|e| CliError::Validation(format!("point {index}: {e}")))?;
            points.push(SweepPoint {
                index,
                parameters,
                config,
            });
        }
        Ok(Self { axes, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Overrides the method of every point.
    pub fn with_method(mut self, method: spinbath::Method) -> Self {
        for p in &mut self.points {
            p.config.method = method;
        }
        self
    }

    /// Runs all points on at most `workers` threads and writes the index.
    /// Failed points are recorded, never fatal.
    pub fn execute(&self, root: &Path, workers: usize) -> Result<SweepIndex, CliError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| CliError::Validation(format!("worker pool: {e}")))?;
        let entries: Vec<IndexEntry> = pool.install(|| {
            self.points
                .par_iter()
                .map(|point| {
                    let dir = point.dir_name();
                    let mut config = point.config.clone();
                    config.output = Some(root.join(&dir));
                    let result = run_echo(&config, &root.join(&dir));
                    if let Err(e) = &result {
                        log::warn!("{dir} failed: {e}");
                    }
                    IndexEntry {
                        index: point.index,
                        dir,
                        parameters: point
                            .parameters
                            .iter()
                            .map(|(k, v)| (k.clone(), serde_json::to_value(v).expect("toml values map to json")))
                            .collect(),
                        status: if result.is_ok() { PointStatus::Completed } else { PointStatus::Failed },
                        error: result.err().map(|e| e.to_string()),
                    }
                })
                .collect()
        });
        let completed = entries.iter().filter(|e| e.status == PointStatus::Completed).count();
        let index = SweepIndex {
            axes: self.axes.clone(),
            total: entries.len(),
            completed,
            failed: entries.len() - completed,
            points: entries,
        };
        write_json(&root.join(INDEX_FILE), &index)?;
        Ok(index)
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
