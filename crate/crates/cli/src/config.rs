//! Run configuration. Unknown keys are rejected; the physics parameters
//! `model.family`, `model.n`, `coupling.epsilon` and `time.t_max` have no
//! default.
//!
//! ```toml
//! method = "determinant"        # determinant | exact | tebd
//! seed = 24301                  # Lanczos start vector (exact method)
//! output = "runs/ising"         # overridden by --output
//!
//! [model]
//! family = "xy"                 # xy | xxz
//! n = 300
//! j = 1.0
//! gamma = 1.0                   # default 0
//! delta = 0.0
//! lambda = 0.99                 # default 0
//! boundary = "open"             # open | periodic
//!
//! [coupling]
//! epsilon = 0.25
//! site = 1                      # 1-based
//! omega_e = 0.0
//!
//! [time]
//! t_max = 20.0
//! steps = 201                   # grid points including t = 0
//!
//! [tebd]
//! m = 100
//! dt = 0.01
//! svd_cutoff = 1e-10
//! # schedule = [{ dtau = 0.1, max_steps = 2000 }, ...]
//!
//! [determinant]
//! zero_modes = "reject"         # reject | even | odd
//!
//! [exact]
//! solver = "auto"               # auto | dense | iterative
//! pinning = 1e-8                # 0 disables the degeneracy-lifting field
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinbath::echo::uniform_times;
use spinbath::exact::{ExactOptions, Solver, DEFAULT_PINNING};
use spinbath::free_fermion::{DeterminantOptions, ZeroModePolicy};
use spinbath::tebd::{ImaginaryStage, TebdParams};
use spinbath::{BathSpec, Boundary, CouplingSpec, Family, Method};

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub coupling: CouplingConfig,
    pub time: TimeConfig,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub tebd: TebdConfig,
    #[serde(default)]
    pub determinant: DeterminantConfig,
    #[serde(default)]
    pub exact: ExactConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    pub n: usize,
    #[serde(default = "one")]
    pub j: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub boundary: Boundary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub epsilon: f64,
    #[serde(default = "first_site")]
    pub site: usize,
    #[serde(default)]
    pub omega_e: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_max: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TebdConfig {
    pub m: usize,
    pub dt: f64,
    pub svd_cutoff: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<ImaginaryStage>>,
}

impl Default for TebdConfig {
    fn default() -> Self {
        let p = TebdParams::default();
        Self {
            m: p.m,
            dt: p.dt,
            svd_cutoff: p.svd_cutoff,
            schedule: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeterminantConfig {
    #[serde(default)]
    pub zero_modes: ZeroModePolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactConfig {
    #[serde(default)]
    pub solver: Solver,
    #[serde(default = "default_pinning")]
    pub pinning: f64,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            solver: Solver::default(),
            pinning: DEFAULT_PINNING,
        }
    }
}

fn default_method() -> Method {
    Method::Determinant
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn one() -> f64 {
    1.0
}

fn first_site() -> usize {
    1
}

fn default_steps() -> usize {
    201
}

fn default_pinning() -> f64 {
    DEFAULT_PINNING
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn from_toml_value(value: toml::Value) -> Result<Self, CliError> {
        value.try_into().map_err(|e: toml::de::Error| CliError::Validation(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn bath(&self) -> Result<BathSpec, CliError> {
        let m = &self.model;
        let bath = BathSpec {
            family: m.family,
            n_spins: m.n,
            j: m.j,
            gamma: m.gamma,
            delta: m.delta,
            lambda: m.lambda,
            boundary: m.boundary,
        };
        bath.validate()?;
        Ok(bath)
    }

    pub fn coupling(&self) -> CouplingSpec {
        CouplingSpec::new(self.coupling.epsilon)
            .at_site(self.coupling.site)
            .with_omega_e(self.coupling.omega_e)
    }

    pub fn times(&self) -> Vec<f64> {
        uniform_times(self.time.t_max, self.time.steps)
    }

    pub fn tebd_params(&self) -> TebdParams {
        let mut p = TebdParams::default();
        p.m = self.tebd.m;
        p.dt = self.tebd.dt;
        p.svd_cutoff = self.tebd.svd_cutoff;
        if let Some(schedule) = &self.tebd.schedule {
            p.imaginary_time_schedule = schedule.clone();
        }
        p
    }

    pub fn exact_options(&self) -> ExactOptions {
        ExactOptions {
            solver: self.exact.solver,
            seed: self.seed,
            pinning: (self.exact.pinning > 0.0).then_some(self.exact.pinning),
            ..Default::default()
        }
    }

    pub fn determinant_options(&self) -> DeterminantOptions {
        DeterminantOptions {
            zero_modes: self.determinant.zero_modes,
        }
    }

    /// Checks everything that can be checked without running an engine.
    pub fn validate(&self) -> Result<(), CliError> {
        let bath = self.bath()?;
        self.coupling().validate(&bath)?;
        if !(self.time.t_max >= 0.0 && self.time.t_max.is_finite()) {
            return Err(CliError::Validation("time.t_max must be a finite non-negative number".into()));
        }
        if self.time.steps == 0 {
            return Err(CliError::Validation("time.steps must be positive".into()));
        }
        if !(self.exact.pinning >= 0.0) {
            return Err(CliError::Validation("exact.pinning must be non-negative".into()));
        }
        match self.method {
            Method::Determinant => {
                if bath.family != Family::Xy || bath.boundary != Boundary::Open {
                    return Err(CliError::Validation(
                        "method \"determinant\" requires an open XY-class chain".into(),
                    ));
                }
            }
            Method::Tebd => self.tebd_params().validate()?,
            Method::Exact => {}
        }
        Ok(())
    }
}
