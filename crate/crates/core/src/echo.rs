use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{BathSpec, CouplingSpec};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Slack allowed on `L(t) ∈ [0, 1]` before a series is rejected as corrupt.
pub const ECHO_TOLERANCE: f64 = 1e-9;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Determinant,
    Exact,
    Tebd,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Determinant => "determinant",
            Method::Exact => "exact",
            Method::Tebd => "tebd",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "determinant" => Ok(Method::Determinant),
            "exact" => Ok(Method::Exact),
            "tebd" => Ok(Method::Tebd),
            other => Err(Error::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EchoMeta {
    pub bath: BathSpec,
    pub coupling: CouplingSpec,
    pub method: Method,
    pub engine_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Cumulative discarded weight at each time point (TEBD only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discarded_weight: Option<Vec<f64>>,
    /// Largest discarded weight of a single time step (TEBD only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step_discarded_weight: Option<f64>,
    /// Human-readable notes on anything that affects interpretation of the values.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl EchoMeta {
    pub fn new(bath: &BathSpec, coupling: &CouplingSpec, method: Method) -> Self {
        Self {
            bath: bath.clone(),
            coupling: coupling.clone(),
            method,
            engine_version: ENGINE_VERSION.to_string(),
            seed: None,
            discarded_weight: None,
            max_step_discarded_weight: None,
            flags: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EchoSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: EchoMeta,
}

impl EchoSeries {
    /// Checks the `[0, 1]` invariant, then clamps values into the interval.
    pub fn new(times: Vec<f64>, values: Vec<f64>, meta: EchoMeta) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        check_times(&times)?;
        let mut values = values;
        for (t, v) in times.iter().zip(values.iter_mut()) {
            if !v.is_finite() || *v < -ECHO_TOLERANCE || *v > 1.0 + ECHO_TOLERANCE {
                return Err(Error::Numerical(format!(
                    "echo value {v} at t = {t} outside [0, 1]"
                )));
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self {
            times,
            values,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }
}

/// `steps` evenly spaced points on `[0, t_max]`, both ends included.
pub fn uniform_times(t_max: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => {
            let dt = t_max / (steps - 1) as f64;
            (0..steps).map(|k| k as f64 * dt).collect()
        }
    }
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidParameter(
            "times must be finite and non-negative".into(),
        ));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "times must be strictly increasing".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> EchoMeta {
        EchoMeta::new(
            &BathSpec::ising(4, 0.5).unwrap(),
            &CouplingSpec::new(0.1),
            Method::Exact,
        )
    }

    #[test]
    fn clamps_within_tolerance() {
        let s = EchoSeries::new(vec![0.0, 1.0], vec![1.0 + 1e-12, -1e-12], meta()).unwrap();
        assert_eq!(s.values, vec![1.0, 0.0]);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(EchoSeries::new(vec![0.0], vec![1.1], meta()).is_err());
        assert!(EchoSeries::new(vec![0.0], vec![f64::NAN], meta()).is_err());
        assert!(EchoSeries::new(vec![1.0, 0.5], vec![1.0, 1.0], meta()).is_err());
    }

    #[test]
    fn uniform_grid_endpoints() {
        let t = uniform_times(10.0, 201);
        assert_eq!(t.len(), 201);
        assert_eq!(t[0], 0.0);
        assert!((t[200] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn method_round_trip() {
        for m in [Method::Determinant, Method::Exact, Method::Tebd] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("dmrg".parse::<Method>().is_err());
    }
}
