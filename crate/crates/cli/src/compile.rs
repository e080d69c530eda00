//! `compile-gates`: one Trotter step as a lattice gate sequence.

use std::path::Path;

use serde::{Deserialize, Serialize};
use spinbath::gates::{compile_step, verify_sequence, GateCount, GateSequence, MAX_VERIFY_SPINS};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{write_atomic, write_json};

pub const GATES_FILE: &str = "gates.txt";
pub const SUMMARY_FILE: &str = "gates.json";
pub const VERIFICATION_FILE: &str = "verification.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSummary {
    pub tau: f64,
    pub n_sites: usize,
    pub count: GateCount,
    pub respects_addressing: bool,
}

/// Operator-norm distance to `exp(−iHτ)` at `τ` and `τ/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub tau: f64,
    pub distance: f64,
    pub half_tau_distance: f64,
    /// `distance / half_tau_distance`; close to 4 for a first-order step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halving_ratio: Option<f64>,
}

pub fn verify(config: &RunConfig, tau: f64) -> Result<Verification, CliError> {
    let bath = config.bath()?;
    if bath.n_spins > MAX_VERIFY_SPINS {
        return Err(CliError::Validation(format!(
            "verification limited to {MAX_VERIFY_SPINS} bath spins, got {}",
            bath.n_spins
        )));
    }
    let coupling = config.coupling();
    let distance = verify_sequence(&compile_step(&bath, &coupling, tau)?)?;
    let half_tau_distance = verify_sequence(&compile_step(&bath, &coupling, 0.5 * tau)?)?;
    Ok(Verification {
        tau,
        distance,
        half_tau_distance,
        halving_ratio: (half_tau_distance > 0.0).then(|| distance / half_tau_distance),
    })
}

/// Writes `gates.txt` and `gates.json`, plus `verification.json` when asked.
pub fn compile_gates(
    config: &RunConfig,
    tau: f64,
    verify_step: bool,
    dir: &Path,
) -> Result<(GateSequence, Option<Verification>), CliError> {
    let bath = config.bath()?;
    let seq = compile_step(&bath, &config.coupling(), tau)?;
    let verification = if verify_step { Some(verify(config, tau)?) } else { None };
    write_atomic(&dir.join(GATES_FILE), seq.to_text().as_bytes())?;
    write_json(
        &dir.join(SUMMARY_FILE),
        &GateSummary {
            tau,
            n_sites: seq.n_sites(),
            count: seq.count(),
            respects_addressing: seq.respects_addressing(),
        },
    )?;
    if let Some(v) = &verification {
        write_json(&dir.join(VERIFICATION_FILE), v)?;
    }
    Ok((seq, verification))
}
