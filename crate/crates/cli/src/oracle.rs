//! `oracle-check`: every engine against the full-space oracle on small
//! chains, written to `calibration.json` together with the convention hash.

use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use spinbath::echo::ENGINE_VERSION;
use spinbath::exact::{ground_state, loschmidt_echo_exact, ExactOptions, Solver};
use spinbath::free_fermion::{build_quadratic_form, diagonalize, loschmidt_echo_determinant};
use spinbath::gates::{erased_pair_layer, sequence_unitary};
use spinbath::linalg::max_abs;
use spinbath::tebd::{ground_state_imaginary_time, loschmidt_echo_from_ground, TebdParams};
use spinbath::{BathSpec, CouplingSpec, Pauli, QubitBranch};

use crate::error::CliError;
use crate::output::{convention_hash, write_json, CONVENTIONS};

pub const CALIBRATION_FILE: &str = "calibration.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub engine_version: String,
    pub convention_hash: String,
    pub conventions: String,
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn check(name: impl Into<String>, deviation: f64, tolerance: f64) -> Check {
    Check {
        name: name.into(),
        deviation,
        tolerance,
        passed: deviation <= tolerance,
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn determinant_checks(out: &mut Vec<Check>) -> Result<(), CliError> {
    let times: Vec<f64> = (0..200).map(|k| 10.0 * k as f64 / 199.0).collect();
    let dense = ExactOptions {
        solver: Solver::Dense,
        ..Default::default()
    };
    for (gamma, lambda, eps, site) in [
        (1.0, 0.5, 0.25, 1),
        (1.0, 1.0, 0.25, 1),
        (1.0, 1.5, 0.25, 1),
        (0.5, 1.2, 0.4, 3),
    ] {
        let bath = BathSpec::xy(8, gamma, lambda)?;
        let c = CouplingSpec::new(eps).at_site(site);
        let det = loschmidt_echo_determinant(&bath, &c, &times)?;
        let ed = loschmidt_echo_exact(&bath, &c, &times, &dense)?;
        out.push(check(
            format!("determinant echo, N=8 gamma={gamma} lambda={lambda} eps={eps} site={site}"),
            max_diff(&det.values, &ed.values),
            1e-8,
        ));
    }
    Ok(())
}

fn ground_energy_checks(out: &mut Vec<Check>) -> Result<(), CliError> {
    for (gamma, lambda) in [(1.0, 0.5), (0.6, 1.3), (0.0, 0.4)] {
        let bath = BathSpec::xy(8, gamma, lambda)?;
        let ff = diagonalize(&build_quadratic_form(&bath, None, QubitBranch::Ground)?)?.ground_energy();
        let ed = ground_state(&bath, &CouplingSpec::new(0.0), QubitBranch::Ground, &ExactOptions::default())?.energy;
        out.push(check(
            format!("free-fermion ground energy, N=8 gamma={gamma} lambda={lambda}"),
            (ff - ed).abs(),
            1e-9,
        ));
    }
    Ok(())
}

fn tebd_checks(out: &mut Vec<Check>) -> Result<(), CliError> {
    let mut params = TebdParams::default();
    let last = params.imaginary_time_schedule.len() - 1;
    params.imaginary_time_schedule[last].min_steps = 10_000;
    params.imaginary_time_schedule[last].max_steps = 10_000;
    let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
    for delta in [0.5, -0.5] {
        let bath = BathSpec::xxz(8, delta)?;
        let c = CouplingSpec::new(0.1).at_site(4);
        let gs = ground_state_imaginary_time(&bath, &params)?;
        let ed = ground_state(&bath, &CouplingSpec::new(0.0), QubitBranch::Ground, &ExactOptions::default())?;
        out.push(check(
            format!("TEBD ground energy, N=8 XXZ delta={delta}"),
            (gs.energy - ed.energy).abs(),
            1e-8,
        ));
        let tebd = loschmidt_echo_from_ground(&bath, &c, &times, &params, &gs)?;
        let exact = loschmidt_echo_exact(&bath, &c, &times, &ExactOptions::default())?;
        out.push(check(
            format!("TEBD echo, N=8 XXZ delta={delta} eps=0.1 site=4"),
            max_diff(&tebd.values, &exact.values),
            1e-5,
        ));
    }
    Ok(())
}

fn erasure_checks(out: &mut Vec<Check>) {
    let identity: Array2<Complex64> = Array2::eye(4);
    for op in [Pauli::X, Pauli::Y, Pauli::Z] {
        let u = sequence_unitary(&erased_pair_layer(op, 0.3, 1), 2);
        out.push(check(format!("gate erasure identity, {op:?}{op:?}"), max_abs(&(&u - &identity)), 1e-12));
    }
}

pub fn calibrate() -> Result<Calibration, CliError> {
    let mut checks = Vec::new();
    determinant_checks(&mut checks)?;
    ground_energy_checks(&mut checks)?;
    tebd_checks(&mut checks)?;
    erasure_checks(&mut checks);
    Ok(Calibration {
        engine_version: ENGINE_VERSION.to_string(),
        convention_hash: convention_hash(),
        conventions: CONVENTIONS.to_string(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

/// Writes `calibration.json`; a failed check is reported after the file is
/// written.
pub fn oracle_check(dir: &Path) -> Result<Calibration, CliError> {
    let report = calibrate()?;
    write_json(&dir.join(CALIBRATION_FILE), &report)?;
    if let Some(bad) = report.checks.iter().find(|c| !c.passed) {
        return Err(CliError::Calibration(format!(
            "{}: deviation {:e} above {:e}",
            bad.name, bad.deviation, bad.tolerance
        )));
    }
    Ok(report)
}
