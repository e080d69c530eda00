//! Compilation of one first-order Trotter step of qubit plus bath into the
//! primitive operations of an optical-lattice quantum simulator.
//!
//! The lattice holds the qubit at site 0 and bath spin `k` (1-based) at site
//! `k`. The primitives are homogeneous single-site rotations, the same
//! rotations on site 0 alone, and the collision gate `G(φ)`, which imprints
//! `e^{−iφ}` on `|0⟩_j|1⟩_{j+1}` for every neighbouring pair at once.
//! `|0⟩` is the `σᶻ = +1` state.
//!
//! Because only site 0 is addressable, the local term `−(ε/2)σᶻ₁` of
//! `−ε|e⟩⟨e|σᶻ₁` cannot be produced. The compiled step therefore realizes
//!
//! ```text
//! H_sim = H_E(sites 1..N) − (ε/2) σᶻ₀σᶻ₁ − (ω_e/2) σᶻ₀
//! ```
//!
//! whose two qubit branches drive the bath with `H_E ∓ (ε/2)σᶻ₁`. The branch
//! difference is `εσᶻ₁` as in the original model, so the short-time echo is
//! the same to second order in `t`.
//!
//! Layer order within a step: σᶻσᶻ coupling on all pairs, the σᶻσᶻ remainder
//! with the (0,1) pair erased, then σˣσˣ and σʸσʸ (each erased on (0,1)),
//! then fields.
//!
//! # Text format
//!
//! One item per line; `#` starts a comment.
//!
//! ```text
//! TAU <tau>
//! BATH <json>
//! COUPLING <json>
//! PHASE <phi>              global phase e^{iφ}
//! Z <targets> <theta>      e^{iθσᶻ} on each target
//! V <x|y> <+|-> <targets>  (1 ∓ iσ^α)/√2, '-' is the adjoint
//! X <targets>              σˣ on each target
//! G <phi>                  collision gate on every neighbouring pair
//! ```
//!
//! `<targets>` is `all` or a comma-separated site list.

use std::fmt::Write as _;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{ground_state, loschmidt_echo_exact, ExactOptions};
use crate::linalg::{expm_hermitian, spectral_norm};
use crate::models::{bath_terms, BathSpec, Boundary, CouplingSpec, Pauli, PauliTerm, QubitBranch};
use crate::sparse::apply_pauli_string;

/// Largest bath for dense verification.
pub const MAX_VERIFY_SPINS: usize = 6;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Targets {
    All,
    Sites(Vec<usize>),
}

impl Targets {
    pub fn qubit() -> Self {
        Targets::Sites(vec![0])
    }

    fn sites(&self, n_sites: usize) -> Vec<usize> {
        match self {
            Targets::All => (0..n_sites).collect(),
            Targets::Sites(s) => s.clone(),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    GlobalPhase { phi: f64 },
    LocalZ { theta: f64, targets: Targets },
    LocalV { axis: Axis, dagger: bool, targets: Targets },
    CollisionPhase { phi: f64 },
    LocalX { targets: Targets },
}

impl Gate {
    fn targets(&self) -> Option<&Targets> {
        match self {
            Gate::LocalZ { targets, .. } | Gate::LocalV { targets, .. } | Gate::LocalX { targets } => Some(targets),
            Gate::GlobalPhase { .. } | Gate::CollisionPhase { .. } => None,
        }
    }

    /// Applies the gate to a state on `n_sites` lattice sites, site `k` on bit `k`.
    pub fn apply(&self, n_sites: usize, psi: &mut [Complex64]) {
        match self {
            Gate::GlobalPhase { phi } => {
                let f = Complex64::from_polar(1.0, *phi);
                psi.iter_mut().for_each(|x| *x *= f);
            }
            Gate::LocalZ { theta, targets } => {
                let (up, down) = (Complex64::from_polar(1.0, *theta), Complex64::from_polar(1.0, -theta));
                for site in targets.sites(n_sites) {
                    for (s, x) in psi.iter_mut().enumerate() {
                        *x *= if (s >> site) & 1 == 0 { up } else { down };
                    }
                }
            }
            Gate::LocalV { axis, dagger, targets } => {
                let m = v_matrix(*axis, *dagger);
                for site in targets.sites(n_sites) {
                    apply_single(psi, site, &m);
                }
            }
            Gate::LocalX { targets } => {
                for site in targets.sites(n_sites) {
                    let bit = 1 << site;
                    for s in 0..psi.len() {
                        if s & bit == 0 {
                            psi.swap(s, s | bit);
                        }
                    }
                }
            }
            Gate::CollisionPhase { phi } => {
                for (s, x) in psi.iter_mut().enumerate() {
                    let hits = (0..n_sites.saturating_sub(1))
                        .filter(|&j| (s >> j) & 1 == 0 && (s >> (j + 1)) & 1 == 1)
                        .count();
                    if hits > 0 {
                        *x *= Complex64::from_polar(1.0, -phi * hits as f64);
                    }
                }
            }
        }
    }
}

/// `(1 − iσ^α)/√2`, or its adjoint.
fn v_matrix(axis: Axis, dagger: bool) -> [[Complex64; 2]; 2] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let sign = if dagger { 1.0 } else { -1.0 };
    let c = |re: f64, im: f64| Complex64::new(re, im);
    match axis {
        Axis::X => [[c(r, 0.0), c(0.0, sign * r)], [c(0.0, sign * r), c(r, 0.0)]],
        // σʸ = [[0, −i], [i, 0]] so −iσʸ = [[0, −1], [1, 0]].
        Axis::Y => [[c(r, 0.0), c(sign * r, 0.0)], [c(-sign * r, 0.0), c(r, 0.0)]],
    }
}

fn apply_single(psi: &mut [Complex64], site: usize, m: &[[Complex64; 2]; 2]) {
    let bit = 1 << site;
    for s in 0..psi.len() {
        if s & bit == 0 {
            let (a, b) = (psi[s], psi[s | bit]);
            psi[s] = m[0][0] * a + m[0][1] * b;
            psi[s | bit] = m[1][0] * a + m[1][1] * b;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSequence {
    pub bath: BathSpec,
    pub coupling: CouplingSpec,
    pub tau: f64,
    pub gates: Vec<Gate>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCount {
    /// Single-site rotations, homogeneous or addressed.
    pub local: usize,
    pub collision_phases: usize,
    /// Rotations acting on site 0 alone.
    pub addressed_site0: usize,
}

impl GateSequence {
    /// Lattice sites: the qubit plus the bath.
    pub fn n_sites(&self) -> usize {
        self.bath.n_spins + 1
    }

    /// Every individually addressed rotation acts on site 0 only.
    pub fn respects_addressing(&self) -> bool {
        self.gates.iter().filter_map(Gate::targets).all(|t| match t {
            Targets::All => true,
            Targets::Sites(s) => s.iter().all(|&k| k == 0),
        })
    }

    pub fn count(&self) -> GateCount {
        let mut c = GateCount {
            local: 0,
            collision_phases: 0,
            addressed_site0: 0,
        };
        for g in &self.gates {
            match g {
                Gate::GlobalPhase { .. } => {}
                Gate::CollisionPhase { .. } => c.collision_phases += 1,
                _ => {
                    c.local += 1;
                    if matches!(g.targets(), Some(Targets::Sites(_))) {
                        c.addressed_site0 += 1;
                    }
                }
            }
        }
        c
    }

    pub fn apply(&self, psi: &mut [Complex64]) {
        let n = self.n_sites();
        for g in &self.gates {
            g.apply(n, psi);
        }
    }

    /// Dense unitary of the whole sequence.
    pub fn unitary(&self) -> Result<Array2<Complex64>> {
        if self.bath.n_spins > MAX_VERIFY_SPINS {
            return Err(Error::Unsupported(format!(
                "dense unitaries limited to {MAX_VERIFY_SPINS} bath spins"
            )));
        }
        Ok(sequence_unitary(&self.gates, self.n_sites()))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# spinbath gate sequence\n");
        let _ = writeln!(out, "TAU {}", self.tau);
        let _ = writeln!(out, "BATH {}", serde_json::to_string(&self.bath).expect("serializable"));
        let _ = writeln!(out, "COUPLING {}", serde_json::to_string(&self.coupling).expect("serializable"));
        for g in &self.gates {
            let line = match g {
                Gate::GlobalPhase { phi } => format!("PHASE {phi}"),
                Gate::LocalZ { theta, targets } => format!("Z {} {theta}", targets_text(targets)),
                Gate::LocalV { axis, dagger, targets } => format!(
                    "V {} {} {}",
                    if *axis == Axis::X { "x" } else { "y" },
                    if *dagger { "-" } else { "+" },
                    targets_text(targets)
                ),
                Gate::LocalX { targets } => format!("X {}", targets_text(targets)),
                Gate::CollisionPhase { phi } => format!("G {phi}"),
            };
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |n: usize, msg: &str| Error::InvalidParameter(format!("gate file line {n}: {msg}"));
        let (mut tau, mut bath, mut coupling) = (None, None, None);
        let mut gates = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let n = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (head, rest) = line.split_once(' ').unwrap_or((line, ""));
            let fields: Vec<&str> = rest.split_whitespace().collect();
            let num = |s: Option<&&str>| -> Result<f64> {
                s.ok_or_else(|| bad(n, "missing number"))?
                    .parse::<f64>()
                    .map_err(|_| bad(n, "invalid number"))
            };
            match head {
                "TAU" => tau = Some(num(fields.first())?),
                "BATH" => bath = Some(serde_json::from_str(rest).map_err(|e| bad(n, &e.to_string()))?),
                "COUPLING" => coupling = Some(serde_json::from_str(rest).map_err(|e| bad(n, &e.to_string()))?),
                "PHASE" => gates.push(Gate::GlobalPhase { phi: num(fields.first())? }),
                "G" => gates.push(Gate::CollisionPhase { phi: num(fields.first())? }),
                "Z" => gates.push(Gate::LocalZ {
                    targets: parse_targets(fields.first().copied()).ok_or_else(|| bad(n, "bad targets"))?,
                    theta: num(fields.get(1))?,
                }),
                "X" => gates.push(Gate::LocalX {
                    targets: parse_targets(fields.first().copied()).ok_or_else(|| bad(n, "bad targets"))?,
                }),
                "V" => {
                    let axis = match fields.first().copied() {
                        Some("x") => Axis::X,
                        Some("y") => Axis::Y,
                        _ => return Err(bad(n, "axis must be x or y")),
                    };
                    let dagger = match fields.get(1).copied() {
                        Some("+") => false,
                        Some("-") => true,
                        _ => return Err(bad(n, "adjoint flag must be + or -")),
                    };
                    let targets = parse_targets(fields.get(2).copied()).ok_or_else(|| bad(n, "bad targets"))?;
                    gates.push(Gate::LocalV { axis, dagger, targets });
                }
                other => return Err(bad(n, &format!("unknown gate '{other}'"))),
            }
        }
        let seq = GateSequence {
            bath: bath.ok_or_else(|| Error::InvalidParameter("gate file lacks BATH".into()))?,
            coupling: coupling.ok_or_else(|| Error::InvalidParameter("gate file lacks COUPLING".into()))?,
            tau: tau.ok_or_else(|| Error::InvalidParameter("gate file lacks TAU".into()))?,
            gates,
        };
        let n = seq.n_sites();
        if seq
            .gates
            .iter()
            .filter_map(Gate::targets)
            .any(|t| matches!(t, Targets::Sites(s) if s.iter().any(|&k| k >= n)))
        {
            return Err(Error::InvalidParameter("gate target outside the lattice".into()));
        }
        Ok(seq)
    }
}

fn targets_text(t: &Targets) -> String {
    match t {
        Targets::All => "all".into(),
        Targets::Sites(s) => s.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","),
    }
}

fn parse_targets(s: Option<&str>) -> Option<Targets> {
    match s? {
        "all" => Some(Targets::All),
        list => list
            .split(',')
            .map(|k| k.parse::<usize>().ok())
            .collect::<Option<Vec<_>>>()
            .filter(|v| !v.is_empty())
            .map(Targets::Sites),
    }
}

/// Dense unitary of a gate list on `n_sites` lattice sites.
pub fn sequence_unitary(gates: &[Gate], n_sites: usize) -> Array2<Complex64> {
    let dim = 1usize << n_sites;
    let mut u = Array2::<Complex64>::zeros((dim, dim));
    let mut col = vec![Complex64::new(0.0, 0.0); dim];
    for c in 0..dim {
        col.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        col[c] = Complex64::new(1.0, 0.0);
        for g in gates {
            g.apply(n_sites, &mut col);
        }
        for (r, x) in col.iter().enumerate() {
            u[[r, c]] = *x;
        }
    }
    u
}

/// `U^{zz}(θ) = e^{iθσᶻσᶻ}` on every neighbouring pair, as
/// `e^{iPθ} [G(2θ) X_all]²` with `P` pairs.
pub fn zz_all(theta: f64, n_pairs: usize) -> Vec<Gate> {
    vec![
        Gate::LocalX { targets: Targets::All },
        Gate::CollisionPhase { phi: 2.0 * theta },
        Gate::LocalX { targets: Targets::All },
        Gate::CollisionPhase { phi: 2.0 * theta },
        Gate::GlobalPhase {
            phi: n_pairs as f64 * theta,
        },
    ]
}

/// `e^{iθσ^ασ^α}` on every pair by conjugating the σᶻσᶻ layer.
/// `V^y` rotates σᶻ into σˣ and `V^x` rotates it into −σʸ.
pub fn pair_layer(op: Pauli, theta: f64, n_pairs: usize) -> Vec<Gate> {
    let axis = match op {
        Pauli::Z => return zz_all(theta, n_pairs),
        Pauli::X => Axis::Y,
        Pauli::Y => Axis::X,
    };
    let mut g = vec![Gate::LocalV {
        axis,
        dagger: true,
        targets: Targets::All,
    }];
    g.extend(zz_all(theta, n_pairs));
    g.push(Gate::LocalV {
        axis,
        dagger: false,
        targets: Targets::All,
    });
    g
}

/// `[P₀ U^{αα}_all(θ/2)]²`: the pair layer with total angle `θ` on every pair
/// except (0,1), where `P₀` anticommutes with `σ^α₀` (σˣ₀ for σᶻσᶻ, σᶻ₀ otherwise).
pub fn erased_pair_layer(op: Pauli, theta: f64, n_pairs: usize) -> Vec<Gate> {
    let half = pair_layer(op, 0.5 * theta, n_pairs);
    let flip = match op {
        // σᶻ₀ = −i e^{i(π/2)σᶻ₀}
        Pauli::Z => vec![Gate::LocalX { targets: Targets::qubit() }],
        Pauli::X | Pauli::Y => vec![Gate::LocalZ {
            theta: std::f64::consts::FRAC_PI_2,
            targets: Targets::qubit(),
        }],
    };
    let mut g = Vec::new();
    for _ in 0..2 {
        g.extend(half.iter().cloned());
        g.extend(flip.iter().cloned());
    }
    if op != Pauli::Z {
        g.push(Gate::GlobalPhase { phi: std::f64::consts::PI });
    }
    g
}

fn check_compilable(bath: &BathSpec, coupling: &CouplingSpec) -> Result<()> {
    bath.validate()?;
    coupling.validate(bath)?;
    if bath.boundary != Boundary::Open {
        return Err(Error::Unsupported("the lattice realizes open chains only".into()));
    }
    if coupling.site != 1 {
        return Err(Error::Unsupported("the qubit couples to its lattice neighbour, site 1".into()));
    }
    Ok(())
}

/// One first-order Trotter step `≈ e^{−i H_sim τ}`.
pub fn compile_step(bath: &BathSpec, coupling: &CouplingSpec, tau: f64) -> Result<GateSequence> {
    check_compilable(bath, coupling)?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter("tau must be finite and non-negative".into()));
    }
    let pairs = bath.n_spins;
    let j = bath.j;
    let mut gates = Vec::new();
    let coupling_angle = 0.5 * coupling.epsilon * tau;
    if coupling.epsilon != 0.0 {
        gates.extend(zz_all(coupling_angle, pairs));
    }
    let zz_rest = 0.5 * j * bath.delta * tau - coupling_angle;
    if 0.5 * j * bath.delta != 0.5 * coupling.epsilon {
        gates.extend(erased_pair_layer(Pauli::Z, zz_rest, pairs));
    }
    let xx = 0.5 * j * (1.0 + bath.gamma);
    if xx != 0.0 {
        gates.extend(erased_pair_layer(Pauli::X, xx * tau, pairs));
    }
    let yy = 0.5 * j * (1.0 - bath.gamma);
    if yy != 0.0 {
        gates.extend(erased_pair_layer(Pauli::Y, yy * tau, pairs));
    }
    let field = j * bath.lambda;
    if field != 0.0 {
        gates.push(Gate::LocalZ {
            theta: field * tau,
            targets: Targets::All,
        });
    }
    let qubit = 0.5 * coupling.omega_e - field;
    if qubit != 0.0 {
        gates.push(Gate::LocalZ {
            theta: qubit * tau,
            targets: Targets::qubit(),
        });
    }
    Ok(GateSequence {
        bath: bath.clone(),
        coupling: coupling.clone(),
        tau,
        gates,
    })
}

/// Pauli terms of `H_sim` on the lattice.
pub fn simulated_hamiltonian_terms(bath: &BathSpec, coupling: &CouplingSpec) -> Result<Vec<PauliTerm>> {
    check_compilable(bath, coupling)?;
    let mut terms: Vec<PauliTerm> = bath_terms(bath)
        .into_iter()
        .map(|mut t| {
            t.ops.iter_mut().for_each(|(s, _)| *s += 1);
            t
        })
        .collect();
    terms.push(PauliTerm::two(-0.5 * coupling.epsilon, (0, Pauli::Z), (1, Pauli::Z)));
    terms.push(PauliTerm::one(-0.5 * coupling.omega_e, 0, Pauli::Z));
    Ok(terms)
}

fn dense_lattice_hamiltonian(terms: &[PauliTerm], n_sites: usize) -> Array2<Complex64> {
    let dim = 1usize << n_sites;
    let mut h = Array2::<Complex64>::zeros((dim, dim));
    for s in 0..dim {
        for t in terms.iter().filter(|t| t.coeff != 0.0) {
            let (target, amp) = apply_pauli_string(&t.ops, s);
            h[[target, s]] += Complex64::new(t.coeff * amp, 0.0);
        }
    }
    h
}

/// `‖U_seq − e^{−i H_sim τ}‖₂` on the full lattice.
pub fn verify_sequence(seq: &GateSequence) -> Result<f64> {
    let u = seq.unitary()?;
    let terms = simulated_hamiltonian_terms(&seq.bath, &seq.coupling)?;
    let h = dense_lattice_hamiltonian(&terms, seq.n_sites());
    let exact = expm_hermitian(&h, seq.tau)?;
    spectral_norm(&(&u - &exact))
}

/// Distance after `k` repetitions of the step, against `e^{−i H_sim kτ}`.
pub fn verify_repeated(seq: &GateSequence, k: usize) -> Result<f64> {
    let u = seq.unitary()?;
    let mut total = Array2::<Complex64>::eye(u.nrows());
    for _ in 0..k {
        total = u.dot(&total);
    }
    let terms = simulated_hamiltonian_terms(&seq.bath, &seq.coupling)?;
    let h = dense_lattice_hamiltonian(&terms, seq.n_sites());
    let exact = expm_hermitian(&h, seq.tau * k as f64)?;
    spectral_norm(&(&total - &exact))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedEcho {
    pub times: Vec<f64>,
    /// `|2ρ₀₁(t)|²` of the lattice qubit.
    pub simulated: Vec<f64>,
    /// Exact echo of the original model at the same times.
    pub reference: Vec<f64>,
}

impl SimulatedEcho {
    pub fn max_deviation(&self) -> f64 {
        self.simulated
            .iter()
            .zip(&self.reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Iterates the compiled step `k` times from `|+⟩₀ ⊗ |ψ₀⟩` and records the
/// qubit coherence after every step.
pub fn simulate_echo(seq: &GateSequence, steps: usize, options: &ExactOptions) -> Result<SimulatedEcho> {
    check_compilable(&seq.bath, &seq.coupling)?;
    let n = seq.bath.n_spins;
    let ground = ground_state(&seq.bath, &CouplingSpec::new(0.0), QubitBranch::Ground, options)?;
    let bath_state = ground.full_vector_complex();
    let amp = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut psi = vec![Complex64::new(0.0, 0.0); 1usize << (n + 1)];
    for (b, x) in bath_state.iter().enumerate() {
        psi[b << 1] = amp * x;
        psi[(b << 1) | 1] = amp * x;
    }
    let mut times = Vec::with_capacity(steps);
    let mut simulated = Vec::with_capacity(steps);
    for k in 1..=steps {
        seq.apply(&mut psi);
        let rho01: Complex64 = (0..1usize << n).map(|b| psi[b << 1] * psi[(b << 1) | 1].conj()).sum();
        times.push(k as f64 * seq.tau);
        simulated.push((2.0 * rho01).norm_sqr());
    }
    let mut with_zero = vec![0.0];
    with_zero.extend(&times);
    let reference = loschmidt_echo_exact(&seq.bath, &seq.coupling, &with_zero, options)?.values[1..].to_vec();
    Ok(SimulatedEcho {
        times,
        simulated,
        reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_unitary(op: Pauli, theta: f64, n_sites: usize, erase: bool) -> Array2<Complex64> {
        let g = if erase {
            erased_pair_layer(op, theta, n_sites - 1)
        } else {
            pair_layer(op, theta, n_sites - 1)
        };
        sequence_unitary(&g, n_sites)
    }

    fn direct(op: Pauli, theta: f64, pairs: &[usize], n_sites: usize) -> Array2<Complex64> {
        let terms: Vec<PauliTerm> = pairs.iter().map(|&j| PauliTerm::two(1.0, (j, op), (j + 1, op))).collect();
        let h = dense_lattice_hamiltonian(&terms, n_sites);
        // e^{iθ Σ σσ} = exp(−i H t) with t = −θ.
        expm_hermitian(&h, -theta).unwrap()
    }

    fn dist(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
        spectral_norm(&(a - b)).unwrap()
    }

    #[test]
    fn single_pair_zz_identity() {
        let u = pair_unitary(Pauli::Z, 0.3, 2, false);
        assert!(dist(&u, &direct(Pauli::Z, 0.3, &[0], 2)) < 1e-12);
    }

    #[test]
    fn conjugated_layers_give_xx_and_yy() {
        for op in [Pauli::X, Pauli::Y] {
            let u = pair_unitary(op, 0.3, 3, false);
            assert!(dist(&u, &direct(op, 0.3, &[0, 1], 3)) < 1e-12, "{op:?}");
        }
    }

    #[test]
    fn erasures_are_identity_on_the_qubit_pair() {
        for op in [Pauli::X, Pauli::Y, Pauli::Z] {
            for theta in [0.3, -1.7, 2.9] {
                let u = pair_unitary(op, theta, 2, true);
                let eye = Array2::<Complex64>::eye(4);
                assert!(dist(&u, &eye) < 1e-12, "{op:?} {theta}");
                let longer = pair_unitary(op, theta, 4, true);
                assert!(dist(&longer, &direct(op, theta, &[1, 2], 4)) < 1e-12);
            }
        }
    }

    #[test]
    fn zero_tau_is_identity() {
        let bath = BathSpec::ising(3, 0.5).unwrap();
        let seq = compile_step(&bath, &CouplingSpec::new(0.25), 0.0).unwrap();
        assert!(verify_sequence(&seq).unwrap() < 1e-12);
    }

    #[test]
    fn field_only_bath_is_exact() {
        let bath = BathSpec::ising(3, 0.7).unwrap().with_j(0.0);
        let seq = compile_step(&bath, &CouplingSpec::new(0.0).with_omega_e(0.4), 0.2).unwrap();
        assert!(verify_sequence(&seq).unwrap() < 1e-12);
    }

    #[test]
    fn addressing_is_respected() {
        let bath = BathSpec::xy(4, 0.3, 0.8).unwrap();
        let seq = compile_step(&bath, &CouplingSpec::new(0.25).with_omega_e(1.0), 0.05).unwrap();
        assert!(seq.respects_addressing());
        assert!(seq.count().addressed_site0 > 0);
    }

    #[test]
    fn text_round_trip() {
        let bath = BathSpec::xxz(4, -0.7).unwrap();
        let seq = compile_step(&bath, &CouplingSpec::new(0.1), 0.05).unwrap();
        let back = GateSequence::from_text(&seq.to_text()).unwrap();
        assert_eq!(back, seq);
        assert!(GateSequence::from_text("TAU 0.1\nQ all\n").is_err());
    }

    #[test]
    fn rejects_other_sites_and_rings() {
        let bath = BathSpec::ising(4, 0.5).unwrap();
        assert!(compile_step(&bath, &CouplingSpec::new(0.1).at_site(2), 0.1).is_err());
        let ring = bath.with_boundary(Boundary::Periodic);
        assert!(compile_step(&ring, &CouplingSpec::new(0.1), 0.1).is_err());
    }
}
