//! Parameter types and the spin Hamiltonian shared by every engine.
//!
//! Conventions used throughout the crate:
//!
//! * bath sites are 1-based in [`CouplingSpec::site`] and 0-based everywhere
//!   else (term lists, basis bits, MPS sites);
//! * a computational-basis bit `0` is spin up (`σᶻ = +1`), bit `1` is spin down;
//! * energies are in units of the exchange `J`, times in `1/J`, `ħ = 1`.
//!
//! The bath Hamiltonian is
//!
//! ```text
//! H_E = -(J/2) Σ_j [ (1+γ) σˣ_j σˣ_{j+1} + (1-γ) σʸ_j σʸ_{j+1} + Δ σᶻ_j σᶻ_{j+1} + 2λ σᶻ_j ]
//! ```
//!
//! and the excited qubit branch sees `H_e = H_E - ε σᶻ_site`.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// `Δ = 0`, transverse field `λ`, anisotropy `0 ≤ γ ≤ 1` (Ising for `γ > 0`, XY for `γ = 0`).
    #[serde(alias = "xyclass")]
    Xy,
    /// `λ = 0`, `γ = 0`, anisotropy `Δ`.
    #[serde(alias = "xxzclass")]
    Xxz,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub family: Family,
    pub n_spins: usize,
    pub j: f64,
    pub gamma: f64,
    pub delta: f64,
    pub lambda: f64,
    pub boundary: Boundary,
}

impl BathSpec {
    /// Ising/XY-class chain with `J = 1` and open boundaries.
    pub fn xy(n_spins: usize, gamma: f64, lambda: f64) -> Result<Self> {
        let spec = Self {
            family: Family::Xy,
            n_spins,
            j: 1.0,
            gamma,
            delta: 0.0,
            lambda,
            boundary: Boundary::Open,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Transverse-field Ising chain (`γ = 1`).
    pub fn ising(n_spins: usize, lambda: f64) -> Result<Self> {
        Self::xy(n_spins, 1.0, lambda)
    }

    /// XXZ chain with `J = 1` and open boundaries.
    pub fn xxz(n_spins: usize, delta: f64) -> Result<Self> {
        let spec = Self {
            family: Family::Xxz,
            n_spins,
            j: 1.0,
            gamma: 0.0,
            delta,
            lambda: 0.0,
            boundary: Boundary::Open,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_j(mut self, j: f64) -> Self {
        self.j = j;
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_n_spins(mut self, n_spins: usize) -> Self {
        self.n_spins = n_spins;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.j, self.gamma, self.delta, self.lambda]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite bath parameter".into()));
        }
        if self.n_spins < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_spins must be at least 2, got {}",
                self.n_spins
            )));
        }
        match self.family {
            Family::Xy => {
                if self.delta != 0.0 {
                    return Err(Error::InvalidParameter(
                        "XY-class bath requires delta = 0".into(),
                    ));
                }
                if !(0.0..=1.0).contains(&self.gamma) {
                    return Err(Error::InvalidParameter(format!(
                        "gamma must lie in [0, 1], got {}",
                        self.gamma
                    )));
                }
            }
            Family::Xxz => {
                if self.lambda != 0.0 {
                    return Err(Error::InvalidParameter(
                        "XXZ-class bath requires lambda = 0".into(),
                    ));
                }
                if self.gamma != 0.0 {
                    return Err(Error::InvalidParameter(
                        "XXZ-class bath requires gamma = 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Nearest-neighbour bonds as 0-based site pairs; `(N-1, 0)` closes a periodic ring.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let n = self.n_spins;
        let mut bonds: Vec<_> = (0..n - 1).map(|j| (j, j + 1)).collect();
        if self.boundary == Boundary::Periodic {
            bonds.push((n - 1, 0));
        }
        bonds
    }

    /// Ferromagnetic XXZ regime where the ground space is degenerate (`Δ ≥ 1`).
    pub fn is_ferromagnetic_xxz(&self) -> bool {
        self.family == Family::Xxz && self.delta >= 1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub epsilon: f64,
    /// 1-based index of the bath spin the qubit couples to.
    pub site: usize,
    pub omega_e: f64,
}

impl CouplingSpec {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            site: 1,
            omega_e: 0.0,
        }
    }

    pub fn at_site(mut self, site: usize) -> Self {
        self.site = site;
        self
    }

    pub fn with_omega_e(mut self, omega_e: f64) -> Self {
        self.omega_e = omega_e;
        self
    }

    pub fn validate(&self, bath: &BathSpec) -> Result<()> {
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be finite and non-negative, got {}",
                self.epsilon
            )));
        }
        if !self.omega_e.is_finite() {
            return Err(Error::InvalidParameter("omega_e must be finite".into()));
        }
        if self.site < 1 || self.site > bath.n_spins {
            return Err(Error::InvalidParameter(format!(
                "coupled site {} outside 1..={}",
                self.site, bath.n_spins
            )));
        }
        Ok(())
    }

    /// 0-based coupled site.
    pub fn site_index(&self) -> usize {
        self.site - 1
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QubitBranch {
    Ground,
    Excited,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// `coeff · Π σ^{op}_{site}` with distinct 0-based sites.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliTerm {
    pub coeff: f64,
    pub ops: SmallVec<[(usize, Pauli); 2]>,
}

impl PauliTerm {
    pub fn one(coeff: f64, site: usize, op: Pauli) -> Self {
        let mut ops = SmallVec::new();
        ops.push((site, op));
        Self { coeff, ops }
    }

    pub fn two(coeff: f64, a: (usize, Pauli), b: (usize, Pauli)) -> Self {
        let mut ops = SmallVec::new();
        ops.push(a);
        ops.push(b);
        Self { coeff, ops }
    }

    pub fn sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.ops.iter().map(|&(s, _)| s)
    }
}

/// Local terms of the bath Hamiltonian for one qubit branch.
///
/// Every bond carries its `xx`, `yy` and `zz` terms (some coefficients may be
/// zero) and every site a `z` field term; the excited branch adds `-ε` to the
/// field of the coupled site.
pub fn spin_hamiltonian_terms(
    bath: &BathSpec,
    coupling: &CouplingSpec,
    branch: QubitBranch,
) -> Result<Vec<PauliTerm>> {
    bath.validate()?;
    coupling.validate(bath)?;
    let mut terms = bath_terms(bath);
    if branch == QubitBranch::Excited {
        let site = coupling.site_index();
        for t in terms.iter_mut() {
            if t.ops.len() == 1 && t.ops[0] == (site, Pauli::Z) {
                t.coeff -= coupling.epsilon;
            }
        }
    }
    Ok(terms)
}

pub(crate) fn bath_terms(bath: &BathSpec) -> Vec<PauliTerm> {
    let half_j = 0.5 * bath.j;
    let mut terms = Vec::with_capacity(4 * bath.n_spins);
    for (a, b) in bath.bonds() {
        terms.push(PauliTerm::two(
            -half_j * (1.0 + bath.gamma),
            (a, Pauli::X),
            (b, Pauli::X),
        ));
        terms.push(PauliTerm::two(
            -half_j * (1.0 - bath.gamma),
            (a, Pauli::Y),
            (b, Pauli::Y),
        ));
        terms.push(PauliTerm::two(
            -half_j * bath.delta,
            (a, Pauli::Z),
            (b, Pauli::Z),
        ));
    }
    for site in 0..bath.n_spins {
        terms.push(PauliTerm::one(-bath.j * bath.lambda, site, Pauli::Z));
    }
    terms
}

/// Uniform symmetry-breaking field `-h Σ σᶻ_j`, favouring spin up for `h > 0`.
pub fn pinning_field_terms(n_spins: usize, h: f64) -> Vec<PauliTerm> {
    (0..n_spins)
        .map(|s| PauliTerm::one(-h, s, Pauli::Z))
        .collect()
}
