//! Brute-force engine on the full `2^N` Hilbert space, block-diagonalized by
//! the conserved magnetization (`γ = 0`) or spin-flip parity (`γ > 0`).
//!
//! Every engine in the crate is checked against this one.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::echo::{check_times, EchoMeta, EchoSeries, Method};
use crate::error::{Error, Result};
use crate::krylov::{lanczos_lowest, KrylovPropagator};
use crate::linalg::{eigh_complex, eigh_real};
use crate::models::{
    pinning_field_terms, spin_hamiltonian_terms, BathSpec, CouplingSpec, PauliTerm, QubitBranch,
};
use crate::sparse::{CsrMatrix, Sector, Symmetry, MAX_DENSE_SPINS, MAX_SPARSE_SPINS};

/// Ground states closer than this to the first excited level count as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-10;
pub const DEFAULT_PINNING: f64 = 1e-8;
/// Sectors up to this dimension are diagonalized densely under [`Solver::Auto`].
const DENSE_SECTOR_LIMIT: usize = 1200;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    #[default]
    Auto,
    Dense,
    Iterative,
}

#[derive(Clone, Debug)]
pub struct ExactOptions {
    pub solver: Solver,
    pub seed: u64,
    /// Field `h` of `−h Σ σᶻ` added to both branches when the unpinned
    /// ground state is degenerate; `None` turns degeneracy into an error.
    pub pinning: Option<f64>,
    pub krylov: KrylovPropagator,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            solver: Solver::Auto,
            seed: 0x5eed,
            pinning: Some(DEFAULT_PINNING),
            krylov: KrylovPropagator::default(),
        }
    }
}

fn check_size(bath: &BathSpec, limit: usize) -> Result<()> {
    if bath.n_spins > limit {
        return Err(Error::Unsupported(format!(
            "exact engine limited to N <= {limit} here, got {}",
            bath.n_spins
        )));
    }
    Ok(())
}

fn branch_terms(
    bath: &BathSpec,
    coupling: &CouplingSpec,
    branch: QubitBranch,
    pinning: f64,
) -> Result<Vec<PauliTerm>> {
    let mut terms = spin_hamiltonian_terms(bath, coupling, branch)?;
    if pinning != 0.0 {
        terms.extend(pinning_field_terms(bath.n_spins, pinning));
    }
    Ok(terms)
}

/// Full `2^N × 2^N` matrix of one branch.
pub fn build_dense_hamiltonian(
    bath: &BathSpec,
    coupling: &CouplingSpec,
    branch: QubitBranch,
) -> Result<Array2<f64>> {
    check_size(bath, MAX_DENSE_SPINS)?;
    Ok(build_sparse_hamiltonian(bath, coupling, branch)?.to_dense())
}

/// Full-space sparse matrix of one branch.
pub fn build_sparse_hamiltonian(
    bath: &BathSpec,
    coupling: &CouplingSpec,
    branch: QubitBranch,
) -> Result<CsrMatrix> {
    check_size(bath, MAX_SPARSE_SPINS)?;
    let terms = spin_hamiltonian_terms(bath, coupling, branch)?;
    CsrMatrix::from_terms(&terms, &Sector::full(bath.n_spins)?)
}

/// Ground state of one branch, with its sector, in the sector basis.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    /// `E₁ − E₀` over all sectors.
    pub gap: f64,
    pub sector: Sector,
    pub vector: Vec<f64>,
    /// Pinning field that was applied, 0 if none.
    pub pinning: f64,
}

impl GroundState {
    pub fn full_vector(&self) -> Vec<f64> {
        self.sector.embed(&self.vector)
    }

    pub fn full_vector_complex(&self) -> Vec<Complex64> {
        let v: Vec<Complex64> = self.vector.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.sector.embed(&v)
    }
}

/// Two lowest energies and the ground vector of a matrix.
pub fn lowest_pairs(h: &CsrMatrix, solver: Solver, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let dense = match solver {
        Solver::Dense => true,
        Solver::Iterative => false,
        Solver::Auto => h.dim <= DENSE_SECTOR_LIMIT,
    };
    if dense {
        let (w, v) = eigh_real(&h.to_dense())?;
        Ok((w.iter().take(2).copied().collect(), v.column(0).to_vec()))
    } else {
        let pairs = lanczos_lowest(h, seed, 1e-13)?;
        Ok((pairs.energies, pairs.ground))
    }
}

pub fn ground_state(
    bath: &BathSpec,
    coupling: &CouplingSpec,
    branch: QubitBranch,
    options: &ExactOptions,
) -> Result<GroundState> {
    match ground_state_pinned(bath, coupling, branch, options, 0.0) {
        Err(Error::DegenerateGroundState { gap }) => match options.pinning {
            Some(h) if h != 0.0 => {
                log::debug!("ground state degenerate (gap {gap:e}); pinning with h = {h:e}");
                ground_state_pinned(bath, coupling, branch, options, h)
            }
            _ => Err(Error::DegenerateGroundState { gap }),
        },
        other => other,
    }
}

fn ground_state_pinned(
    bath: &BathSpec,
    coupling: &CouplingSpec,
    branch: QubitBranch,
    options: &ExactOptions,
    pinning: f64,
) -> Result<GroundState> {
    check_size(bath, MAX_SPARSE_SPINS)?;
    let terms = branch_terms(bath, coupling, branch, pinning)?;
    let symmetry = Symmetry::of_bath(bath);
    let mut levels: Vec<f64> = Vec::new();
    let mut best: Option<(f64, Sector, Vec<f64>)> = None;
    for label in symmetry.labels(bath.n_spins) {
        let sector = Sector::new(bath.n_spins, symmetry, label)?;
        let h = CsrMatrix::from_terms(&terms, &sector)?;
        let (energies, vector) = lowest_pairs(&h, options.solver, options.seed ^ label as u64)?;
        levels.extend(&energies);
        if best.as_ref().is_none_or(|b| energies[0] < b.0) {
            best = Some((energies[0], sector, vector));
        }
    }
    levels.sort_by(|a, b| a.total_cmp(b));
    let (energy, sector, vector) = best.expect("at least one sector");
    let gap = if levels.len() > 1 { levels[1] - levels[0] } else { f64::INFINITY };
    if gap < DEGENERACY_GAP {
        return Err(Error::DegenerateGroundState { gap });
    }
    Ok(GroundState {
        energy,
        gap,
        sector,
        vector,
        pinning,
    })
}

/// Full spectrum of one sector.
#[derive(Clone, Debug)]
pub struct DenseSpectrum {
    pub energies: Array1<f64>,
    /// Eigenvectors as columns, in the sector basis.
    pub vectors: Array2<f64>,
    pub sector: Sector,
}

pub fn dense_spectrum(
    bath: &BathSpec,
    coupling: &CouplingSpec,
    branch: QubitBranch,
    sector: &Sector,
    pinning: f64,
) -> Result<DenseSpectrum> {
    check_size(bath, MAX_DENSE_SPINS)?;
    let terms = branch_terms(bath, coupling, branch, pinning)?;
    let h = CsrMatrix::from_terms(&terms, sector)?;
    let (energies, vectors) = eigh_real(&h.to_dense())?;
    Ok(DenseSpectrum {
        energies,
        vectors,
        sector: sector.clone(),
    })
}

/// `L(t) = |⟨ψ₀|e^{−iH_e t}|ψ₀⟩|²` with `ψ₀` the ground-branch ground state.
pub fn loschmidt_echo_exact(
    bath: &BathSpec,
    coupling: &CouplingSpec,
    times: &[f64],
    options: &ExactOptions,
) -> Result<EchoSeries> {
    coupling.validate(bath)?;
    check_times(times)?;
    let ground = ground_state(bath, coupling, QubitBranch::Ground, options)?;
    let terms = branch_terms(bath, coupling, QubitBranch::Excited, ground.pinning)?;
    let h = CsrMatrix::from_terms(&terms, &ground.sector)?;
    let dense = match options.solver {
        Solver::Dense => true,
        Solver::Iterative => false,
        Solver::Auto => h.dim <= DENSE_SECTOR_LIMIT,
    };
    let values = if dense {
        spectral_echo(&h, &ground.vector, times)?
    } else {
        krylov_echo(&h, &ground.vector, times, &options.krylov)?
    };
    let mut meta = EchoMeta::new(bath, coupling, Method::Exact);
    meta.seed = Some(options.seed);
    if ground.pinning != 0.0 {
        meta.flags.push(format!(
            "degenerate ground state resolved by pinning field {:e}",
            ground.pinning
        ));
    }
    EchoSeries::new(times.to_vec(), values, meta)
}

fn spectral_echo(h: &CsrMatrix, psi0: &[f64], times: &[f64]) -> Result<Vec<f64>> {
    let (w, v) = eigh_real(&h.to_dense())?;
    let psi = Array1::from(psi0.to_vec());
    let weights = v.t().dot(&psi).mapv(|c| c * c);
    Ok(times
        .iter()
        .map(|&t| {
            let amp: Complex64 = weights
                .iter()
                .zip(w.iter())
                .map(|(&p, &e)| Complex64::from_polar(p, -e * t))
                .sum();
            amp.norm_sqr()
        })
        .collect())
}

fn krylov_echo(
    h: &CsrMatrix,
    psi0: &[f64],
    times: &[f64],
    propagator: &KrylovPropagator,
) -> Result<Vec<f64>> {
    let reference: Vec<Complex64> = psi0.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut psi = reference.clone();
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        propagator.evolve(h, &mut psi, t - now)?;
        now = t;
        let overlap: Complex64 = reference.iter().zip(&psi).map(|(a, b)| a.conj() * b).sum();
        out.push(overlap.norm_sqr());
    }
    Ok(out)
}

/// Two-site reduced density matrix in the basis `|s_i s_j⟩`, index `2 s_i + s_j`,
/// with `s = 0` for spin up.
pub fn reduced_density_matrix(psi: &[Complex64], n_spins: usize, i: usize, j: usize) -> Result<Array2<Complex64>> {
    if psi.len() != 1usize << n_spins {
        return Err(Error::InvalidParameter("state length is not 2^N".into()));
    }
    if i >= n_spins || j >= n_spins || i == j {
        return Err(Error::InvalidParameter(format!("invalid site pair ({i}, {j})")));
    }
    let mut rho = Array2::<Complex64>::zeros((4, 4));
    let mask = (1usize << i) | (1usize << j);
    for rest in 0..psi.len() {
        if rest & mask != 0 {
            continue;
        }
        let idx = |a: usize, b: usize| rest | (a << i) | (b << j);
        for a in 0..4 {
            let x = psi[idx(a >> 1, a & 1)];
            if x == Complex64::new(0.0, 0.0) {
                continue;
            }
            for b in 0..4 {
                rho[[a, b]] += x * psi[idx(b >> 1, b & 1)].conj();
            }
        }
    }
    Ok(rho)
}

/// Wootters concurrence of a two-qubit density matrix.
pub fn concurrence(rho: &Array2<Complex64>) -> Result<f64> {
    if rho.dim() != (4, 4) {
        return Err(Error::InvalidParameter("concurrence needs a 4x4 matrix".into()));
    }
    let (w, v) = eigh_complex(rho)?;
    let sqrt_w = w.mapv(|x| x.max(0.0).sqrt());
    let root = {
        let scaled = &v * &sqrt_w.mapv(|x| Complex64::new(x, 0.0)).insert_axis(ndarray::Axis(0));
        scaled.dot(&v.t().mapv(|z| z.conj()))
    };
    // σʸ⊗σʸ is real: +1 on |01⟩↔|10⟩, −1 on |00⟩↔|11⟩.
    let mut yy = Array2::<Complex64>::zeros((4, 4));
    yy[[0, 3]] = Complex64::new(-1.0, 0.0);
    yy[[3, 0]] = Complex64::new(-1.0, 0.0);
    yy[[1, 2]] = Complex64::new(1.0, 0.0);
    yy[[2, 1]] = Complex64::new(1.0, 0.0);
    let tilde = yy.dot(&rho.mapv(|z| z.conj())).dot(&yy);
    let mut r = root.dot(&tilde).dot(&root);
    let rt = r.t().mapv(|z| z.conj());
    r = (&r + &rt).mapv(|z| z * 0.5);
    let (mu, _) = eigh_complex(&r)?;
    let mut s: Vec<f64> = mu.iter().map(|x| x.max(0.0).sqrt()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok((s[0] - s[1] - s[2] - s[3]).max(0.0))
}

/// `[1 − (ε²/2) Σ_{k≠0} |⟨ψ_k|σᶻ_site|ψ₀⟩|² / (E_k − E₀)²]²` over the
/// ground-branch spectrum.
pub fn perturbative_plateau(
    bath: &BathSpec,
    coupling: &CouplingSpec,
    options: &ExactOptions,
) -> Result<f64> {
    coupling.validate(bath)?;
    check_size(bath, MAX_DENSE_SPINS)?;
    let ground = ground_state(bath, coupling, QubitBranch::Ground, options)?;
    let spectrum = dense_spectrum(bath, coupling, QubitBranch::Ground, &ground.sector, ground.pinning)?;
    let e0 = spectrum.energies[0];
    if spectrum.energies.len() > 1 && spectrum.energies[1] - e0 < DEGENERACY_GAP {
        return Err(Error::DegenerateGroundState {
            gap: spectrum.energies[1] - e0,
        });
    }
    let site = coupling.site_index();
    let psi0 = spectrum.vectors.column(0);
    let z_psi0: Array1<f64> = spectrum
        .sector
        .states
        .iter()
        .zip(psi0.iter())
        .map(|(&s, &x)| if (s >> site) & 1 == 0 { x } else { -x })
        .collect();
    let elements = spectrum.vectors.t().dot(&z_psi0);
    let sum: f64 = (1..spectrum.energies.len())
        .map(|k| elements[k].powi(2) / (spectrum.energies[k] - e0).powi(2))
        .sum();
    Ok((1.0 - 0.5 * coupling.epsilon.powi(2) * sum).powi(2))
}

/// `⟨σᶻ_site⟩` in a full-space state, 0-based site.
pub fn magnetization(psi: &[Complex64], site: usize) -> f64 {
    psi.iter()
        .enumerate()
        .map(|(s, x)| if (s >> site) & 1 == 0 { x.norm_sqr() } else { -x.norm_sqr() })
        .sum()
}
