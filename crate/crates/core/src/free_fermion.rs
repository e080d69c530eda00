//! Jordan–Wigner free-fermion engine for the open XY-class chain.
//!
//! With `σ⁺_j = c†_j Π_{k<j}(1 − 2n_k)` and `σᶻ_j = 2n_j − 1` (spin up is an
//! occupied site) the bath becomes `½ Ψ† C Ψ + const` in the Nambu ordering
//! `Ψ = (c_1 … c_N, c†_1 … c†_N)`, with the real symmetric
//!
//! ```text
//! C = [[ A,  B],
//!      [−B, −A]]
//! ```
//!
//! The ground-state correlation matrix `r_ij = ⟨Ψ†_i Ψ_j⟩` is the real
//! projector onto the negative-energy eigenvectors of `C`. Pairing functions
//! follow from `⟨Ψ_k Ψ_l⟩ = r[k̄][l]`, where `k̄` swaps `i ↔ N + i`.
//!
//! # Echo convention
//!
//! `L(t) = |det(1 − r + r e^{i C_e t})|` with `r` from the ground branch and
//! `C_e` from the excited branch. This modulus is `|⟨ψ₀|e^{−iH_e t}|ψ₀⟩|²`
//! itself, not its square root; the sign of the exponent and the ground-branch
//! propagator drop out of the modulus. Writing `r = W Wᵀ` with `W` the `2N × N`
//! matrix of filled modes and `C_e = U diag(ω) Uᵀ`, Sylvester's identity gives
//! the `N × N` form `det(Gᵀ diag(e^{iωt}) G)`, `G = Uᵀ W`, which is what is
//! evaluated.
//!
//! # Zero modes
//!
//! Pairs of mode energies below [`ZERO_MODE_THRESHOLD`] make the many-body
//! ground state degenerate. [`ZeroModePolicy::Reject`] surfaces this as
//! [`Error::ZeroMode`]; the parity policies instead fill a particle-hole
//! consistent combination of the zero modes chosen so that `Π σᶻ_j` takes the
//! requested value.

use ndarray::{s, Array1, Array2, Axis};
use ndarray_linalg::{Determinant, SVD};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::echo::{check_times, EchoMeta, EchoSeries, Method};
use crate::error::{Error, Result};
use crate::linalg::{eigh_real, pfaffian_sign_ln};
use crate::models::{BathSpec, Boundary, CouplingSpec, Family, QubitBranch};

/// Mode energies with magnitude below this are treated as exact zero modes.
pub const ZERO_MODE_THRESHOLD: f64 = 1e-12;

/// Near-zero pairs below this are re-paired explicitly so the filled modes
/// stay particle-hole consistent when LAPACK mixes almost-degenerate vectors.
const NEAR_ZERO_WINDOW: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    pub a_matrix: Array2<f64>,
    pub b_matrix: Array2<f64>,
    pub c_matrix: Array2<f64>,
}

impl QuadraticForm {
    pub fn from_blocks(a: Array2<f64>, b: Array2<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.dim() != (n, n) || n == 0 {
            return Err(Error::InvalidParameter("A and B must be square and equal-sized".into()));
        }
        let mut c = Array2::zeros((2 * n, 2 * n));
        c.slice_mut(s![..n, ..n]).assign(&a);
        c.slice_mut(s![..n, n..]).assign(&b);
        c.slice_mut(s![n.., ..n]).assign(&b.mapv(|x| -x));
        c.slice_mut(s![n.., n..]).assign(&a.mapv(|x| -x));
        Ok(Self {
            a_matrix: a,
            b_matrix: b,
            c_matrix: c,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.a_matrix.nrows()
    }
}

pub fn build_quadratic_form(
    bath: &BathSpec,
    coupling: Option<&CouplingSpec>,
    branch: QubitBranch,
) -> Result<QuadraticForm> {
    bath.validate()?;
    if bath.family != Family::Xy {
        return Err(Error::Unsupported(
            "XXZ chains are not quadratic after fermionization".into(),
        ));
    }
    if bath.boundary != Boundary::Open {
        return Err(Error::Unsupported(
            "the determinant engine handles open chains only".into(),
        ));
    }
    if let Some(c) = coupling {
        c.validate(bath)?;
    }
    let n = bath.n_spins;
    let j = bath.j;
    let mut a = Array2::zeros((n, n));
    let mut b = Array2::zeros((n, n));
    for k in 0..n - 1 {
        a[[k, k + 1]] = -j;
        a[[k + 1, k]] = -j;
        b[[k, k + 1]] = -j * bath.gamma;
        b[[k + 1, k]] = j * bath.gamma;
    }
    for k in 0..n {
        a[[k, k]] = -2.0 * j * bath.lambda;
    }
    if let (Some(c), QubitBranch::Excited) = (coupling, branch) {
        a[[c.site_index(), c.site_index()]] -= 2.0 * c.epsilon;
    }
    QuadraticForm::from_blocks(a, b)
}

/// Bogoliubov modes of `C`: `C = U diag(energies) Uᵀ`, energies ascending.
#[derive(Clone, Debug)]
pub struct ModeDecomposition {
    pub energies: Array1<f64>,
    pub vectors: Array2<f64>,
}

impl ModeDecomposition {
    /// Ground energy of the spin Hamiltonian, `½ Σ_{ω<0} ω`.
    ///
    /// The constant from normal ordering is `½ Tr A`, which exactly cancels
    /// the `−λ N` offset of the Jordan–Wigner mapping, so no trace term
    /// survives.
    pub fn ground_energy(&self) -> f64 {
        0.5 * self.energies.iter().filter(|&&w| w < 0.0).sum::<f64>()
    }

    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.vectors * &self.energies.view().insert_axis(Axis(0));
        scaled.dot(&self.vectors.t())
    }
}

pub fn diagonalize(form: &QuadraticForm) -> Result<ModeDecomposition> {
    let (energies, vectors) = eigh_real(&form.c_matrix)?;
    if energies.iter().any(|w| !w.is_finite()) {
        return Err(Error::Numerical("non-finite Bogoliubov energy".into()));
    }
    Ok(ModeDecomposition { energies, vectors })
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroModePolicy {
    #[default]
    Reject,
    /// Select the degenerate ground state with `Π σᶻ_j = +1`.
    Even,
    /// Select the degenerate ground state with `Π σᶻ_j = −1`.
    Odd,
}

/// Correlations of a pure Gaussian state.
#[derive(Clone, Debug)]
pub struct CorrelationMatrix {
    /// `r_ij = ⟨Ψ†_i Ψ_j⟩`.
    pub r: Array2<f64>,
    /// Orthonormal filled modes, `r = W Wᵀ`.
    pub filled: Array2<f64>,
    /// Number of zero-mode pairs resolved by the policy.
    pub zero_modes: usize,
}

impl CorrelationMatrix {
    pub fn n_modes(&self) -> usize {
        self.r.nrows() / 2
    }

    fn partner(&self, k: usize) -> usize {
        let n = self.n_modes();
        if k < n {
            k + n
        } else {
            k - n
        }
    }

    /// `⟨O_a O_b⟩` with `O = (c_1 … c_N, c†_1 … c†_N)`.
    fn op_pair(&self, a: usize, b: usize) -> f64 {
        self.r[[self.partner(a), b]]
    }

    /// `⟨X_k X_l⟩` for Majoranas `X_{2j} = c†_j + c_j`, `X_{2j+1} = c†_j − c_j`.
    fn majorana_pair(&self, k: usize, l: usize) -> f64 {
        let n = self.n_modes();
        let terms = |m: usize| -> [(usize, f64); 2] {
            let j = m / 2;
            if m % 2 == 0 {
                [(j, 1.0), (j + n, 1.0)]
            } else {
                [(j, -1.0), (j + n, 1.0)]
            }
        };
        let mut acc = 0.0;
        for (a, ca) in terms(k) {
            for (b, cb) in terms(l) {
                acc += ca * cb * self.op_pair(a, b);
            }
        }
        acc
    }

    fn wick4(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let m = |x, y| self.majorana_pair(x, y);
        m(a, b) * m(c, d) - m(a, c) * m(b, d) + m(a, d) * m(b, c)
    }

    /// `⟨Π_j σᶻ_j⟩`, ±1 for a pure state with definite parity.
    pub fn spin_parity(&self) -> Result<f64> {
        let dim = 2 * self.n_modes();
        let mut k = Array2::zeros((dim, dim));
        for a in 0..dim {
            for b in a + 1..dim {
                let v = self.majorana_pair(a, b);
                k[[a, b]] = v;
                k[[b, a]] = -v;
            }
        }
        let (sign, ln) = pfaffian_sign_ln(k.view())?;
        let sign_n = if self.n_modes() % 2 == 0 { 1.0 } else { -1.0 };
        Ok(sign_n * sign * ln.exp())
    }
}

pub fn ground_state_correlations(form: &QuadraticForm) -> Result<CorrelationMatrix> {
    ground_state_correlations_with(form, ZeroModePolicy::Reject)
}

pub fn ground_state_correlations_with(
    form: &QuadraticForm,
    policy: ZeroModePolicy,
) -> Result<CorrelationMatrix> {
    let modes = diagonalize(form)?;
    correlations_from_modes(form, &modes, policy)
}

fn correlations_from_modes(
    form: &QuadraticForm,
    modes: &ModeDecomposition,
    policy: ZeroModePolicy,
) -> Result<CorrelationMatrix> {
    let n = form.n_modes();
    let min_abs = modes.energies.iter().map(|w| w.abs()).fold(f64::INFINITY, f64::min);
    if policy == ZeroModePolicy::Reject && min_abs < ZERO_MODE_THRESHOLD {
        return Err(Error::ZeroMode {
            energy: min_abs,
            threshold: ZERO_MODE_THRESHOLD,
        });
    }
    let scale = modes.energies.iter().map(|w| w.abs()).fold(1.0, f64::max);
    let window = NEAR_ZERO_WINDOW * scale;
    let negative: Vec<usize> = (0..2 * n).filter(|&i| modes.energies[i] <= -window).collect();
    let near: Vec<usize> = (0..2 * n).filter(|&i| modes.energies[i].abs() < window).collect();
    if negative.len() * 2 + near.len() != 2 * n || near.len() % 2 == 1 {
        return Err(Error::Numerical(
            "Bogoliubov spectrum is not particle-hole symmetric".into(),
        ));
    }
    let mut filled = Array2::zeros((2 * n, n));
    for (col, &i) in negative.iter().enumerate() {
        filled.column_mut(col).assign(&modes.vectors.column(i));
    }
    let mut zero_modes = 0;
    if !near.is_empty() {
        let pairs = repair_near_zero(form, modes, &near)?;
        let first = negative.len();
        for (p, (low, _, _)) in pairs.iter().enumerate() {
            filled.column_mut(first + p).assign(low);
        }
        let exact: Vec<usize> = (0..pairs.len())
            .filter(|&p| pairs[p].2 < ZERO_MODE_THRESHOLD)
            .collect();
        zero_modes = exact.len();
        if let Some(&flip) = exact.first() {
            let target = match policy {
                ZeroModePolicy::Even => 1.0,
                ZeroModePolicy::Odd => -1.0,
                ZeroModePolicy::Reject => unreachable!("rejected above"),
            };
            let probe = CorrelationMatrix {
                r: filled.dot(&filled.t()),
                filled: filled.clone(),
                zero_modes,
            };
            if probe.spin_parity()? * target < 0.0 {
                filled.column_mut(first + flip).assign(&pairs[flip].1);
            }
        }
    }
    let r = filled.dot(&filled.t());
    Ok(CorrelationMatrix {
        r,
        filled,
        zero_modes,
    })
}

/// Rebuilds the near-zero subspace as particle-hole partners `(u⁻, u⁺, |ω|)`
/// with `u⁺ = Σˣ u⁻` and `u⁻ᵀ C u⁻ = −|ω|`.
fn repair_near_zero(
    form: &QuadraticForm,
    modes: &ModeDecomposition,
    near: &[usize],
) -> Result<Vec<(Array1<f64>, Array1<f64>, f64)>> {
    let n = form.n_modes();
    let dim = 2 * n;
    let mut z = Array2::zeros((dim, near.len()));
    for (col, &i) in near.iter().enumerate() {
        z.column_mut(col).assign(&modes.vectors.column(i));
    }
    let swap = |v: &Array2<f64>| -> Array2<f64> {
        let mut out = Array2::zeros(v.raw_dim());
        out.slice_mut(s![..n, ..]).assign(&v.slice(s![n.., ..]));
        out.slice_mut(s![n.., ..]).assign(&v.slice(s![..n, ..]));
        out
    };
    let projected = z.t().dot(&swap(&z));
    let sym = (&projected + &projected.t()) * 0.5;
    let (sig, vecs) = eigh_real(&sym)?;
    let m = near.len() / 2;
    if sig.iter().take(m).any(|&x| x > -0.5) || sig.iter().skip(m).any(|&x| x < 0.5) {
        return Err(Error::Numerical(
            "near-zero subspace is not closed under particle-hole conjugation".into(),
        ));
    }
    let minus = z.dot(&vecs.slice(s![.., ..m]));
    let plus = z.dot(&vecs.slice(s![.., m..]));
    let coupling = plus.t().dot(&form.c_matrix.dot(&minus));
    let (u, sv, vt) = coupling.svd(true, true)?;
    let (u, vt) = (u.unwrap(), vt.unwrap());
    let e_plus = plus.dot(&u);
    let e_minus = minus.dot(&vt.t());
    let mut pairs = Vec::with_capacity(m);
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    for p in 0..m {
        let ep = e_plus.column(p);
        let em = e_minus.column(p);
        let low = (&ep - &em) * inv;
        let high = (&ep + &em) * inv;
        pairs.push((low, high, sv[p]));
    }
    Ok(pairs)
}

/// `⟨σᶻ_site⟩` for a 0-based site.
pub fn transverse_magnetization(corr: &CorrelationMatrix, site: usize) -> Result<f64> {
    let n = corr.n_modes();
    if site >= n {
        return Err(Error::InvalidParameter(format!("site {site} outside chain of {n}")));
    }
    Ok(2.0 * corr.r[[site, site]] - 1.0)
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearestNeighbour {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub z_left: f64,
    pub z_right: f64,
}

/// Correlators of the bond `(j, j + 1)`, 0-based.
pub fn nn_spin_correlators(corr: &CorrelationMatrix, j: usize) -> Result<NearestNeighbour> {
    let n = corr.n_modes();
    if j + 1 >= n {
        return Err(Error::InvalidParameter(format!("bond ({j}, {}) outside chain of {n}", j + 1)));
    }
    let (a0, b0, a1, b1) = (2 * j, 2 * j + 1, 2 * j + 2, 2 * j + 3);
    let m = |x, y| corr.majorana_pair(x, y);
    Ok(NearestNeighbour {
        xx: m(b0, a1),
        yy: -m(a0, b1),
        zz: corr.wick4(a0, b0, a1, b1),
        z_left: -m(a0, b0),
        z_right: -m(a1, b1),
    })
}

#[derive(Clone, Debug, Default)]
pub struct DeterminantOptions {
    pub zero_modes: ZeroModePolicy,
}

pub fn loschmidt_echo_determinant(
    bath: &BathSpec,
    coupling: &CouplingSpec,
    times: &[f64],
) -> Result<EchoSeries> {
    loschmidt_echo_determinant_with(bath, coupling, times, &DeterminantOptions::default())
}

pub fn loschmidt_echo_determinant_with(
    bath: &BathSpec,
    coupling: &CouplingSpec,
    times: &[f64],
    options: &DeterminantOptions,
) -> Result<EchoSeries> {
    coupling.validate(bath)?;
    check_times(times)?;
    let ground = build_quadratic_form(bath, Some(coupling), QubitBranch::Ground)?;
    let excited = build_quadratic_form(bath, Some(coupling), QubitBranch::Excited)?;
    let corr = ground_state_correlations_with(&ground, options.zero_modes)?;
    let modes = diagonalize(&excited)?;
    let overlap = modes.vectors.t().dot(&corr.filled);
    let values: Vec<f64> = times
        .par_iter()
        .map(|&t| echo_at(&modes.energies, &overlap, t))
        .collect::<Result<_>>()?;
    let mut meta = EchoMeta::new(bath, coupling, Method::Determinant);
    if corr.zero_modes > 0 {
        meta.flags.push(format!(
            "{} zero mode(s) resolved with {:?} parity",
            corr.zero_modes, options.zero_modes
        ));
    }
    EchoSeries::new(times.to_vec(), values, meta)
}

fn echo_at(energies: &Array1<f64>, overlap: &Array2<f64>, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(1.0);
    }
    let cos = energies.mapv(|w| (w * t).cos()).insert_axis(Axis(1));
    let sin = energies.mapv(|w| (w * t).sin()).insert_axis(Axis(1));
    let re = overlap.t().dot(&(overlap * &cos));
    let im = overlap.t().dot(&(overlap * &sin));
    let m = ndarray::Zip::from(&re)
        .and(&im)
        .map_collect(|&a, &b| Complex64::new(a, b));
    let (sign, ln) = m.sln_det()?;
    if sign.norm() == 0.0 {
        return Ok(0.0);
    }
    let value = ln.exp();
    if !value.is_finite() {
        return Err(Error::Numerical(format!("determinant overflow at t = {t}")));
    }
    Ok(value)
}
