//! Time-evolving block decimation on open-boundary matrix-product states.
//!
//! States are kept in right-canonical form: site tensors `B_i` of shape
//! `(χ_left, 2, χ_right)` plus Schmidt values `S_i` on the bond left of site
//! `i`. A two-site update forms `θ = S_i B_i B_{i+1}`, applies the gate,
//! splits by SVD and writes back `B_i = θ̃ Z†` with `θ̃ = B_i B_{i+1}` after the
//! gate, so no Schmidt value is ever inverted.
//!
//! Every bond index carries a charge: the number of down spins to its left,
//! taken mod 2 when only spin-flip parity is conserved. All tensors are dense,
//! but each SVD is done block by block in charge, which is what makes `N ~ 100`
//! with `m = 100` affordable.
//!
//! Ground states come from imaginary-time evolution with a staged `dτ`
//! schedule; echoes from second-order Trotter evolution under the excited
//! branch and an MPS overlap with the ground state.

use std::collections::BTreeMap;

use ndarray::{s, Array1, Array2, Array3, LinalgScalar};
use ndarray_linalg::{JobSvd, Lapack, Scalar, SVDDC};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::echo::{check_times, EchoMeta, EchoSeries, Method};
use crate::error::{Error, Result};
use crate::exact::DEFAULT_PINNING;
use crate::free_fermion::{build_quadratic_form, ground_state_correlations_with, ZeroModePolicy};
use crate::linalg::{eigh_real, expm_hermitian, expm_symmetric_imag};
use crate::models::{BathSpec, Boundary, CouplingSpec, Family, QubitBranch};

/// Scalar types an MPS can hold.
pub trait Amplitude: Scalar<Real = f64> + Lapack + LinalgScalar {}
impl<T: Scalar<Real = f64> + Lapack + LinalgScalar> Amplitude for T {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImaginaryStage {
    pub dtau: f64,
    pub max_steps: usize,
    /// Steps run before convergence is first tested.
    #[serde(default)]
    pub min_steps: usize,
    /// Allowed energy change per unit imaginary time; `None` means `1e-8 · N`.
    pub energy_tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TebdParams {
    pub dt: f64,
    pub m: usize,
    pub trotter_order: u8,
    /// Singular values below `svd_cutoff · s_max` are dropped.
    pub svd_cutoff: f64,
    pub imaginary_time_schedule: Vec<ImaginaryStage>,
    /// Real-time evolution stops once one step discards more weight than this.
    pub max_step_discarded_weight: f64,
}

impl Default for TebdParams {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            m: 100,
            trotter_order: 2,
            svd_cutoff: 1e-10,
            imaginary_time_schedule: vec![
                ImaginaryStage {
                    dtau: 0.1,
                    max_steps: 2000,
                    min_steps: 0,
                    energy_tol: None,
                },
                ImaginaryStage {
                    dtau: 0.01,
                    max_steps: 1000,
                    min_steps: 0,
                    energy_tol: None,
                },
                ImaginaryStage {
                    dtau: 0.001,
                    max_steps: 500,
                    min_steps: 0,
                    energy_tol: None,
                },
            ],
            max_step_discarded_weight: 1e-5,
        }
    }
}

impl TebdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        if self.m == 0 {
            return Err(Error::InvalidParameter("bond dimension m must be positive".into()));
        }
        if self.trotter_order != 2 {
            return Err(Error::Unsupported("only second-order Trotter splitting".into()));
        }
        if !(0.0..1.0).contains(&self.svd_cutoff) {
            return Err(Error::InvalidParameter("svd_cutoff must lie in [0, 1)".into()));
        }
        if self.imaginary_time_schedule.is_empty()
            || self
                .imaginary_time_schedule
                .iter()
                .any(|s| !(s.dtau > 0.0) || s.max_steps == 0 || s.min_steps > s.max_steps)
        {
            return Err(Error::InvalidParameter("invalid imaginary-time schedule".into()));
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum ChargeRule {
    /// Conserved number of down spins.
    Count,
    /// Conserved parity of down spins.
    Parity,
}

impl ChargeRule {
    fn of_bath(bath: &BathSpec) -> Self {
        if bath.gamma == 0.0 {
            ChargeRule::Count
        } else {
            ChargeRule::Parity
        }
    }

    fn wrap(&self, q: i64) -> i64 {
        match self {
            ChargeRule::Count => q,
            ChargeRule::Parity => q.rem_euclid(2),
        }
    }
}

/// Open-boundary MPS in right-canonical form.
#[derive(Clone, Debug)]
pub struct MpsState<T: Amplitude> {
    pub tensors: Vec<Array3<T>>,
    /// `schmidt[i]` lives on the bond left of site `i`; ends are `[1]`.
    pub schmidt: Vec<Array1<f64>>,
    charges: Vec<Vec<i64>>,
    rule: ChargeRule,
    pub max_bond: usize,
    pub canonical: bool,
    pub discarded_weight: f64,
}

impl<T: Amplitude> MpsState<T> {
    /// Product state; `downs[i]` selects spin down at site `i`.
    fn product(downs: &[bool], rule: ChargeRule, max_bond: usize) -> Self {
        let n = downs.len();
        let mut tensors = Vec::with_capacity(n);
        let mut charges = vec![vec![0i64]];
        for (i, &d) in downs.iter().enumerate() {
            let mut b = Array3::zeros((1, 2, 1));
            b[[0, d as usize, 0]] = T::one();
            tensors.push(b);
            charges.push(vec![rule.wrap(charges[i][0] + d as i64)]);
        }
        Self {
            tensors,
            schmidt: vec![Array1::ones(1); n + 1],
            charges,
            rule,
            max_bond,
            canonical: true,
            discarded_weight: 0.0,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors.iter().skip(1).map(|b| b.shape()[0]).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// `⟨self|other⟩` by left-to-right transfer contraction.
    pub fn overlap(&self, other: &MpsState<T>) -> Result<T> {
        if self.n_sites() != other.n_sites() {
            return Err(Error::InvalidParameter("MPS lengths differ".into()));
        }
        let mut env = Array2::<T>::ones((1, 1));
        for (bra, ket) in self.tensors.iter().zip(&other.tensors) {
            let mut next = Array2::<T>::zeros((bra.shape()[2], ket.shape()[2]));
            for s in 0..2 {
                let k = ket.slice(s![.., s, ..]);
                let b: Array2<T> = bra.slice(s![.., s, ..]).mapv(|x| x.conj());
                let moved: Array2<T> = env.dot(&k);
                next = next + b.t().dot(&moved);
            }
            env = next;
        }
        Ok(env[[0, 0]])
    }

    pub fn norm(&self) -> Result<f64> {
        Ok(self.overlap(self)?.re().max(0.0).sqrt())
    }

    /// `⟨σᶻ_site⟩`; the state must be in canonical form.
    pub fn magnetization(&self, site: usize) -> Result<f64> {
        if !self.canonical {
            return Err(Error::InvalidParameter("MPS is not in canonical form".into()));
        }
        let b = self
            .tensors
            .get(site)
            .ok_or_else(|| Error::InvalidParameter(format!("site {site} outside chain")))?;
        let sl = &self.schmidt[site];
        let mut m = 0.0;
        for ((a, s, _), x) in b.indexed_iter() {
            let sign = if s == 0 { 1.0 } else { -1.0 };
            m += sign * sl[a] * sl[a] * x.square();
        }
        Ok(m)
    }

    /// Brings the state back to normalized right-canonical form with exact
    /// Schmidt values, truncating to `max_bond` and `cutoff`.
    pub fn canonicalize(&mut self, cutoff: f64) -> Result<()> {
        let n = self.n_sites();
        // Left sweep: left-canonical A tensors, norm pushed to the last site.
        for i in 0..n - 1 {
            let b = &self.tensors[i];
            let (cl, cr) = (b.shape()[0], b.shape()[2]);
            let mat = b.to_shape((cl * 2, cr)).unwrap().to_owned();
            let rows = self.site_row_charges(i);
            let cols = self.charges[i + 1].clone();
            let split = block_svd(&mat, &rows, &cols, self.rule)?;
            let kept = split.keep(usize::MAX, 1e-15)?;
            let (u, sv, vt, q) = split.assemble(&kept);
            let k = sv.len();
            self.tensors[i] = u.into_shape_with_order((cl, 2, k)).unwrap();
            let carry = scale_rows(&vt, &sv);
            let next = &self.tensors[i + 1];
            let (nl, nr) = (next.shape()[0], next.shape()[2]);
            let next_mat = next.to_shape((nl, 2 * nr)).unwrap();
            self.tensors[i + 1] = carry.dot(&next_mat).into_shape_with_order((k, 2, nr)).unwrap();
            self.charges[i + 1] = q;
        }
        // Right sweep: right-canonical B tensors and Schmidt values.
        for i in (1..n).rev() {
            let b = &self.tensors[i];
            let (cl, cr) = (b.shape()[0], b.shape()[2]);
            let mat = b.to_shape((cl, 2 * cr)).unwrap().to_owned();
            let rows = self.charges[i].clone();
            let cols = self.site_col_charges(i);
            let split = block_svd(&mat, &rows, &cols, self.rule)?;
            let kept = split.keep(self.max_bond, cutoff)?;
            let total: f64 = split.blocks.iter().flat_map(|b| b.s.iter()).map(|x| x * x).sum();
            let kept_weight: f64 = kept.iter().map(|&(_, _, s)| s * s).sum();
            if total > 0.0 {
                self.discarded_weight += (1.0 - kept_weight / total).max(0.0);
            }
            let (u, sv, vt, q) = split.assemble(&kept);
            let k = sv.len();
            let nrm = sv.iter().map(|x| x * x).sum::<f64>().sqrt();
            self.tensors[i] = vt.into_shape_with_order((k, 2, cr)).unwrap();
            self.schmidt[i] = sv.mapv(|x| x / nrm);
            self.charges[i] = q;
            let carry = scale_cols(&u, &sv);
            let prev = &self.tensors[i - 1];
            let (pl, pr) = (prev.shape()[0], prev.shape()[2]);
            let prev_mat = prev.to_shape((pl * 2, pr)).unwrap();
            self.tensors[i - 1] = prev_mat.dot(&carry).into_shape_with_order((pl, 2, k)).unwrap();
        }
        let first = &self.tensors[0];
        let norm = first.iter().map(|x| x.square()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Numerical("MPS norm vanished".into()));
        }
        self.tensors[0] = first.mapv(|x| x.mul_real(1.0 / norm));
        self.schmidt[0] = Array1::ones(1);
        self.canonical = true;
        Ok(())
    }

    fn site_row_charges(&self, i: usize) -> Vec<i64> {
        let mut q = Vec::with_capacity(self.charges[i].len() * 2);
        for &a in &self.charges[i] {
            for s in 0..2 {
                q.push(self.rule.wrap(a + s));
            }
        }
        q
    }

    fn site_col_charges(&self, i: usize) -> Vec<i64> {
        let mut q = Vec::with_capacity(self.charges[i + 1].len() * 2);
        for s in 0..2 {
            for &b in &self.charges[i + 1] {
                q.push(self.rule.wrap(b - s));
            }
        }
        q
    }

    /// Applies a two-site gate on `(i, i+1)`; returns the discarded weight.
    fn apply_gate(&mut self, i: usize, gate: &Array2<T>, cutoff: f64) -> Result<f64> {
        let (bl, br) = (&self.tensors[i], &self.tensors[i + 1]);
        let (cl, cm, cr) = (bl.shape()[0], bl.shape()[2], br.shape()[2]);
        let left = bl.to_shape((cl * 2, cm)).unwrap();
        let right = br.to_shape((cm, 2 * cr)).unwrap();
        let theta = left
            .dot(&right)
            .into_shape_with_order((cl, 2, 2, cr))
            .unwrap();
        let mut gated = ndarray::Array4::<T>::zeros((cl, 2, 2, cr));
        for out in 0..4 {
            for inp in 0..4 {
                let g = gate[[out, inp]];
                if g == T::zero() {
                    continue;
                }
                let src = theta.slice(s![.., inp >> 1, inp & 1, ..]);
                let mut dst = gated.slice_mut(s![.., out >> 1, out & 1, ..]);
                dst.scaled_add(g, &src);
            }
        }
        let gated = gated.into_shape_with_order((cl * 2, 2 * cr)).unwrap();
        let sl = &self.schmidt[i];
        let mut weighted = gated.clone();
        for a in 0..cl {
            let f = sl[a];
            weighted
                .slice_mut(s![2 * a..2 * a + 2, ..])
                .mapv_inplace(|x| x.mul_real(f));
        }
        let rows = self.site_row_charges(i);
        let cols = self.site_col_charges(i + 1);
        let split = block_svd(&weighted, &rows, &cols, self.rule)?;
        let kept = split.keep(self.max_bond, cutoff)?;
        let total: f64 = split.blocks.iter().flat_map(|b| b.s.iter()).map(|x| x * x).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Numerical("two-site wavefunction vanished".into()));
        }
        let kept_weight: f64 = kept.iter().map(|&(_, _, s)| s * s).sum();
        let discarded = (1.0 - kept_weight / total).max(0.0);
        let (_, sv, vt, q) = split.assemble(&kept);
        let k = sv.len();
        let nrm = kept_weight.sqrt();
        let vh = vt.t().mapv(|x| x.conj());
        let new_left = gated.dot(&vh).mapv(|x| x.mul_real(1.0 / nrm));
        self.tensors[i] = new_left.into_shape_with_order((cl, 2, k)).unwrap();
        self.tensors[i + 1] = vt.into_shape_with_order((k, 2, cr)).unwrap();
        self.schmidt[i + 1] = sv.mapv(|x| x / nrm);
        self.charges[i + 1] = q;
        self.discarded_weight += discarded;
        Ok(discarded)
    }

    /// `Σ_b ⟨h_b⟩` from local two-site wavefunctions; needs canonical form.
    fn bond_energy_sum(&self, bonds: &[Array2<f64>]) -> f64 {
        let mut e = 0.0;
        for (i, h) in bonds.iter().enumerate() {
            let (bl, br) = (&self.tensors[i], &self.tensors[i + 1]);
            let (cl, cm, cr) = (bl.shape()[0], bl.shape()[2], br.shape()[2]);
            let left = bl.to_shape((cl * 2, cm)).unwrap();
            let right = br.to_shape((cm, 2 * cr)).unwrap();
            let theta = left.dot(&right).into_shape_with_order((cl, 2, 2, cr)).unwrap();
            let sl = &self.schmidt[i];
            for out in 0..4 {
                for inp in 0..4 {
                    let hv = h[[out, inp]];
                    if hv == 0.0 {
                        continue;
                    }
                    let a = theta.slice(s![.., out >> 1, out & 1, ..]);
                    let b = theta.slice(s![.., inp >> 1, inp & 1, ..]);
                    let mut acc = 0.0;
                    for x in 0..cl {
                        let w = sl[x] * sl[x];
                        let row: f64 = a
                            .row(x)
                            .iter()
                            .zip(b.row(x).iter())
                            .map(|(p, q)| (p.conj() * *q).re())
                            .sum();
                        acc += w * row;
                    }
                    e += hv * acc;
                }
            }
        }
        e
    }

    fn map<U: Amplitude>(&self, f: impl Fn(T) -> U) -> MpsState<U> {
        MpsState {
            tensors: self.tensors.iter().map(|t| t.mapv(&f)).collect(),
            schmidt: self.schmidt.clone(),
            charges: self.charges.clone(),
            rule: self.rule,
            max_bond: self.max_bond,
            canonical: self.canonical,
            discarded_weight: self.discarded_weight,
        }
    }
}

impl MpsState<f64> {
    pub fn to_complex(&self) -> MpsState<Complex64> {
        self.map(|x| Complex64::new(x, 0.0))
    }
}

impl MpsState<Complex64> {
    /// Dense `2^N` amplitudes, site `k` on bit `k`, for small chains.
    pub fn to_dense(&self) -> Result<Vec<Complex64>> {
        let n = self.n_sites();
        if n > 20 {
            return Err(Error::Unsupported("dense expansion limited to 20 sites".into()));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); 1 << n];
        for (s, slot) in out.iter_mut().enumerate() {
            let mut v = Array2::<Complex64>::ones((1, 1));
            for (k, b) in self.tensors.iter().enumerate() {
                v = v.dot(&b.slice(s![.., (s >> k) & 1, ..]));
            }
            *slot = v[[0, 0]];
        }
        Ok(out)
    }
}

struct Block<T> {
    rows: Vec<usize>,
    cols: Vec<usize>,
    charge: i64,
    u: Array2<T>,
    s: Array1<f64>,
    vt: Array2<T>,
}

struct BlockSvd<T> {
    n_rows: usize,
    n_cols: usize,
    blocks: Vec<Block<T>>,
}

fn block_svd<T: Amplitude>(
    m: &Array2<T>,
    row_q: &[i64],
    col_q: &[i64],
    rule: ChargeRule,
) -> Result<BlockSvd<T>> {
    let mut rows_by: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    let mut cols_by: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (r, &q) in row_q.iter().enumerate() {
        rows_by.entry(rule.wrap(q)).or_default().push(r);
    }
    for (c, &q) in col_q.iter().enumerate() {
        cols_by.entry(rule.wrap(q)).or_default().push(c);
    }
    let mut blocks = Vec::new();
    for (q, rows) in rows_by {
        let Some(cols) = cols_by.get(&q) else { continue };
        let sub = Array2::from_shape_fn((rows.len(), cols.len()), |(a, b)| m[[rows[a], cols[b]]]);
        let (u, sv, vt) = sub.svddc(JobSvd::Some)?;
        blocks.push(Block {
            rows,
            cols: cols.clone(),
            charge: q,
            u: u.expect("requested U"),
            s: sv,
            vt: vt.expect("requested Vt"),
        });
    }
    Ok(BlockSvd {
        n_rows: m.nrows(),
        n_cols: m.ncols(),
        blocks,
    })
}

impl<T: Amplitude> BlockSvd<T> {
    /// Selected `(block, index, value)` triples, largest first.
    fn keep(&self, max_bond: usize, cutoff: f64) -> Result<Vec<(usize, usize, f64)>> {
        let mut all: Vec<(usize, usize, f64)> = self
            .blocks
            .iter()
            .enumerate()
            .flat_map(|(bi, b)| b.s.iter().enumerate().map(move |(k, &s)| (bi, k, s)))
            .collect();
        if all.iter().any(|x| !x.2.is_finite()) {
            return Err(Error::Numerical("non-finite singular value".into()));
        }
        all.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        let smax = all.first().map(|x| x.2).unwrap_or(0.0);
        if smax <= 0.0 {
            return Err(Error::Numerical("all singular values vanished".into()));
        }
        let floor = cutoff * smax;
        Ok(all
            .into_iter()
            .take(max_bond)
            .filter(|x| x.2 > floor && x.2 > 0.0)
            .collect())
    }

    fn assemble(&self, kept: &[(usize, usize, f64)]) -> (Array2<T>, Array1<f64>, Array2<T>, Vec<i64>) {
        let k = kept.len();
        let mut u = Array2::<T>::zeros((self.n_rows, k));
        let mut vt = Array2::<T>::zeros((k, self.n_cols));
        let mut sv = Array1::zeros(k);
        let mut q = Vec::with_capacity(k);
        for (j, &(bi, idx, s)) in kept.iter().enumerate() {
            let b = &self.blocks[bi];
            for (a, &r) in b.rows.iter().enumerate() {
                u[[r, j]] = b.u[[a, idx]];
            }
            for (a, &c) in b.cols.iter().enumerate() {
                vt[[j, c]] = b.vt[[idx, a]];
            }
            sv[j] = s;
            q.push(b.charge);
        }
        (u, sv, vt, q)
    }
}

fn scale_rows<T: Amplitude>(m: &Array2<T>, f: &Array1<f64>) -> Array2<T> {
    let mut out = m.clone();
    for (mut row, &x) in out.rows_mut().into_iter().zip(f.iter()) {
        row.mapv_inplace(|v| v.mul_real(x));
    }
    out
}

fn scale_cols<T: Amplitude>(m: &Array2<T>, f: &Array1<f64>) -> Array2<T> {
    let mut out = m.clone();
    for (mut col, &x) in out.columns_mut().into_iter().zip(f.iter()) {
        col.mapv_inplace(|v| v.mul_real(x));
    }
    out
}

/// Two-site Hamiltonians `h_b` with `H = Σ_b h_b`, basis index `2 s_i + s_{i+1}`.
///
/// Uniform fields are split evenly between the two bonds of a site (edge
/// sites give their whole field to their only bond); the coupling field
/// `−ε σᶻ_site` sits entirely on one bond containing the coupled site.
pub fn bond_hamiltonians(
    bath: &BathSpec,
    coupling: &CouplingSpec,
    branch: QubitBranch,
    pinning: f64,
) -> Result<Vec<Array2<f64>>> {
    bath.validate()?;
    coupling.validate(bath)?;
    if bath.boundary != Boundary::Open {
        return Err(Error::Unsupported("TEBD handles open chains only".into()));
    }
    let n = bath.n_spins;
    let half_j = 0.5 * bath.j;
    let xx = [[0., 0., 0., 1.], [0., 0., 1., 0.], [0., 1., 0., 0.], [1., 0., 0., 0.]];
    let yy = [[0., 0., 0., -1.], [0., 0., 1., 0.], [0., 1., 0., 0.], [-1., 0., 0., 0.]];
    let zz = [1.0, -1.0, -1.0, 1.0];
    let zl = [1.0, 1.0, -1.0, -1.0];
    let zr = [1.0, -1.0, 1.0, -1.0];
    let field = -bath.j * bath.lambda - pinning;
    let share = |site: usize| -> f64 {
        if site == 0 || site == n - 1 {
            1.0
        } else {
            0.5
        }
    };
    let coupled = coupling.site_index();
    let coupled_bond = if coupled + 1 < n { coupled } else { coupled - 1 };
    let mut out = Vec::with_capacity(n - 1);
    for b in 0..n - 1 {
        let mut h = Array2::<f64>::zeros((4, 4));
        for r in 0..4 {
            for c in 0..4 {
                h[[r, c]] = -half_j * ((1.0 + bath.gamma) * xx[r][c] + (1.0 - bath.gamma) * yy[r][c]);
            }
            h[[r, r]] += -half_j * bath.delta * zz[r];
            h[[r, r]] += field * (share(b) * zl[r] + share(b + 1) * zr[r]);
        }
        if branch == QubitBranch::Excited && b == coupled_bond {
            let zsite = if coupled == b { zl } else { zr };
            for r in 0..4 {
                h[[r, r]] -= coupling.epsilon * zsite[r];
            }
        }
        out.push(h);
    }
    Ok(out)
}

fn enforce_charge<T: Amplitude>(gate: &mut Array2<T>, rule: ChargeRule) {
    let q = |s: usize| ((s >> 1) + (s & 1)) as i64;
    for r in 0..4 {
        for c in 0..4 {
            if rule.wrap(q(r)) != rule.wrap(q(c)) {
                gate[[r, c]] = T::zero();
            }
        }
    }
}

fn real_gates(bonds: &[Array2<f64>], dt: f64, rule: ChargeRule) -> Result<Vec<Array2<Complex64>>> {
    bonds
        .iter()
        .map(|h| {
            let hc = h.mapv(|x| Complex64::new(x, 0.0));
            let mut g = expm_hermitian(&hc, dt)?;
            enforce_charge(&mut g, rule);
            Ok(g)
        })
        .collect()
}

fn imaginary_gates(bonds: &[Array2<f64>], dtau: f64, rule: ChargeRule) -> Result<Vec<Array2<f64>>> {
    bonds
        .iter()
        .map(|h| {
            let mut g = expm_symmetric_imag(h, dtau)?;
            enforce_charge(&mut g, rule);
            Ok(g)
        })
        .collect()
}

/// Second-order sweeps with merged half steps:
/// `E(δ/2) [O(δ) E(δ)]^{k−1} O(δ) E(δ/2)`, returning the discarded weight.
fn trotter_segment<T: Amplitude>(
    mps: &mut MpsState<T>,
    half: &[Array2<T>],
    full: &[Array2<T>],
    steps: usize,
    cutoff: f64,
) -> Result<f64> {
    let n_bonds = full.len();
    let mut discarded = 0.0;
    for b in (0..n_bonds).step_by(2) {
        discarded += mps.apply_gate(b, &half[b], cutoff)?;
    }
    for step in 0..steps {
        for b in (1..n_bonds).step_by(2) {
            discarded += mps.apply_gate(b, &full[b], cutoff)?;
        }
        let last = step + 1 == steps;
        let gates = if last { half } else { full };
        for b in (0..n_bonds).step_by(2) {
            discarded += mps.apply_gate(b, &gates[b], cutoff)?;
        }
    }
    mps.canonical = false;
    Ok(discarded)
}

/// Pinning field used by TEBD for a bath, matching the exact engine's choice.
fn pinning_for(bath: &BathSpec) -> f64 {
    let odd_xxz = bath.family == Family::Xxz && bath.n_spins % 2 == 1;
    if bath.is_ferromagnetic_xxz() || odd_xxz {
        DEFAULT_PINNING
    } else {
        0.0
    }
}

/// Product state in the symmetry sector of the ground state.
fn initial_downs(bath: &BathSpec) -> Result<Vec<bool>> {
    let n = bath.n_spins;
    let spread = |count: usize| -> Vec<bool> {
        let mut d = vec![false; n];
        for k in 0..count {
            d[((2 * k + 1) * n) / (2 * count)] = true;
        }
        d
    };
    match bath.family {
        Family::Xxz => {
            if bath.delta >= 1.0 {
                Ok(vec![false; n])
            } else {
                Ok((0..n).map(|i| i % 2 == 1).collect())
            }
        }
        Family::Xy => {
            let form = build_quadratic_form(bath, None, QubitBranch::Ground)?;
            if bath.gamma == 0.0 {
                let (w, _) = eigh_real(&form.a_matrix)?;
                let filled = w.iter().filter(|&&x| x < 0.0).count();
                Ok(spread(n - filled))
            } else {
                let corr = ground_state_correlations_with(&form, ZeroModePolicy::Even)?;
                if corr.spin_parity()? > 0.0 {
                    Ok(vec![false; n])
                } else {
                    Ok(spread(1))
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroundStateResult {
    pub energy: f64,
    pub state: MpsState<f64>,
    pub pinning: f64,
    pub steps: usize,
}

pub fn ground_state_imaginary_time(bath: &BathSpec, params: &TebdParams) -> Result<GroundStateResult> {
    params.validate()?;
    let pinning = pinning_for(bath);
    let rule = ChargeRule::of_bath(bath);
    let bonds = bond_hamiltonians(bath, &CouplingSpec::new(0.0), QubitBranch::Ground, pinning)?;
    let mut mps = MpsState::<f64>::product(&initial_downs(bath)?, rule, params.m);
    let n = bath.n_spins as f64;
    let mut energy = mps.bond_energy_sum(&bonds);
    let mut total_steps = 0;
    let last_stage = params.imaginary_time_schedule.len() - 1;
    const CHECK_EVERY: usize = 10;
    for (si, stage) in params.imaginary_time_schedule.iter().enumerate() {
        let tol = stage.energy_tol.unwrap_or(1e-8 * n);
        let half = imaginary_gates(&bonds, 0.5 * stage.dtau, rule)?;
        let full = imaginary_gates(&bonds, stage.dtau, rule)?;
        let mut done = 0;
        let mut converged = false;
        while done < stage.max_steps {
            let chunk = CHECK_EVERY.min(stage.max_steps - done);
            trotter_segment(&mut mps, &half, &full, chunk, params.svd_cutoff)?;
            mps.canonicalize(params.svd_cutoff)?;
            done += chunk;
            let e = mps.bond_energy_sum(&bonds);
            let rate = (energy - e).abs() / (chunk as f64 * stage.dtau);
            energy = e;
            if rate <= tol && done >= stage.min_steps {
                converged = true;
                break;
            }
        }
        total_steps += done;
        log::debug!("imaginary stage dτ={} ran {done} steps, E={energy}", stage.dtau);
        if !converged && si == last_stage {
            return Err(Error::Convergence(format!(
                "imaginary-time energy not converged after {total_steps} steps"
            )));
        }
    }
    Ok(GroundStateResult {
        energy,
        state: mps,
        pinning,
        steps: total_steps,
    })
}

pub fn loschmidt_echo_tebd(
    bath: &BathSpec,
    coupling: &CouplingSpec,
    times: &[f64],
    params: &TebdParams,
) -> Result<EchoSeries> {
    let ground = ground_state_imaginary_time(bath, params)?;
    loschmidt_echo_from_ground(bath, coupling, times, params, &ground)
}

/// Echo from a precomputed ground state, e.g. to share it between runs.
pub fn loschmidt_echo_from_ground(
    bath: &BathSpec,
    coupling: &CouplingSpec,
    times: &[f64],
    params: &TebdParams,
    ground: &GroundStateResult,
) -> Result<EchoSeries> {
    params.validate()?;
    coupling.validate(bath)?;
    check_times(times)?;
    let mut steps_at = Vec::with_capacity(times.len());
    for &t in times {
        let k = (t / params.dt).round();
        if (k * params.dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "time {t} is not on the dt = {} grid",
                params.dt
            )));
        }
        steps_at.push(k as usize);
    }
    let rule = ChargeRule::of_bath(bath);
    let bonds = bond_hamiltonians(bath, coupling, QubitBranch::Excited, ground.pinning)?;
    let half = real_gates(&bonds, 0.5 * params.dt, rule)?;
    let full = real_gates(&bonds, params.dt, rule)?;
    let reference = ground.state.to_complex();
    let mut psi = reference.clone();
    psi.discarded_weight = 0.0;
    let mut values = Vec::with_capacity(times.len());
    let mut profile = Vec::with_capacity(times.len());
    let mut worst_step = 0.0f64;
    let mut flags = Vec::new();
    let mut now = 0usize;
    for (&t, &target) in times.iter().zip(&steps_at) {
        let steps = target - now;
        if steps > 0 {
            // Per-step weight is estimated as the segment total over its steps.
            let w = trotter_segment(&mut psi, &half, &full, steps, params.svd_cutoff)?;
            worst_step = worst_step.max(w / steps as f64);
            now = target;
        }
        let overlap = reference.overlap(&psi)?;
        let l = overlap.norm_sqr();
        if l > 1.0 + 1e-9 {
            return Err(Error::Numerical(format!("overlap {l} exceeds one at t = {t}")));
        }
        values.push(l.min(1.0));
        profile.push(psi.discarded_weight);
        if worst_step > params.max_step_discarded_weight {
            flags.push(format!(
                "stopped at t = {t}: discarded weight per step {worst_step:e} exceeds {:e}",
                params.max_step_discarded_weight
            ));
            break;
        }
    }
    let mut meta = EchoMeta::new(bath, coupling, Method::Tebd);
    meta.discarded_weight = Some(profile);
    meta.max_step_discarded_weight = Some(worst_step);
    meta.flags = flags;
    if ground.pinning != 0.0 {
        meta.flags.push(format!("pinning field {:e} applied", ground.pinning));
    }
    let kept = values.len();
    EchoSeries::new(times[..kept].to_vec(), values, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{build_dense_hamiltonian, ground_state, ExactOptions};

    #[test]
    fn bond_hamiltonians_sum_to_full_hamiltonian() {
        let n = 5;
        for bath in [BathSpec::xy(n, 0.4, 0.7).unwrap(), BathSpec::xxz(n, -0.6).unwrap()] {
            for site in [1, 3, 5] {
                let c = CouplingSpec::new(0.3).at_site(site);
                let dense = build_dense_hamiltonian(&bath, &c, QubitBranch::Excited).unwrap();
                let bonds = bond_hamiltonians(&bath, &c, QubitBranch::Excited, 0.0).unwrap();
                let mut sum = Array2::<f64>::zeros((1 << n, 1 << n));
                for (b, h) in bonds.iter().enumerate() {
                    for s in 0..1usize << n {
                        let local = 2 * ((s >> b) & 1) + ((s >> (b + 1)) & 1);
                        for out in 0..4 {
                            let v = h[[out, local]];
                            if v == 0.0 {
                                continue;
                            }
                            let t = (s & !(3 << b)) | ((out >> 1) << b) | ((out & 1) << (b + 1));
                            sum[[t, s]] += v;
                        }
                    }
                }
                let err = (&sum - &dense).iter().fold(0.0f64, |m, x| m.max(x.abs()));
                assert!(err < 1e-13, "site {site}: {err}");
            }
        }
    }

    #[test]
    fn ferromagnet_stays_product_state() {
        let bath = BathSpec::xxz(10, 2.0).unwrap();
        let gs = ground_state_imaginary_time(&bath, &TebdParams::default()).unwrap();
        assert_eq!(gs.state.max_bond_dim(), 1);
        assert_eq!(gs.state.tensors[3][[0, 0, 0]].abs(), 1.0);
    }

    #[test]
    fn small_chain_ground_energy_matches_oracle() {
        let bath = BathSpec::xxz(8, 0.5).unwrap();
        let gs = ground_state_imaginary_time(&bath, &TebdParams::default()).unwrap();
        let ed = ground_state(&bath, &CouplingSpec::new(0.0), QubitBranch::Ground, &ExactOptions::default())
            .unwrap();
        assert!((gs.energy - ed.energy).abs() < 1e-6, "{} vs {}", gs.energy, ed.energy);
        let norm = gs.state.norm().unwrap();
        assert!((norm - 1.0).abs() < 1e-10);
    }

    #[test]
    fn echo_starts_at_one_and_rejects_off_grid_times() {
        let bath = BathSpec::xxz(6, 0.5).unwrap();
        let c = CouplingSpec::new(0.1);
        let p = TebdParams::default();
        let e = loschmidt_echo_tebd(&bath, &c, &[0.0, 0.5], &p).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-12);
        assert!(loschmidt_echo_tebd(&bath, &c, &[0.0, 0.005], &p).is_err());
    }
}
