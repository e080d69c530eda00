//! Computational basis, symmetry sectors and real CSR Hamiltonians.
//!
//! Basis state `s` has bit `k` equal to the state of site `k`: `0` is spin up.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::models::{BathSpec, Pauli, PauliTerm};

pub const MAX_SPARSE_SPINS: usize = 20;
pub const MAX_DENSE_SPINS: usize = 14;

/// Quantity conserved by every term of a Hamiltonian.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Symmetry {
    /// No block structure used.
    None,
    /// Number of down spins.
    Magnetization,
    /// Number of down spins mod 2.
    Parity,
}

impl Symmetry {
    /// Largest symmetry respected by the bath, both branches and a uniform pinning field.
    pub fn of_bath(bath: &BathSpec) -> Self {
        if bath.gamma == 0.0 {
            Symmetry::Magnetization
        } else {
            Symmetry::Parity
        }
    }

    pub fn label(&self, state: usize) -> usize {
        match self {
            Symmetry::None => 0,
            Symmetry::Magnetization => state.count_ones() as usize,
            Symmetry::Parity => (state.count_ones() % 2) as usize,
        }
    }

    pub fn labels(&self, n_spins: usize) -> Vec<usize> {
        match self {
            Symmetry::None => vec![0],
            Symmetry::Magnetization => (0..=n_spins).collect(),
            Symmetry::Parity => vec![0, 1],
        }
    }
}

#[derive(Clone, Debug)]
pub struct Sector {
    pub n_spins: usize,
    pub symmetry: Symmetry,
    pub label: usize,
    pub states: Vec<u32>,
    index: Vec<u32>,
}

impl Sector {
    pub fn new(n_spins: usize, symmetry: Symmetry, label: usize) -> Result<Self> {
        if n_spins == 0 || n_spins > MAX_SPARSE_SPINS {
            return Err(Error::InvalidParameter(format!(
                "exact engine supports 1..={MAX_SPARSE_SPINS} spins, got {n_spins}"
            )));
        }
        let full = 1usize << n_spins;
        let mut index = vec![u32::MAX; full];
        let mut states = Vec::new();
        for s in 0..full {
            if symmetry.label(s) == label {
                index[s] = states.len() as u32;
                states.push(s as u32);
            }
        }
        Ok(Self {
            n_spins,
            symmetry,
            label,
            states,
            index,
        })
    }

    pub fn full(n_spins: usize) -> Result<Self> {
        Self::new(n_spins, Symmetry::None, 0)
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn position(&self, state: usize) -> Option<usize> {
        match self.index[state] {
            u32::MAX => None,
            i => Some(i as usize),
        }
    }

    /// Embeds a sector vector into the full `2^N` space.
    pub fn embed<T: Copy + Default>(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); 1usize << self.n_spins];
        for (&s, &x) in self.states.iter().zip(v) {
            out[s as usize] = x;
        }
        out
    }
}

/// Image of a basis state under a Pauli string, `P|s⟩ = amp |s'⟩`.
pub fn apply_pauli_string(ops: &[(usize, Pauli)], state: usize) -> (usize, f64) {
    let mut s = state;
    let mut amp = 1.0;
    let mut ipow = 0u8;
    for &(site, op) in ops {
        let bit = (s >> site) & 1;
        match op {
            Pauli::X => s ^= 1 << site,
            Pauli::Y => {
                s ^= 1 << site;
                ipow += if bit == 0 { 1 } else { 3 };
            }
            Pauli::Z => {
                if bit == 1 {
                    amp = -amp;
                }
            }
        }
    }
    match ipow % 4 {
        0 => (s, amp),
        2 => (s, -amp),
        _ => panic!("Pauli string with an odd number of Y factors is not real"),
    }
}

/// Real symmetric matrix in compressed sparse row form.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub dim: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub data: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_terms(terms: &[PauliTerm], sector: &Sector) -> Result<Self> {
        let dim = sector.dim();
        let mut indptr = Vec::with_capacity(dim + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for &s in &sector.states {
            row.clear();
            for term in terms.iter().filter(|t| t.coeff != 0.0) {
                let (target, amp) = apply_pauli_string(&term.ops, s as usize);
                row.push((target, term.coeff * amp));
            }
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let target = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == target {
                    v += row[k].1;
                    k += 1;
                }
                if v == 0.0 {
                    continue;
                }
                let col = sector.position(target).ok_or_else(|| {
                    Error::Numerical("Hamiltonian does not conserve the sector quantum number".into())
                })?;
                indices.push(col as u32);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            dim,
            indptr,
            indices,
            data,
        })
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()]
            .iter()
            .zip(&self.data[range])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn matvec_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, v) in self.row(i) {
                acc += x[c] * v;
            }
            *yi = acc;
        }
    }

    pub fn to_dense(&self) -> ndarray::Array2<f64> {
        let mut m = ndarray::Array2::zeros((self.dim, self.dim));
        for i in 0..self.dim {
            for (c, v) in self.row(i) {
                m[[i, c]] += v;
            }
        }
        m
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}
