//! Lanczos eigensolver and Krylov time propagator for [`CsrMatrix`].

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::eigh_real;
use crate::sparse::CsrMatrix;

/// Stored Krylov vectors are capped by total memory, roughly this many `f64`s.
const BASIS_BUDGET: usize = 40_000_000;
const MAX_RESTARTS: usize = 40;

#[derive(Clone, Debug)]
pub struct LowestPairs {
    pub energies: Vec<f64>,
    pub ground: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Two lowest eigenvalues (fewer if `dim < 2`) and the ground vector of a
/// real symmetric matrix, by restarted Lanczos with full reorthogonalization.
///
/// The start vector is drawn from a ChaCha stream seeded with `seed`.
pub fn lanczos_lowest(h: &CsrMatrix, seed: u64, tol: f64) -> Result<LowestPairs> {
    let dim = h.dim;
    if dim == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    if dim <= 2 {
        let (w, v) = eigh_real(&h.to_dense())?;
        return Ok(LowestPairs {
            energies: w.to_vec(),
            ground: v.column(0).to_vec(),
        });
    }
    let scale = h.norm_bound().max(1e-300);
    let cap = (BASIS_BUDGET / dim).clamp(24, 300).min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut hv = vec![0.0; dim];

    for _ in 0..MAX_RESTARTS {
        let nrm = norm(&start);
        start.iter_mut().for_each(|x| *x /= nrm);
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        loop {
            let j = basis.len() - 1;
            h.matvec(&basis[j], &mut hv);
            let a = dot(&basis[j], &hv);
            alpha.push(a);
            let mut w = hv.clone();
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = norm(&w);
            let k = alpha.len();
            let exhausted = b < 1e-13 * scale || k == dim;
            if exhausted || k == cap || k % 8 == 0 {
                let t = tridiagonal(&alpha, &beta);
                let (theta, s) = eigh_real(&t)?;
                let wanted = k.min(2);
                let converged = (0..wanted).all(|i| b * s[[k - 1, i]].abs() <= tol * scale);
                if exhausted || converged || k == cap {
                    let combine = |col: usize| -> Vec<f64> {
                        let mut out = vec![0.0; dim];
                        for (i, v) in basis.iter().enumerate() {
                            let c = s[[i, col]];
                            out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
                        }
                        out
                    };
                    let ground = combine(0);
                    if exhausted || converged {
                        let mut energies = vec![theta[0]];
                        if k >= 2 {
                            energies.push(theta[1]);
                        }
                        return Ok(LowestPairs { energies, ground });
                    }
                    let second = combine(1);
                    start = ground.iter().zip(&second).map(|(a, b)| a + 0.5 * b).collect();
                    break;
                }
            }
            beta.push(b);
            basis.push(w.into_iter().map(|x| x / b).collect());
        }
    }
    Err(Error::Convergence(format!(
        "Lanczos did not converge after {MAX_RESTARTS} restarts (dim {dim})"
    )))
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> Array2<f64> {
    let k = alpha.len();
    let mut t = Array2::zeros((k, k));
    for i in 0..k {
        t[[i, i]] = alpha[i];
        if i + 1 < k {
            t[[i, i + 1]] = beta[i];
            t[[i + 1, i]] = beta[i];
        }
    }
    t
}

/// Krylov approximation of `exp(-i H t)` applied to a vector, with step-size
/// control on the standard a-posteriori error estimate.
#[derive(Clone, Debug)]
pub struct KrylovPropagator {
    pub max_dim: usize,
    /// Allowed 2-norm error per accepted step.
    pub tol: f64,
}

impl Default for KrylovPropagator {
    fn default() -> Self {
        Self {
            max_dim: 30,
            tol: 1e-10,
        }
    }
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn cnorm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

impl KrylovPropagator {
    /// Advances `psi` by `t` in place.
    pub fn evolve(&self, h: &CsrMatrix, psi: &mut [Complex64], t: f64) -> Result<()> {
        let mut remaining = t;
        let mut guard = 0usize;
        while remaining > 0.0 {
            let step = self.step(h, psi, remaining)?;
            remaining -= step;
            if remaining <= 1e-15 * t.abs().max(1.0) {
                remaining = 0.0;
            }
            guard += 1;
            if guard > 1_000_000 {
                return Err(Error::Convergence("Krylov step size collapsed".into()));
            }
        }
        Ok(())
    }

    /// Takes one step of at most `dt`, returning the step actually taken.
    fn step(&self, h: &CsrMatrix, psi: &mut [Complex64], dt: f64) -> Result<f64> {
        let dim = psi.len();
        let nrm = cnorm(psi);
        if nrm == 0.0 {
            return Ok(dt);
        }
        let scale = h.norm_bound().max(1e-300);
        let mut basis: Vec<Vec<Complex64>> = vec![psi.iter().map(|x| x / nrm).collect()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![Complex64::new(0.0, 0.0); dim];
        let last_beta;
        loop {
            let j = basis.len() - 1;
            h.matvec_complex(&basis[j], &mut w);
            alpha.push(cdot(&basis[j], &w).re);
            for _ in 0..2 {
                for v in &basis {
                    let c = cdot(v, &w);
                    w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = cnorm(&w);
            if b < 1e-14 * scale || basis.len() == self.max_dim.min(dim) {
                last_beta = if b < 1e-14 * scale { 0.0 } else { b };
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let (theta, s) = eigh_real(&tridiagonal(&alpha, &beta))?;
        let k = alpha.len();
        let coefficients = |tau: f64| -> Vec<Complex64> {
            (0..k)
                .map(|i| {
                    (0..k)
                        .map(|m| Complex64::from_polar(s[[0, m]] * s[[i, m]], -theta[m] * tau))
                        .sum()
                })
                .collect()
        };
        let mut tau = dt;
        let mut c = coefficients(tau);
        let mut halvings = 0;
        while last_beta * c[k - 1].norm() > self.tol {
            tau *= 0.5;
            halvings += 1;
            if halvings > 60 {
                return Err(Error::Convergence("Krylov error estimate never met".into()));
            }
            c = coefficients(tau);
        }
        psi.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        for (ci, v) in c.iter().zip(&basis) {
            let ci = ci * nrm;
            psi.iter_mut().zip(v).for_each(|(p, x)| *p += ci * x);
        }
        Ok(tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{pinning_field_terms, BathSpec, CouplingSpec, QubitBranch};
    use crate::sparse::Sector;

    fn chain(n: usize) -> CsrMatrix {
        let bath = BathSpec::ising(n, 0.7).unwrap();
        let terms =
            crate::models::spin_hamiltonian_terms(&bath, &CouplingSpec::new(0.0), QubitBranch::Ground)
                .unwrap();
        CsrMatrix::from_terms(&terms, &Sector::full(n).unwrap()).unwrap()
    }

    #[test]
    fn lanczos_matches_dense() {
        let h = chain(8);
        let (w, _) = eigh_real(&h.to_dense()).unwrap();
        let got = lanczos_lowest(&h, 7, 1e-13).unwrap();
        assert!((got.energies[0] - w[0]).abs() < 1e-10);
        assert!((got.energies[1] - w[1]).abs() < 1e-8);
    }

    #[test]
    fn krylov_preserves_norm_and_matches_dense() {
        let h = chain(6);
        let dense = h.to_dense();
        let (w, v) = eigh_real(&dense).unwrap();
        let dim = h.dim;
        let mut psi = vec![Complex64::new(0.0, 0.0); dim];
        psi[0] = Complex64::new(1.0, 0.0);
        KrylovPropagator::default().evolve(&h, &mut psi, 2.3).unwrap();
        let norm: f64 = psi.iter().map(|x| x.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-10);
        for i in 0..dim {
            let exact: Complex64 = (0..dim)
                .map(|k| Complex64::from_polar(v[[i, k]] * v[[0, k]], -w[k] * 2.3))
                .sum();
            assert!((exact - psi[i]).norm() < 1e-9);
        }
    }

    #[test]
    fn pinning_only_matrix_is_diagonal() {
        let h = CsrMatrix::from_terms(&pinning_field_terms(3, 0.5), &Sector::full(3).unwrap())
            .unwrap();
        assert_eq!(h.nnz(), 8);
    }
}
