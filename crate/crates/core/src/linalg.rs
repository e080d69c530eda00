//! Small dense helpers on top of LAPACK.

use ndarray::{s, Array1, Array2, ArrayView2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
pub fn eigh_real(m: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let (w, v) = m.eigh(UPLO::Lower)?;
    Ok((w, v))
}

/// Eigen-decomposition of a complex Hermitian matrix, eigenvalues ascending.
pub fn eigh_complex(m: &Array2<Complex64>) -> Result<(Array1<f64>, Array2<Complex64>)> {
    let (w, v) = m.eigh(UPLO::Lower)?;
    Ok((w, v))
}

/// `exp(-i H t)` for a Hermitian `H`.
pub fn expm_hermitian(h: &Array2<Complex64>, t: f64) -> Result<Array2<Complex64>> {
    let (w, v) = eigh_complex(h)?;
    let phases = w.mapv(|e| Complex64::from_polar(1.0, -e * t));
    let scaled = &v * &phases.insert_axis(ndarray::Axis(0));
    Ok(scaled.dot(&v.t().mapv(|z| z.conj())))
}

/// `exp(-τ (H - E_min))` for a real symmetric `H`; the shift keeps entries bounded.
pub fn expm_symmetric_imag(h: &Array2<f64>, tau: f64) -> Result<Array2<f64>> {
    let (w, v) = eigh_real(h)?;
    let emin = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let factors = w.mapv(|e| (-(e - emin) * tau).exp());
    let scaled = &v * &factors.insert_axis(ndarray::Axis(0));
    Ok(scaled.dot(&v.t()))
}

/// Relative reconstruction error of a LAPACK eigen-decomposition of a fixed
/// 256 × 256 symmetric matrix. Broken BLAS kernels show up as `O(1)` values.
pub fn lapack_self_check() -> Result<f64> {
    let n = 256;
    let a = Array2::from_shape_fn((n, n), |(i, j)| {
        let (p, q) = (i.min(j) as f64, i.max(j) as f64);
        ((p * 0.37 + q * 0.11).sin() + 1.0 / (1.0 + (q - p))).clamp(-2.0, 2.0)
    });
    let (w, v) = eigh_real(&a)?;
    let scaled = &v * &w.insert_axis(ndarray::Axis(0));
    let back = scaled.dot(&v.t());
    let err = (&back - &a).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(err / max_abs(&a))
}

/// Largest absolute entry.
pub fn max_abs<S>(m: &ndarray::ArrayBase<S, ndarray::Ix2>) -> f64
where
    S: ndarray::Data,
    S::Elem: Copy + Into<Complex64>,
{
    m.iter().map(|&x| x.into().norm()).fold(0.0, f64::max)
}

/// Spectral norm via the largest singular value.
pub fn spectral_norm(m: &Array2<Complex64>) -> Result<f64> {
    use ndarray_linalg::SVD;
    let (_, s, _) = m.svd(false, false)?;
    Ok(s.iter().cloned().fold(0.0, f64::max))
}

/// Sign of the Pfaffian of a real antisymmetric matrix (Parlett-Reid with
/// partial pivoting), together with `ln |Pf|`.
///
/// Returns `(0.0, -inf)` for a singular matrix.
pub fn pfaffian_sign_ln(a: ArrayView2<f64>) -> Result<(f64, f64)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidParameter("pfaffian of non-square matrix".into()));
    }
    if n % 2 == 1 {
        return Ok((0.0, f64::NEG_INFINITY));
    }
    let mut a = a.to_owned();
    let mut sign = 1.0;
    let mut ln = 0.0;
    for k in (0..n.saturating_sub(1)).step_by(2) {
        let col = a.slice(s![k + 1.., k]);
        let (offset, _) = col
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, v)| if v.abs() > best.1 { (i, v.abs()) } else { best });
        let kp = k + 1 + offset;
        if kp != k + 1 {
            swap_rows_cols(&mut a, k + 1, kp);
            sign = -sign;
        }
        let pivot = a[[k, k + 1]];
        if pivot == 0.0 {
            return Ok((0.0, f64::NEG_INFINITY));
        }
        sign *= pivot.signum();
        ln += pivot.abs().ln();
        if k + 2 < n {
            let tau = a.slice(s![k, k + 2..]).mapv(|x| x / pivot);
            let col = a.slice(s![k + 2.., k + 1]).to_owned();
            let m = n - k - 2;
            let mut block = a.slice_mut(s![k + 2.., k + 2..]);
            for i in 0..m {
                for j in 0..m {
                    block[[i, j]] += tau[i] * col[j] - col[i] * tau[j];
                }
            }
        }
    }
    Ok((sign, ln))
}

fn swap_rows_cols(a: &mut Array2<f64>, i: usize, j: usize) {
    let n = a.nrows();
    for c in 0..n {
        a.swap([i, c], [j, c]);
    }
    for r in 0..n {
        a.swap([r, i], [r, j]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lapack_reconstructs() {
        assert!(lapack_self_check().unwrap() < 1e-10);
    }
    use ndarray::array;

    #[test]
    fn pfaffian_of_2x2_and_4x4() {
        let a = array![[0.0, 2.5], [-2.5, 0.0]];
        let (s, l) = pfaffian_sign_ln(a.view()).unwrap();
        assert_eq!(s, 1.0);
        assert!((l - 2.5f64.ln()).abs() < 1e-14);

        // Pf = a01 a23 - a02 a13 + a03 a12
        let (a01, a02, a03, a12, a13, a23) = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0);
        let m = array![
            [0.0, a01, a02, a03],
            [-a01, 0.0, a12, a13],
            [-a02, -a12, 0.0, a23],
            [-a03, -a13, -a23, 0.0]
        ];
        let expected: f64 = a01 * a23 - a02 * a13 + a03 * a12;
        let (s, l) = pfaffian_sign_ln(m.view()).unwrap();
        assert!((s * l.exp() - expected).abs() < 1e-12);
    }

    #[test]
    fn pfaffian_squares_to_determinant() {
        use ndarray_linalg::Determinant;
        let n = 8;
        let mut m = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in i + 1..n {
                let v = ((i * 7 + j * 13) % 11) as f64 - 5.0;
                m[[i, j]] = v;
                m[[j, i]] = -v;
            }
        }
        let (_, l) = pfaffian_sign_ln(m.view()).unwrap();
        let det = m.det().unwrap();
        assert!(((2.0 * l).exp() - det).abs() < 1e-8 * det.abs());
    }

    #[test]
    fn expm_of_pauli_x() {
        let x = array![
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
        ];
        let u = expm_hermitian(&x, 0.3).unwrap();
        assert!((u[[0, 0]] - Complex64::new(0.3f64.cos(), 0.0)).norm() < 1e-14);
        assert!((u[[0, 1]] - Complex64::new(0.0, -0.3f64.sin())).norm() < 1e-14);
    }
}
