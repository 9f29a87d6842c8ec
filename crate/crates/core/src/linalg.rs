//! Dense factorizations used by the Gaussian field sampler.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;
use crate::{Error, Result};

/// Relative pivot tolerance of [`cholesky_psd`], as a fraction of the trace.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Lower-triangular factor `L` (row-major `n × n`) with `L Lᵀ = A` for a
/// symmetric positive semidefinite `A`.
///
/// Pivots within `PSD_TOLERANCE·trace` of zero are treated as exact zeros and
/// their column is left empty, so singular matrices (a kernel with a null
/// direction, such as the fbm kernel at the origin) factor cleanly. A pivot
/// below `-PSD_TOLERANCE·trace` is reported against `label`.
pub fn cholesky_psd(a: &[f64], n: usize, label: &str) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n, "matrix shape");
    let trace: f64 = (0..n).map(|i| a[i * n + i].abs()).sum();
    let tol = PSD_TOLERANCE * trace.max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d < -tol || !d.is_finite() {
            return Err(Error::NotPositiveSemidefinite {
                kernel: String::from(label),
                row: j,
                pivot: d,
            });
        }
        if d <= tol {
            continue;
        }
        let ljj = sqrt(d);
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    Ok(l)
}

/// `L z` for a row-major lower-triangular `L`.
pub fn lower_mul(l: &[f64], n: usize, z: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|i| l[i * n..i * n + i + 1].iter().zip(z).map(|(a, b)| a * b).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(l: &[f64], n: usize) -> Vec<f64> {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| l[i * n + k] * l[j * n + k]).sum();
            }
        }
        a
    }

    #[test]
    fn factors_definite_and_singular() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let l = cholesky_psd(&a, 2, "t").unwrap();
        for (x, y) in reconstruct(&l, 2).iter().zip(&a) {
            assert!((x - y).abs() < 1e-14);
        }
        // Rank one with a zero row in the middle.
        let a = [1.0, 0.0, 2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 4.0];
        let l = cholesky_psd(&a, 3, "t").unwrap();
        for (x, y) in reconstruct(&l, 3).iter().zip(&a) {
            assert!((x - y).abs() < 1e-14);
        }
        assert_eq!(lower_mul(&l, 3, &[1.0, 5.0, 7.0]), [1.0, 0.0, 2.0]);
    }

    #[test]
    fn rejects_indefinite() {
        let a = [1.0, 2.0, 2.0, 1.0];
        match cholesky_psd(&a, 2, "bad") {
            Err(Error::NotPositiveSemidefinite { kernel, row, .. }) => {
                assert_eq!(kernel, "bad");
                assert_eq!(row, 1);
            }
            other => panic!("{other:?}"),
        }
    }
}
