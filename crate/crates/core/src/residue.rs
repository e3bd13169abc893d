//! Residues at infinity of resolvent expressions.
//!
//! With the convention `res z^{-n} = delta_{n1}` and the expansion
//! `(zI - A)^{-1} = sum_k A^k z^{-k-1}`, every residue reduces to a finite sum of
//! matrix products. Nothing here integrates numerically.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::powers;
use crate::scalar::Real;

/// `res z^m (zI - A)^{-1} = A^m`.
pub fn resolvent_residue_single<T: Real>(m: usize, a: &DMatrix<T>) -> DMatrix<T> {
    assert!(a.is_square(), "resolvent of a non-square matrix");
    powers(a, m).pop().expect("powers always contains the identity")
}

/// Matrix kernel `sum_{j + k = m - 1} A^j Y B^k`; zero for `m = 0`.
///
/// `res z^m (zI - A)^{-1} Y (zI - B)^{-1}` equals this kernel.
pub fn resolvent_pair_kernel<T: Real>(m: usize, a: &DMatrix<T>, y: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    if m == 0 {
        return out;
    }
    let pa = powers(a, m - 1);
    let pb = powers(b, m - 1);
    for j in 0..m {
        out += &pa[j] * y * &pb[m - 1 - j];
    }
    out
}

/// `res z^m tr(X (zI - A)^{-1} Y (zI - B)^{-1}) = sum_{j+k=m-1} tr(X A^j Y B^k)`.
pub fn resolvent_residue_pair<T: Real>(
    m: usize,
    x: &DMatrix<T>,
    a: &DMatrix<T>,
    y: &DMatrix<T>,
    b: &DMatrix<T>,
) -> Result<T> {
    let n = a.nrows();
    let all_square = [x, a, y, b].iter().all(|mat| mat.shape() == (n, n));
    if !all_square {
        return Err(Error::Dimension(format!(
            "residue pair needs equal square matrices, got X {:?} A {:?} Y {:?} B {:?}",
            x.shape(),
            a.shape(),
            y.shape(),
            b.shape()
        )));
    }
    Ok((x * resolvent_pair_kernel(m, a, y, b)).trace())
}
