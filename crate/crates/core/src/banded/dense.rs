use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};

use crate::{flops, Error, Result};

fn check_square(m: &Mat<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(())
}

/// General inverse through a partially pivoted LU. Counted as `n³`
/// multiplications.
pub fn dense_inverse(m: &Mat<f64>) -> Result<Mat<f64>> {
    check_square(m)?;
    let n = m.nrows();
    let lu = m.partial_piv_lu();
    let tol = 1e-14 * m.norm_max() * n as f64;
    let u = lu.U();
    for k in 0..n {
        let pivot = u[(k, k)];
        if !(pivot.abs() > tol) {
            return Err(Error::Singular { index: k, pivot });
        }
    }
    flops::add((n as u64).pow(3));
    Ok(lu.inverse())
}

/// Inverse of a symmetric positive definite matrix through Cholesky.
/// Counted as `n³` multiplications, like [`dense_inverse`].
pub fn spd_inverse(m: &Mat<f64>) -> Result<Mat<f64>> {
    check_square(m)?;
    let n = m.nrows();
    let llt = m.llt(Side::Lower).map_err(|_| Error::Singular { index: 0, pivot: f64::NAN })?;
    flops::add((n as u64).pow(3));
    Ok(llt.inverse())
}
