use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymmetricEigen};
use crate::scalar::Scalar;

/// Unbiased (divisor `T − 1`) sample covariance of the rows of `history`,
/// symmetrized and PSD-repaired. Accumulated in one Welford pass.
pub fn estimate_covariance<T: Scalar>(history: &Matrix<T>) -> Result<Matrix<T>> {
    let (t, w) = (history.rows(), history.cols());
    if t < 2 {
        return Err(Error::InvalidArgument(format!(
            "covariance estimation needs at least 2 rows, got {t}"
        )));
    }
    let mut mean = vec![T::zero(); w];
    let mut comoment = Matrix::<T>::zeros(w, w);
    let mut delta = vec![T::zero(); w];
    for (k, r) in (0..t).enumerate() {
        let row = history.row(r);
        let count = T::lit((k + 1) as f64);
        for j in 0..w {
            delta[j] = row[j] - mean[j];
            mean[j] += delta[j] / count;
        }
        // C += δ_before · δ_afterᵀ
        for i in 0..w {
            let after_i = row[i] - mean[i];
            for j in 0..w {
                comoment[(i, j)] += after_i * delta[j];
            }
        }
    }
    let denom = T::lit((t - 1) as f64);
    let cov = Matrix::from_fn(w, w, |i, j| comoment[(i, j)] / denom).symmetrized();
    for j in 0..w {
        if cov[(j, j)] == T::zero() {
            log::warn!("farm column {j} is constant; its variance is zero");
        }
    }
    Ok(psd_repair(&cov))
}

/// Clamps negative eigenvalues to zero. A matrix that is already PSD comes back
/// symmetrized but otherwise untouched.
pub fn psd_repair<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    let sym = m.symmetrized();
    let eig = SymmetricEigen::new(&sym);
    if eig.min_value() >= T::zero() {
        return sym;
    }
    eig.reassemble(|l| l.max(T::zero()))
}
