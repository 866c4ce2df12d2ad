use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Thin SVD `m = U diag(s) Vᵀ` with a fixed sign convention: the
/// largest-magnitude entry of every left singular vector is positive (ties
/// go to the lowest index), and the matching right vector is flipped along.
pub(crate) struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

pub(crate) fn svd(m: &DMatrix<f64>) -> Result<Svd> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("SVD input contains non-finite values".into()));
    }
    let decomposition = m.clone().svd(true, true);
    let (Some(mut u), Some(mut v_t)) = (decomposition.u, decomposition.v_t) else {
        return Err(Error::Numeric("SVD did not converge".into()));
    };
    for j in 0..u.ncols() {
        let mut pivot = 0;
        for i in 1..u.nrows() {
            if u[(i, j)].abs() > u[(pivot, j)].abs() {
                pivot = i;
            }
        }
        if u[(pivot, j)] < 0.0 {
            u.column_mut(j).neg_mut();
            v_t.row_mut(j).neg_mut();
        }
    }
    Ok(Svd {
        u,
        singular_values: decomposition.singular_values.iter().copied().collect(),
        v_t,
    })
}

/// Cut-off under which a singular value counts as zero.
pub(crate) fn rank_tolerance(singular_values: &[f64], nrows: usize, ncols: usize) -> f64 {
    let largest = singular_values.iter().copied().fold(0.0, f64::max);
    largest * nrows.max(ncols) as f64 * f64::EPSILON
}
