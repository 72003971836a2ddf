//! Small dense helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

/// Transposed cofactor matrix of a square matrix, from minor determinants.
/// Defined for singular input.
pub fn adjugate_dense(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "adjugate needs a square matrix");
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if n == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    if n == 2 {
        return DMatrix::from_row_slice(2, 2, &[m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]]);
    }
    let mut adj = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let minor = m.clone().remove_row(i).remove_column(j);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            adj[(j, i)] = sign * minor.determinant();
        }
    }
    adj
}

/// Minimum-norm Gauss–Newton correction `-Jᵀ (J Jᵀ + μ I)⁻¹ r` for an
/// underdetermined system. Returns `None` when the normal matrix is singular.
pub fn min_norm_step(jac: &DMatrix<f64>, residual: &DVector<f64>, damping: f64) -> Option<DVector<f64>> {
    let mut normal = jac * jac.transpose();
    for i in 0..normal.nrows() {
        normal[(i, i)] += damping;
    }
    let y = normal.lu().solve(residual)?;
    if y.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(-(jac.transpose() * y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjugate_of_small_matrices() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 6.0]);
        let adj = adjugate_dense(&m);
        assert_eq!(adj, DMatrix::from_row_slice(3, 3, &[18.0, 0.0, 0.0, 0.0, 12.0, 0.0, 0.0, 0.0, 6.0]));
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let prod = &s * adjugate_dense(&s);
        assert!(prod.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn min_norm_step_solves_linear_system() {
        let j = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let r = DVector::from_vec(vec![5.0]);
        let dx = min_norm_step(&j, &r, 0.0).unwrap();
        assert!((dx[0] + 0.6).abs() < 1e-15 && (dx[1] + 0.8).abs() < 1e-15);
    }
}
