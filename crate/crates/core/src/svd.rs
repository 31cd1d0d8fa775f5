//! Singular values by one-sided Jacobi rotations.
//!
//! The blocks this crate conditions are small dense matrices (at most a few
//! hundred rows), where one-sided Jacobi is unconditionally robust: columns
//! are rotated in place until all pairwise Gram products vanish, and the
//! singular values are the final column norms. Rank decisions use a relative
//! threshold of `1e-14 * sigma_max`.

use ndarray::Array2;

use crate::error::{CoreError, Result};

/// Relative rank threshold: smaller singular values count as zero.
pub const RANK_RTOL: f64 = 1e-14;

/// All singular values of `a`, sorted descending.
pub fn singular_values(a: &Array2<f64>) -> Vec<f64> {
    // work on the transposed matrix when it has fewer columns
    let mut m = if a.nrows() >= a.ncols() { a.clone() } else { a.t().to_owned() };
    let (rows, cols) = m.dim();
    if cols == 0 || rows == 0 {
        return Vec::new();
    }
    let eps = 1e-15;
    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..rows {
                    let (x, y) = (m[[i, p]], m[[i, q]]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (x, y) = (m[[i, p]], m[[i, q]]);
                    m[[i, p]] = c * x - s * y;
                    m[[i, q]] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|i| m[[i, j]] * m[[i, j]]).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Two-norm condition number `sigma_max / sigma_min`. Returns
/// `f64::INFINITY` when the matrix is numerically rank deficient, and an
/// error for the all-zero matrix.
pub fn condition_number(a: &Array2<f64>) -> Result<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(CoreError::InvalidSystem("empty matrix".into()));
    }
    let sv = singular_values(a);
    let smax = sv[0];
    if !(smax > 0.0) {
        return Err(CoreError::InvalidSystem("all-zero matrix has no condition number".into()));
    }
    let smin = sv[sv.len() - 1];
    if smin < RANK_RTOL * smax {
        return Ok(f64::INFINITY);
    }
    Ok(smax / smin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn identity_and_diagonal() {
        let eye: Array2<f64> = Array2::eye(5);
        assert_relative_eq!(condition_number(&eye).unwrap(), 1.0, max_relative = 1e-12);
        let d = array![[3.0, 0.0], [0.0, 1.0]];
        assert_relative_eq!(condition_number(&d).unwrap(), 3.0, max_relative = 1e-12);
    }

    #[test]
    fn shear_matrix_closed_form() {
        // [[1,1],[0,1]]: kappa = (3 + sqrt 5) / 2
        let a = array![[1.0, 1.0], [0.0, 1.0]];
        assert_relative_eq!(
            condition_number(&a).unwrap(),
            2.618033988749895,
            max_relative = 1e-12
        );
    }

    #[test]
    fn wide_matrices_transpose() {
        let a = array![[1.0, 0.0, 2.0], [0.0, 3.0, 0.0]];
        let sv = singular_values(&a);
        let svt = singular_values(&a.t().to_owned());
        assert_eq!(sv.len(), 2);
        for (x, y) in sv.iter().zip(&svt) {
            assert_relative_eq!(x, y, max_relative = 1e-12);
        }
    }

    #[test]
    fn scaling_invariance_and_rank_deficiency() {
        let a = array![[1.0, 2.0], [0.5, -0.3], [2.2, 0.1]];
        let k1 = condition_number(&a).unwrap();
        let k2 = condition_number(&a.mapv(|v| 17.0 * v)).unwrap();
        assert_relative_eq!(k1, k2, max_relative = 1e-10);
        // duplicated column: singular
        let b = array![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        assert!(condition_number(&b).unwrap().is_infinite());
        let z: Array2<f64> = Array2::zeros((3, 2));
        assert!(condition_number(&z).is_err());
    }

    #[test]
    fn matches_gram_eigenvalues_on_random_matrix() {
        // deterministic pseudo-random 6x4 matrix; check sum of squared
        // singular values against the Frobenius norm and products against
        // det(A^T A)
        let mut vals = Vec::new();
        let mut state = 42u64;
        for _ in 0..24 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            vals.push(((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0);
        }
        let a = Array2::from_shape_vec((6, 4), vals).unwrap();
        let sv = singular_values(&a);
        let frob: f64 = a.iter().map(|v| v * v).sum();
        let sum_sq: f64 = sv.iter().map(|v| v * v).sum();
        assert_relative_eq!(frob, sum_sq, max_relative = 1e-12);
        // det(A^T A) = product of squared singular values
        let g = a.t().dot(&a);
        let det = det4(&g);
        let prod_sq: f64 = sv.iter().map(|v| v * v).product();
        assert_relative_eq!(det, prod_sq, max_relative = 1e-9);
    }

    fn det4(g: &Array2<f64>) -> f64 {
        // Laplace expansion on a copy (4x4 only, test helper)
        let mut m = g.clone();
        let n = m.nrows();
        let mut det = 1.0;
        for k in 0..n {
            let mut piv = k;
            for i in k + 1..n {
                if m[[i, k]].abs() > m[[piv, k]].abs() {
                    piv = i;
                }
            }
            if piv != k {
                for j in 0..n {
                    let tmp = m[[k, j]];
                    m[[k, j]] = m[[piv, j]];
                    m[[piv, j]] = tmp;
                }
                det = -det;
            }
            let d = m[[k, k]];
            if d == 0.0 {
                return 0.0;
            }
            det *= d;
            for i in k + 1..n {
                let f = m[[i, k]] / d;
                for j in k..n {
                    m[[i, j]] -= f * m[[k, j]];
                }
            }
        }
        det
    }
}
