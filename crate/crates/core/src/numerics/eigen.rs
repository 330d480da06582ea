use crate::{Error, Result};

const MAX_DIM: usize = 64;
const MAX_SWEEPS: usize = 100;

/// Smallest eigenvalue of a real symmetric matrix by cyclic Jacobi
/// rotations.
///
/// Sweeps continue until every off-diagonal magnitude is below
/// `1e-13 * max(max |a_ii|, 1)`.
pub fn min_eigenvalue_symmetric(matrix: &[Vec<f64>]) -> Result<f64> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::Shape("empty matrix".into()));
    }
    if n > MAX_DIM {
        return Err(Error::Shape(format!("dimension {n} exceeds {MAX_DIM}")));
    }
    if let Some(bad) = matrix.iter().position(|row| row.len() != n) {
        return Err(Error::Shape(format!(
            "row {bad} has length {} in a {n}-row matrix",
            matrix[bad].len()
        )));
    }
    let scale = matrix
        .iter()
        .flatten()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..i {
            if (matrix[i][j] - matrix[j][i]).abs() > 1e-12 * scale {
                return Err(Error::Shape(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }

    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    for _ in 0..MAX_SWEEPS {
        let diag_max = (0..n).fold(1.0_f64, |acc, i| acc.max(a[i][i].abs()));
        let tol = 1e-13 * diag_max;
        let mut off_max = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off_max = off_max.max(a[p][q].abs());
            }
        }
        if off_max < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq.abs() < tol {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                a[p][q] = 0.0;
                a[q][p] = 0.0;
            }
        }
    }
    Ok((0..n).map(|i| a[i][i]).fold(f64::INFINITY, f64::min))
}
