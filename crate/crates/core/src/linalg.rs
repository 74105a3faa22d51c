//! Small dense solves with partial pivoting, used for per-point linear
//! systems (top-order forcing beyond the symbolic threshold, Newton steps,
//! sampled determinants).

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("numerically singular matrix")]
pub struct SingularMatrix;

/// In-place LU solve of `a x = b`; returns the solution.
pub fn lu_solve<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>, SingularMatrix> {
    let n = a.len();
    debug_assert!(a.iter().all(|row| row.len() == n) && b.len() == n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| {
                a[r][col]
                    .abs()
                    .partial_cmp(&a[s][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .ok_or(SingularMatrix)?;
        if a[pivot][col].abs() == T::zero() {
            return Err(SingularMatrix);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for j in col..n {
                let delta = factor * a[col][j];
                a[row][j] = a[row][j] - delta;
            }
            let delta = factor * b[col];
            b[row] = b[row] - delta;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for col in row + 1..n {
            acc = acc - a[row][col] * x[col];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Determinant via LU with partial pivoting; zero when pivoting breaks down.
pub fn determinant<T: Scalar>(mut a: Vec<Vec<T>>) -> T {
    let n = a.len();
    let mut det = T::one();
    for col in 0..n {
        let pivot = match (col..n).max_by(|&r, &s| {
            a[r][col]
                .abs()
                .partial_cmp(&a[s][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        }) {
            Some(p) => p,
            None => return T::zero(),
        };
        if a[pivot][col].abs() == T::zero() {
            return T::zero();
        }
        if pivot != col {
            a.swap(col, pivot);
            det = -det;
        }
        det = det * a[col][col];
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for j in col..n {
                let delta = factor * a[col][j];
                a[row][j] = a[row][j] - delta;
            }
        }
    }
    det
}
