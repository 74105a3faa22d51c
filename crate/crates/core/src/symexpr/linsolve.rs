//! Gaussian elimination over the expression field.
//!
//! Pivots are chosen by symbolic non-vanishing (expand-and-compare-to-zero),
//! so the solver is exact on systems whose entries are polynomial in the
//! coordinates with parameter coefficients. Entries are re-expanded after
//! every elimination step to keep cancellation visible.

use thiserror::Error;

use super::ast::Expr;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinearSolveError {
    #[error("matrix is not square or does not match the right-hand side")]
    ShapeMismatch,
    #[error("matrix is symbolically singular (no non-zero pivot in column {column})")]
    Singular { column: usize },
}

/// Solves `a x = b` symbolically, returning the solution components.
pub fn solve_symbolic(a: &[Vec<Expr>], b: &[Expr]) -> Result<Vec<Expr>, LinearSolveError> {
    let n = a.len();
    if b.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(LinearSolveError::ShapeMismatch);
    }
    let mut m: Vec<Vec<Expr>> = a
        .iter()
        .map(|row| row.iter().map(Expr::expand).collect())
        .collect();
    let mut rhs: Vec<Expr> = b.iter().map(Expr::expand).collect();

    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !m[r][col].is_zero())
            .ok_or(LinearSolveError::Singular { column: col })?;
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            if m[row][col].is_zero() {
                continue;
            }
            let factor = Expr::div(m[row][col].clone(), m[col][col].clone());
            for j in col..n {
                let updated = Expr::sub(
                    m[row][j].clone(),
                    Expr::mul2(factor.clone(), m[col][j].clone()),
                );
                m[row][j] = updated.expand();
            }
            let updated = Expr::sub(
                rhs[row].clone(),
                Expr::mul2(factor.clone(), rhs[col].clone()),
            );
            rhs[row] = updated.expand();
        }
    }

    let mut x = vec![Expr::zero(); n];
    for row in (0..n).rev() {
        let mut acc = rhs[row].clone();
        for col in row + 1..n {
            acc = Expr::sub(acc, Expr::mul2(m[row][col].clone(), x[col].clone()));
        }
        x[row] = Expr::div(acc, m[row][row].clone()).expand();
    }
    Ok(x)
}

/// Symbolic determinant by cofactor expansion along the first row.
/// Intended for the small Hessians this crate works with.
pub fn det_symbolic(a: &[Vec<Expr>]) -> Expr {
    let n = a.len();
    match n {
        0 => Expr::one(),
        1 => a[0][0].clone(),
        _ => {
            let mut acc = Expr::zero();
            for (j, entry) in a[0].iter().enumerate() {
                if entry.is_zero() {
                    continue;
                }
                let minor: Vec<Vec<Expr>> = a[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(c, _)| *c != j)
                            .map(|(_, e)| e.clone())
                            .collect()
                    })
                    .collect();
                let sign = if j % 2 == 0 { 1 } else { -1 };
                acc = Expr::add2(
                    acc,
                    Expr::mul([Expr::int(sign), entry.clone(), det_symbolic(&minor)]),
                );
            }
            acc
        }
    }
}
