//! Small dense linear algebra on row-major `Vec<Vec<_>>` matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::taylor::Scalar;

pub type Matrix = Vec<Vec<f64>>;

pub fn identity(n: usize) -> Matrix {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn mat_vec(a: &Matrix, v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

pub fn transpose(a: &Matrix) -> Matrix {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn max_norm(a: &Matrix) -> f64 {
    a.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn to_dmatrix(a: &Matrix) -> DMatrix<f64> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows, cols, |i, j| a[i][j])
}

pub fn determinant(a: &Matrix) -> f64 {
    to_dmatrix(a).determinant()
}

/// Inverse of a square matrix, `None` when `|det| < 1e-12 * max_norm^n`.
pub fn checked_inverse(a: &Matrix) -> Option<Matrix> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) {
        return None;
    }
    let m = to_dmatrix(a);
    let scale = max_norm(a).powi(n as i32);
    if scale == 0.0 || m.determinant().abs() < 1e-12 * scale {
        return None;
    }
    let inv = m.try_inverse()?;
    Some((0..n).map(|i| (0..n).map(|j| inv[(i, j)]).collect()).collect())
}

/// Solve `a x = b` by Gaussian elimination with partial pivoting on the
/// constant parts; works for any [`Scalar`] (e.g. series-valued matrices).
pub fn solve<T: Scalar>(a: &[Vec<T>], b: &[T]) -> Result<Vec<T>> {
    let n = a.len();
    if b.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch("solve needs a square system".into()));
    }
    let mut m: Vec<Vec<T>> = a.to_vec();
    let mut rhs: Vec<T> = b.to_vec();
    let scale = a.iter().flatten().fold(0.0f64, |s, x| s.max(x.value().abs()));
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].value().abs().total_cmp(&m[j][col].value().abs()))
            .expect("non-empty pivot range");
        if m[piv][col].value().abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::SingularJet(format!("singular matrix at column {col}")));
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        let inv = m[col][col].recip()?;
        for r in col + 1..n {
            let factor = m[r][col].mul(&inv);
            for c in col..n {
                let t = factor.mul(&m[col][c]);
                m[r][c] = m[r][c].sub(&t);
            }
            let t = factor.mul(&rhs[col]);
            rhs[r] = rhs[r].sub(&t);
        }
    }
    let mut x: Vec<T> = rhs.clone();
    for r in (0..n).rev() {
        let mut acc = rhs[r].clone();
        for c in r + 1..n {
            acc = acc.sub(&m[r][c].mul(&x[c]));
        }
        x[r] = acc.div(&m[r][r])?;
    }
    Ok(x)
}

/// Determinant by cofactor expansion along the first row, for small
/// matrices over any [`Scalar`].
pub fn determinant_generic<T: Scalar>(a: &[Vec<T>]) -> T {
    let n = a.len();
    match n {
        0 => panic!("determinant of an empty matrix"),
        1 => a[0][0].clone(),
        2 => a[0][0].mul(&a[1][1]).sub(&a[0][1].mul(&a[1][0])),
        _ => {
            let mut acc: Option<T> = None;
            for j in 0..n {
                let minor: Vec<Vec<T>> = a[1..]
                    .iter()
                    .map(|r| r.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, v)| v.clone()).collect())
                    .collect();
                let term = a[0][j].mul(&determinant_generic(&minor));
                acc = Some(match acc {
                    None => term,
                    Some(s) if j % 2 == 1 => s.sub(&term),
                    Some(s) => s.add(&term),
                });
            }
            acc.expect("n >= 3")
        }
    }
}

/// Orthonormal basis of the null space of `a` (rows of constraints), using
/// singular values below `tol * max_singular_value`.
pub fn null_space(a: &Matrix, cols: usize, tol: f64) -> Vec<Vec<f64>> {
    if a.is_empty() {
        return identity(cols);
    }
    // Pad with zero rows so the SVD yields a full set of right vectors.
    let rows = a.len().max(cols);
    let m = DMatrix::from_fn(rows, cols, |i, j| if i < a.len() { a[i][j] } else { 0.0 });
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.iter().fold(0.0f64, |s, x| s.max(*x));
    let mut out = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s <= tol * smax.max(1.0) {
            out.push((0..cols).map(|j| vt[(i, j)]).collect());
        }
    }
    out
}

/// Numerical rank with relative tolerance `tol`.
pub fn rank(a: &Matrix, tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let s = to_dmatrix(a).singular_values();
    let smax = s.iter().fold(0.0f64, |m, x| m.max(*x));
    s.iter().filter(|x| **x > tol * smax.max(f64::MIN_POSITIVE)).count()
}
