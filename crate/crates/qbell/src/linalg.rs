//! Dense linear algebra on `Vec<Vec<S>>` matrices: PSD decisions, rank and
//! symmetric eigen-decomposition.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type Matrix<S> = Vec<Vec<S>>;

pub fn zeros<S: Scalar>(rows: usize, cols: usize) -> Matrix<S> {
    vec![vec![S::zero(); cols]; rows]
}

pub fn identity<S: Scalar>(n: usize) -> Matrix<S> {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = S::one();
    }
    m
}

pub fn check_square<S>(m: &Matrix<S>) -> Result<usize> {
    let n = m.len();
    for row in m {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: row.len() });
        }
    }
    Ok(n)
}

/// Exact symmetry check (tolerance-free in rational mode).
pub fn check_symmetric<S: Scalar>(m: &Matrix<S>, tol: f64) -> Result<()> {
    let n = check_square(m)?;
    for i in 0..n {
        for j in i + 1..n {
            if !m[i][j].approx_eq(&m[j][i], tol) {
                return Err(Error::Asymmetric(i, j));
            }
        }
    }
    Ok(())
}

/// Decides `m ⪰ 0` by LDLᵀ with largest-diagonal pivoting.
///
/// A negative pivot rejects. When the largest remaining pivot is zero the
/// remaining Schur complement must vanish entirely. In rational mode the
/// answer is exact; in float mode `tol` bounds what counts as zero.
pub fn ldlt_is_psd<S: Scalar>(m: &Matrix<S>, tol: f64) -> Result<bool> {
    check_symmetric(m, tol)?;
    let mut a = m.clone();
    let mut active: Vec<usize> = (0..a.len()).collect();
    while !active.is_empty() {
        let (pos, &p) = active
            .iter()
            .enumerate()
            .max_by(|x, y| a[*x.1][*x.1].partial_cmp(&a[*y.1][*y.1]).unwrap())
            .unwrap();
        let d = a[p][p].clone();
        if d.is_neg(tol) {
            return Ok(false);
        }
        if d.is_negligible(tol) {
            return Ok(active
                .iter()
                .all(|&i| active.iter().all(|&j| a[i][j].is_negligible(tol))));
        }
        active.swap_remove(pos);
        for &i in &active {
            if a[i][p].is_zero() {
                continue;
            }
            let f = a[i][p].clone() / d.clone();
            for &j in &active {
                if !a[p][j].is_zero() {
                    let t = f.clone() * a[p][j].clone();
                    a[i][j] = a[i][j].clone() - t;
                }
            }
        }
    }
    Ok(true)
}

/// `m ⪰ 0`: exact LDLᵀ in rational mode, smallest eigenvalue `>= -tol` in
/// float mode.
pub fn is_psd<S: Scalar>(m: &Matrix<S>, tol: f64) -> Result<bool> {
    if S::is_exact() {
        ldlt_is_psd(m, tol)
    } else {
        check_symmetric(m, tol)?;
        if m.is_empty() {
            return Ok(true);
        }
        Ok(min_eigenvalue(&to_dmatrix(m)) >= -tol)
    }
}

pub fn to_dmatrix<S: Scalar>(m: &Matrix<S>) -> DMatrix<f64> {
    let n = m.len();
    let c = m.first().map_or(0, |r| r.len());
    DMatrix::from_fn(n, c, |i, j| m[i][j].to_f64())
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Matrix<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Rank by Gaussian elimination with partial pivoting; exact for rationals.
pub fn rank<S: Scalar>(rows: &Matrix<S>, tol: f64) -> usize {
    let mut a = rows.clone();
    let nrows = a.len();
    let ncols = a.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..ncols {
        if r == nrows {
            break;
        }
        let piv = (r..nrows)
            .filter(|&i| !a[i][c].is_negligible(tol))
            .max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap());
        let Some(piv) = piv else { continue };
        a.swap(r, piv);
        for i in r + 1..nrows {
            if a[i][c].is_zero() {
                continue;
            }
            let f = a[i][c].clone() / a[r][c].clone();
            for j in c..ncols {
                let t = f.clone() * a[r][j].clone();
                a[i][j] = a[i][j].clone() - t;
            }
        }
        r += 1;
    }
    r
}

/// `xᵀ M y`.
pub fn bilinear<S: Scalar>(m: &Matrix<S>, x: &[S], y: &[S]) -> S {
    let mut acc = S::zero();
    for (i, row) in m.iter().enumerate() {
        if x[i].is_zero() {
            continue;
        }
        let mut r = S::zero();
        for (j, v) in row.iter().enumerate() {
            if !v.is_zero() && !y[j].is_zero() {
                r = r + v.clone() * y[j].clone();
            }
        }
        acc = acc + x[i].clone() * r;
    }
    acc
}
