//! Dense phase-I simplex for `A λ = b, λ >= 0`.
//!
//! Bland's rule keeps the exact rational version finite. On infeasibility the
//! optimal phase-I duals give a vector `y` with `yᵀA <= 0` column-wise and
//! `yᵀb > 0`.

use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility<S: Scalar> {
    Feasible(Vec<S>),
    Infeasible { farkas: Vec<S> },
}

/// Solves `A λ = b, λ >= 0` where `A` is `m × n` (rows are constraints).
pub fn solve_feasibility<S: Scalar>(a: &Matrix<S>, b: &[S], tol: f64) -> Feasibility<S> {
    let m = a.len();
    let n = a.first().map_or(0, |r| r.len());
    let width = n + m;
    let sign: Vec<bool> = b.iter().map(|v| v.is_negative()).collect();
    let mut t: Matrix<S> = (0..m)
        .map(|i| {
            let mut row = Vec::with_capacity(width + 1);
            for j in 0..n {
                row.push(if sign[i] { -a[i][j].clone() } else { a[i][j].clone() });
            }
            for k in 0..m {
                row.push(if k == i { S::one() } else { S::zero() });
            }
            row.push(if sign[i] { -b[i].clone() } else { b[i].clone() });
            row
        })
        .collect();
    // Reduced costs of the phase-I objective (sum of artificials) plus its value.
    let mut r: Vec<S> = vec![S::zero(); width + 1];
    for row in &t {
        for j in 0..n {
            r[j] = r[j].clone() - row[j].clone();
        }
        r[width] = r[width].clone() - row[width].clone();
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    loop {
        let Some(enter) = (0..width).find(|&j| r[j].is_neg(tol)) else { break };
        let mut leave: Option<usize> = None;
        for i in 0..m {
            if !t[i][enter].is_pos(tol) {
                continue;
            }
            leave = match leave {
                None => Some(i),
                Some(l) => {
                    let lhs = t[i][width].clone() * t[l][enter].clone();
                    let rhs = t[l][width].clone() * t[i][enter].clone();
                    if lhs < rhs || (lhs == rhs && basis[i] < basis[l]) {
                        Some(i)
                    } else {
                        Some(l)
                    }
                }
            };
        }
        // Phase I is bounded below by zero, so some row always qualifies.
        let Some(l) = leave else { break };
        pivot(&mut t, &mut r, l, enter);
        basis[l] = enter;
    }

    let objective = -r[width].clone();
    if objective.is_pos(tol) {
        let farkas = (0..m)
            .map(|i| {
                let yi = S::one() - r[n + i].clone();
                if sign[i] {
                    -yi
                } else {
                    yi
                }
            })
            .collect();
        return Feasibility::Infeasible { farkas };
    }
    let mut lambda = vec![S::zero(); n];
    for (i, &bj) in basis.iter().enumerate() {
        if bj < n {
            lambda[bj] = t[i][width].clone();
        }
    }
    Feasibility::Feasible(lambda)
}

fn pivot<S: Scalar>(t: &mut Matrix<S>, r: &mut [S], l: usize, enter: usize) {
    let p = t[l][enter].clone();
    for v in t[l].iter_mut() {
        if !v.is_zero() {
            *v = v.clone() / p.clone();
        }
    }
    let prow = t[l].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i == l || row[enter].is_zero() {
            continue;
        }
        let f = row[enter].clone();
        for (v, pv) in row.iter_mut().zip(&prow) {
            if !pv.is_zero() {
                *v = v.clone() - f.clone() * pv.clone();
            }
        }
    }
    if !r[enter].is_zero() {
        let f = r[enter].clone();
        for (v, pv) in r.iter_mut().zip(&prow) {
            if !pv.is_zero() {
                *v = v.clone() - f.clone() * pv.clone();
            }
        }
    }
}
