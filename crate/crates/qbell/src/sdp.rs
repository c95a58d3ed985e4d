//! Dense first-order SDP solver.
//!
//! Problems have the form `max ⟨C, X⟩` over symmetric `X ⪰ 0` with a linear
//! support pattern and either `Tr X ≤ τ` or a fixed diagonal. The solver is
//! ADMM on the splitting `X ∈ pattern/diagonal set`, `Z ∈ cone`, `X = Z`.
//! Every iterate `Z` is turned into an exactly feasible point (snap to the
//! pattern, shift by the smallest eigenvalue, rescale), and the best such
//! point is returned, so the reported value is always attained.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bell::BellBox;
use crate::error::{Error, Result};
use crate::linalg::{is_psd, min_eigenvalue, Matrix};
use crate::scalar::{rational_from_f64, Scalar};
use crate::theta::cert::CertificateMatrix;
use crate::theta::graph::{build_orthogonality_graph, OrthogonalityGraph};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SdpConstraint {
    /// `Tr X ≤ τ`.
    TraceBound(f64),
    /// `diag X = d`.
    FixedDiagonal(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub cost: DMatrix<f64>,
    /// Allowed off-diagonal entries; the diagonal is always free.
    pub pattern: Vec<Vec<bool>>,
    pub constraint: SdpConstraint,
}

#[derive(Debug, Clone)]
pub struct SdpResult {
    pub value: f64,
    pub matrix: DMatrix<f64>,
    pub status: SdpStatus,
    pub min_eig: f64,
    pub pattern_violation: f64,
    /// `τ − Tr M` in trace mode, `max |M_ii − d_i|` in diagonal mode.
    pub trace_slack: f64,
    pub iterations: usize,
}

impl SdpResult {
    pub fn to_json(&self) -> Value {
        json!({
            "value": self.value,
            "status": self.status,
            "min_eig": self.min_eig,
            "pattern_violation": self.pattern_violation,
            "trace_slack": self.trace_slack,
            "iterations": self.iterations,
        })
    }
}

impl SdpProblem {
    pub fn validate(&self) -> Result<()> {
        let n = self.cost.nrows();
        if self.cost.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.cost.ncols() });
        }
        if self.pattern.len() != n || self.pattern.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: self.pattern.len() });
        }
        for i in 0..n {
            for j in 0..n {
                if self.pattern[i][j] != self.pattern[j][i] {
                    return Err(Error::Asymmetric(i, j));
                }
                if (self.cost[(i, j)] - self.cost[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Asymmetric(i, j));
                }
            }
        }
        if self.cost.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite cost entry".into()));
        }
        match &self.constraint {
            SdpConstraint::TraceBound(t) if !(*t > 0.0) => {
                Err(Error::InvalidParameter(format!("trace bound {t} must be positive")))
            }
            SdpConstraint::FixedDiagonal(d) if d.len() != n || d.iter().any(|&v| !(v > 0.0)) => {
                Err(Error::InvalidParameter("fixed diagonal must be positive, one per row".into()))
            }
            _ => Ok(()),
        }
    }

    fn allowed(&self, i: usize, j: usize) -> bool {
        i == j || self.pattern[i][j]
    }

    fn snap(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = m.nrows();
        DMatrix::from_fn(n, n, |i, j| {
            if self.allowed(i, j) {
                0.5 * (m[(i, j)] + m[(j, i)])
            } else {
                0.0
            }
        })
    }

    /// Projection onto the affine part: pattern zeros plus, in diagonal
    /// mode, the fixed diagonal.
    fn project_affine(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = self.snap(m);
        if let SdpConstraint::FixedDiagonal(d) = &self.constraint {
            for (i, &di) in d.iter().enumerate() {
                x[(i, i)] = di;
            }
        }
        x
    }

    fn project_cone(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match &self.constraint {
            SdpConstraint::TraceBound(t) => project_psd_trace(m, *t),
            SdpConstraint::FixedDiagonal(_) => project_psd(m),
        }
    }

    /// Exactly feasible point near `z`.
    fn repair(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let n = z.nrows();
        let mut y = self.snap(z);
        let lam = min_eigenvalue(&y);
        if lam < 0.0 {
            for i in 0..n {
                y[(i, i)] -= lam;
            }
        }
        match &self.constraint {
            SdpConstraint::TraceBound(t) => {
                let tr = y.trace();
                if tr > *t {
                    y *= *t / tr;
                }
            }
            SdpConstraint::FixedDiagonal(d) => {
                let s: Vec<f64> = (0..n)
                    .map(|i| if y[(i, i)] > 0.0 { (d[i] / y[(i, i)]).sqrt() } else { 0.0 })
                    .collect();
                y = DMatrix::from_fn(n, n, |i, j| y[(i, j)] * s[i] * s[j]);
                for i in 0..n {
                    y[(i, i)] = d[i];
                }
            }
        }
        y
    }

    pub fn objective(&self, m: &DMatrix<f64>) -> f64 {
        self.cost.component_mul(m).sum()
    }

    fn diagnostics(&self, m: &DMatrix<f64>) -> (f64, f64, f64) {
        let n = m.nrows();
        let mut viol: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if !self.allowed(i, j) {
                    viol = viol.max(m[(i, j)].abs());
                }
            }
        }
        let slack = match &self.constraint {
            SdpConstraint::TraceBound(t) => t - m.trace(),
            SdpConstraint::FixedDiagonal(d) => {
                (0..n).map(|i| (m[(i, i)] - d[i]).abs()).fold(0.0, f64::max)
            }
        };
        (min_eigenvalue(m), viol, slack)
    }
}

/// Nearest PSD matrix in Frobenius norm.
pub fn project_psd(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    project_spectrum(s, |lam| lam.iter().map(|&l| l.max(0.0)).collect())
}

/// Projection onto `{X ⪰ 0, Tr X ≤ τ}`.
pub fn project_psd_trace(s: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    project_spectrum(s, |lam| capped_simplex(lam, tau))
}

fn project_spectrum(
    s: &DMatrix<f64>,
    f: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<DMatrix<f64>> {
    if s.nrows() != s.ncols() {
        return Err(Error::DimensionMismatch { expected: s.nrows(), got: s.ncols() });
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite matrix entry".into()));
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lam: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    let mu = f(&lam);
    let q = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(mu));
    Ok(q * d * q.transpose())
}

/// Projection of `lam` onto `{μ ≥ 0, Σμ ≤ τ}`.
fn capped_simplex(lam: &[f64], tau: f64) -> Vec<f64> {
    let pos: f64 = lam.iter().map(|&l| l.max(0.0)).sum();
    if pos <= tau {
        return lam.iter().map(|&l| l.max(0.0)).collect();
    }
    let mut sorted: Vec<f64> = lam.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, &l) in sorted.iter().enumerate() {
        acc += l;
        let t = (acc - tau) / (i + 1) as f64;
        if i + 1 == sorted.len() || sorted[i + 1] <= t {
            theta = t;
            break;
        }
        let _ = l;
    }
    lam.iter().map(|&l| (l - theta).max(0.0)).collect()
}

/// ADMM with residual-balanced penalty; stops when the primal and dual residuals
/// drop below `tol` (relative to the matrix size).
pub fn solve(problem: &SdpProblem, tol: f64, max_iter: usize) -> Result<SdpResult> {
    problem.validate()?;
    let n = problem.cost.nrows();
    if n == 0 {
        return Ok(SdpResult {
            value: 0.0,
            matrix: DMatrix::zeros(0, 0),
            status: SdpStatus::Optimal,
            min_eig: 0.0,
            pattern_violation: 0.0,
            trace_slack: 0.0,
            iterations: 0,
        });
    }
    let scale = problem.cost.abs().max().max(1e-300);
    let mut rho = match &problem.constraint {
        SdpConstraint::TraceBound(t) => scale / t,
        SdpConstraint::FixedDiagonal(_) => scale,
    };
    let mut c_over_rho = &problem.cost / rho;
    let mut z = problem.repair(&DMatrix::zeros(n, n));
    let mut u = DMatrix::<f64>::zeros(n, n);
    let mut best = z.clone();
    let mut best_val = problem.objective(&best);
    let mut status = SdpStatus::MaxIter;
    let mut iterations = max_iter;
    let nf = n as f64;
    for it in 0..max_iter {
        let x = problem.project_affine(&(&z - &u + &c_over_rho));
        let z_new = problem.project_cone(&(&x + &u))?;
        u += &x - &z_new;
        let primal = (&x - &z_new).norm();
        let dual = (&z_new - &z).norm();
        z = z_new;
        if it % 10 == 0 || primal < tol * nf {
            let y = problem.repair(&z);
            let v = problem.objective(&y);
            if v > best_val {
                best_val = v;
                best = y;
            }
        }
        if primal < tol * nf && dual < tol * nf {
            status = SdpStatus::Optimal;
            iterations = it + 1;
            break;
        }
        // Residual balancing: `u` is the scaled dual, so it rescales with ρ.
        if it % 20 == 19 {
            let factor = if primal > 10.0 * dual {
                2.0
            } else if dual > 10.0 * primal {
                0.5
            } else {
                1.0
            };
            if factor != 1.0 {
                rho *= factor;
                u /= factor;
                c_over_rho = &problem.cost / rho;
            }
        }
    }
    let (min_eig, viol, slack) = problem.diagnostics(&best);
    Ok(SdpResult {
        value: problem.objective(&best),
        matrix: best,
        status,
        min_eig,
        pattern_violation: viol,
        trace_slack: slack,
        iterations,
    })
}

/// Cost matrix of the certificate objective: `C_uv = P_u P_v`,
/// `C_uu = P_u² − P_u`.
pub fn certificate_cost(probs: &[f64]) -> DMatrix<f64> {
    let n = probs.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            probs[i] * probs[i] - probs[i]
        } else {
            probs[i] * probs[j]
        }
    })
}

/// Maximizes `⟨P|M|P⟩ − Σ M_ii P_i` over valid certificates with
/// `Tr M ≤ τ`.
pub fn solve_certificate_sdp(
    bx: &BellBox<f64>,
    graph: &OrthogonalityGraph,
    tau: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SdpResult> {
    if graph.scenario != bx.scenario {
        return Err(Error::InvalidScenario("box and graph scenarios differ".into()));
    }
    let problem = SdpProblem {
        cost: certificate_cost(&bx.probs),
        pattern: graph.adj.clone(),
        constraint: SdpConstraint::TraceBound(tau),
    };
    solve(&problem, tol, max_iter)
}

/// Quantum bias of an XOR game: `max Σ G_ij X_{i, ma+j}` over correlation
/// matrices of size `ma + mb`.
pub fn solve_elliptope_bias(g: &[Vec<i64>]) -> Result<SdpResult> {
    solve_elliptope_bias_with(g, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

pub fn solve_elliptope_bias_with(g: &[Vec<i64>], tol: f64, max_iter: usize) -> Result<SdpResult> {
    let ma = g.len();
    let mb = g.first().map_or(0, Vec::len);
    if g.iter().any(|r| r.len() != mb) {
        return Err(Error::DimensionMismatch { expected: mb, got: 0 });
    }
    if ma != mb {
        return Err(Error::InvalidParameter(format!("game matrix is {ma}×{mb}, not square")));
    }
    let n = ma + mb;
    let cost = DMatrix::from_fn(n, n, |i, j| {
        if i < ma && j >= ma {
            g[i][j - ma] as f64 / 2.0
        } else if i >= ma && j < ma {
            g[j][i - ma] as f64 / 2.0
        } else {
            0.0
        }
    });
    let problem = SdpProblem {
        cost,
        pattern: vec![vec![true; n]; n],
        constraint: SdpConstraint::FixedDiagonal(vec![1.0; n]),
    };
    solve(&problem, tol, max_iter)
}

/// Outcome of an SDP exclusion attempt: the float solve and the certificate
/// rebuilt in the box's scalar type and checked there.
#[derive(Debug, Clone)]
pub struct SdpExclusion<S: Scalar> {
    pub solver: SdpResult,
    pub certificate: CertificateMatrix<S>,
    /// Certificate value recomputed in `S`; authoritative.
    pub verified_value: S,
    pub valid: bool,
    pub excluded: bool,
}

impl<S: Scalar> SdpExclusion<S> {
    pub fn to_json(&self) -> Value {
        json!({
            "solver": self.solver.to_json(),
            "verified_value": self.verified_value.to_json(),
            "valid": self.valid,
            "excluded": self.excluded,
            "certificate": self.certificate.to_json(),
        })
    }
}

/// Bits kept when rationalizing solver output.
const RATIONAL_BITS: u32 = 30;

/// Solves the certificate SDP in floating point and re-verifies the
/// resulting matrix in `S`. In rational mode the matrix is rounded to
/// dyadic rationals and shifted by `δI` until exact LDLᵀ accepts it.
pub fn exclude_by_sdp<S: Scalar>(
    bx: &BellBox<S>,
    tau: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SdpExclusion<S>> {
    let graph = build_orthogonality_graph(bx.scenario);
    let fbox = bx.to_f64_box();
    let solver = solve_certificate_sdp(&fbox, &graph, tau, tol, max_iter)?;
    let n = fbox.probs.len();
    // Rows with negligible weight are dropped before exact verification.
    let keep: Vec<usize> = (0..n)
        .filter(|&i| (0..n).any(|j| solver.matrix[(i, j)].abs() > 1e-14))
        .collect();
    let to_s = |v: f64| -> S {
        if S::is_exact() {
            S::from_rational(&rational_from_f64(v, RATIONAL_BITS))
        } else {
            S::from_f64(v).unwrap_or_else(S::zero)
        }
    };
    let base: Matrix<S> = keep
        .iter()
        .map(|&i| {
            keep.iter()
                .map(|&j| {
                    let (a, b) = if i <= j { (i, j) } else { (j, i) };
                    if a != b && !graph.is_edge(a, b) {
                        S::zero()
                    } else {
                        to_s(solver.matrix[(a, b)])
                    }
                })
                .collect()
        })
        .collect();
    let mut m = base.clone();
    let mut valid = is_psd(&m, tol)?;
    let mut shift = 1i64 << 4;
    while !valid && S::is_exact() && shift <= 1 << 26 {
        let delta = S::from_ratio(shift, 1i64 << RATIONAL_BITS);
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = base[i][i].clone() + delta.clone();
        }
        valid = is_psd(&m, tol)?;
        shift <<= 2;
    }
    let certificate = CertificateMatrix::new(keep, m)?;
    let valid = valid && certificate.support_ok(&graph, 0.0);
    let verified_value = certificate.value(bx)?;
    let excluded = valid && verified_value.is_pos(tol);
    Ok(SdpExclusion { solver, certificate, verified_value, valid, excluded })
}
