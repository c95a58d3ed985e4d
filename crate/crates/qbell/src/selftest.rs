//! Planar two-qubit models on the `(2,m,2)` quantum boundary.
//!
//! Observables are `cos θ·σ_z + sin θ·σ_x` acting on `|φ⁺⟩ = (|00⟩+|11⟩)/√2`,
//! so `E[i][j] = cos(θA_i − θB_j)`. Indices in this module are 0-based:
//! `alpha[x][y]` is Alice's input `x` against Bob's input `y`.

use std::f64::consts::PI;

use nalgebra::{DVector, Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bell::{box_of_correlators, BellBox, BellScenario, CorrelatorTable};
use crate::error::{Error, Result};

/// Largest `m` accepted by [`classical_chain_max`].
pub const CHAIN_ENUMERATION_CAP: usize = 12;

/// Angles closer than this to 0 or π are treated as degenerate.
const DEGENERATE: f64 = 1e-12;

type C2 = Matrix2<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn sigma_z() -> C2 {
    Matrix2::new(c(1.0), c(0.0), c(0.0), c(-1.0))
}

pub fn sigma_x() -> C2 {
    Matrix2::new(c(0.0), c(1.0), c(1.0), c(0.0))
}

/// `cos θ·σ_z + sin θ·σ_x`.
pub fn planar_observable(theta: f64) -> C2 {
    sigma_z() * c(theta.cos()) + sigma_x() * c(theta.sin())
}

/// `|φ⁺⟩` in the basis `|00⟩, |01⟩, |10⟩, |11⟩`.
pub fn phi_plus() -> Vector4<Complex64> {
    let h = c(std::f64::consts::FRAC_1_SQRT_2);
    Vector4::new(h, c(0.0), c(0.0), h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarModel {
    pub m: usize,
    #[serde(rename = "thetaA")]
    pub theta_a: Vec<f64>,
    #[serde(rename = "thetaB")]
    pub theta_b: Vec<f64>,
}

impl PlanarModel {
    pub fn new(theta_a: Vec<f64>, theta_b: Vec<f64>) -> Result<Self> {
        let model = PlanarModel { m: theta_a.len(), theta_a, theta_b };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidParameter(format!("m = {} < 2", self.m)));
        }
        if self.theta_a.len() != self.m || self.theta_b.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                got: self.theta_a.len().min(self.theta_b.len()),
            });
        }
        if self.theta_a.iter().chain(&self.theta_b).any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("non-finite angle".into()));
        }
        Ok(())
    }

    /// Equal spacing `θA_i = iπ/m`, `θB_j = (2j+1)π/2m` (0-based), the
    /// optimal model for the unweighted chained inequality.
    pub fn canonical_chained(m: usize) -> Result<Self> {
        let mf = m as f64;
        Self::new(
            (0..m).map(|i| i as f64 * PI / mf).collect(),
            (0..m).map(|j| (2 * j + 1) as f64 * PI / (2.0 * mf)).collect(),
        )
    }

    /// Sorts Alice's angles ascending, carrying nothing else along.
    pub fn canonicalized(&self) -> Self {
        let mut out = self.clone();
        out.theta_a.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }

    pub fn alice(&self, i: usize) -> C2 {
        planar_observable(self.theta_a[i])
    }

    pub fn bob(&self, j: usize) -> C2 {
        planar_observable(self.theta_b[j])
    }

    /// `cos(θA_i − θB_j)`.
    pub fn correlators(&self) -> Vec<Vec<f64>> {
        self.theta_a
            .iter()
            .map(|ta| self.theta_b.iter().map(|tb| (ta - tb).cos()).collect())
            .collect()
    }

    /// `⟨φ⁺|A_i ⊗ B_j|φ⁺⟩` from explicit 4×4 matrices.
    pub fn correlators_explicit(&self) -> Vec<Vec<f64>> {
        let psi = phi_plus();
        (0..self.m)
            .map(|i| {
                (0..self.m)
                    .map(|j| {
                        let op: Matrix4<Complex64> = self.alice(i).kronecker(&self.bob(j));
                        (psi.adjoint() * op * psi)[(0, 0)].re
                    })
                    .collect()
            })
            .collect()
    }

    /// Correlators from both routes; errors if they differ by more than `tol`.
    pub fn correlator_table(&self, tol: f64) -> Result<CorrelatorTable<f64>> {
        let a = self.correlators();
        let b = self.correlators_explicit();
        for i in 0..self.m {
            for j in 0..self.m {
                if (a[i][j] - b[i][j]).abs() > tol {
                    return Err(Error::Degenerate(format!(
                        "correlator routes disagree at ({i}, {j}): {} vs {}",
                        a[i][j], b[i][j]
                    )));
                }
            }
        }
        CorrelatorTable::new(a, tol)
    }

    /// Box with unbiased marginals and the model's correlators.
    pub fn to_box(&self) -> Result<BellBox<f64>> {
        box_of_correlators(&self.correlator_table(1e-12)?)
    }

    pub fn angle_table(&self) -> AngleTable {
        AngleTable::from_correlators(&self.correlators())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleTable {
    pub alpha: Vec<Vec<f64>>,
}

impl AngleTable {
    /// `α = arccos E`, clamped into `[-1, 1]` first.
    pub fn from_correlators(e: &[Vec<f64>]) -> Self {
        AngleTable {
            alpha: e
                .iter()
                .map(|r| r.iter().map(|v| v.clamp(-1.0, 1.0).acos()).collect())
                .collect(),
        }
    }

    pub fn m(&self) -> usize {
        self.alpha.len()
    }
}

/// `Σ_{i<m−1} (α[i][i] + α[i+1][i]) − (α[0][m−1] − α[m−1][m−1])`.
pub fn boundary_residual(alpha: &AngleTable, m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("m = {m} < 2")));
    }
    let a = &alpha.alpha;
    if a.len() < m || a.iter().any(|r| r.len() < m) {
        return Err(Error::DimensionMismatch { expected: m, got: a.len() });
    }
    let chain: f64 = (0..m - 1).map(|i| a[i][i] + a[i + 1][i]).sum();
    Ok(chain - (a[0][m - 1] - a[m - 1][m - 1]))
}

/// `Σ_{(x,y)≠pivot} arcsin E[x][y] − arcsin E[pivot] − ξπ` for `m = 2`.
pub fn tlm_residual(e: &[Vec<f64>], pivot: (usize, usize), xi: i32) -> Result<f64> {
    if e.len() != 2 || e.iter().any(|r| r.len() != 2) {
        return Err(Error::InvalidParameter("TLM equation needs a 2×2 table".into()));
    }
    if pivot.0 > 1 || pivot.1 > 1 || xi.abs() != 1 {
        return Err(Error::InvalidParameter("pivot must be in 2×2, xi = ±1".into()));
    }
    let mut r = -(xi as f64) * PI;
    for x in 0..2 {
        for y in 0..2 {
            let s = e[x][y].clamp(-1.0, 1.0).asin();
            r += if (x, y) == pivot { -s } else { s };
        }
    }
    Ok(r)
}

/// Weights of `I = Σ_{i<m−1} (c_ii E_ii + c_{i+1,i} E_{i+1,i}) + c_{m−1,m−1} E_{m−1,m−1} − c_{0,m−1} E_{0,m−1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedChain {
    /// `c_ii`, length `m`.
    pub diag: Vec<f64>,
    /// `c_{i+1,i}`, length `m − 1`.
    pub sub: Vec<f64>,
    /// `c_{0,m−1}`.
    pub corner: f64,
}

impl WeightedChain {
    pub fn unit(m: usize) -> Self {
        WeightedChain { diag: vec![1.0; m], sub: vec![1.0; m - 1], corner: 1.0 }
    }

    pub fn m(&self) -> usize {
        self.diag.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        if m < 2 || self.sub.len() != m - 1 {
            return Err(Error::InvalidWeights(format!("need m ≥ 2 and m − 1 = {} sub weights", self.sub.len())));
        }
        if self.diag.iter().chain(&self.sub).chain([&self.corner]).any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidWeights("chain weights must be positive".into()));
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.diag.iter().sum::<f64>() + self.sub.iter().sum::<f64>() + self.corner
    }

    pub fn normalized(&self) -> Self {
        let t = self.total();
        WeightedChain {
            diag: self.diag.iter().map(|w| w / t).collect(),
            sub: self.sub.iter().map(|w| w / t).collect(),
            corner: self.corner / t,
        }
    }

    /// Coefficient matrix `w[x][y]` of `I = Σ w[x][y] E[x][y]`.
    pub fn coefficients(&self) -> Vec<Vec<f64>> {
        let m = self.m();
        let mut w = vec![vec![0.0; m]; m];
        for i in 0..m {
            w[i][i] += self.diag[i];
        }
        for i in 0..m - 1 {
            w[i + 1][i] += self.sub[i];
        }
        w[0][m - 1] -= self.corner;
        w
    }
}

pub fn chain_value(e: &[Vec<f64>], w: &WeightedChain) -> Result<f64> {
    w.validate()?;
    let m = w.m();
    if e.len() < m || e.iter().any(|r| r.len() < m) {
        return Err(Error::DimensionMismatch { expected: m, got: e.len() });
    }
    let coef = w.coefficients();
    Ok((0..m).map(|x| (0..m).map(|y| coef[x][y] * e[x][y]).sum::<f64>()).sum())
}

/// Maximum of the chain expression over deterministic `±1` assignments.
/// Alice's `2^m` assignments are enumerated; for each, Bob's best response
/// is `b_y = sign(Σ_x a_x w[x][y])`, which attains the maximum over his `2^m`.
pub fn classical_chain_max(w: &WeightedChain) -> Result<f64> {
    w.validate()?;
    let m = w.m();
    if m > CHAIN_ENUMERATION_CAP {
        return Err(Error::CapExceeded { needed: m as u128, cap: CHAIN_ENUMERATION_CAP as u128 });
    }
    let coef = w.coefficients();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << m) {
        let a: Vec<f64> = (0..m).map(|x| if mask >> x & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let v: f64 = (0..m)
            .map(|y| (0..m).map(|x| a[x] * coef[x][y]).sum::<f64>().abs())
            .sum();
        best = best.max(v);
    }
    Ok(best)
}

/// `c = 1 / sin α` for every term of the chain.
pub fn boundary_weights(alpha: &AngleTable) -> Result<WeightedChain> {
    let m = alpha.m();
    if m < 2 || alpha.alpha.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidParameter("angle table must be m×m with m ≥ 2".into()));
    }
    let a = &alpha.alpha;
    let inv = |t: f64| {
        if t < DEGENERATE || t > PI - DEGENERATE {
            Err(Error::Degenerate(format!("angle {t} has no tangent weight")))
        } else {
            Ok(1.0 / t.sin())
        }
    };
    Ok(WeightedChain {
        diag: (0..m).map(|i| inv(a[i][i])).collect::<Result<_>>()?,
        sub: (0..m - 1).map(|i| inv(a[i + 1][i])).collect::<Result<_>>()?,
        corner: inv(a[0][m - 1])?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOperators {
    pub z_a: C2,
    pub x_a: C2,
    pub z_b: C2,
    pub x_b: C2,
}

impl ControlOperators {
    /// Largest `‖U†U − I‖` over the four operators.
    pub fn unitarity_residual(&self) -> f64 {
        [&self.z_a, &self.x_a, &self.z_b, &self.x_b]
            .iter()
            .map(|u| (u.adjoint() * *u - C2::identity()).norm())
            .fold(0.0, f64::max)
    }

    /// Each operator replaced by the unitary factor of its polar decomposition.
    pub fn regularized(&self) -> Self {
        ControlOperators {
            z_a: polar_unitary(&self.z_a),
            x_a: polar_unitary(&self.x_a),
            z_b: polar_unitary(&self.z_b),
            x_b: polar_unitary(&self.x_b),
        }
    }
}

/// Unitary factor `U` of `M = U·P`.
pub fn polar_unitary(m: &C2) -> C2 {
    let svd = m.svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

/// `Z_A = A_0`, `X_A = (A_1 − cos(α00+α10)A_0)/sin(α00+α10)`,
/// `Z_B = (sin α01·B_0 − sin α00·B_1)/sin(α01−α00)`,
/// `X_B = (cos α00·B_1 − cos α01·B_0)/sin(α01−α00)`.
pub fn control_operators(model: &PlanarModel) -> Result<ControlOperators> {
    model.validate()?;
    let a = model.angle_table().alpha;
    let sa = (a[0][0] + a[1][0]).sin();
    let sb = (a[0][1] - a[0][0]).sin();
    if sa.abs() < DEGENERATE || sb.abs() < DEGENERATE {
        return Err(Error::Degenerate("control operator denominator vanishes".into()));
    }
    let (a0, a1, b0, b1) = (model.alice(0), model.alice(1), model.bob(0), model.bob(1));
    Ok(ControlOperators {
        z_a: a0,
        x_a: (a1 - a0 * c((a[0][0] + a[1][0]).cos())) / c(sa),
        z_b: (b0 * c(a[0][1].sin()) - b1 * c(a[0][0].sin())) / c(sb),
        x_b: (b1 * c(a[0][0].cos()) - b0 * c(a[0][1].cos())) / c(sb),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfTestResiduals {
    /// `‖(Z_A⊗I − I⊗Z_B)|φ⁺⟩‖`.
    pub z_match: f64,
    /// `‖(X_A⊗I − I⊗X_B)|φ⁺⟩‖`.
    pub x_match: f64,
    /// `‖(X_A Z_A + Z_A X_A)⊗I |φ⁺⟩‖`.
    pub anticommute_a: f64,
    /// `‖I⊗(X_B Z_B + Z_B X_B) |φ⁺⟩‖`.
    pub anticommute_b: f64,
    pub zz: f64,
    pub xx: f64,
    pub unitarity: f64,
}

impl SelfTestResiduals {
    pub fn max_residual(&self) -> f64 {
        [
            self.z_match,
            self.x_match,
            self.anticommute_a,
            self.anticommute_b,
            (self.zz - 1.0).abs(),
            (self.xx - 1.0).abs(),
            self.unitarity,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn verify_self_test_conditions(model: &PlanarModel) -> Result<SelfTestResiduals> {
    let ops = control_operators(model)?;
    let psi = phi_plus();
    let id = C2::identity();
    let on_a = |u: &C2| u.kronecker(&id);
    let on_b = |u: &C2| id.kronecker(u);
    let expect = |op: Matrix4<Complex64>| (psi.adjoint() * op * psi)[(0, 0)].re;
    Ok(SelfTestResiduals {
        z_match: ((on_a(&ops.z_a) - on_b(&ops.z_b)) * psi).norm(),
        x_match: ((on_a(&ops.x_a) - on_b(&ops.x_b)) * psi).norm(),
        anticommute_a: (on_a(&(ops.x_a * ops.z_a + ops.z_a * ops.x_a)) * psi).norm(),
        anticommute_b: (on_b(&(ops.x_b * ops.z_b + ops.z_b * ops.x_b)) * psi).norm(),
        zz: expect(ops.z_a.kronecker(&ops.z_b)),
        xx: expect(ops.x_a.kronecker(&ops.x_b)),
        unitarity: ops.unitarity_residual(),
    })
}

/// Single-qubit operators on `(sA, sB, ancA, ancB)`, tensored in that order.
fn embed(ops: [&C2; 4]) -> nalgebra::DMatrix<Complex64> {
    let k = ops[0].kronecker(ops[1]).kronecker(ops[2]).kronecker(ops[3]);
    nalgebra::DMatrix::from_iterator(16, 16, k.iter().cloned())
}

fn hadamard_gate() -> C2 {
    let h = c(std::f64::consts::FRAC_1_SQRT_2);
    Matrix2::new(h, h, h, -h)
}

/// `Φ`: per party, `H` on the ancilla, controlled-`Z` on the system, `H`,
/// controlled-`X` on the system.
pub fn swap_isometry(ops: &ControlOperators) -> nalgebra::DMatrix<Complex64> {
    let id = C2::identity();
    let p0 = Matrix2::new(c(1.0), c(0.0), c(0.0), c(0.0));
    let p1 = Matrix2::new(c(0.0), c(0.0), c(0.0), c(1.0));
    let h = hadamard_gate();
    let h_a = embed([&id, &id, &h, &id]);
    let h_b = embed([&id, &id, &id, &h]);
    let ctrl_a = |u: &C2| embed([&id, &id, &p0, &id]) + embed([u, &id, &p1, &id]);
    let ctrl_b = |u: &C2| embed([&id, &id, &id, &p0]) + embed([&id, u, &id, &p1]);
    let party_a = ctrl_a(&ops.x_a) * &h_a * ctrl_a(&ops.z_a) * &h_a;
    let party_b = ctrl_b(&ops.x_b) * &h_b * ctrl_b(&ops.z_b) * &h_b;
    party_b * party_a
}

/// `ψ ⊗ |00⟩` as a 16-vector.
fn with_ancillas(psi: &Vector4<Complex64>) -> DVector<Complex64> {
    let mut v = DVector::zeros(16);
    for s in 0..4 {
        v[s * 4] = psi[s];
    }
    v
}

/// `⟨φ⁺|ρ_anc|φ⁺⟩` for the 16-dimensional state.
fn ancilla_fidelity(out: &DVector<Complex64>) -> f64 {
    let phi = phi_plus();
    (0..4)
        .map(|s| (0..4).map(|a| phi[a].conj() * out[s * 4 + a]).sum::<Complex64>().norm_sqr())
        .sum()
}

pub fn swap_isometry_fidelity(model: &PlanarModel) -> Result<f64> {
    swap_isometry_fidelity_with_state(model, &phi_plus())
}

/// Fidelity when the model's operators act on `psi` instead of `|φ⁺⟩`.
/// Control operators that are not unitary are regularized first.
pub fn swap_isometry_fidelity_with_state(model: &PlanarModel, psi: &Vector4<Complex64>) -> Result<f64> {
    let ops = control_operators(model)?.regularized();
    let norm = psi.norm();
    if norm < DEGENERATE {
        return Err(Error::InvalidParameter("zero state".into()));
    }
    let out = swap_isometry(&ops) * with_ancillas(&(psi / c(norm)));
    Ok(ancilla_fidelity(&out))
}

/// Largest `‖Φ(A_i⊗B_j|φ⁺⟩|00⟩) − |junk⟩⊗(Ã_i⊗B̃_j)|φ⁺⟩‖` over all `(i, j)`,
/// where `Ã_i = a_z σ_z + a_x σ_x` uses `A_i`'s coordinates in the
/// `(Z_A, X_A)` frame and likewise for Bob.
pub fn pushforward_residual(model: &PlanarModel) -> Result<f64> {
    let ops = control_operators(model)?.regularized();
    let phi = swap_isometry(&ops);
    let psi = phi_plus();
    let base = &phi * with_ancillas(&psi);
    // |junk⟩ = (I ⊗ ⟨φ⁺|) Φ(|φ⁺⟩|00⟩).
    let junk: Vec<Complex64> = (0..4)
        .map(|s| (0..4).map(|a| psi[a].conj() * base[s * 4 + a]).sum())
        .collect();
    let coord = |op: &C2, frame: &C2| (op * frame).trace().re / 2.0;
    let mut worst: f64 = 0.0;
    for i in 0..model.m {
        let ai = model.alice(i);
        let at = sigma_z() * c(coord(&ai, &ops.z_a)) + sigma_x() * c(coord(&ai, &ops.x_a));
        for j in 0..model.m {
            let bj = model.bob(j);
            let bt = sigma_z() * c(coord(&bj, &ops.z_b)) + sigma_x() * c(coord(&bj, &ops.x_b));
            let lhs = &phi * with_ancillas(&(ai.kronecker(&bj) * psi));
            let anc = at.kronecker(&bt) * psi;
            let mut rhs = DVector::zeros(16);
            for s in 0..4 {
                for a in 0..4 {
                    rhs[s * 4 + a] = junk[s] * anc[a];
                }
            }
            worst = worst.max((lhs - rhs).norm());
        }
    }
    Ok(worst)
}

/// Hardy probability `P(0,0|0,0)` of the planar family
/// `ψ = β(|01⟩+|10⟩) + δ|11⟩` at `s = β²`: `s²(1−2s)/(1−s)²`.
pub fn hardy_probability(s: f64) -> f64 {
    s * s * (1.0 - 2.0 * s) / ((1.0 - s) * (1.0 - s))
}

/// Golden-section maximization of [`hardy_probability`] on `(0, 1/2)`.
pub fn hardy_optimal_s() -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, 0.5);
    for _ in 0..200 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if hardy_probability(a) < hardy_probability(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    (lo + hi) / 2.0
}

/// The Hardy box at `s = β²`. Input 1 measures in the computational basis;
/// input 0 has outcome-0 vector `∝ (δ, −β)`. Its zeros are `(0,0|1,1)`,
/// `(0,1|0,1)` and `(1,0|1,0)`.
pub fn hardy_box(s: f64) -> Result<BellBox<f64>> {
    if !(s > 0.0 && s < 0.5) {
        return Err(Error::InvalidParameter(format!("s = {s} not in (0, 1/2)")));
    }
    let beta = s.sqrt();
    let delta = (1.0 - 2.0 * s).sqrt();
    let psi = [0.0, beta, beta, delta];
    let n = (delta * delta + beta * beta).sqrt();
    let u0 = [delta / n, -beta / n];
    let u1 = [beta / n, delta / n];
    let basis = |input: usize, outcome: usize| -> [f64; 2] {
        match (input, outcome) {
            (0, 0) => u0,
            (0, _) => u1,
            (_, 0) => [1.0, 0.0],
            _ => [0.0, 1.0],
        }
    };
    let sc = BellScenario::new(2, 2, 2, 2)?;
    let probs = sc
        .events()
        .map(|e| {
            let (va, vb) = (basis(e.x, e.a), basis(e.y, e.b));
            let amp: f64 = (0..2)
                .flat_map(|i| (0..2).map(move |j| (i, j)))
                .map(|(i, j)| va[i] * vb[j] * psi[2 * i + j])
                .sum();
            amp * amp
        })
        .collect();
    BellBox::new(sc, probs)
}

/// Report used by the command line front end.
pub fn selftest_report(model: &PlanarModel) -> Result<Value> {
    let model = model.canonicalized();
    let e = model.correlator_table(1e-12)?.e;
    let alpha = model.angle_table();
    let residual = boundary_residual(&alpha, model.m)?;
    let tlm = if model.m == 2 {
        let mut best: Option<(f64, (usize, usize), i32)> = None;
        for pivot in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            for xi in [1, -1] {
                let r = tlm_residual(&e, pivot, xi)?;
                if best.map_or(true, |b| r.abs() < b.0.abs()) {
                    best = Some((r, pivot, xi));
                }
            }
        }
        best.map(|(r, p, xi)| json!({"residual": r, "pivot": [p.0, p.1], "xi": xi}))
    } else {
        None
    };
    let chain = match boundary_weights(&alpha) {
        Ok(w) => {
            let w = w.normalized();
            let q = chain_value(&e, &w)?;
            let cl = classical_chain_max(&w)?;
            json!({"weights": w, "quantum": q, "classical_max": cl, "gap": q - cl})
        }
        Err(err) => json!({"error": err.to_string()}),
    };
    let conditions = verify_self_test_conditions(&model)?;
    let fidelity = swap_isometry_fidelity(&model)?;
    Ok(json!({
        "model": model,
        "correlators": e,
        "boundary_residual": residual,
        "tlm": tlm,
        "chain": chain,
        "self_test": conditions,
        "fidelity": fidelity,
        "pushforward_residual": pushforward_residual(&model)?,
    }))
}
