//! Neighbors of the `(2,2,k)` PR box, boxes on the faces they span with it,
//! and local-polytope membership.

use rand::Rng;
use serde_json::{json, Value};

use crate::bell::{
    deterministic_box, deterministic_strategies, mix, pr_box, pr_support, BellBox, BellScenario,
    EventIndex, DEFAULT_DETERMINISTIC_CAP,
};
use crate::error::{Error, Result};
use crate::linalg::{rank, Matrix};
use crate::lp::{solve_feasibility, Feasibility};
use crate::scalar::{Rational, Scalar};

/// A deterministic box adjacent to `PR^(k)` together with the one event
/// where it loses the PR game.
#[derive(Debug, Clone)]
pub struct Neighbor {
    pub alice: Vec<usize>,
    pub bob: Vec<usize>,
    pub violated: EventIndex,
}

/// Deterministic strategies that win exactly three of the four PR constraints,
/// ordered by the `(x,y,a,b)` event of the lost setting.
pub fn pr_neighbor_strategies(k: usize) -> Result<Vec<Neighbor>> {
    let sc = BellScenario::cglmp(k)?;
    let mut out = Vec::new();
    for (alice, bob) in deterministic_strategies(sc, DEFAULT_DETERMINISTIC_CAP)? {
        let lost: Vec<EventIndex> = (0..2)
            .flat_map(|x| (0..2).map(move |y| (x, y)))
            .map(|(x, y)| sc.event(sc.flat(x, y, alice[x], bob[y])))
            .filter(|e| !pr_support(k, e))
            .collect();
        if lost.len() == 1 {
            out.push(Neighbor { alice, bob, violated: lost[0] });
        }
    }
    out.sort_by_key(|n| n.violated.flat);
    Ok(out)
}

pub fn pr_neighbors<S: Scalar>(k: usize) -> Result<Vec<BellBox<S>>> {
    let sc = BellScenario::cglmp(k)?;
    pr_neighbor_strategies(k)?
        .iter()
        .map(|n| deterministic_box(sc, &n.alice, &n.bob))
        .collect()
}

/// `c_NS * PR^(k) + Σ w_i L_i` over a subset of the PR neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceSpec<S: Scalar> {
    pub k: usize,
    pub neighbors: Vec<usize>,
    /// `weights[0]` is `c_NS`; `weights[i + 1]` belongs to `neighbors[i]`.
    pub weights: Vec<S>,
}

impl<S: Scalar> FaceSpec<S> {
    pub fn c_ns(&self) -> &S {
        &self.weights[0]
    }

    pub fn dimension(&self) -> usize {
        self.neighbors.len()
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidParameter(format!("k = {} < 2", self.k)));
        }
        if self.weights.len() != self.neighbors.len() + 1 {
            return Err(Error::InvalidWeights(format!(
                "{} weights for {} neighbors",
                self.weights.len(),
                self.neighbors.len()
            )));
        }
        let mut seen = vec![false; 4 * self.k];
        for &i in &self.neighbors {
            if i >= 4 * self.k || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidParameter(format!("bad neighbor id {i}")));
            }
        }
        if !self.c_ns().is_pos(tol) {
            return Err(Error::InvalidWeights("c_NS must be positive".into()));
        }
        if self.weights.iter().any(|w| w.is_neg(tol)) {
            return Err(Error::InvalidWeights("negative weight".into()));
        }
        let total = crate::scalar::sum(&self.weights);
        if !(total.clone() - S::one()).is_negligible(tol) {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "k": self.k,
            "neighbors": self.neighbors,
            "weights": self.weights.iter().map(|w| w.to_json()).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let k = v
            .get("k")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Parse("missing \"k\"".into()))? as usize;
        let neighbors = v
            .get("neighbors")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("missing \"neighbors\"".into()))?
            .iter()
            .map(|n| n.as_u64().map(|n| n as usize).ok_or_else(|| Error::Parse("bad neighbor".into())))
            .collect::<Result<Vec<_>>>()?;
        let weights = v
            .get("weights")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("missing \"weights\"".into()))?
            .iter()
            .map(S::from_json)
            .collect::<Result<Vec<_>>>()?;
        Ok(FaceSpec { k, neighbors, weights })
    }
}

pub fn face_box<S: Scalar>(spec: &FaceSpec<S>, tol: f64) -> Result<BellBox<S>> {
    spec.validate(tol)?;
    let all = pr_neighbors::<S>(spec.k)?;
    let mut boxes = vec![pr_box::<S>(spec.k)?];
    boxes.extend(spec.neighbors.iter().map(|&i| all[i].clone()));
    mix(&boxes, &spec.weights, tol)
}

/// Affine dimension of `{PR^(k)} ∪ {L_i : i in ids}`, exact.
pub fn face_dimension(k: usize, ids: &[usize]) -> Result<usize> {
    let pr = pr_box::<Rational>(k)?;
    let all = pr_neighbors::<Rational>(k)?;
    if let Some(&bad) = ids.iter().find(|&&i| i >= all.len()) {
        return Err(Error::InvalidParameter(format!("bad neighbor id {bad}")));
    }
    let diffs: Matrix<Rational> = ids
        .iter()
        .map(|&i| {
            all[i]
                .probs
                .iter()
                .zip(&pr.probs)
                .map(|(a, b)| a - b)
                .collect()
        })
        .collect();
    Ok(rank(&diffs, 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Membership<S: Scalar> {
    /// Convex weights over the supplied vertices reproducing the box.
    Inside(Vec<S>),
    /// `y` over `(probs..., 1)` with `y·(v, 1) <= 0` for every vertex and
    /// `y·(box, 1) > 0`.
    Outside(Vec<S>),
}

impl<S: Scalar> Membership<S> {
    pub fn is_inside(&self) -> bool {
        matches!(self, Membership::Inside(_))
    }
}

pub fn local_membership<S: Scalar>(
    bx: &BellBox<S>,
    vertices: &[BellBox<S>],
    tol: f64,
) -> Result<Membership<S>> {
    if vertices.is_empty() {
        return Err(Error::InvalidParameter("empty vertex list".into()));
    }
    let n = bx.probs.len();
    if let Some(v) = vertices.iter().find(|v| v.probs.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: v.probs.len() });
    }
    let mut a: Matrix<S> = (0..n)
        .map(|i| vertices.iter().map(|v| v.probs[i].clone()).collect())
        .collect();
    a.push(vec![S::one(); vertices.len()]);
    let mut b = bx.probs.clone();
    b.push(S::one());
    Ok(match solve_feasibility(&a, &b, tol) {
        Feasibility::Feasible(w) => Membership::Inside(w),
        Feasibility::Infeasible { farkas } => Membership::Outside(farkas),
    })
}

/// Seeded face weights: `c_NS` uniform on a grid of step `1/1000` inside
/// `[c_lo, c_hi]`, the remainder split proportionally to integer draws in
/// `1..=1000`. Exact rationals.
pub fn sample_face_weights<R: Rng>(rng: &mut R, d: usize, c_lo: f64, c_hi: f64) -> Vec<Rational> {
    let lo = (c_lo * 1000.0).ceil() as i64;
    let hi = (c_hi * 1000.0).floor() as i64;
    let c = Rational::from_ratio(rng.gen_range(lo..=hi), 1000);
    if d == 0 {
        return vec![Rational::from_ratio(1, 1)];
    }
    let g: Vec<i64> = (0..d).map(|_| rng.gen_range(1..=1000)).collect();
    let total: i64 = g.iter().sum();
    let rest = Rational::from_ratio(1, 1) - c.clone();
    let mut w = vec![c];
    w.extend(g.iter().map(|&gi| rest.clone() * Rational::from_ratio(gi, total)));
    w
}
