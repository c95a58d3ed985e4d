//! Bell scenarios, boxes, deterministic vertices, relabelings and JSON I/O.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{NumMode, Scalar};

/// Default cap on the number of deterministic boxes enumerated.
pub const DEFAULT_DETERMINISTIC_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BellScenario {
    pub ma: usize,
    pub mb: usize,
    pub ka: usize,
    pub kb: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventIndex {
    pub x: usize,
    pub y: usize,
    pub a: usize,
    pub b: usize,
    pub flat: usize,
}

impl BellScenario {
    pub fn new(ma: usize, mb: usize, ka: usize, kb: usize) -> Result<Self> {
        let s = BellScenario { ma, mb, ka, kb };
        s.validate()?;
        Ok(s)
    }

    /// The `(2, 2, k)` scenario.
    pub fn cglmp(k: usize) -> Result<Self> {
        Self::new(2, 2, k, k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ma < 2 || self.mb < 2 || self.ka < 2 || self.kb < 2 {
            return Err(Error::InvalidScenario(format!(
                "all of ma, mb, ka, kb must be >= 2, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn num_events(&self) -> usize {
        self.ma * self.mb * self.ka * self.kb
    }

    pub fn num_settings(&self) -> usize {
        self.ma * self.mb
    }

    pub fn flat(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        ((x * self.mb + y) * self.ka + a) * self.kb + b
    }

    pub fn event(&self, flat: usize) -> EventIndex {
        let b = flat % self.kb;
        let rest = flat / self.kb;
        let a = rest % self.ka;
        let rest = rest / self.ka;
        let y = rest % self.mb;
        let x = rest / self.mb;
        EventIndex { x, y, a, b, flat }
    }

    pub fn events(&self) -> impl Iterator<Item = EventIndex> + '_ {
        (0..self.num_events()).map(|i| self.event(i))
    }

    /// Same local input with different local output on at least one side.
    pub fn locally_orthogonal(&self, u: usize, v: usize) -> bool {
        let (e, f) = (self.event(u), self.event(v));
        (e.x == f.x && e.a != f.a) || (e.y == f.y && e.b != f.b)
    }

    pub fn is_binary(&self) -> bool {
        self.ka == 2 && self.kb == 2
    }

    pub fn num_deterministic(&self) -> u128 {
        (self.ka as u128).pow(self.ma as u32) * (self.kb as u128).pow(self.mb as u32)
    }
}

impl std::fmt::Display for EventIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{}|{},{})", self.a, self.b, self.x, self.y)
    }
}

/// Which marginal disagrees between two remote inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum SignalingViolation {
    /// `P_A(a|x)` differs between Bob's inputs `y1` and `y2`.
    Alice { a: usize, x: usize, y1: usize, y2: usize },
    /// `P_B(b|y)` differs between Alice's inputs `x1` and `x2`.
    Bob { b: usize, x1: usize, x2: usize, y: usize },
}

#[derive(Debug, Clone)]
pub struct NoSignalingReport {
    pub no_signaling: bool,
    pub violations: Vec<SignalingViolation>,
}

/// A conditional probability table `P(a,b|x,y)` in flat event order.
#[derive(Debug, Clone, PartialEq)]
pub struct BellBox<S: Scalar> {
    pub scenario: BellScenario,
    pub probs: Vec<S>,
}

impl<S: Scalar> BellBox<S> {
    pub fn new(scenario: BellScenario, probs: Vec<S>) -> Result<Self> {
        scenario.validate()?;
        if probs.len() != scenario.num_events() {
            return Err(Error::DimensionMismatch {
                expected: scenario.num_events(),
                got: probs.len(),
            });
        }
        Ok(BellBox { scenario, probs })
    }

    pub fn p(&self, x: usize, y: usize, a: usize, b: usize) -> &S {
        &self.probs[self.scenario.flat(x, y, a, b)]
    }

    pub fn uniform(scenario: BellScenario) -> Result<Self> {
        let v = S::from_ratio(1, (scenario.ka * scenario.kb) as i64);
        Self::new(scenario, vec![v; scenario.num_events()])
    }

    pub fn setting_sum(&self, x: usize, y: usize) -> S {
        let sc = &self.scenario;
        let mut s = S::zero();
        for a in 0..sc.ka {
            for b in 0..sc.kb {
                s = s + self.p(x, y, a, b).clone();
            }
        }
        s
    }

    /// Non-negativity and per-setting normalization.
    pub fn is_normalized(&self, tol: f64) -> bool {
        let sc = self.scenario;
        self.probs.iter().all(|p| !p.is_neg(tol))
            && (0..sc.ma).all(|x| {
                (0..sc.mb).all(|y| (self.setting_sum(x, y) - S::one()).is_negligible(tol))
            })
    }

    pub fn alice_marginal(&self, a: usize, x: usize, y: usize) -> S {
        (0..self.scenario.kb).fold(S::zero(), |s, b| s + self.p(x, y, a, b).clone())
    }

    pub fn bob_marginal(&self, b: usize, x: usize, y: usize) -> S {
        (0..self.scenario.ka).fold(S::zero(), |s, a| s + self.p(x, y, a, b).clone())
    }

    /// Marginal consistency: each party's marginal is independent of the
    /// remote input. Every remote input is compared against input 0.
    pub fn validate_no_signaling(&self, tol: f64) -> NoSignalingReport {
        let sc = self.scenario;
        let mut violations = Vec::new();
        for x in 0..sc.ma {
            for a in 0..sc.ka {
                let base = self.alice_marginal(a, x, 0);
                for y in 1..sc.mb {
                    if !self.alice_marginal(a, x, y).approx_eq(&base, tol) {
                        violations.push(SignalingViolation::Alice { a, x, y1: 0, y2: y });
                    }
                }
            }
        }
        for y in 0..sc.mb {
            for b in 0..sc.kb {
                let base = self.bob_marginal(b, 0, y);
                for x in 1..sc.ma {
                    if !self.bob_marginal(b, x, y).approx_eq(&base, tol) {
                        violations.push(SignalingViolation::Bob { b, x1: 0, x2: x, y });
                    }
                }
            }
        }
        NoSignalingReport { no_signaling: violations.is_empty(), violations }
    }

    pub fn is_no_signaling(&self, tol: f64) -> bool {
        self.validate_no_signaling(tol).no_signaling
    }

    pub fn apply_relabeling(&self, rel: &Relabeling) -> Result<Self> {
        rel.validate(&self.scenario)?;
        let sc = self.scenario;
        let mut probs = vec![S::zero(); sc.num_events()];
        for e in sc.events() {
            let src = rel.source_event(&sc, e.x, e.y, e.a, e.b);
            probs[e.flat] = self.probs[src].clone();
        }
        BellBox::new(sc, probs)
    }

    /// Converts the entries to another numeric mode through `f64` or exactly
    /// from rationals.
    pub fn to_f64_box(&self) -> BellBox<f64> {
        BellBox {
            scenario: self.scenario,
            probs: self.probs.iter().map(|p| p.to_f64()).collect(),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "scenario": self.scenario,
            "mode": S::MODE.as_str(),
            "probs": self.probs.iter().map(|p| p.to_json()).collect::<Vec<_>>(),
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("box serializes")
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let scenario: BellScenario = serde_json::from_value(
            v.get("scenario")
                .cloned()
                .ok_or_else(|| Error::Parse("missing \"scenario\"".into()))?,
        )
        .map_err(|e| Error::Parse(format!("bad scenario block: {e}")))?;
        scenario.validate()?;
        let mode = peek_mode(v)?;
        if mode != S::MODE {
            return Err(Error::Parse(format!(
                "box is in {} mode, expected {}",
                mode.as_str(),
                S::MODE.as_str()
            )));
        }
        let raw = v
            .get("probs")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("missing \"probs\" array".into()))?;
        let probs = raw.iter().map(S::from_json).collect::<Result<Vec<S>>>()?;
        if let Some(i) = probs.iter().position(|p| p.is_negative()) {
            return Err(Error::Parse(format!("negative probability at index {i}")));
        }
        BellBox::new(scenario, probs)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_json(&serde_json::from_str(s)?)
    }
}

/// Reads the `"mode"` field of a box document (default rational).
pub fn peek_mode(v: &Value) -> Result<NumMode> {
    match v.get("mode") {
        None => Ok(NumMode::Rational),
        Some(Value::String(s)) => s.parse(),
        Some(other) => Err(Error::Parse(format!("bad mode {other}"))),
    }
}

/// Deterministic box with Alice answering `alice[x]` and Bob `bob[y]`.
pub fn deterministic_box<S: Scalar>(
    scenario: BellScenario,
    alice: &[usize],
    bob: &[usize],
) -> Result<BellBox<S>> {
    if alice.len() != scenario.ma || bob.len() != scenario.mb {
        return Err(Error::DimensionMismatch {
            expected: scenario.ma + scenario.mb,
            got: alice.len() + bob.len(),
        });
    }
    let mut probs = vec![S::zero(); scenario.num_events()];
    for x in 0..scenario.ma {
        for y in 0..scenario.mb {
            probs[scenario.flat(x, y, alice[x], bob[y])] = S::one();
        }
    }
    BellBox::new(scenario, probs)
}

/// Counts `n` in mixed radix with `digits` places of base `base`, least
/// significant place last.
fn digits_of(mut n: usize, base: usize, places: usize) -> Vec<usize> {
    let mut d = vec![0; places];
    for i in (0..places).rev() {
        d[i] = n % base;
        n /= base;
    }
    d
}

/// All `ka^ma * kb^mb` deterministic strategies as `(alice, bob)` output
/// tables, Alice's table varying slowest.
pub fn deterministic_strategies(
    scenario: BellScenario,
    cap: u128,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let needed = scenario.num_deterministic();
    if needed > cap {
        return Err(Error::CapExceeded { needed, cap });
    }
    let na = scenario.ka.pow(scenario.ma as u32);
    let nb = scenario.kb.pow(scenario.mb as u32);
    let mut out = Vec::with_capacity(na * nb);
    for i in 0..na {
        let alice = digits_of(i, scenario.ka, scenario.ma);
        for j in 0..nb {
            out.push((alice.clone(), digits_of(j, scenario.kb, scenario.mb)));
        }
    }
    Ok(out)
}

pub fn enumerate_local_deterministic<S: Scalar>(
    scenario: BellScenario,
    cap: u128,
) -> Result<Vec<BellBox<S>>> {
    deterministic_strategies(scenario, cap)?
        .into_iter()
        .map(|(a, b)| deterministic_box(scenario, &a, &b))
        .collect()
}

/// `P(a,b|x,y) = 1/k` iff `(b - a) mod k = x*y`, in the `(2,2,k)` scenario.
pub fn pr_box<S: Scalar>(k: usize) -> Result<BellBox<S>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("PR box needs k >= 2, got {k}")));
    }
    let sc = BellScenario::cglmp(k)?;
    let w = S::from_ratio(1, k as i64);
    let probs = sc
        .events()
        .map(|e| if pr_support(k, &e) { w.clone() } else { S::zero() })
        .collect();
    BellBox::new(sc, probs)
}

/// Winning condition of the `(2,2,k)` PR box.
pub fn pr_support(k: usize, e: &EventIndex) -> bool {
    (e.b + k - e.a) % k == (e.x * e.y) % k
}

/// Convex combination with weights summing exactly to one (within `tol` in
/// float mode).
pub fn mix<S: Scalar>(boxes: &[BellBox<S>], weights: &[S], tol: f64) -> Result<BellBox<S>> {
    if boxes.is_empty() || boxes.len() != weights.len() {
        return Err(Error::InvalidWeights(format!(
            "{} boxes with {} weights",
            boxes.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| w.is_neg(tol)) {
        return Err(Error::InvalidWeights("negative weight".into()));
    }
    let total = crate::scalar::sum(weights);
    if !(total.clone() - S::one()).is_negligible(tol) {
        return Err(Error::InvalidWeights(format!("weights sum to {total}, not 1")));
    }
    let sc = boxes[0].scenario;
    if boxes.iter().any(|b| b.scenario != sc) {
        return Err(Error::InvalidScenario("mixing boxes from different scenarios".into()));
    }
    let mut probs = vec![S::zero(); sc.num_events()];
    for (bx, w) in boxes.iter().zip(weights) {
        if w.is_zero() {
            continue;
        }
        for (p, q) in probs.iter_mut().zip(&bx.probs) {
            if !q.is_zero() {
                *p = p.clone() + w.clone() * q.clone();
            }
        }
    }
    BellBox::new(sc, probs)
}

/// Relabeling of inputs and outputs, stored as maps from new labels to old.
///
/// The relabeled box is `Q(a,b|x,y) = P(alpha[x][a], beta[y][b] | pi[x], sigma[y])`
/// with `pi = alice_inputs`, `sigma = bob_inputs`, `alpha = alice_outputs` and
/// `beta = bob_outputs`. Output maps are indexed by the new input.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Relabeling {
    pub alice_inputs: Vec<usize>,
    pub bob_inputs: Vec<usize>,
    pub alice_outputs: Vec<Vec<usize>>,
    pub bob_outputs: Vec<Vec<usize>>,
}

fn is_permutation(p: &[usize], n: usize) -> bool {
    let mut seen = vec![false; n];
    p.len() == n && p.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
}

impl Relabeling {
    pub fn identity(sc: &BellScenario) -> Self {
        Relabeling {
            alice_inputs: (0..sc.ma).collect(),
            bob_inputs: (0..sc.mb).collect(),
            alice_outputs: vec![(0..sc.ka).collect(); sc.ma],
            bob_outputs: vec![(0..sc.kb).collect(); sc.mb],
        }
    }

    pub fn validate(&self, sc: &BellScenario) -> Result<()> {
        let ok = is_permutation(&self.alice_inputs, sc.ma)
            && is_permutation(&self.bob_inputs, sc.mb)
            && self.alice_outputs.len() == sc.ma
            && self.bob_outputs.len() == sc.mb
            && self.alice_outputs.iter().all(|p| is_permutation(p, sc.ka))
            && self.bob_outputs.iter().all(|p| is_permutation(p, sc.kb));
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "relabeling does not match scenario {sc:?}"
            )))
        }
    }

    /// Flat index of the original event feeding relabeled event `(a,b|x,y)`.
    pub fn source_event(&self, sc: &BellScenario, x: usize, y: usize, a: usize, b: usize) -> usize {
        sc.flat(
            self.alice_inputs[x],
            self.bob_inputs[y],
            self.alice_outputs[x][a],
            self.bob_outputs[y][b],
        )
    }

    /// The relabeling `r` with `P.relabel(self).relabel(other) == P.relabel(r)`.
    pub fn then(&self, other: &Relabeling) -> Relabeling {
        Relabeling {
            alice_inputs: other.alice_inputs.iter().map(|&x| self.alice_inputs[x]).collect(),
            bob_inputs: other.bob_inputs.iter().map(|&y| self.bob_inputs[y]).collect(),
            alice_outputs: (0..other.alice_inputs.len())
                .map(|x| {
                    let inner = &self.alice_outputs[other.alice_inputs[x]];
                    other.alice_outputs[x].iter().map(|&a| inner[a]).collect()
                })
                .collect(),
            bob_outputs: (0..other.bob_inputs.len())
                .map(|y| {
                    let inner = &self.bob_outputs[other.bob_inputs[y]];
                    other.bob_outputs[y].iter().map(|&b| inner[b]).collect()
                })
                .collect(),
        }
    }

    /// Inverse map: `P.relabel(r).relabel(r.inverse()) == P`.
    pub fn inverse(&self) -> Relabeling {
        let inv = |p: &[usize]| {
            let mut q = vec![0; p.len()];
            for (i, &j) in p.iter().enumerate() {
                q[j] = i;
            }
            q
        };
        let pi_inv = inv(&self.alice_inputs);
        let sigma_inv = inv(&self.bob_inputs);
        Relabeling {
            alice_outputs: pi_inv.iter().map(|&x| inv(&self.alice_outputs[x])).collect(),
            bob_outputs: sigma_inv.iter().map(|&y| inv(&self.bob_outputs[y])).collect(),
            alice_inputs: pi_inv,
            bob_inputs: sigma_inv,
        }
    }
}

/// `E[x][y] = <A_x B_y>` for ±1 outcomes (outcome 0 ↦ +1).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorTable<S: Scalar> {
    pub e: Matrix<S>,
}

impl<S: Scalar> CorrelatorTable<S> {
    pub fn new(e: Matrix<S>, tol: f64) -> Result<Self> {
        let mb = e.first().map_or(0, |r| r.len());
        if e.is_empty() || e.iter().any(|r| r.len() != mb) {
            return Err(Error::InvalidParameter("ragged correlator table".into()));
        }
        if e.iter().flatten().any(|v| (v.abs() - S::one()).is_pos(tol)) {
            return Err(Error::InvalidParameter("correlator with |E| > 1".into()));
        }
        Ok(CorrelatorTable { e })
    }

    pub fn ma(&self) -> usize {
        self.e.len()
    }

    pub fn mb(&self) -> usize {
        self.e[0].len()
    }
}

pub fn correlators_of<S: Scalar>(bx: &BellBox<S>) -> Result<CorrelatorTable<S>> {
    let sc = bx.scenario;
    if !sc.is_binary() {
        return Err(Error::InvalidScenario("correlators need binary outcomes".into()));
    }
    let e = (0..sc.ma)
        .map(|x| {
            (0..sc.mb)
                .map(|y| {
                    bx.p(x, y, 0, 0).clone() + bx.p(x, y, 1, 1).clone()
                        - bx.p(x, y, 0, 1).clone()
                        - bx.p(x, y, 1, 0).clone()
                })
                .collect()
        })
        .collect();
    Ok(CorrelatorTable { e })
}

/// Box with unbiased marginals: `P(a,b|x,y) = (1 + (-1)^(a+b) E[x][y]) / 4`.
pub fn box_of_correlators<S: Scalar>(t: &CorrelatorTable<S>) -> Result<BellBox<S>> {
    let sc = BellScenario::new(t.ma(), t.mb(), 2, 2)?;
    let quarter = S::from_ratio(1, 4);
    let mut probs = vec![S::zero(); sc.num_events()];
    for e in sc.events() {
        let c = t.e[e.x][e.y].clone();
        let v = if (e.a + e.b) % 2 == 0 { S::one() + c } else { S::one() - c };
        probs[e.flat] = v * quarter.clone();
    }
    BellBox::new(sc, probs)
}
