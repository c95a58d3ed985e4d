//! Chained sequences: cyclic lists of event sets in which adjacent elements
//! are locally orthogonal, with per-pair normalization bookkeeping.

use crate::bell::{pr_support, BellBox, BellScenario, Relabeling};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Event cap for exhaustive singleton searches.
pub const DEFAULT_SEARCH_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChainedSequence {
    /// Each element is a nonempty set of flat event indices.
    pub elements: Vec<Vec<usize>>,
}

impl ChainedSequence {
    pub fn new(elements: Vec<Vec<usize>>) -> Self {
        ChainedSequence { elements }
    }

    pub fn singletons(events: &[usize]) -> Self {
        Self::new(events.iter().map(|&e| vec![e]).collect())
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn is_composite(&self) -> bool {
        self.elements.iter().any(|e| e.len() > 1)
    }

    /// Element masses `p_i = Σ_j p_{i,j}`.
    pub fn masses<S: Scalar>(&self, bx: &BellBox<S>) -> Vec<S> {
        self.elements
            .iter()
            .map(|el| el.iter().fold(S::zero(), |s, &e| s + bx.probs[e].clone()))
            .collect()
    }

    /// `saturated[i]` iff `p_i + p_{i+1} = 1` (cyclically).
    pub fn saturation<S: Scalar>(&self, bx: &BellBox<S>, tol: f64) -> Vec<bool> {
        let q = self.masses(bx);
        let n = q.len();
        (0..n)
            .map(|i| (q[i].clone() + q[(i + 1) % n].clone() - S::one()).is_negligible(tol))
            .collect()
    }

    pub fn unsaturated_count<S: Scalar>(&self, bx: &BellBox<S>, tol: f64) -> usize {
        self.saturation(bx, tol).iter().filter(|s| !**s).count()
    }

    /// Every sub-event of `p_i` is orthogonal to every sub-event of `p_j`.
    pub fn elements_orthogonal(&self, sc: &BellScenario, i: usize, j: usize) -> bool {
        self.elements[i]
            .iter()
            .all(|&u| self.elements[j].iter().all(|&v| sc.locally_orthogonal(u, v)))
    }

    /// Adjacent elements orthogonal, sub-events distinct, composite elements
    /// internally orthogonal.
    pub fn is_well_formed(&self, sc: &BellScenario) -> bool {
        let n = self.len();
        if n < 3 || self.elements.iter().any(|e| e.is_empty()) {
            return false;
        }
        let mut all: Vec<usize> = self.elements.iter().flatten().cloned().collect();
        let total = all.len();
        all.sort_unstable();
        all.dedup();
        if all.len() != total || all.iter().any(|&e| e >= sc.num_events()) {
            return false;
        }
        let internal = self.elements.iter().all(|el| {
            el.iter().enumerate().all(|(i, &u)| el[i + 1..].iter().all(|&v| sc.locally_orthogonal(u, v)))
        });
        internal && (0..n).all(|i| self.elements_orthogonal(sc, i, (i + 1) % n))
    }

    /// Maps events through a relabeling: the chain read on
    /// `bx.apply_relabeling(rel)` becomes this chain read on `bx`.
    pub fn pull_back(&self, sc: &BellScenario, rel: &Relabeling) -> Self {
        Self::new(
            self.elements
                .iter()
                .map(|el| {
                    el.iter()
                        .map(|&u| {
                            let e = sc.event(u);
                            rel.source_event(sc, e.x, e.y, e.a, e.b)
                        })
                        .collect()
                })
                .collect(),
        )
    }

    /// Rotation by `shift` and optional reversal of the cyclic order.
    pub fn oriented(&self, shift: usize, reverse: bool) -> Self {
        let n = self.len();
        Self::new(
            (0..n)
                .map(|i| {
                    let j = if reverse { (shift + n - i) % n } else { (shift + i) % n };
                    self.elements[j].clone()
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainMode {
    /// Singleton elements, every adjacent pair saturated.
    Saturated,
    /// Singleton elements, exactly `n` unsaturated pairs.
    Unsaturated(usize),
    /// Composite elements allowed, exactly `n` unsaturated pairs.
    Composite(usize),
}

/// Searches for a chained sequence of the given length.
///
/// Singleton modes run an exhaustive depth-first search over event cycles in
/// ascending flat order, rooted at the smallest event of the cycle. Composite
/// mode searches cycles of same-setting event sets supported on positive
/// entries when the scenario has at most four events per setting, and
/// otherwise tries the canonical `PR^(k)` composite chains under every
/// PR-compatible relabeling.
pub fn find_chained_sequence<S: Scalar>(
    bx: &BellBox<S>,
    length: usize,
    mode: ChainMode,
    tol: f64,
) -> Result<Option<ChainedSequence>> {
    if length < 3 {
        return Err(Error::InvalidParameter(format!("chain length {length} < 3")));
    }
    let sc = bx.scenario;
    match mode {
        ChainMode::Saturated | ChainMode::Unsaturated(_) => {
            if sc.num_events() > DEFAULT_SEARCH_CAP {
                return Err(Error::CapExceeded {
                    needed: sc.num_events() as u128,
                    cap: DEFAULT_SEARCH_CAP as u128,
                });
            }
            let budget = match mode {
                ChainMode::Unsaturated(n) => n,
                _ => 0,
            };
            let elements: Vec<Vec<usize>> = (0..sc.num_events()).map(|e| vec![e]).collect();
            Ok(cycle_search(bx, &elements, length, budget, tol))
        }
        ChainMode::Composite(n) => {
            if sc.ka * sc.kb <= 4 {
                let elements = same_setting_subsets(bx, tol);
                return Ok(cycle_search(bx, &elements, length, n, tol));
            }
            if length != 5 || sc.ma != 2 || sc.mb != 2 || sc.ka != sc.kb {
                return Ok(None);
            }
            for rel in pr_compatible_relabelings(bx, tol) {
                for canon in canonical_composite_chains(sc.ka) {
                    let chain = canon.pull_back(&sc, &rel);
                    if chain.unsaturated_count(bx, tol) == n {
                        return Ok(Some(chain));
                    }
                }
            }
            Ok(None)
        }
    }
}

/// Nonempty subsets of the positive events of each setting.
fn same_setting_subsets<S: Scalar>(bx: &BellBox<S>, tol: f64) -> Vec<Vec<usize>> {
    let sc = bx.scenario;
    let mut out = Vec::new();
    for x in 0..sc.ma {
        for y in 0..sc.mb {
            let pos: Vec<usize> = (0..sc.ka)
                .flat_map(|a| (0..sc.kb).map(move |b| (a, b)))
                .map(|(a, b)| sc.flat(x, y, a, b))
                .filter(|&e| bx.probs[e].is_pos(tol))
                .collect();
            for mask in 1u32..(1 << pos.len()) {
                out.push(
                    pos.iter()
                        .enumerate()
                        .filter(|(i, _)| mask >> i & 1 == 1)
                        .map(|(_, &e)| e)
                        .collect(),
                );
            }
        }
    }
    out
}

fn cycle_search<S: Scalar>(
    bx: &BellBox<S>,
    elements: &[Vec<usize>],
    length: usize,
    budget: usize,
    tol: f64,
) -> Option<ChainedSequence> {
    let sc = bx.scenario;
    let n = elements.len();
    let mass: Vec<S> = elements
        .iter()
        .map(|el| el.iter().fold(S::zero(), |s, &e| s + bx.probs[e].clone()))
        .collect();
    let orth: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    elements[i].iter().all(|&u| {
                        elements[j].iter().all(|&v| u != v && sc.locally_orthogonal(u, v))
                    })
                })
                .collect()
        })
        .collect();
    let saturated = |i: usize, j: usize| {
        (mass[i].clone() + mass[j].clone() - S::one()).is_negligible(tol)
    };
    let mut path = Vec::with_capacity(length);
    let mut used = vec![false; sc.num_events()];
    for start in 0..n {
        path.clear();
        path.push(start);
        for &e in &elements[start] {
            used[e] = true;
        }
        let found = dfs(&mut path, &mut used, elements, &orth, &saturated, length, budget, 0, start);
        for &e in &elements[start] {
            used[e] = false;
        }
        if found {
            return Some(ChainedSequence::new(path.iter().map(|&i| elements[i].clone()).collect()));
        }
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    path: &mut Vec<usize>,
    used: &mut [bool],
    elements: &[Vec<usize>],
    orth: &[Vec<bool>],
    saturated: &dyn Fn(usize, usize) -> bool,
    length: usize,
    budget: usize,
    spent: usize,
    start: usize,
) -> bool {
    let last = *path.last().unwrap();
    if path.len() == length {
        if !orth[last][start] {
            return false;
        }
        let total = spent + usize::from(!saturated(last, start));
        return total == budget;
    }
    for next in start + 1..elements.len() {
        if !orth[last][next] || elements[next].iter().any(|&e| used[e]) {
            continue;
        }
        let cost = spent + usize::from(!saturated(last, next));
        if cost > budget {
            continue;
        }
        path.push(next);
        for &e in &elements[next] {
            used[e] = true;
        }
        let found = dfs(path, used, elements, orth, saturated, length, budget, cost, start);
        for &e in &elements[next] {
            used[e] = false;
        }
        if found {
            return true;
        }
        path.pop();
    }
    false
}

/// Relabelings under which every `PR^(k)` support event of the relabeled box
/// carries positive probability.
pub fn pr_compatible_relabelings<S: Scalar>(bx: &BellBox<S>, tol: f64) -> Vec<Relabeling> {
    let sc = bx.scenario;
    if sc.ma != 2 || sc.mb != 2 || sc.ka != sc.kb {
        return Vec::new();
    }
    let k = sc.ka;
    let pos = |x: usize, y: usize, a: usize, b: usize| bx.probs[sc.flat(x, y, a, b)].is_pos(tol);
    let perms = permutations(k);
    let mut out = Vec::new();
    for pi in [[0, 1], [1, 0]] {
        for sigma in [[0, 1], [1, 0]] {
            for al0 in &perms {
                for be0 in &perms {
                    if !(0..k).all(|a| pos(pi[0], sigma[0], al0[a], be0[a])) {
                        continue;
                    }
                    for al1 in &perms {
                        if !(0..k).all(|a| pos(pi[1], sigma[0], al1[a], be0[a])) {
                            continue;
                        }
                        for be1 in &perms {
                            if !(0..k).all(|a| pos(pi[0], sigma[1], al0[a], be1[a])) {
                                continue;
                            }
                            if !(0..k).all(|a| pos(pi[1], sigma[1], al1[a], be1[(a + 1) % k])) {
                                continue;
                            }
                            out.push(Relabeling {
                                alice_inputs: pi.to_vec(),
                                bob_inputs: sigma.to_vec(),
                                alice_outputs: vec![al0.clone(), al1.clone()],
                                bob_outputs: vec![be0.clone(), be1.clone()],
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

/// The composite five-element chains laid over the `PR^(k)` support:
///
/// * `p1 = (0,0|0,0)`
/// * `p2 = {(a,b|0,0) : a,b >= 1}`, optionally with some `(a,0|0,0)`, `a >= 1`
/// * `p3 = (0,0|0,1)`
/// * `p4 = {(a,b|1,1) : a <= k-2, b >= 1}`
/// * `p5 = (k-1,k-1|1,0)`
///
/// followed by the same family under the party swap
/// `(a,b|x,y) ↦ (-b, -a | y, x)` (outputs mod `k`), which fixes `PR^(k)`.
/// For `k = 2` the base chain is `(0,0|0,0), (1,1|0,0), (0,0|0,1), (0,1|1,1), (1,1|1,0)`.
pub fn canonical_composite_chains(k: usize) -> Vec<ChainedSequence> {
    let sc = BellScenario { ma: 2, mb: 2, ka: k, kb: k };
    let p1 = vec![sc.flat(0, 0, 0, 0)];
    let p3 = vec![sc.flat(0, 1, 0, 0)];
    let p5 = vec![sc.flat(1, 0, k - 1, k - 1)];
    let p4: Vec<usize> = (0..k - 1)
        .flat_map(|a| (1..k).map(move |b| (a, b)))
        .map(|(a, b)| sc.flat(1, 1, a, b))
        .collect();
    let block: Vec<usize> = (1..k)
        .flat_map(|a| (1..k).map(move |b| (a, b)))
        .map(|(a, b)| sc.flat(0, 0, a, b))
        .collect();
    let ext: Vec<usize> = (1..k).map(|a| sc.flat(0, 0, a, 0)).collect();
    let mut base = Vec::new();
    for mask in 0u32..(1 << ext.len()) {
        let mut p2 = block.clone();
        p2.extend(ext.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &e)| e));
        base.push(ChainedSequence::new(vec![
            p1.clone(),
            p2,
            p3.clone(),
            p4.clone(),
            p5.clone(),
        ]));
    }
    let swap = |u: usize| {
        let e = sc.event(u);
        sc.flat(e.y, e.x, (k - e.b) % k, (k - e.a) % k)
    };
    let swapped: Vec<ChainedSequence> = base
        .iter()
        .map(|c| {
            ChainedSequence::new(
                c.elements.iter().map(|el| el.iter().map(|&u| swap(u)).collect()).collect(),
            )
        })
        .collect();
    base.extend(swapped);
    base
}

/// True when every event of the chain lies in the support of `PR^(k)`, apart
/// from the optional `(a,0|0,0)` extensions and their swapped images.
pub fn on_pr_support(k: usize, chain: &ChainedSequence) -> bool {
    let sc = BellScenario { ma: 2, mb: 2, ka: k, kb: k };
    chain.elements.iter().flatten().all(|&u| pr_support(k, &sc.event(u)))
}
