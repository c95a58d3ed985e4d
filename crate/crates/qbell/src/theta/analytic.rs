//! Case analysis over the five-element templates.
//!
//! Every candidate chain is a canonical composite chain (or, for `M0`, a
//! saturated singleton 5-cycle) pulled back through a PR-compatible
//! relabeling and read in one of its ten dihedral orientations. A template
//! fires when its required pairs are saturated, its coupled elements are
//! orthogonal and its value is strictly positive. The certificate is then
//! rebuilt over the original events and checked exactly before it is
//! reported.

use std::cell::OnceCell;
use std::marker::PhantomData;

use serde_json::{json, Value};

use crate::bell::{pr_support, BellBox, BellScenario, Relabeling};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::theta::cert::CertificateMatrix;
use crate::theta::chain::{
    canonical_composite_chains, find_chained_sequence, pr_compatible_relabelings, ChainMode,
    ChainedSequence, DEFAULT_SEARCH_CAP,
};
use crate::theta::graph::{build_orthogonality_graph, OrthogonalityGraph};
use crate::theta::templates::{build_certificate, default_eps, Template};

/// Grid of `c` values tried when no hint fires.
const C_GRID: [i64; 19] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19];

#[derive(Debug, Clone)]
pub struct AnalyticReport<S: Scalar> {
    pub excluded: bool,
    pub template: Option<String>,
    pub value: Option<S>,
    pub chain: Option<ChainedSequence>,
    pub relabeling: Option<Relabeling>,
    pub c_ns: Option<S>,
    /// Element masses in template order.
    pub masses: Vec<S>,
    /// Saturation of pair `(i, i+1)` in template order, read off the box.
    pub saturated: Vec<bool>,
    pub certificate: Option<CertificateMatrix<S>>,
}

impl<S: Scalar> AnalyticReport<S> {
    fn not_excluded() -> Self {
        AnalyticReport {
            excluded: false,
            template: None,
            value: None,
            chain: None,
            relabeling: None,
            c_ns: None,
            masses: Vec::new(),
            saturated: Vec::new(),
            certificate: None,
        }
    }

    pub fn unsaturated_count(&self) -> usize {
        self.saturated.iter().filter(|s| !**s).count()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "excluded": self.excluded,
            "template": self.template,
            "value": self.value.as_ref().map(Scalar::to_json),
            "chain": self.chain.as_ref().map(|c| c.elements.clone()),
            "relabeling": self.relabeling,
            "c_ns": self.c_ns.as_ref().map(Scalar::to_json),
            "masses": self.masses.iter().map(Scalar::to_json).collect::<Vec<_>>(),
            "saturated": self.saturated,
            "unsaturated_pairs": self.unsaturated_count(),
            "certificate": self.certificate.as_ref().map(CertificateMatrix::to_json),
        })
    }
}

struct Candidate {
    chain: ChainedSequence,
    relabeling: Option<Relabeling>,
    /// Estimated `c` in millionths.
    c_guess: Option<i64>,
}

#[derive(Clone, Copy)]
enum Kind {
    M0,
    M1,
    M21,
    M22,
    M31,
    M32,
}

fn make_template<S: Scalar>(kind: Kind, k: usize, c: &S) -> Template<S> {
    let c = c.clone();
    match kind {
        Kind::M0 => Template::M0 { eps: default_eps() },
        Kind::M1 => Template::M1 { k },
        Kind::M21 => Template::M21 { k, c },
        Kind::M22 => Template::M22 { k, c },
        Kind::M31 => Template::M31 { k, c },
        Kind::M32 => Template::M32 { k, c },
    }
}

/// Runs the template case analysis on `bx`.
///
/// `c_hint` is the PR weight when the box is known to lie on a face; without
/// it the weight is estimated from the relabeled box and then a grid of
/// multiples of 1/20 is tried. Boxes outside the `(2,2,k)` scenarios are
/// reported as not excluded.
pub fn exclude_by_analytic<S: Scalar>(
    bx: &BellBox<S>,
    c_hint: Option<&S>,
    tol: f64,
) -> Result<AnalyticReport<S>> {
    let sc = bx.scenario;
    if sc.ma != 2 || sc.mb != 2 || sc.ka != sc.kb {
        return Ok(AnalyticReport::not_excluded());
    }
    let k = sc.ka;
    let graph = build_orthogonality_graph(sc);
    let candidates = candidates(bx, c_hint.is_none(), tol)?;
    let probs: Vec<f64> = bx.probs.iter().map(Scalar::to_f64).collect();
    let views: Vec<Vec<View<S>>> = candidates
        .iter()
        .map(|cand| {
            (0..5)
                .flat_map(|shift| [false, true].map(|reverse| (shift, reverse)))
                .map(|(shift, reverse)| View::new(cand.chain.oriented(shift, reverse), &sc, &probs, tol))
                .collect()
        })
        .collect();
    let kinds = [Kind::M0, Kind::M1, Kind::M21, Kind::M22, Kind::M31, Kind::M32];
    for kind in kinds {
        for (cand, cand_views) in candidates.iter().zip(&views) {
            let cs: Vec<S> = match kind {
                Kind::M0 | Kind::M1 => vec![S::from_ratio(1, 2)],
                _ => c_values(c_hint, cand.c_guess),
            };
            for c in &cs {
                let template = make_template(kind, k, c);
                let m5 = template.element_matrix();
                let m5f: Vec<Vec<f64>> =
                    m5.iter().map(|row| row.iter().map(Scalar::to_f64).collect()).collect();
                for view in cand_views {
                    if let Some(rep) =
                        try_template(bx, &graph, &template, &m5f, view, &cand.relabeling, tol)?
                    {
                        return Ok(rep);
                    }
                }
            }
        }
    }
    Ok(AnalyticReport::not_excluded())
}

/// One orientation of a candidate chain. Exact saturation is computed on
/// first use; the float masses screen out pairs that are clearly not
/// saturated.
struct View<S: Scalar> {
    chain: ChainedSequence,
    approx: Vec<f64>,
    maybe_saturated: [bool; 5],
    saturated: OnceCell<Vec<bool>>,
    orthogonal: [[bool; 5]; 5],
    _scalar: PhantomData<S>,
}

impl<S: Scalar> View<S> {
    fn new(chain: ChainedSequence, sc: &BellScenario, probs: &[f64], tol: f64) -> Self {
        let approx: Vec<f64> =
            chain.elements.iter().map(|el| el.iter().map(|&e| probs[e]).sum()).collect();
        let mut maybe_saturated = [false; 5];
        for (i, m) in maybe_saturated.iter_mut().enumerate() {
            *m = (approx[i] + approx[(i + 1) % 5] - 1.0).abs() <= tol + 1e-9;
        }
        let mut orthogonal = [[false; 5]; 5];
        for (i, row) in orthogonal.iter_mut().enumerate() {
            for (j, o) in row.iter_mut().enumerate() {
                *o = i != j && chain.elements_orthogonal(sc, i, j);
            }
        }
        View {
            chain,
            approx,
            maybe_saturated,
            saturated: OnceCell::new(),
            orthogonal,
            _scalar: PhantomData,
        }
    }

    fn saturated(&self, bx: &BellBox<S>, tol: f64) -> &[bool] {
        self.saturated.get_or_init(|| self.chain.saturation(bx, tol))
    }
}

fn c_values<S: Scalar>(hint: Option<&S>, guess: Option<i64>) -> Vec<S> {
    if let Some(h) = hint {
        return vec![h.clone()];
    }
    let mut out = Vec::new();
    if let Some(g) = guess {
        out.push(S::from_ratio(g, 1_000_000));
    }
    out.extend(C_GRID.iter().map(|&n| S::from_ratio(n, 20)));
    out
}

fn candidates<S: Scalar>(bx: &BellBox<S>, guess_c: bool, tol: f64) -> Result<Vec<Candidate>> {
    let sc = bx.scenario;
    let k = sc.ka;
    let mut out = Vec::new();
    if sc.num_events() <= DEFAULT_SEARCH_CAP {
        if let Some(chain) = find_chained_sequence(bx, 5, ChainMode::Saturated, tol)? {
            out.push(Candidate { chain, relabeling: None, c_guess: None });
        }
    }
    let canon = canonical_composite_chains(k);
    for rel in pr_compatible_relabelings(bx, tol) {
        let c_guess = if guess_c {
            let min_support = sc
                .events()
                .filter(|e| pr_support(k, e))
                .map(|e| bx.probs[rel.source_event(&sc, e.x, e.y, e.a, e.b)].to_f64())
                .fold(f64::INFINITY, f64::min);
            let guess = (min_support * k as f64 * 1e6).round() as i64;
            (guess > 0 && guess < 1_000_000).then_some(guess)
        } else {
            None
        };
        for ch in &canon {
            out.push(Candidate {
                chain: ch.pull_back(&sc, &rel),
                relabeling: Some(rel.clone()),
                c_guess,
            });
        }
    }
    Ok(out)
}

fn try_template<S: Scalar>(
    bx: &BellBox<S>,
    graph: &OrthogonalityGraph,
    template: &Template<S>,
    m5f: &[Vec<f64>],
    view: &View<S>,
    relabeling: &Option<Relabeling>,
    tol: f64,
) -> Result<Option<AnalyticReport<S>>> {
    let required = template.saturated_pairs();
    if required.iter().any(|&i| !view.maybe_saturated[i]) {
        return Ok(None);
    }
    if template.coupled_pairs().iter().any(|&(i, j)| !view.orthogonal[i][j]) {
        return Ok(None);
    }
    let approx = &view.approx;
    let mut v = 0.0;
    for i in 0..5 {
        v -= m5f[i][i] * approx[i];
        for j in 0..5 {
            v += m5f[i][j] * approx[i] * approx[j];
        }
    }
    if v <= -1e-9 {
        return Ok(None);
    }
    if required.iter().any(|&i| !view.saturated(bx, tol)[i]) {
        return Ok(None);
    }
    let masses = view.chain.masses(bx);
    let chain = &view.chain;
    let value = template.element_value(&masses);
    if !value.is_pos(tol) {
        return Ok(None);
    }
    let cert = build_certificate(template, chain)?;
    if !cert.is_valid(graph, tol)? {
        return Ok(None);
    }
    let direct = cert.value(bx)?;
    if !direct.approx_eq(&value, tol) {
        return Ok(None);
    }
    Ok(Some(AnalyticReport {
        excluded: true,
        template: Some(template.name()),
        value: Some(direct),
        chain: Some(chain.clone()),
        relabeling: relabeling.clone(),
        c_ns: template.c_ns().cloned(),
        masses,
        saturated: view.saturated(bx, tol).to_vec(),
        certificate: Some(cert),
    }))
}
