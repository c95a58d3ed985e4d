use serde_json::{json, Value};

use crate::bell::BellBox;
use crate::error::{Error, Result};
use crate::linalg::{check_symmetric, is_psd, Matrix};
use crate::scalar::Scalar;
use crate::theta::graph::OrthogonalityGraph;

/// Symmetric matrix over a subset of events, zero-extended to the full
/// event set.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateMatrix<S: Scalar> {
    pub events: Vec<usize>,
    pub m: Matrix<S>,
}

impl<S: Scalar> CertificateMatrix<S> {
    pub fn new(events: Vec<usize>, m: Matrix<S>) -> Result<Self> {
        if m.len() != events.len() || m.iter().any(|r| r.len() != events.len()) {
            return Err(Error::DimensionMismatch { expected: events.len(), got: m.len() });
        }
        let mut sorted = events.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("repeated event in certificate".into()));
        }
        Ok(CertificateMatrix { events, m })
    }

    pub fn size(&self) -> usize {
        self.events.len()
    }

    /// `⟨P|M|P⟩ − Σ_i M_ii P_i`.
    pub fn value(&self, bx: &BellBox<S>) -> Result<S> {
        let n = bx.probs.len();
        if let Some(&e) = self.events.iter().find(|&&e| e >= n) {
            return Err(Error::InvalidParameter(format!("event {e} outside scenario")));
        }
        let p: Vec<S> = self.events.iter().map(|&e| bx.probs[e].clone()).collect();
        let mut v = S::zero();
        for (i, row) in self.m.iter().enumerate() {
            if p[i].is_zero() {
                continue;
            }
            let mut r = -row[i].clone();
            for (j, mij) in row.iter().enumerate() {
                if !mij.is_zero() && !p[j].is_zero() {
                    r = r + mij.clone() * p[j].clone();
                }
            }
            v = v + p[i].clone() * r;
        }
        Ok(v)
    }

    /// Off-diagonal entries vanish outside the orthogonality graph.
    pub fn support_ok(&self, graph: &OrthogonalityGraph, tol: f64) -> bool {
        let n = graph.num_vertices();
        if self.events.iter().any(|&e| e >= n) {
            return false;
        }
        self.events.iter().enumerate().all(|(i, &u)| {
            self.events.iter().enumerate().all(|(j, &v)| {
                i == j || graph.is_edge(u, v) || self.m[i][j].is_negligible(tol)
            })
        })
    }

    /// Support pattern and `M ⪰ 0`. Errors on an asymmetric matrix.
    pub fn is_valid(&self, graph: &OrthogonalityGraph, tol: f64) -> Result<bool> {
        check_symmetric(&self.m, tol)?;
        Ok(self.support_ok(graph, tol) && is_psd(&self.m, tol)?)
    }

    pub fn scaled(&self, lambda: &S) -> Self {
        CertificateMatrix {
            events: self.events.clone(),
            m: self
                .m
                .iter()
                .map(|r| r.iter().map(|v| v.clone() * lambda.clone()).collect())
                .collect(),
        }
    }

    /// Dense `|V| × |V|` matrix.
    pub fn to_full(&self, n: usize) -> Matrix<S> {
        let mut full = vec![vec![S::zero(); n]; n];
        for (i, &u) in self.events.iter().enumerate() {
            for (j, &v) in self.events.iter().enumerate() {
                full[u][v] = self.m[i][j].clone();
            }
        }
        full
    }

    /// `{"events": [...], "entries": [[i, j, value], ...]}`, upper triangle
    /// including the diagonal, indices into `events`.
    pub fn to_json(&self) -> Value {
        let mut entries = Vec::new();
        for i in 0..self.size() {
            for j in i..self.size() {
                if !self.m[i][j].is_zero() {
                    entries.push(json!([i, j, self.m[i][j].to_json()]));
                }
            }
        }
        json!({ "events": self.events, "entries": entries })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let events: Vec<usize> = serde_json::from_value(
            v.get("events").cloned().ok_or_else(|| Error::Parse("missing \"events\"".into()))?,
        )?;
        let n = events.len();
        let mut m = vec![vec![S::zero(); n]; n];
        let entries = v
            .get("entries")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("missing \"entries\"".into()))?;
        for e in entries {
            let t = e.as_array().filter(|t| t.len() == 3).ok_or_else(|| {
                Error::Parse(format!("entry {e} is not [i, j, value]"))
            })?;
            let idx = |k: usize| {
                t[k].as_u64()
                    .map(|i| i as usize)
                    .filter(|&i| i < n)
                    .ok_or_else(|| Error::Parse(format!("bad index in {e}")))
            };
            let (i, j) = (idx(0)?, idx(1)?);
            let val = S::from_json(&t[2])?;
            m[i][j] = val.clone();
            m[j][i] = val;
        }
        Self::new(events, m)
    }
}
