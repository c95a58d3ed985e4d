//! Five-element certificate templates over chained sequences.
//!
//! Each template is a 5×5 matrix indexed by chain elements. It is expanded to
//! events by giving every sub-event of an element the element's row, i.e.
//! `M = E M₅ Eᵀ` with `E` the element-indicator matrix. The `f·|i,i+1⟩⟨i,i+1|`
//! parts contribute nothing exactly when `p_i + p_{i+1} = 1`, which is why
//! each template lists the pairs it needs saturated.

use crate::error::{Error, Result};
use crate::linalg::{ldlt_is_psd, zeros, Matrix};
use crate::scalar::Scalar;
use crate::theta::cert::CertificateMatrix;
use crate::theta::chain::ChainedSequence;

#[derive(Debug, Clone, PartialEq)]
pub enum Template<S: Scalar> {
    /// All five pairs saturated, minus `eps` on the first diagonal entry.
    M0 { eps: S },
    /// Pair `(5,1)` unsaturated.
    M1 { k: usize },
    /// Pairs `(4,5)` and `(5,1)` unsaturated.
    M21 { k: usize, c: S },
    /// Pairs `(3,4)` and `(5,1)` unsaturated.
    M22 { k: usize, c: S },
    /// Pairs `(3,4)`, `(4,5)` and `(5,1)` unsaturated.
    M31 { k: usize, c: S },
    /// Pairs `(1,2)`, `(4,5)` and `(5,1)` unsaturated.
    M32 { k: usize, c: S },
}

/// Default `eps` for `M0`.
pub fn default_eps<S: Scalar>() -> S {
    S::from_ratio(1, 10)
}

impl<S: Scalar> Template<S> {
    pub fn name(&self) -> String {
        match self {
            Template::M0 { .. } => "M0".into(),
            Template::M1 { k: 2 } => "M1".into(),
            Template::M21 { k: 2, .. } => "M21".into(),
            Template::M22 { k: 2, .. } => "M22".into(),
            Template::M31 { k: 2, .. } => "M3".into(),
            Template::M1 { .. } => "M1_k".into(),
            Template::M21 { .. } => "M21_k".into(),
            Template::M22 { .. } => "M22_k".into(),
            Template::M31 { .. } => "M31_k".into(),
            Template::M32 { .. } => "M32_k".into(),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Template::M0 { .. } => 2,
            Template::M1 { k }
            | Template::M21 { k, .. }
            | Template::M22 { k, .. }
            | Template::M31 { k, .. }
            | Template::M32 { k, .. } => *k,
        }
    }

    pub fn c_ns(&self) -> Option<&S> {
        match self {
            Template::M21 { c, .. }
            | Template::M22 { c, .. }
            | Template::M31 { c, .. }
            | Template::M32 { c, .. } => Some(c),
            _ => None,
        }
    }

    /// Pair `i` stands for elements `(i, i+1 mod 5)`, 0-based.
    pub fn saturated_pairs(&self) -> &'static [usize] {
        match self {
            Template::M0 { .. } => &[0, 1, 2, 3, 4],
            Template::M1 { .. } => &[0, 1, 2, 3],
            Template::M21 { .. } => &[0, 1, 2],
            Template::M22 { .. } => &[0, 1, 3],
            Template::M31 { .. } => &[0, 1],
            Template::M32 { .. } => &[1, 2],
        }
    }

    /// Checks parameter ranges and, for `M0`, that `eps` keeps it PSD.
    pub fn validate(&self) -> Result<()> {
        if self.k() < 2 {
            return Err(Error::InvalidParameter(format!("k = {} < 2", self.k())));
        }
        if let Some(c) = self.c_ns() {
            if !c.is_positive() || *c >= S::one() {
                return Err(Error::InvalidParameter(format!("c_NS = {c} not in (0, 1)")));
            }
        }
        if let Template::M0 { eps } = self {
            if !eps.is_positive() {
                return Err(Error::InvalidParameter("eps must be positive".into()));
            }
            if !ldlt_is_psd(&self.element_matrix(), 0.0)? {
                return Err(Error::InvalidParameter(format!("eps = {eps} too large for M0")));
            }
        }
        Ok(())
    }

    /// The 5×5 element-level matrix.
    pub fn element_matrix(&self) -> Matrix<S> {
        let mut m: Matrix<S> = zeros(5, 5);
        let int = |v: i64| S::from_ratio(v, 1);
        let add_pairs = |m: &mut Matrix<S>, w: &S, pairs: &[usize]| {
            for &p in pairs {
                let (i, j) = (p, (p + 1) % 5);
                for (a, b) in [(i, i), (j, j), (i, j), (j, i)] {
                    m[a][b] = m[a][b].clone() + w.clone();
                }
            }
        };
        let add = |m: &mut Matrix<S>, w: &S, i: usize, j: usize| {
            m[i][j] = m[i][j].clone() + w.clone();
            if i != j {
                m[j][i] = m[j][i].clone() + w.clone();
            }
        };
        match self {
            Template::M0 { eps } => {
                add_pairs(&mut m, &S::one(), &[0, 1, 2, 3, 4]);
                add(&mut m, &-eps.clone(), 0, 0);
            }
            Template::M1 { .. } => {
                add_pairs(&mut m, &int(4), &[0, 1, 2, 3]);
                add(&mut m, &S::one(), 0, 4);
            }
            Template::M21 { k, c } => {
                let (f, kc, c2) = coefficients(*k, c);
                add_pairs(&mut m, &f, &[0, 1, 2]);
                add(&mut m, &c2, 0, 0);
                add(&mut m, &c2, 3, 3);
                add(&mut m, &(c2.clone() * int(2)), 4, 4);
                add(&mut m, &kc, 0, 4);
                add(&mut m, &kc, 3, 4);
            }
            Template::M22 { k, c } => {
                let (f, kc, c2) = coefficients(*k, c);
                add_pairs(&mut m, &f, &[0, 1, 3]);
                for i in [0, 2, 3, 4] {
                    add(&mut m, &c2, i, i);
                }
                add(&mut m, &kc, 0, 3);
                add(&mut m, &kc, 2, 4);
            }
            Template::M31 { k, c } => {
                let (f, kc, c2) = coefficients(*k, c);
                let half = kc.clone() / int(2);
                add_pairs(&mut m, &f, &[0, 1]);
                add(&mut m, &half, 0, 0);
                add(&mut m, &half, 2, 2);
                add(&mut m, &(kc.clone() + c2.clone()), 3, 3);
                add(&mut m, &(kc.clone() + c2), 4, 4);
                add(&mut m, &kc, 0, 4);
                add(&mut m, &kc, 2, 3);
                add(&mut m, &kc, 3, 4);
            }
            Template::M32 { k, c } => {
                let (f, kc, c2) = coefficients(*k, c);
                let half = kc.clone() / int(2);
                add_pairs(&mut m, &f, &[1, 2]);
                add(&mut m, &half, 1, 1);
                add(&mut m, &half, 3, 3);
                add(&mut m, &(kc.clone() + c2.clone()), 4, 4);
                add(&mut m, &(kc.clone() + c2), 0, 0);
                add(&mut m, &kc, 0, 1);
                add(&mut m, &kc, 3, 4);
                add(&mut m, &kc, 4, 0);
            }
        }
        m
    }

    /// Element pairs with a nonzero off-diagonal entry; their sub-events must
    /// be mutually orthogonal.
    pub fn coupled_pairs(&self) -> Vec<(usize, usize)> {
        let m = self.element_matrix();
        let mut out = Vec::new();
        for i in 0..5 {
            for j in i + 1..5 {
                if !m[i][j].is_zero() {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// `qᵀM₅q − Σ_e M₅[e][e] q_e` for element masses `q`.
    pub fn element_value(&self, q: &[S]) -> S {
        element_value(&self.element_matrix(), q)
    }
}

/// `(k³, k·c, c²)`.
fn coefficients<S: Scalar>(k: usize, c: &S) -> (S, S, S) {
    let k = S::from_ratio(k as i64, 1);
    (k.clone() * k.clone() * k.clone(), k * c.clone(), c.clone() * c.clone())
}

pub fn element_value<S: Scalar>(m: &Matrix<S>, q: &[S]) -> S {
    let mut v = S::zero();
    for i in 0..m.len() {
        let mut r = -m[i][i].clone();
        for j in 0..m.len() {
            r = r + m[i][j].clone() * q[j].clone();
        }
        v = v + q[i].clone() * r;
    }
    v
}

/// Expands a template over a five-element chain into an event-level
/// certificate.
pub fn build_certificate<S: Scalar>(
    template: &Template<S>,
    chain: &ChainedSequence,
) -> Result<CertificateMatrix<S>> {
    template.validate()?;
    if chain.len() != 5 {
        return Err(Error::InvalidParameter(format!(
            "templates need a 5-element chain, got {}",
            chain.len()
        )));
    }
    let m5 = template.element_matrix();
    let mut events = Vec::new();
    let mut owner = Vec::new();
    for (e, el) in chain.elements.iter().enumerate() {
        for &u in el {
            events.push(u);
            owner.push(e);
        }
    }
    let m = owner
        .iter()
        .map(|&i| owner.iter().map(|&j| m5[i][j].clone()).collect())
        .collect();
    CertificateMatrix::new(events, m)
}
