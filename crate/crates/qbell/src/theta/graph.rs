use crate::bell::BellScenario;
use crate::error::{Error, Result};

/// Default vertex cap for clique enumeration (one `u64` bitset).
pub const DEFAULT_CLIQUE_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrthogonalityGraph {
    pub scenario: BellScenario,
    pub adj: Vec<Vec<bool>>,
}

pub fn build_orthogonality_graph(scenario: BellScenario) -> OrthogonalityGraph {
    let n = scenario.num_events();
    let adj = (0..n)
        .map(|u| (0..n).map(|v| u != v && scenario.locally_orthogonal(u, v)).collect())
        .collect();
    OrthogonalityGraph { scenario, adj }
}

impl OrthogonalityGraph {
    pub fn num_vertices(&self) -> usize {
        self.adj.len()
    }

    pub fn is_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u][v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].iter().filter(|&&e| e).count()
    }

    pub fn maximal_cliques(&self, cap: usize) -> Result<Vec<Vec<usize>>> {
        maximal_cliques(&self.adj, cap)
    }
}

/// All maximal cliques by Bron–Kerbosch with Tomita pivoting.
pub fn maximal_cliques(adj: &[Vec<bool>], cap: usize) -> Result<Vec<Vec<usize>>> {
    let n = adj.len();
    if n > cap.min(64) {
        return Err(Error::CapExceeded { needed: n as u128, cap: cap.min(64) as u128 });
    }
    let nbr: Vec<u64> = (0..n)
        .map(|u| (0..n).filter(|&v| v != u && adj[u][v]).fold(0u64, |m, v| m | (1 << v)))
        .collect();
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut out = Vec::new();
    bron_kerbosch(&nbr, 0, all, 0, &mut out);
    for c in &mut out {
        c.sort_unstable();
    }
    out.sort();
    Ok(out)
}

fn bits(mut s: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if s == 0 {
            None
        } else {
            let i = s.trailing_zeros() as usize;
            s &= s - 1;
            Some(i)
        }
    })
}

fn bron_kerbosch(nbr: &[u64], r: u64, mut p: u64, mut x: u64, out: &mut Vec<Vec<usize>>) {
    if p == 0 {
        if x == 0 {
            out.push(bits(r).collect());
        }
        return;
    }
    let pivot = bits(p | x).max_by_key(|&u| (p & nbr[u]).count_ones()).unwrap();
    for v in bits(p & !nbr[pivot]) {
        let bit = 1u64 << v;
        bron_kerbosch(nbr, r | bit, p & nbr[v], x & nbr[v], out);
        p &= !bit;
        x |= bit;
    }
}
