//! XOR games `𝒢_{2^k}` built from sign vectors in general position, their
//! recursive block layout and Hadamard diagonalization. Everything here is
//! exact integer arithmetic.

use serde::Serialize;

use crate::error::{Error, Result};

pub type IntMatrix = Vec<Vec<i64>>;

/// Largest `k` accepted by [`build_game`] (`2^k ≤ 4096`).
pub const MAX_GAME_K: usize = 12;
/// Largest `|R|` accepted by [`general_position_check`].
pub const MAX_GENERAL_POSITION: usize = 20;
/// Largest number of Alice inputs accepted by [`classical_bias`].
pub const MAX_BIAS_INPUTS: usize = 12;

/// `v_1..v_r` with `(v_j)_i = +1` when bit `r−j` of `i mod 2^r` is 0 and
/// `−1` otherwise, so the first `2^r` rows list all sign patterns in
/// lexicographic order with `+1` before `−1`.
pub fn lexicographic_vectors(r: usize, rows: usize) -> Result<Vec<Vec<i8>>> {
    if r == 0 || r >= usize::BITS as usize - 1 || (1usize << r) > rows {
        return Err(Error::InvalidParameter(format!("need 1 ≤ r and 2^r ≤ rows, got r = {r}, rows = {rows}")));
    }
    let period = 1usize << r;
    Ok((1..=r)
        .map(|j| {
            (0..rows)
                .map(|i| if (i % period) >> (r - j) & 1 == 1 { -1 } else { 1 })
                .collect()
        })
        .collect())
}

/// True iff for every `I ⊆ {1..r}` the entrywise product of
/// `1 + v_j (j ∈ I)` and `1 − v_j (j ∉ I)` is not the zero vector.
pub fn general_position_check(vectors: &[Vec<i8>]) -> Result<bool> {
    let r = vectors.len();
    if r > MAX_GENERAL_POSITION {
        return Err(Error::CapExceeded { needed: r as u128, cap: MAX_GENERAL_POSITION as u128 });
    }
    let rows = vectors.first().map_or(0, Vec::len);
    if vectors.iter().any(|v| v.len() != rows) {
        return Err(Error::DimensionMismatch { expected: rows, got: 0 });
    }
    if vectors.iter().flatten().any(|&s| s != 1 && s != -1) {
        return Err(Error::InvalidParameter("sign vectors must have ±1 entries".into()));
    }
    if rows == 0 {
        return Ok(false);
    }
    for subset in 0u32..(1 << r) {
        // The product is nonzero at row i iff v_j(i) = +1 exactly for j ∈ I.
        let hit = (0..rows).any(|i| {
            vectors.iter().enumerate().all(|(j, v)| (v[i] == 1) == (subset >> j & 1 == 1))
        });
        if !hit {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Sign of the inner product, 0 on ties.
pub fn star(ri: &[i8], rj: &[i8]) -> Result<i64> {
    if ri.len() != rj.len() {
        return Err(Error::DimensionMismatch { expected: ri.len(), got: rj.len() });
    }
    let s: i64 = ri.iter().zip(rj).map(|(&a, &b)| a as i64 * b as i64).sum();
    Ok(s.signum())
}

/// `ĩ_k` for 0-based `i`: the `k`-bit binary form of `i`, `0 ↦ 1`, `1 ↦ −1`.
pub fn sign_code(i: usize, k: usize) -> Vec<i8> {
    (0..k).map(|b| if i >> (k - 1 - b) & 1 == 1 { -1 } else { 1 }).collect()
}

fn check_k(k: usize) -> Result<()> {
    if !(2..=MAX_GAME_K).contains(&k) {
        return Err(Error::InvalidParameter(format!("game family needs 2 ≤ k ≤ {MAX_GAME_K}, got {k}")));
    }
    Ok(())
}

/// `(𝒢_{2^k})_{ij} = (1, ĩ_k) ⋆ (−1, j̃_k)`.
pub fn build_game(k: usize) -> Result<IntMatrix> {
    check_k(k)?;
    let n = 1usize << k;
    let alice: Vec<Vec<i8>> = (0..n).map(|i| [vec![1], sign_code(i, k)].concat()).collect();
    let bob: Vec<Vec<i8>> = (0..n).map(|j| [vec![-1], sign_code(j, k)].concat()).collect();
    alice
        .iter()
        .map(|ri| bob.iter().map(|rj| star(ri, rj)).collect())
        .collect()
}

/// `𝒢_{2^k}` read off the matrix `G` whose columns are
/// `lexicographic_vectors(k+1, 2^{k+1})`: Alice's row `i` against row `2^k + j`.
pub fn build_game_from_vectors(k: usize) -> Result<IntMatrix> {
    check_k(k)?;
    let n = 1usize << k;
    let v = lexicographic_vectors(k + 1, 2 * n)?;
    let row = |i: usize| -> Vec<i8> { v.iter().map(|vj| vj[i]).collect() };
    (0..n)
        .map(|i| (0..n).map(|j| star(&row(i), &row(n + j))).collect())
        .collect()
}

/// Top-left `x × x` block.
pub fn top_left(m: &IntMatrix, x: usize) -> IntMatrix {
    m[..x].iter().map(|r| r[..x].to_vec()).collect()
}

/// Top-right `x × x` block.
pub fn top_right(m: &IntMatrix, x: usize) -> IntMatrix {
    let n = m.len();
    m[..x].iter().map(|r| r[n - x..].to_vec()).collect()
}

fn block(m: &IntMatrix, bi: usize, bj: usize, size: usize) -> IntMatrix {
    m[bi * size..(bi + 1) * size]
        .iter()
        .map(|r| r[bj * size..(bj + 1) * size].to_vec())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockReport {
    pub ok: bool,
    /// Number of block comparisons made.
    pub checked: usize,
    /// First failing block: a label and its top-left `(row, col)`.
    pub mismatch: Option<(String, usize, usize)>,
}

/// Checks the 4×4 block layout of `𝒢_{2^k}` (`k ≥ 4`) and the recursive
/// `A`/`B` ladders down to `A_1 = (1)`, `B_1 = (−1)`.
pub fn verify_block_structure(g: &IntMatrix, k: usize) -> Result<BlockReport> {
    check_k(k)?;
    let n = 1usize << k;
    if g.len() != n || g.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: g.len() });
    }
    if k < 4 {
        return Err(Error::InvalidParameter(format!("block layout needs k ≥ 4, got {k}")));
    }
    let q = n / 4;
    let inner = build_game(k - 2)?;
    let mut rep = BlockReport { ok: true, checked: 0, mismatch: None };
    let expect = |rep: &mut BlockReport, label: String, got: IntMatrix, want: &IntMatrix, at: (usize, usize)| {
        rep.checked += 1;
        if rep.ok && &got != want {
            rep.ok = false;
            rep.mismatch = Some((label, at.0, at.1));
        }
    };
    let a = block(g, 0, 0, q);
    let b = block(g, 0, 3, q);
    for (bi, bj) in [(0, 1), (0, 2), (1, 0), (1, 3), (2, 0), (2, 3), (3, 1), (3, 2)] {
        expect(&mut rep, format!("G block ({bi},{bj})"), block(g, bi, bj, q), &inner, (bi * q, bj * q));
    }
    for d in 1..4 {
        expect(&mut rep, format!("A block ({d},{d})"), block(g, d, d, q), &a, (d * q, d * q));
    }
    for (bi, bj) in [(1, 2), (2, 1), (3, 0)] {
        expect(&mut rep, format!("B block ({bi},{bj})"), block(g, bi, bj, q), &b, (bi * q, bj * q));
    }
    // A_{2^j} = [[A_{2^{j-1}}, 𝒢_{2^{k-2}, 2^{j-1}}], [same, A_{2^{j-1}}]] and
    // B_{2^j} = [[bar 𝒢_{2^{k-2}, 2^{j-1}}, B_{2^{j-1}}], [same, bar ...]].
    let mut a_cur = a;
    let mut b_cur = b;
    let mut b_col = n - q;
    let mut size = q;
    while size > 1 {
        let h = size / 2;
        let corner = top_left(&inner, h);
        let bar = top_right(&inner, h);
        let a_half = block(&a_cur, 0, 0, h);
        let b_half = block(&b_cur, 0, 1, h);
        expect(&mut rep, format!("A_{size} off-diagonal (0,1)"), block(&a_cur, 0, 1, h), &corner, (0, h));
        expect(&mut rep, format!("A_{size} off-diagonal (1,0)"), block(&a_cur, 1, 0, h), &corner, (h, 0));
        expect(&mut rep, format!("A_{size} diagonal (1,1)"), block(&a_cur, 1, 1, h), &a_half, (h, h));
        expect(&mut rep, format!("B_{size} diagonal (0,0)"), block(&b_cur, 0, 0, h), &bar, (0, b_col));
        expect(&mut rep, format!("B_{size} diagonal (1,1)"), block(&b_cur, 1, 1, h), &bar, (h, b_col + h));
        expect(&mut rep, format!("B_{size} off-diagonal (1,0)"), block(&b_cur, 1, 0, h), &b_half, (h, b_col));
        a_cur = a_half;
        b_cur = b_half;
        b_col += h;
        size = h;
    }
    expect(&mut rep, "A_1".into(), a_cur, &vec![vec![1]], (0, 0));
    expect(&mut rep, "B_1".into(), b_cur, &vec![vec![-1]], (0, n - 1));
    Ok(rep)
}

/// Unnormalized Sylvester matrix: `H_0 = (1)`, `H_k = [[H, H], [H, −H]]`.
pub fn hadamard(k: usize) -> IntMatrix {
    let mut h = vec![vec![1i64]];
    for _ in 0..k {
        let n = h.len();
        let mut next = vec![vec![0i64; 2 * n]; 2 * n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = h[i][j];
                next[i][j + n] = h[i][j];
                next[i + n][j] = h[i][j];
                next[i + n][j + n] = -h[i][j];
            }
        }
        h = next;
    }
    h
}

fn log2_size(n: usize) -> Result<usize> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::InvalidParameter(format!("size {n} is not a power of two")));
    }
    Ok(n.trailing_zeros() as usize)
}

pub fn mat_mul(a: &IntMatrix, b: &IntMatrix) -> IntMatrix {
    let n = a.len();
    let m = b.first().map_or(0, Vec::len);
    let mut out = vec![vec![0i64; m]; n];
    for i in 0..n {
        for (l, &ail) in a[i].iter().enumerate() {
            if ail != 0 {
                for j in 0..m {
                    out[i][j] += ail * b[l][j];
                }
            }
        }
    }
    out
}

/// `H·M·H` by explicit matrix products.
pub fn hadamard_conjugate(m: &IntMatrix) -> Result<IntMatrix> {
    let k = log2_size(m.len())?;
    if m.iter().any(|r| r.len() != m.len()) {
        return Err(Error::DimensionMismatch { expected: m.len(), got: 0 });
    }
    let h = hadamard(k);
    Ok(mat_mul(&mat_mul(&h, m), &h))
}

/// In-place unnormalized fast Walsh–Hadamard transform (`v ↦ H v`).
pub fn fwht(v: &mut [i64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for i in (0..n).step_by(2 * h) {
            for j in i..i + h {
                let (x, y) = (v[j], v[j + h]);
                v[j] = x + y;
                v[j + h] = x - y;
            }
        }
        h *= 2;
    }
}

/// `H·M·H` with the transform applied to columns then rows (`H` is
/// symmetric).
pub fn hadamard_conjugate_fwht(m: &IntMatrix) -> Result<IntMatrix> {
    let n = m.len();
    log2_size(n)?;
    if m.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: 0 });
    }
    let mut t = m.clone();
    for j in 0..n {
        let mut col: Vec<i64> = t.iter().map(|r| r[j]).collect();
        fwht(&mut col);
        for i in 0..n {
            t[i][j] = col[i];
        }
    }
    for row in t.iter_mut() {
        fwht(row);
    }
    Ok(t)
}

/// True iff `H·M·H` has no nonzero off-diagonal entry. Both conjugation
/// routes are computed and must agree.
pub fn is_diagonal_in_hadamard_basis(m: &IntMatrix) -> Result<bool> {
    let fast = hadamard_conjugate_fwht(m)?;
    let slow = hadamard_conjugate(m)?;
    if fast != slow {
        return Err(Error::Degenerate("Hadamard conjugation routes disagree".into()));
    }
    Ok(fast
        .iter()
        .enumerate()
        .all(|(i, r)| r.iter().enumerate().all(|(j, &v)| i == j || v == 0)))
}

/// `max aᵀGb` over sign vectors. Alice's `2^{ma}` assignments are
/// enumerated and Bob answers with `b_j = sign((aᵀG)_j)`.
pub fn classical_bias(g: &IntMatrix) -> Result<i64> {
    let ma = g.len();
    let mb = g.first().map_or(0, Vec::len);
    if g.iter().any(|r| r.len() != mb) {
        return Err(Error::DimensionMismatch { expected: mb, got: 0 });
    }
    if ma > MAX_BIAS_INPUTS {
        return Err(Error::CapExceeded { needed: ma as u128, cap: MAX_BIAS_INPUTS as u128 });
    }
    let mut best = i64::MIN;
    for mask in 0u32..(1 << ma) {
        let v: i64 = (0..mb)
            .map(|j| {
                (0..ma)
                    .map(|i| if mask >> i & 1 == 1 { -g[i][j] } else { g[i][j] })
                    .sum::<i64>()
                    .abs()
            })
            .sum();
        best = best.max(v);
    }
    Ok(if ma == 0 { 0 } else { best })
}
