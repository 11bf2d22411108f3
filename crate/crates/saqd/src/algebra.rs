//! Phase-free generalized Pauli operators over Z_d and the linear algebra of
//! the finite abelian groups they generate.
//!
//! Groups are analysed through a Smith normal form computed directly over the
//! residue ring Z_d with unimodular Bezout steps, which handles composite `d`
//! without special cases.

use std::collections::BTreeMap;

use thiserror::Error;

/// Errors raised by the algebra layer.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("operator shapes differ: (n={0}, d={1}) vs (n={2}, d={3})")]
    Mismatch(usize, u32, usize, u32),
    #[error("local dimension must be at least 2, got {0}")]
    BadDimension(u32),
    #[error("x and z exponent vectors have different lengths")]
    RaggedExponents,
    #[error("generator list is empty")]
    Empty,
    #[error("stabilizer generator {stab} does not commute with gauge generator {gauge}")]
    NotCentral { stab: usize, gauge: usize },
    #[error("stabilizer generator {0} is not contained in the gauge group")]
    NotInGauge(usize),
    #[error("quotient of gauge by stabilizer group is not a free Z_d module of even rank")]
    NotFree,
    #[error("negative logical qudit count: n={n}, s={s}, r={r}")]
    Negative { n: usize, s: usize, r: usize },
}

/// Reduces an integer into `[0, d)`.
#[inline]
pub fn modd(v: i64, d: u32) -> u32 {
    v.rem_euclid(d as i64) as u32
}

/// Extended Euclid on non-negative integers: returns `(g, s, t)` with `s*a + t*b = g`.
pub fn egcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i64, 0i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    (r0, s0, t0)
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Multiplicative inverse in Z_d, if it exists.
pub fn inv_mod(a: u32, d: u32) -> Option<u32> {
    let (g, s, _) = egcd(a as i64, d as i64);
    if g == 1 {
        Some(modd(s, d))
    } else {
        None
    }
}

/// Prime factorisation as `(prime, exponent)` pairs in increasing order.
pub fn factorize(mut m: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= m {
        let mut e = 0;
        while m % p == 0 {
            m /= p;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
        p += 1;
    }
    if m > 1 {
        out.push((m, 1));
    }
    out
}

/// A generalized Pauli operator `X^x Z^z` on `n` qudits of dimension `d`,
/// with the global phase dropped.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliOp {
    d: u32,
    x: Vec<u32>,
    z: Vec<u32>,
}

impl PauliOp {
    pub fn identity(n: usize, d: u32) -> Self {
        assert!(d >= 2, "local dimension must be at least 2");
        Self { d, x: vec![0; n], z: vec![0; n] }
    }

    /// Builds an operator from exponent vectors, reducing every entry mod `d`.
    pub fn new(d: u32, x: Vec<i64>, z: Vec<i64>) -> Result<Self, AlgebraError> {
        if d < 2 {
            return Err(AlgebraError::BadDimension(d));
        }
        if x.len() != z.len() {
            return Err(AlgebraError::RaggedExponents);
        }
        Ok(Self {
            d,
            x: x.into_iter().map(|v| modd(v, d)).collect(),
            z: z.into_iter().map(|v| modd(v, d)).collect(),
        })
    }

    /// Builds an operator from sparse `(qudit, exponent)` lists.
    pub fn from_sparse(n: usize, d: u32, x: &[(usize, i64)], z: &[(usize, i64)]) -> Self {
        let mut op = Self::identity(n, d);
        for &(q, e) in x {
            op.x[q] = modd(op.x[q] as i64 + e, d);
        }
        for &(q, e) in z {
            op.z[q] = modd(op.z[q] as i64 + e, d);
        }
        op
    }

    pub fn single_x(n: usize, d: u32, q: usize, e: i64) -> Self {
        Self::from_sparse(n, d, &[(q, e)], &[])
    }

    pub fn single_z(n: usize, d: u32, q: usize, e: i64) -> Self {
        Self::from_sparse(n, d, &[], &[(q, e)])
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn x(&self) -> &[u32] {
        &self.x
    }

    pub fn z(&self) -> &[u32] {
        &self.z
    }

    /// Number of qudits on which the operator acts nontrivially.
    pub fn weight(&self) -> usize {
        self.x.iter().zip(&self.z).filter(|(a, b)| **a != 0 || **b != 0).count()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.x[i] != 0 || self.z[i] != 0).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().all(|&v| v == 0) && self.z.iter().all(|&v| v == 0)
    }

    fn check(&self, other: &Self) -> Result<(), AlgebraError> {
        if self.n() != other.n() || self.d != other.d {
            return Err(AlgebraError::Mismatch(self.n(), self.d, other.n(), other.d));
        }
        Ok(())
    }

    /// `sum_i (a.x_i b.z_i - a.z_i b.x_i) mod d`; zero iff the operators commute.
    pub fn symplectic_product(&self, other: &Self) -> Result<u32, AlgebraError> {
        self.check(other)?;
        let d = self.d as u128;
        let mut plus = 0u128;
        let mut minus = 0u128;
        for i in 0..self.n() {
            plus += self.x[i] as u128 * other.z[i] as u128;
            minus += self.z[i] as u128 * other.x[i] as u128;
        }
        Ok(((plus % d + d - minus % d) % d) as u32)
    }

    /// Phase-free product: exponents add componentwise.
    pub fn multiply(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check(other)?;
        let d = self.d;
        let add = |a: &[u32], b: &[u32]| a.iter().zip(b).map(|(p, q)| (p + q) % d).collect();
        Ok(Self { d, x: add(&self.x, &other.x), z: add(&self.z, &other.z) })
    }

    pub fn pow(&self, k: i64) -> Self {
        let d = self.d;
        let k = modd(k, d) as u64;
        let scale = |a: &[u32]| a.iter().map(|&v| ((v as u64 * k) % d as u64) as u32).collect();
        Self { d, x: scale(&self.x), z: scale(&self.z) }
    }

    pub fn inverse(&self) -> Self {
        self.pow(-1)
    }

    /// Exponent row `(x | z)` of length `2n`.
    pub fn exponent_row(&self) -> Vec<u32> {
        let mut row = self.x.clone();
        row.extend_from_slice(&self.z);
        row
    }
}

/// Smith normal form of one connected block of columns.
#[derive(Clone, Debug)]
struct Block {
    cols: Vec<usize>,
    diag: Vec<u32>,
    /// Column transform, `cols.len()` squared entries, row major.
    q: Vec<u32>,
}

impl Block {
    fn new(d: u32, cols: Vec<usize>, mut rows: Vec<Vec<u32>>) -> Self {
        let c = cols.len();
        let mut q = vec![0u32; c * c];
        for i in 0..c {
            q[i * c + i] = 1;
        }
        let diag = snf_in_place(&mut rows, c, d, &mut q);
        Self { cols, diag, q }
    }

    fn contains(&self, d: u32, v: &[u32]) -> bool {
        let c = self.cols.len();
        let dd = d as u64;
        for j in 0..c {
            let mut w = 0u64;
            for (i, &col) in self.cols.iter().enumerate() {
                let vi = v[col];
                if vi != 0 {
                    w = (w + vi as u64 * self.q[i * c + j] as u64) % dd;
                }
            }
            if j < self.diag.len() {
                let g = gcd(self.diag[j] as u64, dd);
                if w % g != 0 {
                    return false;
                }
            } else if w != 0 {
                return false;
            }
        }
        true
    }
}

/// Bezout-based Smith normal form over Z_d. Returns the nonzero diagonal.
///
/// `q` accumulates the column operations so that `P * A * Q = D` for some
/// invertible row transform `P`.
fn snf_in_place(a: &mut [Vec<u32>], c: usize, d: u32, q: &mut [u32]) -> Vec<u32> {
    let m = a.len();
    let mut diag = Vec::new();
    let mut t = 0;
    while t < m && t < c {
        // Pivot: entry generating the largest ideal in the trailing block.
        let mut best: Option<(u64, usize, usize)> = None;
        for (i, row) in a.iter().enumerate().skip(t) {
            for (j, &v) in row.iter().enumerate().skip(t) {
                if v != 0 {
                    let g = gcd(v as u64, d as u64);
                    if best.map_or(true, |b| g < b.0) {
                        best = Some((g, i, j));
                    }
                }
            }
            if matches!(best, Some((1, _, _))) {
                break;
            }
        }
        let Some((_, pi, pj)) = best else { break };
        a.swap(t, pi);
        if pj != t {
            for row in a.iter_mut() {
                row.swap(t, pj);
            }
            for r in 0..c {
                q.swap(r * c + t, r * c + pj);
            }
        }
        loop {
            for i in t + 1..m {
                let b = a[i][t];
                if b == 0 {
                    continue;
                }
                let piv = a[t][t] as i64;
                let (rt, ri) = pair_mut(a, t, i);
                if b as i64 % piv == 0 {
                    let k = b as i64 / piv;
                    for j in t..c {
                        ri[j] = modd(ri[j] as i64 - k * rt[j] as i64, d);
                    }
                    continue;
                }
                let (g, s, u) = egcd(piv, b as i64);
                let (bg, pg) = (b as i64 / g, piv / g);
                for j in t..c {
                    let x = rt[j] as i64;
                    let y = ri[j] as i64;
                    rt[j] = modd(s * x + u * y, d);
                    ri[j] = modd(-bg * x + pg * y, d);
                }
            }
            for j in t + 1..c {
                let b = a[t][j];
                if b == 0 {
                    continue;
                }
                let piv = a[t][t] as i64;
                if b as i64 % piv == 0 {
                    let k = b as i64 / piv;
                    for row in a.iter_mut().skip(t) {
                        row[j] = modd(row[j] as i64 - k * row[t] as i64, d);
                    }
                    for r in 0..c {
                        q[r * c + j] = modd(q[r * c + j] as i64 - k * q[r * c + t] as i64, d);
                    }
                    continue;
                }
                let (g, s, u) = egcd(piv, b as i64);
                let (bg, pg) = (b as i64 / g, piv / g);
                for row in a.iter_mut().skip(t) {
                    let x = row[t] as i64;
                    let y = row[j] as i64;
                    row[t] = modd(s * x + u * y, d);
                    row[j] = modd(-bg * x + pg * y, d);
                }
                for r in 0..c {
                    let x = q[r * c + t] as i64;
                    let y = q[r * c + j] as i64;
                    q[r * c + t] = modd(s * x + u * y, d);
                    q[r * c + j] = modd(-bg * x + pg * y, d);
                }
            }
            if (t + 1..m).all(|i| a[i][t] == 0) {
                break;
            }
        }
        diag.push(a[t][t]);
        t += 1;
    }
    diag
}

fn pair_mut<T>(v: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    debug_assert!(i < j);
    let (lo, hi) = v.split_at_mut(j);
    (&mut lo[i], &mut hi[0])
}

/// The abelian group generated by a list of phase-free Paulis.
///
/// Columns are split into connected blocks (two columns are linked when some
/// generator touches both), so CSS generator sets decompose into an X block and
/// a Z block automatically.
#[derive(Clone, Debug)]
pub struct GroupBasis {
    d: u32,
    n: usize,
    gens: Vec<PauliOp>,
    blocks: Vec<Block>,
    /// Orders `d / gcd(e_i, d)` of the nontrivial cyclic factors.
    cyclic: Vec<u64>,
}

impl GroupBasis {
    pub fn new(gens: Vec<PauliOp>) -> Result<Self, AlgebraError> {
        let first = gens.first().ok_or(AlgebraError::Empty)?;
        let (n, d) = (first.n(), first.d());
        for g in &gens {
            first.check(g)?;
        }
        let rows: Vec<Vec<u32>> = gens.iter().map(|g| g.exponent_row()).collect();
        let ncols = 2 * n;
        // Union columns that share a generator.
        let mut parent: Vec<usize> = (0..ncols).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut active = vec![false; ncols];
        for row in &rows {
            let mut first_col = None;
            for (j, &v) in row.iter().enumerate() {
                if v == 0 {
                    continue;
                }
                active[j] = true;
                match first_col {
                    None => first_col = Some(j),
                    Some(f) => {
                        let (a, b) = (find(&mut parent, f), find(&mut parent, j));
                        if a != b {
                            parent[b] = a;
                        }
                    }
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for j in 0..ncols {
            if active[j] {
                let r = find(&mut parent, j);
                groups.entry(r).or_default().push(j);
            }
        }
        let mut block_rows: BTreeMap<usize, Vec<Vec<u32>>> = BTreeMap::new();
        for row in &rows {
            if let Some(j) = row.iter().position(|&v| v != 0) {
                let r = find(&mut parent, j);
                let cols = &groups[&r];
                block_rows.entry(r).or_default().push(cols.iter().map(|&c| row[c]).collect());
            }
        }
        let mut blocks = Vec::new();
        let mut cyclic = Vec::new();
        for (r, cols) in groups {
            let b = Block::new(d, cols, block_rows.remove(&r).unwrap_or_default());
            for &e in &b.diag {
                let f = d as u64 / gcd(e as u64, d as u64);
                if f > 1 {
                    cyclic.push(f);
                }
            }
            blocks.push(b);
        }
        Ok(Self { d, n, gens, blocks, cyclic })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gens(&self) -> &[PauliOp] {
        &self.gens
    }

    /// Orders of the cyclic factors in the decomposition found by the SNF.
    pub fn cyclic_orders(&self) -> &[u64] {
        &self.cyclic
    }

    /// Invariant factors `f_1 | f_2 | ...` of the group, all greater than 1.
    pub fn invariant_factors(&self) -> Vec<u64> {
        let mut by_prime: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for &f in &self.cyclic {
            for (p, e) in factorize(f) {
                by_prime.entry(p).or_default().push(p.pow(e));
            }
        }
        let mu = by_prime.values().map(Vec::len).max().unwrap_or(0);
        let mut out = vec![1u64; mu];
        for powers in by_prime.values_mut() {
            powers.sort_unstable();
            let offset = mu - powers.len();
            for (i, pp) in powers.iter().enumerate() {
                out[offset + i] *= pp;
            }
        }
        out
    }

    /// Minimal number of generators of the group.
    pub fn mu(&self) -> usize {
        self.invariant_factors().len()
    }

    /// Group order as prime exponents: `|G| = prod p^a_p`.
    pub fn order_exponents(&self) -> BTreeMap<u64, u64> {
        let mut out = BTreeMap::new();
        for &f in &self.cyclic {
            for (p, e) in factorize(f) {
                *out.entry(p).or_insert(0) += e as u64;
            }
        }
        out
    }

    /// Group order, if it fits in a `u128`.
    pub fn order(&self) -> Option<u128> {
        let mut acc: u128 = 1;
        for &f in &self.cyclic {
            acc = acc.checked_mul(f as u128)?;
        }
        Some(acc)
    }

    /// True iff `op` is a product of powers of the generators.
    pub fn contains(&self, op: &PauliOp) -> Result<bool, AlgebraError> {
        if op.n() != self.n || op.d() != self.d {
            return Err(AlgebraError::Mismatch(op.n(), op.d(), self.n, self.d));
        }
        let v = op.exponent_row();
        let mut covered = vec![false; v.len()];
        for b in &self.blocks {
            for &c in &b.cols {
                covered[c] = true;
            }
            if !b.contains(self.d, &v) {
                return Ok(false);
            }
        }
        Ok(v.iter().zip(&covered).all(|(&x, &c)| c || x == 0))
    }
}

/// Symplectic product of two operators.
pub fn symplectic_product(a: &PauliOp, b: &PauliOp) -> Result<u32, AlgebraError> {
    a.symplectic_product(b)
}

/// Group generated by `gens` (see [`GroupBasis`]).
pub fn group_structure(gens: Vec<PauliOp>) -> Result<GroupBasis, AlgebraError> {
    GroupBasis::new(gens)
}

pub fn is_member(op: &PauliOp, basis: &GroupBasis) -> Result<bool, AlgebraError> {
    basis.contains(op)
}

/// Number of logical qudits `k = n - s - r` of a subsystem code, where
/// `s` is the minimal generator count of the stabilizer group and `2r` the
/// rank of the quotient of gauge group by stabilizer group.
pub fn count_logical_qudits(gauge: &GroupBasis, stab: &GroupBasis, n: usize) -> Result<usize, AlgebraError> {
    for (si, s) in stab.gens().iter().enumerate() {
        if !gauge.contains(s)? {
            return Err(AlgebraError::NotInGauge(si));
        }
        for (gi, g) in gauge.gens().iter().enumerate() {
            if s.symplectic_product(g)? != 0 {
                return Err(AlgebraError::NotCentral { stab: si, gauge: gi });
            }
        }
    }
    logical_qudits_unchecked(gauge, stab, n)
}

/// As [`count_logical_qudits`], without checking that the stabilizer group is
/// a central subgroup of the gauge group.
pub fn logical_qudits_unchecked(gauge: &GroupBasis, stab: &GroupBasis, n: usize) -> Result<usize, AlgebraError> {
    let s = stab.mu();
    let two_r = quotient_rank(gauge, stab)?;
    if two_r % 2 != 0 {
        return Err(AlgebraError::NotFree);
    }
    let r = two_r / 2;
    n.checked_sub(s + r).ok_or(AlgebraError::Negative { n, s, r })
}

/// `log_d |G/S|` when the quotient order is an exact power of `d`.
fn quotient_rank(gauge: &GroupBasis, stab: &GroupBasis) -> Result<usize, AlgebraError> {
    let g = gauge.order_exponents();
    let s = stab.order_exponents();
    let mut m: Option<u64> = None;
    for (p, b) in factorize(gauge.d() as u64) {
        let a = g.get(&p).copied().unwrap_or(0);
        let c = s.get(&p).copied().unwrap_or(0);
        let diff = a.checked_sub(c).ok_or(AlgebraError::NotFree)?;
        if diff % b as u64 != 0 {
            return Err(AlgebraError::NotFree);
        }
        let here = diff / b as u64;
        if m.map_or(false, |v| v != here) {
            return Err(AlgebraError::NotFree);
        }
        m = Some(here);
    }
    Ok(m.unwrap_or(0) as usize)
}
