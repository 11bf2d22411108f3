//! Subsystem codes built on a [`Lattice`]: gauge generators, stabilizers,
//! logical operators, parameter checks and the three-body variant.

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::algebra::{self, inv_mod, modd, AlgebraError, GroupBasis, PauliOp};
use crate::lattice::{build_lattice, Color, Lattice, LatticeError, Manifold, ManifoldKind, QuditClass, Side, SphereKind, TermKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodeError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("local dimension must be at least 2, got {0}")]
    BadDimension(u32),
    #[error("{manifold}: expected (n, k) = ({expected_n}, {expected_k}), found ({n}, {k})")]
    TableMismatch { manifold: String, n: usize, k: usize, expected_n: usize, expected_k: usize },
    #[error("operation needs a {expected} code, got {got}")]
    WrongManifold { expected: &'static str, got: ManifoldKind },
    #[error("code has no logical qudits")]
    NoLogicals,
    #[error("brute-force search with cap {cap} needs about {cost:.3e} candidates, above the budget")]
    CapTooLarge { cap: usize, cost: f64 },
    #[error("construction failed: {0}")]
    Construction(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum OpType {
    X,
    Z,
}

/// A pure X-type or pure Z-type Pauli stored sparsely.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct CssOp {
    pub ty: OpType,
    /// Sorted `(qudit, exponent)` pairs with exponents in `[1, d)`.
    pub support: Vec<(usize, u32)>,
}

impl CssOp {
    pub fn new(ty: OpType, entries: impl IntoIterator<Item = (usize, i64)>, d: u32) -> Self {
        let mut acc: BTreeMap<usize, i64> = BTreeMap::new();
        for (q, e) in entries {
            *acc.entry(q).or_insert(0) += e;
        }
        let support = acc.into_iter().map(|(q, e)| (q, modd(e, d))).filter(|&(_, e)| e != 0).collect();
        Self { ty, support }
    }

    pub fn identity(ty: OpType) -> Self {
        Self { ty, support: Vec::new() }
    }

    pub fn weight(&self) -> usize {
        self.support.len()
    }

    pub fn is_identity(&self) -> bool {
        self.support.is_empty()
    }

    pub fn to_pauli(&self, n: usize, d: u32) -> PauliOp {
        let e: Vec<(usize, i64)> = self.support.iter().map(|&(q, v)| (q, v as i64)).collect();
        match self.ty {
            OpType::X => PauliOp::from_sparse(n, d, &e, &[]),
            OpType::Z => PauliOp::from_sparse(n, d, &[], &e),
        }
    }

    /// `self * other^k`; both operators must have the same type.
    pub fn mul_pow(&self, other: &CssOp, k: i64, d: u32) -> CssOp {
        assert_eq!(self.ty, other.ty, "product of X-type and Z-type operators is not CSS");
        let (a, b) = (&self.support, &other.support);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let take_a = j == b.len() || (i < a.len() && a[i].0 < b[j].0);
            let take_b = i == a.len() || (j < b.len() && b[j].0 < a[i].0);
            if take_a {
                out.push(a[i]);
                i += 1;
            } else if take_b {
                out.push((b[j].0, modd(b[j].1 as i64 * k, d)));
                j += 1;
            } else {
                let v = modd(a[i].1 as i64 + b[j].1 as i64 * k, d);
                out.push((a[i].0, v));
                i += 1;
                j += 1;
            }
        }
        out.retain(|&(_, e)| e != 0);
        CssOp { ty: self.ty, support: out }
    }

    pub fn mul(&self, other: &CssOp, d: u32) -> CssOp {
        self.mul_pow(other, 1, d)
    }

    pub fn pow(&self, k: i64, d: u32) -> CssOp {
        CssOp::identity(self.ty).mul_pow(self, k, d)
    }

    /// `sum_q a_q b_q mod d` over the common support.
    pub fn overlap(&self, other: &CssOp, d: u32) -> u32 {
        let (a, b) = (&self.support, &other.support);
        let (mut i, mut j, mut acc) = (0, 0, 0u64);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc = (acc + a[i].1 as u64 * b[j].1 as u64) % d as u64;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc as u32
    }

    pub fn qudits(&self) -> impl Iterator<Item = usize> + '_ {
        self.support.iter().map(|&(q, _)| q)
    }
}

/// Symplectic product of two CSS operators.
pub fn css_sp(a: &CssOp, b: &CssOp, d: u32) -> u32 {
    match (a.ty, b.ty) {
        (OpType::X, OpType::Z) => a.overlap(b, d),
        (OpType::Z, OpType::X) => (d - b.overlap(a, d)) % d,
        _ => 0,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GaugeGen {
    pub op: CssOp,
    pub color: Option<Color>,
    /// Lattice term this generator came from, if any.
    pub term: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum StabKind {
    LocalX,
    LocalZ,
    SheetX,
    SheetZ,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Locus {
    Cell(usize),
    Plane { axis: usize, coord: i64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StabGen {
    pub op: CssOp,
    pub kind: StabKind,
    pub locus: Locus,
    /// Terms whose product gives this stabilizer, per colour (local only).
    pub green_terms: Vec<usize>,
    pub yellow_terms: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LogicalPair {
    /// Plane of the bare X operator, e.g. `"yz"`.
    pub label: String,
    pub x: CssOp,
    pub z: CssOp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Params {
    pub n: usize,
    pub s: usize,
    pub r: usize,
    pub k: usize,
}

/// Generalized controlled-X. Without `dagger` it maps `X_c -> X_c X_t^-1`
/// and `Z_t -> Z_c Z_t`; with `dagger` it is the inverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CxGate {
    pub control: usize,
    pub target: usize,
    pub dagger: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Circuit {
    pub gates: Vec<CxGate>,
}

impl Circuit {
    /// Conjugates an operator by the circuit, gates applied in list order.
    pub fn apply_css(&self, op: &CssOp, d: u32) -> CssOp {
        let mut v: BTreeMap<usize, i64> = op.support.iter().map(|&(q, e)| (q, e as i64)).collect();
        for g in &self.gates {
            let sign = if g.dagger { 1 } else { -1 };
            match op.ty {
                OpType::X => {
                    if let Some(&xc) = v.get(&g.control) {
                        *v.entry(g.target).or_insert(0) += sign * xc;
                    }
                }
                OpType::Z => {
                    if let Some(&zt) = v.get(&g.target) {
                        *v.entry(g.control).or_insert(0) -= sign * zt;
                    }
                }
            }
        }
        CssOp::new(op.ty, v, d)
    }

    pub fn inverse(&self) -> Circuit {
        Circuit { gates: self.gates.iter().rev().map(|g| CxGate { dagger: !g.dagger, ..*g }).collect() }
    }

    /// Conjugates a dense Z-exponent vector in place.
    pub fn apply_z_dense(&self, z: &mut [u32], d: u32) {
        for g in &self.gates {
            let zt = z[g.target] as u64;
            if zt != 0 {
                let delta = if g.dagger { d as u64 - zt } else { zt };
                z[g.control] = ((z[g.control] as u64 + delta) % d as u64) as u32;
            }
        }
    }

    pub fn apply_pauli(&self, op: &PauliOp) -> PauliOp {
        let d = op.d();
        let mut x: Vec<i64> = op.x().iter().map(|&v| v as i64).collect();
        let mut z: Vec<i64> = op.z().iter().map(|&v| v as i64).collect();
        for g in &self.gates {
            let sign = if g.dagger { 1 } else { -1 };
            x[g.target] += sign * x[g.control];
            z[g.control] -= sign * z[g.target];
        }
        PauliOp::new(d, x, z).expect("same shape")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubsystemCode {
    pub d: u32,
    pub lattice: Lattice,
    /// One operator per lattice term, in the code's frame.
    pub terms: Vec<CssOp>,
    pub gauge_gens: Vec<GaugeGen>,
    pub stabilizers: Vec<StabGen>,
    pub bare: Vec<LogicalPair>,
    pub dressed: Vec<LogicalPair>,
    /// Weight-reduction circuit already applied to every operator above.
    pub circuit: Option<Circuit>,
}

/// Operator of lattice term `t` before any weight-reduction circuit.
pub fn lattice_term_op(lat: &Lattice, t: usize, d: u32) -> CssOp {
    let term = &lat.terms[t];
    let ty = match term.kind {
        TermKind::Face => OpType::X,
        TermKind::Vertex => OpType::Z,
    };
    CssOp::new(ty, term.support.iter().map(|&(q, s)| (q, s as i64)), d)
}

fn product(ops: impl IntoIterator<Item = CssOp>, ty: OpType, d: u32) -> CssOp {
    ops.into_iter().fold(CssOp::identity(ty), |acc, o| acc.mul(&o, d))
}

/// Builds the code for a manifold. The three-body variant is built by
/// applying [`apply_weight_reduction`] to the `T2xI` code of the same size.
pub fn build_code(m: Manifold, d: u32) -> Result<SubsystemCode, CodeError> {
    if d < 2 {
        return Err(CodeError::BadDimension(d));
    }
    if m.kind == ManifoldKind::T2xIPrime {
        let base = build_code(Manifold::new(ManifoldKind::T2xI, m.l)?, d)?;
        return apply_weight_reduction(&base);
    }
    let lattice = build_lattice(m)?;
    let terms: Vec<CssOp> = (0..lattice.terms.len()).map(|t| lattice_term_op(&lattice, t, d)).collect();
    let gauge_gens = raw_gauge_generators(&lattice, &terms, d);
    let mut code = SubsystemCode {
        d,
        lattice,
        terms,
        gauge_gens,
        stabilizers: Vec::new(),
        bare: Vec::new(),
        dressed: Vec::new(),
        circuit: None,
    };
    code.stabilizers = build_stabilizers(&code)?;
    if m.kind != ManifoldKind::Torus3 {
        let (bare, dressed) = build_logicals(&code)?;
        code.bare = bare;
        code.dressed = dressed;
    }
    Ok(code)
}

/// Per sphere, all terms except one redundant term of each type whose
/// product over the sphere is the identity.
fn raw_gauge_generators(lat: &Lattice, terms: &[CssOp], d: u32) -> Vec<GaugeGen> {
    let mut out = Vec::new();
    for sphere in &lat.spheres {
        for ty in [OpType::Z, OpType::X] {
            let ids: Vec<usize> = sphere.terms.iter().copied().filter(|&t| terms[t].ty == ty).collect();
            let closed = !ids.is_empty() && product(ids.iter().map(|&t| terms[t].clone()), ty, d).is_identity();
            let keep = if closed { ids.len() - 1 } else { ids.len() };
            for &t in &ids[..keep] {
                out.push(GaugeGen { op: terms[t].clone(), color: Some(sphere.color), term: Some(t) });
            }
        }
    }
    out
}

/// Local stabilizers (one per cell whose green and yellow products agree)
/// plus, on the three-torus, the six sheet operators.
pub fn build_stabilizers(code: &SubsystemCode) -> Result<Vec<StabGen>, CodeError> {
    let lat = &code.lattice;
    let d = code.d;
    let mut per_cell: Vec<[Vec<usize>; 2]> = vec![[Vec::new(), Vec::new()]; lat.cells.len()];
    for (t, term) in lat.terms.iter().enumerate() {
        let colour = lat.spheres[term.sphere].color;
        per_cell[term.cell][(colour == Color::Yellow) as usize].push(t);
    }
    let mut out = Vec::new();
    for (c, [green, yellow]) in per_cell.into_iter().enumerate() {
        let ty = if lat.cells[c].red { OpType::X } else { OpType::Z };
        let g = product(green.iter().map(|&t| code.terms[t].clone()), ty, d);
        let y = product(yellow.iter().map(|&t| code.terms[t].clone()), ty, d);
        if g == y && !g.is_identity() {
            let kind = if ty == OpType::X { StabKind::LocalX } else { StabKind::LocalZ };
            out.push(StabGen { op: g, kind, locus: Locus::Cell(c), green_terms: green, yellow_terms: yellow });
        }
    }
    if lat.manifold.kind == ManifoldKind::Torus3 {
        for ty in [OpType::X, OpType::Z] {
            for axis in 0..3 {
                let (coord, op) = (0..lat.manifold.l as i64)
                    .find_map(|c| sheet(code, ty, axis, c).map(|op| (c, op)))
                    .ok_or_else(|| CodeError::Construction(format!("no {ty:?} sheet normal to axis {axis}")))?;
                let kind = if ty == OpType::X { StabKind::SheetX } else { StabKind::SheetZ };
                out.push(StabGen {
                    op,
                    kind,
                    locus: Locus::Plane { axis, coord },
                    green_terms: Vec::new(),
                    yellow_terms: Vec::new(),
                });
            }
        }
    }
    Ok(out)
}

/// Finds `+-1` exponents on `support` so that the operator of type `ty`
/// commutes with every constraint. Constraints meeting the support in two
/// qudits fix relative signs; the rest are checked afterwards over the
/// integers, so a solution is valid for every `d`.
fn solve_signs(n: usize, support: &[usize], constraints: &[&[(usize, i64)]]) -> Option<Vec<(usize, i64)>> {
    if support.is_empty() {
        return None;
    }
    let mut pos = vec![usize::MAX; n];
    for (i, &q) in support.iter().enumerate() {
        pos[q] = i;
    }
    let mut adj: Vec<Vec<(usize, i64)>> = vec![Vec::new(); support.len()];
    let mut hits: Vec<Vec<(usize, i64)>> = Vec::new();
    for c in constraints {
        let hit: Vec<(usize, i64)> = c.iter().filter(|&&(q, _)| pos[q] != usize::MAX).map(|&(q, e)| (pos[q], e)).collect();
        match hit.len() {
            0 => continue,
            1 => return None,
            2 => {
                // a_i c_i + a_j c_j = 0 with c = +-1, so a_j = -a_i c_i c_j.
                let ((i, ci), (j, cj)) = (hit[0], hit[1]);
                adj[i].push((j, -ci * cj));
                adj[j].push((i, -ci * cj));
            }
            _ => {}
        }
        hits.push(hit);
    }
    let mut sign = vec![0i64; support.len()];
    for start in 0..support.len() {
        if sign[start] != 0 {
            continue;
        }
        sign[start] = 1;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for &(j, f) in &adj[i] {
                let want = sign[i] * f;
                if sign[j] == 0 {
                    sign[j] = want;
                    queue.push_back(j);
                } else if sign[j] != want {
                    return None;
                }
            }
        }
    }
    for hit in &hits {
        if hit.iter().map(|&(i, c)| sign[i] * c).sum::<i64>() != 0 {
            return None;
        }
    }
    Some(support.iter().zip(&sign).map(|(&q, &s)| (q, s)).collect())
}

fn signed_terms(lat: &Lattice, kind: TermKind) -> Vec<Vec<(usize, i64)>> {
    lat.terms
        .iter()
        .filter(|t| t.kind == kind)
        .map(|t| t.support.iter().map(|&(q, s)| (q, s as i64)).collect())
        .collect()
}

fn signed_stabs(code: &SubsystemCode, ty: OpType) -> Vec<Vec<(usize, i64)>> {
    let d = code.d as i64;
    code.stabilizers
        .iter()
        .filter(|s| s.op.ty == ty)
        .map(|s| s.op.support.iter().map(|&(q, e)| (q, if e as i64 > d / 2 { e as i64 - d } else { e as i64 })).collect())
        .collect()
}

/// Sheet operator of type `ty` in the plane `{axis = coord}` commuting with
/// every gauge term of the opposite type.
fn sheet(code: &SubsystemCode, ty: OpType, axis: usize, coord: i64) -> Option<CssOp> {
    let lat = &code.lattice;
    let support: Vec<usize> = (0..lat.n()).filter(|&q| lat.in_plane(q, axis, coord)).collect();
    let kind = if ty == OpType::X { TermKind::Vertex } else { TermKind::Face };
    let cons = signed_terms(lat, kind);
    let refs: Vec<&[(usize, i64)]> = cons.iter().map(Vec::as_slice).collect();
    solve_signs(lat.n(), &support, &refs).map(|s| CssOp::new(ty, s, code.d))
}

/// Lightest solvable sheet among all coordinates not in `avoid`.
fn best_sheet(code: &SubsystemCode, ty: OpType, axis: usize, avoid: &[i64]) -> Result<(i64, CssOp), CodeError> {
    let l = code.lattice.manifold.l as i64;
    let hi = if code.lattice.manifold.kind == ManifoldKind::Cube { l + 1 } else { l };
    (0..hi)
        .filter(|c| !avoid.contains(c))
        .filter_map(|c| sheet(code, ty, axis, c).map(|op| (c, op)))
        .min_by_key(|(c, op)| (op.weight(), *c))
        .ok_or_else(|| CodeError::Construction(format!("no {ty:?} sheet normal to axis {axis}")))
}

/// String of type `ty` on the top-surface columns along `along`, at
/// `fixed` in the other horizontal coordinate, commuting with all
/// stabilizers of the opposite type.
fn surface_string(code: &SubsystemCode, ty: OpType, along: usize, fixed: i64) -> Result<CssOp, CodeError> {
    let lat = &code.lattice;
    let l = lat.manifold.l as i64;
    let hi = if lat.manifold.kind == ManifoldKind::Cube { l + 1 } else { l };
    let support: Vec<usize> = (0..hi)
        .map(|t| {
            let (x, z) = if along == 0 { (t, fixed) } else { (fixed, t) };
            lat.column_qudit(Side::Top, x, z).expect("column exists")
        })
        .collect();
    let other = if ty == OpType::X { OpType::Z } else { OpType::X };
    let cons = signed_stabs(code, other);
    let refs: Vec<&[(usize, i64)]> = cons.iter().map(Vec::as_slice).collect();
    solve_signs(lat.n(), &support, &refs)
        .map(|s| CssOp::new(ty, s, code.d))
        .ok_or_else(|| CodeError::Construction(format!("no {ty:?} surface string along axis {along}")))
}

/// Rescales the Z partners so that `sp(X_i, Z_j) = delta_ij`.
fn normalize_pairs(pairs: &mut [LogicalPair], d: u32) -> Result<(), CodeError> {
    for i in 0..pairs.len() {
        for j in 0..pairs.len() {
            let v = css_sp(&pairs[i].x, &pairs[j].z, d);
            if i != j && v != 0 {
                return Err(CodeError::Construction(format!("logical pairs {i} and {j} do not commute")));
            }
        }
        let v = css_sp(&pairs[i].x, &pairs[i].z, d);
        let inv = inv_mod(v, d).ok_or_else(|| CodeError::Construction(format!("pair {i} has non-unit product {v}")))?;
        pairs[i].z = pairs[i].z.pow(inv as i64, d);
    }
    Ok(())
}

/// Rescales dressed operators so each represents the same logical as its
/// bare counterpart: `sp(X_i^dr, Z_j) = sp(X_i, Z_j^dr) = delta_ij`.
fn align_dressed(bare: &[LogicalPair], dressed: &mut [LogicalPair], d: u32) -> Result<(), CodeError> {
    for i in 0..dressed.len() {
        for j in 0..bare.len() {
            let (vx, vz) = (css_sp(&dressed[i].x, &bare[j].z, d), css_sp(&bare[j].x, &dressed[i].z, d));
            if i == j {
                let bad = || CodeError::Construction(format!("dressed pair {i} is not a logical of pair {i}"));
                let (ix, iz) = (inv_mod(vx, d).ok_or_else(bad)?, inv_mod(vz, d).ok_or_else(bad)?);
                dressed[i].x = dressed[i].x.pow(ix as i64, d);
                dressed[i].z = dressed[i].z.pow(iz as i64, d);
            } else if vx != 0 || vz != 0 {
                return Err(CodeError::Construction(format!("dressed pair {i} acts on logical {j}")));
            }
        }
    }
    Ok(())
}

fn build_logicals(code: &SubsystemCode) -> Result<(Vec<LogicalPair>, Vec<LogicalPair>), CodeError> {
    let d = code.d;
    let (mut bare, mut dressed) = match code.lattice.manifold.kind {
        ManifoldKind::Cube => {
            let (x0, xb) = best_sheet(code, OpType::X, 0, &[])?;
            let (z0, zb) = best_sheet(code, OpType::Z, 2, &[])?;
            let bare = vec![LogicalPair { label: "yz".into(), x: xb, z: zb }];
            let xd = surface_string(code, OpType::X, 2, x0)?;
            let zd = surface_string(code, OpType::Z, 0, z0)?;
            (bare, vec![LogicalPair { label: "yz".into(), x: xd, z: zd }])
        }
        ManifoldKind::T2xI => {
            let (x0, x_yz) = best_sheet(code, OpType::X, 0, &[])?;
            let (z0, z_yz) = best_sheet(code, OpType::Z, 2, &[])?;
            let (z1, x_xy) = best_sheet(code, OpType::X, 2, &[z0])?;
            let (x1, z_xy) = best_sheet(code, OpType::Z, 0, &[x0])?;
            let bare = vec![
                LogicalPair { label: "yz".into(), x: x_yz, z: z_yz },
                LogicalPair { label: "xy".into(), x: x_xy, z: z_xy },
            ];
            let dressed = vec![
                LogicalPair {
                    label: "yz".into(),
                    x: surface_string(code, OpType::X, 2, x0)?,
                    z: surface_string(code, OpType::Z, 0, z0)?,
                },
                LogicalPair {
                    label: "xy".into(),
                    x: surface_string(code, OpType::X, 0, z1)?,
                    z: surface_string(code, OpType::Z, 2, x1)?,
                },
            ];
            (bare, dressed)
        }
        kind => return Err(CodeError::WrongManifold { expected: "cube or t2xi", got: kind }),
    };
    normalize_pairs(&mut bare, d)?;
    align_dressed(&bare, &mut dressed, d)?;
    Ok((bare, dressed))
}

/// Per red boundary cell with corner `(i, k)`, in order:
/// `C_X^dagger` from corner `(0,0)` to the plaquette, `C_X^dagger` from
/// corner `(1,0)` to the plaquette, `C_X` from the plaquette to corner
/// `(1,0)`, `C_X` from the plaquette to corner `(1,1)`. All first gates are
/// applied before any second gate, and so on. Corners are taken relative to
/// the cell in the top view `(x, z)`.
pub fn weight_reduction_circuit(lat: &Lattice) -> Circuit {
    let l = lat.manifold.l as i64;
    let plaquettes: Vec<(usize, Side, i64, i64)> = lat
        .qudits
        .iter()
        .enumerate()
        .filter_map(|(q, qd)| match qd.class {
            QuditClass::Plaquette(side) => Some((q, side, qd.vertex[0], qd.vertex[2])),
            _ => None,
        })
        .collect();
    let steps: [((i64, i64), bool, bool); 4] = [((0, 0), true, true), ((1, 0), true, true), ((1, 0), false, false), ((1, 1), false, false)];
    let mut gates = Vec::new();
    for &((dx, dz), into_plaquette, dagger) in &steps {
        for &(p, side, i, k) in &plaquettes {
            let corner = lat.column_qudit(side, (i + dx).rem_euclid(l), (k + dz).rem_euclid(l)).expect("corner column");
            let (control, target) = if into_plaquette { (corner, p) } else { (p, corner) };
            gates.push(CxGate { control, target, dagger });
        }
    }
    Circuit { gates }
}

/// Adds the plaquette qudits with their single-qudit X and Z gauge
/// generators, applies the weight-reduction circuit, and rewrites the gauge
/// generators into a set of weight at most three.
pub fn apply_weight_reduction(code: &SubsystemCode) -> Result<SubsystemCode, CodeError> {
    let m = code.lattice.manifold;
    if m.kind != ManifoldKind::T2xI || code.circuit.is_some() {
        return Err(CodeError::WrongManifold { expected: "t2xi", got: m.kind });
    }
    let d = code.d;
    let lattice = build_lattice(Manifold::new(ManifoldKind::T2xIPrime, m.l)?)?;
    if lattice.qudits[..code.lattice.n()] != code.lattice.qudits[..] {
        return Err(CodeError::Construction("plaquette lattice does not extend the base registry".into()));
    }
    let circuit = weight_reduction_circuit(&lattice);
    let conj = |op: &CssOp| circuit.apply_css(op, d);
    let terms: Vec<CssOp> = code.terms.iter().map(conj).collect();
    let mut gens: Vec<GaugeGen> = terms
        .iter()
        .enumerate()
        .map(|(t, op)| GaugeGen { op: op.clone(), color: Some(code.lattice.spheres[code.lattice.terms[t].sphere].color), term: Some(t) })
        .collect();
    for (q, qd) in lattice.qudits.iter().enumerate() {
        if matches!(qd.class, QuditClass::Plaquette(_)) {
            for ty in [OpType::X, OpType::Z] {
                gens.push(GaugeGen { op: conj(&CssOp::new(ty, [(q, 1)], d)), color: None, term: None });
            }
        }
    }
    let gauge_gens = drop_redundant_heavy(reduce_weights(gens, 3, d, lattice.n()), 3, d, lattice.n())?;
    let map_stab = |s: &StabGen| StabGen { op: conj(&s.op), ..s.clone() };
    let map_pair = |p: &LogicalPair| LogicalPair { label: p.label.clone(), x: conj(&p.x), z: conj(&p.z) };
    Ok(SubsystemCode {
        d,
        lattice,
        terms,
        gauge_gens,
        stabilizers: code.stabilizers.iter().map(map_stab).collect(),
        bare: code.bare.iter().map(map_pair).collect(),
        dressed: code.dressed.iter().map(map_pair).collect(),
        circuit: Some(circuit),
    })
}

/// Greedy rewriting of generators above `max_weight`: each heavy generator is
/// repeatedly multiplied by a power of an overlapping generator whenever
/// that lowers its weight. Generators that collapse to the identity are
/// dropped. The generated group is unchanged.
fn reduce_weights(mut gens: Vec<GaugeGen>, max_weight: usize, d: u32, n: usize) -> Vec<GaugeGen> {
    let mut touching: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, g) in gens.iter().enumerate() {
        for q in g.op.qudits() {
            touching[q].push(i);
        }
    }
    let mut alive = vec![true; gens.len()];
    for _pass in 0..8 {
        let mut changed = false;
        for h in 0..gens.len() {
            if !alive[h] || gens[h].op.weight() <= max_weight {
                continue;
            }
            loop {
                let cur = &gens[h].op;
                let mut best: Option<(usize, usize, i64)> = None;
                let mut cands: Vec<usize> = cur.qudits().flat_map(|q| touching[q].iter().copied()).collect();
                cands.sort_unstable();
                cands.dedup();
                for w in cands {
                    if w == h || !alive[w] || gens[w].op.ty != cur.ty {
                        continue;
                    }
                    for k in 1..d as i64 {
                        let wt = cur.mul_pow(&gens[w].op, k, d).weight();
                        if wt < best.map_or(cur.weight(), |b| b.0) {
                            best = Some((wt, w, k));
                        }
                    }
                }
                let Some((_, w, k)) = best else { break };
                let next = gens[h].op.mul_pow(&gens[w].op, k, d);
                for q in next.qudits() {
                    if !touching[q].contains(&h) {
                        touching[q].push(h);
                    }
                }
                gens[h].op = next;
                gens[h].color = None;
                gens[h].term = None;
                changed = true;
                if gens[h].op.is_identity() {
                    alive[h] = false;
                    break;
                }
                if gens[h].op.weight() <= max_weight {
                    break;
                }
            }
        }
        if !changed {
            break;
        }
    }
    gens.into_iter().zip(alive).filter(|(_, a)| *a).map(|(g, _)| g).collect()
}

/// Removes generators above `max_weight` that already lie in the group
/// generated by the light ones.
fn drop_redundant_heavy(gens: Vec<GaugeGen>, max_weight: usize, d: u32, n: usize) -> Result<Vec<GaugeGen>, CodeError> {
    if gens.iter().all(|g| g.op.weight() <= max_weight) {
        return Ok(gens);
    }
    let light = GroupBasis::new(gens.iter().filter(|g| g.op.weight() <= max_weight).map(|g| g.op.to_pauli(n, d)).collect())?;
    let mut out = Vec::with_capacity(gens.len());
    for g in gens {
        if g.op.weight() <= max_weight || !light.contains(&g.op.to_pauli(n, d))? {
            out.push(g);
        }
    }
    Ok(out)
}

/// The toric-code gauge fixing of the three-torus code: all local Z-type
/// stabilizers together with every X-type gauge generator.
pub fn gauge_fix_toric(code: &SubsystemCode) -> Result<Vec<CssOp>, CodeError> {
    let kind = code.lattice.manifold.kind;
    if kind != ManifoldKind::Torus3 {
        return Err(CodeError::WrongManifold { expected: "torus3", got: kind });
    }
    let mut out: Vec<CssOp> = code.stabilizers.iter().filter(|s| s.kind == StabKind::LocalZ).map(|s| s.op.clone()).collect();
    out.extend(code.gauge_gens.iter().filter(|g| g.op.ty == OpType::X).map(|g| g.op.clone()));
    Ok(out)
}

/// Outcome of a parameter check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub manifold: Manifold,
    pub d: u32,
    pub params: Params,
    pub expected_n: usize,
    pub expected_k: usize,
    pub max_gauge_weight: usize,
    /// Weights of the explicit bare and dressed X logicals (upper bounds on
    /// the distances).
    pub bare_weights: Vec<usize>,
    pub dressed_weights: Vec<usize>,
}

impl SubsystemCode {
    pub fn n(&self) -> usize {
        self.lattice.n()
    }

    pub fn manifold(&self) -> Manifold {
        self.lattice.manifold
    }

    pub fn max_gauge_weight(&self) -> usize {
        self.gauge_gens.iter().map(|g| g.op.weight()).max().unwrap_or(0)
    }

    pub fn stabilizers_of(&self, kind: StabKind) -> impl Iterator<Item = &StabGen> {
        self.stabilizers.iter().filter(move |s| s.kind == kind)
    }

    pub fn gauge_basis(&self) -> Result<GroupBasis, CodeError> {
        let n = self.n();
        Ok(GroupBasis::new(self.gauge_gens.iter().map(|g| g.op.to_pauli(n, self.d)).collect())?)
    }

    pub fn stabilizer_basis(&self) -> Result<GroupBasis, CodeError> {
        let n = self.n();
        Ok(GroupBasis::new(self.stabilizers.iter().map(|s| s.op.to_pauli(n, self.d)).collect())?)
    }

    /// `(n, s, r, k)` from the generated groups. Centrality of the
    /// stabilizers is checked sparsely before the group computation.
    pub fn params(&self) -> Result<Params, CodeError> {
        let d = self.d;
        for (si, s) in self.stabilizers.iter().enumerate() {
            for (gi, g) in self.gauge_gens.iter().enumerate() {
                if css_sp(&s.op, &g.op, d) != 0 {
                    return Err(AlgebraError::NotCentral { stab: si, gauge: gi }.into());
                }
            }
        }
        let gauge = self.gauge_basis()?;
        let stab = self.stabilizer_basis()?;
        for (si, s) in stab.gens().iter().enumerate() {
            if !gauge.contains(s)? {
                return Err(AlgebraError::NotInGauge(si).into());
            }
        }
        let n = self.n();
        let k = algebra::logical_qudits_unchecked(&gauge, &stab, n)?;
        let s = stab.mu();
        Ok(Params { n, s, r: n - s - k, k })
    }

    /// Compares `(n, k)` against the closed forms for the manifold.
    pub fn verify_parameters(&self) -> Result<VerifyReport, CodeError> {
        let params = self.params()?;
        let m = self.manifold();
        let (expected_n, expected_k) = (m.expected_n(), m.expected_k());
        if params.n != expected_n || params.k != expected_k {
            return Err(CodeError::TableMismatch {
                manifold: m.to_string(),
                n: params.n,
                k: params.k,
                expected_n,
                expected_k,
            });
        }
        Ok(VerifyReport {
            manifold: m,
            d: self.d,
            params,
            expected_n,
            expected_k,
            max_gauge_weight: self.max_gauge_weight(),
            bare_weights: self.bare.iter().map(|p| p.x.weight()).collect(),
            dressed_weights: self.dressed.iter().map(|p| p.z.weight()).collect(),
        })
    }

    /// Versioned JSON listing of generators.
    pub fn dump_json(&self) -> String {
        #[derive(Serialize)]
        struct Dump<'a> {
            format: &'static str,
            version: u32,
            manifold: Manifold,
            d: u32,
            n: usize,
            gauge: &'a [GaugeGen],
            stabilizers: &'a [StabGen],
            bare: &'a [LogicalPair],
            dressed: &'a [LogicalPair],
        }
        let dump = Dump {
            format: "saqd-code",
            version: 1,
            manifold: self.manifold(),
            d: self.d,
            n: self.n(),
            gauge: &self.gauge_gens,
            stabilizers: &self.stabilizers,
            bare: &self.bare,
            dressed: &self.dressed,
        };
        serde_json::to_string_pretty(&dump).expect("code dump serialises")
    }
}

/// Result of a bounded exhaustive distance search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DistanceBound {
    Exact(usize),
    AboveCap(usize),
}

/// Largest number of candidate operators a brute-force search may visit.
pub const DISTANCE_BUDGET: f64 = 2e9;

/// Minimum weight of a Z-type dressed logical: an operator that commutes
/// with every X-type stabilizer and has nonzero symplectic product with a
/// bare X logical (only logical `target` when given). Visits
/// `sum_{w <= cap} C(n, w) (d-1)^w` candidates.
pub fn brute_force_distance(code: &SubsystemCode, cap: usize, target: Option<usize>) -> Result<DistanceBound, CodeError> {
    if code.bare.is_empty() {
        return Err(CodeError::NoLogicals);
    }
    let n = code.n();
    let d = code.d;
    let mut cost = 0.0;
    let mut binom = 1.0;
    for w in 1..=cap {
        binom = binom * (n + 1 - w) as f64 / w as f64;
        cost += binom * ((d - 1) as f64).powi(w as i32);
    }
    if cost > DISTANCE_BUDGET {
        return Err(CodeError::CapTooLarge { cap, cost });
    }
    let stabs: Vec<&StabGen> = code.stabilizers.iter().filter(|s| s.op.ty == OpType::X).collect();
    let mut cols: Vec<Vec<(usize, u32)>> = vec![Vec::new(); n];
    for (i, s) in stabs.iter().enumerate() {
        for &(q, e) in &s.op.support {
            cols[q].push((i, e));
        }
    }
    let logicals: Vec<&CssOp> = match target {
        Some(t) => vec![&code.bare.get(t).ok_or(CodeError::NoLogicals)?.x],
        None => code.bare.iter().map(|p| &p.x).collect(),
    };
    let mut lcols: Vec<Vec<(usize, u32)>> = vec![Vec::new(); n];
    for (i, l) in logicals.iter().enumerate() {
        for &(q, e) in &l.support {
            lcols[q].push((i, e));
        }
    }
    struct Search<'a> {
        d: u32,
        cols: &'a [Vec<(usize, u32)>],
        lcols: &'a [Vec<(usize, u32)>],
        syn: Vec<u32>,
        nonzero: usize,
        log: Vec<u32>,
    }
    impl Search<'_> {
        fn apply(&mut self, q: usize, e: u32, sign: i64) {
            let d = self.d;
            for &(i, c) in &self.cols[q] {
                let before = self.syn[i];
                self.syn[i] = modd(before as i64 + sign * (c as i64 * e as i64), d);
                self.nonzero = self.nonzero + (self.syn[i] != 0) as usize - (before != 0) as usize;
            }
            for &(i, c) in &self.lcols[q] {
                self.log[i] = modd(self.log[i] as i64 + sign * (c as i64 * e as i64), d);
            }
        }
        fn dfs(&mut self, start: usize, left: usize, n: usize) -> bool {
            if left == 0 {
                return self.nonzero == 0 && self.log.iter().any(|&v| v != 0);
            }
            for q in start..=n - left {
                for e in 1..self.d {
                    self.apply(q, e, 1);
                    let found = self.dfs(q + 1, left - 1, n);
                    self.apply(q, e, -1);
                    if found {
                        return true;
                    }
                }
            }
            false
        }
    }
    let mut s = Search { d, cols: &cols, lcols: &lcols, syn: vec![0; stabs.len()], nonzero: 0, log: vec![0; logicals.len()] };
    for w in 1..=cap.min(n) {
        if s.dfs(0, w, n) {
            return Ok(DistanceBound::Exact(w));
        }
    }
    Ok(DistanceBound::AboveCap(cap))
}

/// Colour of each gauge term's sphere, and whether it sits on a bigon or a
/// macroscopic surface.
pub fn term_sphere_kind(code: &SubsystemCode, t: usize) -> (Color, SphereKind) {
    let s = &code.lattice.spheres[code.lattice.terms[t].sphere];
    (s.color, s.kind)
}
