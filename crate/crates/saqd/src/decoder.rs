//! Two-stage decoding: flux validation against the local relations, then
//! qudit correction against the local X-type stabilizers. Both stages decode
//! a check matrix whose columns have at most two entries, using either a
//! clustering decoder (any `d`) or minimum-weight perfect matching (`d = 2`).

use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};

use fusion_blossom::mwpm_solver::{PrimalDualSolver, SolverSerial};
use fusion_blossom::util::{SolverInitializer, SyndromePattern, VertexIndex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{inv_mod, modd};
use crate::code::{lattice_term_op, CssOp, OpType, StabKind, SubsystemCode};
use crate::lattice::{Color, Lattice, TermKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecoderError {
    #[error("column {col} has {entries} nonzero entries, at most 2 allowed")]
    ColumnTooDense { col: usize, entries: usize },
    #[error("column {col} references row {row} of {rows}")]
    RowOutOfRange { col: usize, row: usize, rows: usize },
    #[error("column {col} cannot be brought to the form (a, -a) by row signs")]
    Unsignable { col: usize },
    #[error("column {col} has a non-invertible entry")]
    NonUnit { col: usize },
    #[error("syndrome length {got} does not match {expected} checks")]
    SyndromeLength { got: usize, expected: usize },
    #[error("matching decoder needs d = 2, got {0}")]
    MatchingNeedsBinary(u32),
    #[error("syndrome has a charged component that cannot reach the boundary")]
    Unsatisfiable,
    #[error("decoder output does not reproduce the syndrome")]
    Contract,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Clustering,
    Matching,
}

impl DecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Clustering => "clustering",
            Self::Matching => "matching",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clustering" | "cluster" | "c" => Some(Self::Clustering),
            "matching" | "mwpm" | "m" => Some(Self::Matching),
            _ => None,
        }
    }
}

impl std::fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Validation and correction decoders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecoderPair {
    pub validator: DecoderKind,
    pub corrector: DecoderKind,
}

/// Sparse matrix over `Z_d` stored by column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckMatrix {
    d: u32,
    rows: usize,
    cols: Vec<Vec<(usize, u32)>>,
}

impl CheckMatrix {
    /// Builds from columns of `(row, value)`; duplicate rows are summed and
    /// zeros dropped.
    pub fn from_columns(d: u32, rows: usize, cols: Vec<Vec<(usize, i64)>>) -> Result<Self, DecoderError> {
        let mut out = Vec::with_capacity(cols.len());
        for (j, col) in cols.into_iter().enumerate() {
            let mut c: Vec<(usize, u32)> = Vec::with_capacity(2);
            for (r, v) in col {
                if r >= rows {
                    return Err(DecoderError::RowOutOfRange { col: j, row: r, rows });
                }
                match c.iter_mut().find(|(rr, _)| *rr == r) {
                    Some(e) => e.1 = modd(e.1 as i64 + v, d),
                    None => c.push((r, modd(v, d))),
                }
            }
            c.retain(|&(_, v)| v != 0);
            c.sort_unstable();
            if c.len() > 2 {
                return Err(DecoderError::ColumnTooDense { col: j, entries: c.len() });
            }
            out.push(c);
        }
        Ok(Self { d, rows, cols: out })
    }

    /// Builds from rows of `(column, value)`.
    pub fn from_rows(d: u32, ncols: usize, rows: &[Vec<(usize, i64)>]) -> Result<Self, DecoderError> {
        let mut cols: Vec<Vec<(usize, i64)>> = vec![Vec::new(); ncols];
        for (r, row) in rows.iter().enumerate() {
            for &(c, v) in row {
                cols[c].push((r, v));
            }
        }
        Self::from_columns(d, rows.len(), cols)
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn m(&self) -> usize {
        self.rows
    }

    pub fn n(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, j: usize) -> &[(usize, u32)] {
        &self.cols[j]
    }

    pub fn syndrome(&self, y: &[u32]) -> Vec<u32> {
        let d = self.d as u64;
        let mut s = vec![0u64; self.rows];
        for (col, &v) in self.cols.iter().zip(y) {
            if v != 0 {
                for &(r, a) in col {
                    s[r] = (s[r] + a as u64 * v as u64) % d;
                }
            }
        }
        s.into_iter().map(|v| v as u32).collect()
    }

    /// Header `m n d` followed by one `row col value` line per entry.
    pub fn to_sparse_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.rows, self.cols.len(), self.d);
        for (j, col) in self.cols.iter().enumerate() {
            for &(r, v) in col {
                writeln!(out, "{r} {j} {v}").expect("write to string");
            }
        }
        out
    }
}

const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphEdge {
    pub u: usize,
    /// Second endpoint; the auxiliary node for single-entry columns.
    pub v: usize,
    /// Signed coefficient at `u`; the one at `v` is its negative.
    pub coef: u32,
    inv: u32,
}

/// Graph with one node per check, one auxiliary node and one edge per
/// variable. Rows are multiplied by signs so that every two-entry column
/// reads `(a, -a)`; charges are then conserved as plain sums.
#[derive(Clone, Debug)]
pub struct SyndromeGraph {
    d: u32,
    checks: usize,
    sign: Vec<i8>,
    edges: Vec<GraphEdge>,
    adj_start: Vec<usize>,
    adj: Vec<(usize, usize)>,
    /// Distinguishes graphs for per-graph solver caches.
    uid: u64,
}

static NEXT_GRAPH: AtomicU64 = AtomicU64::new(0);

impl SyndromeGraph {
    pub fn new(h: &CheckMatrix) -> Result<Self, DecoderError> {
        let (d, m) = (h.d, h.rows);
        let mut by_row: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (j, col) in h.cols.iter().enumerate() {
            for &(r, _) in col {
                by_row[r].push(j);
            }
        }
        let mut sign = vec![0i8; m];
        for start in 0..m {
            if sign[start] != 0 {
                continue;
            }
            sign[start] = 1;
            let mut queue = VecDeque::from([start]);
            while let Some(r) = queue.pop_front() {
                for &j in &by_row[r] {
                    let col = &h.cols[j];
                    if col.len() != 2 {
                        continue;
                    }
                    let (mine, other) = if col[0].0 == r { (col[0], col[1]) } else { (col[1], col[0]) };
                    let want = if (mine.1 + other.1) % d == 0 {
                        sign[r]
                    } else if mine.1 == other.1 {
                        -sign[r]
                    } else {
                        return Err(DecoderError::Unsignable { col: j });
                    };
                    if sign[other.0] == 0 {
                        sign[other.0] = want;
                        queue.push_back(other.0);
                    } else if sign[other.0] != want {
                        return Err(DecoderError::Unsignable { col: j });
                    }
                }
            }
        }
        let aux = m;
        let mut edges = Vec::with_capacity(h.cols.len());
        for (j, col) in h.cols.iter().enumerate() {
            let edge = match col.as_slice() {
                [] => GraphEdge { u: aux, v: aux, coef: 1, inv: 1 },
                [(u, a)] | [(u, a), _] => {
                    let coef = if sign[*u] > 0 { *a } else { d - a };
                    let inv = inv_mod(coef, d).ok_or(DecoderError::NonUnit { col: j })?;
                    let v = col.get(1).map_or(aux, |e| e.0);
                    GraphEdge { u: *u, v, coef, inv }
                }
                _ => unreachable!("columns are validated on construction"),
            };
            edges.push(edge);
        }
        let mut lists: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m + 1];
        for (e, ge) in edges.iter().enumerate() {
            if ge.u != ge.v {
                lists[ge.u].push((ge.v, e));
                lists[ge.v].push((ge.u, e));
            }
        }
        let mut adj_start = Vec::with_capacity(m + 2);
        let mut adj = Vec::new();
        for mut l in lists {
            l.sort_unstable();
            adj_start.push(adj.len());
            adj.extend(l);
        }
        adj_start.push(adj.len());
        let uid = NEXT_GRAPH.fetch_add(1, Ordering::Relaxed);
        Ok(Self { d, checks: m, sign, edges, adj_start, adj, uid })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    /// Number of check nodes (the auxiliary node is index `checks()`).
    pub fn checks(&self) -> usize {
        self.checks
    }

    pub fn aux(&self) -> usize {
        self.checks
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn row_sign(&self, r: usize) -> i8 {
        self.sign[r]
    }

    /// Neighbours of a node as `(node, edge)`, ascending by node.
    pub fn neighbors(&self, x: usize) -> &[(usize, usize)] {
        &self.adj[self.adj_start[x]..self.adj_start[x + 1]]
    }

    /// Signed coefficient of edge `e` at endpoint `x` and its inverse.
    fn coef_at(&self, e: usize, x: usize) -> (u32, u32) {
        let ge = &self.edges[e];
        if ge.u == x {
            (ge.coef, ge.inv)
        } else {
            ((self.d - ge.coef) % self.d, (self.d - ge.inv) % self.d)
        }
    }

    /// Syndrome charges in the signed frame.
    fn charges(&self, sigma: &[u32]) -> Result<Vec<u32>, DecoderError> {
        if sigma.len() != self.checks {
            return Err(DecoderError::SyndromeLength { got: sigma.len(), expected: self.checks });
        }
        let d = self.d;
        let mut c: Vec<u32> = sigma.iter().zip(&self.sign).map(|(&s, &e)| if e > 0 { s % d } else { (d - s % d) % d }).collect();
        c.push(0);
        Ok(c)
    }

    /// Syndrome of an edge vector, in the original (unsigned) frame.
    pub fn syndrome(&self, y: &[u32]) -> Vec<u32> {
        let d = self.d as u64;
        let mut s = vec![0u64; self.checks + 1];
        for (ge, &v) in self.edges.iter().zip(y) {
            if v == 0 || ge.u == ge.v {
                continue;
            }
            s[ge.u] = (s[ge.u] + ge.coef as u64 * v as u64) % d;
            s[ge.v] = (s[ge.v] + (d - ge.coef as u64) * v as u64) % d;
        }
        s.truncate(self.checks);
        s.into_iter()
            .zip(&self.sign)
            .map(|(v, &e)| if e > 0 { v as u32 } else { ((d - v) % d) as u32 })
            .collect()
    }
}

#[derive(Clone, Debug, Default)]
struct Cluster {
    members: Vec<usize>,
    frontier: Vec<usize>,
    root: usize,
    charge: u32,
    has_aux: bool,
    alive: bool,
}

impl Cluster {
    fn neutral(&self) -> bool {
        self.charge == 0 || self.has_aux
    }
}

/// Grow/merge/neutralize clustering decoder with reusable scratch space.
#[derive(Clone, Debug, Default)]
pub struct ClusterDecoder {
    d: u32,
    owner: Vec<usize>,
    parent: Vec<usize>,
    pedge: Vec<usize>,
    clusters: Vec<Cluster>,
}

impl ClusterDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `y` with `H y = sigma`. Each epoch grows every non-neutral
    /// cluster by one hop (clusters in creation order, neighbours in
    /// ascending order). A cluster stops growing for the epoch once it
    /// reaches the auxiliary node or touches clusters whose combined charge
    /// with its own is zero. Recorded merges are then applied, attaching the
    /// smaller cluster under the larger, and every neutral cluster is
    /// neutralized by pushing charges to its root, or to the auxiliary node
    /// when it holds it, and dissolved so its nodes are free again.
    pub fn decode(&mut self, g: &SyndromeGraph, sigma: &[u32]) -> Result<Vec<u32>, DecoderError> {
        let mut charge = g.charges(sigma)?;
        let nodes = g.checks + 1;
        let aux = g.aux();
        let d = g.d;
        self.d = d;
        self.owner.clear();
        self.owner.resize(nodes, NONE);
        self.parent.clear();
        self.parent.resize(nodes, NONE);
        self.pedge.clear();
        self.pedge.resize(nodes, NONE);
        self.clusters.clear();
        for x in 0..g.checks {
            if charge[x] != 0 {
                self.owner[x] = self.clusters.len();
                self.clusters.push(Cluster { members: vec![x], frontier: vec![x], root: x, charge: charge[x], has_aux: false, alive: true });
            }
        }
        let mut y = vec![0u32; g.edges.len()];
        let mut merges: Vec<(usize, usize, usize)> = Vec::new();
        let mut partners: Vec<usize> = Vec::new();
        loop {
            let active: Vec<usize> = (0..self.clusters.len()).filter(|&c| self.clusters[c].alive).collect();
            if active.is_empty() {
                break;
            }
            merges.clear();
            let mut grew = false;
            for &c in &active {
                let frontier = std::mem::take(&mut self.clusters[c].frontier);
                let mut next = Vec::new();
                partners.clear();
                let mut combined = self.clusters[c].charge;
                let mut stop = None;
                'scan: for (i, &x) in frontier.iter().enumerate() {
                    for &(w, e) in g.neighbors(x) {
                        let o = self.owner[w];
                        if o == NONE {
                            self.owner[w] = c;
                            self.parent[w] = x;
                            self.pedge[w] = e;
                            self.clusters[c].members.push(w);
                            next.push(w);
                            grew = true;
                            if w == aux {
                                self.clusters[c].has_aux = true;
                                stop = Some(i);
                                break 'scan;
                            }
                        } else if o != c {
                            merges.push((x, w, e));
                            if !partners.contains(&o) {
                                partners.push(o);
                                combined = (combined + self.clusters[o].charge) % d;
                                if combined == 0 {
                                    stop = Some(i);
                                    break 'scan;
                                }
                            }
                        }
                    }
                }
                if let Some(i) = stop {
                    next.extend_from_slice(&frontier[i..]);
                }
                self.clusters[c].frontier = next;
            }
            if !grew && merges.is_empty() {
                return Err(DecoderError::Unsatisfiable);
            }
            for &(x, w, e) in &merges {
                self.merge(x, w, e);
            }
            for c in 0..self.clusters.len() {
                let cl = &self.clusters[c];
                if cl.alive && cl.neutral() {
                    self.neutralize(g, c, &mut charge, &mut y, d);
                }
            }
        }
        if g.syndrome(&y) != sigma.iter().map(|&s| s % d).collect::<Vec<_>>() {
            return Err(DecoderError::Contract);
        }
        Ok(y)
    }

    fn merge(&mut self, x: usize, w: usize, e: usize) {
        let (a, b) = (self.owner[x], self.owner[w]);
        if a == b {
            return;
        }
        let (sa, sb) = (self.clusters[a].members.len(), self.clusters[b].members.len());
        let (small, large, s_node, l_node) = if sa < sb || (sa == sb && a > b) { (a, b, x, w) } else { (b, a, w, x) };
        self.reroot(s_node);
        self.parent[s_node] = l_node;
        self.pedge[s_node] = e;
        let moved = std::mem::take(&mut self.clusters[small]);
        for &m in &moved.members {
            self.owner[m] = large;
        }
        let d_charge = moved.charge;
        let l = &mut self.clusters[large];
        l.members.extend(moved.members);
        l.frontier.extend(moved.frontier);
        l.charge = (l.charge + d_charge) % self.d;
        l.has_aux |= moved.has_aux;
    }

    /// Makes `u` the root of its tree by reversing the path to the old root.
    fn reroot(&mut self, u: usize) {
        let (mut prev, mut prev_e, mut cur) = (NONE, NONE, u);
        loop {
            let (next, ne) = (self.parent[cur], self.pedge[cur]);
            self.parent[cur] = prev;
            self.pedge[cur] = prev_e;
            if next == NONE {
                break;
            }
            prev = cur;
            prev_e = ne;
            cur = next;
        }
        let c = self.owner[u];
        if c != NONE {
            self.clusters[c].root = u;
        }
    }

    fn neutralize(&mut self, g: &SyndromeGraph, c: usize, charge: &mut [u32], y: &mut [u32], d: u32) {
        let aux = g.aux();
        if self.clusters[c].has_aux && self.clusters[c].root != aux {
            self.reroot(aux);
        }
        let root = self.clusters[c].root;
        let members = std::mem::take(&mut self.clusters[c].members);
        for &x in &members {
            let q = charge[x];
            if x == root || q == 0 {
                continue;
            }
            charge[x] = 0;
            let mut cur = x;
            while cur != root {
                let e = self.pedge[cur];
                let (_, inv) = g.coef_at(e, cur);
                y[e] = ((y[e] as u64 + q as u64 * inv as u64) % d as u64) as u32;
                cur = self.parent[cur];
            }
            if root != aux {
                charge[root] = (charge[root] + q) % d;
            }
        }
        for &x in &members {
            self.owner[x] = NONE;
            self.parent[x] = NONE;
            self.pedge[x] = NONE;
        }
        self.clusters[c] = Cluster::default();
    }
}

/// Convenience wrapper around [`ClusterDecoder::decode`].
pub fn cluster_decode(g: &SyndromeGraph, sigma: &[u32]) -> Result<Vec<u32>, DecoderError> {
    ClusterDecoder::new().decode(g, sigma)
}

/// Exact minimum-weight perfect matching decoder for `d = 2`. Every edge of
/// the syndrome graph has unit weight and the auxiliary node is a boundary
/// vertex that absorbs any number of defects, so the correction has minimum
/// hop-count weight among all `y` with `H y = sigma`. Solvers are built
/// lazily, one per graph.
#[derive(Default)]
pub struct MatchingDecoder {
    solvers: Vec<(u64, SolverSerial)>,
    stamp: Vec<u32>,
    epoch: u32,
    via: Vec<usize>,
    queue: VecDeque<usize>,
}

fn matching_solver(g: &SyndromeGraph) -> SolverSerial {
    let mut seen = HashSet::new();
    let mut weighted = Vec::new();
    for ge in &g.edges {
        let key = (ge.u.min(ge.v), ge.u.max(ge.v));
        if ge.u != ge.v && seen.insert(key) {
            weighted.push((key.0 as VertexIndex, key.1 as VertexIndex, 2));
        }
    }
    SolverSerial::new(&SolverInitializer::new((g.checks + 1) as VertexIndex, weighted, vec![g.aux() as VertexIndex]))
}

impl std::fmt::Debug for MatchingDecoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MatchingDecoder").field("graphs", &self.solvers.len()).finish()
    }
}

impl MatchingDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn decode(&mut self, g: &SyndromeGraph, sigma: &[u32]) -> Result<Vec<u32>, DecoderError> {
        if g.d != 2 {
            return Err(DecoderError::MatchingNeedsBinary(g.d));
        }
        if sigma.len() != g.checks {
            return Err(DecoderError::SyndromeLength { got: sigma.len(), expected: g.checks });
        }
        let mut y = vec![0u32; g.edges.len()];
        let defects: Vec<VertexIndex> = (0..g.checks).filter(|&x| sigma[x] % 2 == 1).map(|x| x as VertexIndex).collect();
        if defects.is_empty() {
            return Ok(y);
        }
        let slot = match self.solvers.iter().position(|(id, _)| *id == g.uid) {
            Some(i) => i,
            None => {
                self.solvers.push((g.uid, matching_solver(g)));
                self.solvers.len() - 1
            }
        };
        let solver = &mut self.solvers[slot].1;
        solver.solve(&SyndromePattern::new_vertices(defects));
        let matching = solver.perfect_matching();
        solver.clear();
        let pairs: Vec<(usize, usize)> = matching
            .peer_matchings
            .iter()
            .map(|(a, b)| (a.get_representative_vertex() as usize, b.get_representative_vertex() as usize))
            .chain(matching.virtual_matchings.iter().map(|(a, v)| (a.get_representative_vertex() as usize, *v as usize)))
            .collect();
        for (a, b) in pairs {
            self.shortest_path(g, a, b, &mut y)?;
        }
        if g.syndrome(&y) != sigma.iter().map(|&s| s % 2).collect::<Vec<_>>() {
            return Err(DecoderError::Contract);
        }
        Ok(y)
    }

    /// Flips the edges of one shortest path from `a` to `b`.
    fn shortest_path(&mut self, g: &SyndromeGraph, a: usize, b: usize, y: &mut [u32]) -> Result<(), DecoderError> {
        let nodes = g.checks + 1;
        if self.stamp.len() < nodes {
            self.stamp.resize(nodes, 0);
            self.via.resize(nodes, NONE);
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
        self.queue.clear();
        self.stamp[a] = self.epoch;
        self.queue.push_back(a);
        while let Some(x) = self.queue.pop_front() {
            if x == b {
                break;
            }
            for &(nb, e) in g.neighbors(x) {
                if self.stamp[nb] != self.epoch {
                    self.stamp[nb] = self.epoch;
                    self.via[nb] = e;
                    self.queue.push_back(nb);
                }
            }
        }
        if self.stamp[b] != self.epoch {
            return Err(DecoderError::Unsatisfiable);
        }
        let mut x = b;
        while x != a {
            let e = self.via[x];
            y[e] ^= 1;
            let ge = &g.edges[e];
            x = if ge.u == x { ge.v } else { ge.u };
        }
        Ok(())
    }
}

/// Convenience wrapper around [`MatchingDecoder::decode`].
pub fn mwpm_decode(g: &SyndromeGraph, sigma: &[u32]) -> Result<Vec<u32>, DecoderError> {
    MatchingDecoder::new().decode(g, sigma)
}

/// Lattice terms measured each cycle (all X-type terms), in term order.
pub fn flux_terms(lat: &Lattice) -> Vec<usize> {
    (0..lat.terms.len()).filter(|&t| lat.terms[t].kind == TermKind::Face).collect()
}

fn flux_index(lat: &Lattice) -> Vec<usize> {
    let mut idx = vec![NONE; lat.terms.len()];
    for (i, t) in flux_terms(lat).into_iter().enumerate() {
        idx[t] = i;
    }
    idx
}

/// Local relations among flux outcomes: zero total flux into every sphere
/// whose faces multiply to the identity,
/// and equal green and yellow flux out of every red cell whose two colour
/// products agree.
pub fn build_validation_checks(code: &SubsystemCode) -> Result<CheckMatrix, DecoderError> {
    let lat = &code.lattice;
    let d = code.d;
    let idx = flux_index(lat);
    let mut rows: Vec<Vec<(usize, i64)>> = Vec::new();
    for sphere in &lat.spheres {
        let faces: Vec<usize> = sphere.terms.iter().copied().filter(|&t| lat.terms[t].kind == TermKind::Face).collect();
        if faces.is_empty() {
            continue;
        }
        let prod = faces.iter().fold(CssOp::identity(OpType::X), |acc, &t| acc.mul(&lattice_term_op(lat, t, d), d));
        if prod.is_identity() {
            rows.push(faces.iter().map(|&t| (idx[t], 1)).collect());
        }
    }
    let mut per_cell: Vec<[Vec<usize>; 2]> = vec![[Vec::new(), Vec::new()]; lat.cells.len()];
    for &t in &flux_terms(lat) {
        let colour = lat.spheres[lat.terms[t].sphere].color;
        per_cell[lat.terms[t].cell][(colour == Color::Yellow) as usize].push(t);
    }
    for [green, yellow] in per_cell {
        if green.is_empty() && yellow.is_empty() {
            continue;
        }
        let prod = |ts: &[usize]| ts.iter().fold(CssOp::identity(OpType::X), |acc, &t| acc.mul(&lattice_term_op(lat, t, d), d));
        if prod(&green) == prod(&yellow) {
            let mut row: Vec<(usize, i64)> = green.iter().map(|&t| (idx[t], 1)).collect();
            row.extend(yellow.iter().map(|&t| (idx[t], -1)));
            rows.push(row);
        }
    }
    CheckMatrix::from_rows(d, idx.iter().filter(|&&i| i != NONE).count(), &rows)
}

/// Local X-type stabilizers (as products of their green faces, before any
/// weight-reduction circuit) against the qudits.
pub fn build_correction_checks(code: &SubsystemCode) -> Result<CheckMatrix, DecoderError> {
    let lat = &code.lattice;
    let d = code.d;
    let rows: Vec<Vec<(usize, i64)>> = code
        .stabilizers_of(StabKind::LocalX)
        .map(|s| {
            let op = s.green_terms.iter().fold(CssOp::identity(OpType::X), |acc, &t| acc.mul(&lattice_term_op(lat, t, d), d));
            op.support.iter().map(|&(q, e)| (q, e as i64)).collect()
        })
        .collect();
    CheckMatrix::from_rows(d, lat.n(), &rows)
}

/// Both decoding stages for one code, shared read-only between workers.
#[derive(Clone, Debug)]
pub struct TwoStageDecoder {
    pub d: u32,
    pub h1: CheckMatrix,
    pub g1: SyndromeGraph,
    pub h2: CheckMatrix,
    pub g2: SyndromeGraph,
    /// For each correction check, the flux indices of its green faces.
    pub stab_flux: Vec<Vec<usize>>,
}

/// Per-worker scratch space.
#[derive(Debug, Default)]
pub struct DecoderScratch {
    pub cluster: ClusterDecoder,
    pub matching: MatchingDecoder,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageOutput {
    pub corrected_flux: Vec<u32>,
    /// Z exponents to remove from the residual.
    pub correction: Vec<u32>,
}

impl DecoderScratch {
    pub fn run(&mut self, kind: DecoderKind, g: &SyndromeGraph, sigma: &[u32]) -> Result<Vec<u32>, DecoderError> {
        match kind {
            DecoderKind::Clustering => self.cluster.decode(g, sigma),
            DecoderKind::Matching => self.matching.decode(g, sigma),
        }
    }
}

impl TwoStageDecoder {
    pub fn new(code: &SubsystemCode) -> Result<Self, DecoderError> {
        let h1 = build_validation_checks(code)?;
        let g1 = SyndromeGraph::new(&h1)?;
        let h2 = build_correction_checks(code)?;
        let g2 = SyndromeGraph::new(&h2)?;
        let idx = flux_index(&code.lattice);
        let stab_flux = code.stabilizers_of(StabKind::LocalX).map(|s| s.green_terms.iter().map(|&t| idx[t]).collect()).collect();
        Ok(Self { d: code.d, h1, g1, h2, g2, stab_flux })
    }

    /// Stabilizer syndrome read off green flux.
    pub fn stabilizer_syndrome(&self, flux: &[u32]) -> Vec<u32> {
        let d = self.d as u64;
        self.stab_flux.iter().map(|fs| (fs.iter().map(|&f| flux[f] as u64).sum::<u64>() % d) as u32).collect()
    }

    pub fn decode(&self, noisy_flux: &[u32], pair: DecoderPair, scratch: &mut DecoderScratch) -> Result<StageOutput, DecoderError> {
        let d = self.d;
        let sigma1 = self.h1.syndrome(noisy_flux);
        let mut corrected_flux = noisy_flux.to_vec();
        if sigma1.iter().any(|&v| v != 0) {
            let y1 = scratch.run(pair.validator, &self.g1, &sigma1)?;
            for (f, v) in corrected_flux.iter_mut().zip(&y1) {
                *f = (*f + d - v) % d;
            }
        }
        let sigma2 = self.stabilizer_syndrome(&corrected_flux);
        let correction = if sigma2.iter().any(|&v| v != 0) {
            scratch.run(pair.corrector, &self.g2, &sigma2)?
        } else {
            vec![0; self.h2.n()]
        };
        Ok(StageOutput { corrected_flux, correction })
    }
}

/// Convenience wrapper around [`TwoStageDecoder::decode`].
pub fn two_stage_decode(dec: &TwoStageDecoder, noisy_flux: &[u32], pair: DecoderPair) -> Result<StageOutput, DecoderError> {
    dec.decode(noisy_flux, pair, &mut DecoderScratch::default())
}
