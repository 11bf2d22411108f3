//! Cubic-lattice geometry for the supported manifolds.
//!
//! Vertices of the cubic lattice carry the spheres of the construction: a
//! vertex is green when `x + y + z` is even and yellow otherwise. Unit cells
//! are blue when the coordinate sum of their minimal corner is even and red
//! otherwise. Around a vertex, the octant `s` in `{-1,+1}^3` is the unit cell
//! with corner `v + (s - 1) / 2`; blue octants become the four vertices of the
//! sphere's tetrahedral triangulation and red octants its four faces.
//!
//! Qudits live on cubic edges. The edge from `v` along `s_a e_a` is dual to
//! the blue edge joining the two blue octants with that `s_a`; its direction
//! is `e_b + pi(v) s_a e_c` with `b < c` the other axes and `pi = +1` for green
//! `v`, `-1` for yellow. This is the same vector seen from either endpoint, so
//! the orientation is translation invariant.
//!
//! `y` is the open direction of `T2xI` and `Cube`. Above the top layer sits a
//! green macroscopic surface and below the bottom layer a yellow one; a
//! vertical half-edge joins each boundary vertex to its surface, and boundary
//! vertices of the surface colour get an extra two-qudit bigon sphere of the
//! opposite colour in between. On the `Cube` the `x` faces are smooth and the
//! `z` faces rough: a term attached to a cell outside the lattice in `x` is
//! kept only if it is a vertex term, outside in `z` only if it is a face term,
//! and outside in both never.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("linear size must be even, got {0}")]
    OddSize(usize),
    #[error("linear size must be at least 2, got {0}")]
    TooSmall(usize),
    #[error("unknown manifold {0:?}")]
    UnknownManifold(String),
    #[error("sphere index {0} out of range")]
    InvalidSphere(usize),
    #[error("cell index {0} out of range")]
    InvalidCell(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ManifoldKind {
    #[serde(rename = "torus3")]
    Torus3,
    #[serde(rename = "t2xi")]
    T2xI,
    #[serde(rename = "t2xi-prime")]
    T2xIPrime,
    #[serde(rename = "cube")]
    Cube,
}

impl ManifoldKind {
    pub const ALL: [ManifoldKind; 4] = [Self::Torus3, Self::T2xI, Self::T2xIPrime, Self::Cube];

    pub fn name(self) -> &'static str {
        match self {
            Self::Torus3 => "torus3",
            Self::T2xI => "t2xi",
            Self::T2xIPrime => "t2xi-prime",
            Self::Cube => "cube",
        }
    }

    pub fn parse(s: &str) -> Result<Self, LatticeError> {
        match s.to_ascii_lowercase().as_str() {
            "torus3" | "t3" | "torus" => Ok(Self::Torus3),
            "t2xi" => Ok(Self::T2xI),
            "t2xi-prime" | "t2xiprime" | "t2xi'" => Ok(Self::T2xIPrime),
            "cube" | "i3" => Ok(Self::Cube),
            _ => Err(LatticeError::UnknownManifold(s.to_string())),
        }
    }

    fn periodic(self, axis: usize) -> bool {
        match self {
            Self::Torus3 => true,
            Self::T2xI | Self::T2xIPrime => axis != 1,
            Self::Cube => false,
        }
    }

    fn has_surfaces(self) -> bool {
        self != Self::Torus3
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A manifold together with its linear size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Manifold {
    pub kind: ManifoldKind,
    pub l: usize,
}

impl Manifold {
    pub fn new(kind: ManifoldKind, l: usize) -> Result<Self, LatticeError> {
        if l < 2 {
            return Err(LatticeError::TooSmall(l));
        }
        if l % 2 != 0 {
            return Err(LatticeError::OddSize(l));
        }
        Ok(Self { kind, l })
    }

    /// Closed-form qudit count.
    pub fn expected_n(&self) -> usize {
        let l = self.l;
        match self.kind {
            ManifoldKind::Torus3 => 3 * l * l * l,
            ManifoldKind::T2xI => 3 * l * l * l + 2 * l * l,
            ManifoldKind::T2xIPrime => 3 * l * l * l + 3 * l * l,
            ManifoldKind::Cube => 3 * l * l * l + 6 * l * l + 5 * l + 1,
        }
    }

    /// Number of logical qudits.
    pub fn expected_k(&self) -> usize {
        match self.kind {
            ManifoldKind::Torus3 => 0,
            ManifoldKind::T2xI | ManifoldKind::T2xIPrime => 2,
            ManifoldKind::Cube => 1,
        }
    }
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} L={}", self.kind, self.l)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Color {
    Green,
    Yellow,
}

impl Color {
    pub fn other(self) -> Self {
        match self {
            Self::Green => Self::Yellow,
            Self::Yellow => Self::Green,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Side {
    Top,
    Bottom,
}

impl Side {
    /// Unit step along `y` pointing away from the bulk.
    pub fn outward(self) -> i64 {
        match self {
            Self::Top => 1,
            Self::Bottom => -1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum QuditClass {
    /// A full cubic edge.
    Bulk,
    /// Vertical half-edge from a boundary vertex straight to the surface.
    Dangling(Side),
    /// Half-edge between a boundary vertex and its bigon.
    Inner(Side),
    /// Half-edge between a bigon and the surface.
    Outer(Side),
    /// Extra qudit on a red boundary plaquette of the three-body variant.
    Plaquette(Side),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Qudit {
    /// Lower endpoint for bulk edges, boundary vertex for half-edges, cell
    /// corner for plaquette qudits.
    pub vertex: [i64; 3],
    pub axis: usize,
    pub class: QuditClass,
    /// Direction of the dual blue edge (zero for plaquette qudits).
    pub direction: [i8; 3],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub corner: [i64; 3],
    pub red: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum SphereKind {
    Vertex,
    Bigon(Side),
    Surface(Side),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Sphere {
    pub kind: SphereKind,
    pub color: Color,
    /// Vertex for vertex spheres and bigons, `[0, y, 0]` for surfaces.
    pub anchor: [i64; 3],
    /// Incident qudits with the direction (along the qudit's axis) in which
    /// they leave the sphere.
    pub incident: Vec<(usize, i8)>,
    pub terms: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum TermKind {
    /// `A_v`: Z-type, lives on a blue cell.
    Vertex,
    /// `B_f`: X-type, lives on a red cell.
    Face,
}

/// One local operator of a sphere's quantum double model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Term {
    pub kind: TermKind,
    pub sphere: usize,
    pub cell: usize,
    /// `(qudit, sign)`; the term acts as `X^sign` or `Z^sign` on each qudit.
    pub support: Vec<(usize, i8)>,
}

/// Terms of one colour class attached to a cell.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VolumeIncidence {
    pub cell: usize,
    pub red: bool,
    pub green: Vec<usize>,
    pub yellow: Vec<usize>,
    pub qudits: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum QKey {
    Edge([i64; 3], usize),
    Half(Side, i64, i64, bool),
    Plaq(Side, i64, i64),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Lattice {
    pub manifold: Manifold,
    pub qudits: Vec<Qudit>,
    pub cells: Vec<Cell>,
    pub spheres: Vec<Sphere>,
    pub terms: Vec<Term>,
    #[serde(skip)]
    index: HashMap<QKey, usize>,
}

const OCTANTS: [[i64; 3]; 8] = [
    [-1, -1, -1],
    [-1, -1, 1],
    [-1, 1, -1],
    [-1, 1, 1],
    [1, -1, -1],
    [1, -1, 1],
    [1, 1, -1],
    [1, 1, 1],
];

fn parity(v: [i64; 3]) -> i64 {
    (v[0] + v[1] + v[2]).rem_euclid(2)
}

fn other_axes(a: usize) -> (usize, usize) {
    match a {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

struct Builder {
    m: Manifold,
    qudits: Vec<Qudit>,
    index: HashMap<QKey, usize>,
    spheres: Vec<Sphere>,
    terms: Vec<(TermKind, usize, [i64; 3], Vec<(usize, i8)>)>,
}

impl Builder {
    fn l(&self) -> i64 {
        self.m.l as i64
    }

    fn range(&self, axis: usize) -> std::ops::Range<i64> {
        let l = self.l();
        if axis != 1 && self.m.kind == ManifoldKind::Cube {
            0..l + 1
        } else {
            0..l
        }
    }

    fn wrap(&self, mut v: [i64; 3]) -> [i64; 3] {
        for (a, c) in v.iter_mut().enumerate() {
            if self.m.kind.periodic(a) {
                *c = c.rem_euclid(self.l());
            }
        }
        v
    }

    fn exists(&self, v: [i64; 3]) -> bool {
        (0..3).all(|a| self.range(a).contains(&v[a]))
    }

    fn green(v: [i64; 3]) -> bool {
        parity(v) == 0
    }

    /// Whether a term of this kind may sit on the cell with this corner.
    fn cell_allows(&self, c: [i64; 3], kind: TermKind) -> bool {
        if self.m.kind != ManifoldKind::Cube {
            return true;
        }
        let l = self.l();
        let out_x = c[0] < 0 || c[0] > l - 1;
        let out_z = c[2] < 0 || c[2] > l - 1;
        match (out_x, out_z) {
            (true, true) => false,
            (true, false) => kind == TermKind::Vertex,
            (false, true) => kind == TermKind::Face,
            (false, false) => true,
        }
    }

    fn bigon_at(&self, side: Side, v: [i64; 3]) -> bool {
        match side {
            Side::Top => Self::green(v),
            Side::Bottom => !Self::green(v),
        }
    }

    /// Qudit on the edge leaving `v` along `s * e_a`.
    fn edge(&self, v: [i64; 3], a: usize, s: i64) -> Option<usize> {
        let l = self.l();
        let open = self.m.kind.has_surfaces();
        if a == 1 && open && s == 1 && v[1] == l - 1 {
            return self.index.get(&QKey::Half(Side::Top, v[0], v[2], false)).copied();
        }
        if a == 1 && open && s == -1 && v[1] == 0 {
            return self.index.get(&QKey::Half(Side::Bottom, v[0], v[2], false)).copied();
        }
        let mut w = v;
        w[a] += s;
        let w = self.wrap(w);
        if !self.exists(w) {
            return None;
        }
        let lower = if s == 1 { self.wrap(v) } else { w };
        self.index.get(&QKey::Edge(lower, a)).copied()
    }

    fn direction(v: [i64; 3], a: usize, s: i64) -> [i8; 3] {
        let (b, c) = other_axes(a);
        let pi = if Self::green(v) { 1 } else { -1 };
        let mut dir = [0i8; 3];
        dir[b] = 1;
        dir[c] = (pi * s) as i8;
        dir
    }

    fn push_qudit(&mut self, key: QKey, q: Qudit) {
        self.index.insert(key, self.qudits.len());
        self.qudits.push(q);
    }

    fn vertices(&self) -> Vec<[i64; 3]> {
        let mut out = Vec::new();
        for z in self.range(2) {
            for y in self.range(1) {
                for x in self.range(0) {
                    out.push([x, y, z]);
                }
            }
        }
        out
    }

    fn columns(&self) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        for z in self.range(2) {
            for x in self.range(0) {
                out.push((x, z));
            }
        }
        out
    }

    fn boundary_vertex(&self, side: Side, x: i64, z: i64) -> [i64; 3] {
        match side {
            Side::Top => [x, self.l() - 1, z],
            Side::Bottom => [x, 0, z],
        }
    }

    fn build_qudits(&mut self) {
        let verts = self.vertices();
        for &v in &verts {
            for a in 0..3 {
                if a == 1 && self.m.kind.has_surfaces() && v[1] == self.l() - 1 {
                    continue;
                }
                let mut w = v;
                w[a] += 1;
                if !self.exists(self.wrap(w)) {
                    continue;
                }
                let q = Qudit { vertex: v, axis: a, class: QuditClass::Bulk, direction: Self::direction(v, a, 1) };
                self.push_qudit(QKey::Edge(v, a), q);
            }
        }
        if !self.m.kind.has_surfaces() {
            return;
        }
        for side in [Side::Top, Side::Bottom] {
            let s = side.outward();
            for (x, z) in self.columns() {
                let v = self.boundary_vertex(side, x, z);
                let dir = Self::direction(v, 1, s);
                let bigon = self.bigon_at(side, v);
                let class = if bigon { QuditClass::Inner(side) } else { QuditClass::Dangling(side) };
                self.push_qudit(QKey::Half(side, x, z, false), Qudit { vertex: v, axis: 1, class, direction: dir });
                if bigon {
                    let q = Qudit { vertex: v, axis: 1, class: QuditClass::Outer(side), direction: dir };
                    self.push_qudit(QKey::Half(side, x, z, true), q);
                }
            }
        }
        if self.m.kind == ManifoldKind::T2xIPrime {
            for side in [Side::Top, Side::Bottom] {
                let j = if side == Side::Top { self.l() - 1 } else { -1 };
                for (i, k) in self.columns() {
                    let c = [i, j, k];
                    if parity(c) == 1 {
                        let q = Qudit { vertex: c, axis: 1, class: QuditClass::Plaquette(side), direction: [0; 3] };
                        self.push_qudit(QKey::Plaq(side, i, k), q);
                    }
                }
            }
        }
    }

    /// Column qudit touching a surface: the outer half of a bigon if present.
    fn column_qudit(&self, side: Side, x: i64, z: i64) -> usize {
        let key_out = QKey::Half(side, x, z, true);
        match self.index.get(&key_out) {
            Some(&q) => q,
            None => self.index[&QKey::Half(side, x, z, false)],
        }
    }

    fn add_term(&mut self, sphere: usize, kind: TermKind, cell: [i64; 3], support: Vec<(usize, i8)>) {
        if support.is_empty() {
            return;
        }
        let id = self.terms.len();
        self.terms.push((kind, sphere, self.wrap(cell), support));
        self.spheres[sphere].terms.push(id);
    }

    fn build_vertex_spheres(&mut self) {
        for v in self.vertices() {
            let green = Self::green(v);
            let kappa: i64 = if green { 1 } else { -1 };
            let mut incident = Vec::new();
            for a in 0..3 {
                for s in [-1i64, 1] {
                    if let Some(q) = self.edge(v, a, s) {
                        incident.push((q, s as i8));
                    }
                }
            }
            let sid = self.spheres.len();
            let color = if green { Color::Green } else { Color::Yellow };
            self.spheres.push(Sphere { kind: SphereKind::Vertex, color, anchor: v, incident, terms: Vec::new() });
            for s in OCTANTS {
                let cell = [v[0] + (s[0] - 1) / 2, v[1] + (s[1] - 1) / 2, v[2] + (s[2] - 1) / 2];
                let blue = parity(cell) == 0;
                let kind = if blue { TermKind::Vertex } else { TermKind::Face };
                if !self.cell_allows(cell, kind) {
                    continue;
                }
                let prod = s[0] * s[1] * s[2];
                let mut support = Vec::new();
                for a in 0..3 {
                    let Some(q) = self.edge(v, a, s[a]) else { continue };
                    let dir = self.qudits[q].direction;
                    let sign = if blue {
                        // Incoming iff the blue octant sits at the head of the blue edge.
                        s[other_axes(a).0]
                    } else {
                        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                        let mut circ = [0i64; 3];
                        circ[b] = kappa * prod * s[b];
                        circ[c] = -kappa * prod * s[c];
                        let d = [dir[0] as i64, dir[1] as i64, dir[2] as i64];
                        if d == circ {
                            1
                        } else {
                            debug_assert_eq!(d, [-circ[0], -circ[1], -circ[2]]);
                            -1
                        }
                    };
                    support.push((q, sign as i8));
                }
                self.add_term(sid, kind, cell, support);
            }
        }
    }

    fn build_boundary_spheres(&mut self) {
        let l = self.l();
        for side in [Side::Top, Side::Bottom] {
            let sy = side.outward();
            for (x, z) in self.columns() {
                let v = self.boundary_vertex(side, x, z);
                if !self.bigon_at(side, v) {
                    continue;
                }
                let inner = self.index[&QKey::Half(side, x, z, false)];
                let outer = self.index[&QKey::Half(side, x, z, true)];
                let color = if Self::green(v) { Color::Yellow } else { Color::Green };
                let sid = self.spheres.len();
                let incident = vec![(inner, (-sy) as i8), (outer, sy as i8)];
                self.spheres.push(Sphere { kind: SphereKind::Bigon(side), color, anchor: v, incident, terms: Vec::new() });
                for sx in [-1i64, 1] {
                    for sz in [-1i64, 1] {
                        let cell = [v[0] + (sx - 1) / 2, v[1] + (sy - 1) / 2, v[2] + (sz - 1) / 2];
                        let blue = parity(cell) == 0;
                        let kind = if blue { TermKind::Vertex } else { TermKind::Face };
                        if !self.cell_allows(cell, kind) {
                            continue;
                        }
                        let support = if blue {
                            vec![(inner, sx as i8), (outer, sx as i8)]
                        } else {
                            vec![(inner, sx as i8), (outer, (-sx) as i8)]
                        };
                        self.add_term(sid, kind, cell, support);
                    }
                }
            }
        }
        for side in [Side::Top, Side::Bottom] {
            let j = if side == Side::Top { l - 1 } else { -1 };
            let color = if side == Side::Top { Color::Green } else { Color::Yellow };
            let into_bulk = (-side.outward()) as i8;
            let incident = self.columns().into_iter().map(|(x, z)| (self.column_qudit(side, x, z), into_bulk)).collect();
            let sid = self.spheres.len();
            let anchor = [0, j + (side.outward() + 1) / 2, 0];
            self.spheres.push(Sphere { kind: SphereKind::Surface(side), color, anchor, incident, terms: Vec::new() });
            let cell_range: Vec<i64> = if self.m.kind == ManifoldKind::Cube { (-1..l + 1).collect() } else { (0..l).collect() };
            for &k in &cell_range {
                for &i in &cell_range {
                    let cell = [i, j, k];
                    let blue = parity(cell) == 0;
                    let kind = if blue { TermKind::Vertex } else { TermKind::Face };
                    if !self.cell_allows(cell, kind) {
                        continue;
                    }
                    let mut support = Vec::new();
                    for (dx, dz) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                        let w = self.wrap([i + dx, 0, k + dz]);
                        if !self.range(0).contains(&w[0]) || !self.range(2).contains(&w[2]) {
                            continue;
                        }
                        // The cell lies on the +x side of the column iff dx == 0.
                        let sx: i8 = if dx == 0 { 1 } else { -1 };
                        let v = self.boundary_vertex(side, w[0], w[2]);
                        let q = self.column_qudit(side, w[0], w[2]);
                        let sign = if !blue && self.bigon_at(side, v) { -sx } else { sx };
                        support.push((q, sign));
                    }
                    self.add_term(sid, kind, cell, support);
                }
            }
        }
    }

    fn finish(self) -> Lattice {
        let mut corners: BTreeMap<(i64, i64, i64), usize> = BTreeMap::new();
        for t in &self.terms {
            corners.insert((t.2[2], t.2[1], t.2[0]), 0);
        }
        let mut cells = Vec::new();
        for (i, (key, id)) in corners.iter_mut().enumerate() {
            *id = i;
            let corner = [key.2, key.1, key.0];
            cells.push(Cell { corner, red: parity(corner) == 1 });
        }
        let terms = self
            .terms
            .into_iter()
            .map(|(kind, sphere, c, mut support)| {
                support.sort_unstable();
                Term { kind, sphere, cell: corners[&(c[2], c[1], c[0])], support }
            })
            .collect();
        Lattice { manifold: self.m, qudits: self.qudits, cells, spheres: self.spheres, terms, index: self.index }
    }
}

/// Builds the lattice of a manifold. Deterministic: equal inputs give equal
/// registries.
pub fn build_lattice(m: Manifold) -> Result<Lattice, LatticeError> {
    let m = Manifold::new(m.kind, m.l)?;
    let mut b = Builder { m, qudits: Vec::new(), index: HashMap::new(), spheres: Vec::new(), terms: Vec::new() };
    b.build_qudits();
    b.build_vertex_spheres();
    if m.kind.has_surfaces() {
        b.build_boundary_spheres();
    }
    Ok(b.finish())
}

impl Lattice {
    pub fn n(&self) -> usize {
        self.qudits.len()
    }

    /// Qudit on the cubic edge from `v` to `v + e_axis`, if present.
    pub fn edge_qudit(&self, v: [i64; 3], axis: usize) -> Option<usize> {
        self.index.get(&QKey::Edge(v, axis)).copied()
    }

    /// Vertical half-edge at column `(x, z)`: the one attached to the boundary
    /// vertex when `outer` is false, the bigon-to-surface one otherwise.
    pub fn half_qudit(&self, side: Side, x: i64, z: i64, outer: bool) -> Option<usize> {
        self.index.get(&QKey::Half(side, x, z, outer)).copied()
    }

    /// Plaquette qudit on the red boundary cell with corner `(i, *, k)`.
    pub fn plaquette_qudit(&self, side: Side, i: i64, k: i64) -> Option<usize> {
        self.index.get(&QKey::Plaq(side, i, k)).copied()
    }

    /// Qudit through which a column meets its macroscopic surface.
    pub fn column_qudit(&self, side: Side, x: i64, z: i64) -> Option<usize> {
        self.half_qudit(side, x, z, true).or_else(|| self.half_qudit(side, x, z, false))
    }

    pub fn sphere_incidence(&self, sphere: usize) -> Result<&[(usize, i8)], LatticeError> {
        self.spheres.get(sphere).map(|s| s.incident.as_slice()).ok_or(LatticeError::InvalidSphere(sphere))
    }

    pub fn volume_incidence(&self, cell: usize) -> Result<VolumeIncidence, LatticeError> {
        let c = self.cells.get(cell).ok_or(LatticeError::InvalidCell(cell))?;
        let mut green = Vec::new();
        let mut yellow = Vec::new();
        let mut qudits = Vec::new();
        for (i, t) in self.terms.iter().enumerate().filter(|(_, t)| t.cell == cell) {
            match self.spheres[t.sphere].color {
                Color::Green => green.push(i),
                Color::Yellow => yellow.push(i),
            }
            qudits.extend(t.support.iter().map(|&(q, _)| q));
        }
        qudits.sort_unstable();
        qudits.dedup();
        Ok(VolumeIncidence { cell, red: c.red, green, yellow, qudits })
    }

    /// Whether a qudit lies in the coordinate plane `{axis = coord}`.
    pub fn in_plane(&self, q: usize, axis: usize, coord: i64) -> bool {
        let qd = &self.qudits[q];
        match qd.class {
            QuditClass::Plaquette(_) => false,
            QuditClass::Bulk => qd.axis != axis && qd.vertex[axis] == coord,
            _ => axis != 1 && qd.vertex[axis] == coord,
        }
    }

    /// Versioned JSON dump of the registry.
    pub fn dump_json(&self) -> String {
        #[derive(Serialize)]
        struct Dump<'a> {
            format: &'static str,
            version: u32,
            manifold: &'a Manifold,
            n: usize,
            expected_n: usize,
            qudits: &'a [Qudit],
            cells: &'a [Cell],
            spheres: &'a [Sphere],
            terms: &'a [Term],
        }
        let dump = Dump {
            format: "saqd-lattice",
            version: 1,
            manifold: &self.manifold,
            n: self.n(),
            expected_n: self.manifold.expected_n(),
            qudits: &self.qudits,
            cells: &self.cells,
            spheres: &self.spheres,
            terms: &self.terms,
        };
        serde_json::to_string_pretty(&dump).expect("lattice dump serialises")
    }
}
