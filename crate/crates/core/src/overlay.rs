//! Exact integration of products of P1 functions that live on two different
//! bisection descendants of the same initial mesh, and snapshot Gramians.
//!
//! The leaves of every mesh are kept in depth-first lineage order, so the
//! pairwise overlay is a single merge walk over the two leaf lists.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FemError, MeshError};
use crate::fem::assembly::{p1_gradients, GAUSS2};
use crate::fem::{curve_edges, Curve, Snapshot};
use crate::linalg::CMat;
use crate::mesh::{BoundaryEdge, Mesh, Point};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Sesquilinear form used for Gramians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnerProductSpec {
    /// ∫∇u·∇v̄ + ∫uv̄
    H1Full,
    /// ∫∇u·∇v̄
    H1Semi,
    /// ∫_Ω uv̄
    L2Domain,
    /// ∫_ω uv̄
    L2Curve { curve: Curve },
}

/// Coarsest common refinement of two meshes.
#[derive(Clone, Debug)]
pub struct Overlay {
    pub mesh: Mesh,
    /// Containing element of A for every overlay element.
    pub injection_a: Vec<usize>,
    /// Containing element of B for every overlay element.
    pub injection_b: Vec<usize>,
}

/// Calls `f(ta, tb, a_is_finer)` for every overlay element in lineage
/// order. When both leaves coincide `a_is_finer` is true.
fn walk(a: &Mesh, b: &Mesh, mut f: impl FnMut(usize, usize, bool)) -> Result<(), MeshError> {
    if !a.same_ancestry(b) {
        return Err(MeshError::AncestryMismatch);
    }
    let (la, lb) = (a.lineages(), b.lineages());
    let (mut i, mut j) = (0, 0);
    while i < la.len() && j < lb.len() {
        if la[i] == lb[j] {
            f(i, j, true);
            i += 1;
            j += 1;
        } else if la[i].is_ancestor_of(&lb[j]) {
            f(i, j, false);
            j += 1;
            if j == lb.len() || !la[i].is_ancestor_of(&lb[j]) {
                i += 1;
            }
        } else if lb[j].is_ancestor_of(&la[i]) {
            f(i, j, true);
            i += 1;
            if i == la.len() || !lb[j].is_ancestor_of(&la[i]) {
                j += 1;
            }
        } else {
            return Err(MeshError::AncestryMismatch);
        }
    }
    if i != la.len() || j != lb.len() {
        return Err(MeshError::AncestryMismatch);
    }
    Ok(())
}

fn key(p: Point) -> (u64, u64) {
    (p[0].to_bits(), p[1].to_bits())
}

/// Coarsest common bisection refinement of `a` and `b`.
pub fn overlay_pair(a: &Mesh, b: &Mesh) -> Result<Overlay, MeshError> {
    let mut pairs = Vec::with_capacity(a.num_triangles().max(b.num_triangles()));
    walk(a, b, |ta, tb, fa| pairs.push((ta, tb, fa)))?;

    // every vertex of either mesh is an overlay vertex
    let mut vertices = a.vertices().to_vec();
    let mut index: HashMap<(u64, u64), u32> = HashMap::with_capacity(vertices.len());
    for (k, &p) in vertices.iter().enumerate() {
        index.insert(key(p), k as u32);
    }
    let bmap: Vec<u32> = b
        .vertices()
        .iter()
        .map(|&p| {
            *index.entry(key(p)).or_insert_with(|| {
                vertices.push(p);
                (vertices.len() - 1) as u32
            })
        })
        .collect();

    let mut triangles = Vec::with_capacity(pairs.len());
    let mut lineage = Vec::with_capacity(pairs.len());
    let mut injection_a = Vec::with_capacity(pairs.len());
    let mut injection_b = Vec::with_capacity(pairs.len());
    for &(ta, tb, fa) in &pairs {
        if fa {
            triangles.push(a.triangles()[ta]);
            lineage.push(a.lineages()[ta]);
        } else {
            triangles.push(b.triangles()[tb].map(|v| bmap[v as usize]));
            lineage.push(b.lineages()[tb]);
        }
        injection_a.push(ta);
        injection_b.push(tb);
    }

    let mut edges: HashSet<(u32, u32)> = HashSet::with_capacity(3 * triangles.len());
    for t in &triangles {
        for k in 0..3 {
            let (p, q) = (t[k], t[(k + 1) % 3]);
            edges.insert((p.min(q), p.max(q)));
        }
    }
    let mut boundary: Vec<BoundaryEdge> = Vec::new();
    let mut seen = HashSet::new();
    let candidates = a
        .boundary_edges()
        .iter()
        .cloned()
        .chain(b.boundary_edges().iter().map(|e| BoundaryEdge {
            v: e.v.map(|v| bmap[v as usize]),
            ..e.clone()
        }));
    for e in candidates {
        let k = (e.v[0].min(e.v[1]), e.v[0].max(e.v[1]));
        if edges.contains(&k) && seen.insert(k) {
            boundary.push(e);
        }
    }

    Ok(Overlay {
        mesh: Mesh::from_parts(vertices, triangles, lineage, boundary, a.coarse().clone()),
        injection_a,
        injection_b,
    })
}

/// A P1 function restricted to one triangle: u(x) = u0 + g·(x − p0).
#[derive(Clone, Copy)]
struct Affine {
    p0: Point,
    u0: C64,
    grad: [C64; 2],
}

impl Affine {
    fn new(mesh: &Mesh, u: &[C64], t: usize) -> Self {
        let p = mesh.triangle_points(t);
        let (g, _) = p1_gradients(p);
        let tri = mesh.triangles()[t];
        let mut grad = [ZERO; 2];
        for (gi, &v) in g.iter().zip(&tri) {
            grad[0] += gi[0] * u[v as usize];
            grad[1] += gi[1] * u[v as usize];
        }
        Affine {
            p0: p[0],
            u0: u[tri[0] as usize],
            grad,
        }
    }

    fn at(&self, x: Point) -> C64 {
        self.u0 + self.grad[0] * (x[0] - self.p0[0]) + self.grad[1] * (x[1] - self.p0[1])
    }
}

fn l2_on(p: [Point; 3], area: f64, a: &Affine, b: &Affine) -> C64 {
    // edge midpoint rule, exact for quadratics
    let mut s = ZERO;
    for k in 0..3 {
        let q = p[(k + 1) % 3];
        let m = [0.5 * (p[k][0] + q[0]), 0.5 * (p[k][1] + q[1])];
        s += a.at(m) * b.at(m).conj();
    }
    s * (area / 3.0)
}

fn semi_on(area: f64, a: &Affine, b: &Affine) -> C64 {
    (a.grad[0] * b.grad[0].conj() + a.grad[1] * b.grad[1].conj()) * area
}

/// ⟨u_a, u_b⟩ for nodal value vectors on their meshes (linear in the first
/// argument).
fn cross_nodal(ma: &Mesh, ua: &[C64], mb: &Mesh, ub: &[C64], spec: &InnerProductSpec) -> Result<C64, MeshError> {
    if let InnerProductSpec::L2Curve { curve } = spec {
        let pa = trace_pieces(ma, ua, curve)?;
        let pb = trace_pieces(mb, ub, curve)?;
        return Ok(curve_cross(&pa, &pb));
    }
    let mut acc = ZERO;
    walk(ma, mb, |ta, tb, fa| {
        let p = if fa { ma.triangle_points(ta) } else { mb.triangle_points(tb) };
        let area = crate::mesh::signed_area(p[0], p[1], p[2]);
        let (a, b) = (Affine::new(ma, ua, ta), Affine::new(mb, ub, tb));
        acc += match spec {
            InnerProductSpec::H1Full => semi_on(area, &a, &b) + l2_on(p, area, &a, &b),
            InnerProductSpec::H1Semi => semi_on(area, &a, &b),
            InnerProductSpec::L2Domain => l2_on(p, area, &a, &b),
            InnerProductSpec::L2Curve { .. } => unreachable!(),
        };
    })?;
    Ok(acc)
}

/// ⟨a, b⟩ = ∫ a b̄ (plus gradient terms) evaluated exactly on the pairwise
/// overlay. Swapping the arguments conjugates the result.
pub fn cross_inner_product(a: &Snapshot, b: &Snapshot, spec: &InnerProductSpec) -> Result<C64, MeshError> {
    cross_nodal(&a.mesh, &a.nodal_values(), &b.mesh, &b.nodal_values(), spec)
}

/// Trace of a P1 function on one straight piece of a curve: sorted
/// (arclength from the piece start, value) pairs.
#[derive(Clone, Debug)]
struct Piece {
    key: u32,
    nodes: Vec<(f64, C64)>,
}

fn trace_pieces(mesh: &Mesh, u: &[C64], curve: &Curve) -> Result<Vec<Piece>, MeshError> {
    let mut groups: BTreeMap<u32, Vec<(f64, C64)>> = BTreeMap::new();
    let dist = |a: Point, b: Point| (a[0] - b[0]).hypot(a[1] - b[1]);
    match curve {
        Curve::Segments(segs) => {
            // validates the segment list
            curve_edges(mesh, curve)?;
            let starts = mesh.initial_boundary_pieces();
            for e in mesh.boundary_edges().iter().filter(|e| segs.contains(&e.segment)) {
                let start = starts[e.origin as usize].0;
                let g = groups.entry(e.origin).or_default();
                for v in e.v {
                    g.push((dist(mesh.vertices()[v as usize], start), u[v as usize]));
                }
            }
        }
        &Curve::Line { from, to } => {
            let len = dist(from, to);
            let d = [(to[0] - from[0]) / len, (to[1] - from[1]) / len];
            let g = groups.entry(0).or_default();
            for e in curve_edges(mesh, curve)? {
                for v in e {
                    let p = mesh.vertices()[v as usize];
                    g.push(((p[0] - from[0]) * d[0] + (p[1] - from[1]) * d[1], u[v as usize]));
                }
            }
        }
    }
    Ok(groups
        .into_iter()
        .map(|(key, mut nodes)| {
            nodes.sort_by(|x, y| x.0.total_cmp(&y.0));
            nodes.dedup_by(|x, y| x.0 == y.0);
            Piece { key, nodes }
        })
        .collect())
}

/// Piecewise-linear interpolation with a forward-moving cursor.
fn interp(nodes: &[(f64, C64)], s: f64, cursor: &mut usize) -> C64 {
    if nodes.len() == 1 {
        return nodes[0].1;
    }
    while *cursor + 2 < nodes.len() && nodes[*cursor + 1].0 < s {
        *cursor += 1;
    }
    let (s0, v0) = nodes[*cursor];
    let (s1, v1) = nodes[*cursor + 1];
    if s1 == s0 {
        return v1;
    }
    let t = (s - s0) / (s1 - s0);
    v0 * (1.0 - t) + v1 * t
}

fn merged_breakpoints<'a>(lists: impl Iterator<Item = &'a [(f64, C64)]>) -> Vec<f64> {
    let mut s: Vec<f64> = lists.flat_map(|l| l.iter().map(|n| n.0)).collect();
    s.sort_by(f64::total_cmp);
    s.dedup();
    s
}

fn curve_cross(pa: &[Piece], pb: &[Piece]) -> C64 {
    let mut acc = ZERO;
    for a in pa {
        let Some(b) = pb.iter().find(|b| b.key == a.key) else {
            continue;
        };
        let s = merged_breakpoints([a.nodes.as_slice(), b.nodes.as_slice()].into_iter());
        let (mut ca, mut cb) = (0, 0);
        for w in s.windows(2) {
            let h = w[1] - w[0];
            for t in GAUSS2 {
                let x = w[0] + t * h;
                acc += 0.5 * h * interp(&a.nodes, x, &mut ca) * interp(&b.nodes, x, &mut cb).conj();
            }
        }
    }
    acc
}

/// Hermitian snapshot Gramian G[i][j] = ⟨u_j, u_i⟩.
#[derive(Clone, Debug, PartialEq)]
pub struct Gramian {
    pub matrix: CMat,
    pub spec: InnerProductSpec,
    pub ids: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GramianDocument {
    spec: InnerProductSpec,
    ids: Vec<usize>,
    size: usize,
    /// Row-major, real and imaginary parts interleaved.
    entries: Vec<f64>,
}

impl Gramian {
    pub fn size(&self) -> usize {
        self.matrix.rows()
    }

    pub fn to_json(&self) -> String {
        let doc = GramianDocument {
            spec: self.spec.clone(),
            ids: self.ids.clone(),
            size: self.size(),
            entries: self.matrix.data().iter().flat_map(|c| [c.re, c.im]).collect(),
        };
        serde_json::to_string(&doc).expect("Gramian serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        let doc: GramianDocument = serde_json::from_str(s)?;
        if doc.entries.len() != 2 * doc.size * doc.size || doc.ids.len() != doc.size {
            return Err(serde::de::Error::custom("Gramian size does not match its entries"));
        }
        let n = doc.size;
        let e = &doc.entries;
        Ok(Gramian {
            matrix: CMat::from_fn(n, n, |i, j| C64::new(e[2 * (i * n + j)], e[2 * (i * n + j) + 1])),
            spec: doc.spec,
            ids: doc.ids,
        })
    }
}

fn fill_hermitian(n: usize, f: impl Fn(usize, usize) -> Result<C64, MeshError> + Sync) -> Result<CMat, MeshError> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let values: Vec<C64> = pairs.par_iter().map(|&(i, j)| f(i, j)).collect::<Result<_, _>>()?;
    let mut g = CMat::zeros(n, n);
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        if i == j {
            g[(i, i)] = C64::new(v.re, 0.0);
        } else {
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    Ok(g)
}

/// Gramian of the snapshots under `spec`; only pairs i ≤ j are integrated.
pub fn assemble_gramian(snaps: &[Snapshot], spec: &InnerProductSpec) -> Result<Gramian, FemError> {
    if snaps.is_empty() {
        return Err(FemError::NoSnapshots);
    }
    let matrix = match spec {
        InnerProductSpec::L2Curve { curve } => trace_common_grid(snaps, curve)?.gramian(),
        _ => {
            let nodal: Vec<Vec<C64>> = snaps.iter().map(|s| s.nodal_values()).collect();
            fill_hermitian(snaps.len(), |i, j| {
                cross_nodal(&snaps[j].mesh, &nodal[j], &snaps[i].mesh, &nodal[i], spec)
            })?
        }
    };
    Ok(Gramian {
        matrix,
        spec: spec.clone(),
        ids: (0..snaps.len()).collect(),
    })
}

/// G[j'][j] = ∫_ω u_j conj(u_j'), computed on the common trace grid.
pub fn assemble_qoi_gramian(snaps: &[Snapshot], curve: &Curve) -> Result<Gramian, FemError> {
    assemble_gramian(snaps, &InnerProductSpec::L2Curve { curve: curve.clone() })
}

/// Traces of several snapshots re-expressed on the union of their curve
/// nodes, parametrized by arclength. Pieces of the curve are concatenated
/// in initial-boundary order; a node repeated at a junction of two pieces
/// bounds an interval of zero length.
#[derive(Clone, Debug)]
pub struct TraceGrid {
    pub breakpoints: Vec<f64>,
    /// Rows are snapshots, columns are grid nodes.
    pub coefficients: CMat,
}

pub fn trace_common_grid(snaps: &[Snapshot], curve: &Curve) -> Result<TraceGrid, MeshError> {
    let traces: Vec<Vec<Piece>> = snaps
        .iter()
        .map(|s| trace_pieces(&s.mesh, &s.nodal_values(), curve))
        .collect::<Result<_, _>>()?;
    let mut keys: Vec<u32> = traces.iter().flat_map(|t| t.iter().map(|p| p.key)).collect();
    keys.sort_unstable();
    keys.dedup();

    let mut breakpoints = Vec::new();
    let mut columns: Vec<Vec<C64>> = vec![Vec::new(); snaps.len()];
    let mut offset = 0.0;
    for k in keys {
        let pieces: Vec<Option<&Piece>> = traces.iter().map(|t| t.iter().find(|p| p.key == k)).collect();
        let s = merged_breakpoints(pieces.iter().flatten().map(|p| p.nodes.as_slice()));
        for (row, piece) in columns.iter_mut().zip(&pieces) {
            let mut cursor = 0;
            row.extend(s.iter().map(|&x| piece.map_or(ZERO, |p| interp(&p.nodes, x, &mut cursor))));
        }
        breakpoints.extend(s.iter().map(|x| x + offset));
        offset += s.last().copied().unwrap_or(0.0);
    }
    let n = breakpoints.len();
    Ok(TraceGrid {
        breakpoints,
        coefficients: CMat::from_fn(snaps.len(), n, |i, j| columns[i][j]),
    })
}

impl TraceGrid {
    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    /// ∫ a b̄ for two functions given by their grid values, exact.
    pub fn inner(&self, a: &[C64], b: &[C64]) -> C64 {
        let mut acc = ZERO;
        for k in 0..self.len().saturating_sub(1) {
            let h = self.breakpoints[k + 1] - self.breakpoints[k];
            if h == 0.0 {
                continue;
            }
            let (a0, a1, b0, b1) = (a[k], a[k + 1], b[k].conj(), b[k + 1].conj());
            acc += (2.0 * a0 * b0 + a0 * b1 + a1 * b0 + 2.0 * a1 * b1) * (h / 6.0);
        }
        acc
    }

    /// Grid values of Σ_j w_j u_j.
    pub fn combine(&self, weights: &[C64]) -> Vec<C64> {
        self.coefficients.transpose().mul_vec(weights)
    }

    /// G[j'][j] = ∫ u_j conj(u_j').
    pub fn gramian(&self) -> CMat {
        let s = self.coefficients.rows();
        let rows: Vec<&[C64]> = (0..s).map(|i| self.coefficients.row(i)).collect();
        let mut g = CMat::zeros(s, s);
        for i in 0..s {
            for j in i..s {
                let v = self.inner(rows[j], rows[i]);
                if i == j {
                    g[(i, i)] = C64::new(v.re, 0.0);
                } else {
                    g[(i, j)] = v;
                    g[(j, i)] = v.conj();
                }
            }
        }
        g
    }
}
