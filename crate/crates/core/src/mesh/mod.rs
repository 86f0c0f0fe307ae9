//! Conforming triangulations refined by newest-vertex bisection.
//!
//! Every triangle is stored with its newest vertex first, so its refinement
//! edge is always the edge between local vertices 1 and 2. Each element keeps
//! its address in the bisection forest rooted at the initial mesh, and the
//! element list of every mesh is kept in depth-first order of that forest.

mod io;
mod lineage;
mod polygon;
mod presets;
mod refine;

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::MeshError;

pub use io::MeshDocument;
pub use lineage::{Lineage, MAX_DEPTH};
pub use polygon::PolygonGeometry;
pub use presets::{
    cavity_polygon, create_initial_mesh, Geometry, CAVITY_OMEGA_SEGMENT, PLATE_BOTTOM_SEGMENT,
    TRIANGLE_GAMMA1, TRIANGLE_GAMMA2, TRIANGLE_GAMMA3,
};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
    Robin,
}

/// A boundary edge, oriented with the domain on its left.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub v: [u32; 2],
    pub kind: BoundaryKind,
    pub segment: u32,
    /// Index of the initial-mesh boundary edge this edge was cut from.
    pub origin: u32,
}

/// Unstructured input for building an initial mesh.
#[derive(Clone, Debug)]
pub struct MeshInput {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[u32; 3]>,
    /// Boundary edges as (vertex pair, segment id).
    pub boundary: Vec<([u32; 2], u32)>,
    pub segment_kinds: Vec<BoundaryKind>,
}

/// The initial mesh T_0 shared by all descendants.
#[derive(Debug)]
pub(crate) struct Coarse {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[u32; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    pub segment_kinds: Vec<BoundaryKind>,
    pub fingerprint: u64,
}

/// Edge connectivity of a mesh.
#[derive(Debug)]
pub struct Topology {
    /// Vertex pairs, smaller index first.
    pub edges: Vec<[u32; 2]>,
    /// Adjacent triangles; `u32::MAX` marks a missing neighbour.
    pub edge_triangles: Vec<[u32; 2]>,
    /// Local edge k of a triangle is opposite its local vertex k.
    pub triangle_edges: Vec<[u32; 3]>,
    /// Edge index of each boundary edge.
    pub boundary_edge_ids: Vec<u32>,
}

pub const NO_TRIANGLE: u32 = u32::MAX;

#[derive(Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[u32; 3]>,
    lineage: Vec<Lineage>,
    boundary: Vec<BoundaryEdge>,
    coarse: Arc<Coarse>,
    topology: OnceLock<Topology>,
}

impl Clone for Mesh {
    fn clone(&self) -> Self {
        Mesh {
            vertices: self.vertices.clone(),
            triangles: self.triangles.clone(),
            lineage: self.lineage.clone(),
            boundary: self.boundary.clone(),
            coarse: self.coarse.clone(),
            topology: OnceLock::new(),
        }
    }
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.coarse.fingerprint == other.coarse.fingerprint
            && self.vertices.len() == other.vertices.len()
            && self
                .vertices
                .iter()
                .zip(&other.vertices)
                .all(|(a, b)| a[0].to_bits() == b[0].to_bits() && a[1].to_bits() == b[1].to_bits())
            && self.triangles == other.triangles
            && self.lineage == other.lineage
            && self.boundary == other.boundary
    }
}

/// A validated set of triangle indices of one mesh.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MarkSet {
    indices: Vec<usize>,
}

impl MarkSet {
    pub fn new(mesh: &Mesh, indices: impl IntoIterator<Item = usize>) -> Result<Self, MeshError> {
        let len = mesh.num_triangles();
        let mut indices: Vec<usize> = indices.into_iter().collect();
        if let Some(&bad) = indices.iter().find(|&&i| i >= len) {
            return Err(MeshError::InvalidIndex { index: bad, len });
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(MarkSet { indices })
    }

    pub fn empty() -> Self {
        MarkSet::default()
    }

    /// Trusted constructor for indices that are already sorted and unique.
    pub(crate) fn from_sorted(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        MarkSet { indices }
    }

    pub fn all(mesh: &Mesh) -> Self {
        MarkSet {
            indices: (0..mesh.num_triangles()).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

pub(crate) fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

fn dist2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn edge_key(a: u32, b: u32) -> u64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    ((lo as u64) << 32) | hi as u64
}

fn fnv1a(bytes: impl Iterator<Item = u8>, mut h: u64) -> u64 {
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Rotates a CCW triangle so that the vertex opposite its longest edge comes
/// first. Ties go to the edge with the lexicographically smallest sorted
/// vertex pair.
fn rotate_to_longest(t: [u32; 3], vertices: &[Point]) -> [u32; 3] {
    let mut best = 0usize;
    let mut best_len = -1.0f64;
    let mut best_pair = (u32::MAX, u32::MAX);
    for k in 0..3 {
        let (a, b) = (t[(k + 1) % 3], t[(k + 2) % 3]);
        let len = dist2(vertices[a as usize], vertices[b as usize]);
        let pair = (a.min(b), a.max(b));
        let tol = 1e-12 * len.max(best_len);
        let better = if len > best_len + tol {
            true
        } else if (len - best_len).abs() <= tol {
            pair < best_pair
        } else {
            false
        };
        if better {
            best = k;
            best_len = len;
            best_pair = pair;
        }
    }
    [t[best], t[(best + 1) % 3], t[(best + 2) % 3]]
}

impl Mesh {
    /// Builds an initial mesh from raw data: orients triangles
    /// counter-clockwise, assigns longest-edge refinement edges and checks
    /// that every boundary edge carries exactly one label.
    pub fn from_input(input: MeshInput) -> Result<Mesh, MeshError> {
        let MeshInput {
            vertices,
            triangles,
            boundary,
            segment_kinds,
        } = input;
        let nv = vertices.len();
        if triangles.is_empty() {
            return Err(MeshError::InvalidGeometry("no triangles".into()));
        }
        if vertices.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(MeshError::InvalidGeometry("non-finite vertex".into()));
        }
        let mut tris = Vec::with_capacity(triangles.len());
        for (i, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v as usize >= nv) {
                return Err(MeshError::InvalidGeometry(format!("triangle {i} references a missing vertex")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(MeshError::InvalidGeometry(format!("triangle {i} is degenerate")));
            }
            let (a, b, c) = (vertices[t[0] as usize], vertices[t[1] as usize], vertices[t[2] as usize]);
            let area = signed_area(a, b, c);
            let scale = dist2(a, b).max(dist2(b, c)).max(dist2(a, c));
            if area.abs() <= 1e-14 * scale {
                return Err(MeshError::InvalidGeometry(format!("triangle {i} has zero area")));
            }
            let ccw = if area > 0.0 { *t } else { [t[0], t[2], t[1]] };
            tris.push(rotate_to_longest(ccw, &vertices));
        }

        let topo = build_topology(&tris, &[]);
        let mut labels: Vec<Option<(usize, u32)>> = vec![None; topo.edges.len()];
        for (bi, &(v, seg)) in boundary.iter().enumerate() {
            let key = edge_key(v[0], v[1]);
            let e = topo
                .find_edge(key)
                .ok_or_else(|| MeshError::InvalidGeometry(format!("boundary edge {bi} is not a mesh edge")))?;
            if topo.edge_triangles[e][1] != NO_TRIANGLE {
                return Err(MeshError::InvalidGeometry(format!("boundary edge {bi} is an interior edge")));
            }
            if seg as usize >= segment_kinds.len() {
                return Err(MeshError::InvalidGeometry(format!("boundary edge {bi} has unknown segment {seg}")));
            }
            if labels[e].is_some() {
                return Err(MeshError::InvalidGeometry(format!("boundary edge {bi} is labeled twice")));
            }
            labels[e] = Some((bi, seg));
        }
        let mut bedges = Vec::new();
        for e in 0..topo.edges.len() {
            if topo.edge_triangles[e][1] != NO_TRIANGLE {
                continue;
            }
            let Some((_, seg)) = labels[e] else {
                let [a, b] = topo.edges[e];
                return Err(MeshError::InvalidGeometry(format!("unlabeled boundary edge ({a}, {b})")));
            };
            let t = tris[topo.edge_triangles[e][0] as usize];
            let [a, b] = topo.edges[e];
            // orient along the owning triangle's CCW order
            let pos = |v| t.iter().position(|&w| w == v).unwrap();
            let v = if (pos(a) + 1) % 3 == pos(b) { [a, b] } else { [b, a] };
            bedges.push((labels[e].unwrap().0, v, seg));
        }
        // keep the user's boundary order
        bedges.sort_by_key(|b| b.0);
        let boundary: Vec<BoundaryEdge> = bedges
            .into_iter()
            .enumerate()
            .map(|(i, (_, v, seg))| BoundaryEdge {
                v,
                kind: segment_kinds[seg as usize],
                segment: seg,
                origin: i as u32,
            })
            .collect();

        let mut h = 0xcbf29ce484222325u64;
        h = fnv1a(vertices.iter().flat_map(|p| [p[0].to_bits(), p[1].to_bits()]).flat_map(u64::to_le_bytes), h);
        h = fnv1a(tris.iter().flatten().flat_map(|v| v.to_le_bytes()), h);
        h = fnv1a(
            boundary
                .iter()
                .flat_map(|b| [b.v[0], b.v[1], b.segment, b.kind as u32])
                .flat_map(u32::to_le_bytes),
            h,
        );
        let coarse = Arc::new(Coarse {
            vertices: vertices.clone(),
            triangles: tris.clone(),
            boundary: boundary.clone(),
            segment_kinds,
            fingerprint: h,
        });
        let lineage = (0..tris.len() as u32).map(Lineage::root).collect();
        Ok(Mesh {
            vertices,
            triangles: tris,
            lineage,
            boundary,
            coarse,
            topology: OnceLock::new(),
        })
    }

    pub(crate) fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[u32; 3]>,
        lineage: Vec<Lineage>,
        boundary: Vec<BoundaryEdge>,
        coarse: Arc<Coarse>,
    ) -> Mesh {
        Mesh {
            vertices,
            triangles,
            lineage,
            boundary,
            coarse,
            topology: OnceLock::new(),
        }
    }

    /// The unrefined ancestor mesh T_0.
    pub fn initial(&self) -> Mesh {
        let c = &self.coarse;
        Mesh::from_parts(
            c.vertices.clone(),
            c.triangles.clone(),
            (0..c.triangles.len() as u32).map(Lineage::root).collect(),
            c.boundary.clone(),
            c.clone(),
        )
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Triangles with the newest vertex first; the refinement edge joins
    /// local vertices 1 and 2.
    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn lineages(&self) -> &[Lineage] {
        &self.lineage
    }

    pub fn segment_kinds(&self) -> &[BoundaryKind] {
        &self.coarse.segment_kinds
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Bisection depth of triangle `t` below its initial ancestor.
    pub fn generation(&self, t: usize) -> usize {
        self.lineage[t].depth as usize
    }

    /// Identifies the initial mesh this mesh descends from.
    pub fn ancestry_fingerprint(&self) -> u64 {
        self.coarse.fingerprint
    }

    pub fn same_ancestry(&self, other: &Mesh) -> bool {
        Arc::ptr_eq(&self.coarse, &other.coarse) || self.coarse.fingerprint == other.coarse.fingerprint
    }

    pub fn num_initial_triangles(&self) -> usize {
        self.coarse.triangles.len()
    }

    pub(crate) fn coarse(&self) -> &Arc<Coarse> {
        &self.coarse
    }

    /// Initial-mesh boundary edges as coordinate pairs with their segment id.
    pub fn initial_boundary_pieces(&self) -> Vec<(Point, Point, u32)> {
        let c = &self.coarse;
        c.boundary
            .iter()
            .map(|b| (c.vertices[b.v[0] as usize], c.vertices[b.v[1] as usize], b.segment))
            .collect()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.area(t)).sum()
    }

    /// Diameter (longest edge) of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        dist2(a, b).max(dist2(b, c)).max(dist2(a, c)).sqrt()
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| {
                let p = self.triangle_points(t);
                (0..3)
                    .map(|k| {
                        let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
                        let u = [b[0] - a[0], b[1] - a[1]];
                        let v = [c[0] - a[0], c[1] - a[1]];
                        let cross = u[0] * v[1] - u[1] * v[0];
                        let dot = u[0] * v[0] + u[1] * v[1];
                        cross.abs().atan2(dot)
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Edge connectivity, computed on first use.
    pub fn topology(&self) -> &Topology {
        self.topology.get_or_init(|| build_topology(&self.triangles, &self.boundary))
    }

    /// Vertices touching a Dirichlet boundary edge.
    pub fn dirichlet_vertices(&self) -> Vec<bool> {
        let mut d = vec![false; self.vertices.len()];
        for b in &self.boundary {
            if b.kind == BoundaryKind::Dirichlet {
                d[b.v[0] as usize] = true;
                d[b.v[1] as usize] = true;
            }
        }
        d
    }

    /// Map from vertex to free degree of freedom (`None` for Dirichlet
    /// vertices) together with the number of free vertices.
    pub fn dof_map(&self) -> (Vec<Option<u32>>, usize) {
        let d = self.dirichlet_vertices();
        let mut next = 0u32;
        let map = d
            .iter()
            .map(|&fixed| {
                if fixed {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect();
        (map, next as usize)
    }

    pub fn num_free_vertices(&self) -> usize {
        self.dirichlet_vertices().iter().filter(|&&d| !d).count()
    }

    /// Ancestor index in T_0 and bisection path of triangle `t`.
    pub fn element_lineage(&self, t: usize) -> Result<(usize, Vec<u8>), MeshError> {
        let l = self.lineage.get(t).ok_or(MeshError::InvalidIndex {
            index: t,
            len: self.triangles.len(),
        })?;
        Ok((l.root as usize, l.path()))
    }

    /// Vertex coordinates (newest first) of the element reached by bisecting
    /// the initial triangle `root` along `path`.
    pub fn replay(&self, root: usize, path: &[u8]) -> Result<[Point; 3], MeshError> {
        let c = &self.coarse;
        let t = c.triangles.get(root).ok_or(MeshError::InvalidIndex {
            index: root,
            len: c.triangles.len(),
        })?;
        let mut p = [c.vertices[t[0] as usize], c.vertices[t[1] as usize], c.vertices[t[2] as usize]];
        for &bit in path {
            p = bisect_points(p, bit);
        }
        Ok(p)
    }

    /// Index of the leaf with exactly this lineage, or the insertion point
    /// into the sorted leaf list.
    pub fn find_lineage(&self, key: &Lineage) -> Result<usize, usize> {
        self.lineage.binary_search(key)
    }

    /// Finds the triangle containing `p`, walking down the bisection tree.
    pub fn locate(&self, p: Point) -> Result<usize, MeshError> {
        let c = &self.coarse;
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (i, t) in c.triangles.iter().enumerate() {
            let q = [c.vertices[t[0] as usize], c.vertices[t[1] as usize], c.vertices[t[2] as usize]];
            let m = min_barycentric(q, p);
            if m > best.0 {
                best = (m, i);
            }
        }
        if best.0 < -1e-10 {
            return Err(MeshError::PointOutside(p[0], p[1]));
        }
        let root = best.1;
        let t = c.triangles[root];
        let mut q = [c.vertices[t[0] as usize], c.vertices[t[1] as usize], c.vertices[t[2] as usize]];
        let mut key = Lineage::root(root as u32);
        loop {
            match self.lineage.binary_search(&key) {
                Ok(i) => return Ok(i),
                Err(i) => {
                    if i >= self.lineage.len() || !key.is_ancestor_of(&self.lineage[i]) {
                        return Err(MeshError::PointOutside(p[0], p[1]));
                    }
                }
            }
            let left = bisect_points(q, 0);
            let right = bisect_points(q, 1);
            let bit = if min_barycentric(left, p) >= min_barycentric(right, p) { 0 } else { 1 };
            q = if bit == 0 { left } else { right };
            key = key.child(bit)?;
        }
    }

    /// Refines the mesh; see [`refine`](Mesh::refine).
    pub fn refine(&self, marks: &MarkSet) -> Result<Mesh, MeshError> {
        refine::refine(self, marks)
    }

    /// Bisects every triangle once (plus closure).
    pub fn refine_uniform(&self) -> Result<Mesh, MeshError> {
        self.refine(&MarkSet::all(self))
    }
}

fn min_barycentric(q: [Point; 3], p: Point) -> f64 {
    let area = signed_area(q[0], q[1], q[2]);
    let l0 = signed_area(p, q[1], q[2]) / area;
    let l1 = signed_area(q[0], p, q[2]) / area;
    let l2 = signed_area(q[0], q[1], p) / area;
    l0.min(l1).min(l2)
}

/// Children of a newest-vertex-first triangle: left = [m, v0, v1],
/// right = [m, v2, v0].
pub(crate) fn bisect_points(p: [Point; 3], bit: u8) -> [Point; 3] {
    let m = midpoint(p[1], p[2]);
    if bit == 0 {
        [m, p[0], p[1]]
    } else {
        [m, p[2], p[0]]
    }
}

impl Topology {
    pub fn find_edge(&self, key: u64) -> Option<usize> {
        self.edges
            .binary_search_by(|e| edge_key(e[0], e[1]).cmp(&key))
            .ok()
    }

    pub fn is_boundary(&self, e: usize) -> bool {
        self.edge_triangles[e][1] == NO_TRIANGLE
    }
}

pub(crate) fn build_topology(tris: &[[u32; 3]], boundary: &[BoundaryEdge]) -> Topology {
    let mut keys: Vec<(u64, u32)> = Vec::with_capacity(3 * tris.len());
    for (t, tri) in tris.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
            keys.push((edge_key(a, b), (t as u32) * 3 + k as u32));
        }
    }
    keys.sort_unstable();
    let mut edges = Vec::with_capacity(keys.len() / 2 + tris.len());
    let mut edge_triangles: Vec<[u32; 2]> = Vec::with_capacity(edges.capacity());
    let mut triangle_edges = vec![[0u32; 3]; tris.len()];
    let mut i = 0;
    while i < keys.len() {
        let key = keys[i].0;
        let e = edges.len() as u32;
        edges.push([(key >> 32) as u32, key as u32]);
        let mut adj = [NO_TRIANGLE; 2];
        let mut n = 0;
        while i < keys.len() && keys[i].0 == key {
            let (t, k) = (keys[i].1 / 3, keys[i].1 % 3);
            if n < 2 {
                adj[n] = t;
            }
            n += 1;
            triangle_edges[t as usize][k as usize] = e;
            i += 1;
        }
        debug_assert!(n <= 2, "edge shared by more than two triangles");
        edge_triangles.push(adj);
    }
    let mut topo = Topology {
        edges,
        edge_triangles,
        triangle_edges,
        boundary_edge_ids: Vec::new(),
    };
    topo.boundary_edge_ids = boundary
        .iter()
        .map(|b| topo.find_edge(edge_key(b.v[0], b.v[1])).expect("boundary edge not in mesh") as u32)
        .collect();
    topo
}
