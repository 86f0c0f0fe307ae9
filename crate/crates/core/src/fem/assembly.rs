//! P1 assembly of b(u, v) = ∫∇u·∇v̄ − k²∫uv̄ − ιk∫_{Γ_R}uv̄ and its load.

use num_complex::Complex64 as C64;

use crate::error::FemError;
use crate::mesh::{BoundaryKind, Mesh, Point};

use super::problem::WaveProblem;

/// Square sparse matrix in compressed-column form with sorted row indices.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    /// Pattern from per-column row lists (duplicates allowed).
    pub fn from_pattern(n: usize, mut cols: Vec<Vec<usize>>) -> Self {
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        let mut row_idx = Vec::new();
        for c in cols.iter_mut() {
            c.sort_unstable();
            c.dedup();
            row_idx.extend_from_slice(c);
            col_ptr.push(row_idx.len());
        }
        let values = vec![C64::new(0.0, 0.0); row_idx.len()];
        SparseMatrix {
            n,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// Pattern with the full diagonal and both (i, j) and (j, i) for every
    /// listed pair; pairs must be distinct and off-diagonal.
    pub fn from_symmetric_pairs(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            col_ptr[j + 1] = 1;
        }
        for &(i, j) in pairs {
            col_ptr[i + 1] += 1;
            col_ptr[j + 1] += 1;
        }
        for j in 0..n {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut next = col_ptr[..n].to_vec();
        let mut row_idx = vec![0usize; col_ptr[n]];
        let mut put = |col: usize, row: usize| {
            row_idx[next[col]] = row;
            next[col] += 1;
        };
        for j in 0..n {
            put(j, j);
        }
        for &(i, j) in pairs {
            put(j, i);
            put(i, j);
        }
        for j in 0..n {
            row_idx[col_ptr[j]..col_ptr[j + 1]].sort_unstable();
        }
        let values = vec![C64::new(0.0, 0.0); row_idx.len()];
        SparseMatrix {
            n,
            col_ptr,
            row_idx,
            values,
        }
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        self.row_idx[a..b].binary_search(&i).ok().map(|k| a + k)
    }

    /// Adds `v` to entry (i, j), which must be in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        let k = self.slot(i, j).expect("entry outside sparsity pattern");
        self.values[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.slot(i, j).map_or(C64::new(0.0, 0.0), |k| self.values[k])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.n];
        for j in 0..self.n {
            let xj = x[j];
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[k]] += self.values[k] * xj;
            }
        }
        y
    }

    pub fn norm_fro(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.n)
            .map(|j| self.values[self.col_ptr[j]..self.col_ptr[j + 1]].iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        let mut d = vec![vec![C64::new(0.0, 0.0); self.n]; self.n];
        for j in 0..self.n {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                d[self.row_idx[k]][j] = self.values[k];
            }
        }
        d
    }

    /// Entry-wise equality with the (unconjugated) transpose.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|j| {
            (self.col_ptr[j]..self.col_ptr[j + 1]).all(|k| {
                let i = self.row_idx[k];
                self.get(j, i) == self.values[k]
            })
        })
    }
}

/// Discrete system over the free (non-Dirichlet) vertices.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<C64>,
    /// Free-DoF index of each vertex.
    pub dof_map: Vec<Option<u32>>,
    /// Vertex of each free DoF.
    pub free_vertices: Vec<u32>,
    /// 1-norm of |K| + |k²|M + |k|M_R, the scale against which
    /// conditioning is judged.
    pub pencil_norm: f64,
}

/// Gradients of the barycentric coordinates and the area of a triangle.
pub fn p1_gradients(p: [Point; 3]) -> ([[f64; 2]; 3], f64) {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]));
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        g[i] = [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)];
    }
    (g, area)
}

/// Element stiffness and mass matrices.
pub fn element_matrices(p: [Point; 3]) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let (g, area) = p1_gradients(p);
    let mut k = [[0.0; 3]; 3];
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            m[i][j] = area / 12.0 * if i == j { 2.0 } else { 1.0 };
        }
    }
    (k, m)
}

/// Outward unit normal and length of a boundary edge oriented with the
/// domain on its left.
pub fn edge_normal(a: Point, b: Point) -> ([f64; 2], f64) {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = d[0].hypot(d[1]);
    ([d[1] / len, -d[0] / len], len)
}

/// Two-point Gauss nodes on [0, 1].
pub const GAUSS2: [f64; 2] = [0.5 - 0.288_675_134_594_812_9, 0.5 + 0.288_675_134_594_812_9];

pub(crate) fn check_boundary(mesh: &Mesh, problem: &WaveProblem) -> Result<(), FemError> {
    if !mesh.same_ancestry(&problem.initial_mesh) {
        return Err(FemError::BoundaryMismatch("mesh does not descend from the problem's initial mesh".into()));
    }
    for b in mesh.boundary_edges() {
        match problem.segment_kinds.get(b.segment as usize) {
            Some(&k) if k == b.kind => {}
            _ => {
                return Err(FemError::BoundaryMismatch(format!(
                    "segment {} is labeled {:?} on the mesh",
                    b.segment, b.kind
                )))
            }
        }
    }
    Ok(())
}

/// Assembles the Galerkin system on `mesh` at frequency `z`, with Dirichlet
/// vertices eliminated.
pub fn assemble_system(mesh: &Mesh, problem: &WaveProblem, z: C64) -> Result<AssembledSystem, FemError> {
    check_boundary(mesh, problem)?;
    let (dof_map, n) = mesh.dof_map();
    let free_vertices: Vec<u32> = dof_map
        .iter()
        .enumerate()
        .filter_map(|(v, d)| d.map(|_| v as u32))
        .collect();
    let topo = mesh.topology();
    let pairs: Vec<(usize, usize)> = topo
        .edges
        .iter()
        .filter_map(|&[a, b]| Some((dof_map[a as usize]? as usize, dof_map[b as usize]? as usize)))
        .collect();
    let mut matrix = SparseMatrix::from_symmetric_pairs(n, &pairs);
    let mut rhs = vec![C64::new(0.0, 0.0); n];
    let mut colsum = vec![0.0f64; n];
    let k = problem.wavenumber(z);
    let k2 = problem.wavenumber_squared(z);

    for t in 0..mesh.num_triangles() {
        let tri = mesh.triangles()[t];
        let p = mesh.triangle_points(t);
        let (ke, me) = element_matrices(p);
        let dofs = tri.map(|v| dof_map[v as usize]);
        for i in 0..3 {
            let Some(di) = dofs[i] else { continue };
            for j in 0..3 {
                let Some(dj) = dofs[j] else { continue };
                matrix.add(di as usize, dj as usize, C64::new(ke[i][j], 0.0) - k2 * me[i][j]);
                colsum[dj as usize] += ke[i][j].abs() + k2.norm() * me[i][j];
            }
        }
        if problem.f.is_some() {
            let area = me[0][0] * 6.0;
            let mids = [0, 1, 2].map(|e| {
                let (a, b) = (p[(e + 1) % 3], p[(e + 2) % 3]);
                problem.source(z, [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])])
            });
            for i in 0..3 {
                if let Some(di) = dofs[i] {
                    // midpoints of the two edges through vertex i
                    rhs[di as usize] += area / 6.0 * (mids[(i + 1) % 3] + mids[(i + 2) % 3]);
                }
            }
        }
    }

    let iota = C64::new(0.0, 1.0);
    for b in mesh.boundary_edges() {
        let (pa, pb) = (mesh.vertices()[b.v[0] as usize], mesh.vertices()[b.v[1] as usize]);
        let (normal, len) = edge_normal(pa, pb);
        let dofs = b.v.map(|v| dof_map[v as usize]);
        if b.kind == BoundaryKind::Robin {
            for i in 0..2 {
                let Some(di) = dofs[i] else { continue };
                for j in 0..2 {
                    let Some(dj) = dofs[j] else { continue };
                    let m = len / 6.0 * if i == j { 2.0 } else { 1.0 };
                    matrix.add(di as usize, dj as usize, -iota * k * m);
                    colsum[dj as usize] += k.norm() * m;
                }
            }
        }
        let has_data = match b.kind {
            BoundaryKind::Neumann => problem.g_neumann.is_some(),
            BoundaryKind::Robin => problem.g_robin.is_some(),
            BoundaryKind::Dirichlet => false,
        };
        if has_data {
            for &s in &GAUSS2 {
                let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                let g = if b.kind == BoundaryKind::Neumann {
                    problem.neumann(z, x, normal, b.segment)
                } else {
                    problem.robin(z, x, normal, b.segment)
                };
                let gv = g * (0.5 * len);
                if let Some(d) = dofs[0] {
                    rhs[d as usize] += gv * (1.0 - s);
                }
                if let Some(d) = dofs[1] {
                    rhs[d as usize] += gv * s;
                }
            }
        }
    }

    Ok(AssembledSystem {
        matrix,
        rhs,
        dof_map,
        free_vertices,
        pencil_norm: colsum.into_iter().fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::problem::FrequencyConvention;
    use crate::mesh::{Geometry, MeshInput, PolygonGeometry};

    #[test]
    fn symmetric_pairs_match_column_lists() {
        let pairs = [(0, 3), (2, 1), (3, 2), (4, 0)];
        let mut cols: Vec<Vec<usize>> = (0..5).map(|i| vec![i]).collect();
        for &(i, j) in &pairs {
            cols[i].push(j);
            cols[j].push(i);
        }
        let a = SparseMatrix::from_symmetric_pairs(5, &pairs);
        let b = SparseMatrix::from_pattern(5, cols);
        assert_eq!(a.col_ptr(), b.col_ptr());
        assert_eq!(a.row_idx(), b.row_idx());
    }

    fn single_triangle(kind: BoundaryKind) -> WaveProblem {
        let g = PolygonGeometry {
            outer: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            outer_segments: vec![0, 1, 1],
            holes: vec![],
            hole_segments: vec![],
            segment_kinds: vec![kind, BoundaryKind::Neumann],
        };
        WaveProblem::new("unit", Geometry::Polygon(g), FrequencyConvention::SquaredWavenumber).unwrap()
    }

    fn dense_by_vertex(sys: &AssembledSystem) -> [[C64; 3]; 3] {
        let d = sys.matrix.to_dense();
        let mut out = [[C64::new(0.0, 0.0); 3]; 3];
        for (i, &vi) in sys.free_vertices.iter().enumerate() {
            for (j, &vj) in sys.free_vertices.iter().enumerate() {
                out[vi as usize][vj as usize] = d[i][j];
            }
        }
        out
    }

    #[test]
    fn unit_triangle_stiffness() {
        let p = single_triangle(BoundaryKind::Neumann);
        let mesh = p.initial_mesh.clone();
        let sys = assemble_system(&mesh, &p, C64::new(0.0, 0.0)).unwrap();
        let a = dense_by_vertex(&sys);
        // vertices (0,0), (1,0), (0,1): cotangent formula
        let exact = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[i][j] - exact[i][j]).norm() < 1e-15, "{i} {j}");
            }
        }
        assert!(sys.rhs.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn unit_triangle_mass() {
        let p = single_triangle(BoundaryKind::Neumann);
        let mesh = p.initial_mesh.clone();
        let z = C64::new(1.0, 0.0);
        let a = dense_by_vertex(&assemble_system(&mesh, &p, z).unwrap());
        let k0 = dense_by_vertex(&assemble_system(&mesh, &p, C64::new(0.0, 0.0)).unwrap());
        for i in 0..3 {
            for j in 0..3 {
                let mass = (k0[i][j] - a[i][j]).re;
                let exact = 0.5 / 12.0 * if i == j { 2.0 } else { 1.0 };
                assert!((mass - exact).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn robin_edge_block() {
        let p = single_triangle(BoundaryKind::Robin);
        let mesh = p.initial_mesh.clone();
        let z = C64::new(4.0, 0.0);
        let a = dense_by_vertex(&assemble_system(&mesh, &p, z).unwrap());
        let p0 = single_triangle(BoundaryKind::Neumann);
        let m0 = p0.initial_mesh.clone();
        let b = dense_by_vertex(&assemble_system(&m0, &p0, z).unwrap());
        // Robin edge joins vertices 0 and 1, length 1, k = 2
        let expect = |i: usize, j: usize| C64::new(0.0, -2.0) * (1.0 / 6.0) * if i == j { 2.0 } else { 1.0 };
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[i][j] - b[i][j] - expect(i, j)).norm() < 1e-15);
            }
        }
        assert!((a[2][2] - b[2][2]).norm() == 0.0);
    }

    #[test]
    fn symmetric_without_robin() {
        let p = crate::fem::problem::triangle_problem();
        let mesh = p.initial_mesh.refine_uniform().unwrap().refine_uniform().unwrap();
        let sys = assemble_system(&mesh, &p, C64::new(7.3, 0.0)).unwrap();
        assert!(sys.matrix.is_symmetric());
    }

    #[test]
    fn mismatched_labels_are_rejected() {
        let p = crate::fem::problem::triangle_problem();
        let other = Mesh::from_input(MeshInput {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2]],
            boundary: vec![([0, 1], 0), ([1, 2], 0), ([2, 0], 0)],
            segment_kinds: vec![BoundaryKind::Neumann],
        })
        .unwrap();
        assert!(matches!(
            assemble_system(&other, &p, C64::new(1.0, 0.0)),
            Err(FemError::BoundaryMismatch(_))
        ));
    }

    #[test]
    fn constant_load_integrates_area() {
        let p = crate::fem::problem::triangle_problem();
        let mesh = p.initial_mesh.refine_uniform().unwrap();
        let sys = assemble_system(&mesh, &p, C64::new(1.0, 0.0)).unwrap();
        // Σ_i ∫ φ_i over all vertices equals |Ω|; Dirichlet vertices carry ∫ φ_i too
        let free: C64 = sys.rhs.iter().sum();
        assert!(free.re > 0.0 && free.re < mesh.total_area());
    }
}
