//! Residual a-posteriori error indicators and Dörfler marking.

use num_complex::Complex64 as C64;

use crate::error::FemError;
use crate::fem::assembly::{check_boundary, edge_normal, p1_gradients};
use crate::fem::{Snapshot, WaveProblem};
use crate::mesh::{BoundaryKind, MarkSet, NO_TRIANGLE};

/// Squared local indicators η_T² and their sum η².
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorField {
    values: Vec<f64>,
    total: f64,
}

impl IndicatorField {
    pub fn from_values(values: Vec<f64>) -> Result<Self, FemError> {
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(FemError::Format(format!("invalid indicator {v}")));
        }
        let total = values.iter().sum();
        Ok(IndicatorField { values, total })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// η².
    pub fn total(&self) -> f64 {
        self.total
    }

    /// η.
    pub fn eta(&self) -> f64 {
        self.total.sqrt()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Degree-4 six-point rule on the reference triangle: barycentric
/// coordinates (a, a, b) up to permutation and weights summing to one.
const STRANG6: [(f64, f64, f64); 2] = [
    (0.445_948_490_915_965, 0.108_103_018_168_070, 0.223_381_589_678_011),
    (0.091_576_213_509_771, 0.816_847_572_980_459, 0.109_951_743_655_322),
];

/// Three-point Gauss rule on [0, 1].
const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Computes η_T² for every triangle of the snapshot's mesh:
/// h_T²‖f + k²u‖²_T plus h_T times the squared L² norms of the normal
/// derivative jumps on interior edges (counted for both neighbours) and of
/// the Neumann and Robin residuals on boundary edges.
pub fn local_indicators(snapshot: &Snapshot, problem: &WaveProblem, z: C64) -> Result<IndicatorField, FemError> {
    let mesh = &*snapshot.mesh;
    check_boundary(mesh, problem)?;
    let u = snapshot.nodal_values();
    let k = problem.wavenumber(z);
    let k2 = problem.wavenumber_squared(z);
    let nt = mesh.num_triangles();
    let zero = C64::new(0.0, 0.0);

    let mut grads = Vec::with_capacity(nt);
    let mut h = Vec::with_capacity(nt);
    let mut eta2 = Vec::with_capacity(nt);
    for t in 0..nt {
        let tri = mesh.triangles()[t];
        let p = mesh.triangle_points(t);
        let (g, area) = p1_gradients(p);
        let ut = tri.map(|v| u[v as usize]);
        let mut grad = [zero; 2];
        for i in 0..3 {
            grad[0] += ut[i] * g[i][0];
            grad[1] += ut[i] * g[i][1];
        }
        grads.push(grad);
        let ht = mesh.diameter(t);
        h.push(ht);

        let mut vol = 0.0;
        for &(a, b, w) in &STRANG6 {
            for perm in [[a, a, b], [a, b, a], [b, a, a]] {
                let x = [
                    perm[0] * p[0][0] + perm[1] * p[1][0] + perm[2] * p[2][0],
                    perm[0] * p[0][1] + perm[1] * p[1][1] + perm[2] * p[2][1],
                ];
                let ux = perm[0] * ut[0] + perm[1] * ut[1] + perm[2] * ut[2];
                vol += w * (problem.source(z, x) + k2 * ux).norm_sqr();
            }
        }
        eta2.push(ht * ht * area * vol);
    }

    let topo = mesh.topology();
    for (e, (&[a, b], &[t1, t2])) in topo.edges.iter().zip(&topo.edge_triangles).enumerate() {
        if t2 == NO_TRIANGLE || topo.is_boundary(e) {
            continue;
        }
        let (normal, len) = edge_normal(mesh.vertices()[a as usize], mesh.vertices()[b as usize]);
        let (g1, g2) = (grads[t1 as usize], grads[t2 as usize]);
        let jump = (g1[0] - g2[0]) * normal[0] + (g1[1] - g2[1]) * normal[1];
        let j2 = jump.norm_sqr() * len;
        eta2[t1 as usize] += h[t1 as usize] * j2;
        eta2[t2 as usize] += h[t2 as usize] * j2;
    }

    let iota = C64::new(0.0, 1.0);
    for (bi, b) in mesh.boundary_edges().iter().enumerate() {
        if b.kind == BoundaryKind::Dirichlet {
            continue;
        }
        let e = topo.boundary_edge_ids[bi] as usize;
        let t = topo.edge_triangles[e][0] as usize;
        let (pa, pb) = (mesh.vertices()[b.v[0] as usize], mesh.vertices()[b.v[1] as usize]);
        let (normal, len) = edge_normal(pa, pb);
        let dn = grads[t][0] * normal[0] + grads[t][1] * normal[1];
        let (ua, ub) = (u[b.v[0] as usize], u[b.v[1] as usize]);
        let mut acc = 0.0;
        for &(s, w) in &GAUSS3 {
            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let r = match b.kind {
                BoundaryKind::Neumann => problem.neumann(z, x, normal, b.segment) - dn,
                _ => problem.robin(z, x, normal, b.segment) + iota * k * (ua * (1.0 - s) + ub * s) - dn,
            };
            acc += w * r.norm_sqr();
        }
        eta2[t] += h[t] * len * acc;
    }
    IndicatorField::from_values(eta2)
}

/// Dörfler marking: the shortest prefix of the indicators sorted in
/// descending order (ties by ascending index) whose sum reaches θη².
/// θ ≥ 1 marks every element with a nonzero indicator.
pub fn doerfler_mark(indicators: &IndicatorField, theta: f64) -> MarkSet {
    let v = indicators.values();
    let mut order: Vec<usize> = (0..v.len()).filter(|&i| v[i] > 0.0).collect();
    if order.is_empty() || !(theta > 0.0) {
        return MarkSet::empty();
    }
    if theta < 1.0 {
        order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
        let target = theta * indicators.total();
        let mut acc = 0.0;
        let mut n = 0;
        while n < order.len() && acc < target {
            acc += v[order[n]];
            n += 1;
        }
        order.truncate(n);
        order.sort_unstable();
    }
    MarkSet::from_sorted(order)
}
