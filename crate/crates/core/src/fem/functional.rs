//! Curves and the linear and quadratic output functionals on them.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{FemError, MeshError};
use crate::mesh::{Mesh, Point};

use super::assembly::GAUSS2;
use super::snapshot::Snapshot;

/// A curve ω resolved by the mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curve {
    /// Union of labeled boundary segments.
    Segments(Vec<u32>),
    /// Straight segment made of mesh edges (e.g. an internal line).
    Line { from: Point, to: Point },
}

/// Weight of a linear functional, w(x).
pub type Weight = Arc<dyn Fn(Point) -> C64 + Send + Sync>;

/// F(v) = ∫_ω w v.
#[derive(Clone)]
pub struct LinearFunctional {
    pub curve: Curve,
    /// None means w ≡ 1.
    pub weight: Option<Weight>,
}

impl std::fmt::Debug for LinearFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearFunctional")
            .field("curve", &self.curve)
            .field("weighted", &self.weight.is_some())
            .finish()
    }
}

impl LinearFunctional {
    pub fn new(curve: Curve) -> Self {
        LinearFunctional { curve, weight: None }
    }

    pub fn weighted(curve: Curve, w: impl Fn(Point) -> C64 + Send + Sync + 'static) -> Self {
        LinearFunctional {
            curve,
            weight: Some(Arc::new(w)),
        }
    }

    pub fn weight_at(&self, x: Point) -> C64 {
        self.weight.as_ref().map_or(C64::new(1.0, 0.0), |w| w(x))
    }
}

/// Mesh edges (vertex pairs) that make up `curve`.
pub fn curve_edges(mesh: &Mesh, curve: &Curve) -> Result<Vec<[u32; 2]>, MeshError> {
    match curve {
        Curve::Segments(segs) => {
            if let Some(&s) = segs.iter().find(|&&s| s as usize >= mesh.segment_kinds().len()) {
                return Err(MeshError::CurveNotResolved(format!("unknown segment {s}")));
            }
            let edges: Vec<_> = mesh
                .boundary_edges()
                .iter()
                .filter(|b| segs.contains(&b.segment))
                .map(|b| b.v)
                .collect();
            if edges.is_empty() {
                return Err(MeshError::CurveNotResolved(format!("segments {segs:?} carry no edges")));
            }
            Ok(edges)
        }
        &Curve::Line { from, to } => {
            let d = [to[0] - from[0], to[1] - from[1]];
            let len = d[0].hypot(d[1]);
            if !(len > 0.0) {
                return Err(MeshError::CurveNotResolved("degenerate line".into()));
            }
            let tol = 1e-10 * len.max(1.0);
            let on_line: Vec<bool> = mesh
                .vertices()
                .iter()
                .map(|p| {
                    let r = [p[0] - from[0], p[1] - from[1]];
                    let s = (r[0] * d[0] + r[1] * d[1]) / len;
                    let off = (r[0] * d[1] - r[1] * d[0]).abs() / len;
                    off <= tol && s >= -tol && s <= len + tol
                })
                .collect();
            let edges: Vec<[u32; 2]> = mesh
                .topology()
                .edges
                .iter()
                .copied()
                .filter(|e| on_line[e[0] as usize] && on_line[e[1] as usize])
                .collect();
            let covered: f64 = edges.iter().map(|&e| edge_length(mesh, e)).sum();
            if (covered - len).abs() > 1e-9 * len {
                return Err(MeshError::CurveNotResolved(format!(
                    "mesh edges cover {covered} of a line of length {len}"
                )));
            }
            Ok(edges)
        }
    }
}

fn edge_length(mesh: &Mesh, e: [u32; 2]) -> f64 {
    let (a, b) = (mesh.vertices()[e[0] as usize], mesh.vertices()[e[1] as usize]);
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Total length of the curve as resolved by `mesh`.
pub fn curve_length(mesh: &Mesh, curve: &Curve) -> Result<f64, MeshError> {
    Ok(curve_edges(mesh, curve)?.into_iter().map(|e| edge_length(mesh, e)).sum())
}

/// ∫_ω w u_h, exact for w of degree ≤ 2 on each edge.
pub fn apply_linear_functional(snapshot: &Snapshot, functional: &LinearFunctional) -> Result<C64, FemError> {
    let mesh = &snapshot.mesh;
    let u = snapshot.nodal_values();
    let mut acc = C64::new(0.0, 0.0);
    for [a, b] in curve_edges(mesh, &functional.curve)? {
        let (pa, pb) = (mesh.vertices()[a as usize], mesh.vertices()[b as usize]);
        let len = (pa[0] - pb[0]).hypot(pa[1] - pb[1]);
        for t in GAUSS2 {
            let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
            let ux = u[a as usize] * (1.0 - t) + u[b as usize] * t;
            acc += 0.5 * len * functional.weight_at(x) * ux;
        }
    }
    Ok(acc)
}

/// ∫_ω |u_h|², exact.
pub fn apply_quadratic_functional(snapshot: &Snapshot, curve: &Curve) -> Result<f64, FemError> {
    let mesh = &snapshot.mesh;
    let u = snapshot.nodal_values();
    let mut acc = 0.0;
    for e @ [a, b] in curve_edges(mesh, curve)? {
        let (ua, ub) = (u[a as usize], u[b as usize]);
        acc += edge_length(mesh, e) / 3.0 * (ua.norm_sqr() + ub.norm_sqr() + (ua * ub.conj()).re);
    }
    Ok(acc)
}
