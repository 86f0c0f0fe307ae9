//! Initial meshes of the built-in benchmark geometries.

use std::f64::consts::FRAC_PI_2;

use serde::Deserialize;

use super::{BoundaryKind, Mesh, MeshInput, Point, PolygonGeometry, NO_TRIANGLE};
use crate::error::MeshError;

/// Bottom side of the triangle benchmark (Dirichlet).
pub const TRIANGLE_GAMMA1: u32 = 0;
/// Right side of the triangle benchmark (Neumann), carrier of the QoI.
pub const TRIANGLE_GAMMA2: u32 = 1;
/// Hypotenuse of the triangle benchmark (Neumann).
pub const TRIANGLE_GAMMA3: u32 = 2;
/// Bottom side of the plate, where the load acts.
pub const PLATE_BOTTOM_SEGMENT: u32 = 0;
/// Trapping part of the scatterer boundary.
pub const CAVITY_OMEGA_SEGMENT: u32 = 1;

#[derive(Clone, Debug)]
pub enum Geometry {
    /// {0 < x2 < x1 < pi/2}.
    Triangle,
    /// ]0,0.5[ x ]0,1[ minus ]0,0.25[ x ]0.2,0.45[.
    Plate,
    /// [0,1]^2 minus a slanted C-shaped scatterer.
    Cavity,
    Polygon(PolygonGeometry),
}

pub fn create_initial_mesh(geometry: &Geometry) -> Result<Mesh, MeshError> {
    match geometry {
        Geometry::Triangle => triangle(),
        Geometry::Plate => plate(),
        Geometry::Cavity => cavity(),
        Geometry::Polygon(p) => p.triangulate(),
    }
}

/// Labels every free edge of a triangle soup with `classify`.
fn label_boundary(
    vertices: &[Point],
    triangles: &[[u32; 3]],
    classify: impl Fn(Point, Point) -> u32,
) -> Vec<([u32; 2], u32)> {
    let topo = super::build_topology(triangles, &[]);
    topo.edges
        .iter()
        .zip(&topo.edge_triangles)
        .filter(|(_, adj)| adj[1] == NO_TRIANGLE)
        .map(|(&[a, b], _)| ([a, b], classify(vertices[a as usize], vertices[b as usize])))
        .collect()
}

fn triangle() -> Result<Mesh, MeshError> {
    let h = FRAC_PI_2;
    let vertices = vec![[0.0, 0.0], [h, 0.0], [h, h], [0.5 * h, 0.5 * h]];
    let triangles = vec![[0, 1, 3], [1, 2, 3]];
    let boundary = label_boundary(&vertices, &triangles, |a, b| {
        if a[1] == 0.0 && b[1] == 0.0 {
            TRIANGLE_GAMMA1
        } else if a[0] == h && b[0] == h {
            TRIANGLE_GAMMA2
        } else {
            TRIANGLE_GAMMA3
        }
    });
    Mesh::from_input(MeshInput {
        vertices,
        triangles,
        boundary,
        segment_kinds: vec![BoundaryKind::Dirichlet, BoundaryKind::Neumann, BoundaryKind::Neumann],
    })
}

fn plate() -> Result<Mesh, MeshError> {
    let xs = [0.0, 0.25, 0.5];
    let ys = [0.0, 0.2, 0.45, 0.725, 1.0];
    let mut vertices = Vec::new();
    for &y in &ys {
        for &x in &xs {
            vertices.push([x, y]);
        }
    }
    let v = |i: usize, j: usize| (j * 3 + i) as u32;
    let mut triangles = Vec::new();
    for j in 0..4 {
        for i in 0..2 {
            if i == 0 && j == 1 {
                continue;
            }
            triangles.push([v(i, j), v(i + 1, j), v(i + 1, j + 1)]);
            triangles.push([v(i, j), v(i + 1, j + 1), v(i, j + 1)]);
        }
    }
    let boundary = label_boundary(&vertices, &triangles, |a, b| {
        if a[1] == 0.0 && b[1] == 0.0 {
            PLATE_BOTTOM_SEGMENT
        } else if a[1] == 1.0 && b[1] == 1.0 {
            1
        } else {
            2
        }
    });
    Mesh::from_input(MeshInput {
        vertices,
        triangles,
        boundary,
        segment_kinds: vec![BoundaryKind::Neumann, BoundaryKind::Dirichlet, BoundaryKind::Neumann],
    })
}

#[derive(Deserialize)]
struct CavityData {
    vertices: Vec<Point>,
    triangles: Vec<[u32; 3]>,
    boundary: Vec<[u32; 3]>,
}

const CAVITY_DATA: &str = include_str!("../../data/cavity_t0.json");

/// Vertices of the C-shaped scatterer, in boundary order.
pub fn cavity_polygon() -> [Point; 8] {
    [
        [0.379408389392194, 0.343932372542188],
        [0.370591610607806, 0.356067627457812],
        [0.613979026519516, 0.532898935898998],
        [0.613979026519516, 0.632722284235161],
        [0.379408389392194, 0.462296740540848],
        [0.370591610607806, 0.474431995456472],
        [0.629408389392194, 0.662473392204685],
        [0.629408389392194, 0.525568004543528],
    ]
}

fn cavity() -> Result<Mesh, MeshError> {
    let data: CavityData =
        serde_json::from_str(CAVITY_DATA).map_err(|e| MeshError::Format(format!("cavity data: {e}")))?;
    Mesh::from_input(MeshInput {
        vertices: data.vertices,
        triangles: data.triangles,
        boundary: data.boundary.iter().map(|b| ([b[0], b[1]], b[2])).collect(),
        segment_kinds: vec![BoundaryKind::Robin, BoundaryKind::Neumann, BoundaryKind::Neumann],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segment_length(m: &Mesh, seg: u32) -> f64 {
        m.boundary_edges()
            .iter()
            .filter(|b| b.segment == seg)
            .map(|b| {
                let (p, q) = (m.vertices()[b.v[0] as usize], m.vertices()[b.v[1] as usize]);
                ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
            })
            .sum()
    }

    #[test]
    fn triangle_preset() {
        let m = create_initial_mesh(&Geometry::Triangle).unwrap();
        assert_eq!(m.num_triangles(), 2);
        for p in [[0.0, 0.0], [FRAC_PI_2, 0.0], [FRAC_PI_2, FRAC_PI_2]] {
            assert!(m.vertices().contains(&p));
        }
        assert!((m.total_area() - FRAC_PI_2 * FRAC_PI_2 / 2.0).abs() < 1e-15);
        assert!((segment_length(&m, TRIANGLE_GAMMA1) - FRAC_PI_2).abs() < 1e-15);
        assert!((segment_length(&m, TRIANGLE_GAMMA2) - FRAC_PI_2).abs() < 1e-15);
        let gamma1 = m.boundary_edges().iter().find(|b| b.segment == TRIANGLE_GAMMA1).unwrap();
        assert_eq!(gamma1.kind, BoundaryKind::Dirichlet);
    }

    #[test]
    fn plate_preset() {
        let m = create_initial_mesh(&Geometry::Plate).unwrap();
        assert_eq!(m.num_triangles(), 14);
        assert!((m.total_area() - (0.5 - 0.25 * 0.25)).abs() < 1e-14);
        assert!((segment_length(&m, 0) - 0.5).abs() < 1e-15);
        assert!((segment_length(&m, 1) - 0.5).abs() < 1e-15);
        assert!((segment_length(&m, 2) - (0.75 + 1.0 + 0.75)).abs() < 1e-14);
    }

    #[test]
    fn cavity_preset() {
        let m = create_initial_mesh(&Geometry::Cavity).unwrap();
        let c = cavity_polygon();
        let poly_area: f64 = (0..8)
            .map(|i| {
                let (a, b) = (c[i], c[(i + 1) % 8]);
                0.5 * (a[0] * b[1] - a[1] * b[0])
            })
            .sum::<f64>()
            .abs();
        assert!((m.total_area() - (1.0 - poly_area)).abs() < 1e-12);
        assert!((segment_length(&m, 0) - 4.0).abs() < 1e-12);
        assert!(m
            .boundary_edges()
            .iter()
            .all(|b| (b.segment == 0) == (b.kind == BoundaryKind::Robin)));
        // omega runs from the scatterer's second vertex to its fifth
        let omega: f64 = (1..4)
            .map(|i| ((c[i][0] - c[i + 1][0]).powi(2) + (c[i][1] - c[i + 1][1]).powi(2)).sqrt())
            .sum();
        assert!((segment_length(&m, CAVITY_OMEGA_SEGMENT) - omega).abs() < 1e-12);
    }
}
