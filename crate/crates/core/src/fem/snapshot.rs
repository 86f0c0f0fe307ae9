//! Finite-element snapshots and their serialization.

use std::sync::Arc;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::FemError;
use crate::mesh::{Mesh, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotStatus {
    Converged,
    BudgetExhausted,
    Discarded,
}

/// One iteration of the adaptive loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub level: usize,
    pub dofs: usize,
    pub eta: f64,
    pub wallclock_ms: f64,
    /// The discrete problem was rejected as singular at this level.
    pub singular: bool,
}

/// A P1 solution at one frequency on its own mesh.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub mesh: Arc<Mesh>,
    /// Values at the free (non-Dirichlet) vertices, in vertex order.
    pub coefficients: Vec<C64>,
    pub z: C64,
    pub estimator: f64,
    pub status: SnapshotStatus,
    pub history: Vec<IterationRecord>,
}

impl Snapshot {
    pub fn new(
        mesh: Arc<Mesh>,
        coefficients: Vec<C64>,
        z: C64,
        estimator: f64,
        status: SnapshotStatus,
    ) -> Result<Self, FemError> {
        let expected = mesh.num_free_vertices();
        if coefficients.len() != expected {
            return Err(FemError::CoefficientLength {
                expected,
                got: coefficients.len(),
            });
        }
        if !(estimator >= 0.0) {
            return Err(FemError::Format(format!("negative estimator {estimator}")));
        }
        Ok(Snapshot {
            mesh,
            coefficients,
            z,
            estimator,
            status,
            history: Vec::new(),
        })
    }

    /// Snapshot of the P1 interpolant of `u` (zero at Dirichlet vertices).
    pub fn interpolate(mesh: Arc<Mesh>, z: C64, u: impl Fn(Point) -> C64) -> Self {
        let d = mesh.dirichlet_vertices();
        let coefficients = mesh
            .vertices()
            .iter()
            .zip(&d)
            .filter(|(_, &fixed)| !fixed)
            .map(|(&p, _)| u(p))
            .collect();
        Snapshot {
            mesh,
            coefficients,
            z,
            estimator: 0.0,
            status: SnapshotStatus::Converged,
            history: Vec::new(),
        }
    }

    pub fn dofs(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_usable(&self) -> bool {
        self.status != SnapshotStatus::Discarded
    }

    /// Values at all vertices, Dirichlet vertices included.
    pub fn nodal_values(&self) -> Vec<C64> {
        let (map, _) = self.mesh.dof_map();
        map.iter()
            .map(|d| d.map_or(C64::new(0.0, 0.0), |i| self.coefficients[i as usize]))
            .collect()
    }

    /// P1 interpolation at arbitrary points of the closed domain.
    pub fn evaluate(&self, points: &[Point]) -> Result<Vec<C64>, FemError> {
        let nodal = self.nodal_values();
        points
            .iter()
            .map(|&p| {
                let t = self.mesh.locate(p)?;
                let q = self.mesh.triangle_points(t);
                let tri = self.mesh.triangles()[t];
                let area = crate::mesh::signed_area(q[0], q[1], q[2]);
                let l = [
                    crate::mesh::signed_area(p, q[1], q[2]) / area,
                    crate::mesh::signed_area(q[0], p, q[2]) / area,
                    crate::mesh::signed_area(q[0], q[1], p) / area,
                ];
                Ok((0..3).map(|i| nodal[tri[i] as usize] * l[i]).sum())
            })
            .collect()
    }

    /// Header plus base64 little-endian complex128 coefficients.
    pub fn to_document(&self, mesh_ref: &str) -> SnapshotDocument {
        let mut bytes = Vec::with_capacity(16 * self.coefficients.len());
        for c in &self.coefficients {
            bytes.extend_from_slice(&c.re.to_le_bytes());
            bytes.extend_from_slice(&c.im.to_le_bytes());
        }
        SnapshotDocument {
            z: [self.z.re, self.z.im],
            estimator: self.estimator,
            status: self.status,
            mesh: mesh_ref.to_string(),
            dofs: self.coefficients.len(),
            coefficients: STANDARD.encode(bytes),
            history: self.history.clone(),
        }
    }

    pub fn from_document(doc: &SnapshotDocument, mesh: Arc<Mesh>) -> Result<Self, FemError> {
        let bytes = STANDARD
            .decode(&doc.coefficients)
            .map_err(|e| FemError::Format(e.to_string()))?;
        if bytes.len() != 16 * doc.dofs {
            return Err(FemError::Format("coefficient payload has the wrong length".into()));
        }
        let coefficients = bytes
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        let mut s = Snapshot::new(mesh, coefficients, C64::new(doc.z[0], doc.z[1]), doc.estimator, doc.status)?;
        s.history = doc.history.clone();
        Ok(s)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SnapshotDocument {
    pub z: [f64; 2],
    pub estimator: f64,
    pub status: SnapshotStatus,
    /// Reference to the mesh document (e.g. a file name).
    pub mesh: String,
    pub dofs: usize,
    pub coefficients: String,
    #[serde(default)]
    pub history: Vec<IterationRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::problem::triangle_problem;

    fn snap() -> Snapshot {
        let p = triangle_problem();
        let mesh = Arc::new(p.initial_mesh.refine_uniform().unwrap().refine_uniform().unwrap());
        Snapshot::interpolate(mesh, C64::new(3.0, 0.5), |x| C64::new(x[0] * x[1] + 1.0, x[0] - 2.0 * x[1]))
    }

    #[test]
    fn evaluation_is_p1_interpolation() {
        let s = snap();
        let nodal = s.nodal_values();
        let m = &s.mesh;
        for v in 0..m.num_vertices() {
            let val = s.evaluate(&[m.vertices()[v]]).unwrap()[0];
            assert!((val - nodal[v]).norm() < 1e-14);
        }
        let [a, b, c] = m.triangles()[3];
        let (pa, pb, pc) = (m.vertices()[a as usize], m.vertices()[b as usize], m.vertices()[c as usize]);
        let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
        let val = s.evaluate(&[mid]).unwrap()[0];
        assert!((val - 0.5 * (nodal[a as usize] + nodal[b as usize])).norm() < 1e-14);
        let bc = [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0];
        let val = s.evaluate(&[bc]).unwrap()[0];
        let mean = (nodal[a as usize] + nodal[b as usize] + nodal[c as usize]) / 3.0;
        assert!((val - mean).norm() < 1e-14);
        assert!(s.evaluate(&[[2.0, 0.1]]).is_err());
    }

    #[test]
    fn dirichlet_vertices_are_zero() {
        let s = snap();
        let nodal = s.nodal_values();
        for (v, p) in s.mesh.vertices().iter().enumerate() {
            if p[1] == 0.0 {
                assert_eq!(nodal[v], C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn document_round_trip() {
        let s = snap();
        let doc = s.to_document("mesh.json");
        let text = serde_json::to_string(&doc).unwrap();
        let back: SnapshotDocument = serde_json::from_str(&text).unwrap();
        let t = Snapshot::from_document(&back, s.mesh.clone()).unwrap();
        assert_eq!(t.coefficients, s.coefficients);
        assert_eq!(t.z, s.z);
        assert_eq!(t.status, s.status);
    }

    #[test]
    fn length_is_checked() {
        let s = snap();
        assert!(Snapshot::new(s.mesh.clone(), vec![], s.z, 0.0, SnapshotStatus::Converged).is_err());
    }
}
