//! JSON documents for meshes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{BoundaryEdge, BoundaryKind, Lineage, Mesh, MeshInput, Point};
use crate::error::MeshError;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TriangleRecord {
    pub v: [u32; 3],
    /// Local index of the vertex opposite the refinement edge.
    pub refinement_edge: u8,
    pub root: u32,
    pub lineage: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BoundaryRecord {
    pub v: [u32; 2],
    pub kind: BoundaryKind,
    pub segment: u32,
    pub origin: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct InitialRecord {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[u32; 3]>,
    pub boundary_edges: Vec<([u32; 2], u32)>,
    pub segment_kinds: Vec<BoundaryKind>,
}

/// Serializable form of a [`Mesh`], including its initial mesh.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MeshDocument {
    pub vertices: Vec<Point>,
    pub triangles: Vec<TriangleRecord>,
    pub boundary_edges: Vec<BoundaryRecord>,
    pub initial: InitialRecord,
}

impl Mesh {
    pub fn to_document(&self) -> MeshDocument {
        let c = self.coarse();
        MeshDocument {
            vertices: self.vertices().to_vec(),
            triangles: self
                .triangles()
                .iter()
                .zip(self.lineages())
                .map(|(&v, l)| TriangleRecord {
                    v,
                    refinement_edge: 0,
                    root: l.root,
                    lineage: l.path_string(),
                })
                .collect(),
            boundary_edges: self
                .boundary_edges()
                .iter()
                .map(|b| BoundaryRecord {
                    v: b.v,
                    kind: b.kind,
                    segment: b.segment,
                    origin: b.origin,
                })
                .collect(),
            initial: InitialRecord {
                vertices: c.vertices.clone(),
                triangles: c.triangles.clone(),
                boundary_edges: c.boundary.iter().map(|b| (b.v, b.segment)).collect(),
                segment_kinds: c.segment_kinds.clone(),
            },
        }
    }

    /// Rebuilds a mesh, checking that every element is the descendant its
    /// lineage claims to be.
    pub fn from_document(doc: &MeshDocument) -> Result<Mesh, MeshError> {
        let init = Mesh::from_input(MeshInput {
            vertices: doc.initial.vertices.clone(),
            triangles: doc.initial.triangles.clone(),
            boundary: doc.initial.boundary_edges.clone(),
            segment_kinds: doc.initial.segment_kinds.clone(),
        })?;
        if init.triangles() != doc.initial.triangles.as_slice() {
            return Err(MeshError::Format("initial triangles are not in canonical orientation".into()));
        }
        let nv = doc.vertices.len();
        let mut triangles = Vec::with_capacity(doc.triangles.len());
        let mut lineage = Vec::with_capacity(doc.triangles.len());
        for (i, t) in doc.triangles.iter().enumerate() {
            if t.v.iter().any(|&v| v as usize >= nv) || t.refinement_edge > 2 {
                return Err(MeshError::Format(format!("triangle {i} is malformed")));
            }
            let r = t.refinement_edge as usize;
            let v = [t.v[r], t.v[(r + 1) % 3], t.v[(r + 2) % 3]];
            let l = Lineage::parse_path(t.root, &t.lineage)?;
            let expected = init.replay(t.root as usize, &l.path())?;
            let actual = v.map(|k| doc.vertices[k as usize]);
            if expected.iter().zip(&actual).any(|(a, b)| a[0].to_bits() != b[0].to_bits() || a[1].to_bits() != b[1].to_bits()) {
                return Err(MeshError::Format(format!("triangle {i} does not match its lineage")));
            }
            triangles.push(v);
            lineage.push(l);
        }
        if lineage.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MeshError::Format("triangles are not in bisection-tree order".into()));
        }
        let boundary = doc
            .boundary_edges
            .iter()
            .map(|b| {
                if b.v.iter().any(|&v| v as usize >= nv) {
                    return Err(MeshError::Format("boundary edge references a missing vertex".into()));
                }
                Ok(BoundaryEdge {
                    v: b.v,
                    kind: b.kind,
                    segment: b.segment,
                    origin: b.origin,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Mesh::from_parts(
            doc.vertices.clone(),
            triangles,
            lineage,
            boundary,
            Arc::clone(init.coarse()),
        ))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("mesh serialization")
    }

    pub fn from_json(s: &str) -> Result<Mesh, MeshError> {
        let doc: MeshDocument = serde_json::from_str(s).map_err(|e| MeshError::Format(e.to_string()))?;
        Mesh::from_document(&doc)
    }
}

#[cfg(test)]
mod tests {
    use super::super::*;

    #[test]
    fn json_round_trip_is_lossless() {
        let mut m = create_initial_mesh(&Geometry::Plate).unwrap();
        for k in 0..6 {
            let t = m.locate([0.25, 0.2 + 0.01 * k as f64]).unwrap();
            m = m.refine(&MarkSet::new(&m, [t, 0]).unwrap()).unwrap();
        }
        let s = m.to_json();
        let back = Mesh::from_json(&s).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), s);
        assert!(back.same_ancestry(&m));
    }

    #[test]
    fn tampered_document_is_rejected() {
        let m = create_initial_mesh(&Geometry::Triangle).unwrap().refine_uniform().unwrap();
        let mut doc = m.to_document();
        doc.triangles[0].lineage = "1".into();
        assert!(Mesh::from_document(&doc).is_err());
    }
}
