//! NVB refinement with closure by edge marking.
//!
//! A marked triangle marks its refinement edge. Any triangle with a marked
//! edge must also have its refinement edge marked; this is propagated to a
//! fixed point, after which every marked edge is bisected exactly once. A
//! triangle is then split into two or, when a second edge is marked, three
//! or four descendants.

use super::{midpoint, MarkSet, Mesh, NO_TRIANGLE};
use crate::error::MeshError;

pub(super) fn refine(mesh: &Mesh, marks: &MarkSet) -> Result<Mesh, MeshError> {
    if marks.is_empty() {
        return Ok(mesh.clone());
    }
    if let Some(&bad) = marks.indices().last().filter(|&&t| t >= mesh.num_triangles()) {
        return Err(MeshError::InvalidIndex {
            index: bad,
            len: mesh.num_triangles(),
        });
    }
    let topo = mesh.topology();
    let ne = topo.edges.len();
    let mut marked = vec![false; ne];
    let mut stack = Vec::new();
    for &t in marks.indices() {
        let e = topo.triangle_edges[t][0] as usize;
        if !marked[e] {
            marked[e] = true;
            stack.push(e);
        }
    }
    while let Some(e) = stack.pop() {
        for &t in &topo.edge_triangles[e] {
            if t == NO_TRIANGLE {
                continue;
            }
            let r = topo.triangle_edges[t as usize][0] as usize;
            if !marked[r] {
                marked[r] = true;
                stack.push(r);
            }
        }
    }

    let mut vertices = mesh.vertices().to_vec();
    let mut mid = vec![u32::MAX; ne];
    for e in 0..ne {
        if marked[e] {
            let [a, b] = topo.edges[e];
            mid[e] = vertices.len() as u32;
            vertices.push(midpoint(vertices[a as usize], vertices[b as usize]));
        }
    }

    let old = mesh.triangles();
    let mut triangles = Vec::with_capacity(old.len() + 2 * marks.len());
    let mut lineage = Vec::with_capacity(triangles.capacity());
    for (t, &[v0, v1, v2]) in old.iter().enumerate() {
        let [e0, e1, e2] = topo.triangle_edges[t].map(|e| e as usize);
        let lin = mesh.lineages()[t];
        if !marked[e0] {
            triangles.push([v0, v1, v2]);
            lineage.push(lin);
            continue;
        }
        let m = mid[e0];
        // left child [m, v0, v1] has refinement edge e2, right child [m, v2, v0] has e1
        let children = [([m, v0, v1], e2, 0u8), ([m, v2, v0], e1, 1u8)];
        for (child, ce, bit) in children {
            let clin = lin.child(bit)?;
            if marked[ce] {
                let [c0, c1, c2] = child;
                let m2 = mid[ce];
                triangles.push([m2, c0, c1]);
                lineage.push(clin.child(0)?);
                triangles.push([m2, c2, c0]);
                lineage.push(clin.child(1)?);
            } else {
                triangles.push(child);
                lineage.push(clin);
            }
        }
    }

    let mut boundary = Vec::with_capacity(mesh.boundary_edges().len() + marks.len());
    for (b, &e) in mesh.boundary_edges().iter().zip(&topo.boundary_edge_ids) {
        let e = e as usize;
        if marked[e] {
            let m = mid[e];
            let mut first = *b;
            first.v = [b.v[0], m];
            let mut second = *b;
            second.v = [m, b.v[1]];
            boundary.push(first);
            boundary.push(second);
        } else {
            boundary.push(*b);
        }
    }

    debug_assert!(lineage.windows(2).all(|w| w[0] < w[1]));
    Ok(Mesh::from_parts(vertices, triangles, lineage, boundary, mesh.coarse().clone()))
}
