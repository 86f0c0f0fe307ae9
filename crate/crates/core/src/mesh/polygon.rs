//! Triangulation of user polygons with holes.
//!
//! Holes are bridged into the outer ring, the resulting weakly simple polygon
//! is ear-clipped (best ear first) and the result is improved by Lawson
//! flips with the boundary held fixed. Intended for coarse initial meshes.

use serde::{Deserialize, Serialize};

use super::{signed_area, BoundaryKind, Mesh, MeshInput, Point, NO_TRIANGLE};
use crate::error::MeshError;

/// A polygon with holes; edge `i` of a ring joins vertex `i` to vertex
/// `i + 1` (cyclically) and carries the segment id `segments[i]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolygonGeometry {
    pub outer: Vec<Point>,
    pub outer_segments: Vec<u32>,
    #[serde(default)]
    pub holes: Vec<Vec<Point>>,
    #[serde(default)]
    pub hole_segments: Vec<Vec<u32>>,
    pub segment_kinds: Vec<BoundaryKind>,
}

fn ring_area(r: &[Point]) -> f64 {
    (0..r.len())
        .map(|i| {
            let (a, b) = (r[i], r[(i + 1) % r.len()]);
            0.5 * (a[0] * b[1] - a[1] * b[0])
        })
        .sum()
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test.
fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

fn point_in_ring(r: &[Point], p: Point) -> bool {
    let mut inside = false;
    let n = r.len();
    for i in 0..n {
        let (a, b) = (r[i], r[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

impl PolygonGeometry {
    fn validate(&self) -> Result<(), MeshError> {
        let bad = |m: &str| Err(MeshError::InvalidGeometry(m.to_string()));
        if self.outer.len() < 3 || self.holes.iter().any(|h| h.len() < 3) {
            return bad("rings need at least three vertices");
        }
        if self.outer_segments.len() != self.outer.len()
            || self.hole_segments.len() != self.holes.len()
            || self.holes.iter().zip(&self.hole_segments).any(|(h, s)| h.len() != s.len())
        {
            return bad("every boundary edge needs exactly one segment label");
        }
        let nseg = self.segment_kinds.len() as u32;
        if self.outer_segments.iter().chain(self.hole_segments.iter().flatten()).any(|&s| s >= nseg) {
            return bad("segment label without a boundary kind");
        }
        let rings: Vec<&Vec<Point>> = std::iter::once(&self.outer).chain(&self.holes).collect();
        if rings.iter().flat_map(|r| r.iter()).any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return bad("non-finite coordinate");
        }
        let mut edges = Vec::new();
        for (ri, r) in rings.iter().enumerate() {
            if ring_area(r).abs() <= 0.0 {
                return bad("degenerate ring");
            }
            for i in 0..r.len() {
                edges.push((ri, i, r.len(), r[i], r[(i + 1) % r.len()]));
            }
        }
        for (x, e) in edges.iter().enumerate() {
            for f in &edges[x + 1..] {
                let adjacent = e.0 == f.0 && ((e.1 + 1) % e.2 == f.1 || (f.1 + 1) % f.2 == e.1);
                if adjacent {
                    // adjacent edges may only share their common vertex
                    if orient(e.3, e.4, f.4) == 0.0 && orient(e.3, e.4, f.3) == 0.0 && e.2 > 3 {
                        let shared = if (e.1 + 1) % e.2 == f.1 { e.4 } else { e.3 };
                        let other_e = if shared == e.4 { e.3 } else { e.4 };
                        let other_f = if shared == f.3 { f.4 } else { f.3 };
                        let dot = (other_e[0] - shared[0]) * (other_f[0] - shared[0])
                            + (other_e[1] - shared[1]) * (other_f[1] - shared[1]);
                        if dot > 0.0 {
                            return bad("self-intersecting polygon");
                        }
                    }
                    continue;
                }
                if segments_intersect(e.3, e.4, f.3, f.4) {
                    return bad("self-intersecting polygon");
                }
            }
        }
        for h in &self.holes {
            if !point_in_ring(&self.outer, h[0]) {
                return bad("hole outside the outer ring");
            }
        }
        Ok(())
    }

    pub(crate) fn triangulate(&self) -> Result<Mesh, MeshError> {
        self.validate()?;
        let mut vertices: Vec<Point> = Vec::new();
        let mut boundary = Vec::new();
        let mut rings: Vec<Vec<u32>> = Vec::new();
        for (ri, (ring, segs)) in std::iter::once((&self.outer, &self.outer_segments))
            .chain(self.holes.iter().zip(&self.hole_segments))
            .enumerate()
        {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(ring);
            let n = ring.len() as u32;
            for i in 0..n {
                boundary.push(([base + i, base + (i + 1) % n], segs[i as usize]));
            }
            let mut idx: Vec<u32> = (base..base + n).collect();
            let ccw = ring_area(ring) > 0.0;
            // outer ring counter-clockwise, holes clockwise
            if (ri == 0) != ccw {
                idx.reverse();
            }
            rings.push(idx);
        }
        let mut poly = rings[0].clone();
        let mut holes: Vec<Vec<u32>> = rings[1..].to_vec();
        // bridge holes with the largest x first
        holes.sort_by(|a, b| {
            let mx = |h: &Vec<u32>| h.iter().map(|&v| vertices[v as usize][0]).fold(f64::MIN, f64::max);
            mx(b).total_cmp(&mx(a))
        });
        for (hi, hole) in holes.iter().enumerate() {
            let pending: Vec<&Vec<u32>> = holes[hi + 1..].iter().collect();
            poly = bridge(&vertices, &poly, hole, &pending)?;
        }
        let mut triangles = ear_clip(&vertices, &poly)?;
        lawson_flips(&vertices, &mut triangles, &boundary);
        Mesh::from_input(MeshInput {
            vertices,
            triangles,
            boundary,
            segment_kinds: self.segment_kinds.clone(),
        })
    }
}

fn bridge(vertices: &[Point], poly: &[u32], hole: &[u32], pending: &[&Vec<u32>]) -> Result<Vec<u32>, MeshError> {
    let p = |v: u32| vertices[v as usize];
    let mut segs: Vec<(Point, Point)> = Vec::new();
    for ring in std::iter::once(poly).chain(std::iter::once(hole)).chain(pending.iter().map(|h| h.as_slice())) {
        for i in 0..ring.len() {
            segs.push((p(ring[i]), p(ring[(i + 1) % ring.len()])));
        }
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for (hi, &h) in hole.iter().enumerate() {
        for (pi, &v) in poly.iter().enumerate() {
            let (a, b) = (p(h), p(v));
            let d = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
            if best.is_some_and(|(bd, _, _)| bd <= d) {
                continue;
            }
            // the bridge must leave v into the polygon interior
            let prev = p(poly[(pi + poly.len() - 1) % poly.len()]);
            let next = p(poly[(pi + 1) % poly.len()]);
            let convex = orient(prev, b, next) > 0.0;
            let inside_cone = if convex {
                orient(prev, b, a) > 0.0 && orient(b, next, a) > 0.0
            } else {
                !(orient(prev, b, a) <= 0.0 && orient(b, next, a) <= 0.0)
            };
            if !inside_cone {
                continue;
            }
            let blocked = segs.iter().any(|&(s, t)| {
                let touches = s == a || s == b || t == a || t == b;
                !touches && segments_intersect(a, b, s, t)
            });
            if !blocked {
                best = Some((d, hi, pi));
            }
        }
    }
    let (_, hi, pi) = best.ok_or_else(|| MeshError::InvalidGeometry("cannot connect hole to outer ring".into()))?;
    let mut out = Vec::with_capacity(poly.len() + hole.len() + 2);
    out.extend_from_slice(&poly[..=pi]);
    for k in 0..=hole.len() {
        out.push(hole[(hi + k) % hole.len()]);
    }
    out.push(poly[pi]);
    out.extend_from_slice(&poly[pi + 1..]);
    Ok(out)
}

fn ear_clip(vertices: &[Point], poly: &[u32]) -> Result<Vec<[u32; 3]>, MeshError> {
    let p = |v: u32| vertices[v as usize];
    let mut ring = poly.to_vec();
    let mut out = Vec::new();
    while ring.len() > 3 {
        let n = ring.len();
        let mut best: Option<(f64, usize)> = None;
        for i in 0..n {
            let (a, b, c) = (ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]);
            if a == c || orient(p(a), p(b), p(c)) <= 0.0 {
                continue;
            }
            let tri = [p(a), p(b), p(c)];
            let blocked = ring.iter().enumerate().any(|(j, &v)| {
                if v == a || v == b || v == c || j == i {
                    return false;
                }
                let q = p(v);
                if q == tri[0] || q == tri[1] || q == tri[2] {
                    return false;
                }
                orient(tri[0], tri[1], q) >= 0.0 && orient(tri[1], tri[2], q) >= 0.0 && orient(tri[2], tri[0], q) >= 0.0
            });
            if blocked {
                continue;
            }
            let diagonal_crosses = (0..n).any(|j| {
                let (s, t) = (ring[j], ring[(j + 1) % n]);
                if s == a || s == c || t == a || t == c {
                    return false;
                }
                segments_intersect(p(a), p(c), p(s), p(t))
            });
            if diagonal_crosses {
                continue;
            }
            let q = min_angle(tri);
            if best.is_none_or(|(bq, _)| q > bq) {
                best = Some((q, i));
            }
        }
        let (_, i) = best.ok_or_else(|| MeshError::InvalidGeometry("polygon cannot be triangulated".into()))?;
        out.push([ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]]);
        ring.remove(i);
    }
    if orient(p(ring[0]), p(ring[1]), p(ring[2])) <= 0.0 {
        return Err(MeshError::InvalidGeometry("polygon cannot be triangulated".into()));
    }
    out.push([ring[0], ring[1], ring[2]]);
    Ok(out)
}

fn min_angle(t: [Point; 3]) -> f64 {
    (0..3)
        .map(|k| {
            let (a, b, c) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
            let u = [b[0] - a[0], b[1] - a[1]];
            let v = [c[0] - a[0], c[1] - a[1]];
            (u[0] * v[1] - u[1] * v[0]).abs().atan2(u[0] * v[0] + u[1] * v[1])
        })
        .fold(f64::INFINITY, f64::min)
}

fn lawson_flips(vertices: &[Point], tris: &mut [[u32; 3]], boundary: &[([u32; 2], u32)]) {
    let p = |v: u32| vertices[v as usize];
    let fixed: std::collections::HashSet<(u32, u32)> =
        boundary.iter().map(|&([a, b], _)| (a.min(b), a.max(b))).collect();
    for _ in 0..100 * tris.len() {
        let topo = super::build_topology(tris, &[]);
        let mut flipped = false;
        for (e, &[a, b]) in topo.edges.iter().enumerate() {
            let [t0, t1] = topo.edge_triangles[e];
            if t1 == NO_TRIANGLE || fixed.contains(&(a, b)) {
                continue;
            }
            let opp = |t: u32| *tris[t as usize].iter().find(|&&v| v != a && v != b).unwrap();
            let (c, d) = (opp(t0), opp(t1));
            let angle = |o: u32| {
                let (u, v) = (p(a), p(b));
                let q = p(o);
                let x = [u[0] - q[0], u[1] - q[1]];
                let y = [v[0] - q[0], v[1] - q[1]];
                (x[0] * y[1] - x[1] * y[0]).abs().atan2(x[0] * y[0] + x[1] * y[1])
            };
            if angle(c) + angle(d) <= std::f64::consts::PI + 1e-12 {
                continue;
            }
            // the flipped quadrilateral must be convex
            if signed_area(p(c), p(d), p(a)).signum() == signed_area(p(c), p(d), p(b)).signum() {
                continue;
            }
            tris[t0 as usize] = [c, a, d];
            tris[t1 as usize] = [d, b, c];
            for t in [t0, t1] {
                let [x, y, z] = tris[t as usize];
                if signed_area(p(x), p(y), p(z)) < 0.0 {
                    tris[t as usize] = [x, z, y];
                }
            }
            flipped = true;
            break;
        }
        if !flipped {
            break;
        }
    }
}
