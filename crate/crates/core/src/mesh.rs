//! Conforming triangulations, edge topology and newest-vertex bisection.
//!
//! Triangles are stored counterclockwise. Local edge `k` of a triangle is the
//! edge opposite local vertex `k`, i.e. `(v[k+1], v[k+2])` (indices mod 3).
//! The refinement edge of every triangle is recorded as such a local index.

use std::collections::{HashMap, HashSet};

use crate::error::MeshError;

pub type Point = [f64; 2];

/// How new boundary vertices are placed during refinement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Geometry {
    /// Midpoints stay on the straight boundary edge.
    #[default]
    Polygonal,
    /// New boundary vertices are projected radially onto the unit circle.
    UnitCircle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    refinement_edge: Vec<u8>,
    geometry: Geometry,
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn local_edge(tri: &[usize; 3], k: usize) -> (usize, usize) {
    (tri[(k + 1) % 3], tri[(k + 2) % 3])
}

impl Mesh {
    /// Builds a mesh from coordinates and a triangle list. Triangles are
    /// reoriented counterclockwise, boundary flags are inferred from edge
    /// incidence and the refinement edge of each triangle is its longest edge
    /// (ties go to the edge whose opposite vertex has the smaller index).
    pub fn build(coords: Vec<Point>, triangles: Vec<[usize; 3]>, geometry: Geometry) -> Result<Self, MeshError> {
        let triangles = Self::validate(&coords, triangles)?;
        check_duplicates(&coords)?;
        let refinement_edge = triangles.iter().map(|t| longest_edge(&coords, t)).collect();
        Self::assemble(coords, triangles, refinement_edge, geometry)
    }

    /// Like [`Mesh::build`] but with explicit refinement edges (local indices).
    pub fn with_refinement_edges(
        coords: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        refinement_edge: Vec<u8>,
        geometry: Geometry,
    ) -> Result<Self, MeshError> {
        if refinement_edge.len() != triangles.len() {
            return Err(MeshError::TriangleOutOfRange(refinement_edge.len()));
        }
        if let Some(&bad) = refinement_edge.iter().find(|&&r| r > 2) {
            return Err(MeshError::BadRefinementEdge(bad));
        }
        // The refinement edge is a property of the vertex set, so keep it
        // attached to the same pair of vertices if orientation is flipped.
        let mut refinement_edge = refinement_edge;
        for (t, r) in triangles.iter().zip(refinement_edge.iter_mut()) {
            if t.iter().all(|&v| v < coords.len()) && signed_area(coords[t[0]], coords[t[1]], coords[t[2]]) < 0.0 {
                *r = match *r {
                    1 => 2,
                    2 => 1,
                    x => x,
                };
            }
        }
        let triangles = Self::validate(&coords, triangles)?;
        check_duplicates(&coords)?;
        Self::assemble(coords, triangles, refinement_edge, geometry)
    }

    fn validate(coords: &[Point], mut triangles: Vec<[usize; 3]>) -> Result<Vec<[usize; 3]>, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        let diam = bounding_diameter(coords);
        for (i, t) in triangles.iter_mut().enumerate() {
            for &v in t.iter() {
                if v >= coords.len() {
                    return Err(MeshError::VertexOutOfRange {
                        triangle: i,
                        vertex: v,
                        count: coords.len(),
                    });
                }
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(MeshError::RepeatedVertex(i));
            }
            let mut area = signed_area(coords[t[0]], coords[t[1]], coords[t[2]]);
            if area < 0.0 {
                t.swap(1, 2);
                area = -area;
            }
            if area <= 1e-14 * diam * diam {
                return Err(MeshError::DegenerateTriangle(i));
            }
        }
        Ok(triangles)
    }

    fn assemble(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        refinement_edge: Vec<u8>,
        geometry: Geometry,
    ) -> Result<Self, MeshError> {
        let mut count: HashMap<(usize, usize), u32> = HashMap::with_capacity(triangles.len() * 2);
        for t in &triangles {
            for k in 0..3 {
                let (a, b) = local_edge(t, k);
                *count.entry(edge_key(a, b)).or_insert(0) += 1;
            }
        }
        let mut boundary = vec![false; vertices.len()];
        for (&(a, b), &c) in &count {
            if c > 2 {
                return Err(MeshError::NonConforming(a, b));
            }
            if c == 1 {
                boundary[a] = true;
                boundary[b] = true;
            }
        }
        Ok(Self {
            vertices,
            triangles,
            boundary,
            refinement_edge,
            geometry,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn refinement_edges(&self) -> &[u8] {
        &self.refinement_edge
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| !self.boundary[v]).collect()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.area(t)).sum()
    }

    /// Diameter of triangle `t` (its longest edge).
    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        dist(a, b).max(dist(b, c)).max(dist(c, a))
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_degrees(&self) -> f64 {
        (0..self.num_triangles())
            .flat_map(|t| triangle_angles(self.triangle_points(t)))
            .fold(f64::INFINITY, f64::min)
            .to_degrees()
    }

    /// Verifies that every edge has one or two incident triangles, that all
    /// triangles are positively oriented, and that boundary flags match edge
    /// incidence.
    pub fn check_conformity(&self) -> Result<(), MeshError> {
        let rebuilt = Self::assemble(
            self.vertices.clone(),
            self.triangles.clone(),
            self.refinement_edge.clone(),
            self.geometry,
        )?;
        for t in 0..self.num_triangles() {
            if self.area(t) <= 0.0 {
                return Err(MeshError::DegenerateTriangle(t));
            }
        }
        if rebuilt.boundary != self.boundary {
            return Err(MeshError::NonConforming(0, 0));
        }
        // A hanging node leaves a coarse edge and its two halves all with a
        // single incident triangle; two such edges then leave a common vertex
        // in the same direction.
        let mut count: HashMap<(usize, usize), u32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = local_edge(t, k);
                *count.entry(edge_key(a, b)).or_insert(0) += 1;
            }
        }
        let mut star: HashMap<usize, Vec<usize>> = HashMap::new();
        for (&(a, b), &c) in &count {
            if c == 1 {
                star.entry(a).or_default().push(b);
                star.entry(b).or_default().push(a);
            }
        }
        for (&v, nbrs) in &star {
            let p = self.vertices[v];
            for (i, &a) in nbrs.iter().enumerate() {
                for &b in &nbrs[i + 1..] {
                    let (pa, pb) = (self.vertices[a], self.vertices[b]);
                    let u = [pa[0] - p[0], pa[1] - p[1]];
                    let w = [pb[0] - p[0], pb[1] - p[1]];
                    let cross = u[0] * w[1] - u[1] * w[0];
                    let dot = u[0] * w[0] + u[1] * w[1];
                    let scale = dist(p, pa) * dist(p, pb);
                    if dot > 0.0 && cross.abs() <= 1e-12 * scale {
                        return Err(MeshError::NonConforming(v.min(a), v.max(a)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Euler characteristic `V - E + F` (1 for a simply connected mesh).
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = HashSet::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = local_edge(t, k);
                edges.insert(edge_key(a, b));
            }
        }
        self.vertices.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }

    /// Triangles with at least one edge on the boundary.
    pub fn boundary_triangle_count(&self, edges: &EdgeSet) -> usize {
        edges
            .triangle_edges
            .iter()
            .filter(|e| e.iter().any(|r| matches!(r, EdgeRef::Boundary(_))))
            .count()
    }

    /// Newest-vertex bisection of the marked triangles plus conforming closure.
    pub fn bisect(&self, marked: &[usize]) -> Result<Mesh, MeshError> {
        Ok(self.bisect_with_parents(marked)?.0)
    }

    /// Like [`Mesh::bisect`], also returning for every new vertex (in index
    /// order, starting at the old vertex count) the endpoints of the edge it
    /// bisects. Old vertices keep their indices.
    pub fn bisect_with_parents(&self, marked: &[usize]) -> Result<(Mesh, Vec<[usize; 2]>), MeshError> {
        for &t in marked {
            if t >= self.triangles.len() {
                return Err(MeshError::TriangleOutOfRange(t));
            }
        }
        if marked.is_empty() {
            return Ok((self.clone(), Vec::new()));
        }

        let ref_edge_of = |t: usize| {
            let (a, b) = local_edge(&self.triangles[t], self.refinement_edge[t] as usize);
            edge_key(a, b)
        };

        let mut edge_tris: HashMap<(usize, usize), Vec<usize>> = HashMap::with_capacity(self.triangles.len() * 2);
        for (i, t) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = local_edge(t, k);
                edge_tris.entry(edge_key(a, b)).or_default().push(i);
            }
        }

        // Closure: any triangle with a marked edge must have its refinement
        // edge marked too.
        let mut marked_edges: HashSet<(usize, usize)> = HashSet::new();
        let mut queue: Vec<(usize, usize)> = Vec::new();
        for &t in marked {
            let e = ref_edge_of(t);
            if marked_edges.insert(e) {
                queue.push(e);
            }
        }
        let limit = 4 * edge_tris.len() + 16;
        let mut steps = 0usize;
        while let Some(e) = queue.pop() {
            steps += 1;
            if steps > limit {
                return Err(MeshError::ClosureDiverged(steps));
            }
            for &t in &edge_tris[&e] {
                let r = ref_edge_of(t);
                if marked_edges.insert(r) {
                    queue.push(r);
                }
            }
        }

        let mut vertices = self.vertices.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut parents: Vec<[usize; 2]> = Vec::with_capacity(marked_edges.len());
        let mut triangles = Vec::with_capacity(self.triangles.len() + 2 * marked_edges.len());
        let mut refinement_edge = Vec::with_capacity(triangles.capacity());

        for (i, tri) in self.triangles.iter().enumerate() {
            // Rotate so the refinement edge is opposite local vertex 0.
            let r = self.refinement_edge[i] as usize;
            let start = [tri[r], tri[(r + 1) % 3], tri[(r + 2) % 3]];
            let mut stack = vec![start];
            while let Some([v0, v1, v2]) = stack.pop() {
                let key = edge_key(v1, v2);
                if !marked_edges.contains(&key) {
                    triangles.push([v0, v1, v2]);
                    refinement_edge.push(0);
                    continue;
                }
                let m = *midpoint.entry(key).or_insert_with(|| {
                    let a = vertices[v1];
                    let b = vertices[v2];
                    let mut p = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                    let on_boundary = edge_tris[&key].len() == 1;
                    if on_boundary && self.geometry == Geometry::UnitCircle {
                        let r = p[0].hypot(p[1]);
                        p = [p[0] / r, p[1] / r];
                    }
                    vertices.push(p);
                    parents.push([key.0, key.1]);
                    vertices.len() - 1
                });
                // Children keep orientation; the new vertex goes first so the
                // edge opposite it (an old edge) is the child's refinement edge.
                // Push in reverse so the first child is emitted first.
                stack.push([m, v2, v0]);
                stack.push([m, v0, v1]);
            }
        }

        let mesh = Self::assemble(vertices, triangles, refinement_edge, self.geometry)?;
        Ok((mesh, parents))
    }

    /// Uniform refinement: every triangle bisected once (plus closure).
    pub fn refine_uniform(&self) -> Result<Mesh, MeshError> {
        let all: Vec<usize> = (0..self.num_triangles()).collect();
        self.bisect(&all)
    }
}

fn bounding_diameter(coords: &[Point]) -> f64 {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in coords {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    if coords.is_empty() {
        0.0
    } else {
        (hi[0] - lo[0]).hypot(hi[1] - lo[1])
    }
}

fn check_duplicates(coords: &[Point]) -> Result<(), MeshError> {
    let tol = 1e-12 * bounding_diameter(coords).max(f64::MIN_POSITIVE);
    let mut order: Vec<usize> = (0..coords.len()).collect();
    order.sort_by(|&a, &b| coords[a][0].total_cmp(&coords[b][0]).then(a.cmp(&b)));
    for (i, &a) in order.iter().enumerate() {
        for &b in &order[i + 1..] {
            if coords[b][0] - coords[a][0] > tol {
                break;
            }
            if dist(coords[a], coords[b]) <= tol {
                return Err(MeshError::DuplicateVertex(a.min(b), a.max(b)));
            }
        }
    }
    Ok(())
}

fn longest_edge(coords: &[Point], t: &[usize; 3]) -> u8 {
    let mut best = 0usize;
    let mut best_len = -1.0;
    for k in 0..3 {
        let (a, b) = local_edge(t, k);
        let len = dist(coords[a], coords[b]);
        let tie = (len - best_len).abs() <= 1e-12 * len.max(best_len);
        if (tie && t[k] < t[best]) || (!tie && len > best_len) {
            best = k;
            best_len = len;
        }
    }
    best as u8
}

pub(crate) fn triangle_angles(p: [Point; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..3 {
        let a = p[k];
        let b = p[(k + 1) % 3];
        let c = p[(k + 2) % 3];
        let u = [b[0] - a[0], b[1] - a[1]];
        let v = [c[0] - a[0], c[1] - a[1]];
        let cross = u[0] * v[1] - u[1] * v[0];
        let dot = u[0] * v[0] + u[1] * v[1];
        out[k] = cross.abs().atan2(dot);
    }
    out
}

/// Reference to an edge from a triangle's point of view.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeRef {
    Interior(usize),
    Boundary(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InteriorEdge {
    pub vertices: [usize; 2],
    /// `T_+`, the incident triangle with the smaller index.
    pub plus: usize,
    pub minus: usize,
    /// Unit normal pointing from `T_+` into `T_-`.
    pub normal: [f64; 2],
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryEdge {
    /// Endpoints in the counterclockwise order of the incident triangle, so
    /// the domain lies to the left of `vertices[0] -> vertices[1]`.
    pub vertices: [usize; 2],
    pub triangle: usize,
    /// Local edge index within `triangle`.
    pub local: usize,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeSet {
    pub interior: Vec<InteriorEdge>,
    pub boundary: Vec<BoundaryEdge>,
    /// Triangle diameters `h_T`.
    pub diameters: Vec<f64>,
    /// `triangle_edges[t][k]` is local edge `k` of triangle `t`.
    pub triangle_edges: Vec<[EdgeRef; 3]>,
}

impl EdgeSet {
    pub fn new(mesh: &Mesh) -> Self {
        let nt = mesh.num_triangles();
        let mut first: HashMap<(usize, usize), (usize, usize)> = HashMap::with_capacity(nt * 2);
        let mut pending: Vec<(usize, usize, usize)> = Vec::with_capacity(nt * 3);
        let mut interior = Vec::new();
        let mut triangle_edges = vec![[EdgeRef::Boundary(usize::MAX); 3]; nt];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = local_edge(tri, k);
                let key = edge_key(a, b);
                match first.get(&key) {
                    None => {
                        first.insert(key, (t, k));
                        pending.push((t, k, a));
                    }
                    Some(&(t0, k0)) => {
                        let id = interior.len();
                        let pa = mesh.vertices[a];
                        let pb = mesh.vertices[b];
                        let len = dist(pa, pb);
                        // Edge a->b is traversed counterclockwise by `t`, so
                        // its right-hand normal points out of `t`. `t0` has
                        // the smaller index and becomes T_+.
                        let out_of_t = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
                        let normal = [-out_of_t[0], -out_of_t[1]];
                        interior.push(InteriorEdge {
                            vertices: [key.0, key.1],
                            plus: t0,
                            minus: t,
                            normal,
                            length: len,
                        });
                        triangle_edges[t0][k0] = EdgeRef::Interior(id);
                        triangle_edges[t][k] = EdgeRef::Interior(id);
                    }
                }
            }
        }
        let mut boundary = Vec::new();
        for (t, k, _) in pending {
            if let EdgeRef::Interior(_) = triangle_edges[t][k] {
                continue;
            }
            let (a, b) = local_edge(&mesh.triangles[t], k);
            triangle_edges[t][k] = EdgeRef::Boundary(boundary.len());
            boundary.push(BoundaryEdge {
                vertices: [a, b],
                triangle: t,
                local: k,
                length: dist(mesh.vertices[a], mesh.vertices[b]),
            });
        }
        let diameters = (0..nt).map(|t| mesh.diameter(t)).collect();
        Self {
            interior,
            boundary,
            diameters,
            triangle_edges,
        }
    }

    /// Local index of the first boundary edge of triangle `t`, if any.
    pub fn boundary_local_edge(&self, t: usize) -> Option<(usize, usize)> {
        self.triangle_edges[t].iter().enumerate().find_map(|(k, r)| match r {
            EdgeRef::Boundary(id) => Some((k, *id)),
            EdgeRef::Interior(_) => None,
        })
    }

    pub fn is_boundary_triangle(&self, t: usize) -> bool {
        self.boundary_local_edge(t).is_some()
    }
}

/// Unit square split into four triangles through its center.
pub fn criss_cross_square() -> Mesh {
    Mesh::build(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]],
        vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]],
        Geometry::Polygonal,
    )
    .expect("criss-cross square is valid")
}

/// Unit square split along the diagonal from (0,0) to (1,1).
pub fn diagonal_square() -> Mesh {
    Mesh::build(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        vec![[0, 1, 2], [0, 2, 3]],
        Geometry::Polygonal,
    )
    .expect("diagonal square is valid")
}

/// Regular polygon with `n` vertices on the unit circle, fanned from the
/// origin. The origin is the newest vertex of every fan triangle, so the
/// boundary chords are the refinement edges.
pub fn disk_fan(n: usize) -> Mesh {
    let mut coords = vec![[0.0, 0.0]];
    for i in 0..n {
        let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        coords.push([a.cos(), a.sin()]);
    }
    let triangles = (0..n).map(|i| [0, 1 + i, 1 + (i + 1) % n]).collect();
    Mesh::with_refinement_edges(coords, triangles, vec![0; n], Geometry::UnitCircle).expect("disk fan is valid")
}

#[cfg(test)]
mod tests {
    #[test]
    fn bisection_parents_are_bisected_edges() {
        let m = disk_fan(8).refine_uniform().unwrap();
        let (fine, parents) = m.bisect_with_parents(&[0, 3, 7]).unwrap();
        assert_eq!(fine.num_vertices(), m.num_vertices() + parents.len());
        assert_eq!(&fine.vertices()[..m.num_vertices()], m.vertices());
        for (k, &[a, b]) in parents.iter().enumerate() {
            let p = fine.vertices()[m.num_vertices() + k];
            let (pa, pb) = (m.vertices()[a], m.vertices()[b]);
            let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
            if fine.is_boundary_vertex(m.num_vertices() + k) {
                assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-14);
            } else {
                assert!(dist(p, mid) < 1e-15);
            }
        }
        assert_eq!(fine, m.bisect(&[0, 3, 7]).unwrap());
    }

    use super::*;
    use approx::assert_relative_eq;

    fn count_incidence(mesh: &Mesh) -> HashMap<(usize, usize), usize> {
        let mut m = HashMap::new();
        for t in mesh.triangles() {
            for k in 0..3 {
                let (a, b) = local_edge(t, k);
                *m.entry(edge_key(a, b)).or_insert(0) += 1;
            }
        }
        m
    }

    /// Hanging-node check: no vertex may lie in the interior of any edge.
    fn assert_no_hanging_nodes(mesh: &Mesh) {
        let inc = count_incidence(mesh);
        let verts = mesh.vertices();
        for &(a, b) in inc.keys() {
            let (pa, pb) = (verts[a], verts[b]);
            let len = dist(pa, pb);
            for (v, p) in verts.iter().enumerate() {
                if v == a || v == b {
                    continue;
                }
                let on_line = signed_area(pa, pb, *p).abs() <= 1e-14 * len * len;
                let inside = dist(pa, *p) < len && dist(pb, *p) < len;
                assert!(!(on_line && inside), "hanging vertex {v} on edge ({a},{b})");
            }
        }
    }

    #[test]
    fn criss_cross_counts() {
        let m = criss_cross_square();
        let e = EdgeSet::new(&m);
        assert_eq!(m.interior_vertices(), vec![4]);
        assert_eq!(m.boundary_flags().iter().filter(|&&b| b).count(), 4);
        assert_eq!(e.interior.len(), 4);
        assert_eq!(e.boundary.len(), 4);
        for edge in &e.interior {
            assert_relative_eq!(edge.length, 0.5f64.sqrt(), epsilon = 1e-15);
        }
        assert_eq!(m.euler_characteristic(), 1);
    }

    #[test]
    fn diagonal_square_counts() {
        let m = diagonal_square();
        let e = EdgeSet::new(&m);
        assert_eq!(e.interior.len(), 1);
        assert_eq!(e.boundary.len(), 4);
        assert_relative_eq!(e.interior[0].length, 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(e.diameters[0], 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(e.diameters[1], 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn single_triangle_has_three_boundary_edges() {
        let m = Mesh::build(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            Geometry::Polygonal,
        )
        .unwrap();
        let e = EdgeSet::new(&m);
        assert!(e.interior.is_empty());
        assert_eq!(e.boundary.len(), 3);
    }

    #[test]
    fn out_of_range_vertex_is_rejected() {
        let err = Mesh::build(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 3]],
            Geometry::Polygonal,
        )
        .unwrap_err();
        assert!(matches!(err, MeshError::VertexOutOfRange { vertex: 3, .. }));
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let m = Mesh::build(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 2, 1]],
            Geometry::Polygonal,
        )
        .unwrap();
        assert!(m.area(0) > 0.0);
    }

    #[test]
    fn degenerate_and_nonconforming_inputs() {
        let err = Mesh::build(
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            vec![[0, 1, 2]],
            Geometry::Polygonal,
        )
        .unwrap_err();
        assert_eq!(err, MeshError::DegenerateTriangle(0));

        let err = Mesh::build(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [1.0, 1.0]],
            vec![[0, 1, 2], [0, 1, 3], [0, 1, 4]],
            Geometry::Polygonal,
        )
        .unwrap_err();
        assert!(matches!(err, MeshError::NonConforming(0, 1)));

        let err = Mesh::build(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1e-15]],
            vec![[0, 1, 2], [3, 2, 0]],
            Geometry::Polygonal,
        )
        .unwrap_err();
        assert_eq!(err, MeshError::DuplicateVertex(1, 3));
    }

    #[test]
    fn interior_normals_are_unit_and_point_into_minus() {
        let m = criss_cross_square();
        let e = EdgeSet::new(&m);
        for edge in &e.interior {
            let n = edge.normal;
            assert_relative_eq!(n[0].hypot(n[1]), 1.0, epsilon = 1e-15);
            let centroid = |t: usize| {
                let p = m.triangle_points(t);
                [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
            };
            let (cp, cm) = (centroid(edge.plus), centroid(edge.minus));
            let d = [cm[0] - cp[0], cm[1] - cp[1]];
            assert!(d[0] * n[0] + d[1] * n[1] > 0.0);
        }
    }

    #[test]
    fn bisect_diagonal_square_one_mark() {
        let m = diagonal_square();
        let r = m.bisect(&[0]).unwrap();
        assert_eq!(r.num_triangles(), 4);
        assert_eq!(r.num_vertices(), 5);
        assert_eq!(r.vertices()[4], [0.5, 0.5]);
        r.check_conformity().unwrap();
        assert_no_hanging_nodes(&r);
    }

    #[test]
    fn bisect_empty_mark_is_identity() {
        let m = criss_cross_square();
        assert_eq!(m.bisect(&[]).unwrap(), m);
    }

    #[test]
    fn bisect_criss_cross_all() {
        let m = criss_cross_square();
        let r = m.refine_uniform().unwrap();
        assert_eq!(r.num_triangles(), 8);
        assert_relative_eq!(r.min_angle_degrees(), 45.0, epsilon = 1e-10);
        assert_no_hanging_nodes(&r);
    }

    #[test]
    fn uniform_refinement_keeps_45_degrees() {
        let mut m = criss_cross_square();
        for _ in 0..10 {
            m = m.refine_uniform().unwrap();
            m.check_conformity().unwrap();
            assert_eq!(m.euler_characteristic(), 1);
            assert_relative_eq!(m.min_angle_degrees(), 45.0, epsilon = 1e-9);
        }
        assert_eq!(m.num_triangles(), 4 << 10);
    }

    #[test]
    fn circle_projection() {
        let mut m = disk_fan(16);
        for _ in 0..3 {
            m = m.refine_uniform().unwrap();
        }
        for (v, p) in m.vertices().iter().enumerate() {
            if m.is_boundary_vertex(v) {
                assert!((p[0].hypot(p[1]) - 1.0).abs() <= 1e-14);
            }
        }
        m.check_conformity().unwrap();
        assert_eq!(m.euler_characteristic(), 1);
    }

    #[test]
    fn longest_edge_initialisation() {
        let m = criss_cross_square();
        for (t, &r) in m.refinement_edges().iter().enumerate() {
            let tri = m.triangles()[t];
            assert_eq!(tri[r as usize], 4, "refinement edge must be opposite the center");
        }
    }

    #[test]
    fn boundary_triangle_shares_at_most_one_edge_on_fixtures() {
        let m = criss_cross_square().refine_uniform().unwrap();
        let e = EdgeSet::new(&m);
        for t in 0..m.num_triangles() {
            let n = e.triangle_edges[t]
                .iter()
                .filter(|r| matches!(r, EdgeRef::Boundary(_)))
                .count();
            assert!(n <= 1);
        }
        assert_eq!(m.boundary_triangle_count(&e), 8);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn random_bisection_stays_conforming(seeds in proptest::collection::vec(0usize..10_000, 1..6)) {
                let mut m = criss_cross_square();
                for s in seeds {
                    let n = m.num_triangles();
                    let marked: Vec<usize> = (0..n).filter(|t| (t * 7 + s) % 5 == 0).collect();
                    m = m.bisect(&marked).unwrap();
                    m.check_conformity().unwrap();
                    prop_assert_eq!(m.euler_characteristic(), 1);
                    prop_assert!((m.min_angle_degrees() - 45.0).abs() < 1e-9);
                    let inc = count_incidence(&m);
                    prop_assert!(inc.values().all(|&c| c == 1 || c == 2));
                }
                assert_no_hanging_nodes(&m);
            }
        }
    }
}
