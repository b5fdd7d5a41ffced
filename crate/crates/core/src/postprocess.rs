//! Linear extension of the boundary data into boundary triangles.
//!
//! On a triangle `T` with boundary edge `e`, every point `z` lies on a
//! segment orthogonal to `e` whose endpoints `z1` (lower) and `z2` (upper)
//! are on `∂T`. The post-processed function `ũ_h` is linear along that
//! segment with end values `u*(z1)` and `u*(z2)`, where `u* = g` on boundary
//! edges and `u* = u_h` on the remaining edges.
//!
//! Local coordinates are `s` along the unit tangent `t` of `e` and `η` along
//! the inward normal `n`. Sorting the vertices by `s` splits `T` at the
//! middle vertex into two sub-triangles; on each of them the lower and upper
//! ends of the segments run along a single edge.

use crate::error::{Error, Result};
use crate::mesh::{signed_area, EdgeRef, EdgeSet, Mesh, Point};
use crate::par;
use crate::quadrature::{quadrature_rule, QuadratureRule};
use crate::space::{barycentric, directional_derivative, local_gradient, NodalField, ScalarField};

/// Default quadrature degree on each sub-triangle.
pub const DEFAULT_DEGREE: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FootPointData {
    /// Lower end of the orthogonal segment through `z`; on `e` whenever both
    /// angles at `e` are at most 90°.
    pub z1: Point,
    /// Upper end of the segment.
    pub z2: Point,
    /// `|z - z1|`.
    pub h1: f64,
    /// `|z - z2|`.
    pub h2: f64,
    /// 1 for the sub-triangle with smaller `s`, 2 for the other one.
    pub subtriangle: u8,
}

/// One end of an orthogonal segment.
#[derive(Clone, Copy, Debug)]
struct Hit {
    /// Local edge index (edge opposite local vertex `edge`).
    edge: usize,
    /// Edge endpoints as local vertex indices, ordered by increasing `s`.
    from: usize,
    to: usize,
    /// Position along `from -> to`.
    lambda: f64,
    point: Point,
    eta: f64,
    /// `dη/ds` along the edge.
    slope: f64,
}

/// Geometry of a boundary triangle in edge-aligned coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtensionFrame {
    triangle: usize,
    pts: [Point; 3],
    /// Whether local edge `k` lies on `∂Ω`.
    boundary: [bool; 3],
    edge: usize,
    origin: Point,
    t: [f64; 2],
    n: [f64; 2],
    s: [f64; 3],
    eta: [f64; 3],
    /// Local vertices sorted by `s`.
    order: [usize; 3],
    /// Whether the two-edge path through the middle vertex is the lower one.
    short_is_low: bool,
}

fn local_edge_between(a: usize, b: usize) -> usize {
    3 - a - b
}

impl ExtensionFrame {
    /// `pts` counterclockwise; `edge` is the local index of `e` (the edge
    /// opposite vertex `edge`); `boundary[k]` flags local edges on `∂Ω`.
    pub fn new(pts: [Point; 3], edge: usize, boundary: [bool; 3]) -> Result<Self> {
        Self::with_index(pts, edge, boundary, 0)
    }

    fn with_index(pts: [Point; 3], edge: usize, boundary: [bool; 3], triangle: usize) -> Result<Self> {
        if edge > 2 {
            return Err(Error::InvalidParameter(format!("local edge {edge} is not in 0..3")));
        }
        let a = pts[(edge + 1) % 3];
        let b = pts[(edge + 2) % 3];
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let area = signed_area(pts[0], pts[1], pts[2]);
        let scale = (0..3)
            .map(|k| {
                let p = pts[k];
                let q = pts[(k + 1) % 3];
                (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
            })
            .fold(0.0f64, f64::max);
        if !(area > 1e-14 * scale) || !(len > 0.0) {
            return Err(Error::Mesh(crate::error::MeshError::DegenerateTriangle(triangle)));
        }
        let t = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
        let n = [-t[1], t[0]];
        let mut s = [0.0; 3];
        let mut eta = [0.0; 3];
        for k in 0..3 {
            let d = [pts[k][0] - a[0], pts[k][1] - a[1]];
            s[k] = d[0] * t[0] + d[1] * t[1];
            eta[k] = d[0] * n[0] + d[1] * n[1];
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| s[i].total_cmp(&s[j]));
        let [v0, v1, v2] = order;
        let lam = if s[v2] > s[v0] {
            (s[v1] - s[v0]) / (s[v2] - s[v0])
        } else {
            0.0
        };
        let long_eta = eta[v0] + lam * (eta[v2] - eta[v0]);
        Ok(Self {
            triangle,
            pts,
            boundary,
            edge,
            origin: a,
            t,
            n,
            s,
            eta,
            order,
            short_is_low: eta[v1] < long_eta,
        })
    }

    /// Frame of mesh triangle `t` using its first boundary edge as `e`.
    pub fn from_mesh(mesh: &Mesh, edges: &EdgeSet, t: usize) -> Result<Self> {
        let (local, _) = edges.boundary_local_edge(t).ok_or(Error::NotBoundaryTriangle(t))?;
        let mut boundary = [false; 3];
        for (k, r) in edges.triangle_edges[t].iter().enumerate() {
            boundary[k] = matches!(r, EdgeRef::Boundary(_));
        }
        Self::with_index(mesh.triangle_points(t), local, boundary, t)
    }

    pub fn points(&self) -> &[Point; 3] {
        &self.pts
    }

    pub fn boundary_edge(&self) -> usize {
        self.edge
    }

    /// Unit tangent of `e` and inward unit normal.
    pub fn tangent_normal(&self) -> ([f64; 2], [f64; 2]) {
        (self.t, self.n)
    }

    fn coords(&self, z: Point) -> (f64, f64) {
        let d = [z[0] - self.origin[0], z[1] - self.origin[1]];
        (d[0] * self.t[0] + d[1] * self.t[1], d[0] * self.n[0] + d[1] * self.n[1])
    }

    fn hit(&self, a: usize, b: usize, s: f64) -> Hit {
        let (from, to) = if self.s[a] <= self.s[b] { (a, b) } else { (b, a) };
        let ds = self.s[to] - self.s[from];
        let (lambda, slope) = if ds > 0.0 {
            (
                ((s - self.s[from]) / ds).clamp(0.0, 1.0),
                (self.eta[to] - self.eta[from]) / ds,
            )
        } else {
            (0.0, 0.0)
        };
        let p = self.pts[from];
        let q = self.pts[to];
        Hit {
            edge: local_edge_between(a, b),
            from,
            to,
            lambda,
            point: [p[0] + lambda * (q[0] - p[0]), p[1] + lambda * (q[1] - p[1])],
            eta: self.eta[from] + lambda * (self.eta[to] - self.eta[from]),
            slope,
        }
    }

    fn subtriangle_of(&self, s: f64) -> u8 {
        let [v0, v1, _] = self.order;
        if s < self.s[v1] || (s == self.s[v1] && self.s[v1] > self.s[v0]) {
            1
        } else {
            2
        }
    }

    /// Lower and upper ends of the segment at abscissa `s` in sub-triangle `sub`.
    fn ends(&self, s: f64, sub: u8) -> (Hit, Hit) {
        let [v0, v1, v2] = self.order;
        let long = self.hit(v0, v2, s);
        let short = if sub == 1 {
            self.hit(v0, v1, s)
        } else {
            self.hit(v1, v2, s)
        };
        if self.short_is_low {
            (short, long)
        } else {
            (long, short)
        }
    }

    fn check_inside(&self, z: Point) -> Result<()> {
        let l = barycentric(&self.pts, z);
        if l.iter().any(|&v| v < -1e-12) {
            return Err(Error::OutsideTriangle {
                triangle: self.triangle,
                x: z[0],
                y: z[1],
            });
        }
        Ok(())
    }

    pub fn foot_points(&self, z: Point) -> Result<FootPointData> {
        self.check_inside(z)?;
        let (s, eta) = self.coords(z);
        let sub = self.subtriangle_of(s);
        let (lo, hi) = self.ends(s, sub);
        Ok(FootPointData {
            z1: lo.point,
            z2: hi.point,
            h1: (eta - lo.eta).max(0.0),
            h2: (hi.eta - eta).max(0.0),
            subtriangle: sub,
        })
    }

    /// The two sub-triangles separated by the segment through the middle
    /// vertex; degenerate ones are omitted.
    pub fn subtriangles(&self) -> Vec<(u8, [Point; 3])> {
        let [v0, v1, v2] = self.order;
        let split = self.hit(v0, v2, self.s[v1]).point;
        let mut out = Vec::with_capacity(2);
        for (sub, tri) in [
            (1u8, [self.pts[v0], self.pts[v1], split]),
            (2u8, [self.pts[v1], self.pts[v2], split]),
        ] {
            let a = signed_area(tri[0], tri[1], tri[2]).abs();
            if a > 1e-14 * signed_area(self.pts[0], self.pts[1], self.pts[2]).abs() {
                out.push((sub, tri));
            }
        }
        out
    }

    fn u_h_on(&self, u: &[f64; 3], h: &Hit) -> f64 {
        u[h.from] + h.lambda * (u[h.to] - u[h.from])
    }

    fn u_star(&self, u: &[f64; 3], g: &dyn ScalarField, h: &Hit) -> f64 {
        if self.boundary[h.edge] {
            g.value(h.point)
        } else {
            self.u_h_on(u, h)
        }
    }

    /// `u* - u_h` at a segment end and its derivative with respect to `s`.
    fn deviation_and_slope(&self, u: &[f64; 3], grad_u: [f64; 2], g: &dyn ScalarField, h: &Hit) -> (f64, f64, bool) {
        if !self.boundary[h.edge] {
            return (0.0, 0.0, false);
        }
        let p = self.pts[h.from];
        let q = self.pts[h.to];
        let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        let tau = [(q[0] - p[0]) / len, (q[1] - p[1]) / len];
        let (dg, fd) = directional_derivative(g, h.point, tau, len);
        let du = grad_u[0] * tau[0] + grad_u[1] * tau[1];
        let stretch = (1.0 + h.slope * h.slope).sqrt();
        (g.value(h.point) - self.u_h_on(u, h), stretch * (dg - du), fd)
    }

    /// `ũ_h(z)` from the local values `u` of `u_h` at the vertices.
    pub fn tilde_eval(&self, u: &[f64; 3], g: &dyn ScalarField, z: Point) -> Result<f64> {
        self.check_inside(z)?;
        // On ∂T the extension is the trace itself; boundary edges win at
        // shared vertices.
        let l = barycentric(&self.pts, z);
        let on_edge = |k: usize| l[k].abs() <= 1e-13;
        if (0..3).any(|k| on_edge(k) && self.boundary[k]) {
            return Ok(g.value(z));
        }
        if let Some(k) = (0..3).find(|&k| on_edge(k)) {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            return Ok((l[i] * u[i] + l[j] * u[j]) / (l[i] + l[j]));
        }
        let (s, eta) = self.coords(z);
        let (lo, hi) = self.ends(s, self.subtriangle_of(s));
        let h1 = (eta - lo.eta).max(0.0);
        let h2 = (hi.eta - eta).max(0.0);
        if h1 + h2 <= 0.0 {
            // Extreme vertex in `s`: both ends coincide.
            return Ok(if self.boundary[lo.edge] || self.boundary[hi.edge] {
                g.value(z)
            } else {
                self.u_h_on(u, &lo)
            });
        }
        Ok((h2 * self.u_star(u, g, &lo) + h1 * self.u_star(u, g, &hi)) / (h1 + h2))
    }

    /// `∇(ũ_h - u_h)(z)` for `z` strictly inside sub-triangle `sub`. The flag
    /// reports whether finite differences replaced a missing gradient of `g`.
    fn deviation_gradient_in(&self, u: &[f64; 3], g: &dyn ScalarField, z: Point, sub: u8) -> ([f64; 2], bool) {
        let grad_u = local_gradient(&self.pts, *u);
        let (s, eta) = self.coords(z);
        let (lo, hi) = self.ends(s, sub);
        let height = hi.eta - lo.eta;
        let (d_lo, dd_lo, f1) = self.deviation_and_slope(u, grad_u, g, &lo);
        let (d_hi, dd_hi, f2) = self.deviation_and_slope(u, grad_u, g, &hi);
        let w = (eta - lo.eta) / height;
        let jump = d_hi - d_lo;
        let d_eta = jump / height;
        let d_s = (1.0 - w) * dd_lo + w * dd_hi - jump * (lo.slope + w * (hi.slope - lo.slope)) / height;
        (
            [d_s * self.t[0] + d_eta * self.n[0], d_s * self.t[1] + d_eta * self.n[1]],
            f1 || f2,
        )
    }

    /// `∇(ũ_h - u_h)(z)` for `z` in the interior of `T` away from the split.
    pub fn deviation_gradient(&self, u: &[f64; 3], g: &dyn ScalarField, z: Point) -> Result<([f64; 2], bool)> {
        self.check_inside(z)?;
        let (s, _) = self.coords(z);
        Ok(self.deviation_gradient_in(u, g, z, self.subtriangle_of(s)))
    }

    /// `∫_T |∇(ũ_h - u_h)|²` by `rule` on each sub-triangle.
    pub fn tilde_grad_deviation_sq(&self, u: &[f64; 3], g: &dyn ScalarField, rule: &QuadratureRule) -> (f64, bool) {
        let mut total = 0.0;
        let mut fd = false;
        for (sub, tri) in self.subtriangles() {
            total += rule.integrate(&tri, |x| {
                let (d, f) = self.deviation_gradient_in(u, g, x, sub);
                fd |= f;
                d[0] * d[0] + d[1] * d[1]
            });
        }
        (total, fd)
    }
}

/// Result of [`eta_g`].
#[derive(Clone, Debug, PartialEq)]
pub struct EtaG {
    /// `‖∇(ũ_h - u_h)‖²_{L²(T)}` per triangle (zero off the boundary).
    pub per_triangle: Vec<f64>,
    pub total: f64,
    /// Finite differences were used for some derivative of `g`.
    pub used_finite_differences: bool,
}

/// `‖∇(u_h - ũ_h)‖` summed over all boundary triangles.
pub fn eta_g(u_h: &NodalField, g: &dyn ScalarField, mesh: &Mesh, edges: &EdgeSet, degree: usize) -> Result<EtaG> {
    u_h.check(mesh)?;
    let rule = quadrature_rule(degree)?;
    let parts = par::map_range(mesh.num_triangles(), |t| -> Result<(f64, bool)> {
        if !edges.is_boundary_triangle(t) {
            return Ok((0.0, false));
        }
        let frame = ExtensionFrame::from_mesh(mesh, edges, t)?;
        Ok(frame.tilde_grad_deviation_sq(&u_h.local(mesh, t), g, &rule))
    });
    let mut per_triangle = Vec::with_capacity(parts.len());
    let mut sum = 0.0;
    let mut fd = false;
    for p in parts {
        let (v, f) = p?;
        sum += v;
        fd |= f;
        per_triangle.push(v);
    }
    Ok(EtaG {
        per_triangle,
        total: sum.sqrt(),
        used_finite_differences: fd,
    })
}
