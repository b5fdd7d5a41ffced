//! Continuous P1 Lagrange functions on a [`Mesh`] and the data fields they
//! interpolate.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{signed_area, Mesh, Point};

/// A scalar function on the closed domain, optionally with its gradient.
pub trait ScalarField: Send + Sync {
    fn value(&self, p: Point) -> f64;

    fn gradient(&self, _p: Point) -> Option<[f64; 2]> {
        None
    }
}

pub type SharedField = Arc<dyn ScalarField>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constant(pub f64);

impl ScalarField for Constant {
    fn value(&self, _p: Point) -> f64 {
        self.0
    }
    fn gradient(&self, _p: Point) -> Option<[f64; 2]> {
        Some([0.0, 0.0])
    }
}

/// `c0 + cx x + cy y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub c0: f64,
    pub cx: f64,
    pub cy: f64,
}

impl ScalarField for Affine {
    fn value(&self, p: Point) -> f64 {
        self.c0 + self.cx * p[0] + self.cy * p[1]
    }
    fn gradient(&self, _p: Point) -> Option<[f64; 2]> {
        Some([self.cx, self.cy])
    }
}

/// `c0 + cx x + cy y + cxx x² + cxy xy + cyy y²`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Quadratic {
    pub c0: f64,
    pub cx: f64,
    pub cy: f64,
    pub cxx: f64,
    pub cxy: f64,
    pub cyy: f64,
}

impl ScalarField for Quadratic {
    fn value(&self, p: Point) -> f64 {
        let [x, y] = p;
        self.c0 + self.cx * x + self.cy * y + self.cxx * x * x + self.cxy * x * y + self.cyy * y * y
    }
    fn gradient(&self, p: Point) -> Option<[f64; 2]> {
        let [x, y] = p;
        Some([
            self.cx + 2.0 * self.cxx * x + self.cxy * y,
            self.cy + self.cxy * x + 2.0 * self.cyy * y,
        ])
    }
}

type ValueFn = dyn Fn(Point) -> f64 + Send + Sync;
type GradFn = dyn Fn(Point) -> [f64; 2] + Send + Sync;

/// A field given by closures.
pub struct FnField {
    value: Box<ValueFn>,
    gradient: Option<Box<GradFn>>,
}

impl FnField {
    pub fn new(value: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Box::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient(
        value: impl Fn(Point) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Box::new(value),
            gradient: Some(Box::new(gradient)),
        }
    }
}

impl ScalarField for FnField {
    fn value(&self, p: Point) -> f64 {
        (self.value)(p)
    }
    fn gradient(&self, p: Point) -> Option<[f64; 2]> {
        self.gradient.as_ref().map(|g| g(p))
    }
}

/// Derivative of `field` along the unit direction `tangent` at `p`.
///
/// Uses the analytic gradient when available, otherwise a central difference
/// with step `1e-6 * h`. The flag is `true` when differences were used.
pub fn directional_derivative(field: &dyn ScalarField, p: Point, tangent: [f64; 2], h: f64) -> (f64, bool) {
    match field.gradient(p) {
        Some(g) => (g[0] * tangent[0] + g[1] * tangent[1], false),
        None => {
            let d = 1e-6 * h;
            let fp = field.value([p[0] + d * tangent[0], p[1] + d * tangent[1]]);
            let fm = field.value([p[0] - d * tangent[0], p[1] - d * tangent[1]]);
            ((fp - fm) / (2.0 * d), true)
        }
    }
}

/// Nodal values of a P1 function, one per mesh vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalField {
    pub values: Vec<f64>,
}

impl NodalField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self::new(vec![0.0; mesh.num_vertices()])
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Self::new(vec![c; mesh.num_vertices()])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.values.len() != mesh.num_vertices() {
            return Err(Error::LengthMismatch {
                expected: mesh.num_vertices(),
                got: self.values.len(),
            });
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Values at the three vertices of triangle `t`.
    pub fn local(&self, mesh: &Mesh, t: usize) -> [f64; 3] {
        let [a, b, c] = mesh.triangles()[t];
        [self.values[a], self.values[b], self.values[c]]
    }
}

pub fn nodal_interpolate(field: &dyn ScalarField, mesh: &Mesh) -> NodalField {
    NodalField::new(mesh.vertices().iter().map(|&p| field.value(p)).collect())
}

/// Barycentric coordinates of `x` in the triangle `p`.
pub fn barycentric(p: &[Point; 3], x: Point) -> [f64; 3] {
    let area = signed_area(p[0], p[1], p[2]);
    let l0 = signed_area(x, p[1], p[2]) / area;
    let l1 = signed_area(p[0], x, p[2]) / area;
    [l0, l1, 1.0 - l0 - l1]
}

/// Gradients of the three barycentric (hat) functions on triangle `p`.
pub fn hat_gradients(p: &[Point; 3]) -> [[f64; 2]; 3] {
    let two_area = 2.0 * signed_area(p[0], p[1], p[2]);
    let mut g = [[0.0; 2]; 3];
    for k in 0..3 {
        let a = p[(k + 1) % 3];
        let b = p[(k + 2) % 3];
        g[k] = [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area];
    }
    g
}

/// Gradient of the P1 function with vertex values `v` on triangle `p`.
pub fn local_gradient(p: &[Point; 3], v: [f64; 3]) -> [f64; 2] {
    let g = hat_gradients(p);
    [
        v[0] * g[0][0] + v[1] * g[1][0] + v[2] * g[2][0],
        v[0] * g[0][1] + v[1] * g[1][1] + v[2] * g[2][1],
    ]
}

/// Value of `u` at `x` inside triangle `t` (barycentric tolerance `1e-12`).
pub fn eval_p1(u: &NodalField, mesh: &Mesh, t: usize, x: Point) -> Result<f64> {
    let p = mesh.triangle_points(t);
    let l = barycentric(&p, x);
    if l.iter().any(|&li| li < -1e-12) {
        return Err(Error::OutsideTriangle {
            triangle: t,
            x: x[0],
            y: x[1],
        });
    }
    let v = u.local(mesh, t);
    Ok(l[0] * v[0] + l[1] * v[1] + l[2] * v[2])
}

pub fn grad_p1(u: &NodalField, mesh: &Mesh, t: usize) -> [f64; 2] {
    local_gradient(&mesh.triangle_points(t), u.local(mesh, t))
}

/// Mass-lumped inner product `Σ_T |T|/3 Σ_{z∈T} w(z) v(z)`.
pub fn lumped_inner(mesh: &Mesh, w: &NodalField, v: &NodalField) -> Result<f64> {
    w.check(mesh)?;
    v.check(mesh)?;
    let mut acc = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let third = mesh.area(t) / 3.0;
        acc += third * tri.iter().map(|&z| w.values[z] * v.values[z]).sum::<f64>();
    }
    Ok(acc)
}

pub fn lumped_vertex_mass(mesh: &Mesh, vertex: usize) -> f64 {
    mesh.triangles()
        .iter()
        .enumerate()
        .filter(|(_, tri)| tri.contains(&vertex))
        .map(|(t, _)| mesh.area(t) / 3.0)
        .sum()
}

/// Diagonal of the lumped mass matrix for all vertices at once.
pub fn lumped_masses(mesh: &Mesh) -> Vec<f64> {
    let mut m = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let third = mesh.area(t) / 3.0;
        for &z in tri {
            m[z] += third;
        }
    }
    m
}

/// Consistent element mass matrix `|T|/12 (1 + δ_ij)`.
pub fn element_mass(p: &[Point; 3]) -> [[f64; 3]; 3] {
    let a = signed_area(p[0], p[1], p[2]) / 12.0;
    let mut m = [[a; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 2.0 * a;
    }
    m
}
