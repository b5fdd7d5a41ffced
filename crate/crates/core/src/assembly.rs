//! Stiffness matrix and load vector for P1 elements.

use crate::error::{Error, MeshError, Result};
use crate::mesh::{signed_area, Mesh, Point};
use crate::par;
use crate::quadrature::QuadratureRule;
use crate::space::{hat_gradients, NodalField, ScalarField};

/// Symmetric sparse matrix in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseOperator {
    /// Compresses `(row, col, value)` triplets, summing duplicates in the
    /// order they were given.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        // Stable sort keeps the original accumulation order within an entry.
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len() / 2);
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len() / 2);
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.vals[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).map(|(j, v)| v * x[j]).sum()
    }

    /// `y = A x`. Rows are independent, so this is bit-identical with or
    /// without parallel workers.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        par::fill_indexed(y, |i| self.row_dot(i, x));
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.apply(x, &mut y);
        y
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }
}

/// Element stiffness `∫_T ∇ψ_i·∇ψ_j` from constant hat gradients.
pub fn element_stiffness(p: &[Point; 3]) -> [[f64; 3]; 3] {
    let area = signed_area(p[0], p[1], p[2]);
    let g = hat_gradients(p);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    // Force exact symmetry and zero row sums against round-off.
    for i in 0..3 {
        for j in 0..i {
            k[j][i] = k[i][j];
        }
    }
    for i in 0..3 {
        let off: f64 = (0..3).filter(|&j| j != i).map(|j| k[i][j]).sum();
        k[i][i] = -off;
    }
    k
}

pub fn assemble_stiffness(mesh: &Mesh) -> Result<SparseOperator> {
    for t in 0..mesh.num_triangles() {
        if mesh.area(t) <= 0.0 {
            return Err(Error::Mesh(MeshError::DegenerateTriangle(t)));
        }
    }
    let locals = par::map_range(mesh.num_triangles(), |t| element_stiffness(&mesh.triangle_points(t)));
    let mut triplets = Vec::with_capacity(9 * locals.len());
    for (tri, k) in mesh.triangles().iter().zip(&locals) {
        for a in 0..3 {
            for b in 0..3 {
                triplets.push((tri[a], tri[b], k[a][b]));
            }
        }
    }
    Ok(SparseOperator::from_triplets(mesh.num_vertices(), triplets))
}

/// Load vector `(f, ψ_z)` by element quadrature.
pub fn assemble_load(f: &dyn ScalarField, mesh: &Mesh, rule: &QuadratureRule) -> NodalField {
    let locals = par::map_range(mesh.num_triangles(), |t| {
        let p = mesh.triangle_points(t);
        let area = mesh.area(t);
        let mut out = [0.0; 3];
        for (b, (x, w)) in rule.points.iter().zip(rule.map_points(&p)) {
            let fx = f.value(x) * w * area;
            for k in 0..3 {
                out[k] += fx * b[k];
            }
        }
        out
    });
    let mut load = vec![0.0; mesh.num_vertices()];
    for (tri, l) in mesh.triangles().iter().zip(&locals) {
        for k in 0..3 {
            load[tri[k]] += l[k];
        }
    }
    NodalField::new(load)
}
