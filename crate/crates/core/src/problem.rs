use std::sync::Arc;

use crate::mesh::{EdgeSet, Geometry, Mesh, Point};
use crate::quadrature::line_rule;
use crate::space::{ScalarField, SharedField};

/// Data of an obstacle problem: load `f`, obstacle `χ`, Dirichlet data `g`,
/// and optionally the exact solution (with gradient) for error measurement.
#[derive(Clone)]
pub struct ProblemData {
    pub load: SharedField,
    pub obstacle: SharedField,
    pub dirichlet: SharedField,
    pub exact: Option<SharedField>,
    pub geometry: Geometry,
}

impl ProblemData {
    pub fn new(
        load: impl ScalarField + 'static,
        obstacle: impl ScalarField + 'static,
        dirichlet: impl ScalarField + 'static,
    ) -> Self {
        Self {
            load: Arc::new(load),
            obstacle: Arc::new(obstacle),
            dirichlet: Arc::new(dirichlet),
            exact: None,
            geometry: Geometry::Polygonal,
        }
    }

    pub fn with_exact(mut self, exact: impl ScalarField + 'static) -> Self {
        self.exact = Some(Arc::new(exact));
        self
    }

    pub fn with_geometry(mut self, geometry: Geometry) -> Self {
        self.geometry = geometry;
        self
    }

    /// Returns `χ - g` at the worst boundary sample, which must be `≤ 1e-12`
    /// for compatible data. Samples are the Gauss nodes and endpoints of
    /// every boundary edge.
    pub fn boundary_incompatibility(&self, mesh: &Mesh, edges: &EdgeSet) -> f64 {
        let (nodes, _) = line_rule(10);
        let verts = mesh.vertices();
        let mut worst = f64::NEG_INFINITY;
        for e in &edges.boundary {
            let a = verts[e.vertices[0]];
            let b = verts[e.vertices[1]];
            let samples = nodes.iter().copied().chain([0.0, 1.0]);
            for s in samples {
                let p: Point = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                worst = worst.max(self.obstacle.value(p) - self.dirichlet.value(p));
            }
        }
        worst
    }

    pub fn is_compatible(&self, mesh: &Mesh, edges: &EdgeSet) -> bool {
        self.boundary_incompatibility(mesh, edges) <= 1e-12
    }
}

impl std::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemData")
            .field("geometry", &self.geometry)
            .field("has_exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}
