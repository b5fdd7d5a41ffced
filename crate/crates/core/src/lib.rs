//! Adaptive P1 finite elements for the elliptic obstacle problem
//!
//! ```text
//! find u ≥ χ with u = g on ∂Ω:  (∇u, ∇(v - u)) ≥ (f, v - u)  for all v ≥ χ, v = g on ∂Ω
//! ```
//!
//! with inhomogeneous Dirichlet data, residual a posteriori estimators, and
//! the adaptive loop driven by Dörfler marking and newest-vertex bisection.
//!
//! ```
//! use obstacle_afem::prelude::*;
//!
//! let mesh = criss_cross_square();
//! let problem = ProblemData::new(Constant(-12.0), Constant(-0.5), Constant(0.0));
//! let sol = solve_obstacle(&problem, &mesh, &PdasParams::default()).unwrap();
//! assert_eq!(sol.u_h.values[4], -0.5);
//! ```

pub mod assembly;
pub mod driver;
pub mod error;
pub mod estimator;
pub mod io;
pub mod mesh;
pub mod multiplier;
mod par;
pub mod postprocess;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod space;

pub use error::{Error, MeshError, Result, SolveError};
pub use par::is_parallel;

pub mod prelude {
    pub use crate::assembly::{assemble_load, assemble_stiffness, element_stiffness, SparseOperator};
    pub use crate::driver::{
        adaptive_loop, adaptive_loop_with, disk_benchmark, disk_initial_mesh, disk_problem, disk_r0, doerfler_mark,
        exact_energy_error, AdaptHistory, AdaptParams, LevelRecord, LevelView,
    };
    pub use crate::error::{Error, MeshError, Result, SolveError};
    pub use crate::estimator::{total_estimator, EstimatorBreakdown, EstimatorConfig, EstimatorMode, EstimatorTotals};
    pub use crate::mesh::{criss_cross_square, diagonal_square, disk_fan, EdgeRef, EdgeSet, Geometry, Mesh, Point};
    pub use crate::multiplier::{classify_elements, compute_sigma_h, ElementClassification, ElementKind};
    pub use crate::postprocess::{eta_g, ExtensionFrame, FootPointData};
    pub use crate::problem::ProblemData;
    pub use crate::quadrature::{quadrature_rule, QuadratureRule};
    pub use crate::solver::{
        brute_force_obstacle, solve_obstacle, solve_spd, DiscreteProblem, DiscreteSolution, PdasParams,
    };
    pub use crate::space::{
        nodal_interpolate, Affine, Constant, FnField, NodalField, Quadratic, ScalarField, SharedField,
    };
}
