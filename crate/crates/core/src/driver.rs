//! Adaptive SOLVE → ESTIMATE → MARK → REFINE loop and the unit-disk
//! benchmark with known exact solution.

use crate::error::{Error, Result};
use crate::estimator::{total_estimator, EstimatorBreakdown, EstimatorConfig, EstimatorTotals};
use crate::mesh::{disk_fan, EdgeSet, Geometry, Mesh, Point};
use crate::par;
use crate::problem::ProblemData;
use crate::quadrature::{quadrature_rule, QuadratureRule};
use crate::solver::{DiscreteProblem, DiscreteSolution, PdasParams, DEFAULT_LOAD_DEGREE};
use crate::space::{grad_p1, FnField, NodalField, ScalarField};

/// Dörfler marking: the smallest set whose squared indicators carry at
/// least `theta` of the total, chosen greedily by decreasing indicator with
/// ties going to the smaller index. Returned in increasing index order.
pub fn doerfler_mark(indicators: &[f64], theta: f64) -> Result<Vec<usize>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "theta must lie in (0, 1], got {theta}"
        )));
    }
    if let Some(i) = indicators.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "indicator {i} is {}, expected a finite non-negative value",
            indicators[i]
        )));
    }
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&a, &b| indicators[b].total_cmp(&indicators[a]).then(a.cmp(&b)));
    let total: f64 = order.iter().map(|&i| indicators[i] * indicators[i]).sum();
    if total == 0.0 {
        return Ok(Vec::new());
    }
    let mut marked = Vec::new();
    let mut acc = 0.0;
    for &i in &order {
        if acc >= theta * total || indicators[i] == 0.0 {
            break;
        }
        acc += indicators[i] * indicators[i];
        marked.push(i);
    }
    marked.sort_unstable();
    Ok(marked)
}

/// `‖∇(u - u_h)‖_{L²(Ω)}` with the gradient of `exact` evaluated at the
/// nodes of `rule`.
pub fn exact_energy_error(
    exact: &dyn ScalarField,
    u_h: &NodalField,
    mesh: &Mesh,
    rule: &QuadratureRule,
) -> Result<f64> {
    u_h.check(mesh)?;
    if exact.gradient(mesh.vertices()[0]).is_none() {
        return Err(Error::InvalidParameter("exact solution has no gradient".into()));
    }
    let parts = par::map_range(mesh.num_triangles(), |t| {
        let gh = grad_p1(u_h, mesh, t);
        rule.integrate(&mesh.triangle_points(t), |x| {
            let g = exact.gradient(x).unwrap_or([f64::NAN; 2]);
            (g[0] - gh[0]).powi(2) + (g[1] - gh[1]).powi(2)
        })
    });
    Ok(parts.iter().sum::<f64>().sqrt())
}

/// Default degree for [`exact_energy_error`].
pub const ERROR_DEGREE: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptParams {
    pub theta: f64,
    /// Stop once a level reaches this many degrees of freedom.
    pub max_dofs: usize,
    /// Stop once the estimator drops below this value.
    pub tolerance: f64,
    pub max_levels: usize,
    pub estimator: EstimatorConfig,
    pub pdas: PdasParams,
    pub load_degree: usize,
    pub error_degree: usize,
}

impl Default for AdaptParams {
    fn default() -> Self {
        Self {
            theta: 0.3,
            max_dofs: 50_000,
            tolerance: 1e-8,
            max_levels: 1000,
            estimator: EstimatorConfig::default(),
            pdas: PdasParams::default(),
            load_degree: DEFAULT_LOAD_DEGREE,
            error_degree: ERROR_DEGREE,
        }
    }
}

impl AdaptParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in (0, 1], got {}",
                self.theta
            )));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidParameter("tolerance must be non-negative".into()));
        }
        if self.max_levels == 0 {
            return Err(Error::InvalidParameter("max_levels must be positive".into()));
        }
        self.pdas.validate()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelRecord {
    pub level: usize,
    /// Number of mesh vertices.
    pub ndof: usize,
    pub triangles: usize,
    /// Energy error when the exact solution is known.
    pub error: Option<f64>,
    pub estimator: EstimatorTotals,
    /// Estimator divided by error.
    pub efficiency: Option<f64>,
    pub marked: usize,
    pub min_angle: f64,
    pub pdas_iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptHistory {
    pub levels: Vec<LevelRecord>,
}

/// What the observer of [`adaptive_loop`] sees at each level.
pub struct LevelView<'a> {
    pub level: usize,
    pub mesh: &'a Mesh,
    pub edges: &'a EdgeSet,
    pub solution: &'a DiscreteSolution,
    pub estimate: &'a EstimatorBreakdown,
    /// Empty at the final level.
    pub marked: &'a [usize],
}

pub fn adaptive_loop(problem: &ProblemData, initial: Mesh, params: &AdaptParams) -> Result<AdaptHistory> {
    adaptive_loop_with(problem, initial, params, |_| {})
}

/// Adaptive loop calling `observer` once per level after marking.
pub fn adaptive_loop_with<F>(
    problem: &ProblemData,
    initial: Mesh,
    params: &AdaptParams,
    mut observer: F,
) -> Result<AdaptHistory>
where
    F: FnMut(&LevelView<'_>),
{
    params.validate()?;
    let error_rule = quadrature_rule(params.error_degree)?;
    let mut mesh = initial;
    let mut levels: Vec<LevelRecord> = Vec::new();
    // Previous active set and iterate prolonged to the current mesh.
    let mut warm: Option<(Vec<usize>, Vec<f64>)> = None;
    for level in 0..params.max_levels {
        let discrete = DiscreteProblem::new(problem, &mesh, params.load_degree)?;
        let solution = match &warm {
            Some((active, guess)) => discrete.solve_from(&params.pdas, active, Some(guess)),
            None => discrete.solve(&params.pdas),
        }
        .map_err(|source| Error::Level { level, source })?;
        let edges = EdgeSet::new(&mesh);
        let estimate = total_estimator(problem, &mesh, &edges, &discrete, &solution.u_h, &params.estimator)?;
        let error = match &problem.exact {
            Some(u) => Some(exact_energy_error(u.as_ref(), &solution.u_h, &mesh, &error_rule)?),
            None => None,
        };
        let total = estimate.totals.total;
        let done = mesh.num_vertices() >= params.max_dofs || total < params.tolerance || level + 1 == params.max_levels;
        let marked = if done {
            Vec::new()
        } else {
            doerfler_mark(&estimate.indicators(), params.theta)?
        };
        levels.push(LevelRecord {
            level,
            ndof: mesh.num_vertices(),
            triangles: mesh.num_triangles(),
            error,
            estimator: estimate.totals,
            efficiency: error.filter(|&e| e > 0.0).map(|e| total / e),
            marked: marked.len(),
            min_angle: mesh.min_angle_degrees(),
            pdas_iterations: solution.iterations,
        });
        observer(&LevelView {
            level,
            mesh: &mesh,
            edges: &edges,
            solution: &solution,
            estimate: &estimate,
            marked: &marked,
        });
        if done || marked.is_empty() {
            break;
        }
        let (next, parents) = mesh.bisect_with_parents(&marked)?;
        let old = &solution.u_h.values;
        let guess: Vec<f64> = old
            .iter()
            .copied()
            .chain(parents.iter().map(|&[a, b]| 0.5 * (old[a] + old[b])))
            .collect();
        warm = Some((solution.active_set.clone(), guess));
        mesh = next;
    }
    Ok(AdaptHistory { levels })
}

/// Radius of the free boundary in the disk benchmark, `(√2 - 1)/√2`.
pub fn disk_r0() -> f64 {
    (2f64.sqrt() - 1.0) / 2f64.sqrt()
}

fn radius(p: Point) -> f64 {
    p[0].hypot(p[1])
}

/// Obstacle `1 - 2r²`.
pub fn disk_obstacle() -> FnField {
    FnField::with_gradient(
        |p| 1.0 - 2.0 * (p[0] * p[0] + p[1] * p[1]),
        |p| [-4.0 * p[0], -4.0 * p[1]],
    )
}

/// Load `0` inside `r0` and `4 r0 / r` outside.
pub fn disk_load() -> FnField {
    let r0 = disk_r0();
    FnField::new(move |p| {
        let r = radius(p);
        if r < r0 {
            0.0
        } else {
            4.0 * r0 / r
        }
    })
}

/// Exact solution `1 - 2r²` inside `r0` and `4 r0 (1 - r)` outside.
pub fn disk_exact() -> FnField {
    let r0 = disk_r0();
    FnField::with_gradient(
        move |p| {
            let r = radius(p);
            if r < r0 {
                1.0 - 2.0 * r * r
            } else {
                4.0 * r0 * (1.0 - r)
            }
        },
        move |p| {
            let r = radius(p);
            if r < r0 {
                [-4.0 * p[0], -4.0 * p[1]]
            } else {
                [-4.0 * r0 * p[0] / r, -4.0 * r0 * p[1] / r]
            }
        },
    )
}

/// The disk benchmark data; the Dirichlet data is the exact solution.
pub fn disk_problem() -> ProblemData {
    ProblemData::new(disk_load(), disk_obstacle(), disk_exact())
        .with_exact(disk_exact())
        .with_geometry(Geometry::UnitCircle)
}

/// Inscribed 16-gon fanned from the center, refined once uniformly.
pub fn disk_initial_mesh() -> Result<Mesh> {
    Ok(disk_fan(16).refine_uniform()?)
}

pub fn disk_benchmark(params: &AdaptParams) -> Result<AdaptHistory> {
    adaptive_loop(&disk_problem(), disk_initial_mesh()?, params)
}
