//! Residual error indicators, data oscillations, and their aggregation.
//!
//! Per-entity quantities are stored squared; totals are square roots of
//! their sums.

use crate::error::{Error, Result};
use crate::mesh::{EdgeRef, EdgeSet, Mesh, Point};
use crate::multiplier::{
    classify_elements, compute_sigma_h, default_contact_tolerance, ElementClassification, ElementKind,
};
use crate::par;
use crate::postprocess::{self, ExtensionFrame};
use crate::problem::ProblemData;
use crate::quadrature::{line_rule, quadrature_rule, QuadratureRule};
use crate::solver::DiscreteProblem;
use crate::space::{barycentric, directional_derivative, grad_p1, NodalField, ScalarField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EstimatorMode {
    /// Residual terms plus obstacle and boundary-data oscillations only.
    #[default]
    Simplified,
    /// Residual terms plus the post-processing term, the positive-part,
    /// contact and free-boundary terms, and boundary-data oscillation.
    General,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub mode: EstimatorMode,
    /// Degree for `η_f` and the general-mode area terms.
    pub area_degree: usize,
    /// Degree for `‖∇(χ - χ_h)‖²`.
    pub obstacle_degree: usize,
    /// Degree of the 1D rule for edge oscillations.
    pub edge_degree: usize,
    /// Degree on each sub-triangle of the linear extension.
    pub postprocess_degree: usize,
    /// Contact tolerance; `None` uses `1e-10 (1 + ‖u_h‖_∞)`.
    pub contact_tolerance: Option<f64>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            mode: EstimatorMode::Simplified,
            area_degree: 4,
            obstacle_degree: 5,
            edge_degree: 10,
            postprocess_degree: postprocess::DEFAULT_DEGREE,
            contact_tolerance: None,
        }
    }
}

impl EstimatorConfig {
    pub fn with_mode(mode: EstimatorMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    /// Same configuration with every quadrature degree doubled.
    pub fn doubled(&self) -> Self {
        Self {
            area_degree: 2 * self.area_degree,
            obstacle_degree: 2 * self.obstacle_degree,
            edge_degree: 2 * self.edge_degree,
            postprocess_degree: 2 * self.postprocess_degree,
            ..*self
        }
    }
}

/// `h_T ‖f - σ_h‖_{L²(T)}`.
pub fn eta_f_t(f: &dyn ScalarField, sigma_h: &NodalField, mesh: &Mesh, t: usize, rule: &QuadratureRule) -> f64 {
    let p = mesh.triangle_points(t);
    let s = sigma_h.local(mesh, t);
    let mut acc = 0.0;
    for (b, (x, w)) in rule.points.iter().zip(rule.map_points(&p)) {
        let sig = b[0] * s[0] + b[1] * s[1] + b[2] * s[2];
        acc += w * (f.value(x) - sig).powi(2);
    }
    mesh.diameter(t) * (acc * mesh.area(t)).sqrt()
}

/// Normal jump `[∇v]` of a P1 function across interior edge `id`.
pub fn normal_jump(v: &NodalField, mesh: &Mesh, edges: &EdgeSet, id: usize) -> f64 {
    let e = &edges.interior[id];
    let gp = grad_p1(v, mesh, e.plus);
    let gm = grad_p1(v, mesh, e.minus);
    (gp[0] - gm[0]) * e.normal[0] + (gp[1] - gm[1]) * e.normal[1]
}

/// `h_e^{1/2} ‖[∇u_h]‖_{L²(e)}`; the jump is constant, so this is `h_e |[∇u_h]|`.
pub fn eta_jump_e(u_h: &NodalField, mesh: &Mesh, edges: &EdgeSet, edge: EdgeRef) -> Result<f64> {
    match edge {
        EdgeRef::Boundary(id) => Err(Error::NotInteriorEdge(id)),
        EdgeRef::Interior(id) => {
            let h = edges.interior[id].length;
            Ok(h * normal_jump(u_h, mesh, edges, id).abs())
        }
    }
}

/// `h_T² ‖∇σ_h‖_{L²(T)}`.
pub fn eta_sigma_t(sigma_h: &NodalField, mesh: &Mesh, t: usize) -> f64 {
    let g = grad_p1(sigma_h, mesh, t);
    let h = mesh.diameter(t);
    h * h * (g[0] * g[0] + g[1] * g[1]).sqrt() * mesh.area(t).sqrt()
}

/// `h_e ‖(v - v_h)'‖²_{L²(e)}` on the segment `a -> b`, where `v_h` is the
/// linear interpolant of `v` between the endpoints. The flag reports
/// whether finite differences were needed.
pub fn edge_oscillation(v: &dyn ScalarField, a: Point, b: Point, degree: usize) -> (f64, bool) {
    let h = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let tau = [(b[0] - a[0]) / h, (b[1] - a[1]) / h];
    let slope = (v.value(b) - v.value(a)) / h;
    let (nodes, weights) = line_rule(degree);
    let mut acc = 0.0;
    let mut fd = false;
    for (s, w) in nodes.iter().zip(&weights) {
        let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
        let (d, f) = directional_derivative(v, p, tau, h);
        fd |= f;
        acc += w * (d - slope).powi(2);
    }
    (h * h * acc, fd)
}

/// Boundary-data oscillation `h_e ‖(g - g_h)'‖²_{L²(e)}` on boundary edge `id`.
pub fn boundary_osc_g(g: &dyn ScalarField, mesh: &Mesh, edges: &EdgeSet, id: usize, degree: usize) -> (f64, bool) {
    let e = &edges.boundary[id];
    let v = mesh.vertices();
    edge_oscillation(g, v[e.vertices[0]], v[e.vertices[1]], degree)
}

fn field_gradient(v: &dyn ScalarField, p: Point, h: f64) -> ([f64; 2], bool) {
    match v.gradient(p) {
        Some(g) => (g, false),
        None => {
            let (dx, _) = directional_derivative(v, p, [1.0, 0.0], h);
            let (dy, _) = directional_derivative(v, p, [0.0, 1.0], h);
            ([dx, dy], true)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObstacleOscillation {
    /// `‖∇(χ - χ_h)‖²_{L²(T)}` per triangle.
    pub gradient: Vec<f64>,
    /// `h_e ‖(χ - χ_h)'‖²_{L²(e)}` per boundary edge.
    pub edge: Vec<f64>,
    pub used_finite_differences: bool,
}

pub fn obstacle_osc(
    chi: &dyn ScalarField,
    chi_h: &NodalField,
    mesh: &Mesh,
    edges: &EdgeSet,
    area_degree: usize,
    edge_degree: usize,
) -> Result<ObstacleOscillation> {
    chi_h.check(mesh)?;
    let rule = quadrature_rule(area_degree)?;
    let grads = par::map_range(mesh.num_triangles(), |t| {
        let p = mesh.triangle_points(t);
        let gh = grad_p1(chi_h, mesh, t);
        let h = mesh.diameter(t);
        let mut fd = false;
        let v = rule.integrate(&p, |x| {
            let (g, f) = field_gradient(chi, x, h);
            fd |= f;
            (g[0] - gh[0]).powi(2) + (g[1] - gh[1]).powi(2)
        });
        (v, fd)
    });
    let edge_terms = par::map_range(edges.boundary.len(), |i| {
        boundary_osc_g(chi, mesh, edges, i, edge_degree)
    });
    let used_finite_differences = grads.iter().chain(&edge_terms).any(|&(_, f)| f);
    Ok(ObstacleOscillation {
        gradient: grads.into_iter().map(|(v, _)| v).collect(),
        edge: edge_terms.into_iter().map(|(v, _)| v).collect(),
        used_finite_differences,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralExtras {
    /// `‖∇(χ - ũ_h)^+‖²_{L²(T)}` per triangle.
    pub positive_part: Vec<f64>,
    /// `∫_T (-σ_h)(χ - χ_h)^-` per triangle, zero outside contact and
    /// free-boundary elements.
    pub contact: Vec<f64>,
    /// `h_e ∫_e [∇(u_h - χ_h)]²` per interior edge, zero off the
    /// free-boundary edge set.
    pub free_boundary_jump: Vec<f64>,
    pub used_finite_differences: bool,
}

/// The positive-part, contact, and free-boundary jump terms.
#[allow(clippy::too_many_arguments)]
pub fn general_extras(
    u_h: &NodalField,
    g: &dyn ScalarField,
    sigma_h: &NodalField,
    chi: &dyn ScalarField,
    chi_h: &NodalField,
    classes: &ElementClassification,
    mesh: &Mesh,
    edges: &EdgeSet,
    config: &EstimatorConfig,
) -> Result<GeneralExtras> {
    let area_rule = quadrature_rule(config.area_degree)?;
    let pp_rule = quadrature_rule(config.postprocess_degree)?;
    let positive = par::map_range(mesh.num_triangles(), |t| -> Result<(f64, bool)> {
        let p = mesh.triangle_points(t);
        let grad_u = grad_p1(u_h, mesh, t);
        let u = u_h.local(mesh, t);
        let h = mesh.diameter(t);
        let mut fd = false;
        if !edges.is_boundary_triangle(t) {
            let v = area_rule.integrate(&p, |x| {
                let l = barycentric(&p, x);
                let ux = l[0] * u[0] + l[1] * u[1] + l[2] * u[2];
                if chi.value(x) - ux > 0.0 {
                    let (gc, f) = field_gradient(chi, x, h);
                    fd |= f;
                    (gc[0] - grad_u[0]).powi(2) + (gc[1] - grad_u[1]).powi(2)
                } else {
                    0.0
                }
            });
            return Ok((v, fd));
        }
        let frame = ExtensionFrame::from_mesh(mesh, edges, t)?;
        let mut acc = 0.0;
        for (_, sub) in frame.subtriangles() {
            let mut err = None;
            acc += pp_rule.integrate(&sub, |x| {
                let tilde = match frame.tilde_eval(&u, g, x) {
                    Ok(v) => v,
                    Err(e) => {
                        err = Some(e);
                        return 0.0;
                    }
                };
                if chi.value(x) - tilde <= 0.0 {
                    return 0.0;
                }
                let (d, f1) = frame.deviation_gradient(&u, g, x).unwrap_or(([0.0; 2], false));
                let (gc, f2) = field_gradient(chi, x, h);
                fd |= f1 || f2;
                (gc[0] - grad_u[0] - d[0]).powi(2) + (gc[1] - grad_u[1] - d[1]).powi(2)
            });
            if let Some(e) = err {
                return Err(e);
            }
        }
        Ok((acc, fd))
    });
    let contact = par::map_range(mesh.num_triangles(), |t| {
        if classes.kinds[t] == ElementKind::NonContact {
            return 0.0;
        }
        let p = mesh.triangle_points(t);
        let s = sigma_h.local(mesh, t);
        let c = chi_h.local(mesh, t);
        area_rule.integrate(&p, |x| {
            let l = barycentric(&p, x);
            let sig = l[0] * s[0] + l[1] * s[1] + l[2] * s[2];
            let ch = l[0] * c[0] + l[1] * c[1] + l[2] * c[2];
            -sig * (ch - chi.value(x)).max(0.0)
        })
    });
    let mut on_fb = vec![false; edges.interior.len()];
    for &e in &classes.free_boundary_edges {
        on_fb[e] = true;
    }
    let diff = NodalField::new(u_h.values.iter().zip(&chi_h.values).map(|(u, c)| u - c).collect());
    let free_boundary_jump = (0..edges.interior.len())
        .map(|i| {
            if on_fb[i] {
                let h = edges.interior[i].length;
                h * h * normal_jump(&diff, mesh, edges, i).powi(2)
            } else {
                0.0
            }
        })
        .collect();
    let mut positive_part = Vec::with_capacity(positive.len());
    let mut fd = false;
    for r in positive {
        let (v, f) = r?;
        fd |= f;
        positive_part.push(v);
    }
    Ok(GeneralExtras {
        positive_part,
        contact,
        free_boundary_jump,
        used_finite_differences: fd,
    })
}

/// For every boundary triangle, whether `max_T χ ≤ min_{∂T} u*` holds
/// (within `1e-12`), with `χ` sampled at quadrature nodes and vertices and
/// `u*` at Gauss nodes and endpoints of the three edges.
pub fn check_cor45_hypothesis(
    u_h: &NodalField,
    g: &dyn ScalarField,
    chi: &dyn ScalarField,
    mesh: &Mesh,
    edges: &EdgeSet,
) -> Result<Vec<(usize, bool)>> {
    u_h.check(mesh)?;
    let rule = quadrature_rule(5)?;
    let (nodes, _) = line_rule(10);
    let mut out = Vec::new();
    for t in 0..mesh.num_triangles() {
        if !edges.is_boundary_triangle(t) {
            continue;
        }
        let p = mesh.triangle_points(t);
        let u = u_h.local(mesh, t);
        let max_chi = rule
            .map_points(&p)
            .map(|(x, _)| x)
            .chain(p.iter().copied())
            .map(|x| chi.value(x))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut min_star = f64::INFINITY;
        for (k, r) in edges.triangle_edges[t].iter().enumerate() {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            for s in nodes.iter().copied().chain([0.0, 1.0]) {
                let x = [p[i][0] + s * (p[j][0] - p[i][0]), p[i][1] + s * (p[j][1] - p[i][1])];
                let v = match r {
                    EdgeRef::Boundary(_) => g.value(x),
                    EdgeRef::Interior(_) => u[i] + s * (u[j] - u[i]),
                };
                min_star = min_star.min(v);
            }
        }
        out.push((t, max_chi <= min_star + 1e-12));
    }
    Ok(out)
}

/// Square roots of the summed parts.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct EstimatorTotals {
    pub eta_f: f64,
    pub eta_jump: f64,
    pub eta_sigma: f64,
    pub osc_g: f64,
    pub osc_chi_grad: f64,
    pub osc_chi_edge: f64,
    pub eta_g: f64,
    pub positive_part: f64,
    pub contact: f64,
    pub free_boundary_jump: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorBreakdown {
    pub mode: EstimatorMode,
    /// `η_{f,T}²` per triangle.
    pub eta_f_sq: Vec<f64>,
    /// `η_{σ,T}²` per triangle.
    pub eta_sigma_sq: Vec<f64>,
    /// `η_{u_h,e}²` per interior edge.
    pub eta_jump_sq: Vec<f64>,
    /// `h_e ‖(g - g_h)'‖²` per boundary edge.
    pub osc_g_sq: Vec<f64>,
    /// `‖∇(χ - χ_h)‖²_T` per triangle.
    pub osc_chi_grad_sq: Vec<f64>,
    /// `h_e ‖(χ - χ_h)'‖²` per boundary edge.
    pub osc_chi_edge_sq: Vec<f64>,
    /// General mode only: `‖∇(ũ_h - u_h)‖²_T` and the extra terms.
    pub eta_g_sq: Option<Vec<f64>>,
    pub extras: Option<GeneralExtras>,
    pub sigma_h: NodalField,
    pub classification: ElementClassification,
    /// Squared marking indicator per triangle.
    pub indicator_sq: Vec<f64>,
    pub totals: EstimatorTotals,
    pub used_finite_differences: bool,
}

impl EstimatorBreakdown {
    /// Marking indicators `η_T`.
    pub fn indicators(&self) -> Vec<f64> {
        self.indicator_sq.iter().map(|v| v.max(0.0).sqrt()).collect()
    }
}

fn sum(v: &[f64]) -> f64 {
    v.iter().sum()
}

/// Computes every indicator for the discrete solution `u_h` and aggregates
/// them according to `config.mode`.
pub fn total_estimator(
    problem: &ProblemData,
    mesh: &Mesh,
    edges: &EdgeSet,
    discrete: &DiscreteProblem,
    u_h: &NodalField,
    config: &EstimatorConfig,
) -> Result<EstimatorBreakdown> {
    u_h.check(mesh)?;
    let f = problem.load.as_ref();
    let g = problem.dirichlet.as_ref();
    let chi = problem.obstacle.as_ref();
    let sigma_h = compute_sigma_h(u_h, &discrete.load, &discrete.stiffness, mesh)?;
    let tol = config
        .contact_tolerance
        .unwrap_or_else(|| default_contact_tolerance(u_h));
    let classification = classify_elements(u_h, &discrete.chi_h, mesh, edges, tol)?;

    let area_rule = quadrature_rule(config.area_degree)?;
    let eta_f_sq = par::map_range(mesh.num_triangles(), |t| {
        eta_f_t(f, &sigma_h, mesh, t, &area_rule).powi(2)
    });
    let eta_sigma_sq = par::map_range(mesh.num_triangles(), |t| eta_sigma_t(&sigma_h, mesh, t).powi(2));
    let eta_jump_sq = par::map_range(edges.interior.len(), |i| {
        let h = edges.interior[i].length;
        h * h * normal_jump(u_h, mesh, edges, i).powi(2)
    });
    let osc_g = par::map_range(edges.boundary.len(), |i| {
        boundary_osc_g(g, mesh, edges, i, config.edge_degree)
    });
    let mut used_fd = osc_g.iter().any(|&(_, f)| f);
    let osc_g_sq: Vec<f64> = osc_g.into_iter().map(|(v, _)| v).collect();
    let obstacle = obstacle_osc(
        chi,
        &discrete.chi_h,
        mesh,
        edges,
        config.obstacle_degree,
        config.edge_degree,
    )?;
    used_fd |= obstacle.used_finite_differences;

    let (eta_g_sq, extras) = match config.mode {
        EstimatorMode::Simplified => (None, None),
        EstimatorMode::General => {
            let eg = postprocess::eta_g(u_h, g, mesh, edges, config.postprocess_degree)?;
            let ex = general_extras(
                u_h,
                g,
                &sigma_h,
                chi,
                &discrete.chi_h,
                &classification,
                mesh,
                edges,
                config,
            )?;
            used_fd |= eg.used_finite_differences || ex.used_finite_differences;
            (Some(eg.per_triangle), Some(ex))
        }
    };

    let mut indicator_sq: Vec<f64> = (0..mesh.num_triangles())
        .map(|t| eta_f_sq[t] + eta_sigma_sq[t])
        .collect();
    match config.mode {
        EstimatorMode::Simplified => {
            for (t, v) in indicator_sq.iter_mut().enumerate() {
                *v += obstacle.gradient[t];
            }
        }
        EstimatorMode::General => {
            let eg = eta_g_sq.as_ref().expect("general mode has eta_g");
            let ex = extras.as_ref().expect("general mode has extras");
            for (t, v) in indicator_sq.iter_mut().enumerate() {
                *v += eg[t] + ex.positive_part[t] + ex.contact[t];
            }
        }
    }
    for (i, e) in edges.interior.iter().enumerate() {
        let mut share = 0.5 * eta_jump_sq[i];
        if let Some(ex) = &extras {
            share += 0.5 * ex.free_boundary_jump[i];
        }
        indicator_sq[e.plus] += share;
        indicator_sq[e.minus] += share;
    }
    for (i, e) in edges.boundary.iter().enumerate() {
        indicator_sq[e.triangle] += osc_g_sq[i];
        if config.mode == EstimatorMode::Simplified {
            indicator_sq[e.triangle] += obstacle.edge[i];
        }
    }

    let mut totals = EstimatorTotals {
        eta_f: sum(&eta_f_sq).sqrt(),
        eta_jump: sum(&eta_jump_sq).sqrt(),
        eta_sigma: sum(&eta_sigma_sq).sqrt(),
        osc_g: sum(&osc_g_sq).sqrt(),
        osc_chi_grad: sum(&obstacle.gradient).sqrt(),
        osc_chi_edge: sum(&obstacle.edge).sqrt(),
        ..Default::default()
    };
    let residual = sum(&eta_f_sq) + sum(&eta_jump_sq) + sum(&eta_sigma_sq);
    let total_sq = match config.mode {
        EstimatorMode::Simplified => residual + sum(&obstacle.gradient) + sum(&osc_g_sq) + sum(&obstacle.edge),
        EstimatorMode::General => {
            let eg = sum(eta_g_sq.as_ref().expect("general mode has eta_g"));
            let ex = extras.as_ref().expect("general mode has extras");
            let (pp, ct, fb) = (sum(&ex.positive_part), sum(&ex.contact), sum(&ex.free_boundary_jump));
            totals.eta_g = eg.sqrt();
            totals.positive_part = pp.sqrt();
            totals.contact = ct.max(0.0).sqrt();
            totals.free_boundary_jump = fb.sqrt();
            residual + eg + pp + ct + fb + sum(&osc_g_sq)
        }
    };
    totals.total = total_sq.max(0.0).sqrt();

    Ok(EstimatorBreakdown {
        mode: config.mode,
        eta_f_sq,
        eta_sigma_sq,
        eta_jump_sq,
        osc_g_sq,
        osc_chi_grad_sq: obstacle.gradient,
        osc_chi_edge_sq: obstacle.edge,
        eta_g_sq,
        extras,
        sigma_h,
        classification,
        indicator_sq,
        totals,
        used_finite_differences: used_fd,
    })
}
