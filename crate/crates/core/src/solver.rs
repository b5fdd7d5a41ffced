//! Discrete obstacle problem: find `u_h` with `u_h = g_h` on the boundary,
//! `u_h(z) ≥ χ(z)` at interior vertices, and
//!
//! ```text
//! λ := F - K u_h ≤ 0,   λ_z (u_h(z) - χ(z)) = 0,   λ_z = 0 where u_h(z) > χ(z)
//! ```
//!
//! solved by a primal-dual active set iteration with a preconditioned
//! conjugate gradient inner solver.

use nalgebra::{DMatrix, DVector};

use crate::assembly::{assemble_load, assemble_stiffness, SparseOperator};
use crate::error::{Result, SolveError};
use crate::mesh::Mesh;
use crate::problem::ProblemData;
use crate::quadrature::quadrature_rule;
use crate::space::{lumped_masses, nodal_interpolate, NodalField};

/// Default quadrature degree for the load vector.
pub const DEFAULT_LOAD_DEGREE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdasParams {
    /// Weight of the primal violation in the active-set update.
    pub c: f64,
    pub max_iterations: usize,
    /// Relative residual tolerance of the inner linear solves.
    pub tolerance: f64,
    /// Bound on `max_z |r_z| / m_z` for the inner solves, relative to
    /// `1 + max_z |F_z| / m_z`, with `m_z` the lumped vertex mass.
    pub multiplier_tolerance: f64,
}

impl Default for PdasParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_iterations: 500,
            tolerance: 1e-12,
            multiplier_tolerance: 1e-11,
        }
    }
}

impl PdasParams {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.c > 0.0) {
            return Err(SolveError::InvalidParameter("c must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(SolveError::InvalidParameter("tolerance must be positive"));
        }
        if !(self.multiplier_tolerance > 0.0) {
            return Err(SolveError::InvalidParameter("multiplier_tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(SolveError::InvalidParameter("max_iterations must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSolution {
    pub u_h: NodalField,
    /// Sorted interior vertices where `u_h = χ` is enforced.
    pub active_set: Vec<usize>,
    pub iterations: usize,
    /// Relative residual of the last linear solve.
    pub residual_norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgInfo {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` on the `free` unknowns by Jacobi-preconditioned CG. The
/// entries of `x` outside `free` are kept as prescribed values and their
/// coupling is moved to the right-hand side. `x` on the free set is used as
/// the initial guess.
pub fn solve_spd(
    op: &SparseOperator,
    rhs: &[f64],
    free: &[bool],
    x: &mut [f64],
    tolerance: f64,
) -> Result<CgInfo, SolveError> {
    solve_spd_weighted(op, rhs, free, x, tolerance, None)
}

/// [`solve_spd`] with an additional stopping test `max_i |r_i| / w_i ≤ bound`
/// on the true residual over the free set, given as `Some((w, bound))`.
pub fn solve_spd_weighted(
    op: &SparseOperator,
    rhs: &[f64],
    free: &[bool],
    x: &mut [f64],
    tolerance: f64,
    weighted: Option<(&[f64], f64)>,
) -> Result<CgInfo, SolveError> {
    let n = op.dim();
    let max_iterations = 10 * n + 100;
    let diag = op.diagonal();
    for i in 0..n {
        if free[i] && !(diag[i] > 0.0) {
            return Err(SolveError::Singular);
        }
    }

    // Residual of the reduced system with prescribed values substituted.
    let mut ax = op.mul(x);
    let mut r: Vec<f64> = (0..n).map(|i| if free[i] { rhs[i] - ax[i] } else { 0.0 }).collect();
    let mut x_fixed = x.to_vec();
    for i in 0..n {
        if free[i] {
            x_fixed[i] = 0.0;
        }
    }
    let kb = op.mul(&x_fixed);
    let b_norm = (0..n)
        .filter(|&i| free[i])
        .map(|i| (rhs[i] - kb[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    if b_norm == 0.0 {
        for i in 0..n {
            if free[i] {
                x[i] = 0.0;
            }
        }
        return Ok(CgInfo {
            iterations: 0,
            relative_residual: 0.0,
        });
    }

    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let weighted_ok = |r: &[f64]| match weighted {
        Some((w, bound)) => (0..n).all(|i| !free[i] || r[i].abs() <= bound * w[i]),
        None => true,
    };
    let mut z: Vec<f64> = (0..n).map(|i| if free[i] { r[i] / diag[i] } else { 0.0 }).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt() / b_norm;
    let mut iterations = 0;
    let mut restarts = 0;
    loop {
        if res <= tolerance && weighted_ok(&r) {
            if weighted.is_none() {
                break;
            }
            // The recursive residual drifts from the true one; confirm and
            // restart from the true residual if needed.
            ax = op.mul(x);
            for i in 0..n {
                r[i] = if free[i] { rhs[i] - ax[i] } else { 0.0 };
            }
            res = dot(&r, &r).sqrt() / b_norm;
            if (res <= tolerance && weighted_ok(&r)) || restarts == MAX_RESTARTS {
                break;
            }
            restarts += 1;
            for i in 0..n {
                z[i] = if free[i] { r[i] / diag[i] } else { 0.0 };
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
        }
        if iterations >= max_iterations {
            return Err(SolveError::CgNotConverged {
                iterations,
                residual: res,
            });
        }
        op.apply(&p, &mut ax);
        for i in 0..n {
            if !free[i] {
                ax[i] = 0.0;
            }
        }
        let pap = dot(&p, &ax);
        if !(pap > 0.0) {
            return Err(SolveError::Singular);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ax[i];
        }
        for i in 0..n {
            z[i] = if free[i] { r[i] / diag[i] } else { 0.0 };
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = dot(&r, &r).sqrt() / b_norm;
        iterations += 1;
    }
    Ok(CgInfo {
        iterations,
        relative_residual: res,
    })
}

const MAX_RESTARTS: usize = 4;

/// Mesh-dependent algebraic data of an obstacle problem.
#[derive(Clone, Debug)]
pub struct DiscreteProblem {
    pub stiffness: SparseOperator,
    /// `(f, ψ_z)` for every vertex.
    pub load: NodalField,
    /// Nodal interpolant `χ_h`.
    pub chi_h: NodalField,
    /// Nodal interpolant of `g`; only boundary entries are meaningful.
    pub g_h: NodalField,
    pub boundary: Vec<bool>,
    /// Lumped vertex masses `|ω_z| / 3`.
    pub masses: Vec<f64>,
}

impl DiscreteProblem {
    pub fn new(problem: &ProblemData, mesh: &Mesh, load_degree: usize) -> Result<Self> {
        let rule = quadrature_rule(load_degree)?;
        Ok(Self {
            stiffness: assemble_stiffness(mesh)?,
            load: assemble_load(problem.load.as_ref(), mesh, &rule),
            chi_h: nodal_interpolate(problem.obstacle.as_ref(), mesh),
            g_h: nodal_interpolate(problem.dirichlet.as_ref(), mesh),
            boundary: mesh.boundary_flags().to_vec(),
            masses: lumped_masses(mesh),
        })
    }

    pub fn num_interior(&self) -> usize {
        self.boundary.iter().filter(|&&b| !b).count()
    }

    /// `F - K u` at every vertex.
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let ku = self.stiffness.mul(u);
        self.load.values.iter().zip(ku).map(|(f, k)| f - k).collect()
    }

    /// Solves with an empty initial active set.
    pub fn solve(&self, params: &PdasParams) -> Result<DiscreteSolution, SolveError> {
        self.solve_from(params, &[], None)
    }

    /// Primal-dual active set iteration from the given initial active set
    /// (interior vertex indices) and optional initial iterate.
    pub fn solve_from(
        &self,
        params: &PdasParams,
        initial_active: &[usize],
        initial_guess: Option<&[f64]>,
    ) -> Result<DiscreteSolution, SolveError> {
        params.validate()?;
        let n = self.boundary.len();
        if self.num_interior() == 0 {
            return Err(SolveError::NoInteriorVertex);
        }
        let chi = &self.chi_h.values;
        let mut active = vec![false; n];
        for &z in initial_active {
            if !self.boundary[z] {
                active[z] = true;
            }
        }
        let mut u = match initial_guess {
            Some(g) => g.to_vec(),
            None => vec![0.0; n],
        };
        for i in 0..n {
            if self.boundary[i] {
                u[i] = self.g_h.values[i];
            }
        }

        let load_density = self
            .load
            .values
            .iter()
            .zip(&self.masses)
            .map(|(f, m)| (f / m).abs())
            .fold(0.0, f64::max);
        let bound = params.multiplier_tolerance * (1.0 + load_density);
        let mut residual_norm = 0.0;
        for iteration in 1..=params.max_iterations {
            let mut free = vec![false; n];
            for i in 0..n {
                if self.boundary[i] {
                    continue;
                }
                if active[i] {
                    u[i] = chi[i];
                } else {
                    free[i] = true;
                }
            }
            let info = solve_spd_weighted(
                &self.stiffness,
                &self.load.values,
                &free,
                &mut u,
                params.tolerance,
                Some((&self.masses, bound)),
            )?;
            residual_norm = info.relative_residual;
            let lambda = self.residual(&u);

            let mut changed = false;
            for i in 0..n {
                if self.boundary[i] {
                    continue;
                }
                let l = if active[i] { lambda[i] } else { 0.0 };
                let next = -l + params.c * (chi[i] - u[i]) > 0.0;
                if next != active[i] {
                    changed = true;
                    active[i] = next;
                }
            }
            if !changed {
                let active_set = (0..n).filter(|&i| active[i]).collect();
                return Ok(DiscreteSolution {
                    u_h: NodalField::new(u),
                    active_set,
                    iterations: iteration,
                    residual_norm,
                });
            }
        }
        let _ = residual_norm;
        Err(SolveError::ActiveSetNotConverged(params.max_iterations))
    }

    /// Exhaustive search over all active subsets with dense direct solves.
    /// Intended as a test oracle for small meshes.
    pub fn brute_force(&self) -> Result<DiscreteSolution, SolveError> {
        let interior: Vec<usize> = (0..self.boundary.len()).filter(|&i| !self.boundary[i]).collect();
        let m = interior.len();
        if m == 0 {
            return Err(SolveError::NoInteriorVertex);
        }
        if m > BRUTE_FORCE_MAX {
            return Err(SolveError::TooManyUnknowns {
                max: BRUTE_FORCE_MAX,
                got: m,
            });
        }
        let chi = &self.chi_h.values;
        let scale = 1.0
            + self.load.max_abs()
            + self.chi_h.max_abs()
            + self.g_h.max_abs() * self.stiffness.diagonal().iter().fold(0.0f64, |a, &b| a.max(b));
        let tol = 1e-10 * scale;

        let mut best: Option<(f64, DiscreteSolution)> = None;
        for mask in 0u32..(1u32 << m) {
            let is_active = |k: usize| mask & (1 << k) != 0;
            let free: Vec<usize> = (0..m).filter(|&k| !is_active(k)).collect();
            let mut u = vec![0.0; self.boundary.len()];
            for i in 0..self.boundary.len() {
                if self.boundary[i] {
                    u[i] = self.g_h.values[i];
                }
            }
            for k in 0..m {
                if is_active(k) {
                    u[interior[k]] = chi[interior[k]];
                }
            }
            if !free.is_empty() {
                let nf = free.len();
                let mut a = DMatrix::<f64>::zeros(nf, nf);
                let mut b = DVector::<f64>::zeros(nf);
                let pos: std::collections::HashMap<usize, usize> =
                    free.iter().enumerate().map(|(r, &k)| (interior[k], r)).collect();
                for (r, &k) in free.iter().enumerate() {
                    let i = interior[k];
                    b[r] = self.load.values[i];
                    for (j, v) in self.stiffness.row(i) {
                        match pos.get(&j) {
                            Some(&c) => a[(r, c)] += v,
                            None => b[r] -= v * u[j],
                        }
                    }
                }
                let chol = a.cholesky().ok_or(SolveError::Singular)?;
                let x = chol.solve(&b);
                for (r, &k) in free.iter().enumerate() {
                    u[interior[k]] = x[r];
                }
            }
            let lambda = self.residual(&u);
            let feasible = (0..m).all(|k| {
                let i = interior[k];
                if is_active(k) {
                    lambda[i] <= tol
                } else {
                    u[i] >= chi[i] - tol
                }
            });
            if feasible {
                // Energy picks the unique minimiser if tolerances admit more
                // than one candidate.
                let ku = self.stiffness.mul(&u);
                let energy: f64 = (0..u.len())
                    .filter(|&i| !self.boundary[i])
                    .map(|i| 0.5 * u[i] * ku[i] - self.load.values[i] * u[i])
                    .sum();
                let candidate = DiscreteSolution {
                    u_h: NodalField::new(u),
                    active_set: (0..m).filter(|&k| is_active(k)).map(|k| interior[k]).collect(),
                    iterations: 1,
                    residual_norm: 0.0,
                };
                if best.as_ref().is_none_or(|(e, _)| energy < *e) {
                    best = Some((energy, candidate));
                }
            }
        }
        best.map(|(_, s)| s).ok_or(SolveError::NoFeasibleSubset)
    }
}

/// Largest number of interior vertices accepted by the brute-force oracle.
pub const BRUTE_FORCE_MAX: usize = 12;

pub fn solve_obstacle(problem: &ProblemData, mesh: &Mesh, params: &PdasParams) -> Result<DiscreteSolution> {
    let dp = DiscreteProblem::new(problem, mesh, DEFAULT_LOAD_DEGREE)?;
    Ok(dp.solve(params)?)
}

pub fn brute_force_obstacle(problem: &ProblemData, mesh: &Mesh) -> Result<DiscreteSolution> {
    let dp = DiscreteProblem::new(problem, mesh, DEFAULT_LOAD_DEGREE)?;
    Ok(dp.brute_force()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::criss_cross_square;
    use crate::space::{Affine, Constant, Quadratic};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cc_problem(f: f64, chi: f64) -> ProblemData {
        ProblemData::new(Constant(f), Constant(chi), Constant(0.0))
    }

    #[test]
    fn contact_at_center() {
        let m = criss_cross_square();
        let s = solve_obstacle(&cc_problem(-12.0, -0.5), &m, &PdasParams::default()).unwrap();
        assert_eq!(s.u_h.values[4], -0.5);
        assert_eq!(s.active_set, vec![4]);
        for v in 0..4 {
            assert_eq!(s.u_h.values[v], 0.0);
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let m = criss_cross_square();
        let s = solve_obstacle(&cc_problem(0.0, -0.5), &m, &PdasParams::default()).unwrap();
        assert!(s.u_h.values.iter().all(|&v| v == 0.0));
        assert!(s.active_set.is_empty());
    }

    #[test]
    fn inactive_center() {
        let m = criss_cross_square();
        let s = solve_obstacle(&cc_problem(-2.0, -0.5), &m, &PdasParams::default()).unwrap();
        assert_relative_eq!(s.u_h.values[4], -1.0 / 6.0, epsilon = 1e-14);
        assert!(s.active_set.is_empty());
    }

    #[test]
    fn spd_examples() {
        let op = SparseOperator::from_triplets(1, vec![(0, 0, 4.0)]);
        let mut x = vec![0.0];
        solve_spd(&op, &[-4.0], &[true], &mut x, 1e-12).unwrap();
        assert_relative_eq!(x[0], -1.0);

        let m = criss_cross_square();
        let k = crate::assembly::assemble_stiffness(&m).unwrap();
        let mut rhs = vec![0.0; 5];
        rhs[4] = -4.0;
        let free: Vec<bool> = m.boundary_flags().iter().map(|b| !b).collect();
        let mut x = vec![0.0; 5];
        solve_spd(&k, &rhs, &free, &mut x, 1e-12).unwrap();
        assert_relative_eq!(x[4], -1.0, epsilon = 1e-14);

        let mut x = vec![0.0; 5];
        let info = solve_spd(&k, &[0.0; 5], &free, &mut x, 1e-12).unwrap();
        assert_eq!(info.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn brute_force_matches_examples() {
        let m = criss_cross_square();
        let bf = brute_force_obstacle(&cc_problem(-12.0, -0.5), &m).unwrap();
        assert_relative_eq!(bf.u_h.values[4], -0.5);
        assert_eq!(bf.active_set, vec![4]);
        let bf = brute_force_obstacle(&cc_problem(0.0, -0.5), &m).unwrap();
        assert!(bf.active_set.is_empty());
    }

    fn random_problem(rng: &mut ChaCha8Rng) -> ProblemData {
        let f = Affine {
            c0: rng.gen_range(-30.0..10.0),
            cx: rng.gen_range(-10.0..10.0),
            cy: rng.gen_range(-10.0..10.0),
        };
        let chi = Quadratic {
            c0: rng.gen_range(-0.6..0.0),
            cx: rng.gen_range(-0.5..0.5),
            cy: rng.gen_range(-0.5..0.5),
            cxx: rng.gen_range(-1.0..0.0),
            cxy: 0.0,
            cyy: rng.gen_range(-1.0..0.0),
        };
        let g = Affine {
            c0: rng.gen_range(0.5..1.0),
            cx: rng.gen_range(-0.2..0.2),
            cy: rng.gen_range(-0.2..0.2),
        };
        ProblemData::new(f, chi, g)
    }

    #[test]
    fn random_problems_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = criss_cross_square().refine_uniform().unwrap();
        assert!(m.interior_vertices().len() <= BRUTE_FORCE_MAX);
        for _ in 0..10 {
            let p = random_problem(&mut rng);
            let a = solve_obstacle(&p, &m, &PdasParams::default()).unwrap();
            let b = brute_force_obstacle(&p, &m).unwrap();
            for (x, y) in a.u_h.values.iter().zip(&b.u_h.values) {
                assert!((x - y).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn initial_guess_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = criss_cross_square().refine_uniform().unwrap().refine_uniform().unwrap();
        let params = PdasParams::default();
        for _ in 0..5 {
            let p = random_problem(&mut rng);
            let dp = DiscreteProblem::new(&p, &m, DEFAULT_LOAD_DEGREE).unwrap();
            let empty = dp.solve_from(&params, &[], None).unwrap();
            let full = dp.solve_from(&params, &m.interior_vertices(), None).unwrap();
            assert_eq!(empty.active_set, full.active_set);
            for (x, y) in empty.u_h.values.iter().zip(&full.u_h.values) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn discrete_variational_inequality_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = criss_cross_square().refine_uniform().unwrap().refine_uniform().unwrap();
        for _ in 0..5 {
            let p = random_problem(&mut rng);
            let dp = DiscreteProblem::new(&p, &m, DEFAULT_LOAD_DEGREE).unwrap();
            let s = dp.solve(&PdasParams::default()).unwrap();
            let scale = 1.0 + dp.load.max_abs();
            let lambda = dp.residual(&s.u_h.values);
            for z in m.interior_vertices() {
                // a(u_h, ψ_z) ≥ (f, ψ_z)
                assert!(lambda[z] <= 1e-8 * scale);
                assert!(s.u_h.values[z] >= dp.chi_h.values[z] - 1e-10);
                if s.u_h.values[z] > dp.chi_h.values[z] {
                    assert!(lambda[z].abs() <= 1e-8 * scale);
                }
            }
            for v in 0..m.num_vertices() {
                if m.is_boundary_vertex(v) {
                    assert_eq!(s.u_h.values[v], dp.g_h.values[v]);
                }
            }
            for &z in &s.active_set {
                assert_eq!(s.u_h.values[z], dp.chi_h.values[z]);
            }
        }
    }

    #[test]
    fn raising_the_load_never_lowers_the_solution() {
        let m = criss_cross_square().refine_uniform().unwrap().refine_uniform().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let p = random_problem(&mut rng);
            let lo = solve_obstacle(&p, &m, &PdasParams::default()).unwrap();
            let f = p.load.clone();
            let shift: f64 = rng.gen_range(0.1..20.0);
            let mut q = p.clone();
            q.load = std::sync::Arc::new(crate::space::FnField::new(move |x| f.value(x) + shift));
            let hi = solve_obstacle(&q, &m, &PdasParams::default()).unwrap();
            for (a, b) in lo.u_h.values.iter().zip(&hi.u_h.values) {
                assert!(b >= &(a - 1e-12));
            }
        }
    }

    #[test]
    fn parameter_validation() {
        let m = criss_cross_square();
        let bad = PdasParams {
            c: 0.0,
            ..Default::default()
        };
        assert!(solve_obstacle(&cc_problem(1.0, 0.0), &m, &bad).is_err());
        let diag = crate::mesh::Mesh::build(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            crate::mesh::Geometry::Polygonal,
        )
        .unwrap();
        assert!(matches!(
            solve_obstacle(&cc_problem(1.0, 0.0), &diag, &PdasParams::default()),
            Err(crate::error::Error::Solve(SolveError::NoInteriorVertex))
        ));
    }

    #[test]
    fn multiplier_vanishes_off_contact_on_graded_meshes() {
        // Repeated local bisection near a corner gives lumped masses spanning
        // several orders of magnitude.
        let mut m = criss_cross_square();
        for _ in 0..14 {
            let t = (0..m.num_triangles())
                .find(|&t| m.triangles()[t].iter().any(|&v| m.vertices()[v] == [0.0, 0.0]))
                .unwrap();
            m = m.bisect(&[t]).unwrap();
        }
        m = m.refine_uniform().unwrap().refine_uniform().unwrap();
        let problem = ProblemData::new(
            Constant(-20.0),
            Quadratic {
                c0: 0.05,
                cxx: -1.0,
                cyy: -1.0,
                ..Default::default()
            },
            Affine {
                c0: 0.3,
                cx: 0.1,
                cy: 0.0,
            },
        );
        let d = DiscreteProblem::new(&problem, &m, DEFAULT_LOAD_DEGREE).unwrap();
        let s = d.solve(&PdasParams::default()).unwrap();
        assert!(!s.active_set.is_empty());
        let lambda = d.residual(&s.u_h.values);
        let density = d
            .load
            .values
            .iter()
            .zip(&d.masses)
            .map(|(f, m)| (f / m).abs())
            .fold(0.0, f64::max);
        for z in m.interior_vertices() {
            if s.active_set.binary_search(&z).is_err() {
                assert!((lambda[z] / d.masses[z]).abs() <= 1e-9 * (1.0 + density));
            }
        }
        let bad = PdasParams {
            multiplier_tolerance: 0.0,
            ..Default::default()
        };
        assert!(d.solve(&bad).is_err());
    }
}
