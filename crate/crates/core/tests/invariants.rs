use obstacle_afem::estimator::{EstimatorConfig, EstimatorMode};
use obstacle_afem::io::{mesh_to_string, parse_mesh};
use obstacle_afem::multiplier::default_contact_tolerance;
use obstacle_afem::prelude::*;
use proptest::prelude::*;

fn small_mesh(cuts: &[usize]) -> Mesh {
    let mut m = criss_cross_square().refine_uniform().unwrap();
    for &c in cuts {
        let t = c % m.num_triangles();
        m = m.bisect(&[t]).unwrap();
    }
    m
}

fn problem(f: f64, fx: f64, chi0: f64, curv: f64, gx: f64) -> ProblemData {
    let chi = Quadratic {
        c0: chi0,
        cxx: -curv,
        cyy: -curv,
        ..Default::default()
    };
    // Keep g above χ on the unit square boundary.
    let g = Affine {
        c0: chi0.max(0.0) + gx.abs() + 0.01,
        cx: gx,
        cy: 0.0,
    };
    ProblemData::new(Affine { c0: f, cx: fx, cy: 0.0 }, chi, g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn solver_agrees_with_enumeration(
        cuts in proptest::collection::vec(0usize..1000, 0..4),
        f in -40.0..5.0f64,
        fx in -5.0..5.0f64,
        chi0 in -0.5..0.1f64,
        curv in 0.0..1.0f64,
        gx in -0.2..0.2f64,
    ) {
        let m = small_mesh(&cuts);
        prop_assume!(m.interior_vertices().len() <= 10);
        let p = problem(f, fx, chi0, curv, gx);
        let a = solve_obstacle(&p, &m, &PdasParams::default()).unwrap();
        let b = brute_force_obstacle(&p, &m).unwrap();
        for (x, y) in a.u_h.values.iter().zip(&b.u_h.values) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn complementarity_holds(
        cuts in proptest::collection::vec(0usize..1000, 0..12),
        f in -40.0..5.0f64,
        fx in -5.0..5.0f64,
        chi0 in -0.5..0.1f64,
        curv in 0.0..1.0f64,
        gx in -0.2..0.2f64,
    ) {
        let m = small_mesh(&cuts).refine_uniform().unwrap();
        let p = problem(f, fx, chi0, curv, gx);
        let d = DiscreteProblem::new(&p, &m, 4).unwrap();
        let s = d.solve(&PdasParams::default()).unwrap();
        let sigma = compute_sigma_h(&s.u_h, &d.load, &d.stiffness, &m).unwrap();
        let scale = 1.0 + f.abs() + fx.abs();
        let tol = default_contact_tolerance(&s.u_h);
        for z in m.interior_vertices() {
            let gap = s.u_h.values[z] - d.chi_h.values[z];
            prop_assert!(gap >= -1e-12);
            prop_assert!(sigma.values[z] <= 1e-8 * scale);
            prop_assert!((sigma.values[z] * gap).abs() <= 1e-8 * scale);
            if gap > tol {
                prop_assert!(sigma.values[z].abs() <= 1e-8 * scale);
            }
        }
    }

    #[test]
    fn marking_is_minimal_and_sufficient(
        values in proptest::collection::vec(0.0..10.0f64, 1..60),
        theta in 0.01..1.0f64,
    ) {
        let marked = doerfler_mark(&values, theta).unwrap();
        let total: f64 = values.iter().map(|v| v * v).sum();
        let carried: f64 = marked.iter().map(|&i| values[i] * values[i]).sum();
        prop_assert!(marked.windows(2).all(|w| w[0] < w[1]));
        if total > 0.0 {
            prop_assert!(carried >= theta * total * (1.0 - 1e-12));
            let smallest = marked.iter().map(|&i| values[i]).fold(f64::INFINITY, f64::min);
            prop_assert!(carried - smallest * smallest < theta * total);
            // No unmarked indicator exceeds a marked one.
            let largest_unmarked = (0..values.len())
                .filter(|i| marked.binary_search(i).is_err())
                .map(|i| values[i])
                .fold(0.0, f64::max);
            prop_assert!(largest_unmarked <= smallest);
        }
    }

    #[test]
    fn estimator_parts_aggregate(
        cuts in proptest::collection::vec(0usize..1000, 0..8),
        f in -40.0..5.0f64,
        chi0 in -0.5..0.1f64,
        curv in 0.0..1.0f64,
        general in any::<bool>(),
    ) {
        let m = small_mesh(&cuts);
        let p = problem(f, 1.0, chi0, curv, 0.1);
        let d = DiscreteProblem::new(&p, &m, 4).unwrap();
        let s = d.solve(&PdasParams::default()).unwrap();
        let edges = EdgeSet::new(&m);
        let mode = if general { EstimatorMode::General } else { EstimatorMode::Simplified };
        let est = total_estimator(&p, &m, &edges, &d, &s.u_h, &EstimatorConfig::with_mode(mode)).unwrap();
        let ind: f64 = est.indicator_sq.iter().sum();
        let total = est.totals.total;
        prop_assert!(est.indicator_sq.iter().all(|&v| v >= 0.0));
        prop_assert!((ind - total * total).abs() <= 1e-12 * (1.0 + total * total));
    }

    #[test]
    fn mesh_text_round_trip(cuts in proptest::collection::vec(0usize..1000, 0..20)) {
        let m = small_mesh(&cuts);
        let back = parse_mesh(&mesh_to_string(&m), Geometry::Polygonal).unwrap();
        prop_assert_eq!(back.vertices(), m.vertices());
        prop_assert_eq!(back.triangles(), m.triangles());
    }
}

#[test]
fn disk_run_marks_and_converges() {
    let params = AdaptParams {
        max_dofs: 3000,
        ..AdaptParams::default()
    };
    let mut marked_sizes = Vec::new();
    let history = adaptive_loop_with(&disk_problem(), disk_initial_mesh().unwrap(), &params, |v| {
        marked_sizes.push(v.marked.len());
        assert!(v.mesh.check_conformity().is_ok());
    })
    .unwrap();
    let n = history.levels.len();
    assert!(history.levels.last().unwrap().ndof >= 3000);
    // Every level but the last marks something, and never everything.
    for (k, &m) in marked_sizes.iter().enumerate() {
        if k + 1 < n {
            assert!(m > 0 && m < history.levels[k].triangles);
        } else {
            assert_eq!(m, 0);
        }
    }
    assert!(history.levels.windows(2).all(|w| w[1].ndof > w[0].ndof));
    // The estimator is not monotone level to level on this benchmark, but it
    // decays overall at close to the optimal rate.
    let x: Vec<f64> = history.levels[2..].iter().map(|l| (l.ndof as f64).ln()).collect();
    let y: Vec<f64> = history.levels[2..].iter().map(|l| l.estimator.total.ln()).collect();
    let (mx, my) = (
        x.iter().sum::<f64>() / x.len() as f64,
        y.iter().sum::<f64>() / y.len() as f64,
    );
    let slope = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
        / x.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
    assert!(slope < -0.3, "estimator slope {slope}");
    for l in &history.levels {
        let eff = l.efficiency.unwrap();
        assert!(eff > 1e-2);
    }
}

#[test]
fn uniform_refinement_rate() {
    let params = AdaptParams {
        theta: 1.0,
        max_dofs: 4000,
        ..AdaptParams::default()
    };
    let history = disk_benchmark(&params).unwrap();
    let k = history.levels.len().saturating_sub(4);
    let tail = &history.levels[k..];
    let x: Vec<f64> = tail.iter().map(|l| (l.ndof as f64).ln()).collect();
    let y: Vec<f64> = tail.iter().map(|l| l.error.unwrap().ln()).collect();
    let (mx, my) = (
        x.iter().sum::<f64>() / x.len() as f64,
        y.iter().sum::<f64>() / y.len() as f64,
    );
    let slope = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
        / x.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
    assert!((-0.65..=-0.35).contains(&slope), "uniform slope {slope}");
}
