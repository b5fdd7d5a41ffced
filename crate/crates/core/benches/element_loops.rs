//! Element loops on a one-worker pool against the full pool.
//!
//! `cargo bench -p obstacle-afem` compares the two pools;
//! `cargo bench -p obstacle-afem --no-default-features` times the purely
//! sequential build, where both groups run the same code.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use obstacle_afem::estimator::EstimatorConfig;
use obstacle_afem::prelude::*;
use obstacle_afem::quadrature::quadrature_rule;

fn disk_mesh(rounds: usize) -> Mesh {
    let mut m = disk_initial_mesh().unwrap();
    for _ in 0..rounds {
        m = m.refine_uniform().unwrap();
    }
    m
}

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let full = rayon::current_num_threads();
    let mut sizes = vec![1];
    if full > 1 {
        sizes.push(full);
    }
    sizes
        .into_iter()
        .map(|n| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
            (format!("{n}-threads"), pool)
        })
        .collect()
}

fn element_loops(c: &mut Criterion) {
    let problem = disk_problem();
    let mesh = disk_mesh(7);
    let edges = EdgeSet::new(&mesh);
    let discrete = DiscreteProblem::new(&problem, &mesh, 4).unwrap();
    let solution = discrete.solve(&PdasParams::default()).unwrap();
    let config = EstimatorConfig::default();
    let rule = quadrature_rule(4).unwrap();
    let label = format!("{}-triangles", mesh.num_triangles());

    let mut group = c.benchmark_group("element_loops");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_with_input(BenchmarkId::new("stiffness", &name), &label, |b, _| {
            b.iter(|| pool.install(|| assemble_stiffness(&mesh).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("load", &name), &label, |b, _| {
            b.iter(|| pool.install(|| assemble_load(problem.load.as_ref(), &mesh, &rule)))
        });
        group.bench_with_input(BenchmarkId::new("estimator", &name), &label, |b, _| {
            b.iter(|| {
                pool.install(|| total_estimator(&problem, &mesh, &edges, &discrete, &solution.u_h, &config).unwrap())
            })
        });
        group.bench_with_input(BenchmarkId::new("solve", &name), &label, |b, _| {
            b.iter(|| pool.install(|| discrete.solve(&PdasParams::default()).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, element_loops);
criterion_main!(benches);
