use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use obstacle_afem::driver::{adaptive_loop_with, disk_initial_mesh, disk_problem, AdaptHistory, ERROR_DEGREE};
use obstacle_afem::estimator::{EstimatorConfig, EstimatorMode};
use obstacle_afem::io::{history_csv, mesh_to_string, read_mesh, svg_string};
use obstacle_afem::prelude::*;
use obstacle_afem::solver::DEFAULT_LOAD_DEGREE;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

mod config;

const THREADS_ENV: &str = "OBSTACLE_AFEM_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("problem file line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid thread count: {0}")]
    Threads(String),
    #[error(transparent)]
    Core(#[from] obstacle_afem::Error),
}

impl CliError {
    /// 2 for solver failures, 1 for everything caused by bad input.
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(obstacle_afem::Error::Level { .. } | obstacle_afem::Error::Solve(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "obstacle-afem",
    version,
    about = "Adaptive P1 finite elements for the obstacle problem"
)]
struct Cli {
    /// Worker threads (0 = all cores). Overrides OBSTACLE_AFEM_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Adaptive run on the unit-disk benchmark with known exact solution.
    Disk(AdaptArgs),
    /// Uniform refinement (every element marked) on the unit-disk benchmark.
    Uniform(UniformArgs),
    /// Single solve and estimate on a mesh file and a problem file.
    Solve(SolveArgs),
    /// Write a random small mesh and problem file for testing.
    Fixture(FixtureArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, Default)]
enum Mode {
    #[default]
    Simplified,
    General,
}

impl From<Mode> for EstimatorMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Simplified => EstimatorMode::Simplified,
            Mode::General => EstimatorMode::General,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long, value_enum, default_value_t = Mode::Simplified)]
    mode: Mode,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Levels at which to write mesh_L.svg and mesh_L.txt, e.g. `0,5,10`.
    #[arg(long, value_delimiter = ',')]
    snapshot: Vec<usize>,
    /// Also write a snapshot of the final level.
    #[arg(long)]
    snapshot_final: bool,
    #[arg(long, default_value_t = DEFAULT_LOAD_DEGREE)]
    load_degree: usize,
    #[arg(long, default_value_t = 4)]
    area_degree: usize,
    #[arg(long, default_value_t = 5)]
    obstacle_degree: usize,
    #[arg(long, default_value_t = 10)]
    edge_degree: usize,
    #[arg(long, default_value_t = 5)]
    postprocess_degree: usize,
    #[arg(long, default_value_t = ERROR_DEGREE)]
    error_degree: usize,
    /// Suppress the per-level table on stdout.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct AdaptArgs {
    /// Dörfler marking parameter in (0, 1].
    #[arg(long, default_value_t = 0.3)]
    theta: f64,
    #[command(flatten)]
    limits: Limits,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct UniformArgs {
    #[command(flatten)]
    limits: Limits,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone, Copy)]
struct Limits {
    #[arg(long, default_value_t = 50_000)]
    max_dofs: usize,
    #[arg(long, default_value_t = 1000)]
    max_levels: usize,
    /// Stop once the estimator falls below this value.
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
}

#[derive(Args, Debug)]
struct SolveArgs {
    mesh: PathBuf,
    problem: PathBuf,
    /// Print `vertex x y u_h` for every vertex.
    #[arg(long)]
    print_solution: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct FixtureArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random bisection rounds applied to the criss-cross square.
    #[arg(long, default_value_t = 3)]
    rounds: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn params(theta: f64, limits: Limits, c: &Common) -> AdaptParams {
    AdaptParams {
        theta,
        max_dofs: limits.max_dofs,
        tolerance: limits.tolerance,
        max_levels: limits.max_levels,
        estimator: EstimatorConfig {
            mode: c.mode.into(),
            area_degree: c.area_degree,
            obstacle_degree: c.obstacle_degree,
            edge_degree: c.edge_degree,
            postprocess_degree: c.postprocess_degree,
            contact_tolerance: None,
        },
        pdas: PdasParams::default(),
        load_degree: c.load_degree,
        error_degree: c.error_degree,
    }
}

fn write(path: PathBuf, contents: &str) -> Result<(), CliError> {
    std::fs::write(&path, contents).map_err(|source| CliError::Io { path, source })
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn snapshot(out: &Path, level: usize, mesh: &Mesh, indicators: &[f64]) -> Result<(), CliError> {
    write(
        out.join(format!("mesh_{level}.svg")),
        &svg_string(mesh, Some(indicators))?,
    )?;
    write(out.join(format!("mesh_{level}.txt")), &mesh_to_string(mesh))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4e}")).unwrap_or_else(|| "-".into())
}

fn run_adaptive(
    problem: &ProblemData,
    initial: Mesh,
    params: &AdaptParams,
    c: &Common,
) -> Result<AdaptHistory, CliError> {
    params.validate()?;
    create_dir(&c.out)?;
    let wanted: BTreeSet<usize> = c.snapshot.iter().copied().collect();
    let mut io_error = None;
    if !c.quiet {
        println!(
            "{:>5} {:>8} {:>11} {:>11} {:>9} {:>7}",
            "level", "ndof", "error", "estimator", "eff", "marked"
        );
    }
    let history = adaptive_loop_with(problem, initial, params, |view| {
        let last = view.marked.is_empty();
        if io_error.is_none() && (wanted.contains(&view.level) || (last && c.snapshot_final)) {
            if let Err(e) = snapshot(&c.out, view.level, view.mesh, &view.estimate.indicators()) {
                io_error = Some(e);
            }
        }
    })?;
    if let Some(e) = io_error {
        return Err(e);
    }
    if !c.quiet {
        for r in &history.levels {
            println!(
                "{:>5} {:>8} {:>11} {:>11.4e} {:>9} {:>7}",
                r.level,
                r.ndof,
                opt(r.error),
                r.estimator.total,
                r.efficiency.map(|e| format!("{e:.3}")).unwrap_or_else(|| "-".into()),
                r.marked
            );
        }
    }
    write(c.out.join("history.csv"), &history_csv(&history))?;
    Ok(history)
}

fn solve(args: &SolveArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.problem).map_err(|source| CliError::Io {
        path: args.problem.clone(),
        source,
    })?;
    let problem = config::parse_problem(&text)?;
    let mesh = read_mesh(&args.mesh, problem.geometry)?;
    let edges = EdgeSet::new(&mesh);
    if !problem.is_compatible(&mesh, &edges) {
        return Err(obstacle_afem::Error::InvalidParameter(format!(
            "obstacle exceeds the Dirichlet data on the boundary by {:e}",
            problem.boundary_incompatibility(&mesh, &edges)
        ))
        .into());
    }
    let c = &args.common;
    let p = params(
        0.3,
        Limits {
            max_dofs: usize::MAX,
            max_levels: 1,
            tolerance: 0.0,
        },
        c,
    );
    p.validate()?;
    create_dir(&c.out)?;
    let mut solution = None;
    let history = adaptive_loop_with(&problem, mesh.clone(), &p, |view| {
        solution = Some((view.solution.clone(), view.estimate.indicators()));
    })?;
    write(c.out.join("history.csv"), &history_csv(&history))?;
    let (sol, indicators) = solution.expect("one level is always run");
    if c.snapshot.contains(&0) || c.snapshot_final {
        snapshot(&c.out, 0, &mesh, &indicators)?;
    }
    let r = &history.levels[0];
    println!("ndof = {}", r.ndof);
    println!("triangles = {}", r.triangles);
    println!("active = {}", sol.active_set.len());
    println!("pdas_iterations = {}", sol.iterations);
    println!("estimator = {:.16e}", r.estimator.total);
    if let Some(e) = r.error {
        println!("error = {e:.16e}");
    }
    if args.print_solution {
        for (v, (p, u)) in mesh.vertices().iter().zip(&sol.u_h.values).enumerate() {
            println!("{v} {:.16e} {:.16e} {:.16e}", p[0], p[1], u);
        }
    }
    Ok(())
}

fn fixture(args: &FixtureArgs) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut mesh = criss_cross_square()
        .refine_uniform()
        .map_err(obstacle_afem::Error::from)?;
    for _ in 0..args.rounds {
        let marked: Vec<usize> = (0..mesh.num_triangles()).filter(|_| rng.gen_bool(0.3)).collect();
        mesh = mesh.bisect(&marked).map_err(obstacle_afem::Error::from)?;
    }
    let f: f64 = rng.gen_range(-30.0..0.0);
    let chi0: f64 = rng.gen_range(-0.4..0.0);
    let k: f64 = rng.gen_range(0.0..1.0);
    let g: f64 = chi0.max(0.0) + rng.gen_range(0.0..0.2);
    create_dir(&args.out)?;
    write(args.out.join("mesh.txt"), &mesh_to_string(&mesh))?;
    write(
        args.out.join("problem.cfg"),
        &format!(
            "# seed {}\nload = constant {f}\nobstacle = bowl {chi0} {k}\ndirichlet = constant {g}\n",
            args.seed
        ),
    )
}

fn configure_threads(flag: Option<usize>) -> Result<(), CliError> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(s) => s.trim().parse().map_err(|_| CliError::Threads(s))?,
            Err(_) => return Ok(()),
        },
    };
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Threads(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads(cli.threads)?;
    match &cli.command {
        Command::Disk(a) => {
            let p = params(a.theta, a.limits, &a.common);
            run_adaptive(&disk_problem(), disk_initial_mesh()?, &p, &a.common).map(|_| ())
        }
        Command::Uniform(a) => {
            let p = params(1.0, a.limits, &a.common);
            run_adaptive(&disk_problem(), disk_initial_mesh()?, &p, &a.common).map(|_| ())
        }
        Command::Solve(a) => solve(a),
        Command::Fixture(a) => fixture(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code())
        }
    }
}
