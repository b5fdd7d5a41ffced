use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("triangle {triangle} references vertex {vertex}, but the mesh has {count} vertices")]
    VertexOutOfRange {
        triangle: usize,
        vertex: usize,
        count: usize,
    },
    #[error("triangle {0} is degenerate (zero area)")]
    DegenerateTriangle(usize),
    #[error("triangle {0} repeats a vertex")]
    RepeatedVertex(usize),
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonConforming(usize, usize),
    #[error("vertices {0} and {1} coincide")]
    DuplicateVertex(usize, usize),
    #[error("mesh has no triangles")]
    Empty,
    #[error("refinement closure did not terminate after {0} steps")]
    ClosureDiverged(usize),
    #[error("triangle index {0} out of range")]
    TriangleOutOfRange(usize),
    #[error("refinement edge index {0} is not in 0..3")]
    BadRefinementEdge(u8),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(
        "conjugate gradient did not reach tolerance after {iterations} iterations (relative residual {residual:e})"
    )]
    CgNotConverged { iterations: usize, residual: f64 },
    #[error("active-set iteration did not settle after {0} iterations")]
    ActiveSetNotConverged(usize),
    #[error("system is singular or not positive definite")]
    Singular,
    #[error("mesh has no interior vertex")]
    NoInteriorVertex,
    #[error("brute-force enumeration supports at most {max} interior vertices, got {got}")]
    TooManyUnknowns { max: usize, got: usize },
    #[error("no active subset satisfies the complementarity conditions")]
    NoFeasibleSubset,
    #[error("invalid solver parameter: {0}")]
    InvalidParameter(&'static str),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("unsupported quadrature degree {0}")]
    UnsupportedDegree(usize),
    #[error("field length {got} does not match vertex count {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("point ({x}, {y}) lies outside triangle {triangle}")]
    OutsideTriangle { triangle: usize, x: f64, y: f64 },
    #[error("edge {0} is not an interior edge")]
    NotInteriorEdge(usize),
    #[error("triangle {0} has no boundary edge")]
    NotBoundaryTriangle(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("solver failed at level {level}: {source}")]
    Level {
        level: usize,
        #[source]
        source: SolveError,
    },
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
