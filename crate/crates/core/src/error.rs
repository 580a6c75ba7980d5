use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("non-manifold edge ({0}, {1}) shared by {2} triangles")]
    NonManifoldEdge(usize, usize, usize),

    #[error("inconsistent orientation across edge ({0}, {1})")]
    InconsistentOrientation(usize, usize),

    #[error("cone at vertex {0} lies on the boundary")]
    ConeOnBoundary(usize),

    #[error("invalid cone set: {0}")]
    InvalidCones(String),

    #[error("degenerate triangle {index} (area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("incompatible right-hand side: |integral| = {integral:e} exceeds {bound:e}")]
    Incompatible { integral: f64, bound: f64 },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
