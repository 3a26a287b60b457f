use thiserror::Error;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("no triangle quadrature rule of degree {0} (supported: 1..=19)")]
    UnsupportedDegree(usize),
    #[error("weight with negative exponent evaluated at its singular point")]
    SingularWeight,
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("point source at ({x}, {y}) lies outside the domain")]
    SourceOutsideDomain { x: f64, y: f64 },
    #[error("point source at ({x}, {y}) lies on the domain boundary")]
    SourceOnBoundary { x: f64, y: f64 },
    #[error("Dirichlet data disagree by {gap:e} at vertex {vertex} shared by two boundary segments")]
    IncompatibleDirichlet { vertex: usize, gap: f64 },
    #[error("singular linear system (pivot {pivot})")]
    Singular { pivot: usize },
    #[error("Picard iteration did not converge in {} iterations (last increment {:e})", increments.len(), increments.last().copied().unwrap_or(f64::NAN))]
    NonConvergence { increments: Vec<f64> },
    #[error("rate fit: {0}")]
    Fit(String),
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
