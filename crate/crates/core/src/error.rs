use thiserror::Error;

/// Error type shared by the whole pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Bad configuration or malformed input file.
    #[error("config error: {0}")]
    Config(String),

    /// Quadrature grid too coarse for the frequency content of an integrand.
    #[error("precision error: {0}")]
    Precision(String),

    /// A configured resource cap (basis size, grid size) was exceeded.
    #[error("resource cap exceeded: {0}")]
    Resource(String),

    /// No eigenvector carries more than half its mass on the target mode.
    #[error("no dominant mode for index (n={n}, m={m}): best overlap {best_overlap}")]
    NoDominantMode { n: usize, m: usize, best_overlap: f64 },

    /// Two unperturbed eigenvalues are numerically coincident.
    #[error("degenerate denominator |alpha|^2 - |beta|^2 = {gap:e} between (n={n},m={m}) and (n={bn},m={bm})")]
    DegenerateDenominator { n: usize, m: usize, bn: usize, bm: usize, gap: f64 },

    /// The margin d would make the shrunk box empty.
    #[error("margin too large for index (n={n}, m={m}): d1={d1}, d2={d2}")]
    MarginTooLarge { n: usize, m: usize, d1: f64, d2: f64 },

    /// The perturbed eigenfunction changes sign (or vanishes) inside the shrunk box.
    #[error("sign change or zero inside the shrunk box of frame (n1={n1}, m1={m1})")]
    SignChangeInOmega1 { n1: usize, m1: usize },

    /// The shrunk box contains no interior grid nodes.
    #[error("frame (n1={n1}, m1={m1}) has no interior grid nodes; grid too coarse")]
    EmptyFrame { n1: usize, m1: usize },

    /// Mask is not a single 4-connected component.
    #[error("mask is not 4-connected ({components} components)")]
    NotConnected { components: usize },

    /// Iterative solver did not converge within its cap.
    #[error("non-convergence: {0}")]
    NonConvergence(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence(_) => 3,
            Error::Resource(_) => 4,
            _ => 2,
        }
    }
}
