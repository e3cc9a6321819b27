use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    QuadratureNotConverged { residual: f64, tolerance: f64 },

    #[error("target grid is not a subset of the source grid (time {0} is missing)")]
    NotASubset(f64),

    #[error("controlled paths live on different rough paths")]
    GridMismatch,

    #[error(
        "covariance factorization of size {size} failed at jitter {jitter:.1e} \
         (condition estimate {condition_estimate:.3e})"
    )]
    Factorization {
        size: usize,
        jitter: f64,
        condition_estimate: f64,
    },

    #[error("numerical blow-up at t = {time}; last valid time {last_valid}")]
    BlowUp { time: f64, last_valid: f64 },

    #[error(
        "CFL bound violated: dt*max|u|*n = {courant:.3} exceeds {limit:.3}; \
         use at least {suggested_steps} steps"
    )]
    Cfl {
        courant: f64,
        limit: f64,
        suggested_steps: usize,
    },

    #[error("under-resolved at t = {time}: tail shell holds {fraction:.3e} of the spectral energy")]
    Underresolved { time: f64, fraction: f64 },

    #[error("vorticity must be mean-free (mean = {0:.3e})")]
    NonzeroMean(f64),

    #[error("rough field {0} is not flagged divergence-free")]
    NotDivergenceFree(usize),

    #[error("degenerate loop: {0}")]
    DegenerateLoop(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
