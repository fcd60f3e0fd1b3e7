use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("permittivity matrix of size {size} is not positive definite")]
    SingularPermittivity { size: usize },

    #[error("eigensolver failed at k = {k:?} for a {size}x{size} operator")]
    EigenSolver { k: [f64; 3], size: usize },

    #[error(
        "frequency grid reaches u = {requested:.4} but the basis only covers u = {covered:.4} at k = {k:?}"
    )]
    InsufficientBands {
        requested: f64,
        covered: f64,
        k: [f64; 3],
    },

    #[error("detuning must be nonzero")]
    ZeroDetuning,

    #[error("detuning {0} coincides with the optical cutoff")]
    DetuningAtCutoff(f64),

    #[error("spectral function covers u <= {covered:.4}, quadrature needs u <= {needed:.4}")]
    SpectralCoverage { covered: f64, needed: f64 },

    #[error("level index {0} out of range")]
    UnknownLevel(usize),

    #[error("no average excitation frequency supplied for level {0}")]
    MissingOmegaBar(String),

    #[error("no root of the shift equation within +/-{window:.3e} rad/s of the bare level")]
    NoRoot { window: f64 },

    #[error("rejection sampling accepted {accepted} of {wanted} positions after {attempts} proposals")]
    SamplingFailed {
        accepted: usize,
        wanted: usize,
        attempts: usize,
    },
}
