use thiserror::Error;

/// Errors raised by state construction, the integrators and the solvers.
///
/// Particle indices in the variants are 0-based; messages print them 1-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular configuration: poles {} and {} are {separation:e} apart", .i + 1, .j + 1)]
    SingularConfiguration { i: usize, j: usize, separation: f64 },

    #[error("exponentiated coordinate overflows for pole {} (2*gamma*x = {exponent})", .i + 1)]
    Overflow { i: usize, exponent: f64 },

    #[error("constraint b_{0}.a_{0} = 1 violated: value {1}", .i + 1, .value)]
    ConstraintViolation { i: usize, value: f64 },

    #[error("constraint drift at t = {1}: |b_{0}.a_{0} - 1| = {2:e}", .i + 1, .t, .drift)]
    ConstraintDrift { i: usize, t: f64, drift: f64 },

    #[error("newton solver did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("newton jacobian is rank deficient at iteration {iteration}")]
    RankDeficient { iteration: usize },

    #[error("spectral parameter z = {z} is within {distance:e} of the spectrum; use |z| > {suggested}")]
    SpectralMargin { z: f64, distance: f64, suggested: f64 },

    #[error("evaluation point x = {x} is within {distance:e} of pole {}", .i + 1)]
    PoleProximity { i: usize, x: f64, distance: f64 },

    #[error("w sample {w} is within {distance:e} of pole {}", .i + 1)]
    SampleNearPole { i: usize, w: f64, distance: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
