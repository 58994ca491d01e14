use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("params: degenerate Trotter step (sin(tau/2) = 0 at tau = {0})")]
    DegenerateParams(f64),
    #[error("params: gamma target {target} not bracketed by [{lo}, {hi}]")]
    NoBracket { target: f64, lo: f64, hi: f64 },
    #[error("kernels: invalid grid size {0}")]
    InvalidSize(usize),
    #[error("kernels: grid function has {got} samples, grid has {expected}")]
    GridMismatch { expected: usize, got: usize },
    #[error("{context}: pole proximity at {at}")]
    PoleProximity { context: &'static str, at: String },
    #[error("tba_gapped: 1 + eta_{n} vanishes on the shift lattice")]
    RecursionPole { n: usize },
    #[error("{context}: no convergence after {iters} iterations (residual {residual:e})")]
    NoConvergence { context: &'static str, iters: usize, residual: f64 },
    #[error("{context}: negative density {value:e} in string {string}")]
    NegativeDensity { context: &'static str, string: usize, value: f64 },
    #[error("ysystem: unsupported root of unity (nu1 = {nu1}, nu2 = {nu2})")]
    UnsupportedRoot { nu1: usize, nu2: usize },
    #[error("ysystem: beta -> 0 limit not converged (spread {0:e})")]
    LimitNotConverged(f64),
    #[error("observables: singular Gaudin matrix (condition estimate {0:e})")]
    SingularGaudin(f64),
    #[error("exact_small: L = {l} exceeds the dense budget {max}")]
    SizeBudgetExceeded { l: usize, max: usize },
    #[error("exact_small: degenerate Floquet block not resolved (residual {0:e})")]
    DegeneracyUnresolved(f64),
    #[error("exact_small: one-magnon root pairing failed (residual {0:e})")]
    RootMatchFailed(f64),
    #[error("free_fermion: not a Gaussian point (delta = {delta}, tau = {tau})")]
    InvalidFreePoint { delta: f64, tau: f64 },
    #[error("{context}: function expected real on the real axis has imaginary part {value:e}")]
    ComplexResidue { context: &'static str, value: f64 },
    #[error("{context}: wrong regime: {msg}")]
    WrongRegime { context: &'static str, msg: String },
    #[error("{context}: invalid input: {msg}")]
    InvalidInput { context: &'static str, msg: String },
}

impl Error {
    /// True for failures of an iterative or limiting procedure, as opposed
    /// to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::LimitNotConverged(_)
                | Error::NegativeDensity { .. }
                | Error::RecursionPole { .. }
                | Error::SingularGaudin(_)
                | Error::DegeneracyUnresolved(_)
                | Error::RootMatchFailed(_)
                | Error::PoleProximity { .. }
                | Error::ComplexResidue { .. }
        )
    }
}
