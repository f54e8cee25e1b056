//! Error type shared by all modules.

/// Errors produced by the identification / synthesis / evaluation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("covariance not positive definite")]
    CovarianceNotPd,

    #[error("unstable Lyapunov operator (spectral radius {rho})")]
    UnstableLyapunov { rho: f64 },

    #[error("decay rate not dominating: rho {rho} <= spectral radius {spectral_radius}")]
    DecayRateNotDominating { rho: f64, spectral_radius: f64 },

    #[error("insufficient samples: need at least {required}, got {actual}")]
    InsufficientSamples { required: usize, actual: usize },

    #[error("insufficient excitation / too few samples")]
    InsufficientExcitation,

    #[error("order too large / rank collapse (sigma_n = {sigma_n:.3e})")]
    RankCollapse { sigma_n: f64 },

    #[error("near-singular weighting matrix")]
    SingularWeighting,

    #[error("unobservable estimate")]
    UnobservableEstimate,

    #[error("basis alignment ill-conditioned (condition number {cond:.3e})")]
    AlignmentIllConditioned { cond: f64 },

    #[error("no stabilizing solution")]
    NoStabilizingSolution,

    #[error("Riccati iteration did not converge after {iters} steps (residual {residual:.3e})")]
    RiccatiNonConvergence { iters: usize, residual: f64 },

    #[error(
        "regularization too tight, increase C: minimum achievable response norm {min_norm:.6} \
         exceeds C = {c_reg:.6}; a safe choice is C >= 2(1+|K|_2)|R_(A-KC)|_H2"
    )]
    RegularizationTooTight { min_norm: f64, c_reg: f64 },

    #[error("empirical MSE needs simulated states")]
    MissingStates,

    #[error("no spectral gap")]
    NoSpectralGap,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
