use thiserror::Error;

/// Errors raised by the modeling, planning and calibration routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eigenvalue solver did not converge after {iterations} sweeps")]
    DiagonalizationFailure { iterations: usize },

    #[error("Hamiltonian fit diverged after {iterations} iterations (residuals f_max {res_fmax:.3e}, tunability {res_tunability:.3e}, anharmonicity {res_anharmonicity:.3e} GHz)")]
    FitDivergence {
        iterations: usize,
        res_fmax: f64,
        res_tunability: f64,
        res_anharmonicity: f64,
    },

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("Fourier truncation too coarse: {0}")]
    TruncationTooCoarse(String),

    #[error("sample rate {sample_rate_gsps} GS/s is below the anti-aliasing minimum {required_gsps} GS/s")]
    AliasingRisk {
        sample_rate_gsps: f64,
        required_gsps: f64,
    },

    #[error("analysis window holds {periods:.2} unit-envelope periods, need at least {required}")]
    InsufficientWindow { periods: f64, required: usize },

    #[error("frequency {freq_mhz} MHz outside transfer-function support [{lo_mhz}, {hi_mhz}] MHz")]
    OutOfBand {
        freq_mhz: f64,
        lo_mhz: f64,
        hi_mhz: f64,
    },

    #[error("Bessel cutoff m = {cutoff} too small: last term {term_ghz:.3e} GHz exceeds 1 Hz")]
    CutoffTooSmall { cutoff: usize, term_ghz: f64 },

    #[error("no sweet spot: ac-sensitivity has no sign change in ({lo}, {hi}) Φ0")]
    NoRoot { lo: f64, hi: f64 },

    #[error("sideband k = {k} cannot reach target {target_ghz} GHz from f̄ = {fbar_ghz} GHz")]
    WrongSideband {
        k: i32,
        fbar_ghz: f64,
        target_ghz: f64,
    },

    #[error("coupling must be positive, got {0} MHz")]
    NonPositiveCoupling(f64),

    #[error("no feasible operating point: {0}")]
    NoFeasiblePoint(String),

    #[error("θ sweep response {variation_ghz:.3e} GHz is below 5× the measurement noise {noise_ghz:.3e} GHz")]
    FlatResponse { variation_ghz: f64, noise_ghz: f64 },

    #[error("probe amplitude {amplitude} Φ0 outside the invertible region (bound {bound} Φ0)")]
    NonMonotoneRegion { amplitude: f64, bound: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Infeasible,
    Numerical,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter(_)
            | Error::AliasingRisk { .. }
            | Error::InsufficientWindow { .. }
            | Error::OutOfBand { .. }
            | Error::NonMonotoneRegion { .. }
            | Error::NonPositiveCoupling(_) => ErrorClass::Validation,
            Error::Infeasible(_)
            | Error::NoRoot { .. }
            | Error::WrongSideband { .. }
            | Error::NoFeasiblePoint(_)
            | Error::FlatResponse { .. } => ErrorClass::Infeasible,
            Error::DiagonalizationFailure { .. }
            | Error::FitDivergence { .. }
            | Error::TruncationTooCoarse(_)
            | Error::CutoffTooSmall { .. } => ErrorClass::Numerical,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => ErrorClass::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
