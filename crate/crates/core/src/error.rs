use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("singular matrix: pivot {pivot:.3e} in column {column}")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("step underflow at t = {t}: required step {step:.3e} below minimum")]
    StepUnderflow { t: f64, step: f64 },

    #[error("target system is not Hurwitz (spectral abscissa {abscissa:.6})")]
    NotHurwitz { abscissa: f64 },

    #[error("flat order {0} is unsupported without a remainder callback")]
    UnsupportedOrder(usize),

    #[error("validation failed for `{callback}` at sample {sample}: relative error {error:.3e} > {tol:.1e}")]
    ValidationFailed {
        callback: String,
        sample: usize,
        error: f64,
        tol: f64,
    },

    #[error("equality constraint matrix is rank deficient at t = {t} (sigma_min = {sigma_min:.3e})")]
    RankDeficient { t: f64, sigma_min: f64 },

    #[error("barrier domain violated at t = {t}: constraint {index} has s - f = {margin:.3e}")]
    BarrierDomain { t: f64, index: usize, margin: f64 },

    #[error("flatness singularity at t = {t}: output speed {speed:.3e} below v_min")]
    FlatnessSingularity { t: f64, speed: f64 },

    #[error("robot at t = {t} overlaps obstacle {obstacle}")]
    InCollision { t: f64, obstacle: usize },

    #[error("plant diverged from flat output at t = {t}: |h(x) - y| = {error:.3e}")]
    PlantDivergence { t: f64, error: f64 },

    #[error("no convergence after {iterations} Newton iterations at t = {t} (residual {residual:.3e})")]
    NoConvergence {
        t: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("insufficient samples for decay fit: {0} usable points")]
    InsufficientSamples(usize),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("infeasible start: {0}")]
    InfeasibleStart(String),

    #[error("callback `{0}` is not supplied by this function")]
    MissingCallback(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Errors that the integrator treats as a rejected trial step rather than
    /// a hard failure. These mark points outside the domain of the dynamics.
    pub fn is_domain_error(&self) -> bool {
        matches!(self, Error::BarrierDomain { .. } | Error::InCollision { .. })
    }

    /// Time at which a simulation failure happened, when known.
    pub fn time(&self) -> Option<f64> {
        match self {
            Error::StepUnderflow { t, .. }
            | Error::RankDeficient { t, .. }
            | Error::BarrierDomain { t, .. }
            | Error::FlatnessSingularity { t, .. }
            | Error::InCollision { t, .. }
            | Error::PlantDivergence { t, .. }
            | Error::NoConvergence { t, .. } => Some(*t),
            _ => None,
        }
    }

    /// Replaces the failure time on time-carrying variants.
    pub fn with_time(mut self, when: f64) -> Self {
        match &mut self {
            Error::StepUnderflow { t, .. }
            | Error::RankDeficient { t, .. }
            | Error::BarrierDomain { t, .. }
            | Error::FlatnessSingularity { t, .. }
            | Error::InCollision { t, .. }
            | Error::PlantDivergence { t, .. }
            | Error::NoConvergence { t, .. } => *t = when,
            _ => {}
        }
        self
    }
}
