use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("infeasible initial state: S(0) = {s0} (need i0/p + pi < 1)")]
    InfeasibleInitialState { s0: f64 },

    #[error("step too large: {compartment} reached {value} at t = {time}")]
    StepTooLarge {
        compartment: &'static str,
        value: f64,
        time: f64,
    },

    #[error("deterministic path has not converged by t = {time}: |dIr/dt| = {slope}")]
    NotConverged { time: f64, slope: f64 },

    #[error("epidemic not extinct at end of log ({infectious} infectious remain)")]
    NotExtinct { infectious: u64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no epidemic: effective reproduction number {re} <= 1")]
    NoEpidemic { re: f64 },

    #[error("subcritical growth rate {rho_hat}")]
    Subcritical { rho_hat: f64 },

    #[error("solution outside the parameter domain: {0}")]
    DomainViolation(String),

    #[error("equivalent parameters out of range: {0}")]
    OutOfRange(String),

    #[error("survey sample contains no infectious individuals")]
    EmptyDenominator,

    #[error("log argument not positive at reported infection {index}: {value}")]
    LogDomainError { index: usize, value: f64 },

    #[error("degenerate survival integral {0}")]
    DegenerateIntegral(f64),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
