use thiserror::Error;

use crate::params::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Validation(ValidationReport),

    #[error("unsupported unit conversion from {from} to {to}")]
    UnsupportedUnit { from: String, to: String },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("spectral density {value:e} at omega = {omega} eV is not positive")]
    NonPositiveLdos { omega: f64, value: f64 },

    #[error("dipole moment is required for a Purcell-factor normalisation")]
    MissingDipoleMoment,

    #[error("no interior maximum in the sampled window")]
    NoPeak,

    #[error("half-maximum crossing not found inside the window")]
    UnresolvedWidth,

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("resolvent is singular at omega = {omega} eV")]
    SingularResolvent { omega: f64 },

    #[error("steady-state system is singular at detuning {detuning} eV")]
    SingularAtDetuning { detuning: f64 },

    #[error("eigenbasis is defective (condition number {condition:e})")]
    DefectiveMatrix { condition: f64 },

    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),

    #[error("frequency span {span} eV is below the required {required} eV")]
    Alias { span: f64, required: f64 },

    #[error("time step {step} exceeds the stability limit {limit}")]
    Step { step: f64, limit: f64 },

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("total linewidth vanishes everywhere; emission spectrum is degenerate")]
    DegenerateSpectrum,

    #[error("fit did not converge after {evaluations} evaluations")]
    NonConvergence { evaluations: usize },

    #[error("fit covariance is ill-conditioned (condition number {condition:e})")]
    IllConditionedFit { condition: f64 },

    #[error("{points} data points cannot constrain {params} free parameters")]
    InsufficientData { points: usize, params: usize },

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("unknown parameter path '{0}'")]
    UnknownParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 for input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::UnsupportedUnit { .. }
            | Error::InvalidSpectrum(_)
            | Error::MissingDipoleMoment
            | Error::Domain(_)
            | Error::InvalidTimeGrid(_)
            | Error::InsufficientData { .. }
            | Error::Parse { .. }
            | Error::Config(_)
            | Error::UnknownPreset(_)
            | Error::UnknownParameter(_) => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }

    /// Short stable identifier, used in sweep tables and by the C ABI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::UnsupportedUnit { .. } => "unsupported_unit",
            Error::InvalidSpectrum(_) => "invalid_spectrum",
            Error::NonPositiveLdos { .. } => "non_positive_ldos",
            Error::MissingDipoleMoment => "missing_dipole",
            Error::NoPeak => "no_peak",
            Error::UnresolvedWidth => "unresolved_width",
            Error::Domain(_) => "domain",
            Error::SingularResolvent { .. } => "singular_resolvent",
            Error::SingularAtDetuning { .. } => "singular_at_detuning",
            Error::DefectiveMatrix { .. } => "defective_matrix",
            Error::Eigen(_) => "eigen",
            Error::Alias { .. } => "alias",
            Error::Step { .. } => "step",
            Error::InvalidTimeGrid(_) => "invalid_time_grid",
            Error::DegenerateSpectrum => "degenerate_spectrum",
            Error::NonConvergence { .. } => "non_convergence",
            Error::IllConditionedFit { .. } => "ill_conditioned_fit",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::UnknownPreset(_) => "unknown_preset",
            Error::UnknownParameter(_) => "unknown_parameter",
            Error::Io(_) => "io",
        }
    }
}
