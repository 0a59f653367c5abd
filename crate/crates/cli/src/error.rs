//! CLI errors with machine-readable kinds and exit codes.

/// Exit code for validation and input errors.
pub const EXIT_INVALID: i32 = 2;
/// Exit code when an iterative solve stops before reaching tolerance.
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {detail}")]
    Io { path: String, detail: String },
    #[error("{path}: {detail}")]
    Schema { path: String, detail: String },
    #[error("{path}: schema_version {found} is not supported (expected {expected})")]
    SchemaVersion { path: String, found: u32, expected: u32 },
    #[error("{path}: {field}: {detail}")]
    Invariant { path: String, field: String, kind: &'static str, detail: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{detail}")]
    Compute { kind: &'static str, detail: String },
    #[error("not converged after {steps} steps: residual {residual:e} above tolerance {tol:e}")]
    NotConverged { steps: usize, residual: f64, tol: f64 },
}

impl CliError {
    /// Machine-readable error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Schema { .. } => "schema",
            CliError::SchemaVersion { .. } => "schema-version",
            CliError::Invariant { kind, .. } => kind,
            CliError::Config(_) => "invalid-config",
            CliError::Compute { kind, .. } => kind,
            CliError::NotConverged { .. } => "not-converged",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotConverged { .. } => EXIT_NOT_CONVERGED,
            _ => EXIT_INVALID,
        }
    }
}

macro_rules! from_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Compute { kind: e.kind(), detail: e.to_string() }
            }
        }
    )*};
}

from_core!(
    parh_core::filtered::FilteredError,
    parh_core::weights::WeightError,
    parh_core::grid::GridError,
    parh_core::field::FieldError,
    parh_core::lambda_ops::OpsError,
    parh_core::models::ModelError,
    parh_core::he_solver::HeError
);
