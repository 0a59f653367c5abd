//! λ-connection operator calculus on discretized curves.
//!
//! A λ-connection is stored as `d'' = ∂̄₀ + B dw̄`, `d' = λ∂₀ + A dw` in a
//! fixed frame, and a metric as its Gram matrix `H` with `h(u, v) = v†Hu`.
//! With `M = H⁻¹∂H`, `B♯ = H⁻¹B†H`, `A♯ = H⁻¹A†H` the operators induced by `h` are
//!
//! * `δ' = ∂₀ + C`, `C = M − B♯` (Chern `(1,0)` part of `d''`),
//! * `δ'' = λ̄∂̄₀ + D`, `D = λ̄M̄ − A♯`,
//! * `∂̄_{E,h} = (d'' + λδ'')/(1+|λ|²)`, `∂_{E,h} = (λ̄d' + δ')/(1+|λ|²)`,
//! * `θ = (d' − λδ')/(1+|λ|²)`, `θ† = (λ̄d'' − δ'')/(1+|λ|²)`,
//!
//! so that `𝔇 = ∂̄_{E,h} + θ + λ(∂_{E,h} + θ†)` holds algebraically.
//! `G(h) = [𝔇, δ' − δ'']`; on a curve only its `dw∧dw̄` part survives, and at
//! `λ = 0` this is `R(h) + [θ, θ†]`, which equals half the curvature of the
//! associated flat connection.

mod kl;
mod operators;

pub use kl::{kobayashi_lubke_pointwise, project_primitive, Form11Field, KlReport, SurfaceGrid};
pub use operators::{
    curvature_coefficient, decompose_operators, flatness_residual, g_tensor, hitchin_residual, lambda_contraction,
    lambda_flat_from_higgs, pluriharmonic_test, FlatnessReport, GTensor, HitchinResidual, OperatorBundle,
    PluriharmonicReport,
};

use crate::field::FieldError;

/// Errors raised by the operator calculus.
#[derive(Debug, thiserror::Error)]
pub enum OpsError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("the (1,1) shortcut is only valid for λ ≠ 0")]
    ShortcutInvalidAtLambdaZero,
    #[error("expected Higgs data (λ = 0), got λ = {0}")]
    NotHiggs(num_complex::Complex64),
    #[error("form is not primitive at node {node}: |Λω G| = {value:e}")]
    NotPrimitive { node: usize, value: f64 },
    #[error("invalid surface grid: {0}")]
    InvalidGrid(String),
}

impl OpsError {
    pub fn kind(&self) -> &'static str {
        match self {
            OpsError::Field(e) => e.kind(),
            OpsError::ShortcutInvalidAtLambdaZero => "shortcut-invalid-at-lambda-zero",
            OpsError::NotHiggs(_) => "not-higgs",
            OpsError::NotPrimitive { .. } => "not-primitive",
            OpsError::InvalidGrid(_) => "invalid-grid",
        }
    }
}

pub(crate) use operators::{curvature_with_cache, MetricCache};
