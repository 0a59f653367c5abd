//! Parabolic weights, filtered-bundle Chern calculus, λ-connection operators
//! on discretized curves, explicit model harmonic metrics and a
//! Hermitian–Einstein heat-flow solver.

pub mod rational;
pub mod weights;
pub mod filtered;
pub mod linalg;
pub mod grid;
pub mod field;
pub mod lambda_ops;
pub mod models;
pub mod he_solver;
