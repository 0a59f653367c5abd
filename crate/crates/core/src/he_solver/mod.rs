//! Hermitian–Einstein machinery: the Kähler family `ω_ε`, the rank-one solve,
//! the Donaldson heat flow and functional, and Chern–Weil degrees.

mod chern_weil;
mod flow;
mod poisson;
mod rank1;

pub use chern_weil::{chern_weil_degree, ChernWeilReport};
pub use flow::{
    donaldson_along, donaldson_functional, heat_flow, he_residual, FlowParams, FlowResult, FlowSample, FlowState,
    GAUSS_POINTS,
};
pub use rank1::{rank1_solve, Rank1Solution};

use crate::field::FieldError;
use crate::grid::{GridDomain, GridError};
use crate::lambda_ops::OpsError;
use crate::rational::{to_f64, Q};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// Errors raised by the solver.
#[derive(Debug, thiserror::Error)]
pub enum HeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("source is incompatible with A on a closed domain: mean {mean:e}")]
    DegreeMismatch { mean: f64 },
    #[error("metric lost positive definiteness at step {}", .last_good.step_count)]
    FlowBlowup { last_good: Box<FlowState> },
    #[error("invalid direction: {0}")]
    InvalidDirection(String),
    #[error("bad projector: {0}")]
    BadProjector(String),
    #[error(transparent)]
    Ops(#[from] OpsError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl HeError {
    pub fn kind(&self) -> &'static str {
        match self {
            HeError::InvalidParameter(_) => "invalid-parameter",
            HeError::DegreeMismatch { .. } => "degree-mismatch",
            HeError::FlowBlowup { .. } => "flow-blowup",
            HeError::InvalidDirection(_) => "invalid-direction",
            HeError::BadProjector(_) => "bad-projector",
            HeError::Ops(e) => e.kind(),
            HeError::Field(e) => e.kind(),
            HeError::Grid(e) => e.kind(),
        }
    }
}

/// `ω_ε = ω₀ + C ε^{N+2} √−1∂∂̄|z|^{2ε}` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KahlerEps {
    pub eps: f64,
    pub n: u32,
    pub c: f64,
    pub base: Vec<f64>,
    /// `ω_ε` relative to the flat `dz dz̄` metric on the annulus, `1` on the torus.
    pub factor: Vec<f64>,
    /// Per-node Kähler weight of `ω_ε` in the grid chart.
    pub weight: Vec<f64>,
}

impl KahlerEps {
    /// The grid with `ω_ε` installed as its Kähler weight.
    pub fn apply(&self, g: &GridDomain) -> Result<GridDomain, HeError> {
        Ok(g.clone().with_kahler_weight(self.weight.clone())?)
    }
}

/// Builds `ω_ε` from the grid's base weight. On the annulus `σ = z`, so the
/// correction is `C ε^{N+2} ε²|z|^{2ε−2} dz dz̄`; on the torus it vanishes.
pub fn kahler_eps(g: &GridDomain, eps: f64, n: u32, c: f64) -> Result<KahlerEps, HeError> {
    if n <= 10 {
        return Err(HeError::InvalidParameter(format!("N must exceed 10, got {n}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(HeError::InvalidParameter(format!("C must be positive, got {c}")));
    }
    if !(0.0..0.1).contains(&eps) {
        return Err(HeError::InvalidParameter(format!("epsilon must lie in [0, 1/10), got {eps}")));
    }
    let base = g.kahler_weight().to_vec();
    let coef = c * eps.powi(n as i32 + 2) * eps * eps;
    let (factor, weight): (Vec<f64>, Vec<f64>) = (0..g.len())
        .map(|k| match g.abs_z(k) {
            Some(r) => {
                let extra = coef * r.powf(2.0 * eps - 2.0);
                let flat = r * r;
                (1.0 + extra, base[k] + extra * flat)
            }
            None => (1.0, base[k]),
        })
        .unzip();
    if weight.iter().any(|w| !(*w > 0.0)) {
        return Err(HeError::InvalidParameter("ω_ε is not positive on the grid".into()));
    }
    Ok(KahlerEps { eps, n, c, base, factor, weight })
}

/// `A = 2πn(1+|λ|²)·deg / vol`.
pub fn he_constant(deg_par: &Q, vol: f64, lambda: C64, n: u32) -> Result<f64, HeError> {
    if !(vol > 0.0 && vol.is_finite()) {
        return Err(HeError::InvalidParameter(format!("volume must be positive, got {vol}")));
    }
    Ok(2.0 * PI * n as f64 * (1.0 + lambda.norm_sqr()) * to_f64(deg_par) / vol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qi;

    #[test]
    fn he_constant_examples() {
        let z = C64::new(0.0, 0.0);
        assert!((he_constant(&qi(1), 1.0, z, 1).unwrap() - 2.0 * PI).abs() < 1e-15);
        assert_eq!(he_constant(&qi(0), 1.0, z, 1).unwrap(), 0.0);
        assert!((he_constant(&qi(1), 1.0, C64::new(1.0, 0.0), 1).unwrap() - 4.0 * PI).abs() < 1e-15);
        assert_eq!(he_constant(&qi(1), 0.0, z, 1).unwrap_err().kind(), "invalid-parameter");
    }

    #[test]
    fn kahler_eps_examples() {
        let g = GridDomain::annulus(0.25, 0.75, 16).unwrap();
        let k0 = kahler_eps(&g, 0.0, 12, 1.0).unwrap();
        assert!(k0.factor.iter().all(|f| *f == 1.0));
        assert_eq!(k0.weight, k0.base);
        let k = kahler_eps(&g, 0.05, 12, 1.0).unwrap();
        let node = (0..g.len()).min_by(|a, b| (g.abs_z(*a).unwrap() - 0.5).abs().total_cmp(&(g.abs_z(*b).unwrap() - 0.5).abs())).unwrap();
        let r = g.abs_z(node).unwrap();
        let expect = 1.0 + 0.05f64.powi(14) / 400.0 * r.powf(-1.9);
        assert!((k.factor[node] - expect).abs() < 1e-15);
        for eps in [0.0, 0.05, 0.1 - 1e-9] {
            assert!(kahler_eps(&g, eps, 12, 1.0).unwrap().weight.iter().all(|w| *w > 0.0));
        }
        assert!(kahler_eps(&g, 0.1, 12, 1.0).is_err());
        assert!(kahler_eps(&g, 0.05, 10, 1.0).is_err());
        assert!(kahler_eps(&g, 0.05, 12, 0.0).is_err());
        let t = GridDomain::torus(1.0, 1.0, 16).unwrap();
        let kt = kahler_eps(&t, 0.05, 12, 1.0).unwrap();
        assert_eq!(kt.weight, kt.base);
    }
}
