//! Rank-one Hermitian–Einstein solve.
//!
//! For a line bundle `K(h₀e^φ) = K(h₀) − ¼(1+|λ|²)Δφ` holds exactly for the
//! discrete operator, so `√−1Λ_ω G(h) = A` is one Poisson solve.

use super::poisson::Poisson;
use super::HeError;
use crate::field::{ConnectionField, FieldError, MatField, MetricField};
use crate::grid::GridDomain;
use crate::lambda_ops::curvature_coefficient;
use crate::linalg::CMat;
use num_complex::Complex64 as C64;

/// Solution of the rank-one problem.
#[derive(Debug, Clone)]
pub struct Rank1Solution {
    pub metric: MetricField,
    /// `log(h/h₀)` per node; mean zero on the torus, zero on annulus boundary layers.
    pub phi: Vec<f64>,
    /// Largest `|√−1Λ_ω G(h) − A|` over evaluation nodes.
    pub residual: f64,
}

fn lambda_contraction_scalar(conn: &ConnectionField, h: &MetricField, g: &GridDomain) -> Result<Vec<f64>, HeError> {
    let k = curvature_coefficient(conn, h, g)?;
    Ok((0..g.len()).map(|n| g.lambda_factor(n) * k.nodes()[n][(0, 0)].re).collect())
}

/// Solves `√−1Λ_ω G(h₀e^φ) = A` for a line bundle.
///
/// `conn = None` means the trivial connection at `λ = 0`. On the torus the
/// source must integrate to zero within `tol` relative to its size, and
/// `φ` is normalized to mean zero; on the annulus `φ` vanishes on the
/// boundary layers.
pub fn rank1_solve(
    conn: Option<&ConnectionField>,
    h0: &MetricField,
    g: &GridDomain,
    a: f64,
    tol: f64,
) -> Result<Rank1Solution, HeError> {
    if h0.rank() != 1 {
        return Err(FieldError::RankMismatch { rank: 1 }.into());
    }
    if !(tol > 0.0) {
        return Err(HeError::InvalidParameter("tolerance must be positive".into()));
    }
    let trivial;
    let conn = match conn {
        Some(c) => c,
        None => {
            trivial = ConnectionField::trivial(C64::new(0.0, 0.0), 1, g.len());
            &trivial
        }
    };
    let n = 1.0 + conn.lambda.norm_sqr();
    let lam0 = lambda_contraction_scalar(conn, h0, g)?;
    // Δφ = (2ρ/n)(√−1ΛG(h₀) − A)
    let mut f: Vec<C64> = (0..g.len())
        .map(|k| if g.is_interior(k) { C64::new(2.0 * g.kahler_weight()[k] / n * (lam0[k] - a), 0.0) } else { C64::new(0.0, 0.0) })
        .collect();
    if !g.is_annulus() {
        let total: f64 = f.iter().map(|v| v.re).sum();
        let size: f64 = f.iter().map(|v| v.re.abs()).sum();
        let mean = total / g.len() as f64;
        if total.abs() > tol * size.max(f64::MIN_POSITIVE) && mean.abs() > tol {
            return Err(HeError::DegreeMismatch { mean });
        }
    }
    Poisson::new(g).solve(&mut f, 0.0, 1.0);
    let phi: Vec<f64> = f.iter().map(|v| v.re).collect();
    let data = h0.nodes().iter().zip(&phi).map(|(h, p)| h.scale_re(p.exp())).collect::<Vec<CMat>>();
    let metric = MetricField::new(MatField::new(1, data)?)?;
    let lam = lambda_contraction_scalar(conn, &metric, g)?;
    let residual = g.interior().map(|k| (lam[k] - a).abs()).fold(0.0, f64::max);
    Ok(Rank1Solution { metric, phi, residual })
}
