//! Chern–Weil degree of a `𝔇^λ`-invariant sub-bundle, evaluated two ways.

use super::HeError;
use crate::field::{ConnectionField, FieldError, MatField, MetricField};
use crate::grid::GridDomain;
use crate::lambda_ops::{curvature_with_cache, MetricCache};
use crate::linalg::CMat;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// Both sides of the Chern–Weil formula for `S = im π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernWeilReport {
    /// `(2πn)⁻¹∫Tr(√−1Λ_ω G(h)·π) dvol − (2πn)⁻¹∫|𝔇^λπ|²`, with `n = 1+|λ|²`.
    pub lhs: f64,
    /// `(2π)⁻¹∫√−1 Tr R(h|_S)` from the induced metric on a frame of `S`.
    pub rhs: f64,
    pub gap: f64,
}

fn dxy(n: &[CMat], g: &GridDomain, k: usize) -> (CMat, CMat) {
    let [xp, xm, yp, ym] = g.neighbours(k);
    ((&n[xp] - &n[xm]).scale_re(0.5 / g.dx()), (&n[yp] - &n[ym]).scale_re(0.5 / g.dy()))
}

fn d_w(fx: &CMat, fy: &CMat) -> CMat {
    let mut out = fx.scale_re(0.5);
    out.axpy(C64::new(0.0, -0.5), fy);
    out
}

fn d_wbar(fx: &CMat, fy: &CMat) -> CMat {
    let mut out = fx.scale_re(0.5);
    out.axpy(C64::new(0.0, 0.5), fy);
    out
}

/// Columns of `π` spanning its image at node `k`, chosen to maximize the Gram determinant.
fn frame_columns(p: &CMat, rank: usize) -> Vec<usize> {
    fn subsets(n: usize, r: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for c in start..n {
            cur.push(c);
            subsets(n, r, c + 1, cur, out);
            cur.pop();
        }
    }
    let mut all = Vec::new();
    subsets(p.dim(), rank, 0, &mut Vec::new(), &mut all);
    let gram_det = |cols: &Vec<usize>| CMat::from_fn(rank, |a, b| (0..p.dim()).map(|i| p[(i, cols[a])].conj() * p[(i, cols[b])]).sum()).det().re;
    all.into_iter().max_by(|a, b| gram_det(a).total_cmp(&gram_det(b))).unwrap_or_default()
}

/// `log det(s†Hs)` for the frame `s_j = π e_{c_j}`.
fn log_det_induced(p: &CMat, h: &CMat, cols: &[usize]) -> f64 {
    let r = cols.len();
    let hp = h * p;
    CMat::from_fn(r, |a, b| (0..p.dim()).map(|i| p[(i, cols[a])].conj() * hp[(i, cols[b])]).sum()).det().re.ln()
}

/// `∂ₓφ` at the outer and inner faces of the evaluation region along row `j`,
/// third order from four cell values.
fn face_fluxes(f: &[f64], g: &GridDomain, j: usize) -> (f64, f64) {
    let at = |i: usize| f[g.idx(i, j)];
    let n = g.nx() - 2;
    let outer = (at(n - 2) - 3.0 * at(n - 1) - 21.0 * at(n) + 23.0 * at(n + 1)) / (24.0 * g.dx());
    let inner = -(at(3) - 3.0 * at(2) - 21.0 * at(1) + 23.0 * at(0)) / (24.0 * g.dx());
    (outer, inner)
}

/// Evaluates both sides of the Chern–Weil formula for the projector field `π`.
///
/// `π` must be idempotent, `h`-self-adjoint and its image invariant under
/// `∂̄ + B` and `λ∂ + A`, each within `tol` in sup-norm over evaluation
/// nodes. The right side uses the frame `s_j = π e_{c_j}` with fixed columns
/// `c_j`, which is exact when that frame is holomorphic. Its curvature
/// integral is taken as a boundary flux with third-order face derivatives,
/// so it converges to the continuum value independently of the stencil used
/// for `G(h)`.
pub fn chern_weil_degree(
    conn: &ConnectionField,
    h: &MetricField,
    pi: &MatField,
    g: &GridDomain,
    tol: f64,
) -> Result<ChernWeilReport, HeError> {
    conn.check_grid(g)?;
    h.check_grid(g)?;
    if conn.rank() != h.rank() || pi.rank() != h.rank() {
        return Err(FieldError::RankMismatch { rank: h.rank() }.into());
    }
    if pi.len() != g.len() {
        return Err(FieldError::SizeMismatch { expected: g.len(), got: pi.len() }.into());
    }
    if !(tol > 0.0) {
        return Err(HeError::InvalidParameter("tolerance must be positive".into()));
    }
    let cache = MetricCache::new(h, g)?;
    let p = pi.nodes();
    let lam = conn.lambda;
    let (a, b) = (conn.a10.nodes(), conn.a01.nodes());
    let mut idem = 0.0f64;
    let mut adj = 0.0f64;
    let mut inv = 0.0f64;
    let mut energy = 0.0;
    for k in g.interior() {
        let f = &cache.fac[k];
        idem = idem.max((&(&p[k] * &p[k]) - &p[k]).norm());
        adj = adj.max((&p[k].h_adjoint(&f.h, &f.hinv) - &p[k]).norm());
        let (px, py) = dxy(p, g, k);
        let p01 = &d_wbar(&px, &py) + &CMat::commutator(&b[k], &p[k]);
        let p10 = &d_w(&px, &py).scale(lam) + &CMat::commutator(&a[k], &p[k]);
        let q = &CMat::identity(p[k].dim()) - &p[k];
        inv = inv.max((&(&q * &p01) * &p[k]).norm()).max((&(&q * &p10) * &p[k]).norm());
        energy += 2.0 * (p10.h_norm_sqr(&f.h, &f.hinv) + p01.h_norm_sqr(&f.h, &f.hinv)) * g.cell_area();
    }
    if idem > tol {
        return Err(HeError::BadProjector(format!("not idempotent: {idem:e}")));
    }
    if adj > tol {
        return Err(HeError::BadProjector(format!("not h-self-adjoint: {adj:e}")));
    }
    if inv > tol {
        return Err(HeError::BadProjector(format!("image not invariant: {inv:e}")));
    }
    let n = 1.0 + lam.norm_sqr();
    let k_field = curvature_with_cache(conn, &cache, g);
    let curv: f64 = g.interior().map(|k| 2.0 * (&k_field.nodes()[k] * &p[k]).trace().re * g.cell_area()).sum();
    let lhs = (curv - energy) / (2.0 * PI * n);

    let sub_rank = p.first().map_or(0, |m| m.trace().re.round() as usize);
    if sub_rank == 0 {
        return Ok(ChernWeilReport { lhs, rhs: 0.0, gap: lhs.abs() });
    }
    let first = g.interior().next().ok_or(HeError::InvalidParameter("grid has no evaluation nodes".into()))?;
    let cols = frame_columns(&p[first], sub_rank);
    let phi: Vec<f64> = (0..g.len()).map(|k| log_det_induced(&p[k], &h.nodes()[k], &cols)).collect();
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(HeError::BadProjector("image frame degenerates".into()));
    }
    // Stokes: ∫Δφ is the boundary flux; closed on the torus.
    let flux: f64 = if g.is_annulus() {
        (0..g.ny()).map(|j| face_fluxes(&phi, g, j)).map(|(o, i)| (o - i) * g.dy()).sum()
    } else {
        0.0
    };
    let rhs = -0.25 * flux / PI;
    Ok(ChernWeilReport { lhs, rhs, gap: (lhs - rhs).abs() })
}
