//! Per-node operator coefficients and the curvature-like tensor `G(h)`.

use super::OpsError;
use crate::field::{ConnectionField, FieldError, MatField, MetricField};
use crate::grid::GridDomain;
use crate::linalg::{CMat, MetricFactors};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

const I: C64 = C64::new(0.0, 1.0);

/// Metric factorizations plus edge log-ratios `log(H_k⁻¹ H_{k+e})` along `x` and `y`.
///
/// Differences of `log h` are taken through these logs: the Laplacian of
/// `log h` becomes a divergence of edge fluxes (conservative and exactly
/// linear in `log h` for rank one), and `H⁻¹∂H` is a centered difference of
/// the two adjacent logs.
pub(crate) struct MetricCache {
    pub fac: Vec<MetricFactors>,
    edge_x: Vec<Option<CMat>>,
    edge_y: Vec<CMat>,
}

impl MetricCache {
    pub fn new(h: &MetricField, g: &GridDomain) -> Result<Self, FieldError> {
        h.check_grid(g)?;
        let fac = h
            .nodes()
            .par_iter()
            .enumerate()
            .map(|(k, m)| MetricFactors::new(m).ok_or(FieldError::BadMetric { node: k }))
            .collect::<Result<Vec<_>, _>>()?;
        let nodes = h.nodes();
        let (edge_x, edge_y): (Vec<Option<CMat>>, Vec<CMat>) = (0..g.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = g.ij(k);
                let ex = if g.is_annulus() && i + 1 == g.nx() {
                    None
                } else {
                    Some(fac[k].log_ratio(&nodes[g.idx((i + 1) % g.nx(), j)]))
                };
                let ey = fac[k].log_ratio(&nodes[g.idx(i, (j + 1) % g.ny())]);
                (ex, ey)
            })
            .unzip();
        Ok(MetricCache { fac, edge_x, edge_y })
    }

    fn ex(&self, k: usize) -> &CMat {
        self.edge_x[k].as_ref().expect("x-edge requested past the boundary layer")
    }

    /// Centered `H⁻¹∂ₓH` at a node with both `x`-neighbours.
    fn centered_mx(&self, g: &GridDomain, k: usize) -> CMat {
        let xm = g.neighbours(k)[1];
        (self.ex(k) + self.ex(xm)).scale_re(0.5 / g.dx())
    }

    /// `(H⁻¹∂ₓH, H⁻¹∂ᵧH)` at node `k`.
    ///
    /// On annulus boundary layers `H⁻¹∂ₓH` is extrapolated quadratically from
    /// the three nearest centered values, so its error matches theirs and a
    /// further centered difference stays second order.
    fn log_derivatives(&self, g: &GridDomain, k: usize) -> (CMat, CMat) {
        let (i, j) = g.ij(k);
        let ym = g.neighbours_any(k)[3];
        let my = (&self.edge_y[k] + &self.edge_y[ym]).scale_re(0.5 / g.dy());
        let extrapolate = |c1: usize, c2: usize, c3: usize| {
            let mut m = self.centered_mx(g, g.idx(c1, j)).scale_re(3.0);
            m -= &self.centered_mx(g, g.idx(c2, j)).scale_re(3.0);
            m += &self.centered_mx(g, g.idx(c3, j));
            m
        };
        let mx = if g.is_annulus() && i == 0 {
            extrapolate(1, 2, 3)
        } else if g.is_annulus() && i + 1 == g.nx() {
            extrapolate(i - 1, i - 2, i - 3)
        } else {
            self.centered_mx(g, k)
        };
        (mx, my)
    }

    /// Sum of second differences of `log h` at an evaluation node.
    fn divergence(&self, g: &GridDomain, k: usize) -> CMat {
        let [_, xm, _, ym] = g.neighbours(k);
        let mut d = (self.ex(k) - self.ex(xm)).scale_re(1.0 / (g.dx() * g.dx()));
        d.axpy(C64::new(1.0 / (g.dy() * g.dy()), 0.0), &(&self.edge_y[k] - &self.edge_y[ym]));
        d
    }
}

impl GridDomain {
    /// Like [`GridDomain::neighbours`] but clamps `x` at annulus boundary layers.
    pub(crate) fn neighbours_any(&self, k: usize) -> [usize; 4] {
        let (i, j) = self.ij(k);
        if self.is_annulus() && (i == 0 || i + 1 == self.nx()) {
            let jp = (j + 1) % self.ny();
            let jm = (j + self.ny() - 1) % self.ny();
            [k, k, self.idx(i, jp), self.idx(i, jm)]
        } else {
            self.neighbours(k)
        }
    }
}

/// Centered `(∂ₓF, ∂ᵧF)` at an evaluation node.
fn dxy(f: &MatField, g: &GridDomain, k: usize) -> (CMat, CMat) {
    let [xp, xm, yp, ym] = g.neighbours(k);
    let n = f.nodes();
    ((&n[xp] - &n[xm]).scale_re(0.5 / g.dx()), (&n[yp] - &n[ym]).scale_re(0.5 / g.dy()))
}

/// `∂_w = ½(∂ₓ − i∂ᵧ)`.
fn d_w(fx: &CMat, fy: &CMat) -> CMat {
    let mut out = fx.scale_re(0.5);
    out.axpy(C64::new(0.0, -0.5), fy);
    out
}

/// `∂_w̄ = ½(∂ₓ + i∂ᵧ)`.
fn d_wbar(fx: &CMat, fy: &CMat) -> CMat {
    let mut out = fx.scale_re(0.5);
    out.axpy(C64::new(0.0, 0.5), fy);
    out
}

fn is_zero_field(f: &MatField) -> bool {
    f.nodes().iter().all(|m| m.as_slice().iter().all(|z| *z == C64::new(0.0, 0.0)))
}

/// `X + X^{†h}`.
fn sym_h(x: &CMat, f: &MetricFactors) -> CMat {
    x + &x.h_adjoint(&f.h, &f.hinv)
}

/// Coefficient of `dw∧dw̄` in `G(h)` at an evaluation node.
///
/// Assembled as `T1 + T2 + T3` with
/// `T1 = −∂̄M − |λ|²∂M̄`,
/// `T2 = S(∂B + [M, B]) − [B♯, B]`,
/// `T3 = S(λ̄∂̄A − λ̄[A, M̄]) + [A, A♯]`, where `S(X) = X + X^{†h}`;
/// every piece is manifestly `h`-self-adjoint.
fn kg_node(conn: &ConnectionField, cache: &MetricCache, g: &GridDomain, k: usize, flags: (bool, bool)) -> CMat {
    let (b_zero, a_zero) = flags;
    let lam = conn.lambda;
    let l2 = lam.norm_sqr();
    let f = &cache.fac[k];
    let (mx, my) = cache.log_derivatives(g, k);
    let mut out = cache.divergence(g, k).scale_re(-0.25 * (1.0 + l2));
    if conn.rank() > 1 {
        out.axpy(I * (-0.25 * (1.0 - l2)), &CMat::commutator(&mx, &my));
    }
    let m = d_w(&mx, &my);
    let mbar = d_wbar(&mx, &my);
    if !b_zero {
        let b = &conn.a01.nodes()[k];
        let (bx, by) = dxy(&conn.a01, g, k);
        let x2 = &d_w(&bx, &by) + &CMat::commutator(&m, b);
        out += &sym_h(&x2, f);
        let bs = b.h_adjoint(&f.h, &f.hinv);
        out -= &CMat::commutator(&bs, b);
    }
    if !a_zero {
        let a = &conn.a10.nodes()[k];
        if l2 > 0.0 {
            let (ax, ay) = dxy(&conn.a10, g, k);
            let x3 = (&d_wbar(&ax, &ay) - &CMat::commutator(a, &mbar)).scale(lam.conj());
            out += &sym_h(&x3, f);
        }
        let as_ = a.h_adjoint(&f.h, &f.hinv);
        out += &CMat::commutator(a, &as_);
    }
    out
}

fn check_inputs(conn: &ConnectionField, h: &MetricField, g: &GridDomain) -> Result<(), OpsError> {
    conn.check_grid(g)?;
    h.check_grid(g)?;
    if conn.rank() != h.rank() {
        return Err(FieldError::RankMismatch { rank: h.rank() }.into());
    }
    Ok(())
}

pub(crate) fn curvature_with_cache(conn: &ConnectionField, cache: &MetricCache, g: &GridDomain) -> MatField {
    let flags = (is_zero_field(&conn.a01), is_zero_field(&conn.a10));
    let r = conn.rank();
    let data: Vec<CMat> = (0..g.len())
        .into_par_iter()
        .map(|k| if g.is_interior(k) { kg_node(conn, cache, g, k, flags) } else { CMat::zeros(r) })
        .collect();
    MatField::new(r, data).expect("ranks agree")
}

/// `dw∧dw̄` coefficient `K` of `G(h)`; zero on boundary layers.
pub fn curvature_coefficient(conn: &ConnectionField, h: &MetricField, g: &GridDomain) -> Result<MatField, OpsError> {
    check_inputs(conn, h, g)?;
    let cache = MetricCache::new(h, g)?;
    Ok(curvature_with_cache(conn, &cache, g))
}

/// `√−1·Λ_ω G(h) = (2/ρ)·K` at evaluation nodes.
pub fn lambda_contraction(conn: &ConnectionField, h: &MetricField, g: &GridDomain) -> Result<MatField, OpsError> {
    let mut k = curvature_coefficient(conn, h, g)?;
    for (n, m) in k.nodes_mut().iter_mut().enumerate() {
        *m = m.scale_re(g.lambda_factor(n));
    }
    Ok(k)
}

/// `G(h)` split by type. On a curve the `(2,0)` and `(0,2)` parts vanish identically.
#[derive(Debug, Clone)]
pub struct GTensor {
    pub g20: MatField,
    /// Coefficient of `dw∧dw̄`.
    pub g11: MatField,
    pub g02: MatField,
}

impl GTensor {
    /// Largest pointwise `h`-norms `(‖G^{2,0}‖, ‖G^{1,1}‖, ‖G^{0,2}‖)` over evaluation nodes.
    pub fn sup_norms(&self, h: &MetricField, g: &GridDomain) -> (f64, f64, f64) {
        let sup = |f: &MatField| h_sup(f, h, g);
        (sup(&self.g20), sup(&self.g11), sup(&self.g02))
    }
}

/// Largest `|X|_h = (Tr X X^{†h})^{1/2}` over evaluation nodes.
pub(crate) fn h_sup(f: &MatField, h: &MetricField, g: &GridDomain) -> f64 {
    g.interior()
        .map(|k| {
            let hk = &h.nodes()[k];
            let hinv = hk.inverse().expect("metric is invertible");
            f.nodes()[k].h_norm_sqr(hk, &hinv).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Evaluates `G(h) = [𝔇, δ' − δ'']` by type.
pub fn g_tensor(conn: &ConnectionField, h: &MetricField, g: &GridDomain) -> Result<GTensor, OpsError> {
    let g11 = curvature_coefficient(conn, h, g)?;
    let r = conn.rank();
    Ok(GTensor { g20: MatField::zeros(r, g.len()), g11, g02: MatField::zeros(r, g.len()) })
}

/// Coefficients of the operators induced by `(𝔇, h)`, relative to the flat derivatives.
#[derive(Debug, Clone)]
pub struct OperatorBundle {
    pub lambda: C64,
    /// `∂̄_{E,h} = ∂̄₀ + dbar·dw̄`.
    pub dbar: MatField,
    /// `∂_{E,h} = ∂₀ + del·dw`.
    pub del: MatField,
    /// `θ = theta·dw`.
    pub theta: MatField,
    /// `θ† = theta_dag·dw̄`.
    pub theta_dag: MatField,
    /// `𝔻⋆ = δ' − δ'' = (∂₀ − λ̄∂̄₀) + dstar10·dw + dstar01·dw̄`.
    pub dstar10: MatField,
    pub dstar01: MatField,
    pub g: GTensor,
}

impl OperatorBundle {
    /// Largest Frobenius deviation of `∂̄ + θ + λ(∂ + θ†)` from `𝔇`.
    pub fn reconstruction_error(&self, conn: &ConnectionField) -> f64 {
        let lam = self.lambda;
        (0..conn.len())
            .map(|k| {
                let mut b = self.dbar.nodes()[k].clone();
                b.axpy(lam, &self.theta_dag.nodes()[k]);
                let mut a = self.theta.nodes()[k].clone();
                a.axpy(lam, &self.del.nodes()[k]);
                (&b - &conn.a01.nodes()[k]).norm().max((&a - &conn.a10.nodes()[k]).norm())
            })
            .fold(0.0, f64::max)
    }
}

/// Derives `∂̄_{E,h}, ∂_{E,h}, θ, θ†, 𝔻⋆` and `G(h)` from `(𝔇, h)`.
///
/// `H⁻¹∂H` is extrapolated onto annulus boundary layers.
pub fn decompose_operators(conn: &ConnectionField, h: &MetricField, g: &GridDomain) -> Result<OperatorBundle, OpsError> {
    check_inputs(conn, h, g)?;
    let cache = MetricCache::new(h, g)?;
    let lam = conn.lambda;
    let norm = 1.0 / (1.0 + lam.norm_sqr());
    let r = conn.rank();
    type Six = (CMat, CMat, CMat, CMat, CMat, CMat);
    let parts: Vec<Six> = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let f = &cache.fac[k];
            let (mx, my) = cache.log_derivatives(g, k);
            let m = d_w(&mx, &my);
            let mbar = d_wbar(&mx, &my);
            let a = &conn.a10.nodes()[k];
            let b = &conn.a01.nodes()[k];
            let c = &m - &b.h_adjoint(&f.h, &f.hinv);
            let d = &mbar.scale(lam.conj()) - &a.h_adjoint(&f.h, &f.hinv);
            let mut dbar = b.clone();
            dbar.axpy(lam, &d);
            let mut del = c.clone();
            del.axpy(lam.conj(), a);
            let mut theta = a.clone();
            theta.axpy(-lam, &c);
            let mut theta_dag = b.scale(lam.conj());
            theta_dag -= &d;
            (dbar.scale_re(norm), del.scale_re(norm), theta.scale_re(norm), theta_dag.scale_re(norm), c, -d)
        })
        .collect();
    let mut cols: [Vec<CMat>; 6] = Default::default();
    for p in parts {
        cols[0].push(p.0);
        cols[1].push(p.1);
        cols[2].push(p.2);
        cols[3].push(p.3);
        cols[4].push(p.4);
        cols[5].push(p.5);
    }
    let [dbar, del, theta, theta_dag, dstar10, dstar01] = cols.map(|c| MatField::new(r, c).expect("ranks agree"));
    let g11 = curvature_with_cache(conn, &cache, g);
    Ok(OperatorBundle {
        lambda: lam,
        dbar,
        del,
        theta,
        theta_dag,
        dstar10,
        dstar01,
        g: GTensor { g20: MatField::zeros(r, g.len()), g11, g02: MatField::zeros(r, g.len()) },
    })
}

/// Pluri-harmonicity verdict and the norms behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct PluriharmonicReport {
    pub is_pluriharmonic: bool,
    pub g20_sup: f64,
    pub g11_sup: f64,
    pub g02_sup: f64,
    pub tol: f64,
    pub used_shortcut: bool,
}

/// Tests `G(h) = 0`. With `shortcut`, the verdict uses `‖G^{1,1}‖` alone, which
/// is only sound for `λ ≠ 0`.
pub fn pluriharmonic_test(conn: &ConnectionField, h: &MetricField, g: &GridDomain, tol: f64, shortcut: bool) -> Result<PluriharmonicReport, OpsError> {
    if shortcut && conn.lambda.norm() == 0.0 {
        return Err(OpsError::ShortcutInvalidAtLambdaZero);
    }
    let gt = g_tensor(conn, h, g)?;
    let (g20, g11, g02) = gt.sup_norms(h, g);
    let ok = if shortcut { g11 < tol } else { g20 < tol && g11 < tol && g02 < tol };
    Ok(PluriharmonicReport { is_pluriharmonic: ok, g20_sup: g20, g11_sup: g11, g02_sup: g02, tol, used_shortcut: shortcut })
}

/// `R(h) + [θ, θ†]` as a `dw∧dw̄` coefficient with its norms.
#[derive(Debug, Clone)]
pub struct HitchinResidual {
    pub field: MatField,
    /// Largest `|K|_h` over evaluation nodes.
    pub sup: f64,
    /// `(Σ |K|_h² dx dy)^{1/2}` over evaluation nodes (chart area).
    pub l2: f64,
}

/// Evaluates the Hitchin equation for Higgs data `(∂̄₀ + B, Θ dw)`.
pub fn hitchin_residual(higgs: &ConnectionField, h: &MetricField, g: &GridDomain) -> Result<HitchinResidual, OpsError> {
    if higgs.lambda.norm() != 0.0 {
        return Err(OpsError::NotHiggs(higgs.lambda));
    }
    let field = curvature_coefficient(higgs, h, g)?;
    let sup = h_sup(&field, h, g);
    let l2 = g
        .interior()
        .map(|k| {
            let hk = &h.nodes()[k];
            field.nodes()[k].h_norm_sqr(hk, &hk.inverse().expect("invertible")) * g.cell_area()
        })
        .sum::<f64>()
        .sqrt();
    Ok(HitchinResidual { field, sup, l2 })
}

/// Curvature `𝔇∘𝔇` of a λ-connection.
#[derive(Debug, Clone)]
pub struct FlatnessReport {
    /// Coefficient `λ∂B − ∂̄A + [A, B]` of `dw∧dw̄`.
    pub field: MatField,
    /// Largest Frobenius norm over evaluation nodes.
    pub sup: f64,
}

/// Evaluates `𝔇∘𝔇` with centered differences.
pub fn flatness_residual(conn: &ConnectionField, g: &GridDomain) -> Result<FlatnessReport, OpsError> {
    conn.check_grid(g)?;
    let r = conn.rank();
    let data: Vec<CMat> = (0..g.len())
        .into_par_iter()
        .map(|k| {
            if !g.is_interior(k) {
                return CMat::zeros(r);
            }
            let (bx, by) = dxy(&conn.a01, g, k);
            let (ax, ay) = dxy(&conn.a10, g, k);
            let a = &conn.a10.nodes()[k];
            let b = &conn.a01.nodes()[k];
            let mut f = d_w(&bx, &by).scale(conn.lambda);
            f -= &d_wbar(&ax, &ay);
            f += &CMat::commutator(a, b);
            f
        })
        .collect();
    let field = MatField::new(r, data).expect("ranks agree");
    let sup = field.sup_norm_over(g.interior());
    Ok(FlatnessReport { field, sup })
}

/// `𝔇^λ_h = ∂̄_E + λθ†_h + λ∂_{E,h} + θ` from Higgs data and a metric.
///
/// Returns the connection, its flatness report, and the Hitchin residual sup
/// of the input, with a warning when that exceeds `tol`.
pub fn lambda_flat_from_higgs(
    higgs: &ConnectionField,
    h: &MetricField,
    g: &GridDomain,
    lambda: C64,
    tol: f64,
) -> Result<(ConnectionField, FlatnessReport, Option<String>), OpsError> {
    let hr = hitchin_residual(higgs, h, g)?;
    let warning = (hr.sup >= tol).then(|| format!("metric is not harmonic within tol: Hitchin residual {:e} >= {:e}", hr.sup, tol));
    if lambda.norm() == 0.0 {
        let flat = flatness_residual(higgs, g)?;
        return Ok((higgs.clone(), flat, warning));
    }
    let cache = MetricCache::new(h, g)?;
    let r = higgs.rank();
    let (b, a): (Vec<CMat>, Vec<CMat>) = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let f = &cache.fac[k];
            let (mx, my) = cache.log_derivatives(g, k);
            let bh = &higgs.a01.nodes()[k];
            let th = &higgs.a10.nodes()[k];
            let mut b = bh.clone();
            b.axpy(lambda, &th.h_adjoint(&f.h, &f.hinv));
            let c = &d_w(&mx, &my) - &bh.h_adjoint(&f.h, &f.hinv);
            let mut a = th.clone();
            a.axpy(lambda, &c);
            (b, a)
        })
        .unzip();
    let conn = ConnectionField::new(lambda, MatField::new(r, b)?, MatField::new(r, a)?)?;
    let flat = flatness_residual(&conn, g)?;
    Ok((conn, flat, warning))
}
