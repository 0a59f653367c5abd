//! Donaldson heat flow and functional.
//!
//! The trace part of the Hermitian–Einstein residual depends only on
//! `det h`; it is removed once by an exact rank-one solve on `det E`. The flow
//! then runs trace-free, `H ← H^{1/2} exp(−dt Ŷ) H^{1/2}`, so `det h` stays
//! fixed. `Ŷ` is the conjugated residual `H^{1/2} X H^{−1/2}` smoothed by
//! `(1 − dt·c·Δ)⁻¹`, an implicit treatment of the Laplacian part of the
//! linearized flow that keeps large steps stable.

use super::poisson::Poisson;
use super::rank1::rank1_solve;
use super::HeError;
use crate::field::{ConnectionField, FieldError, MatField, MetricField};
use crate::grid::GridDomain;
use crate::lambda_ops::{curvature_with_cache, MetricCache};
use crate::linalg::{CMat, MetricFactors};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::io::{self, Write};

/// Default number of Gauss–Legendre points for the Donaldson path integral.
pub const GAUSS_POINTS: usize = 8;

/// Step-size policy and stopping rule of the flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowParams {
    /// Einstein constant `A`.
    pub a: f64,
    pub dt: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub max_steps: usize,
    /// Stop once the sup-norm residual is below this.
    pub tol: f64,
    /// Smooth the step by `(1 − dt·c·Δ)⁻¹`; plain exponential Euler otherwise.
    pub implicit_laplacian: bool,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams { a: 0.0, dt: 0.5, dt_min: 1e-10, dt_max: 100.0, max_steps: 5000, tol: 1e-6, implicit_laplacian: true }
    }
}

/// Snapshot of the flow.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub h: MetricField,
    pub t: f64,
    /// `‖√−1Λ_ω G(h) − A·id‖_∞` in the `h`-norm.
    pub residual: f64,
    /// `M(h₀, h)` accumulated along the trajectory.
    pub donaldson_value: f64,
    pub step_count: usize,
}

/// One row of the trajectory log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSample {
    pub step: usize,
    pub t: f64,
    pub residual: f64,
    pub donaldson: f64,
    pub dt: f64,
    pub min_eig: f64,
}

/// Outcome of a flow run.
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub state: FlowState,
    pub trajectory: Vec<FlowSample>,
    pub converged: bool,
    /// Whether a rank-one solve on `det h` preceded the flow.
    pub det_corrected: bool,
    /// `max |det h_t / det h_{t=0} − 1|` after the determinant correction.
    pub det_drift: f64,
    /// Smallest `−ΔM / (dt·residual²)` over steps taken with residual `≥ 2·tol`.
    pub descent_constant: Option<f64>,
}

impl FlowResult {
    /// Trajectory as CSV with columns `step,t,residual,donaldson,dt,min_eig`.
    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "step,t,residual,donaldson,dt,min_eig")?;
        for s in &self.trajectory {
            writeln!(out, "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", s.step, s.t, s.residual, s.donaldson, s.dt, s.min_eig)?;
        }
        Ok(())
    }
}

struct Eval {
    cache: MetricCache,
    /// `√−1Λ_ω G(h) − A·id` at evaluation nodes, zero elsewhere.
    x: Vec<CMat>,
    residual: f64,
}

fn evaluate(conn: &ConnectionField, h: &MetricField, g: &GridDomain, a: f64) -> Result<Eval, HeError> {
    let cache = MetricCache::new(h, g)?;
    let k = curvature_with_cache(conn, &cache, g);
    let r = h.rank();
    let x: Vec<CMat> = k
        .into_nodes()
        .into_par_iter()
        .enumerate()
        .map(|(n, m)| {
            if g.is_interior(n) {
                let mut x = m.scale_re(g.lambda_factor(n));
                x.axpy(C64::new(-a, 0.0), &CMat::identity(r));
                x
            } else {
                CMat::zeros(r)
            }
        })
        .collect();
    let residual = g
        .interior()
        .map(|n| x[n].h_norm_sqr(&cache.fac[n].h, &cache.fac[n].hinv).sqrt())
        .fold(0.0, f64::max);
    Ok(Eval { cache, x, residual })
}

/// `√−1Λ_ω G(h) − A·id` and its sup-norm.
pub fn he_residual(conn: &ConnectionField, h: &MetricField, g: &GridDomain, a: f64) -> Result<(MatField, f64), HeError> {
    check(conn, h, g)?;
    let e = evaluate(conn, h, g, a)?;
    Ok((MatField::new(h.rank(), e.x)?, e.residual))
}

fn check(conn: &ConnectionField, h: &MetricField, g: &GridDomain) -> Result<(), HeError> {
    conn.check_grid(g)?;
    h.check_grid(g)?;
    if conn.rank() != h.rank() {
        return Err(FieldError::RankMismatch { rank: h.rank() }.into());
    }
    Ok(())
}

fn trace_connection(conn: &ConnectionField) -> Result<ConnectionField, HeError> {
    let tr = |f: &MatField| MatField::from_fn(1, f.len(), |k| CMat::from_rows(&[f.nodes()[k].trace()]));
    Ok(ConnectionField::new(conn.lambda, tr(&conn.a01), tr(&conn.a10))?)
}

fn dvol(g: &GridDomain) -> Vec<f64> {
    (0..g.len()).map(|k| if g.is_interior(k) { g.dvol(k) } else { 0.0 }).collect()
}

/// Runs the trace-free Donaldson heat flow from `h0`.
///
/// On the annulus the boundary layers keep their initial values. Steps that
/// increase the residual are retried with half the step; accepted steps grow
/// it by 1.2. Returns `converged = false` when `max_steps` or `dt_min` is hit.
pub fn heat_flow(conn: &ConnectionField, h0: &MetricField, g: &GridDomain, p: &FlowParams) -> Result<FlowResult, HeError> {
    check(conn, h0, g)?;
    if !(p.tol > 0.0 && p.dt > 0.0 && p.dt_min > 0.0 && p.dt_max >= p.dt) {
        return Err(HeError::InvalidParameter("flow tolerances and steps must be positive".into()));
    }
    let r = h0.rank();
    let norm = 1.0 / (1.0 + conn.lambda.norm_sqr());
    let vol = dvol(g);
    let mut h = h0.clone();
    let mut ev = evaluate(conn, &h, g, p.a)?;
    let tr_sup = g.interior().map(|k| ev.x[k].trace().norm() / r as f64).fold(0.0, f64::max);
    let mut det_corrected = false;
    if tr_sup > 0.1 * p.tol && r > 0 {
        let det_h = MetricField::new(MatField::from_fn(1, g.len(), |k| CMat::from_diag(&[h.nodes()[k].det().re])))?;
        let sol = rank1_solve(Some(&trace_connection(conn)?), &det_h, g, r as f64 * p.a, 1e-8)?;
        let nodes = h.nodes().iter().zip(&sol.phi).map(|(m, f)| m.scale_re((f / r as f64).exp())).collect();
        h = MetricField::new(MatField::new(r, nodes)?)?;
        ev = evaluate(conn, &h, g, p.a)?;
        det_corrected = true;
    }
    let det0: Vec<f64> = h.nodes().iter().map(|m| m.det().re).collect();
    let ref_rho = g.interior().map(|k| g.kahler_weight()[k]).sum::<f64>() / g.interior().count() as f64;
    let diffusion = 1.0 / (2.0 * norm * ref_rho);
    let poisson = Poisson::new(g);
    let min_eig = |ev: &Eval| ev.cache.fac.iter().map(|f| f.min_eig).fold(f64::INFINITY, f64::min);
    let mut state = FlowState { h, t: 0.0, residual: ev.residual, donaldson_value: 0.0, step_count: 0 };
    let mut trajectory = vec![FlowSample { step: 0, t: 0.0, residual: ev.residual, donaldson: 0.0, dt: 0.0, min_eig: min_eig(&ev) }];
    let mut dt = p.dt;
    let mut descent: Option<f64> = None;
    let mut converged = ev.residual < p.tol;
    while !converged && state.step_count < p.max_steps {
        // Hermitian representative Y = H^{1/2} X H^{-1/2}, weighted by ρ.
        let y: Vec<CMat> = (0..g.len())
            .into_par_iter()
            .map(|k| {
                let f = &ev.cache.fac[k];
                let mut x = ev.x[k].clone();
                let tr = x.trace() / r as f64;
                x.axpy(-tr, &CMat::identity(r));
                (&(&f.sqrt * &x) * &f.inv_sqrt).hermitian_part()
            })
            .collect();
        let mut accepted = None;
        while dt >= p.dt_min {
            let step = smoothed_step(&y, g, &poisson, p.implicit_laplacian, dt, diffusion, ref_rho, r);
            let trial: Vec<CMat> = (0..g.len())
                .into_par_iter()
                .map(|k| {
                    let f = &ev.cache.fac[k];
                    if !g.is_interior(k) {
                        return f.h.clone();
                    }
                    let e = step[k].herm_fn(|v| (-dt * v).exp());
                    (&(&f.sqrt * &e) * &f.sqrt).hermitian_part()
                })
                .collect();
            if trial.iter().any(|m| !m.is_finite()) {
                return Err(HeError::FlowBlowup { last_good: Box::new(state) });
            }
            let h_new = match MetricField::new(MatField::new(r, trial)?) {
                Ok(m) => m,
                Err(_) => return Err(HeError::FlowBlowup { last_good: Box::new(state) }),
            };
            let ev_new = evaluate(conn, &h_new, g, p.a)?;
            if ev_new.residual <= ev.residual {
                // Trapezoid increment of M along the step; u = −dt H^{-1/2} Ŷ H^{1/2}.
                let dm: f64 = (0..g.len())
                    .into_par_iter()
                    .filter(|k| vol[*k] > 0.0)
                    .map(|k| {
                        let f = &ev.cache.fac[k];
                        let u = (&(&f.inv_sqrt * &step[k]) * &f.sqrt).scale_re(-dt);
                        let old = (&u * &ev.x[k]).trace().re;
                        let new = (&u * &ev_new.x[k]).trace().re;
                        0.5 * (old + new) * vol[k]
                    })
                    .sum::<f64>()
                    * norm;
                accepted = Some((h_new, ev_new, dm));
                break;
            }
            dt *= 0.5;
        }
        let Some((h_new, ev_new, dm)) = accepted else { break };
        if ev.residual >= 2.0 * p.tol {
            let c = -dm / (dt * ev.residual * ev.residual);
            descent = Some(descent.map_or(c, |d: f64| d.min(c)));
        }
        state.h = h_new;
        state.t += dt;
        state.step_count += 1;
        state.donaldson_value += dm;
        state.residual = ev_new.residual;
        ev = ev_new;
        trajectory.push(FlowSample {
            step: state.step_count,
            t: state.t,
            residual: state.residual,
            donaldson: state.donaldson_value,
            dt,
            min_eig: min_eig(&ev),
        });
        converged = state.residual < p.tol;
        dt = (dt * 1.2).min(p.dt_max);
    }
    let det_drift = state.h.nodes().iter().zip(&det0).map(|(m, d)| (m.det().re / d - 1.0).abs()).fold(0.0, f64::max);
    Ok(FlowResult { state, trajectory, converged, det_corrected, det_drift, descent_constant: descent })
}

/// `Ŷ = (1 − dt·c·Δ)⁻¹(ρY)/ρ̄` entrywise, or `Y` itself without smoothing.
#[allow(clippy::too_many_arguments)]
fn smoothed_step(y: &[CMat], g: &GridDomain, poisson: &Poisson, implicit: bool, dt: f64, c: f64, ref_rho: f64, r: usize) -> Vec<CMat> {
    if !implicit {
        return y.to_vec();
    }
    let rho = g.kahler_weight();
    let mut out: Vec<CMat> = vec![CMat::zeros(r); y.len()];
    let entries: Vec<(usize, usize)> = (0..r).flat_map(|i| (i..r).map(move |j| (i, j))).collect();
    let solved: Vec<Vec<C64>> = entries
        .par_iter()
        .map(|&(i, j)| {
            let mut f: Vec<C64> = y.iter().enumerate().map(|(k, m)| m[(i, j)] * rho[k]).collect();
            poisson.solve(&mut f, 1.0, -dt * c);
            f
        })
        .collect();
    for ((i, j), f) in entries.into_iter().zip(solved) {
        for (k, v) in f.into_iter().enumerate() {
            let v = v / ref_rho;
            out[k][(i, j)] = v;
            out[k][(j, i)] = v.conj();
        }
    }
    for (k, m) in out.iter_mut().enumerate() {
        if !g.is_interior(k) {
            *m = CMat::zeros(r);
        } else if r > 0 {
            let tr = m.trace() / r as f64;
            m.axpy(-tr, &CMat::identity(r));
        }
    }
    out
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let p = if n == 0 { 1.0 } else { p1 };
                let pm = if n == 1 { 1.0 } else { p0 };
                dp = n as f64 * (x * p - pm) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            ((1.0 - x) / 2.0, 1.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// `M(h₀, h₀e^u) = (1+|λ|²)⁻¹ ∫₀¹∫ Tr(u·(√−1Λ_ω G(h_t) − A)) dvol dt` along `h_t = h₀e^{tu}`.
pub fn donaldson_along(
    h0: &MetricField,
    u: &MatField,
    conn: &ConnectionField,
    g: &GridDomain,
    a: f64,
    points: usize,
) -> Result<f64, HeError> {
    check(conn, h0, g)?;
    if u.rank() != h0.rank() || u.len() != h0.len() {
        return Err(FieldError::RankMismatch { rank: h0.rank() }.into());
    }
    if points == 0 {
        return Err(HeError::InvalidParameter("need at least one quadrature point".into()));
    }
    let fac = h0.factors()?;
    let mut ys = Vec::with_capacity(u.len());
    for (k, (f, m)) in fac.iter().zip(u.nodes()).enumerate() {
        let hu = &f.h * m;
        let defect = (&hu - &hu.adjoint()).norm();
        if defect > 1e-9 * (1.0 + hu.norm()) {
            return Err(HeError::InvalidDirection(format!("u is not h0-self-adjoint at node {k} (defect {defect:e})")));
        }
        ys.push((&(&f.sqrt * m) * &f.inv_sqrt).hermitian_part());
    }
    let norm = 1.0 / (1.0 + conn.lambda.norm_sqr());
    let vol = dvol(g);
    let mut total = 0.0;
    for (t, w) in gauss_legendre(points) {
        let nodes = fac.iter().zip(&ys).map(|(f, y)| (&(&f.sqrt * &y.herm_fn(|v| (t * v).exp())) * &f.sqrt).hermitian_part()).collect();
        let ht = MetricField::new(MatField::new(h0.rank(), nodes)?)?;
        let ev = evaluate(conn, &ht, g, a)?;
        let integral: f64 = (0..g.len()).filter(|k| vol[*k] > 0.0).map(|k| (&u.nodes()[k] * &ev.x[k]).trace().re * vol[k]).sum();
        total += w * integral;
    }
    Ok(total * norm)
}

/// `M(h₀, h₁)` with `u = log(h₀⁻¹h₁)`.
pub fn donaldson_functional(h0: &MetricField, h1: &MetricField, conn: &ConnectionField, g: &GridDomain, a: f64) -> Result<f64, HeError> {
    check(conn, h1, g)?;
    let fac = h0.factors()?;
    let u = MatField::new(h0.rank(), fac.iter().zip(h1.nodes()).map(|(f, m): (&MetricFactors, _)| f.log_ratio(m)).collect())?;
    donaldson_along(h0, &u, conn, g, a, GAUSS_POINTS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let q = gauss_legendre(8);
        assert!((q.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-14);
        let i15: f64 = q.iter().map(|(t, w)| w * t.powi(15)).sum();
        assert!((i15 - 1.0 / 16.0).abs() < 1e-14);
        let known = 0.5 - 0.960_289_856_497_536_3 / 2.0;
        assert!(q.iter().any(|(t, _)| (t - known).abs() < 1e-14));
    }

    #[test]
    fn functional_vanishes_at_base_point() {
        let g = GridDomain::torus(1.0, 1.0, 16).unwrap();
        let h = MetricField::identity(2, g.len());
        let conn = ConnectionField::trivial(C64::new(0.0, 0.0), 2, g.len());
        assert_eq!(donaldson_functional(&h, &h, &conn, &g, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn non_self_adjoint_direction_rejected() {
        let g = GridDomain::torus(1.0, 1.0, 16).unwrap();
        let h = MetricField::identity(2, g.len());
        let conn = ConnectionField::trivial(C64::new(0.0, 0.0), 2, g.len());
        let u = MatField::from_fn(2, g.len(), |_| CMat::unit(2, 0, 1));
        assert_eq!(donaldson_along(&h, &u, &conn, &g, 0.0, 8).unwrap_err().kind(), "invalid-direction");
    }
}
