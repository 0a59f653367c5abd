//! Worked examples for the Hermitian–Einstein solvers.

mod common;

use common::{log_distance, perturb_metric, smooth_tracefree};
use num_complex::Complex64 as C64;
use parh_core::field::{ConnectionField, MatField, MetricField};
use parh_core::grid::GridDomain;
use parh_core::he_solver::{chern_weil_degree, donaldson_functional, he_residual, heat_flow, kahler_eps, rank1_solve, FlowParams};
use parh_core::linalg::CMat;
use parh_core::models::rank2_model_metric;
use std::f64::consts::PI;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn torus(n: usize) -> GridDomain {
    GridDomain::torus(2.0 * PI, 2.0 * PI, n).unwrap()
}

fn bumpy_rank1(g: &GridDomain, a: f64, b: f64) -> MetricField {
    MetricField::from_fn(1, g.len(), |k| {
        let w = g.w(k);
        CMat::from_diag(&[(a * w.re.sin() * (2.0 * w.im).cos() + b * (w.re + w.im).cos()).exp()])
    })
    .unwrap()
}

fn model_flow_setup(n: usize) -> (GridDomain, ConnectionField, MetricField) {
    let g = GridDomain::annulus(0.1, 0.5, n).unwrap().with_flat_chart_metric();
    let m = rank2_model_metric(0.0, &g).unwrap();
    (g, m.higgs, m.metric)
}

#[test]
fn rank_one_torus_flow_converges_to_flat() {
    let g = torus(32);
    let conn = ConnectionField::trivial(zero(), 1, g.len());
    let r = heat_flow(&conn, &bumpy_rank1(&g, 0.6, 0.2), &g, &FlowParams::default()).unwrap();
    assert!(r.converged && r.state.residual < 1e-6, "{}", r.state.residual);
    assert!(r.trajectory.windows(2).all(|w| w[1].residual <= w[0].residual));
}

#[test]
fn flow_from_solution_takes_no_steps() {
    let (g, conn, h) = model_flow_setup(32);
    let p = FlowParams { tol: 1e-2, ..FlowParams::default() };
    let r = heat_flow(&conn, &h, &g, &p).unwrap();
    assert!(r.converged);
    assert_eq!(r.state.step_count, 0);
    assert_eq!(r.state.h, h);
}

#[test]
fn rank_two_flow_recovers_model() {
    let (g, conn, model) = model_flow_setup(32);
    let h0 = perturb_metric(&model, &smooth_tracefree(&g, 0.2, 0.0));
    let r = heat_flow(&conn, &h0, &g, &FlowParams { tol: 1e-5, ..FlowParams::default() }).unwrap();
    assert!(r.converged);
    assert!(log_distance(&model, &r.state.h) < 1e-3);
    assert!(r.det_drift < 1e-10, "{}", r.det_drift);
    assert!(r.descent_constant.is_some_and(|c| c > 0.0));
    let steps: Vec<f64> = r.trajectory.windows(2).map(|w| w[1].donaldson - w[0].donaldson).collect();
    assert!(steps.iter().all(|d| *d <= 1e-8), "{steps:?}");
    let m = donaldson_functional(&h0, &r.state.h, &conn, &g, 0.0).unwrap();
    assert!(m <= 0.0);
    // The trapezoid sum along the trajectory tracks the direct path integral.
    assert!((m - r.state.donaldson_value).abs() < 1e-2 * m.abs(), "{m} vs {}", r.state.donaldson_value);
}

#[test]
fn flows_from_two_starts_agree() {
    let (g, conn, model) = model_flow_setup(32);
    let p = FlowParams { tol: 1e-7, ..FlowParams::default() };
    let a = heat_flow(&conn, &perturb_metric(&model, &smooth_tracefree(&g, 0.2, 0.0)), &g, &p).unwrap();
    let b = heat_flow(&conn, &perturb_metric(&model, &smooth_tracefree(&g, 0.15, 1.3)), &g, &p).unwrap();
    assert!(a.converged && b.converged);
    assert!(log_distance(&a.state.h, &b.state.h) < 1e-4);
}

#[test]
fn flow_rejects_bad_parameters() {
    let g = torus(16);
    let conn = ConnectionField::trivial(zero(), 1, g.len());
    let err = heat_flow(&conn, &MetricField::identity(1, g.len()), &g, &FlowParams { tol: 0.0, ..FlowParams::default() }).unwrap_err();
    assert_eq!(err.kind(), "invalid-parameter");
}

#[test]
fn flow_corrects_determinant_once() {
    // A trace-carrying start: the rank-one pre-solve removes the trace residual.
    let g = torus(32);
    let conn = ConnectionField::trivial(zero(), 2, g.len());
    let h0 = MetricField::from_fn(2, g.len(), |k| {
        let w = g.w(k);
        CMat::from_diag(&[(0.3 * w.re.sin()).exp(), (0.2 * w.im.cos()).exp()])
    })
    .unwrap();
    let r = heat_flow(&conn, &h0, &g, &FlowParams::default()).unwrap();
    assert!(r.det_corrected && r.converged);
    assert!(r.det_drift < 1e-10);
    let (_, res) = he_residual(&conn, &r.state.h, &g, 0.0).unwrap();
    assert!(res < 1e-6);
}

#[test]
fn rank_one_solves_agree_up_to_constant() {
    let g = torus(32);
    let s1 = rank1_solve(None, &bumpy_rank1(&g, 0.7, 0.3), &g, 0.0, 1e-9).unwrap();
    let s2 = rank1_solve(None, &bumpy_rank1(&g, -0.4, 0.9), &g, 0.0, 1e-9).unwrap();
    assert!(s1.residual < 1e-6 && s2.residual < 1e-6);
    let ratios: Vec<f64> = s1.metric.nodes().iter().zip(s2.metric.nodes()).map(|(a, b)| a[(0, 0)].re / b[(0, 0)].re).collect();
    assert!(ratios.iter().all(|r| (r / ratios[0] - 1.0).abs() < 1e-6));
}

#[test]
fn donaldson_functional_vanishes_on_diagonal() {
    let (g, conn, h) = model_flow_setup(16);
    let m = donaldson_functional(&h, &h, &conn, &g, 0.0).unwrap();
    assert!(m.abs() < 1e-14, "{m}");
}

#[test]
fn chern_weil_identity_projector() {
    // Diagonal conformal metric on the annulus: both sides give the full degree.
    let g = GridDomain::annulus(0.2, 0.8, 64).unwrap();
    let h = MetricField::from_fn(2, g.len(), |k| {
        let (x, y) = (g.x(g.ij(k).0), g.y(g.ij(k).1));
        CMat::from_diag(&[(0.5 * x * x + 0.1 * y.cos()).exp(), (-0.3 * x).exp()])
    })
    .unwrap();
    let conn = ConnectionField::trivial(zero(), 2, g.len());
    let pi = MatField::from_fn(2, g.len(), |_| CMat::identity(2));
    let r = chern_weil_degree(&conn, &h, &pi, &g, 1e-9).unwrap();
    assert!(r.lhs.abs() > 1e-2, "{}", r.lhs);
    assert!(r.gap < 1e-2 * r.lhs.abs(), "{r:?}");
}

#[test]
fn chern_weil_model_subbundle() {
    let g = GridDomain::annulus(0.2, 0.8, 64).unwrap();
    let m = rank2_model_metric(0.0, &g).unwrap();
    let pi = MatField::from_fn(2, g.len(), |_| CMat::from_diag(&[0.0, 1.0]));
    let r = chern_weil_degree(&m.higgs, &m.metric, &pi, &g, 1e-6).unwrap();
    assert!(r.gap < 10.0 * g.dx() * g.dx(), "{r:?}");
}

#[test]
fn chern_weil_rejects_non_invariant_subspace() {
    let g = GridDomain::annulus(0.2, 0.8, 32).unwrap();
    let m = rank2_model_metric(0.0, &g).unwrap();
    let pi = MatField::from_fn(2, g.len(), |_| CMat::from_diag(&[1.0, 0.0]));
    let err = chern_weil_degree(&m.higgs, &m.metric, &pi, &g, 1e-6).unwrap_err();
    assert_eq!(err.kind(), "bad-projector");
}

#[test]
fn kahler_eps_preserves_torus_volume_and_annulus_positivity() {
    let t = torus(32);
    let kt = kahler_eps(&t, 0.05, 12, 1.0).unwrap().apply(&t).unwrap();
    assert_eq!(kt.volume(), t.volume());
    let a = GridDomain::annulus(0.1, 0.9, 32).unwrap();
    let ka = kahler_eps(&a, 0.05, 12, 1.0).unwrap().apply(&a).unwrap();
    assert!((ka.volume() / a.volume() - 1.0).abs() < 1e-12);
}
