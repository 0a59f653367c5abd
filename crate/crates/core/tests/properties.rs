//! Property tests for the invariants of each module.

mod common;

use common::*;
use num_complex::Complex64 as C64;
use num_traits::Signed;
use parh_core::field::{ConnectionField, MatField, MetricField};
use parh_core::filtered::{
    descent, parabolic_c1_dot, parabolic_ch2_dot, pullback, slope, ComponentPairings, ComponentSpec, Crossing, FilteredSpec,
    IntersectionData, ModelBlock,
};
use parh_core::grid::GridDomain;
use parh_core::he_solver::{heat_flow, kahler_eps, FlowParams};
use parh_core::lambda_ops::{decompose_operators, flatness_residual, g_tensor, lambda_contraction};
use parh_core::linalg::CMat;
use parh_core::models::{build_model_bundle, estimate_growth_weights, l_eps, l_eps_log, model_family_metric, sym_power_model};
use parh_core::rational::{cq_zero, qi, reduce_to_window, to_f64, CQ, Q};
use parh_core::weights::{
    degree_preserving_psi, gap, perturb_weights_with, pick_generic_weight, tilde_par, weight_filtration, PerturbConfig, WeightSet,
};
use proptest::prelude::*;
use rand::Rng;
use std::collections::BTreeMap;
use std::f64::consts::PI;

fn rebuild(w: &WeightSet, f: impl Fn(&Q) -> Q) -> WeightSet {
    let mut mult: BTreeMap<Q, usize> = BTreeMap::new();
    for e in w.entries() {
        *mult.entry(f(&e.weight)).or_default() += e.multiplicity;
    }
    WeightSet::new(w.component_id(), mult, w.window_anchor().clone()).unwrap()
}

fn curve_spec(ws: WeightSet) -> FilteredSpec {
    let rank = ws.rank();
    FilteredSpec::new("s", rank, cq_zero(), vec![ComponentSpec::semisimple(ws)], vec![]).unwrap()
}

/// Semisimple spec with anchor-0 components `H0`, `H1`.
fn semisimple_spec(rng: &mut rand_chacha::ChaCha8Rng, rank: usize) -> FilteredSpec {
    let comps = (0..2)
        .map(|c| ComponentSpec::semisimple(WeightSet::with_anchor_zero(format!("H{c}"), weight_entries(rng, rank, &qi(0), 12)).unwrap()))
        .collect();
    FilteredSpec::new("s", rank, cq_zero(), comps, vec![]).unwrap()
}

fn expanded(w: &WeightSet) -> Vec<Q> {
    w.entries().iter().flat_map(|e| std::iter::repeat(e.weight.clone()).take(e.multiplicity)).collect()
}

/// Surface pairings for a two-component spec with a block-diagonal crossing.
fn surface_ix(rng: &mut rand_chacha::ChaCha8Rng, s: &FilteredSpec) -> IntersectionData {
    let mut ranks: BTreeMap<(Q, Q), usize> = BTreeMap::new();
    for (a, b) in expanded(&s.components[0].weights).into_iter().zip(expanded(&s.components[1].weights)) {
        *ranks.entry((a, b)).or_default() += 1;
    }
    let mut comps = Vec::new();
    for c in &s.components {
        comps.push(ComponentPairings {
            label: c.label().to_string(),
            hil: qi(rng.gen_range(1..=5)),
            hihil: Some(qi(rng.gen_range(-3..=3))),
            c1_hi_lattice: Some(qi(rng.gen_range(-3..=3))),
            gysin: c.weights.entries().iter().map(|e| (e.weight.clone(), qi(rng.gen_range(-4..=4)))).collect(),
        });
    }
    IntersectionData {
        dim_x: 2,
        deg_l_lattice: qi(rng.gen_range(-5..=5)),
        ch2_lattice: Some(qi(rng.gen_range(-5..=5))),
        c1sq_lattice: Some(qi(rng.gen_range(-5..=5))),
        components: comps,
        crossings: vec![Crossing { i: 0, j: 1, cl: qi(2), ranks: ranks.into_iter().map(|((a, b), r)| (a, b, r)).collect() }],
        block_lattice_degrees: None,
    }
}

/// Pairings of `A ⊕ B` from those of the summands, sharing the divisor geometry of `a`.
fn sum_ix(a: &IntersectionData, b: &IntersectionData) -> IntersectionData {
    let add = |x: &Option<Q>, y: &Option<Q>| Some(x.clone().unwrap() + y.clone().unwrap());
    let components = a
        .components
        .iter()
        .zip(&b.components)
        .map(|(p, q)| {
            let mut gysin = p.gysin.clone();
            for (w, v) in &q.gysin {
                *gysin.entry(w.clone()).or_insert_with(|| qi(0)) += v;
            }
            ComponentPairings { gysin, c1_hi_lattice: add(&p.c1_hi_lattice, &q.c1_hi_lattice), ..p.clone() }
        })
        .collect();
    let mut ranks: BTreeMap<(Q, Q), usize> = BTreeMap::new();
    for (x, y, r) in a.crossings[0].ranks.iter().chain(&b.crossings[0].ranks) {
        *ranks.entry((x.clone(), y.clone())).or_default() += r;
    }
    IntersectionData {
        dim_x: 2,
        deg_l_lattice: &a.deg_l_lattice + &b.deg_l_lattice,
        ch2_lattice: add(&a.ch2_lattice, &b.ch2_lattice),
        c1sq_lattice: add(&a.c1sq_lattice, &b.c1sq_lattice),
        components,
        crossings: vec![Crossing { ranks: ranks.into_iter().map(|((x, y), r)| (x, y, r)).collect(), ..a.crossings[0].clone() }],
        block_lattice_degrees: None,
    }
}

fn with_geometry(ix: &IntersectionData, geom: &IntersectionData) -> IntersectionData {
    let components = ix
        .components
        .iter()
        .zip(&geom.components)
        .map(|(p, q)| ComponentPairings { hil: q.hil.clone(), hihil: q.hihil.clone(), ..p.clone() })
        .collect();
    IntersectionData { components, ..ix.clone() }
}

fn random_conn(rng: &mut rand_chacha::ChaCha8Rng, g: &GridDomain, r: usize, lambda: C64) -> ConnectionField {
    let (p, q) = (rng.gen_range(0.0..PI), rng.gen_range(0.0..PI));
    let base_b = CMat::from_fn(r, |_, _| C64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)));
    let base_a = CMat::from_fn(r, |_, _| C64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)));
    let a01 = MatField::from_fn(r, g.len(), |k| base_b.scale_re((g.w(k).re + p).sin()));
    let a10 = MatField::from_fn(r, g.len(), |k| base_a.scale_re((g.w(k).im + q).cos()));
    ConnectionField::new(lambda, a01, a10).unwrap()
}

fn random_metric(rng: &mut rand_chacha::ChaCha8Rng, g: &GridDomain, r: usize) -> MetricField {
    let y = random_herm(rng, r).scale_re(0.4);
    let phase = rng.gen_range(0.0..PI);
    MetricField::from_fn(r, g.len(), |k| {
        let w = g.w(k);
        y.scale_re((w.re + phase).sin() * w.im.cos()).herm_fn(f64::exp)
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tilde_par_invariant_under_lattice_shift(seed in any::<u64>(), e in 1u64..=6) {
        let mut rng = rng(seed);
        let rank = rng.gen_range(1..=4);
        let (w, _) = weight_set_with_residues(&mut rng, rank, 24);
        let pick = w.entries()[rng.gen_range(0..w.entries().len())].weight.clone();
        let step = Q::new(1.into(), (e as i64).into());
        let shifted = rebuild(&w, |b| if *b == pick { reduce_to_window(&(b + &step), w.window_anchor()) } else { b.clone() });
        prop_assert_eq!(tilde_par(&w, e).unwrap(), tilde_par(&shifted, e).unwrap());
    }

    #[test]
    fn gap_of_zero_is_one_over_e(e in 2u64..=24) {
        let w = WeightSet::with_anchor_zero("H", [(qi(0), 1)]).unwrap();
        prop_assert_eq!(gap(&w, e).unwrap(), Q::new(1.into(), (e as i64).into()));
    }

    #[test]
    fn generic_weight_margin(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let rank = rng.gen_range(1..=4);
        let (w, _) = weight_set_with_residues(&mut rng, rank, 24);
        let e = (1..=rank as u64).product::<u64>();
        let a = pick_generic_weight(&w, e, rank).unwrap();
        let margin = Q::new(1.into(), (4 * e as i64 * rank as i64).into());
        for b in tilde_par(&w, e).unwrap() {
            prop_assert!((&a - &b).abs() > margin);
        }
    }

    #[test]
    fn perturbation_preserves_rank(seed in any::<u64>(), tenth in prop::bool::ANY) {
        let mut rng = rng(seed);
        let rank = rng.gen_range(1..=4);
        let (w, res) = weight_set_with_residues(&mut rng, rank, 24);
        let eps = if tenth { Q::new(1.into(), 10.into()) } else { Q::new(1.into(), 30.into()) };
        let e = (1..=rank as u64).product::<u64>();
        if let Some(psi) = random_valid_psi(&mut rng, &w, &eps, e) {
            let cfg = PerturbConfig { period: Some(e), check_range: false };
            let (pw, pres) = perturb_weights_with(&w, &res, &eps, &psi, &cfg).unwrap();
            prop_assert_eq!(pw.rank(), rank);
            prop_assert_eq!(pres.iter().map(|r| r.dim()).sum::<usize>(), rank);
            prop_assert!(pres.iter().all(|r| r.jordan_type.iter().all(|s| *s == 1)));
        }
    }

    #[test]
    fn degree_preserving_psi_is_exact(seed in any::<u64>(), den in 2i64..=60) {
        let mut rng = rng(seed);
        let rank = rng.gen_range(1..=5);
        let (w, _) = weight_set_with_residues(&mut rng, rank, 24);
        let eps = Q::new(1.into(), den.into());
        let psi = degree_preserving_psi(&w, &eps).unwrap();
        let sum: Q = w.entries().iter().map(|e| &psi[&e.weight] * qi(e.multiplicity as i64)).sum();
        prop_assert_eq!(sum, w.weighted_sum());
        for e in w.entries() {
            prop_assert!((&psi[&e.weight] - &e.weight).abs() < qi(2) * &eps);
        }
    }

    #[test]
    fn weight_filtration_is_symmetric(parts in prop::collection::vec(1usize..=6, 1..=4)) {
        let total: usize = parts.iter().sum();
        let f = weight_filtration(&parts).unwrap();
        prop_assert_eq!(f.values().sum::<usize>(), total);
        for (k, d) in &f {
            prop_assert_eq!(f.get(&-k), Some(d));
        }
    }

    #[test]
    fn c1_and_ch2_are_additive(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let (ra, rb) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let a = semisimple_spec(&mut rng, ra);
        let b = semisimple_spec(&mut rng, rb);
        let ia = surface_ix(&mut rng, &a);
        let ib = with_geometry(&surface_ix(&mut rng, &b), &ia);
        let sum = a.direct_sum(&b).unwrap();
        let isum = sum_ix(&ia, &ib);
        prop_assert_eq!(parabolic_c1_dot(&sum, &isum).unwrap(), parabolic_c1_dot(&a, &ia).unwrap() + parabolic_c1_dot(&b, &ib).unwrap());
        prop_assert_eq!(parabolic_ch2_dot(&sum, &isum).unwrap(), parabolic_ch2_dot(&a, &ia).unwrap() + parabolic_ch2_dot(&b, &ib).unwrap());
    }

    #[test]
    fn slope_invariant_under_self_sum(seed in any::<u64>(), copies in 2usize..=4) {
        let mut rng = rng(seed);
        let rank = rng.gen_range(1..=3);
        let (w, _) = weight_set_with_residues(&mut rng, rank, 24);
        let s = curve_spec(w);
        let ix = IntersectionData::curve(qi(rng.gen_range(-5..=5)), [("H0".to_string(), qi(rng.gen_range(1..=4)))]);
        let mut total = s.clone();
        let mut deg = ix.deg_l_lattice.clone();
        for _ in 1..copies {
            total = total.direct_sum(&s).unwrap();
            deg += &ix.deg_l_lattice;
        }
        let ix_total = IntersectionData { deg_l_lattice: deg, ..ix.clone() };
        prop_assert_eq!(slope(&total, &ix_total).unwrap(), slope(&s, &ix).unwrap());
    }

    #[test]
    fn descent_inverts_pullback(seed in any::<u64>(), e in 1u64..=4) {
        let s = random_spec(&mut rng(seed));
        let up = pullback(&s, &vec![e; s.components.len()]).unwrap();
        prop_assert_eq!(descent(&up, e).unwrap(), s);
    }

    #[test]
    fn perturbed_degree_drift_is_bounded(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let rank = rng.gen_range(1..=4);
        let (w, res) = weight_set_with_residues(&mut rng, rank, 24);
        let eps = Q::new(1.into(), 30.into());
        let e = (1..=rank as u64).product::<u64>();
        let hil = Q::new(rng.gen_range(1..=9).into(), rng.gen_range(1..=3).into());
        let ix = IntersectionData::curve(qi(0), [("H0".to_string(), hil.clone())]);
        if let Some(psi) = random_valid_psi(&mut rng, &w, &eps, e) {
            let (pw, _) = perturb_weights_with(&w, &res, &eps, &psi, &PerturbConfig { period: Some(e), check_range: false }).unwrap();
            let drift = parabolic_c1_dot(&curve_spec(pw), &ix).unwrap() - parabolic_c1_dot(&curve_spec(w), &ix).unwrap();
            prop_assert!(drift.abs() <= qi(2) * &eps * qi(rank as i64) * &hil);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operator_reconstruction_is_algebraic(seed in any::<u64>(), re in -2.0f64..2.0, im in -2.0f64..2.0, r in 1usize..=3) {
        let mut rng = rng(seed);
        let g = GridDomain::torus(2.0 * PI, 2.0 * PI, 16).unwrap();
        let conn = random_conn(&mut rng, &g, r, C64::new(re, im));
        let h = random_metric(&mut rng, &g, r);
        let ops = decompose_operators(&conn, &h, &g).unwrap();
        prop_assert!(ops.reconstruction_error(&conn) < 1e-12);
    }

    #[test]
    fn contraction_is_h_self_adjoint(seed in any::<u64>(), re in -2.0f64..2.0, im in -2.0f64..2.0, r in 1usize..=3) {
        let mut rng = rng(seed);
        let g = GridDomain::torus(2.0 * PI, 2.0 * PI, 16).unwrap();
        let conn = random_conn(&mut rng, &g, r, C64::new(re, im));
        let h = random_metric(&mut rng, &g, r);
        let x = lambda_contraction(&conn, &h, &g).unwrap();
        let fac = h.factors().unwrap();
        for k in g.interior() {
            let m = &x.nodes()[k];
            let adj = m.h_adjoint(&fac[k].h, &fac[k].hinv);
            prop_assert!((m - &adj).norm() < 1e-10 * (1.0 + m.norm()));
        }
    }

    #[test]
    fn g_tensor_ignores_constant_rescaling(seed in any::<u64>(), c in 0.01f64..100.0, r in 1usize..=3) {
        let mut rng = rng(seed);
        let g = GridDomain::annulus(0.2, 0.8, 16).unwrap();
        let conn = random_conn(&mut rng, &g, r, C64::new(1.0, 0.5));
        let h = random_metric(&mut rng, &g, r);
        let a = g_tensor(&conn, &h, &g).unwrap().g11;
        let b = g_tensor(&conn, &h.scaled(c), &g).unwrap().g11;
        for k in 0..g.len() {
            prop_assert!((&a.nodes()[k] - &b.nodes()[k]).norm() < 1e-11 * (1.0 + a.nodes()[k].norm()));
        }
    }

    #[test]
    fn l_eps_monotone_in_eps(z in 0.01f64..0.99, e1 in 0.0f64..0.5, e2 in 0.0f64..0.5) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(l_eps(z, lo).unwrap() <= l_eps(z, hi).unwrap() * (1.0 + 4.0 * f64::EPSILON));
        // ∂_ε[−ε log|z|² − (1 − |z|^{2ε})] = −2 log|z| (1 − |z|^{2ε}) ≥ 0.
        let g1 = |e: f64| -e * (z * z).ln() - (1.0 - z.powf(2.0 * e));
        prop_assert!(g1(hi) >= g1(lo) - 1e-15);
    }

    #[test]
    fn l_eps_log_derivative_bound(z in 1e-6f64..=0.5, eps in 0.0f64..=0.5) {
        // |∂_z log L_ε| = |d log L/ds| / (2|z|) with s = log|z|.
        let s = z.ln();
        let h = 1e-6;
        let d = ((l_eps_log(s + h, eps)).ln() - (l_eps_log(s - h, eps)).ln()) / (2.0 * h);
        prop_assert!(0.5 * d.abs() <= 1.0, "{}", d);
    }

    #[test]
    fn sym_power_determinant_is_one(l in 1usize..=4, eps in 0.0f64..0.5) {
        let g = GridDomain::annulus(0.2, 0.8, 8).unwrap();
        let m = sym_power_model(l, eps, &g).unwrap();
        for h in m.metric.nodes() {
            prop_assert!((h.det().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn model_bundles_are_flat(seed in any::<u64>(), lam in 0usize..3) {
        let mut rng = rng(seed);
        let lambda = [CQ::new(qi(0), qi(0)), CQ::new(qi(1), qi(0)), CQ::new(qi(0), qi(2))][lam].clone();
        let n_blocks = rng.gen_range(1..=3);
        let blocks: Vec<ModelBlock> = (0..n_blocks)
            .map(|_| {
                let irr = if rng.gen_bool(0.5) { vec![] } else { vec![small_cq(&mut rng) + CQ::new(qi(1), qi(0))] };
                ModelBlock::new(irr, weight_in_window(&mut rng, &qi(0), 12), small_cq(&mut rng), { let d = rng.gen_range(1..=3); partition(&mut rng, d) }).unwrap()
            })
            .collect();
        let sup = |n| {
            let g = GridDomain::annulus(0.3, 0.9, n).unwrap();
            let (_, conn) = build_model_bundle(&blocks, lambda.clone(), 1, &g).unwrap();
            flatness_residual(&conn, &g).unwrap().sup
        };
        let (a, b) = (sup(16), sup(32));
        let scale = 1.0 + blocks.iter().map(|b| b.irregular.len()).sum::<usize>() as f64;
        prop_assert!(b <= 1e-12 * scale || b < a / 3.0, "{} -> {}", a, b);
    }

    #[test]
    fn family_metric_realizes_perturbed_weights(seed in any::<u64>(), k in 0i64..=2) {
        let mut rng = rng(seed);
        let blocks: Vec<ModelBlock> = (0..rng.gen_range(1..=2))
            .map(|_| ModelBlock::new(vec![], weight_in_window(&mut rng, &qi(0), 12), cq_zero(), { let d = rng.gen_range(1..=2); partition(&mut rng, d) }).unwrap())
            .collect();
        let rank: usize = blocks.iter().map(|b| b.dim()).sum();
        let eps = Q::new(k.into(), (40 * rank as i64).into());
        let g = GridDomain::annulus(1e-24, 1e-12, 32).unwrap();
        let fam = model_family_metric(&blocks, &eps, &qi(1), &g).unwrap();
        let est = estimate_growth_weights(&fam.metric, &g).unwrap();
        for (e, w) in est.iter().zip(&fam.frame_weights) {
            prop_assert!((e - to_f64(w)).abs() < 0.02, "{} vs {}", e, w);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn flow_preserves_determinant(seed in any::<u64>(), amp in 0.05f64..0.3) {
        let g = GridDomain::annulus(0.1, 0.5, 16).unwrap().with_flat_chart_metric();
        let m = sym_power_model(2, 0.0, &g).unwrap();
        let h0 = perturb_metric(&m.metric, &smooth_tracefree(&g, amp, (seed % 7) as f64));
        let r = heat_flow(&m.higgs, &h0, &g, &FlowParams { max_steps: 30, ..FlowParams::default() }).unwrap();
        prop_assert!(!r.det_corrected);
        for (a, b) in r.state.h.nodes().iter().zip(h0.nodes()) {
            prop_assert!((a.det().re - b.det().re).abs() < 1e-10);
        }
    }

    #[test]
    fn rank_one_flow_residual_decreases(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let g = GridDomain::torus(2.0 * PI, 2.0 * PI, 16).unwrap();
        let h0 = random_metric(&mut rng, &g, 1);
        let r = heat_flow(&ConnectionField::trivial(C64::new(0.0, 0.0), 1, g.len()), &h0, &g, &FlowParams::default()).unwrap();
        prop_assert!(r.converged);
        prop_assert!(r.trajectory.windows(2).all(|w| w[1].residual < w[0].residual));
    }

    #[test]
    fn kahler_eps_keeps_torus_volume(eps in 0.0f64..0.1, n in 11u32..=20, c in 0.1f64..10.0) {
        let g = GridDomain::torus(1.0, 2.0, 16).unwrap();
        prop_assert_eq!(kahler_eps(&g, eps, n, c).unwrap().apply(&g).unwrap().volume(), g.volume());
    }
}
