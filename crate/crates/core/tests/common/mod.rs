//! Shared generators for integration tests.
#![allow(dead_code)]

use num_complex::Complex64 as C64;
use parh_core::field::MetricField;
use parh_core::filtered::{ComponentPairings, ComponentSpec, Crossing, FilteredSpec, IntersectionData, ModelBlock};
use parh_core::grid::GridDomain;
use parh_core::linalg::{CMat, MetricFactors};
use parh_core::rational::{in_window, is_integer, q, qi, CQ, Q};
use parh_core::weights::{PsiMap, ResidueDatum, WeightSet};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// Rational in `(anchor − 1, anchor]` with denominator at most `max_den`.
pub fn weight_in_window(rng: &mut ChaCha8Rng, anchor: &Q, max_den: i64) -> Q {
    let d = rng.gen_range(1..=max_den);
    let n = rng.gen_range(0..d);
    anchor - q(n, d)
}

pub fn small_cq(rng: &mut ChaCha8Rng) -> CQ {
    CQ::new(q(rng.gen_range(-6..=6), rng.gen_range(1..=6)), q(rng.gen_range(-6..=6), rng.gen_range(1..=6)))
}

/// Random partition of `n`.
pub fn partition(rng: &mut ChaCha8Rng, mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    while n > 0 {
        let s = rng.gen_range(1..=n);
        out.push(s);
        n -= s;
    }
    out.sort_unstable_by(|a, b| b.cmp(a));
    out
}

/// Distinct weights with multiplicities summing to `rank`.
pub fn weight_entries(rng: &mut ChaCha8Rng, rank: usize, anchor: &Q, max_den: i64) -> Vec<(Q, usize)> {
    let mut mult: BTreeMap<Q, usize> = BTreeMap::new();
    for _ in 0..rank {
        let w = if !mult.is_empty() && rng.gen_bool(0.3) {
            mult.keys().cloned().collect::<Vec<_>>().choose(rng).cloned().expect("non-empty")
        } else {
            weight_in_window(rng, anchor, max_den)
        };
        *mult.entry(w).or_default() += 1;
    }
    mult.into_iter().collect()
}

/// Random weight set with anchor 0 and one residue datum per weight.
pub fn weight_set_with_residues(rng: &mut ChaCha8Rng, rank: usize, max_den: i64) -> (WeightSet, Vec<ResidueDatum>) {
    let entries = weight_entries(rng, rank, &qi(0), max_den);
    let res = entries
        .iter()
        .map(|(w, m)| ResidueDatum::new(w.clone(), small_cq(rng), partition(rng, *m)).expect("valid datum"))
        .collect();
    (WeightSet::with_anchor_zero("H0", entries).expect("valid weights"), res)
}

/// Random ungraded spec, optionally carrying blocks on component 0.
pub fn random_spec(rng: &mut ChaCha8Rng) -> FilteredSpec {
    let rank = rng.gen_range(1..=4);
    let n_comp = rng.gen_range(1..=2);
    let lambda = [CQ::new(qi(0), qi(0)), CQ::new(qi(1), qi(0)), CQ::new(q(1, 2), q(1, 3))].choose(rng).cloned().expect("non-empty");
    let mut comps = Vec::new();
    let mut blocks = Vec::new();
    for c in 0..n_comp {
        let anchor = if rng.gen_bool(0.5) { qi(0) } else { q(rng.gen_range(-3..=3), rng.gen_range(1..=4)) };
        let entries = weight_entries(rng, rank, &anchor, 12);
        let mut res = Vec::new();
        for (w, m) in &entries {
            let mut left = *m;
            while left > 0 {
                let d = rng.gen_range(1..=left);
                left -= d;
                let datum = ResidueDatum::new(w.clone(), small_cq(rng), partition(rng, d)).expect("valid datum");
                if c == 0 {
                    let irregular = match rng.gen_range(0..3) {
                        0 => Vec::new(),
                        1 => vec![small_cq(rng) + CQ::new(qi(7), qi(0))],
                        _ => vec![small_cq(rng), CQ::new(qi(1), qi(1))],
                    };
                    blocks.push(ModelBlock::new(irregular, w.clone(), datum.eigenvalue.clone(), datum.jordan_type.clone()).expect("valid block"));
                }
                res.push(datum);
            }
        }
        let ws = WeightSet::new(format!("H{c}"), entries, anchor).expect("valid weights");
        comps.push(ComponentSpec::new(ws, res, None).expect("valid component"));
    }
    if rng.gen_bool(0.3) {
        blocks.clear();
    }
    FilteredSpec::new("random", rank, lambda, comps, blocks).expect("valid spec")
}

/// Rank-1 surface spec with intersection data of an honest line bundle.
pub fn rank1_surface(rng: &mut ChaCha8Rng) -> (FilteredSpec, IntersectionData) {
    let n_comp = rng.gen_range(1..=3);
    let mut comps = Vec::new();
    let mut pairings = Vec::new();
    let mut weights = Vec::new();
    for c in 0..n_comp {
        let w = weight_in_window(rng, &qi(0), 24);
        weights.push(w.clone());
        let ws = WeightSet::with_anchor_zero(format!("H{c}"), [(w.clone(), 1)]).expect("valid weights");
        comps.push(ComponentSpec::semisimple(ws));
        let c1h = q(rng.gen_range(-9..=9), rng.gen_range(1..=4));
        // Gr_b of a line bundle is its restriction, so the Gysin term is c1·H_i.
        pairings.push(ComponentPairings {
            label: format!("H{c}"),
            hil: q(rng.gen_range(1..=9), rng.gen_range(1..=3)),
            hihil: Some(q(rng.gen_range(-5..=5), rng.gen_range(1..=3))),
            c1_hi_lattice: Some(c1h.clone()),
            gysin: [(w, c1h)].into_iter().collect(),
        });
    }
    let mut crossings = Vec::new();
    for i in 0..n_comp {
        for j in i + 1..n_comp {
            if rng.gen_bool(0.7) {
                crossings.push(Crossing { i, j, cl: qi(rng.gen_range(1..=3)), ranks: vec![(weights[i].clone(), weights[j].clone(), 1)] });
            }
        }
    }
    let c1sq = q(rng.gen_range(-12..=12), rng.gen_range(1..=4));
    let ix = IntersectionData {
        dim_x: 2,
        deg_l_lattice: q(rng.gen_range(-9..=9), rng.gen_range(1..=4)),
        ch2_lattice: Some(&c1sq / qi(2)),
        c1sq_lattice: Some(c1sq),
        components: pairings,
        crossings,
        block_lattice_degrees: None,
    };
    let spec = FilteredSpec::new("line", 1, CQ::new(qi(0), qi(0)), comps, Vec::new()).expect("valid spec");
    (spec, ix)
}

/// Random Hermitian matrix with entries in `[-1, 1]`.
pub fn random_herm(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    CMat::from_fn(n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).hermitian_part()
}

/// Smooth trace-free Hermitian field `Y` vanishing on annulus boundary layers, with `sup |Y| = amp`.
pub fn smooth_tracefree(g: &GridDomain, amp: f64, phase: f64) -> Vec<CMat> {
    let n = g.nx() as f64 - 1.0;
    let raw: Vec<CMat> = (0..g.len())
        .map(|k| {
            let (i, j) = g.ij(k);
            let bump = if g.is_annulus() { (std::f64::consts::PI * i as f64 / n).sin() } else { 1.0 };
            let y = g.y(j) + phase;
            let x = g.x(i);
            let m = CMat::from_rows(&[
                C64::new(y.cos() + 0.3 * (3.0 * x).sin(), 0.0),
                C64::from_polar(0.6, y + x),
                C64::from_polar(0.6, -(y + x)),
                C64::new(-(y.cos() + 0.3 * (3.0 * x).sin()), 0.0),
            ]);
            m.scale_re(bump)
        })
        .collect();
    let sup = raw.iter().map(|m| m.norm()).fold(0.0, f64::max);
    raw.into_iter().map(|m| m.scale_re(amp / sup)).collect()
}

/// `H^{1/2} e^{Y} H^{1/2}` nodewise.
pub fn perturb_metric(h: &MetricField, y: &[CMat]) -> MetricField {
    MetricField::from_fn(h.rank(), h.len(), |k| {
        let f = MetricFactors::new(&h.nodes()[k]).expect("positive metric");
        (&(&f.sqrt * &y[k].herm_fn(f64::exp)) * &f.sqrt).hermitian_part()
    })
    .expect("positive metric")
}

/// `max_k ‖log(H_a⁻¹ H_b)‖`.
pub fn log_distance(a: &MetricField, b: &MetricField) -> f64 {
    a.factors().expect("positive metric").iter().zip(b.nodes()).map(|(f, m)| f.log_ratio(m).norm()).fold(0.0, f64::max)
}

/// Random ψ satisfying the offset constraints, or `None` when every try leaves the window.
pub fn random_valid_psi(rng: &mut ChaCha8Rng, w: &WeightSet, eps: &Q, e: u64) -> Option<PsiMap> {
    let ws: Vec<Q> = w.entries().iter().map(|x| x.weight.clone()).collect();
    let ei = qi(e as i64);
    'attempt: for _ in 0..20 {
        let mut psi = PsiMap::new();
        for b in &ws {
            let shared = psi.iter().find(|(c, _)| is_integer(&((b - *c) * &ei))).map(|(c, pc)| pc - c);
            let off = shared.unwrap_or_else(|| eps * q(rng.gen_range(-19..=19), 10));
            psi.insert(b.clone(), b + off);
        }
        // Widest filtration spread is rank − 1 in units of ε.
        let spread = eps * qi(w.rank() as i64 - 1);
        for pb in psi.values() {
            if !(in_window(&(pb + &spread), w.window_anchor()) && in_window(&(pb - &spread), w.window_anchor())) {
                continue 'attempt;
            }
        }
        return Some(psi);
    }
    None
}
