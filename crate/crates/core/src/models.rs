//! Explicitly solvable models: `L_ε`, the rank-2 harmonic model, symmetric
//! powers, model filtered λ-flat bundles and their ε-families of metrics.
//!
//! All fields live on log-polar annulus grids, so `dz/z = dw` and the model
//! Higgs fields have constant coefficients.

use crate::field::{ConnectionField, FieldError, MatField, MetricField};
use crate::filtered::{ComponentSpec, FilteredError, FilteredSpec, Grading, ModelBlock};
use crate::grid::GridDomain;
use crate::lambda_ops::{curvature_coefficient, OpsError};
use crate::linalg::CMat;
use crate::rational::{cq_to_c64, cq_zero, fmt_q, qi, to_f64, Q, CQ};
use crate::weights::{lattice_point_below, ResidueDatum, WeightSet};
use num_complex::Complex64 as C64;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Errors raised by the model constructors.
#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    #[error("epsilon {eps} exceeds eta/(10 rank) = {bound}")]
    EpsilonTooLarge { eps: String, bound: String },
    #[error("decay hypothesis violated at node {node}: {reason}")]
    HypothesisViolated { node: usize, reason: String },
    #[error("invalid model data: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Filtered(#[from] FilteredError),
    #[error(transparent)]
    Ops(#[from] OpsError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

impl ModelError {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelError::OutOfDomain(_) => "out-of-domain",
            ModelError::EpsilonTooLarge { .. } => "epsilon-too-large",
            ModelError::HypothesisViolated { .. } => "hypothesis-violated",
            ModelError::InvalidModel(_) => "invalid-model",
            ModelError::Filtered(e) => e.kind(),
            ModelError::Ops(e) => e.kind(),
            ModelError::Field(e) => e.kind(),
        }
    }
}

/// Below this `ε` the series branch of `L_ε` is used.
pub const L_EPS_SERIES_CUTOFF: f64 = 1e-8;

/// `L_ε(z) = ε⁻¹(|z|^{−ε} − |z|^{ε})`, with `L_0 = −log|z|²`.
pub fn l_eps(z_abs: f64, eps: f64) -> Result<f64, ModelError> {
    if !(z_abs > 0.0 && z_abs < 1.0) {
        return Err(ModelError::OutOfDomain(format!("|z| = {z_abs} is not in (0, 1)")));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(ModelError::OutOfDomain(format!("epsilon = {eps} must be finite and non-negative")));
    }
    Ok(l_eps_log(z_abs.ln(), eps))
}

/// `L_ε` as a function of `s = log|z| < 0`: `−2 sinh(εs)/ε`.
pub fn l_eps_log(s: f64, eps: f64) -> f64 {
    if eps < L_EPS_SERIES_CUTOFF {
        let u = (eps * s) * (eps * s);
        -2.0 * s * (1.0 + u / 6.0 * (1.0 + u / 20.0 * (1.0 + u / 42.0)))
    } else {
        -2.0 * (eps * s).sinh() / eps
    }
}

/// Normalized lowering operator on `Sym^{ℓ−1}`: `v_k ↦ √((k+1)(ℓ−1−k)) v_{k+1}`.
///
/// With these entries `diag(L^{ℓ−1−2k})` solves the Hitchin equation.
pub fn sl2_lowering(l: usize) -> CMat {
    let mut m = CMat::zeros(l);
    for k in 0..l.saturating_sub(1) {
        m[(k + 1, k)] = C64::new((((k + 1) * (l - 1 - k)) as f64).sqrt(), 0.0);
    }
    m
}

/// One `Sym^{ℓ−1}` summand twisted by `|z|^{−2a}`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SymPiece {
    l: usize,
    a: f64,
}

/// Block-diagonal metric `⊕ |z|^{−2a}·diag(L^{ℓ−1−2k})` with `L = L_{eps}`.
fn sym_metric(pieces: &[SymPiece], eps: f64, g: &GridDomain) -> MetricField {
    let rank: usize = pieces.iter().map(|p| p.l).sum();
    let data = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let s = g.x(g.ij(k).0);
            let log_l = l_eps_log(s, eps).ln();
            let mut diag = Vec::with_capacity(rank);
            for p in pieces {
                for j in 0..p.l {
                    let pow = (p.l - 1) as f64 - 2.0 * j as f64;
                    diag.push((-2.0 * p.a * s + pow * log_l).exp());
                }
            }
            CMat::from_diag(&diag)
        })
        .collect();
    MetricField::new(MatField::new(rank, data).expect("ranks agree")).expect("diagonal positive metric")
}

fn check_unit_annulus(g: &GridDomain) -> Result<(), ModelError> {
    if !g.is_annulus() {
        return Err(ModelError::OutOfDomain("model metrics need an annulus grid".into()));
    }
    let outer = g.x(g.nx() - 1);
    if outer >= 0.0 {
        return Err(ModelError::OutOfDomain(format!(
            "grid reaches |z| = {} but must stay inside the unit disc",
            outer.exp()
        )));
    }
    Ok(())
}

/// Harmonic model `(E, ∂̄, θ, h^{(ε)})` on an annulus.
#[derive(Debug, Clone)]
pub struct ModelHarmonicBundle {
    pub rank: usize,
    pub eps: f64,
    /// Higgs data at `λ = 0`; `a10` holds `Θ` as a `dz/z` coefficient.
    pub higgs: ConnectionField,
    pub metric: MetricField,
    /// Filtered bundle the `ε = 0` metric prolongs to.
    pub spec: FilteredSpec,
    pieces: Vec<SymPiece>,
}

impl ModelHarmonicBundle {
    /// Metric of the family at another `ε`.
    pub fn metric_at(&self, eps: f64, g: &GridDomain) -> Result<MetricField, ModelError> {
        check_unit_annulus(g)?;
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(ModelError::OutOfDomain(format!("epsilon = {eps} must be non-negative")));
        }
        Ok(sym_metric(&self.pieces, eps, g))
    }

    /// Growth weights of the frame vectors under `h^{(ε)}`: `|v_j| ~ |z|^{−b_j}`.
    pub fn frame_weights(&self) -> Vec<f64> {
        self.pieces
            .iter()
            .flat_map(|p| (0..p.l).map(move |k| p.a + 0.5 * self.eps * ((p.l - 1) as f64 - 2.0 * k as f64)))
            .collect()
    }
}

fn nilpotent_spec(l: usize) -> Result<FilteredSpec, ModelError> {
    let w = WeightSet::with_anchor_zero("0", [(Q::zero(), l)]).map_err(FilteredError::from)?;
    let res = vec![ResidueDatum::new(Q::zero(), cq_zero(), vec![l]).map_err(FilteredError::from)?];
    let comp = ComponentSpec::new(w, res, None)?;
    let block = ModelBlock::new(Vec::new(), Q::zero(), cq_zero(), vec![l])?;
    Ok(FilteredSpec::new(format!("sym{}", l - 1), l, cq_zero(), vec![comp], vec![block])?)
}

/// `Sym^{ℓ−1}` of the rank-2 model: metric `diag(L_ε^{ℓ−1−2k})` in the monomial
/// frame, `Θ` the normalized lowering operator.
pub fn sym_power_model(l: usize, eps: f64, g: &GridDomain) -> Result<ModelHarmonicBundle, ModelError> {
    if l == 0 {
        return Err(ModelError::InvalidModel("symmetric power index must be at least 1".into()));
    }
    check_unit_annulus(g)?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(ModelError::OutOfDomain(format!("epsilon = {eps} must be non-negative")));
    }
    let pieces = vec![SymPiece { l, a: 0.0 }];
    let theta = sl2_lowering(l);
    let higgs = ConnectionField::higgs(MatField::zeros(l, g.len()), MatField::from_fn(l, g.len(), |_| theta.clone()))?;
    Ok(ModelHarmonicBundle { rank: l, eps, higgs, metric: sym_metric(&pieces, eps, g), spec: nilpotent_spec(l)?, pieces })
}

/// Rank-2 model: `H = diag(L_ε, L_ε⁻¹)`, `Θ = E₂₁·dz/z`.
pub fn rank2_model_metric(eps: f64, g: &GridDomain) -> Result<ModelHarmonicBundle, ModelError> {
    sym_power_model(2, eps, g)
}

/// Frame layout of a block list: for each frame vector, its block and Sym piece.
fn frame_pieces(blocks: &[ModelBlock]) -> Vec<(usize, usize)> {
    blocks
        .iter()
        .enumerate()
        .flat_map(|(b, blk)| blk.jordan_type.iter().map(move |&l| (b, l)))
        .collect()
}

/// Assembles `𝔇^λ(v) = d𝔞·v + (αv + f(v))dζ/ζ` blockwise on the covering chart.
///
/// The grid coordinate is `ζ`; `f` uses the normalized lowering operators.
/// The returned spec lists the blocks in frame order, graded by the block
/// characters when `e > 1`.
pub fn build_model_bundle(
    blocks: &[ModelBlock],
    lambda: CQ,
    e: u64,
    g: &GridDomain,
) -> Result<(FilteredSpec, ConnectionField), ModelError> {
    if blocks.is_empty() {
        return Err(ModelError::InvalidModel("at least one block is required".into()));
    }
    if e == 0 {
        return Err(ModelError::InvalidModel("covering degree must be positive".into()));
    }
    if !g.is_annulus() {
        return Err(ModelError::OutOfDomain("model bundles need an annulus grid".into()));
    }
    let rank: usize = blocks.iter().map(ModelBlock::dim).sum();
    let mut mult: BTreeMap<Q, usize> = BTreeMap::new();
    let mut residues = Vec::new();
    let mut chars = Vec::new();
    for b in blocks {
        if b.character.is_some_and(|c| c >= e) {
            return Err(ModelError::InvalidModel(format!("block character not below covering degree {e}")));
        }
        *mult.entry(b.weight.clone()).or_default() += b.dim();
        residues.push(ResidueDatum::new(b.weight.clone(), b.eigenvalue.clone(), b.jordan_type.clone()).map_err(FilteredError::from)?);
        chars.push(b.character.unwrap_or(0));
    }
    let w = WeightSet::with_anchor_zero("0", mult).map_err(FilteredError::from)?;
    let grading = (e > 1).then_some(Grading { degree: e, characters: chars });
    let comp = ComponentSpec::new(w, residues, grading)?;
    let spec = FilteredSpec::new("model", rank, lambda.clone(), vec![comp], blocks.to_vec())?;
    let lam = cq_to_c64(&lambda);
    let frame = &spec.blocks;
    let a10 = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let w = g.w(k);
            let mut m = CMat::zeros(rank);
            let mut off = 0;
            for b in frame {
                // ζ·d𝔞/dζ for 𝔞 = Σ c_j ζ^{−j}
                let da: C64 = b.irregular.iter().enumerate().map(|(j, c)| -((j + 1) as f64) * cq_to_c64(c) * (-(j as f64 + 1.0) * w).exp()).sum();
                let diag = da + cq_to_c64(&b.eigenvalue);
                for &l in &b.jordan_type {
                    let n = sl2_lowering(l);
                    for r in 0..l {
                        m[(off + r, off + r)] = diag;
                        for c in 0..l {
                            m[(off + r, off + c)] += n[(r, c)];
                        }
                    }
                    off += l;
                }
            }
            m
        })
        .collect();
    let conn = ConnectionField::new(lam, MatField::zeros(rank, g.len()), MatField::new(rank, a10)?)?;
    Ok((spec, conn))
}

/// `h^{(ε)}` of a block family together with the weights it realizes.
#[derive(Debug, Clone)]
pub struct FamilyMetric {
    pub eps: Q,
    pub metric: MetricField,
    /// `b_j` with `|v_j|_{h^{(ε)}} ~ |z|^{−b_j}`, in frame order.
    pub frame_weights: Vec<Q>,
    /// Block index of each frame vector.
    pub frame_blocks: Vec<usize>,
}

/// `a(ε)`: the largest point of `εℤ` strictly below `a`, or `a` itself at `ε = 0`.
pub fn shifted_weight(a: &Q, eps: &Q) -> Q {
    if eps.is_zero() {
        a.clone()
    } else {
        lattice_point_below(a, eps)
    }
}

/// `⊕ |z|^{−2a(ε)}·diag(L_{2ε}^{ℓ−1−2k})` over the blocks and their Jordan pieces.
///
/// Frame vector `k` of a size-`ℓ` piece then has weight `a(ε) + (ℓ−1−2k)ε`,
/// the ε-perturbation of the weight filtration.
pub fn model_family_metric(blocks: &[ModelBlock], eps: &Q, eta: &Q, g: &GridDomain) -> Result<FamilyMetric, ModelError> {
    check_unit_annulus(g)?;
    if !(eta.is_positive() && eta <= &qi(1)) {
        return Err(ModelError::InvalidModel(format!("eta = {} must lie in (0, 1]", fmt_q(eta))));
    }
    let rank: usize = blocks.iter().map(ModelBlock::dim).sum();
    let bound = eta / qi(10 * rank as i64);
    if eps.is_negative() || eps > &bound {
        return Err(ModelError::EpsilonTooLarge { eps: fmt_q(eps), bound: fmt_q(&bound) });
    }
    let mut pieces = Vec::new();
    let mut frame_weights = Vec::new();
    let mut frame_blocks = Vec::new();
    for (b, l) in frame_pieces(blocks) {
        let a = shifted_weight(&blocks[b].weight, eps);
        for k in 0..l {
            frame_weights.push(&a + eps * qi(l as i64 - 1 - 2 * k as i64));
            frame_blocks.push(b);
        }
        pieces.push(SymPiece { l, a: to_f64(&a) });
    }
    let metric = sym_metric(&pieces, 2.0 * to_f64(eps), g);
    Ok(FamilyMetric { eps: eps.clone(), metric, frame_weights, frame_blocks })
}

/// Conformal factor of `g_ε = (η²|z|^{2η−2} + ε²|z|^{2ε−2})dz dz̄` in the `w = log z` chart.
pub fn g_eps_weight(eta: f64, eps: f64, g: &GridDomain) -> Vec<f64> {
    (0..g.len())
        .map(|k| {
            let s = g.x(g.ij(k).0);
            eta * eta * (2.0 * eta * s).exp() + eps * eps * (2.0 * eps * s).exp()
        })
        .collect()
}

/// Least-squares growth weights of the frame vectors along radii.
///
/// Fits `log|v_j|_h` (averaged over angle) against `log|z|` over the inner half
/// of the evaluation columns and returns minus the slope.
pub fn estimate_growth_weights(h: &MetricField, g: &GridDomain) -> Result<Vec<f64>, ModelError> {
    if !g.is_annulus() {
        return Err(ModelError::OutOfDomain("growth rates need an annulus grid".into()));
    }
    h.check_grid(g)?;
    let cols: Vec<usize> = (1..=g.resolution() / 2).collect();
    let xs: Vec<f64> = cols.iter().map(|&i| g.x(i)).collect();
    let xm = xs.iter().sum::<f64>() / xs.len() as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    Ok((0..h.rank())
        .map(|r| {
            let ys: Vec<f64> = cols
                .iter()
                .map(|&i| (0..g.ny()).map(|j| 0.5 * h.nodes()[g.idx(i, j)][(r, r)].re.ln()).sum::<f64>() / g.ny() as f64)
                .collect();
            let ym = ys.iter().sum::<f64>() / ys.len() as f64;
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
            -sxy / sxx
        })
        .collect())
}

/// Parameters of the decay hypothesis on the perturbation `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayHypothesis {
    pub eta: Q,
    /// Pole order bound `m`.
    pub m: u32,
    /// Constant `C`.
    pub c: f64,
}

/// Sup-norms of `G(h^{(ε)})` in the `g_ε` metric across `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureBoundTable {
    pub rows: Vec<(Q, f64)>,
    /// `max/min` of the sup-norms.
    pub spread: f64,
    /// Set when the sup-norms increase with `ε` and the spread reaches `3`.
    pub grows_with_eps: bool,
}

/// Spread at which a sweep is flagged as not uniformly bounded.
pub const UNIFORM_BOUND_SPREAD: f64 = 3.0;

/// Checks the decay hypothesis on `A` against `h^{(0)}`, then tabulates
/// `sup |G(h^{(ε)})|_{g_ε, h^{(ε)}}` for `𝔇 = model + A dz/z`.
pub fn curvature_bound_check(
    blocks: &[ModelBlock],
    lambda: CQ,
    perturbation: &MatField,
    eps_list: &[Q],
    hyp: &DecayHypothesis,
    g: &GridDomain,
) -> Result<CurvatureBoundTable, ModelError> {
    if eps_list.is_empty() {
        return Err(ModelError::InvalidModel("epsilon list is empty".into()));
    }
    let (spec, conn) = build_model_bundle(blocks, lambda, 1, g)?;
    let blocks = &spec.blocks;
    if perturbation.rank() != conn.rank() || perturbation.len() != g.len() {
        return Err(FieldError::RankMismatch { rank: conn.rank() }.into());
    }
    let h0 = model_family_metric(blocks, &Q::zero(), &hyp.eta, g)?;
    check_decay(blocks, &h0, perturbation, hyp, g)?;
    let mut a10 = conn.a10.clone();
    for (m, p) in a10.nodes_mut().iter_mut().zip(perturbation.nodes()) {
        *m += p;
    }
    let conn = ConnectionField::new(conn.lambda, conn.a01.clone(), a10)?;
    let eta = to_f64(&hyp.eta);
    let mut rows = Vec::with_capacity(eps_list.len());
    for eps in eps_list {
        let fam = model_family_metric(blocks, eps, &hyp.eta, g)?;
        let k = curvature_coefficient(&conn, &fam.metric, g)?;
        let rho = g_eps_weight(eta, to_f64(eps), g);
        let sup = g
            .interior()
            .map(|n| {
                let h = &fam.metric.nodes()[n];
                let hinv = h.inverse().expect("metric is invertible");
                2.0 / rho[n] * k.nodes()[n].h_norm_sqr(h, &hinv).sqrt()
            })
            .fold(0.0, f64::max);
        rows.push((eps.clone(), sup));
    }
    let max = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let min = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let spread = if max == 0.0 { 1.0 } else { max / min };
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let increasing = sorted.windows(2).all(|w| w[1].1 >= w[0].1);
    Ok(CurvatureBoundTable { rows, spread, grows_with_eps: increasing && spread >= UNIFORM_BOUND_SPREAD })
}

/// `|A_{ji}|_{h⁰} ≤ C|z|^{10m}` across distinct irregular values, `≤ C|z|^{4η}` within one.
fn check_decay(blocks: &[ModelBlock], h0: &FamilyMetric, a: &MatField, hyp: &DecayHypothesis, g: &GridDomain) -> Result<(), ModelError> {
    let fb = &h0.frame_blocks;
    let eta = to_f64(&hyp.eta);
    let n_blocks = blocks.len();
    for k in g.interior() {
        let r = g.x(g.ij(k).0).exp();
        let h = &h0.metric.nodes()[k];
        for bi in 0..n_blocks {
            for bj in 0..n_blocks {
                let piece = CMat::from_fn(a.rank(), |row, col| {
                    if fb[row] == bj && fb[col] == bi {
                        a.nodes()[k][(row, col)]
                    } else {
                        C64::new(0.0, 0.0)
                    }
                });
                let norm = piece.h_norm_sqr(h, &h.inverse().expect("invertible")).sqrt();
                let same = blocks[bi].irregular == blocks[bj].irregular;
                let bound = if same { hyp.c * r.powf(4.0 * eta) } else { hyp.c * r.powi(10 * hyp.m as i32) };
                if norm > bound * (1.0 + 1e-9) {
                    return Err(ModelError::HypothesisViolated {
                        node: k,
                        reason: format!("block ({bj}, {bi}) has norm {norm:e} above {bound:e}"),
                    });
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lambda_ops::hitchin_residual;
    use crate::rational::q;

    #[test]
    fn l_eps_values() {
        assert!((l_eps(0.5, 0.5).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!((l_eps(0.5, 0.0).unwrap() - 4f64.ln()).abs() < 1e-12);
        let upper = 0.5f64.powf(-0.5) * 4f64.ln();
        assert!((upper - 1.96051).abs() < 1e-5);
        assert_eq!(l_eps(1.0, 0.1).unwrap_err().kind(), "out-of-domain");
        assert_eq!(l_eps(0.0, 0.1).unwrap_err().kind(), "out-of-domain");
    }

    #[test]
    fn l_eps_continuous_across_series_cutoff() {
        let s = 0.3f64.ln();
        let below = l_eps_log(s, 0.999e-8);
        let above = l_eps_log(s, 1.001e-8);
        assert!((below - above).abs() < 1e-12);
    }

    #[test]
    fn rank2_metric_has_unit_determinant() {
        let g = GridDomain::annulus(0.2, 0.8, 16).unwrap();
        let m = rank2_model_metric(0.3, &g).unwrap();
        for h in m.metric.nodes() {
            assert!((h.det().re - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn theta_bracket_matches_closed_form() {
        let g = GridDomain::annulus(0.2, 0.8, 16).unwrap();
        let m = rank2_model_metric(0.1, &g).unwrap();
        let k = g.idx(5, 3);
        let h = &m.metric.nodes()[k];
        let th = &m.higgs.a10.nodes()[k];
        let ts = th.h_adjoint(h, &h.inverse().unwrap());
        let br = CMat::commutator(th, &ts);
        let l = l_eps(g.abs_z(k).unwrap(), 0.1).unwrap();
        assert!((br[(0, 0)].re + 1.0 / (l * l)).abs() < 1e-12);
        assert!((br[(1, 1)].re - 1.0 / (l * l)).abs() < 1e-12);
    }

    #[test]
    fn sym2_matches_rank2_model() {
        let g = GridDomain::annulus(0.2, 0.8, 16).unwrap();
        let a = sym_power_model(2, 0.2, &g).unwrap();
        let b = rank2_model_metric(0.2, &g).unwrap();
        assert_eq!(a.metric.nodes(), b.metric.nodes());
        assert_eq!(a.higgs.a10.nodes(), b.higgs.a10.nodes());
    }

    #[test]
    fn sym3_is_harmonic_to_second_order() {
        let r = |n| {
            let g = GridDomain::annulus(0.2, 0.8, n).unwrap();
            let m = sym_power_model(3, 0.1, &g).unwrap();
            hitchin_residual(&m.higgs, &m.metric, &g).unwrap().sup
        };
        let (a, b) = (r(32), r(64));
        assert!(a / b > 3.0 && a / b < 5.0, "ratio {}", a / b);
    }

    #[test]
    fn model_block_coefficients() {
        let g = GridDomain::annulus(0.2, 0.8, 16).unwrap();
        let blk = ModelBlock::new(vec![], q(-1, 2), crate::rational::cq_real(q(1, 3)), vec![2]).unwrap();
        let (spec, conn) = build_model_bundle(&[blk], cq_zero(), 1, &g).unwrap();
        assert_eq!(spec.rank, 2);
        let a = &conn.a10.nodes()[7];
        assert!((a[(0, 0)].re - 1.0 / 3.0).abs() < 1e-15);
        assert!((a[(1, 0)].re - 1.0).abs() < 1e-15);
        assert_eq!(a[(0, 1)], C64::new(0.0, 0.0));
    }

    #[test]
    fn irregular_block_gains_derivative_term() {
        let g = GridDomain::annulus(0.2, 0.8, 16).unwrap();
        let blk = ModelBlock::new(vec![crate::rational::cq_real(qi(1))], Q::zero(), cq_zero(), vec![1]).unwrap();
        let (_, conn) = build_model_bundle(&[blk], cq_zero(), 1, &g).unwrap();
        for k in 0..g.len() {
            let zeta = g.z(k).unwrap();
            assert!((conn.a10.nodes()[k][(0, 0)] + 1.0 / zeta).norm() < 1e-12);
        }
    }

    #[test]
    fn family_epsilon_range_enforced() {
        let g = GridDomain::annulus(0.1, 0.5, 16).unwrap();
        let blk = ModelBlock::new(vec![], Q::zero(), cq_zero(), vec![2]).unwrap();
        let err = model_family_metric(&[blk], &q(1, 10), &q(1, 2), &g).unwrap_err();
        assert_eq!(err.kind(), "epsilon-too-large");
    }

    #[test]
    fn shifted_weight_is_close_below() {
        let a = q(-1, 3);
        let e = q(1, 20);
        let s = shifted_weight(&a, &e);
        assert!(s < a && &a - &s <= e);
        assert_eq!(shifted_weight(&a, &Q::zero()), a);
    }
}
