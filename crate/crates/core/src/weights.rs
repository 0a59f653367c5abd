//! Exact arithmetic on parabolic weight sets.
//!
//! Weights of one divisor component live in a half-open window `(a-1, a]`.
//! The operations here build the extended lattice `{c + m/e}`, measure its
//! gaps, pick generic weights, read off weight filtrations of nilpotent
//! residues, and perturb weights into a semisimple configuration.

use crate::rational::{ceil, cq_cmp, in_window, is_integer, q, qi, reduce_to_window, CQ, Q};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};

/// Errors raised by weight operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WeightError {
    #[error("invalid weight set: {0}")]
    InvalidWeightSet(String),
    #[error("invalid partition {0:?}: entries must be positive")]
    InvalidPartition(Vec<usize>),
    #[error("extended weight set has a single element; gap is degenerate (treat as 1)")]
    DegenerateGap,
    #[error("period e must be at least 1")]
    InvalidPeriod,
    #[error("epsilon must be positive")]
    NonPositiveEpsilon,
    #[error("perturbation out of range: 10*e^2*eps = {bound} is not below gap {gap}")]
    PerturbationOutOfRange { bound: String, gap: String },
    #[error("invalid psi at weight {weight}: {reason}")]
    InvalidPsi { weight: String, reason: String },
    #[error("residue data do not match the weight set: {0}")]
    ResidueMismatch(String),
}

impl WeightError {
    /// Machine-readable error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            WeightError::InvalidWeightSet(_) => "invalid-weight-set",
            WeightError::InvalidPartition(_) => "invalid-partition",
            WeightError::DegenerateGap => "degenerate-gap",
            WeightError::InvalidPeriod => "invalid-period",
            WeightError::NonPositiveEpsilon => "invalid-epsilon",
            WeightError::PerturbationOutOfRange { .. } => "perturbation-out-of-range",
            WeightError::InvalidPsi { .. } => "invalid-psi",
            WeightError::ResidueMismatch(_) => "residue-mismatch",
        }
    }
}

/// One weight together with its multiplicity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WeightEntry {
    pub weight: Q,
    pub multiplicity: usize,
}

/// Weights of one divisor component in the window `(a-1, a]`, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeightSet {
    component_id: String,
    entries: Vec<WeightEntry>,
    window_anchor: Q,
}

impl WeightSet {
    /// Validates window membership, distinctness and positive multiplicities.
    pub fn new(
        component_id: impl Into<String>,
        entries: impl IntoIterator<Item = (Q, usize)>,
        window_anchor: Q,
    ) -> Result<Self, WeightError> {
        let mut list: Vec<WeightEntry> = entries
            .into_iter()
            .map(|(weight, multiplicity)| WeightEntry { weight, multiplicity })
            .collect();
        list.sort();
        if list.is_empty() {
            return Err(WeightError::InvalidWeightSet("no weights".into()));
        }
        for w in list.windows(2) {
            if w[0].weight == w[1].weight {
                return Err(WeightError::InvalidWeightSet(format!(
                    "weight {} listed twice",
                    crate::rational::fmt_q(&w[0].weight)
                )));
            }
        }
        for e in &list {
            if e.multiplicity == 0 {
                return Err(WeightError::InvalidWeightSet(format!(
                    "multiplicity of weight {} must be positive",
                    crate::rational::fmt_q(&e.weight)
                )));
            }
            if !in_window(&e.weight, &window_anchor) {
                return Err(WeightError::InvalidWeightSet(format!(
                    "weight {} outside window ({}, {}]",
                    crate::rational::fmt_q(&e.weight),
                    crate::rational::fmt_q(&(&window_anchor - Q::one())),
                    crate::rational::fmt_q(&window_anchor)
                )));
            }
        }
        Ok(WeightSet { component_id: component_id.into(), entries: list, window_anchor })
    }

    /// Weight set with window anchor 0.
    pub fn with_anchor_zero(
        component_id: impl Into<String>,
        entries: impl IntoIterator<Item = (Q, usize)>,
    ) -> Result<Self, WeightError> {
        Self::new(component_id, entries, Q::zero())
    }

    pub fn component_id(&self) -> &str {
        &self.component_id
    }

    pub fn entries(&self) -> &[WeightEntry] {
        &self.entries
    }

    pub fn window_anchor(&self) -> &Q {
        &self.window_anchor
    }

    /// Sum of multiplicities.
    pub fn rank(&self) -> usize {
        self.entries.iter().map(|e| e.multiplicity).sum()
    }

    /// Multiplicity of `b`, zero when absent.
    pub fn multiplicity(&self, b: &Q) -> usize {
        self.entries.iter().find(|e| &e.weight == b).map_or(0, |e| e.multiplicity)
    }

    /// `Σ b·mult_b`.
    pub fn weighted_sum(&self) -> Q {
        self.entries.iter().map(|e| &e.weight * qi(e.multiplicity as i64)).sum()
    }
}

/// A Jordan type: block sizes of a nilpotent endomorphism, sorted descending.
pub type Partition = Vec<usize>;

/// Residue data at one weight: eigenvalue and Jordan type of the nilpotent part.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ResidueDatum {
    pub weight: Q,
    pub eigenvalue: CQ,
    pub jordan_type: Partition,
}

impl ResidueDatum {
    pub fn new(weight: Q, eigenvalue: CQ, jordan_type: Partition) -> Result<Self, WeightError> {
        let jordan_type = normalize_partition(jordan_type)?;
        Ok(ResidueDatum { weight, eigenvalue, jordan_type })
    }

    /// Dimension of the generalized eigenspace this datum describes.
    pub fn dim(&self) -> usize {
        self.jordan_type.iter().sum()
    }
}

/// Sorts a partition descending and rejects empty or zero parts.
pub fn normalize_partition(mut p: Partition) -> Result<Partition, WeightError> {
    if p.is_empty() || p.contains(&0) {
        return Err(WeightError::InvalidPartition(p));
    }
    p.sort_unstable_by(|a, b| b.cmp(a));
    Ok(p)
}

/// Checks that residue data exactly cover the multiplicities of `w`.
pub fn validate_residues(w: &WeightSet, residues: &[ResidueDatum]) -> Result<(), WeightError> {
    let mut dims: BTreeMap<&Q, usize> = BTreeMap::new();
    for r in residues {
        if r.jordan_type.is_empty() || r.jordan_type.contains(&0) {
            return Err(WeightError::InvalidPartition(r.jordan_type.clone()));
        }
        *dims.entry(&r.weight).or_default() += r.dim();
    }
    for (b, d) in &dims {
        let m = w.multiplicity(b);
        if m != *d {
            return Err(WeightError::ResidueMismatch(format!(
                "weight {} has multiplicity {} but residue data of total dimension {}",
                crate::rational::fmt_q(b),
                m,
                d
            )));
        }
    }
    for e in w.entries() {
        if !dims.contains_key(&e.weight) {
            return Err(WeightError::ResidueMismatch(format!(
                "weight {} has no residue data",
                crate::rational::fmt_q(&e.weight)
            )));
        }
    }
    Ok(())
}

/// The extended set `{c + m/e : c ∈ w, m ∈ ℤ}` reduced into the window of `w`.
pub fn tilde_par(w: &WeightSet, e: u64) -> Result<BTreeSet<Q>, WeightError> {
    if e == 0 {
        return Err(WeightError::InvalidPeriod);
    }
    let a = w.window_anchor();
    let step = q(1, e as i64);
    let low = a - Q::one();
    let mut out = BTreeSet::new();
    for entry in w.entries() {
        // Smallest representative strictly above the lower end of the window.
        let c = reduce_to_window(&entry.weight, a);
        let j = ceil(&((&c - &low) * qi(e as i64))) - BigInt::one();
        let mut v = &c - Q::from_integer(j) * &step;
        while &v <= a {
            out.insert(v.clone());
            v += &step;
        }
    }
    Ok(out)
}

/// Residues of the weights modulo `1/e`, sorted and deduplicated, in `[0, 1/e)`.
fn residues_mod(w: &WeightSet, e: u64) -> Vec<Q> {
    let ei = qi(e as i64);
    let mut r: Vec<Q> = w
        .entries()
        .iter()
        .map(|entry| {
            let scaled = &entry.weight * &ei;
            let frac = &scaled - Q::from_integer(crate::rational::floor(&scaled));
            frac / &ei
        })
        .collect();
    r.sort();
    r.dedup();
    r
}

/// Minimal cyclic spacing of [`tilde_par`]`(w, e)`.
///
/// Computed from the residues modulo `1/e`, so large `e` costs nothing extra.
pub fn gap(w: &WeightSet, e: u64) -> Result<Q, WeightError> {
    if e == 0 {
        return Err(WeightError::InvalidPeriod);
    }
    let period = q(1, e as i64);
    let r = residues_mod(w, e);
    if r.len() == 1 {
        return if e == 1 { Err(WeightError::DegenerateGap) } else { Ok(period) };
    }
    let mut best = &r[0] + &period - &r[r.len() - 1];
    for pair in r.windows(2) {
        let d = &pair[1] - &pair[0];
        if d < best {
            best = d;
        }
    }
    Ok(best)
}

/// Midpoint of the first maximal gap of [`tilde_par`]`(w, e)`.
///
/// Gaps are scanned in increasing order of their lower endpoint inside the
/// window; the wrap-around gap starts at the largest element and comes last.
/// The result keeps distance greater than `1/(4·e·rank)` from every element.
pub fn pick_generic_weight(w: &WeightSet, e: u64, rank: usize) -> Result<Q, WeightError> {
    if rank == 0 {
        return Err(WeightError::InvalidWeightSet("rank must be positive".into()));
    }
    let pts: Vec<Q> = tilde_par(w, e)?.into_iter().collect();
    let a = w.window_anchor();
    let n = pts.len();
    let mut best: Option<(Q, Q)> = None;
    for i in 0..n {
        let lo = &pts[i];
        let hi = if i + 1 < n { pts[i + 1].clone() } else { &pts[0] + Q::one() };
        let len = &hi - lo;
        if best.as_ref().is_none_or(|(l, _)| &len > l) {
            let mid = reduce_to_window(&((lo + &hi) / qi(2)), a);
            best = Some((len, mid));
        }
    }
    Ok(best.expect("tilde_par is never empty").1)
}

/// Dimensions of `Gr^W_k` for the weight filtration of a nilpotent with Jordan type `p`.
pub fn weight_filtration(p: &[usize]) -> Result<BTreeMap<i64, usize>, WeightError> {
    if p.is_empty() || p.contains(&0) {
        return Err(WeightError::InvalidPartition(p.to_vec()));
    }
    let mut out = BTreeMap::new();
    for &s in p {
        let s = s as i64;
        let mut k = -(s - 1);
        while k < s {
            *out.entry(k).or_default() += 1;
            k += 2;
        }
    }
    Ok(out)
}

/// Map from weights to their perturbed base points.
pub type PsiMap = BTreeMap<Q, Q>;

/// Options for [`perturb_weights_with`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerturbConfig {
    /// Ramification period `e`; `None` means `rank!`.
    pub period: Option<u64>,
    /// Enforce `10·e²·ε < gap(w, e)`.
    pub check_range: bool,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig { period: None, check_range: true }
    }
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).fold(1u64, |acc, k| acc.saturating_mul(k))
}

/// Perturbs `w` to `ψ(b) + εk` with multiplicity `dim Gr^W_k` of the residue at `b`.
///
/// Uses period `e = rank!` and enforces the range condition; see
/// [`perturb_weights_with`] for the configurable variant.
pub fn perturb_weights(
    w: &WeightSet,
    residues: &[ResidueDatum],
    eps: &Q,
    psi: &PsiMap,
) -> Result<(WeightSet, Vec<ResidueDatum>), WeightError> {
    perturb_weights_with(w, residues, eps, psi, &PerturbConfig::default())
}

/// [`perturb_weights`] with an explicit period and optional range check.
///
/// The returned residue data carry zero nilpotent parts.
pub fn perturb_weights_with(
    w: &WeightSet,
    residues: &[ResidueDatum],
    eps: &Q,
    psi: &PsiMap,
    cfg: &PerturbConfig,
) -> Result<(WeightSet, Vec<ResidueDatum>), WeightError> {
    if !eps.is_positive() {
        return Err(WeightError::NonPositiveEpsilon);
    }
    validate_residues(w, residues)?;
    let e = cfg.period.unwrap_or_else(|| factorial(w.rank()));
    if e == 0 {
        return Err(WeightError::InvalidPeriod);
    }
    let ei = qi(e as i64);
    if cfg.check_range {
        let g = match gap(w, e) {
            Ok(g) => g,
            Err(WeightError::DegenerateGap) => Q::one(),
            Err(err) => return Err(err),
        };
        let bound = qi(10) * &ei * &ei * eps;
        if bound >= g {
            return Err(WeightError::PerturbationOutOfRange {
                bound: crate::rational::fmt_q(&bound),
                gap: crate::rational::fmt_q(&g),
            });
        }
    }
    let two_eps = qi(2) * eps;
    for entry in w.entries() {
        let b = &entry.weight;
        let Some(pb) = psi.get(b) else {
            return Err(WeightError::InvalidPsi { weight: crate::rational::fmt_q(b), reason: "psi undefined".into() });
        };
        if (pb - b).abs() >= two_eps {
            return Err(WeightError::InvalidPsi {
                weight: crate::rational::fmt_q(b),
                reason: "|psi(b) - b| must be below 2*eps".into(),
            });
        }
    }
    let ws = w.entries();
    for (i, x) in ws.iter().enumerate() {
        for y in &ws[i + 1..] {
            if is_integer(&((&x.weight - &y.weight) * &ei))
                && (&psi[&x.weight] - &x.weight) != (&psi[&y.weight] - &y.weight)
            {
                return Err(WeightError::InvalidPsi {
                    weight: crate::rational::fmt_q(&x.weight),
                    reason: format!(
                        "offset differs from weight {} although e times their difference is an integer",
                        crate::rational::fmt_q(&y.weight)
                    ),
                });
            }
        }
    }
    let a = w.window_anchor();
    let mut mult: BTreeMap<Q, usize> = BTreeMap::new();
    let mut data: BTreeMap<(Q, CqKey), usize> = BTreeMap::new();
    for r in residues {
        let base = &psi[&r.weight];
        for (k, d) in weight_filtration(&r.jordan_type)? {
            let phi = base + eps * qi(k);
            if !in_window(&phi, a) {
                return Err(WeightError::InvalidPsi {
                    weight: crate::rational::fmt_q(&r.weight),
                    reason: format!("perturbed weight {} leaves the window", crate::rational::fmt_q(&phi)),
                });
            }
            *mult.entry(phi.clone()).or_default() += d;
            *data.entry((phi, CqKey(r.eigenvalue.clone()))).or_default() += d;
        }
    }
    let out = WeightSet::new(w.component_id(), mult, a.clone())?;
    let res = data
        .into_iter()
        .map(|((weight, CqKey(eigenvalue)), d)| ResidueDatum { weight, eigenvalue, jordan_type: vec![1; d] })
        .collect();
    Ok((out, res))
}

/// Ordering wrapper for exact complex rationals.
#[derive(Debug, Clone, PartialEq, Eq)]
struct CqKey(CQ);

impl PartialOrd for CqKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CqKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        cq_cmp(&self.0, &other.0)
    }
}

/// Largest element of `εℤ` strictly below `b`.
pub fn lattice_point_below(b: &Q, eps: &Q) -> Q {
    let k = ceil(&(b / eps)) - BigInt::one();
    Q::from_integer(k) * eps
}

/// Degree-preserving ψ: `ψ(b) = b(ε) + c` with `c` the multiplicity-weighted mean offset.
pub fn degree_preserving_psi(w: &WeightSet, eps: &Q) -> Result<PsiMap, WeightError> {
    if !eps.is_positive() {
        return Err(WeightError::NonPositiveEpsilon);
    }
    let rank = qi(w.rank() as i64);
    let lows: Vec<(Q, Q)> = w.entries().iter().map(|e| (e.weight.clone(), lattice_point_below(&e.weight, eps))).collect();
    let c: Q = w
        .entries()
        .iter()
        .zip(&lows)
        .map(|(e, (b, be))| (b - be) * qi(e.multiplicity as i64))
        .sum::<Q>()
        / rank;
    Ok(lows.into_iter().map(|(b, be)| (b, be + &c)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::cq_zero;

    fn ws(items: &[(Q, usize)]) -> WeightSet {
        WeightSet::with_anchor_zero("D", items.iter().cloned()).unwrap()
    }

    #[test]
    fn rejects_bad_sets() {
        assert!(WeightSet::with_anchor_zero("D", [(qi(-1), 1)]).is_err());
        assert!(WeightSet::with_anchor_zero("D", [(q(1, 2), 1)]).is_err());
        assert!(WeightSet::with_anchor_zero("D", [(qi(0), 0)]).is_err());
        assert!(WeightSet::with_anchor_zero("D", [(qi(0), 1), (qi(0), 2)]).is_err());
    }

    #[test]
    fn tilde_par_examples() {
        let w = ws(&[(q(-1, 2), 1), (qi(0), 1)]);
        assert_eq!(tilde_par(&w, 2).unwrap(), [q(-1, 2), qi(0)].into_iter().collect());
        let w = ws(&[(q(-3, 10), 1), (qi(0), 1)]);
        assert_eq!(tilde_par(&w, 1).unwrap(), [q(-3, 10), qi(0)].into_iter().collect());
        let w = ws(&[(qi(0), 1)]);
        assert_eq!(tilde_par(&w, 3).unwrap(), [q(-2, 3), q(-1, 3), qi(0)].into_iter().collect());
    }

    #[test]
    fn gap_examples() {
        assert_eq!(gap(&ws(&[(q(-1, 2), 1), (qi(0), 1)]), 2).unwrap(), q(1, 2));
        assert_eq!(gap(&ws(&[(q(-3, 10), 1), (qi(0), 1)]), 1).unwrap(), q(3, 10));
        assert_eq!(gap(&ws(&[(qi(0), 1)]), 3).unwrap(), q(1, 3));
        assert_eq!(gap(&ws(&[(qi(0), 1)]), 1), Err(WeightError::DegenerateGap));
    }

    #[test]
    fn generic_weight_examples() {
        assert_eq!(pick_generic_weight(&ws(&[(q(-1, 2), 1), (qi(0), 1)]), 2, 2).unwrap(), q(-1, 4));
        assert_eq!(pick_generic_weight(&ws(&[(qi(0), 1)]), 1, 1).unwrap(), q(-1, 2));
        assert_eq!(pick_generic_weight(&ws(&[(q(-3, 10), 1), (qi(0), 1)]), 1, 2).unwrap(), q(-13, 20));
    }

    #[test]
    fn filtration_examples() {
        assert_eq!(weight_filtration(&[2]).unwrap(), [(-1, 1), (1, 1)].into_iter().collect());
        assert_eq!(weight_filtration(&[1]).unwrap(), [(0, 1)].into_iter().collect());
        assert_eq!(weight_filtration(&[3, 1]).unwrap(), [(-2, 1), (0, 2), (2, 1)].into_iter().collect());
        assert!(weight_filtration(&[]).is_err());
    }

    fn identity_psi(w: &WeightSet) -> PsiMap {
        w.entries().iter().map(|e| (e.weight.clone(), e.weight.clone())).collect()
    }

    #[test]
    fn perturb_examples() {
        let w = ws(&[(q(-1, 2), 2)]);
        let res = [ResidueDatum::new(q(-1, 2), cq_zero(), vec![2]).unwrap()];
        let (out, data) = perturb_weights(&w, &res, &q(1, 100), &identity_psi(&w)).unwrap();
        assert_eq!(out, ws(&[(q(-51, 100), 1), (q(-49, 100), 1)]));
        assert!(data.iter().all(|d| d.jordan_type == vec![1]));

        let w = ws(&[(qi(0), 1)]);
        let res = [ResidueDatum::new(qi(0), cq_zero(), vec![1]).unwrap()];
        let (out, _) = perturb_weights(&w, &res, &q(1, 100), &identity_psi(&w)).unwrap();
        assert_eq!(out, w);

        let w = ws(&[(q(-1, 2), 1), (qi(0), 1)]);
        let res = [
            ResidueDatum::new(q(-1, 2), cq_zero(), vec![1]).unwrap(),
            ResidueDatum::new(qi(0), cq_zero(), vec![1]).unwrap(),
        ];
        let psi: PsiMap = w.entries().iter().map(|e| (e.weight.clone(), &e.weight + q(1, 200))).collect();
        let err = perturb_weights(&w, &res, &q(1, 100), &psi).unwrap_err();
        assert_eq!(err.kind(), "invalid-psi");
    }

    #[test]
    fn perturb_rejects_large_eps_and_bad_psi() {
        let w = ws(&[(q(-1, 2), 2)]);
        let res = [ResidueDatum::new(q(-1, 2), cq_zero(), vec![2]).unwrap()];
        let err = perturb_weights(&w, &res, &q(1, 50), &identity_psi(&w)).unwrap_err();
        assert_eq!(err.kind(), "perturbation-out-of-range");
        let psi: PsiMap = [(q(-1, 2), q(-1, 2) + q(1, 40))].into_iter().collect();
        let err = perturb_weights(&w, &res, &q(1, 100), &psi).unwrap_err();
        assert_eq!(err.kind(), "invalid-psi");
        assert_eq!(perturb_weights(&w, &res, &qi(0), &identity_psi(&w)).unwrap_err().kind(), "invalid-epsilon");
    }

    #[test]
    fn degree_preserving_examples() {
        let psi = degree_preserving_psi(&ws(&[(q(-1, 2), 1)]), &q(3, 10)).unwrap();
        assert_eq!(psi[&q(-1, 2)], q(-1, 2));
        let w = ws(&[(q(-1, 2), 1), (q(-1, 10), 1)]);
        let psi = degree_preserving_psi(&w, &q(3, 10)).unwrap();
        assert_eq!(psi[&q(-1, 2)], q(-9, 20));
        assert_eq!(psi[&q(-1, 10)], q(-3, 20));
        assert_eq!(&psi[&q(-1, 2)] + &psi[&q(-1, 10)], q(-3, 5));
        let psi = degree_preserving_psi(&ws(&[(qi(0), 2)]), &q(1, 10)).unwrap();
        assert_eq!(psi[&qi(0)], qi(0));
    }
}
