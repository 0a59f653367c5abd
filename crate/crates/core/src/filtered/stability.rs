//! Slope stability over enumerated block-generated sub-objects.

use super::{chern::slope, ComponentSpec, FilteredError, FilteredSpec, IntersectionData};
use crate::rational::{fmt_q, Q};
use crate::weights::{Partition, WeightSet};
use std::collections::{BTreeMap, BTreeSet};

/// A sub-object generated by blocks: for each selected block, the Jordan type
/// of a nilpotent-invariant subspace inside it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    /// `(block index, sub-partition)`; the sub-partition must fit inside the block's partition.
    pub selection: Vec<(usize, Partition)>,
    /// Lattice degree `∫c1(P_a V') c1(L)^{n-1}`; defaults to the sum of
    /// `block_lattice_degrees` when every selected block is taken whole.
    pub lattice_degree: Option<Q>,
    /// Induced weights on components other than the first, keyed by component index.
    pub other_weights: BTreeMap<usize, Vec<(Q, usize)>>,
}

impl Candidate {
    /// Whole blocks, degree taken from the intersection data.
    pub fn blocks(spec: &FilteredSpec, indices: &[usize]) -> Self {
        Candidate {
            selection: indices.iter().map(|&i| (i, spec.blocks[i].jordan_type.clone())).collect(),
            lattice_degree: None,
            other_weights: BTreeMap::new(),
        }
    }
}

/// Outcome of a stability check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    SemistableNotStable,
    Unstable,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::SemistableNotStable => "semistable-not-stable",
            Verdict::Unstable => "unstable",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Verdict with the slopes that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilityReport {
    pub verdict: Verdict,
    /// Index of the first destabilizing (or slope-equal) candidate.
    pub witness: Option<usize>,
    pub slope: Q,
    pub candidate_slopes: Vec<Q>,
    /// Whether the candidates cover every block-generated proper selection.
    pub exhaustive: bool,
}

fn fits_inside(nu: &[usize], mu: &[usize]) -> bool {
    let mut nu = nu.to_vec();
    nu.sort_unstable_by(|a, b| b.cmp(a));
    nu.len() <= mu.len() && nu.iter().zip(mu).all(|(a, b)| a <= b)
}

/// All partitions contained in `mu` (including the empty one), descending.
fn sub_partitions(mu: &[usize]) -> Vec<Partition> {
    fn rec(mu: &[usize], cap: usize, prefix: &mut Vec<usize>, out: &mut Vec<Partition>) {
        out.push(prefix.clone());
        if prefix.len() == mu.len() {
            return;
        }
        let limit = cap.min(mu[prefix.len()]);
        for v in 1..=limit {
            prefix.push(v);
            rec(mu, v, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(mu, usize::MAX, &mut Vec::new(), &mut out);
    out
}

const ENUMERATION_LIMIT: usize = 100_000;

/// Induced sub-spec of a candidate, with its lattice degree.
fn induced(spec: &FilteredSpec, ix: &IntersectionData, idx: usize, cand: &Candidate) -> Result<(FilteredSpec, IntersectionData), FilteredError> {
    let bad = |reason: String| FilteredError::InvalidCandidate { index: idx, reason };
    if cand.selection.is_empty() {
        return Err(bad("selects nothing".into()));
    }
    let mut seen = BTreeSet::new();
    let mut rank = 0usize;
    let mut all_full = true;
    let mut mult0: BTreeMap<Q, usize> = BTreeMap::new();
    for (b, nu) in &cand.selection {
        let block = spec.blocks.get(*b).ok_or_else(|| bad(format!("block index {b} out of range")))?;
        if !seen.insert(*b) {
            return Err(bad(format!("block {b} selected twice")));
        }
        if nu.is_empty() || nu.contains(&0) || !fits_inside(nu, &block.jordan_type) {
            return Err(bad(format!("sub-partition {nu:?} does not fit inside {:?}", block.jordan_type)));
        }
        let d: usize = nu.iter().sum();
        rank += d;
        all_full &= d == block.dim();
        *mult0.entry(block.weight.clone()).or_default() += d;
    }
    if rank == spec.rank {
        return Err(bad("selection is the whole object".into()));
    }
    let deg = match (&cand.lattice_degree, &ix.block_lattice_degrees) {
        (Some(d), _) => d.clone(),
        (None, Some(bd)) if all_full => cand.selection.iter().map(|(b, _)| bd[*b].clone()).sum(),
        _ => return Err(bad("lattice degree required for partial blocks or when block degrees are absent".into())),
    };
    let mut comps = Vec::new();
    for (i, c) in spec.components.iter().enumerate() {
        let entries: Vec<(Q, usize)> = if i == 0 {
            mult0.clone().into_iter().collect()
        } else {
            cand.other_weights
                .get(&i)
                .cloned()
                .ok_or_else(|| bad(format!("induced weights for component {} are required", c.label())))?
        };
        let ws = WeightSet::new(c.label(), entries, c.weights.window_anchor().clone())?;
        if ws.rank() != rank {
            return Err(bad(format!("induced weights on component {} have rank {} instead of {rank}", c.label(), ws.rank())));
        }
        for e in ws.entries() {
            if c.weights.multiplicity(&e.weight) < e.multiplicity {
                return Err(bad(format!("weight {} is not available on component {}", fmt_q(&e.weight), c.label())));
            }
        }
        comps.push(ComponentSpec::semisimple(ws));
    }
    let sub = FilteredSpec::new(format!("{}[{idx}]", spec.label), rank, spec.lambda.clone(), comps, Vec::new())?;
    let mut sub_ix = ix.clone();
    sub_ix.deg_l_lattice = deg;
    sub_ix.crossings.clear();
    sub_ix.block_lattice_degrees = None;
    Ok((sub, sub_ix))
}

/// Slope of the sub-object selected by `cand`, from its induced filtration.
pub fn candidate_slope(spec: &FilteredSpec, ix: &IntersectionData, cand: &Candidate) -> Result<Q, FilteredError> {
    let (sub, sub_ix) = induced(spec, ix, 0, cand)?;
    slope(&sub, &sub_ix)
}

/// Compares candidate slopes against the slope of `spec`.
pub fn stability_check(spec: &FilteredSpec, ix: &IntersectionData, candidates: &[Candidate]) -> Result<StabilityReport, FilteredError> {
    let mu = slope(spec, ix)?;
    if spec.rank == 1 {
        return Ok(StabilityReport { verdict: Verdict::Stable, witness: None, slope: mu, candidate_slopes: vec![], exhaustive: true });
    }
    if candidates.is_empty() {
        return Err(FilteredError::NoCandidates);
    }
    let mut slopes = Vec::with_capacity(candidates.len());
    for (i, c) in candidates.iter().enumerate() {
        let (sub, sub_ix) = induced(spec, ix, i, c)?;
        slopes.push(slope(&sub, &sub_ix)?);
    }
    let exhaustive = covers_all_selections(spec, candidates);
    let (verdict, witness) = if let Some(i) = slopes.iter().position(|s| s > &mu) {
        (Verdict::Unstable, Some(i))
    } else if let Some(i) = slopes.iter().position(|s| s == &mu) {
        (Verdict::SemistableNotStable, Some(i))
    } else if exhaustive {
        (Verdict::Stable, None)
    } else {
        (Verdict::Inconclusive, None)
    };
    Ok(StabilityReport { verdict, witness, slope: mu, candidate_slopes: slopes, exhaustive })
}

fn covers_all_selections(spec: &FilteredSpec, candidates: &[Candidate]) -> bool {
    let per_block: Vec<Vec<Partition>> = spec.blocks.iter().map(|b| sub_partitions(&b.jordan_type)).collect();
    let total = per_block.iter().try_fold(1usize, |acc, v| acc.checked_mul(v.len()));
    let Some(total) = total else { return false };
    if per_block.is_empty() || total > ENUMERATION_LIMIT {
        return false;
    }
    let given: BTreeSet<Vec<Partition>> = candidates
        .iter()
        .map(|c| {
            let mut sel = vec![Vec::new(); spec.blocks.len()];
            for (b, nu) in &c.selection {
                let mut nu = nu.clone();
                nu.sort_unstable_by(|a, b| b.cmp(a));
                sel[*b] = nu;
            }
            sel
        })
        .collect();
    let mut idx = vec![0usize; per_block.len()];
    loop {
        let sel: Vec<Partition> = idx.iter().zip(&per_block).map(|(&i, v)| v[i].clone()).collect();
        let dim: usize = sel.iter().flatten().sum();
        if dim != 0 && dim != spec.rank && !given.contains(&sel) {
            return false;
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return true;
            }
            idx[k] += 1;
            if idx[k] < per_block[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
