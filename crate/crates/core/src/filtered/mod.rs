//! Filtered-bundle combinatorics: specs of (model) good filtered λ-flat
//! bundles, parabolic Chern numbers, covering functors and slope stability.

mod chern;
mod covering;
mod stability;

pub use chern::{bg_report, parabolic_c1_dot, parabolic_ch2_dot, slope, BgReport};
pub use covering::{descent, pullback, pushforward_weights};
pub use stability::{candidate_slope, stability_check, Candidate, StabilityReport, Verdict};

use crate::rational::{cq_cmp, fmt_q, CQ, Q};
use crate::weights::{normalize_partition, validate_residues, Partition, ResidueDatum, WeightError, WeightSet};
use num_traits::Zero;
use std::collections::BTreeMap;

/// Errors raised by filtered-bundle operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FilteredError {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("dimension of X must be at least 2, got {0}")]
    DimensionTooLow(u32),
    #[error("not equivariant: {0}")]
    NotEquivariant(String),
    #[error("no candidate sub-objects supplied")]
    NoCandidates,
    #[error("invalid candidate {index}: {reason}")]
    InvalidCandidate { index: usize, reason: String },
    #[error(transparent)]
    Weight(#[from] WeightError),
}

impl FilteredError {
    /// Machine-readable error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            FilteredError::SchemaMismatch(_) => "schema-mismatch",
            FilteredError::InvalidSpec(_) => "invalid-spec",
            FilteredError::DimensionTooLow(_) => "dimension-too-low",
            FilteredError::NotEquivariant(_) => "not-equivariant",
            FilteredError::NoCandidates => "no-candidates",
            FilteredError::InvalidCandidate { .. } => "invalid-candidate",
            FilteredError::Weight(e) => e.kind(),
        }
    }
}

/// Elementary model summand `(𝔞, a, α, f)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelBlock {
    /// Coefficients of `ζ^{-j}` for `j = 1..=m`; empty means `𝔞 = 0`.
    pub irregular: Vec<CQ>,
    pub weight: Q,
    pub eigenvalue: CQ,
    pub jordan_type: Partition,
    /// Character of the cyclic covering group on this block, when graded.
    pub character: Option<u64>,
}

impl ModelBlock {
    pub fn new(irregular: Vec<CQ>, weight: Q, eigenvalue: CQ, jordan_type: Partition) -> Result<Self, FilteredError> {
        if irregular.last().is_some_and(|c| c.is_zero()) {
            return Err(FilteredError::InvalidSpec("leading irregular coefficient must be nonzero".into()));
        }
        Ok(ModelBlock { irregular, weight, eigenvalue, jordan_type: normalize_partition(jordan_type)?, character: None })
    }

    pub fn dim(&self) -> usize {
        self.jordan_type.iter().sum()
    }

    /// Pole order `m` of the irregular value.
    pub fn pole_order(&self) -> usize {
        self.irregular.len()
    }
}

/// Characters of the cyclic covering group, index-aligned with residue data.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grading {
    pub degree: u64,
    pub characters: Vec<u64>,
}

/// Weights and residue data of one divisor component.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ComponentSpec {
    pub weights: WeightSet,
    pub residues: Vec<ResidueDatum>,
    pub grading: Option<Grading>,
}

impl ComponentSpec {
    /// Builds a component and puts it in canonical form.
    pub fn new(weights: WeightSet, residues: Vec<ResidueDatum>, grading: Option<Grading>) -> Result<Self, FilteredError> {
        let mut c = ComponentSpec { weights, residues, grading };
        c.validate()?;
        c.canonicalize();
        Ok(c)
    }

    /// Component whose residues are semisimple with eigenvalue zero.
    pub fn semisimple(weights: WeightSet) -> Self {
        let residues = weights
            .entries()
            .iter()
            .map(|e| ResidueDatum {
                weight: e.weight.clone(),
                eigenvalue: crate::rational::cq_zero(),
                jordan_type: vec![1; e.multiplicity],
            })
            .collect();
        let mut c = ComponentSpec { weights, residues, grading: None };
        c.canonicalize();
        c
    }

    pub fn label(&self) -> &str {
        self.weights.component_id()
    }

    fn validate(&self) -> Result<(), FilteredError> {
        validate_residues(&self.weights, &self.residues)?;
        if let Some(g) = &self.grading {
            if g.degree == 0 {
                return Err(FilteredError::NotEquivariant("grading degree must be positive".into()));
            }
            if g.characters.len() != self.residues.len() {
                return Err(FilteredError::NotEquivariant(format!(
                    "component {} has {} residue data but {} characters",
                    self.label(),
                    self.residues.len(),
                    g.characters.len()
                )));
            }
            if let Some(k) = g.characters.iter().find(|&&k| k >= g.degree) {
                return Err(FilteredError::NotEquivariant(format!("character {k} not below degree {}", g.degree)));
            }
        }
        Ok(())
    }

    /// Sorts data by (weight, eigenvalue, character) and merges equal keys.
    fn canonicalize(&mut self) {
        let chars: Vec<Option<u64>> = match &self.grading {
            Some(g) => g.characters.iter().map(|&k| Some(k)).collect(),
            None => vec![None; self.residues.len()],
        };
        let mut items: Vec<(ResidueDatum, Option<u64>)> = self.residues.drain(..).zip(chars).collect();
        items.sort_by(|(a, ka), (b, kb)| {
            a.weight.cmp(&b.weight).then_with(|| cq_cmp(&a.eigenvalue, &b.eigenvalue)).then_with(|| ka.cmp(kb))
        });
        let mut merged: Vec<(ResidueDatum, Option<u64>)> = Vec::with_capacity(items.len());
        for (d, k) in items {
            match merged.last_mut() {
                Some((m, mk)) if m.weight == d.weight && m.eigenvalue == d.eigenvalue && *mk == k => {
                    m.jordan_type.extend(d.jordan_type);
                    m.jordan_type.sort_unstable_by(|a, b| b.cmp(a));
                }
                _ => merged.push((d, k)),
            }
        }
        if let Some(g) = &mut self.grading {
            g.characters = merged.iter().map(|(_, k)| k.unwrap_or(0)).collect();
        }
        self.residues = merged.into_iter().map(|(d, _)| d).collect();
    }
}

/// Combinatorial description of a good filtered λ-flat bundle near a divisor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FilteredSpec {
    pub rank: usize,
    pub lambda: CQ,
    pub components: Vec<ComponentSpec>,
    /// Global block decomposition; blocks describe the first component.
    pub blocks: Vec<ModelBlock>,
    pub label: String,
}

impl FilteredSpec {
    /// Validates rank consistency and block/residue agreement, then canonicalizes.
    pub fn new(
        label: impl Into<String>,
        rank: usize,
        lambda: CQ,
        components: Vec<ComponentSpec>,
        blocks: Vec<ModelBlock>,
    ) -> Result<Self, FilteredError> {
        let mut s = FilteredSpec { rank, lambda, components, blocks, label: label.into() };
        s.validate()?;
        s.canonicalize();
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), FilteredError> {
        if self.rank == 0 {
            return Err(FilteredError::InvalidSpec("rank must be positive".into()));
        }
        if self.components.is_empty() {
            return Err(FilteredError::InvalidSpec("at least one divisor component is required".into()));
        }
        for c in &self.components {
            if c.weights.rank() != self.rank {
                return Err(FilteredError::InvalidSpec(format!(
                    "component {}: multiplicities sum to {} but rank is {}",
                    c.label(),
                    c.weights.rank(),
                    self.rank
                )));
            }
            c.validate()?;
        }
        if !self.blocks.is_empty() {
            let total: usize = self.blocks.iter().map(ModelBlock::dim).sum();
            if total != self.rank {
                return Err(FilteredError::InvalidSpec(format!(
                    "block dimensions sum to {total} but rank is {}",
                    self.rank
                )));
            }
            let c0 = &self.components[0];
            let mut from_blocks: BTreeMap<Q, usize> = BTreeMap::new();
            for b in &self.blocks {
                *from_blocks.entry(b.weight.clone()).or_default() += b.dim();
            }
            for (w, d) in &from_blocks {
                if c0.weights.multiplicity(w) != *d {
                    return Err(FilteredError::InvalidSpec(format!(
                        "blocks give weight {} dimension {} but component {} has multiplicity {}",
                        fmt_q(w),
                        d,
                        c0.label(),
                        c0.weights.multiplicity(w)
                    )));
                }
            }
        }
        Ok(())
    }

    fn canonicalize(&mut self) {
        for c in &mut self.components {
            c.canonicalize();
        }
        self.blocks.sort_by(|a, b| {
            a.weight
                .cmp(&b.weight)
                .then_with(|| cq_cmp(&a.eigenvalue, &b.eigenvalue))
                .then_with(|| a.character.cmp(&b.character))
                .then_with(|| a.irregular.len().cmp(&b.irregular.len()))
                .then_with(|| {
                    a.irregular
                        .iter()
                        .zip(&b.irregular)
                        .map(|(x, y)| cq_cmp(x, y))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .then_with(|| b.jordan_type.cmp(&a.jordan_type))
        });
    }

    /// Direct sum of two specs over the same components and λ.
    pub fn direct_sum(&self, other: &FilteredSpec) -> Result<FilteredSpec, FilteredError> {
        if self.lambda != other.lambda || self.components.len() != other.components.len() {
            return Err(FilteredError::SchemaMismatch("direct sum needs equal λ and components".into()));
        }
        let mut comps = Vec::new();
        for (a, b) in self.components.iter().zip(&other.components) {
            if a.label() != b.label() || a.weights.window_anchor() != b.weights.window_anchor() {
                return Err(FilteredError::SchemaMismatch("component labels or windows differ".into()));
            }
            let mut mult: BTreeMap<Q, usize> = BTreeMap::new();
            for e in a.weights.entries().iter().chain(b.weights.entries()) {
                *mult.entry(e.weight.clone()).or_default() += e.multiplicity;
            }
            let w = WeightSet::new(a.label(), mult, a.weights.window_anchor().clone())?;
            let grading = match (&a.grading, &b.grading) {
                (Some(x), Some(y)) if x.degree == y.degree => Some(Grading {
                    degree: x.degree,
                    characters: x.characters.iter().chain(&y.characters).copied().collect(),
                }),
                (None, None) => None,
                _ => return Err(FilteredError::NotEquivariant("gradings differ".into())),
            };
            let res = a.residues.iter().chain(&b.residues).cloned().collect();
            comps.push(ComponentSpec::new(w, res, grading)?);
        }
        let blocks = if self.blocks.is_empty() || other.blocks.is_empty() {
            Vec::new()
        } else {
            self.blocks.iter().chain(&other.blocks).cloned().collect()
        };
        FilteredSpec::new(format!("{}+{}", self.label, other.label), self.rank + other.rank, self.lambda.clone(), comps, blocks)
    }
}

/// Bigraded ranks of `Gr` along one irreducible curve `C ⊂ H_i ∩ H_j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Crossing {
    pub i: usize,
    pub j: usize,
    /// `∫[C] c1(L)^{n-2}`.
    pub cl: Q,
    /// Entries `(c_i, c_j, rank Gr_(c_i, c_j))`.
    pub ranks: Vec<(Q, Q, usize)>,
}

/// Intersection numbers of one divisor component.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ComponentPairings {
    pub label: String,
    /// `∫[H_i] c1(L)^{n-1}`.
    pub hil: Q,
    /// `∫[H_i]^2 c1(L)^{n-2}`.
    pub hihil: Option<Q>,
    /// `∫c1(P_a V)[H_i] c1(L)^{n-2}`.
    pub c1_hi_lattice: Option<Q>,
    /// Weight `b` to `∫ι_*(c1(Gr_b)) c1(L)^{n-2}`; absent weights contribute zero.
    pub gysin: BTreeMap<Q, Q>,
}

/// User-supplied intersection pairings of the ambient variety.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntersectionData {
    pub dim_x: u32,
    pub deg_l_lattice: Q,
    pub ch2_lattice: Option<Q>,
    pub c1sq_lattice: Option<Q>,
    pub components: Vec<ComponentPairings>,
    pub crossings: Vec<Crossing>,
    /// Lattice degree of each model block, in the spec's block order.
    pub block_lattice_degrees: Option<Vec<Q>>,
}

impl IntersectionData {
    /// Curve-case data: only degrees and `HiL` numbers.
    pub fn curve(deg_l_lattice: Q, hil: impl IntoIterator<Item = (String, Q)>) -> Self {
        IntersectionData {
            dim_x: 1,
            deg_l_lattice,
            ch2_lattice: None,
            c1sq_lattice: None,
            components: hil
                .into_iter()
                .map(|(label, hil)| ComponentPairings {
                    label,
                    hil,
                    hihil: None,
                    c1_hi_lattice: None,
                    gysin: BTreeMap::new(),
                })
                .collect(),
            crossings: Vec::new(),
            block_lattice_degrees: None,
        }
    }

    /// Checks labels against `spec` and crossing ranks against the Gr ranks.
    pub fn validate_against(&self, spec: &FilteredSpec) -> Result<(), FilteredError> {
        if self.components.len() != spec.components.len() {
            return Err(FilteredError::SchemaMismatch(format!(
                "intersection data has {} components but spec has {}",
                self.components.len(),
                spec.components.len()
            )));
        }
        for (p, c) in self.components.iter().zip(&spec.components) {
            if p.label != c.label() {
                return Err(FilteredError::SchemaMismatch(format!(
                    "component label {} does not match spec label {}",
                    p.label,
                    c.label()
                )));
            }
        }
        for cr in &self.crossings {
            let n = spec.components.len();
            if cr.i >= n || cr.j >= n || cr.i == cr.j {
                return Err(FilteredError::SchemaMismatch(format!("crossing ({}, {}) is not a pair of distinct components", cr.i, cr.j)));
            }
            let wi = &spec.components[cr.i].weights;
            let wj = &spec.components[cr.j].weights;
            let mut rows: BTreeMap<&Q, usize> = BTreeMap::new();
            let mut cols: BTreeMap<&Q, usize> = BTreeMap::new();
            for (ci, cj, r) in &cr.ranks {
                *rows.entry(ci).or_default() += r;
                *cols.entry(cj).or_default() += r;
            }
            for e in wi.entries() {
                if rows.get(&e.weight).copied().unwrap_or(0) != e.multiplicity {
                    return Err(FilteredError::SchemaMismatch(format!(
                        "crossing ({}, {}): row sum at weight {} differs from its Gr rank {}",
                        cr.i,
                        cr.j,
                        fmt_q(&e.weight),
                        e.multiplicity
                    )));
                }
            }
            for e in wj.entries() {
                if cols.get(&e.weight).copied().unwrap_or(0) != e.multiplicity {
                    return Err(FilteredError::SchemaMismatch(format!(
                        "crossing ({}, {}): column sum at weight {} differs from its Gr rank {}",
                        cr.i,
                        cr.j,
                        fmt_q(&e.weight),
                        e.multiplicity
                    )));
                }
            }
            if rows.len() > wi.entries().len() || cols.len() > wj.entries().len() {
                return Err(FilteredError::SchemaMismatch(format!("crossing ({}, {}) uses weights absent from the spec", cr.i, cr.j)));
            }
        }
        if let Some(d) = &self.block_lattice_degrees {
            if d.len() != spec.blocks.len() {
                return Err(FilteredError::SchemaMismatch(format!(
                    "{} block lattice degrees for {} blocks",
                    d.len(),
                    spec.blocks.len()
                )));
            }
        }
        Ok(())
    }
}
