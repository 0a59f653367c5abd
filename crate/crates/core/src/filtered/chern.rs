//! Parabolic first and second Chern numbers, slopes and the Bogomolov–Gieseker report.

use super::{FilteredError, FilteredSpec, IntersectionData};
use crate::rational::{qi, Q};
use num_traits::Zero;

/// `Σ_b b·rank(Gr_b)` for component `i`.
fn weighted_rank(spec: &FilteredSpec, i: usize) -> Q {
    spec.components[i].weights.weighted_sum()
}

/// `∫c1(P_*V) c1(L)^{n-1} = deg_L_lattice − Σ_i Σ_b b·rank(Gr_b)·HiL`.
pub fn parabolic_c1_dot(spec: &FilteredSpec, ix: &IntersectionData) -> Result<Q, FilteredError> {
    ix.validate_against(spec)?;
    let mut total = ix.deg_l_lattice.clone();
    for (i, p) in ix.components.iter().enumerate() {
        total -= weighted_rank(spec, i) * &p.hil;
    }
    Ok(total)
}

/// Parabolic degree divided by rank.
pub fn slope(spec: &FilteredSpec, ix: &IntersectionData) -> Result<Q, FilteredError> {
    Ok(parabolic_c1_dot(spec, ix)? / qi(spec.rank as i64))
}

fn require<'a>(v: &'a Option<Q>, what: &str) -> Result<&'a Q, FilteredError> {
    v.as_ref().ok_or_else(|| FilteredError::SchemaMismatch(format!("missing {what}")))
}

/// Second parabolic Chern character paired with `c1(L)^{n-2}`.
///
/// The crossing term carries prefactor ½ over ordered pairs `(i, j)`, so each
/// stored crossing contributes `c_i·c_j·rank·CL` once.
pub fn parabolic_ch2_dot(spec: &FilteredSpec, ix: &IntersectionData) -> Result<Q, FilteredError> {
    if ix.dim_x < 2 {
        return Err(FilteredError::DimensionTooLow(ix.dim_x));
    }
    ix.validate_against(spec)?;
    let mut total = require(&ix.ch2_lattice, "ch2_lattice")?.clone();
    let half = Q::new(1.into(), 2.into());
    for (c, p) in spec.components.iter().zip(&ix.components) {
        let hihil = require(&p.hihil, &format!("hihil for component {}", p.label))?;
        for e in c.weights.entries() {
            if let Some(g) = p.gysin.get(&e.weight) {
                total -= &e.weight * g;
            }
            total += &half * &e.weight * &e.weight * qi(e.multiplicity as i64) * hihil;
        }
    }
    for cr in &ix.crossings {
        for (ci, cj, r) in &cr.ranks {
            total += ci * cj * qi(*r as i64) * &cr.cl;
        }
    }
    Ok(total)
}

/// Both sides of `ch2 ≤ c1²/(2·rank)` and the vanishing-case flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BgReport {
    /// `∫ch2(P_*V) c1(L)^{n-2}`.
    pub lhs: Q,
    /// `∫c1(P_*V)² c1(L)^{n-2} / (2·rank)`.
    pub rhs: Q,
    pub c1_sq: Q,
    pub c1_dot: Q,
    pub inequality_holds: bool,
    pub mu_zero: bool,
    pub ch2_zero: bool,
    /// Slope zero and ch2 pairing zero: the case where `c1 = 0` is expected.
    pub vanishing_precondition: bool,
}

/// `∫c1(P_*V)² c1(L)^{n-2}` assembled from lattice and divisor pairings.
pub fn parabolic_c1_sq(spec: &FilteredSpec, ix: &IntersectionData) -> Result<Q, FilteredError> {
    ix.validate_against(spec)?;
    let n = spec.components.len();
    let w: Vec<Q> = (0..n).map(|i| weighted_rank(spec, i)).collect();
    let mut total = require(&ix.c1sq_lattice, "c1sq_lattice")?.clone();
    for (i, p) in ix.components.iter().enumerate() {
        let c1h = require(&p.c1_hi_lattice, &format!("c1_hi_lattice for component {}", p.label))?;
        let hh = require(&p.hihil, &format!("hihil for component {}", p.label))?;
        total -= qi(2) * &w[i] * c1h;
        total += &w[i] * &w[i] * hh;
    }
    for cr in &ix.crossings {
        // H_i·H_j is symmetric; the ordered double sum counts each crossing twice.
        total += qi(2) * &w[cr.i] * &w[cr.j] * &cr.cl;
    }
    Ok(total)
}

/// Evaluates both sides of the Bogomolov–Gieseker inequality.
pub fn bg_report(spec: &FilteredSpec, ix: &IntersectionData) -> Result<BgReport, FilteredError> {
    let lhs = parabolic_ch2_dot(spec, ix)?;
    let c1_sq = parabolic_c1_sq(spec, ix)?;
    let c1_dot = parabolic_c1_dot(spec, ix)?;
    let rhs = &c1_sq / qi(2 * spec.rank as i64);
    let mu_zero = c1_dot.is_zero();
    let ch2_zero = lhs.is_zero();
    Ok(BgReport {
        inequality_holds: lhs <= rhs,
        lhs,
        rhs,
        c1_sq,
        c1_dot,
        mu_zero,
        ch2_zero,
        vanishing_precondition: mu_zero && ch2_zero,
    })
}
