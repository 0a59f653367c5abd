//! Pull-back, push-forward and descent along cyclic coverings `ζ ↦ ζ^e = z`.
//!
//! A weight `b` pulls back to `e·b`, reduced into the window by an integer
//! shift `n`. Shifting a weight by an integer moves the residue eigenvalue by
//! `λ` per unit (sections `ζ^n v`), and the residue itself scales by `e`
//! because `e·dζ/ζ = dz/z`. The shift also fixes the character `-n mod e` of
//! the covering group on the resulting datum.

use super::{ComponentSpec, FilteredError, FilteredSpec, Grading, ModelBlock};
use crate::rational::{cq_scale, is_integer, qi, reduce_to_window, window_shift, CQ, Q};
use crate::weights::{ResidueDatum, WeightSet};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use std::collections::BTreeMap;

fn lambda_times(lambda: &CQ, n: &BigInt) -> CQ {
    cq_scale(lambda, &Q::from_integer(n.clone()))
}

/// Pulls one `(weight, eigenvalue)` pair back; returns new weight, eigenvalue, character.
fn pull_pair(b: &Q, alpha: &CQ, lambda: &CQ, e: u64, anchor: &Q) -> (Q, CQ, u64) {
    let ei = qi(e as i64);
    let eb = b * &ei;
    let n = window_shift(&eb, anchor);
    let c = &eb + Q::from_integer(n.clone());
    let a = cq_scale(alpha, &ei) - lambda_times(lambda, &n);
    let k = (-n).mod_floor(&BigInt::from(e)).to_u64().expect("character fits in u64");
    (c, a, k)
}

/// Inverse of [`pull_pair`] for a datum of character `k`.
fn descend_pair(c: &Q, alpha: &CQ, lambda: &CQ, e: u64, k: u64, anchor: &Q) -> (Q, CQ) {
    let ei = qi(e as i64);
    let m = BigInt::from((e - k % e) % e);
    let b0 = (c - Q::from_integer(m.clone())) / &ei;
    let j = window_shift(&b0, anchor);
    let b = &b0 + Q::from_integer(j.clone());
    let n = m - j * BigInt::from(e);
    let a = cq_scale(&(alpha + lambda_times(lambda, &n)), &(Q::from_integer(1.into()) / &ei));
    (b, a)
}

/// Composes `𝔞(ζ)` with `ζ ↦ ζ^e`: the coefficient of `ζ^{-j}` moves to `ζ^{-je}`.
fn compose_irregular(irr: &[CQ], e: u64) -> Vec<CQ> {
    if irr.is_empty() {
        return Vec::new();
    }
    let e = e as usize;
    let mut out = vec![crate::rational::cq_zero(); irr.len() * e];
    for (j, c) in irr.iter().enumerate() {
        out[(j + 1) * e - 1] = c.clone();
    }
    out
}

/// Inverse of [`compose_irregular`]; `None` when a coefficient sits off the multiples of `e`.
fn uncompose_irregular(irr: &[CQ], e: u64) -> Option<Vec<CQ>> {
    let e = e as usize;
    let mut out = Vec::new();
    for (idx, c) in irr.iter().enumerate() {
        let j = idx + 1;
        if j % e == 0 {
            out.push(c.clone());
        } else if !c.is_zero() {
            return None;
        }
    }
    while out.last().is_some_and(|c| c.is_zero()) {
        out.pop();
    }
    Some(out)
}

fn pull_component(c: &ComponentSpec, lambda: &CQ, e: u64) -> Result<ComponentSpec, FilteredError> {
    let anchor = c.weights.window_anchor() * qi(e as i64);
    let mut mult: BTreeMap<Q, usize> = BTreeMap::new();
    let mut res = Vec::new();
    let mut chars = Vec::new();
    for d in &c.residues {
        let (w, a, k) = pull_pair(&d.weight, &d.eigenvalue, lambda, e, &anchor);
        *mult.entry(w.clone()).or_default() += d.dim();
        res.push(ResidueDatum { weight: w, eigenvalue: a, jordan_type: d.jordan_type.clone() });
        chars.push(k);
    }
    let ws = WeightSet::new(c.label(), mult, anchor)?;
    ComponentSpec::new(ws, res, Some(Grading { degree: e, characters: chars }))
}

/// Pull-back along coverings of degree `e_per_component[i]` over component `i`.
///
/// The result carries the grading by characters of the covering group that
/// [`descent`] consumes. Blocks follow the first component's degree.
pub fn pullback(spec: &FilteredSpec, e_per_component: &[u64]) -> Result<FilteredSpec, FilteredError> {
    if e_per_component.len() != spec.components.len() {
        return Err(FilteredError::SchemaMismatch(format!(
            "{} covering degrees for {} components",
            e_per_component.len(),
            spec.components.len()
        )));
    }
    if e_per_component.contains(&0) {
        return Err(FilteredError::InvalidSpec("covering degree must be at least 1".into()));
    }
    if spec.components.iter().any(|c| c.grading.is_some()) {
        return Err(FilteredError::InvalidSpec("pull-back expects an ungraded spec".into()));
    }
    let comps = spec
        .components
        .iter()
        .zip(e_per_component)
        .map(|(c, &e)| pull_component(c, &spec.lambda, e))
        .collect::<Result<Vec<_>, _>>()?;
    let e0 = e_per_component[0];
    let anchor0 = spec.components[0].weights.window_anchor() * qi(e0 as i64);
    let blocks = spec
        .blocks
        .iter()
        .map(|b| {
            let (w, a, k) = pull_pair(&b.weight, &b.eigenvalue, &spec.lambda, e0, &anchor0);
            ModelBlock {
                irregular: compose_irregular(&b.irregular, e0),
                weight: w,
                eigenvalue: a,
                jordan_type: b.jordan_type.clone(),
                character: Some(k),
            }
        })
        .collect();
    FilteredSpec::new(spec.label.clone(), spec.rank, spec.lambda.clone(), comps, blocks)
}

/// Push-forward of the underlying filtered module: each weight `c` splits into
/// `(c − m)/e` for `m = 0..e`, rank multiplies by `e`, window anchor divides by `e`.
///
/// Blocks are kept only when every irregular value is a function of `ζ^e`;
/// otherwise the push-forward is not a sum of unramified models and the block
/// list is dropped.
pub fn pushforward_weights(spec: &FilteredSpec, e: u64) -> Result<FilteredSpec, FilteredError> {
    if e == 0 {
        return Err(FilteredError::InvalidSpec("covering degree must be at least 1".into()));
    }
    if e == 1 {
        return Ok(spec.clone());
    }
    let ei = qi(e as i64);
    let split = |c: &Q, alpha: &CQ, m: u64| -> (Q, CQ) {
        let mq = qi(m as i64);
        ((c - &mq) / &ei, cq_scale(&(alpha + cq_scale(&spec.lambda, &mq)), &(Q::from_integer(1.into()) / &ei)))
    };
    let mut comps = Vec::new();
    for c in &spec.components {
        let anchor = c.weights.window_anchor() / &ei;
        let mut mult: BTreeMap<Q, usize> = BTreeMap::new();
        let mut res = Vec::new();
        for d in &c.residues {
            for m in 0..e {
                let (w, a) = split(&d.weight, &d.eigenvalue, m);
                let w = reduce_to_window(&w, &anchor);
                *mult.entry(w.clone()).or_default() += d.dim();
                res.push(ResidueDatum { weight: w, eigenvalue: a, jordan_type: d.jordan_type.clone() });
            }
        }
        comps.push(ComponentSpec::new(WeightSet::new(c.label(), mult, anchor)?, res, None)?);
    }
    let mut blocks = Vec::new();
    let anchor0 = spec.components[0].weights.window_anchor() / &ei;
    for b in &spec.blocks {
        let Some(irr) = uncompose_irregular(&b.irregular, e) else {
            blocks.clear();
            break;
        };
        for m in 0..e {
            let (w, a) = split(&b.weight, &b.eigenvalue, m);
            blocks.push(ModelBlock {
                irregular: irr.clone(),
                weight: reduce_to_window(&w, &anchor0),
                eigenvalue: a,
                jordan_type: b.jordan_type.clone(),
                character: None,
            });
        }
    }
    FilteredSpec::new(spec.label.clone(), spec.rank * e as usize, spec.lambda.clone(), comps, blocks)
}

/// Invariant part of the push-forward of a graded spec on the covering side.
///
/// Each graded datum contributes exactly one datum downstairs; this inverts
/// [`pullback`] exactly.
pub fn descent(spec: &FilteredSpec, e: u64) -> Result<FilteredSpec, FilteredError> {
    if e == 0 {
        return Err(FilteredError::InvalidSpec("covering degree must be at least 1".into()));
    }
    let ei = qi(e as i64);
    let mut comps = Vec::new();
    for c in &spec.components {
        let g = c
            .grading
            .as_ref()
            .ok_or_else(|| FilteredError::NotEquivariant(format!("component {} carries no grading", c.label())))?;
        if g.degree != e {
            return Err(FilteredError::NotEquivariant(format!(
                "component {} is graded by degree {} but descent asked for {}",
                c.label(),
                g.degree,
                e
            )));
        }
        let anchor = c.weights.window_anchor() / &ei;
        let mut mult: BTreeMap<Q, usize> = BTreeMap::new();
        let mut res = Vec::new();
        for (d, &k) in c.residues.iter().zip(&g.characters) {
            // The pulled-back weight of a character-k datum satisfies e·b ≡ weight + k.
            let (w, a) = descend_pair(&d.weight, &d.eigenvalue, &spec.lambda, e, k, &anchor);
            if !is_integer(&((&w * &ei) - &d.weight)) {
                return Err(FilteredError::NotEquivariant("weight is not compatible with its character".into()));
            }
            *mult.entry(w.clone()).or_default() += d.dim();
            res.push(ResidueDatum { weight: w, eigenvalue: a, jordan_type: d.jordan_type.clone() });
        }
        comps.push(ComponentSpec::new(WeightSet::new(c.label(), mult, anchor)?, res, None)?);
    }
    let anchor0 = spec.components[0].weights.window_anchor() / &ei;
    let mut blocks = Vec::new();
    for b in &spec.blocks {
        let k = b
            .character
            .ok_or_else(|| FilteredError::NotEquivariant("block without character".into()))?;
        if k >= e {
            return Err(FilteredError::NotEquivariant(format!("block character {k} not below degree {e}")));
        }
        let irr = uncompose_irregular(&b.irregular, e)
            .ok_or_else(|| FilteredError::NotEquivariant("irregular value is not a function of ζ^e".into()))?;
        let (w, a) = descend_pair(&b.weight, &b.eigenvalue, &spec.lambda, e, k, &anchor0);
        blocks.push(ModelBlock { irregular: irr, weight: w, eigenvalue: a, jordan_type: b.jordan_type.clone(), character: None });
    }
    FilteredSpec::new(spec.label.clone(), spec.rank, spec.lambda.clone(), comps, blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtered::ComponentSpec;
    use crate::rational::{cq_real, cq_zero, q};
    use num_complex::Complex;

    fn simple(items: &[(Q, usize)], lambda: CQ) -> FilteredSpec {
        let w = WeightSet::with_anchor_zero("D", items.iter().cloned()).unwrap();
        let rank = w.rank();
        FilteredSpec::new("s", rank, lambda, vec![ComponentSpec::semisimple(w)], vec![]).unwrap()
    }

    #[test]
    fn pullback_examples() {
        let s = simple(&[(q(-1, 2), 1), (qi(0), 1)], cq_zero());
        let p = pullback(&s, &[2]).unwrap();
        assert_eq!(p.components[0].weights.entries().len(), 1);
        assert_eq!(p.components[0].weights.multiplicity(&qi(0)), 2);
        assert_eq!(pullback(&s, &[1]).unwrap().components[0].residues, s.components[0].residues);

        let w = WeightSet::with_anchor_zero("D", [(qi(0), 1)]).unwrap();
        let c = ComponentSpec::new(w, vec![ResidueDatum::new(qi(0), cq_real(q(1, 2)), vec![1]).unwrap()], None).unwrap();
        let s1 = FilteredSpec::new("r1", 1, cq_zero(), vec![c], vec![]).unwrap();
        assert_eq!(pullback(&s1, &[2]).unwrap().components[0].residues[0].eigenvalue, cq_real(qi(1)));
    }

    #[test]
    fn pushforward_examples() {
        let s = simple(&[(qi(0), 1)], cq_zero());
        let p = pushforward_weights(&s, 2).unwrap();
        assert_eq!(p.rank, 2);
        let w: Vec<Q> = p.components[0].weights.entries().iter().map(|e| e.weight.clone()).collect();
        assert_eq!(w, vec![q(-1, 2), qi(0)]);
        let s = simple(&[(q(-1, 2), 1)], cq_zero());
        let p = pushforward_weights(&s, 2).unwrap();
        let w: Vec<Q> = p.components[0].weights.entries().iter().map(|e| e.weight.clone()).collect();
        assert_eq!(w, vec![q(-3, 4), q(-1, 4)]);
        assert_eq!(pushforward_weights(&s, 1).unwrap(), s);
    }

    #[test]
    fn descent_examples() {
        let lambda = Complex::new(q(1, 3), q(-2, 5));
        let s = simple(&[(q(-1, 2), 1), (qi(0), 1)], lambda.clone());
        for e in 1..=4 {
            assert_eq!(descent(&pullback(&s, &[e]).unwrap(), e).unwrap(), s);
        }
        // Regular representation: characters 0..e on the pushforward of weight 0.
        let up = simple(&[(qi(0), 1)], cq_zero());
        let mut graded = up.clone();
        graded.components[0].grading = Some(Grading { degree: 2, characters: vec![0] });
        let down = descent(&graded, 2).unwrap();
        assert_eq!(down.rank, 1);
        assert_eq!(down.components[0].weights.multiplicity(&qi(0)), 1);
        assert_eq!(descent(&up, 2).unwrap_err().kind(), "not-equivariant");

        // All characters present: descent equals the push-forward of weight 0.
        for e in 2..=4u64 {
            let reg = simple(&[(qi(0), e as usize)], lambda.clone());
            let mut reg_graded = reg.clone();
            reg_graded.components[0].residues = (0..e)
                .map(|_| ResidueDatum::new(qi(0), cq_zero(), vec![1]).unwrap())
                .collect();
            reg_graded.components[0].grading = Some(Grading { degree: e, characters: (0..e).collect() });
            let rank1 = simple(&[(qi(0), 1)], lambda.clone());
            let mut d = descent(&reg_graded, e).unwrap();
            let mut pf = pushforward_weights(&rank1, e).unwrap();
            d.label.clear();
            pf.label.clear();
            assert_eq!(d.components, pf.components);
        }
    }

    #[test]
    fn blocks_round_trip_and_irregular_guard() {
        let lambda = cq_real(qi(1));
        let b = ModelBlock::new(vec![cq_real(qi(2)), cq_real(qi(-1))], q(-1, 3), cq_real(q(1, 5)), vec![2]).unwrap();
        let w = WeightSet::with_anchor_zero("D", [(q(-1, 3), 2)]).unwrap();
        let c = ComponentSpec::new(w, vec![ResidueDatum::new(q(-1, 3), cq_real(q(1, 5)), vec![2]).unwrap()], None).unwrap();
        let s = FilteredSpec::new("blk", 2, lambda, vec![c], vec![b]).unwrap();
        let p = pullback(&s, &[3]).unwrap();
        assert_eq!(p.blocks[0].irregular.len(), 6);
        assert_eq!(descent(&p, 3).unwrap(), s);
        let mut bad = p.clone();
        bad.blocks[0].irregular[0] = cq_real(qi(1));
        assert_eq!(descent(&bad, 3).unwrap_err().kind(), "not-equivariant");
    }
}
