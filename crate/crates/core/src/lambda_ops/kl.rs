//! Pointwise Kobayashi–Lübke identity on a flat complex surface.
//!
//! A `(1,1)`-form `G = Σ G_ij dz_i∧dz̄_j` with Kähler form
//! `ω = (√−1/2)ρ Σ dz_j∧dz̄_j` has densities, relative to `ω²/2`,
//! `Tr((√−1G)∧(√−1G)) = 8 Re Tr(G₁₁G₂₂ − G₁₂G₂₁)/ρ²` and
//! `|G|²_ω = (4/ρ²) Σ Tr(G_ij G_ij†)`.
//! For primitive `G` with `G_ij† = −G_ji` the two agree.

use super::OpsError;
use crate::linalg::CMat;

/// Flat product grid on `ℂ²` (real dimension four) with a constant conformal weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    n: usize,
    lengths: [f64; 4],
    rho: f64,
}

impl SurfaceGrid {
    /// `n` nodes per real axis, periodic with the given side lengths.
    pub fn flat(n: usize, lengths: [f64; 4]) -> Result<Self, OpsError> {
        if n < 2 {
            return Err(OpsError::InvalidGrid(format!("need at least 2 nodes per axis, got {n}")));
        }
        if lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(OpsError::InvalidGrid("side lengths must be positive".into()));
        }
        Ok(SurfaceGrid { n, lengths, rho: 1.0 })
    }

    /// Uses `ω = (√−1/2)ρ Σ dz_j∧dz̄_j`.
    pub fn with_kahler_weight(mut self, rho: f64) -> Result<Self, OpsError> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(OpsError::InvalidGrid(format!("Kähler weight must be positive, got {rho}")));
        }
        self.rho = rho;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.n.pow(4)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn kahler_weight(&self) -> f64 {
        self.rho
    }

    /// Real coordinates `(x₁, y₁, x₂, y₂)` of node `k`.
    pub fn coords(&self, k: usize) -> [f64; 4] {
        let mut out = [0.0; 4];
        let mut rest = k;
        for (a, o) in out.iter_mut().enumerate() {
            *o = (rest % self.n) as f64 * self.lengths[a] / self.n as f64;
            rest /= self.n;
        }
        out
    }
}

/// Matrix-valued `(1,1)`-form, stored as `[G₁₁, G₁₂, G₂₁, G₂₂]` per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Form11Field {
    rank: usize,
    data: Vec<[CMat; 4]>,
}

impl Form11Field {
    pub fn new(rank: usize, data: Vec<[CMat; 4]>) -> Result<Self, OpsError> {
        if data.iter().flatten().any(|m| m.dim() != rank) {
            return Err(OpsError::Field(crate::field::FieldError::RankMismatch { rank }));
        }
        Ok(Form11Field { rank, data })
    }

    pub fn from_fn(rank: usize, len: usize, f: impl FnMut(usize) -> [CMat; 4]) -> Result<Self, OpsError> {
        Self::new(rank, (0..len).map(f).collect())
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn nodes(&self) -> &[[CMat; 4]] {
        &self.data
    }
}

/// Removes the `ω`-trace: `G_ii ↦ G_ii − (G₁₁ + G₂₂)/2`.
pub fn project_primitive(g: &[CMat; 4]) -> [CMat; 4] {
    let half = (&g[0] + &g[3]).scale_re(0.5);
    [&g[0] - &half, g[1].clone(), g[2].clone(), &g[3] - &half]
}

/// Pointwise densities and their ratio. `ratio[k]` is `None` where both vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct KlReport {
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub ratio: Vec<Option<f64>>,
    /// Mean of the defined ratios.
    pub constant: Option<f64>,
    /// Relative standard deviation of the defined ratios.
    pub rel_std: Option<f64>,
}

/// Evaluates both sides of the Kobayashi–Lübke identity node by node.
///
/// Inputs whose `ω`-trace exceeds `tol` relative to the form are rejected;
/// smaller traces are projected away first.
pub fn kobayashi_lubke_pointwise(field: &Form11Field, grid: &SurfaceGrid, tol: f64) -> Result<KlReport, OpsError> {
    if field.len() != grid.len() {
        return Err(OpsError::Field(crate::field::FieldError::SizeMismatch { expected: grid.len(), got: field.len() }));
    }
    let rho2 = grid.rho * grid.rho;
    let mut lhs = Vec::with_capacity(field.len());
    let mut rhs = Vec::with_capacity(field.len());
    let mut ratio = Vec::with_capacity(field.len());
    for (k, g) in field.nodes().iter().enumerate() {
        let size = g.iter().map(|m| m.norm().powi(2)).sum::<f64>().sqrt();
        let trace = (&g[0] + &g[3]).norm();
        if trace > tol * size {
            return Err(OpsError::NotPrimitive { node: k, value: trace });
        }
        let p = project_primitive(g);
        let cross = (&p[0] * &p[3]).trace() - (&p[1] * &p[2]).trace();
        let l = 8.0 * cross.re / rho2;
        let r = 4.0 * p.iter().map(|m| m.norm().powi(2)).sum::<f64>() / rho2;
        lhs.push(l);
        rhs.push(r);
        ratio.push((r > 0.0).then(|| l / r));
    }
    let defined: Vec<f64> = ratio.iter().flatten().copied().collect();
    let (constant, rel_std) = if defined.is_empty() {
        (None, None)
    } else {
        let n = defined.len() as f64;
        let mean = defined.iter().sum::<f64>() / n;
        let var = defined.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        (Some(mean), Some(var.sqrt() / mean.abs()))
    };
    Ok(KlReport { lhs, rhs, ratio, constant, rel_std })
}
