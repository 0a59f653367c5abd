//! Discretized curve domains: a flat periodic torus or a log-polar annulus.
//!
//! Charts use `w = x + iy` on the torus and `w = log z = s + iφ` on the
//! annulus. The Kähler form is `ω = (√−1/2)·ρ·dw∧dw̄`, so
//! `√−1·Λ_ω(K dw∧dw̄) = 2K/ρ` and `dvol = ρ·dx·dy`.
//!
//! Annulus grids place `n` evaluation nodes uniformly in `s` on
//! `[log r_min, log r_max]` (both ends included) and add one boundary layer on
//! each side, which carries Dirichlet data and feeds the stencils.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// Errors raised when building a grid.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("resolution must be at least 8 per axis, got {0}")]
    ResolutionTooLow(usize),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("kahler weight must be positive and finite at every node")]
    BadKahlerWeight,
}

impl GridError {
    pub fn kind(&self) -> &'static str {
        match self {
            GridError::ResolutionTooLow(_) => "resolution-too-low",
            GridError::InvalidDomain(_) => "out-of-domain",
            GridError::BadKahlerWeight => "bad-kahler-weight",
        }
    }
}

/// Domain shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainKind {
    /// Periodic rectangle `[0, lx) × [0, ly)`.
    Torus { lx: f64, ly: f64 },
    /// `r_min ≤ |z| ≤ r_max` in log-polar coordinates.
    Annulus { r_min: f64, r_max: f64 },
}

/// Uniform grid with a per-node Kähler weight.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    kind: DomainKind,
    resolution: usize,
    nx: usize,
    ny: usize,
    x0: f64,
    dx: f64,
    dy: f64,
    kahler_weight: Vec<f64>,
}

impl GridDomain {
    /// Flat torus with `n` nodes per axis and `ρ ≡ 1`.
    pub fn torus(lx: f64, ly: f64, n: usize) -> Result<Self, GridError> {
        if n < 8 {
            return Err(GridError::ResolutionTooLow(n));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(GridError::InvalidDomain("torus periods must be positive".into()));
        }
        Ok(GridDomain {
            kind: DomainKind::Torus { lx, ly },
            resolution: n,
            nx: n,
            ny: n,
            x0: 0.0,
            dx: lx / n as f64,
            dy: ly / n as f64,
            kahler_weight: vec![1.0; n * n],
        })
    }

    /// Annulus with `n` evaluation nodes per axis and the Euclidean weight `ρ = |z|²`.
    pub fn annulus(r_min: f64, r_max: f64, n: usize) -> Result<Self, GridError> {
        if n < 8 {
            return Err(GridError::ResolutionTooLow(n));
        }
        if !(r_min > 0.0 && r_min < r_max && r_max.is_finite()) {
            return Err(GridError::InvalidDomain(format!("annulus needs 0 < r_min < r_max, got ({r_min}, {r_max})")));
        }
        let dx = (r_max.ln() - r_min.ln()) / (n - 1) as f64;
        let mut g = GridDomain {
            kind: DomainKind::Annulus { r_min, r_max },
            resolution: n,
            nx: n + 2,
            ny: n,
            x0: r_min.ln() - dx,
            dx,
            dy: 2.0 * PI / n as f64,
            kahler_weight: Vec::new(),
        };
        g.kahler_weight = (0..g.len()).map(|k| (2.0 * g.x(k / g.ny)).exp()).collect();
        Ok(g)
    }

    /// Replaces the Kähler weight.
    pub fn with_kahler_weight(mut self, rho: Vec<f64>) -> Result<Self, GridError> {
        if rho.len() != self.len() || !rho.iter().all(|r| *r > 0.0 && r.is_finite()) {
            return Err(GridError::BadKahlerWeight);
        }
        self.kahler_weight = rho;
        Ok(self)
    }

    /// Cylinder metric `ρ ≡ 1` in the chart coordinate.
    pub fn with_flat_chart_metric(mut self) -> Self {
        self.kahler_weight = vec![1.0; self.len()];
        self
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn is_annulus(&self) -> bool {
        matches!(self.kind, DomainKind::Annulus { .. })
    }

    /// Evaluation nodes per axis.
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Total node count, boundary layers included.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    /// Largest chart spacing.
    pub fn spacing(&self) -> f64 {
        self.dx.max(self.dy)
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k / self.ny, k % self.ny)
    }

    /// Chart coordinate `x` (or `s = log|z|`) of column `i`.
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    /// Chart coordinate `y` (or `φ = arg z`) of row `j`.
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy
    }

    /// Chart coordinate `w` at node `k`.
    pub fn w(&self, k: usize) -> C64 {
        let (i, j) = self.ij(k);
        C64::new(self.x(i), self.y(j))
    }

    /// `|z|` at node `k` on the annulus, `None` on the torus.
    pub fn abs_z(&self, k: usize) -> Option<f64> {
        self.is_annulus().then(|| self.x(self.ij(k).0).exp())
    }

    /// `z = e^w` at node `k` (annulus only).
    pub fn z(&self, k: usize) -> Option<C64> {
        self.is_annulus().then(|| self.w(k).exp())
    }

    pub fn kahler_weight(&self) -> &[f64] {
        &self.kahler_weight
    }

    /// Whether node `k` is an evaluation node (not a Dirichlet boundary node).
    pub fn is_interior(&self, k: usize) -> bool {
        match self.kind {
            DomainKind::Torus { .. } => true,
            DomainKind::Annulus { .. } => {
                let i = k / self.ny;
                i >= 1 && i + 1 < self.nx
            }
        }
    }

    /// Evaluation nodes in storage order.
    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&k| self.is_interior(k))
    }

    /// Neighbours `(x+, x−, y+, y−)` of an evaluation node.
    pub fn neighbours(&self, k: usize) -> [usize; 4] {
        let (i, j) = self.ij(k);
        let (ip, im) = match self.kind {
            DomainKind::Torus { .. } => ((i + 1) % self.nx, (i + self.nx - 1) % self.nx),
            DomainKind::Annulus { .. } => (i + 1, i - 1),
        };
        let jp = (j + 1) % self.ny;
        let jm = (j + self.ny - 1) % self.ny;
        [self.idx(ip, j), self.idx(im, j), self.idx(i, jp), self.idx(i, jm)]
    }

    /// Chart cell area `dx·dy`.
    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    /// Volume element `ρ·dx·dy` at node `k`.
    pub fn dvol(&self, k: usize) -> f64 {
        self.kahler_weight[k] * self.cell_area()
    }

    /// Multiplier turning a `dw∧dw̄` coefficient into `√−1·Λ_ω` of the form.
    pub fn lambda_factor(&self, k: usize) -> f64 {
        2.0 / self.kahler_weight[k]
    }

    /// `Σ f·dvol` over evaluation nodes.
    pub fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.interior().map(|k| f(k) * self.dvol(k)).sum()
    }

    /// Total volume of the evaluation region.
    pub fn volume(&self) -> f64 {
        self.integrate(|_| 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annulus_layout() {
        let g = GridDomain::annulus(0.2, 0.8, 16).unwrap();
        assert_eq!(g.nx(), 18);
        assert_eq!(g.interior().count(), 16 * 16);
        assert!((g.abs_z(g.idx(1, 0)).unwrap() - 0.2).abs() < 1e-14);
        assert!((g.abs_z(g.idx(16, 3)).unwrap() - 0.8).abs() < 1e-14);
        assert!((g.kahler_weight()[g.idx(1, 0)] - 0.04).abs() < 1e-14);
        assert!(!g.is_interior(g.idx(0, 5)));
        assert!(GridDomain::annulus(0.2, 0.8, 4).is_err());
        assert!(GridDomain::annulus(0.8, 0.2, 16).is_err());
    }

    #[test]
    fn torus_wraps() {
        let g = GridDomain::torus(1.0, 2.0, 8).unwrap();
        let [xp, xm, yp, ym] = g.neighbours(g.idx(0, 0));
        assert_eq!(g.ij(xp), (1, 0));
        assert_eq!(g.ij(xm), (7, 0));
        assert_eq!(g.ij(yp), (0, 1));
        assert_eq!(g.ij(ym), (0, 7));
        assert!((g.volume() - 2.0).abs() < 1e-12);
    }
}
