//! Spectral solver for `(σ + τΔ)φ = f` with the 5-point Laplacian.
//!
//! Periodic directions are diagonalized by FFT; the radial direction of an
//! annulus is solved per angular mode by the Thomas algorithm with `φ = 0`
//! on the boundary layers.

use crate::grid::GridDomain;
use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

pub(crate) struct Poisson {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    annulus: bool,
    fy: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
    fx: Option<(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>,
}

impl Poisson {
    pub fn new(g: &GridDomain) -> Self {
        let mut planner = FftPlanner::new();
        let fy = (planner.plan_fft_forward(g.ny()), planner.plan_fft_inverse(g.ny()));
        let fx = (!g.is_annulus()).then(|| (planner.plan_fft_forward(g.nx()), planner.plan_fft_inverse(g.nx())));
        Poisson { nx: g.nx(), ny: g.ny(), dx: g.dx(), dy: g.dy(), annulus: g.is_annulus(), fy, fx }
    }

    /// Eigenvalue of the 1-D second difference for mode `m` of `n`.
    fn symbol(m: usize, n: usize, h: f64) -> f64 {
        (2.0 * (2.0 * PI * m as f64 / n as f64).cos() - 2.0) / (h * h)
    }

    /// Solves `(σ + τΔ)φ = f` in place. On the torus a singular zero mode is set to zero.
    /// On the annulus boundary-layer values of `f` are ignored and `φ` vanishes there.
    pub fn solve(&self, f: &mut [C64], sigma: f64, tau: f64) {
        let (nx, ny) = (self.nx, self.ny);
        for col in f.chunks_mut(ny) {
            self.fy.0.process(col);
        }
        let mut line = vec![C64::new(0.0, 0.0); nx];
        if let Some((fwd, inv)) = &self.fx {
            for j in 0..ny {
                for (i, v) in line.iter_mut().enumerate() {
                    *v = f[i * ny + j];
                }
                fwd.process(&mut line);
                let sy = Self::symbol(j, ny, self.dy);
                for (i, v) in line.iter_mut().enumerate() {
                    let d = sigma + tau * (Self::symbol(i, nx, self.dx) + sy);
                    let singular = d.abs() < 1e-300 || (i == 0 && j == 0 && sigma == 0.0);
                    *v = if singular { C64::new(0.0, 0.0) } else { *v / d };
                }
                inv.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    f[i * ny + j] = *v;
                }
            }
        } else {
            let n = nx - 2;
            let off = tau / (self.dx * self.dx);
            let mut c = vec![0.0; n];
            let mut d = vec![C64::new(0.0, 0.0); n];
            for j in 0..ny {
                let diag = sigma + tau * (Self::symbol(j, ny, self.dy) - 2.0 / (self.dx * self.dx));
                let mut prev_c = 0.0;
                let mut prev_d = C64::new(0.0, 0.0);
                for k in 0..n {
                    let denom = diag - off * prev_c;
                    c[k] = off / denom;
                    d[k] = (f[(k + 1) * ny + j] - prev_d * off) / denom;
                    prev_c = c[k];
                    prev_d = d[k];
                }
                let mut next = C64::new(0.0, 0.0);
                for k in (0..n).rev() {
                    next = d[k] - next * c[k];
                    f[(k + 1) * ny + j] = next;
                }
                f[j] = C64::new(0.0, 0.0);
                f[(nx - 1) * ny + j] = C64::new(0.0, 0.0);
            }
        }
        let scale = 1.0 / (ny as f64 * if self.annulus { 1.0 } else { nx as f64 });
        for col in f.chunks_mut(ny) {
            self.fy.1.process(col);
            for v in col.iter_mut() {
                *v *= scale;
            }
        }
    }
}
