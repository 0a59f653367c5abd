//! Small dense complex matrices for per-node kernels.
//!
//! Grid fields hold one `r×r` matrix per node with `r` rarely above 4, so the
//! storage is inline for `r ≤ 3` and the Hermitian eigensolver has a closed
//! form for `r = 2`; larger sizes fall back to cyclic Jacobi rotations.

use num_complex::Complex64 as C64;
use smallvec::SmallVec;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    n: usize,
    d: SmallVec<[C64; 9]>,
}

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat { n, d: smallvec::smallvec![ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.d[i * n + i] = ONE;
        }
        m
    }

    /// Real diagonal matrix.
    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, &v) in diag.iter().enumerate() {
            m.d[i * n + i] = C64::new(v, 0.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.d[i * n + j] = f(i, j);
            }
        }
        m
    }

    /// Builds from row-major entries; panics unless `entries.len()` is a square.
    pub fn from_rows(entries: &[C64]) -> Self {
        let n = (entries.len() as f64).sqrt().round() as usize;
        assert_eq!(n * n, entries.len(), "entry count must be a perfect square");
        CMat { n, d: SmallVec::from_slice(entries) }
    }

    /// Matrix unit `E_{ij}` with 0-based indices.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n);
        m.d[i * n + j] = ONE;
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[C64] {
        &self.d
    }

    pub fn scale(&self, s: C64) -> Self {
        CMat { n: self.n, d: self.d.iter().map(|&x| x * s).collect() }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        CMat { n: self.n, d: self.d.iter().map(|&x| x * s).collect() }
    }

    /// In-place `self += s·other`.
    pub fn axpy(&mut self, s: C64, other: &CMat) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.d.iter_mut().zip(&other.d) {
            *a += s * b;
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let n = self.n;
        CMat::from_fn(n, |i, j| self.d[j * n + i].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.d[i * self.n + i]).sum()
    }

    /// `ab − ba`.
    pub fn commutator(a: &CMat, b: &CMat) -> CMat {
        a * b - b * a
    }

    /// `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        let n = self.n;
        CMat::from_fn(n, |i, j| (self.d[i * n + j] + self.d[j * n + i].conj()) * 0.5)
    }

    /// Adjoint with respect to `h(u, v) = v† H u`: `H⁻¹ A† H`.
    pub fn h_adjoint(&self, h: &CMat, hinv: &CMat) -> Self {
        &(hinv * &self.adjoint()) * h
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.d.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.d.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// `Tr(X X^{†h})`, the squared pointwise norm of `X` for the metric `H`.
    pub fn h_norm_sqr(&self, h: &CMat, hinv: &CMat) -> f64 {
        (self * &self.h_adjoint(h, hinv)).trace().re.max(0.0)
    }

    /// Inverse by Gauss–Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Option<CMat> {
        let n = self.n;
        if n == 1 {
            let v = self.d[0];
            return (v.norm() > 0.0).then(|| CMat { n, d: smallvec::smallvec![v.inv()] });
        }
        if n == 2 {
            let det = self.det();
            if det.norm() == 0.0 || !det.is_finite() {
                return None;
            }
            let inv = det.inv();
            let [a, b, c, d] = [self.d[0], self.d[1], self.d[2], self.d[3]];
            return Some(CMat { n, d: smallvec::smallvec![d * inv, -b * inv, -c * inv, a * inv] });
        }
        let mut a = self.clone();
        let mut inv = CMat::identity(n);
        for col in 0..n {
            let piv = (col..n).max_by(|&x, &y| a[(x, col)].norm().total_cmp(&a[(y, col)].norm()))?;
            if a[(piv, col)].norm() == 0.0 {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    a.d.swap(piv * n + j, col * n + j);
                    inv.d.swap(piv * n + j, col * n + j);
                }
            }
            let p = a[(col, col)].inv();
            for j in 0..n {
                a.d[col * n + j] *= p;
                inv.d[col * n + j] *= p;
            }
            for r in 0..n {
                if r != col {
                    let f = a[(r, col)];
                    if f != ZERO {
                        for j in 0..n {
                            let (av, iv) = (a.d[col * n + j], inv.d[col * n + j]);
                            a.d[r * n + j] -= f * av;
                            inv.d[r * n + j] -= f * iv;
                        }
                    }
                }
            }
        }
        Some(inv)
    }

    /// Determinant by LU elimination.
    pub fn det(&self) -> C64 {
        let n = self.n;
        match n {
            0 => ONE,
            1 => self.d[0],
            2 => self.d[0] * self.d[3] - self.d[1] * self.d[2],
            _ => {
                let mut a = self.clone();
                let mut det = ONE;
                for col in 0..n {
                    let piv = (col..n).max_by(|&x, &y| a[(x, col)].norm().total_cmp(&a[(y, col)].norm())).unwrap();
                    if a[(piv, col)].norm() == 0.0 {
                        return ZERO;
                    }
                    if piv != col {
                        for j in 0..n {
                            a.d.swap(piv * n + j, col * n + j);
                        }
                        det = -det;
                    }
                    let p = a[(col, col)];
                    det *= p;
                    for r in col + 1..n {
                        let f = a[(r, col)] / p;
                        for j in col..n {
                            let v = a.d[col * n + j];
                            a.d[r * n + j] -= f * v;
                        }
                    }
                }
                det
            }
        }
    }

    /// Eigen-decomposition of a Hermitian matrix (only the upper triangle is read
    /// for `n = 2`): ascending eigenvalues and unitary eigenvector columns.
    pub fn eigh(&self) -> (SmallVec<[f64; 3]>, CMat) {
        match self.n {
            1 => (smallvec::smallvec![self.d[0].re], CMat::identity(1)),
            2 => eigh2(self),
            _ => eigh_jacobi(self),
        }
    }

    /// Smallest eigenvalue of a Hermitian matrix.
    pub fn min_eig(&self) -> f64 {
        self.eigh().0[0]
    }

    /// `f(A) = V f(Λ) V†` for Hermitian `A`.
    pub fn herm_fn(&self, f: impl Fn(f64) -> f64) -> CMat {
        let (w, v) = self.eigh();
        let fw: SmallVec<[f64; 3]> = w.iter().map(|&x| f(x)).collect();
        v.scale_columns(&fw).mul_adjoint(&v)
    }

    /// `A·diag(s)`.
    fn scale_columns(&self, s: &[f64]) -> CMat {
        let n = self.n;
        CMat::from_fn(n, |i, j| self.d[i * n + j] * s[j])
    }

    /// `A·B†`.
    pub fn mul_adjoint(&self, b: &CMat) -> CMat {
        let n = self.n;
        CMat::from_fn(n, |i, j| (0..n).map(|k| self.d[i * n + k] * b.d[j * n + k].conj()).sum())
    }

    pub fn is_finite(&self) -> bool {
        self.d.iter().all(|x| x.is_finite())
    }
}

/// Closed-form Hermitian eigen-decomposition for `2×2`.
fn eigh2(m: &CMat) -> (SmallVec<[f64; 3]>, CMat) {
    let a = m.d[0].re;
    let d = m.d[3].re;
    let b = m.d[1];
    let half = 0.5 * (a - d);
    let mean = 0.5 * (a + d);
    let bn = b.norm();
    let r = half.hypot(bn);
    if bn <= f64::EPSILON * 1e-3 * (a.abs() + d.abs()) || bn == 0.0 {
        return if a <= d {
            (smallvec::smallvec![a, d], CMat::identity(2))
        } else {
            (smallvec::smallvec![d, a], CMat::from_rows(&[ZERO, ONE, ONE, ZERO]))
        };
    }
    let hi = mean + r;
    let lo = if mean > 0.0 { (a * d - bn * bn) / hi } else { mean - r };
    // Eigenvector of `hi`, taken from whichever row is better conditioned.
    let (x, y) = if a >= d { (C64::new(hi - d, 0.0), b.conj()) } else { (b, C64::new(hi - a, 0.0)) };
    let nrm = (x.norm_sqr() + y.norm_sqr()).sqrt();
    let (x, y) = (x / nrm, y / nrm);
    // Columns: (−ȳ, x̄) for `lo`, (x, y) for `hi`.
    let v = CMat::from_rows(&[-y.conj(), x, x.conj(), y]);
    (smallvec::smallvec![lo, hi], v)
}

/// Cyclic Jacobi for Hermitian matrices of any size.
fn eigh_jacobi(m: &CMat) -> (SmallVec<[f64; 3]>, CMat) {
    let n = m.n;
    let mut a = m.hermitian_part();
    let mut v = CMat::identity(n);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].norm_sqr()).sum();
        if off.sqrt() <= 1e-16 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                let phase = apq / r;
                let theta = (a[(q, q)].re - a[(p, p)].re) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // U on the (p, q) plane: [[c, s],[−s·e^{−iφ}, c·e^{−iφ}]].
                let upp = C64::new(c, 0.0);
                let upq = C64::new(s, 0.0);
                let uqp = -phase.conj() * s;
                let uqq = phase.conj() * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = akp * upp + akq * uqp;
                    a[(k, q)] = akp * upq + akq * uqq;
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vkp * upp + vkq * uqp;
                    v[(k, q)] = vkp * upq + vkq * uqq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = upp.conj() * apk + uqp.conj() * aqk;
                    a[(q, k)] = upq.conj() * apk + uqq.conj() * aqk;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let w = idx.iter().map(|&i| a[(i, i)].re).collect();
    let vs = CMat::from_fn(n, |i, j| v[(i, idx[j])]);
    (w, vs)
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.d[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.d[i * self.n + j]
    }
}

impl Mul for &CMat {
    type Output = CMat;
    fn mul(self, rhs: &CMat) -> CMat {
        let n = self.n;
        debug_assert_eq!(n, rhs.n);
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.d[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.d[i * n + j] += a * rhs.d[k * n + j];
                }
            }
        }
        out
    }
}

impl Mul for CMat {
    type Output = CMat;
    fn mul(self, rhs: CMat) -> CMat {
        &self * &rhs
    }
}

impl Add for &CMat {
    type Output = CMat;
    fn add(self, rhs: &CMat) -> CMat {
        CMat { n: self.n, d: self.d.iter().zip(&rhs.d).map(|(a, b)| a + b).collect() }
    }
}

impl Add for CMat {
    type Output = CMat;
    fn add(mut self, rhs: CMat) -> CMat {
        self += &rhs;
        self
    }
}

impl Sub for &CMat {
    type Output = CMat;
    fn sub(self, rhs: &CMat) -> CMat {
        CMat { n: self.n, d: self.d.iter().zip(&rhs.d).map(|(a, b)| a - b).collect() }
    }
}

impl Sub for CMat {
    type Output = CMat;
    fn sub(mut self, rhs: CMat) -> CMat {
        self -= &rhs;
        self
    }
}

impl AddAssign<&CMat> for CMat {
    fn add_assign(&mut self, rhs: &CMat) {
        for (a, b) in self.d.iter_mut().zip(&rhs.d) {
            *a += b;
        }
    }
}

impl SubAssign<&CMat> for CMat {
    fn sub_assign(&mut self, rhs: &CMat) {
        for (a, b) in self.d.iter_mut().zip(&rhs.d) {
            *a -= b;
        }
    }
}

impl Neg for CMat {
    type Output = CMat;
    fn neg(mut self) -> CMat {
        for a in self.d.iter_mut() {
            *a = -*a;
        }
        self
    }
}

/// Metric-dependent data reused by several per-node kernels.
#[derive(Clone, Debug)]
pub struct MetricFactors {
    pub h: CMat,
    pub hinv: CMat,
    pub sqrt: CMat,
    pub inv_sqrt: CMat,
    pub min_eig: f64,
}

impl MetricFactors {
    /// Factors a positive-definite Hermitian matrix; `None` when it is not.
    pub fn new(h: &CMat) -> Option<Self> {
        let (w, v) = h.eigh();
        if !(w[0] > 0.0) || !w.iter().all(|x| x.is_finite()) {
            return None;
        }
        let s: SmallVec<[f64; 3]> = w.iter().map(|x| x.sqrt()).collect();
        let si: SmallVec<[f64; 3]> = s.iter().map(|x| 1.0 / x).collect();
        let inv: SmallVec<[f64; 3]> = w.iter().map(|x| 1.0 / x).collect();
        Some(MetricFactors {
            h: h.clone(),
            hinv: v.scale_columns(&inv).mul_adjoint(&v),
            sqrt: v.scale_columns(&s).mul_adjoint(&v),
            inv_sqrt: v.scale_columns(&si).mul_adjoint(&v),
            min_eig: w[0],
        })
    }

    /// `log(H⁻¹ H')` through the congruence `H^{-1/2} H' H^{-1/2}`.
    pub fn log_ratio(&self, other: &CMat) -> CMat {
        let s = &(&self.inv_sqrt * other) * &self.inv_sqrt;
        let l = s.hermitian_part().herm_fn(f64::ln);
        &(&self.inv_sqrt * &l) * &self.sqrt
    }
}
