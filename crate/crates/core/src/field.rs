//! Grid-sampled matrix fields and their flat dump formats.
//!
//! Binary dumps are the raw node-major sequence of row-major matrices, each
//! complex entry written as `(re, im)` little-endian `f64`. CSV dumps start
//! with the header `node,x,y,m00_re,m00_im,m01_re,...` and hold one node per line.

use crate::grid::GridDomain;
use crate::linalg::{CMat, MetricFactors};
use num_complex::Complex64 as C64;
use std::io::{self, BufRead, Read, Write};

/// Errors raised by field construction and I/O.
#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("field has {got} nodes but the grid has {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("matrices must all be {rank}x{rank}")]
    RankMismatch { rank: usize },
    #[error("metric is not Hermitian positive definite at node {node}")]
    BadMetric { node: usize },
    #[error("malformed dump: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl FieldError {
    pub fn kind(&self) -> &'static str {
        match self {
            FieldError::SizeMismatch { .. } | FieldError::RankMismatch { .. } => "field-shape",
            FieldError::BadMetric { .. } => "bad-metric",
            FieldError::Malformed(_) => "malformed-dump",
            FieldError::Io(_) => "io",
        }
    }
}

/// One `r×r` complex matrix per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct MatField {
    rank: usize,
    data: Vec<CMat>,
}

impl MatField {
    pub fn new(rank: usize, data: Vec<CMat>) -> Result<Self, FieldError> {
        if data.iter().any(|m| m.dim() != rank) {
            return Err(FieldError::RankMismatch { rank });
        }
        Ok(MatField { rank, data })
    }

    pub fn zeros(rank: usize, len: usize) -> Self {
        MatField { rank, data: vec![CMat::zeros(rank); len] }
    }

    pub fn from_fn(rank: usize, len: usize, f: impl FnMut(usize) -> CMat) -> Self {
        let data: Vec<CMat> = (0..len).map(f).collect();
        debug_assert!(data.iter().all(|m| m.dim() == rank));
        MatField { rank, data }
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

    pub fn nodes(&self) -> &[CMat] {
        &self.data
    }

    pub fn nodes_mut(&mut self) -> &mut [CMat] {
        &mut self.data
    }

    pub fn into_nodes(self) -> Vec<CMat> {
        self.data
    }

    /// Largest Frobenius norm over the given nodes.
    pub fn sup_norm_over(&self, nodes: impl Iterator<Item = usize>) -> f64 {
        nodes.map(|k| self.data[k].norm()).fold(0.0, f64::max)
    }

    /// Writes the binary dump.
    pub fn write_binary(&self, mut out: impl Write) -> io::Result<()> {
        for m in &self.data {
            for z in m.as_slice() {
                out.write_all(&z.re.to_le_bytes())?;
                out.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a binary dump of `len` nodes of rank `rank`.
    pub fn read_binary(mut input: impl Read, rank: usize, len: usize) -> Result<Self, FieldError> {
        let mut buf = vec![0u8; len * rank * rank * 16];
        input.read_exact(&mut buf).map_err(|e| FieldError::Malformed(format!("short binary dump: {e}")))?;
        let vals: Vec<f64> = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let per = rank * rank * 2;
        let data = vals
            .chunks_exact(per)
            .map(|v| CMat::from_rows(&v.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect::<Vec<_>>()))
            .collect();
        Ok(MatField { rank, data })
    }

    /// Writes the CSV dump with node coordinates from `g`.
    pub fn write_csv(&self, g: &GridDomain, mut out: impl Write) -> io::Result<()> {
        let mut header = String::from("node,x,y");
        for a in 0..self.rank {
            for b in 0..self.rank {
                header.push_str(&format!(",m{a}{b}_re,m{a}{b}_im"));
            }
        }
        writeln!(out, "{header}")?;
        for (k, m) in self.data.iter().enumerate() {
            let (i, j) = g.ij(k);
            let mut line = format!("{k},{:.17e},{:.17e}", g.x(i), g.y(j));
            for z in m.as_slice() {
                line.push_str(&format!(",{:.17e},{:.17e}", z.re, z.im));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Reads a CSV dump written by [`MatField::write_csv`].
    pub fn read_csv(input: impl BufRead) -> Result<Self, FieldError> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| FieldError::Malformed("empty csv".into()))??;
        let cols = header.split(',').count();
        if cols < 5 || (cols - 3) % 2 != 0 {
            return Err(FieldError::Malformed(format!("bad header {header:?}")));
        }
        let entries = (cols - 3) / 2;
        let rank = (entries as f64).sqrt().round() as usize;
        if rank * rank != entries {
            return Err(FieldError::Malformed("entry count is not a square".into()));
        }
        let mut data = Vec::new();
        for (ln, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .skip(3)
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| FieldError::Malformed(format!("line {}: {e}", ln + 2)))?;
            if v.len() != entries * 2 {
                return Err(FieldError::Malformed(format!("line {} has {} values", ln + 2, v.len())));
            }
            data.push(CMat::from_rows(&v.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect::<Vec<_>>()));
        }
        Ok(MatField { rank, data })
    }
}

/// Hermitian positive-definite Gram matrix `H` of a metric `h(u, v) = v†Hu` per node.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField(MatField);

impl MetricField {
    /// Validates Hermitian symmetry (relative `1e-10`) and positivity at every node.
    pub fn new(field: MatField) -> Result<Self, FieldError> {
        for (k, m) in field.nodes().iter().enumerate() {
            let asym = (m - &m.adjoint()).norm();
            if !m.is_finite() || asym > 1e-10 * m.norm().max(1.0) || !(m.min_eig() > 0.0) {
                return Err(FieldError::BadMetric { node: k });
            }
        }
        Ok(MetricField(field))
    }

    /// Metric from a per-node closure.
    pub fn from_fn(rank: usize, len: usize, f: impl FnMut(usize) -> CMat) -> Result<Self, FieldError> {
        Self::new(MatField::from_fn(rank, len, f))
    }

    /// Constant identity metric.
    pub fn identity(rank: usize, len: usize) -> Self {
        MetricField(MatField { rank, data: vec![CMat::identity(rank); len] })
    }

    pub fn field(&self) -> &MatField {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.rank
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn nodes(&self) -> &[CMat] {
        &self.0.data
    }

    /// Multiplies by a positive constant.
    pub fn scaled(&self, c: f64) -> Self {
        MetricField(MatField { rank: self.0.rank, data: self.0.data.iter().map(|m| m.scale_re(c)).collect() })
    }

    /// Per-node factorizations; fails at the first non-positive node.
    pub fn factors(&self) -> Result<Vec<MetricFactors>, FieldError> {
        self.nodes()
            .iter()
            .enumerate()
            .map(|(k, h)| MetricFactors::new(h).ok_or(FieldError::BadMetric { node: k }))
            .collect()
    }

    pub fn check_grid(&self, g: &GridDomain) -> Result<(), FieldError> {
        if self.len() != g.len() {
            return Err(FieldError::SizeMismatch { expected: g.len(), got: self.len() });
        }
        Ok(())
    }
}

/// λ-connection `𝔇 = d'' + d'` with `d'' = ∂̄₀ + B dw̄` and `d' = λ∂₀ + A dw`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionField {
    pub lambda: C64,
    /// `(0,1)` coefficient `B`.
    pub a01: MatField,
    /// `(1,0)` coefficient `A`.
    pub a10: MatField,
}

impl ConnectionField {
    pub fn new(lambda: C64, a01: MatField, a10: MatField) -> Result<Self, FieldError> {
        if a01.len() != a10.len() {
            return Err(FieldError::SizeMismatch { expected: a01.len(), got: a10.len() });
        }
        if a01.rank() != a10.rank() {
            return Err(FieldError::RankMismatch { rank: a01.rank() });
        }
        Ok(ConnectionField { lambda, a01, a10 })
    }

    /// Trivial connection of the given rank.
    pub fn trivial(lambda: C64, rank: usize, len: usize) -> Self {
        ConnectionField { lambda, a01: MatField::zeros(rank, len), a10: MatField::zeros(rank, len) }
    }

    /// Higgs data (`λ = 0`, `d'' = ∂̄₀ + B`, `θ = Θ dw`).
    pub fn higgs(a01: MatField, theta: MatField) -> Result<Self, FieldError> {
        Self::new(C64::new(0.0, 0.0), a01, theta)
    }

    pub fn rank(&self) -> usize {
        self.a01.rank()
    }

    pub fn len(&self) -> usize {
        self.a01.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a01.is_empty()
    }

    pub fn check_grid(&self, g: &GridDomain) -> Result<(), FieldError> {
        if self.len() != g.len() {
            return Err(FieldError::SizeMismatch { expected: g.len(), got: self.len() });
        }
        Ok(())
    }
}
