//! Domain types shared by the density, sampling and fitting modules.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{domain, Error, Result};
use crate::linalg::{spd_factorize, SpdFactor};

/// Block structure of a multivector: `k` contiguous blocks of sizes `dims`,
/// plus the auxiliary block dimension `n0` used by the t / Pearson II
/// constructions.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    dims: Vec<usize>,
    n0: Option<usize>,
}

impl Partition {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return domain("partition needs at least one block");
        }
        if let Some(i) = dims.iter().position(|&d| d == 0) {
            return domain(format!("block {i} has dimension 0"));
        }
        Ok(Self { dims, n0: None })
    }

    pub fn with_aux(dims: Vec<usize>, n0: usize) -> Result<Self> {
        if n0 == 0 {
            return domain("auxiliary dimension n0 must be >= 1");
        }
        let mut p = Self::new(dims)?;
        p.n0 = Some(n0);
        Ok(p)
    }

    pub fn k(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n0(&self) -> Option<usize> {
        self.n0
    }

    /// Total dimension Σ nᵢ (excluding `n0`).
    pub fn total(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Offsets of each block within a flattened vector.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.k());
        let mut acc = 0;
        for &d in &self.dims {
            off.push(acc);
            acc += d;
        }
        off
    }

    /// Splits `x` into its contiguous blocks.
    pub fn split<'a>(&self, x: &'a [f64]) -> Result<Vec<&'a [f64]>> {
        if x.len() != self.total() {
            return Err(Error::DimensionMismatch {
                expected: self.total(),
                got: x.len(),
            });
        }
        let mut out = Vec::with_capacity(self.k());
        let mut rest = x;
        for &d in &self.dims {
            let (head, tail) = rest.split_at(d);
            out.push(head);
            rest = tail;
        }
        Ok(out)
    }
}

/// Checks `x` against `p` and returns its block views.
pub fn validate_partition<'a>(p: &Partition, x: &'a [f64]) -> Result<Vec<&'a [f64]>> {
    p.split(x)
}

/// Real shape parameters replacing nᵢ/2 in the extended families.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedShape {
    alpha0: f64,
    alphas: Vec<f64>,
    alpha_star: f64,
}

impl ExtendedShape {
    pub fn new(alpha0: f64, alphas: Vec<f64>) -> Result<Self> {
        positive("alpha0", &[alpha0])?;
        positive("alpha", &alphas)?;
        if alphas.is_empty() {
            return domain("at least one shape parameter is required");
        }
        let alpha_star = alpha0 + alphas.iter().sum::<f64>();
        Ok(Self {
            alpha0,
            alphas,
            alpha_star,
        })
    }

    /// Shapes nᵢ/2 of an integer partition (`n0` must be present).
    pub fn from_partition(p: &Partition) -> Result<Self> {
        let n0 = p
            .n0()
            .ok_or_else(|| Error::ParameterOutOfDomain("partition has no n0".into()))?;
        Self::new(
            n0 as f64 / 2.0,
            p.dims().iter().map(|&d| d as f64 / 2.0).collect(),
        )
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha_star(&self) -> f64 {
        self.alpha_star
    }

    pub fn k(&self) -> usize {
        self.alphas.len()
    }
}

/// Per-block locations and SPD scale matrices of a multivector elliptical law.
#[derive(Debug, Clone)]
pub struct MvEllipticalParams {
    pub partition: Partition,
    pub mus: Vec<Vec<f64>>,
    pub sigmas: Vec<DMatrix<f64>>,
    pub(crate) factors: Vec<SpdFactor>,
}

impl MvEllipticalParams {
    pub fn new(
        partition: Partition,
        mus: Vec<Vec<f64>>,
        sigmas: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let k = partition.k();
        for (len, want) in [(mus.len(), k), (sigmas.len(), k)] {
            if len != want {
                return Err(Error::DimensionMismatch {
                    expected: want,
                    got: len,
                });
            }
        }
        let mut factors = Vec::with_capacity(k);
        for (i, &d) in partition.dims().iter().enumerate() {
            if mus[i].len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: mus[i].len(),
                });
            }
            if let Some(j) = mus[i].iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteInput(j));
            }
            if sigmas[i].nrows() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: sigmas[i].nrows(),
                });
            }
            factors.push(spd_factorize(&sigmas[i])?);
        }
        Ok(Self {
            partition,
            mus,
            sigmas,
            factors,
        })
    }

    /// Zero locations and identity scales.
    pub fn standard(partition: Partition) -> Result<Self> {
        let mus = partition.dims().iter().map(|&d| vec![0.0; d]).collect();
        let sigmas = partition
            .dims()
            .iter()
            .map(|&d| DMatrix::identity(d, d))
            .collect();
        Self::new(partition, mus, sigmas)
    }

    pub fn factors(&self) -> &[SpdFactor] {
        &self.factors
    }

    /// Σᵢ log|Σᵢᵢ|.
    pub fn logdet(&self) -> f64 {
        self.factors.iter().map(SpdFactor::logdet).sum()
    }
}

/// Shapes (αᵢ) and scales (σᵢ) of the scalar generalised-gamma families.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleShapeParams {
    pub shapes: Vec<f64>,
    pub scales: Vec<f64>,
}

impl ScaleShapeParams {
    pub fn new(shapes: Vec<f64>, scales: Vec<f64>) -> Result<Self> {
        if shapes.len() != scales.len() {
            return Err(Error::DimensionMismatch {
                expected: shapes.len(),
                got: scales.len(),
            });
        }
        if shapes.is_empty() {
            return domain("at least one block is required");
        }
        positive("shape", &shapes)?;
        positive("scale", &scales)?;
        Ok(Self { shapes, scales })
    }

    pub fn k(&self) -> usize {
        self.shapes.len()
    }
}

pub(crate) fn positive(name: &str, values: &[f64]) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if !(v > 0.0) || !v.is_finite() {
            return domain(format!("{name}[{i}] must be positive and finite, got {v}"));
        }
    }
    Ok(())
}

/// Row-major observation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput(i));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in columns {
                if c.len() != rows {
                    return Err(Error::DimensionMismatch {
                        expected: rows,
                        got: c.len(),
                    });
                }
                values.push(c[r]);
            }
        }
        Self::new(rows, cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.values[r * self.cols + c])
            .collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Errors with the offending (row, column) if any entry is not > 0.
    pub fn require_positive(&self) -> std::result::Result<(), (usize, usize, f64)> {
        match self.values.iter().position(|&v| !(v > 0.0)) {
            None => Ok(()),
            Some(i) => Err((i / self.cols, i % self.cols, self.values[i])),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    Dependent,
    Independent,
}

impl FitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FitMode::Dependent => "dependent",
            FitMode::Independent => "independent",
        }
    }
}

/// Outcome of a maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: BTreeMap<String, f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub mode: FitMode,
    /// (label, final log-likelihood) for every restart that was run.
    pub restarts: Vec<(String, f64)>,
    /// Parameters that ended on the edge of the optimizer's search box.
    pub at_bound: Vec<String>,
}
