//! Dense SPD factorization and the block quadratic form shared by every
//! elliptical density.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::params::MvEllipticalParams;

/// Absolute/relative tolerance for the symmetry precondition.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Cholesky factor of a symmetric positive definite matrix together with its
/// log-determinant.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    logdet: f64,
}

impl SpdFactor {
    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// Solves `S x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), b.len())?;
        let x = self.chol.solve(&DVector::from_column_slice(b));
        Ok(x.iter().copied().collect())
    }

    /// `xᵀ S⁻¹ x`, computed as `‖L⁻¹x‖²`.
    pub fn quadform(&self, x: &[f64]) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        let l = self.chol.l_dirty();
        let n = x.len();
        let mut y = vec![0.0; n];
        let mut acc = 0.0;
        for i in 0..n {
            let mut v = x[i];
            for j in 0..i {
                v -= l[(i, j)] * y[j];
            }
            y[i] = v / l[(i, i)];
            acc += y[i] * y[i];
        }
        Ok(acc)
    }

    /// Lower-triangular factor `L` with `S = L Lᵀ`.
    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// `L z`, the map used to turn a spherical draw into an elliptical one.
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        let l = self.chol.l_dirty();
        (0..z.len())
            .map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum())
            .collect()
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Factorizes a symmetric positive definite matrix.
pub fn spd_factorize(s: &DMatrix<f64>) -> Result<SpdFactor> {
    let n = s.nrows();
    check_len(n, s.ncols())?;
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (s[(i, j)], s[(j, i)]);
            let gap = (a - b).abs();
            if !(gap <= SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0)) {
                return Err(Error::NotSymmetric {
                    row: i,
                    col: j,
                    gap,
                });
            }
        }
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    let chol = Cholesky::new(s.clone()).ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l_dirty();
    let mut logdet = 0.0;
    for i in 0..n {
        let d = l[(i, i)];
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        logdet += 2.0 * d.ln();
    }
    Ok(SpdFactor { chol, logdet })
}

/// Σᵢ (xᵢ−μᵢ)ᵀ Σᵢᵢ⁻¹ (xᵢ−μᵢ) over the blocks of `params`.
pub fn block_quadform(params: &MvEllipticalParams, x: &[f64]) -> Result<f64> {
    let blocks = params.partition.split(x)?;
    let mut total = 0.0;
    for (i, block) in blocks.iter().enumerate() {
        let centred: Vec<f64> = block
            .iter()
            .zip(&params.mus[i])
            .map(|(a, m)| a - m)
            .collect();
        total += params.factors[i].quadform(&centred)?;
    }
    Ok(total)
}
