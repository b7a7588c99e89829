//! Small dense helpers for symmetric positive definite matrices.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Relative pivot threshold below which a Cholesky factor is treated as singular.
const PIVOT_RTOL: f64 = 1e-13;

/// Cholesky factorisation with an explicit singularity check.
pub struct Spd {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Spd {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if n == 0 || m.ncols() != n {
            return Err(Error::SingularInformation(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max);
        let chol = m.clone().cholesky().ok_or_else(|| {
            Error::SingularInformation("matrix is not positive definite".into())
        })?;
        let l = chol.l_dirty();
        for i in 0..n {
            let piv = l[(i, i)] * l[(i, i)];
            if !(piv > PIVOT_RTOL * scale) {
                return Err(Error::SingularInformation(format!(
                    "pivot {i} is {piv:.3e} against diagonal scale {scale:.3e}"
                )));
            }
        }
        Ok(Spd { chol })
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let inv = self.chol.inverse();
        (&inv + inv.transpose()) * 0.5
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn log_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }
}

/// log det of a symmetric positive definite matrix.
pub fn log_det_spd(m: &DMatrix<f64>) -> Result<f64> {
    Ok(Spd::new(m)?.log_det())
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eig_range(m: &DMatrix<f64>) -> (f64, f64) {
    let ev = m.clone().symmetric_eigenvalues();
    let lo = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Neumaier compensated sum, independent of how the caller chunked the data.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut k = KahanSum::default();
    for x in xs {
        k.add(x);
    }
    k.value()
}
