//! Small dense factorizations: incremental Cholesky and Jacobi eigensolver.

use crate::error::{Error, Result};
use crate::tensor::{dot, Matrix};

/// Lower-triangular Cholesky factor that can grow one row at a time.
///
/// Rows are stored packed: row `i` holds `i + 1` entries.
#[derive(Debug, Clone, Default)]
pub struct Cholesky {
    packed: Vec<f64>,
    dim: usize,
}

impl Cholesky {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.packed[start..start + i + 1]
    }

    /// Appends a row/column to the factored matrix.
    ///
    /// `cross` holds the inner products of the new element with the existing
    /// ones and `diag` its squared norm. Returns `false` (and leaves the
    /// factor untouched) when the extended matrix is numerically singular.
    pub fn push(&mut self, cross: &[f64], diag: f64) -> bool {
        debug_assert_eq!(cross.len(), self.dim);
        let w = self.forward(cross);
        let rem = diag - dot(&w, &w);
        if !(rem > diag.abs() * 1e-12) || !rem.is_finite() {
            return false;
        }
        self.packed.extend_from_slice(&w);
        self.packed.push(rem.sqrt());
        self.dim += 1;
        true
    }

    /// Factors a symmetric positive definite matrix.
    pub fn factor(a: &Matrix) -> Option<Self> {
        let n = a.rows();
        let mut c = Cholesky::new();
        let mut cross = Vec::with_capacity(n);
        for i in 0..n {
            cross.clear();
            cross.extend((0..i).map(|j| a.get(i, j)));
            if !c.push(&cross, a.get(i, i)) {
                return None;
            }
        }
        Some(c)
    }

    /// Solves `L w = b`.
    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut w = Vec::with_capacity(b.len());
        for (i, &bi) in b.iter().enumerate() {
            let row = self.row(i);
            let s = bi - dot(&row[..i], &w[..i]);
            w.push(s / row[i]);
        }
        w
    }

    /// Solves `L Lᵀ x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.forward(b);
        for i in (0..self.dim).rev() {
            x[i] /= self.row(i)[i];
            let xi = x[i];
            for (j, xj) in x.iter_mut().enumerate().take(i) {
                *xj -= self.row(i)[j] * xi;
            }
        }
        x
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in non-increasing order and the matching unit
/// eigenvectors as columns.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape(format!("eigen of {}x{} matrix", n, a.cols())));
    }
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_sq().sqrt().max(f64::MIN_POSITIVE);
    const MAX_SWEEPS: usize = 100;
    let mut converged = n <= 1;
    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for j in 0..n {
            for i in 0..j {
                off += m.get(i, j) * m.get(i, j);
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    if !converged {
        return Err(Error::Numerical {
            iteration: MAX_SWEEPS,
            reason: "Jacobi eigensolver did not converge".into(),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).total_cmp(&m.get(i, i)).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m.get(i, i)).collect();
    Ok((values, v.select_columns(&order)))
}
