//! Sparse coding against a fixed dictionary.
//!
//! Two encoders are provided: orthogonal matching pursuit for an ℓ0 budget
//! and cyclic coordinate descent for the ℓ1 objective
//!
//! ```text
//! ‖x − D y‖₂² + λ ‖y‖₁
//! ```
//!
//! There is no ½ on the data term, so the per-coordinate soft threshold is
//! `λ/2` and the all-zero code is optimal as soon as `λ ≥ 2‖Dᵀx‖∞`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::tensor::{axpy, dot, norm, Matrix, Vector};

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 1000;

/// Sparsity-inducing penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Regularizer {
    /// At most `sparsity` nonzero coefficients (OMP).
    L0 { sparsity: usize },
    /// ℓ1 penalty with weight `lambda` (LASSO).
    L1 { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub regularizer: Regularizer,
    pub max_iter: usize,
    /// Residual-norm tolerance for OMP, KKT tolerance for LASSO.
    pub tol: f64,
}

impl SolverConfig {
    pub fn l0(sparsity: usize) -> Self {
        SolverConfig {
            regularizer: Regularizer::L0 { sparsity },
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        }
    }

    pub fn l1(lambda: f64) -> Self {
        SolverConfig {
            regularizer: Regularizer::L1 { lambda },
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.regularizer {
            Regularizer::L0 { sparsity } if sparsity == 0 => {
                return Err(Error::Config("sparsity must be positive".into()))
            }
            Regularizer::L1 { lambda } if !(lambda > 0.0 && lambda.is_finite()) => {
                return Err(Error::Config(format!(
                    "lambda must be finite and positive, got {lambda}"
                )))
            }
            _ => {}
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config("tol must be non-negative".into()));
        }
        Ok(())
    }

    pub fn lambda(&self) -> Option<f64> {
        match self.regularizer {
            Regularizer::L1 { lambda } => Some(lambda),
            Regularizer::L0 { .. } => None,
        }
    }
}

/// A sparse code over `dict_size` atoms, stored as sorted `(index, value)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    dict_size: usize,
    entries: Vec<(usize, f64)>,
    regularizer: Regularizer,
}

impl SparseCode {
    pub fn new(
        dict_size: usize,
        mut entries: Vec<(usize, f64)>,
        regularizer: Regularizer,
    ) -> Result<Self> {
        entries.retain(|&(_, v)| v != 0.0);
        entries.sort_by_key(|&(i, _)| i);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Argument("duplicate atom index in code".into()));
        }
        if let Some(&(i, _)) = entries.iter().find(|&&(i, _)| i >= dict_size) {
            return Err(Error::Argument(format!(
                "atom index {i} out of range for {dict_size} atoms"
            )));
        }
        if entries.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::Argument("non-finite coefficient".into()));
        }
        if let Regularizer::L0 { sparsity } = regularizer {
            if entries.len() > sparsity {
                return Err(Error::Argument(format!(
                    "{} nonzeros exceed sparsity {sparsity}",
                    entries.len()
                )));
            }
        }
        Ok(SparseCode {
            dict_size,
            entries,
            regularizer,
        })
    }

    pub fn zero(dict_size: usize, regularizer: Regularizer) -> Self {
        SparseCode {
            dict_size,
            entries: Vec::new(),
            regularizer,
        }
    }

    /// Keeps the nonzero entries of a dense vector.
    pub fn from_dense(dense: &[f64], regularizer: Regularizer) -> Result<Self> {
        let entries = dense
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        SparseCode::new(dense.len(), entries, regularizer)
    }

    pub fn dict_size(&self) -> usize {
        self.dict_size
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn regularizer(&self) -> Regularizer {
        self.regularizer
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn support(&self) -> Vec<usize> {
        self.entries.iter().map(|&(i, _)| i).collect()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map_or(0.0, |p| self.entries[p].1)
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v.abs()).sum()
    }

    pub fn to_dense(&self) -> Vector {
        let mut v = Vector::zeros(self.dict_size);
        for &(i, c) in &self.entries {
            v[i] = c;
        }
        v
    }

    /// `D y` for a dictionary with `dict_size` columns.
    pub fn reconstruct(&self, atoms: &Matrix) -> Vector {
        assert_eq!(atoms.cols(), self.dict_size, "code/dictionary size mismatch");
        let mut out = Vector::zeros(atoms.rows());
        for &(i, c) in &self.entries {
            axpy(c, atoms.col(i), &mut out);
        }
        out
    }

    /// `‖x − D y‖₂²`
    pub fn residual_sq(&self, x: &[f64], atoms: &Matrix) -> f64 {
        let r = self.reconstruct(atoms);
        crate::tensor::sq_dist(x, &r)
    }
}

/// Stacks dense codes as columns of a `K × n` matrix.
pub fn codes_to_matrix(codes: &[SparseCode]) -> Matrix {
    let k = codes.first().map_or(0, |c| c.dict_size());
    let mut m = Matrix::zeros(k, codes.len());
    for (j, c) in codes.iter().enumerate() {
        for &(i, v) in c.entries() {
            m.set(i, j, v);
        }
    }
    m
}

/// `‖x − D y‖₂² + λ‖y‖₁`.
pub fn l1_objective(x: &[f64], atoms: &Matrix, code: &SparseCode, lambda: f64) -> f64 {
    code.residual_sq(x, atoms) + lambda * code.l1_norm()
}

fn check_dims(x: &[f64], atoms: &Matrix) -> Result<()> {
    if x.len() != atoms.rows() {
        return Err(Error::Shape(format!(
            "signal of length {} against {}-dimensional atoms",
            x.len(),
            atoms.rows()
        )));
    }
    if atoms.cols() == 0 {
        return Err(Error::Argument("dictionary has no atoms".into()));
    }
    Ok(())
}

/// Orthogonal matching pursuit with an ℓ0 budget.
///
/// Each step adds the atom most correlated (in absolute value) with the
/// residual, lowest index on ties, then refits all coefficients on the
/// support by least squares through an incrementally grown Cholesky factor
/// of the support Gram matrix.
pub fn omp_encode<D: AsRef<Matrix> + ?Sized>(
    x: &[f64],
    dict: &D,
    cfg: &SolverConfig,
) -> Result<SparseCode> {
    omp_trace(x, dict.as_ref(), cfg).map(|(code, _)| code)
}

/// OMP returning the residual norm after each selection as well.
pub fn omp_trace(x: &[f64], atoms: &Matrix, cfg: &SolverConfig) -> Result<(SparseCode, Vec<f64>)> {
    let Regularizer::L0 { sparsity } = cfg.regularizer else {
        return Err(Error::Config("OMP needs an L0 regularizer".into()));
    };
    cfg.validate()?;
    check_dims(x, atoms)?;
    let k = atoms.cols();
    if sparsity > k {
        return Err(Error::Argument(format!(
            "sparsity {sparsity} exceeds {k} atoms"
        )));
    }

    let xnorm = norm(x);
    let mut trace = vec![xnorm];
    if xnorm <= cfg.tol {
        return Ok((SparseCode::zero(k, cfg.regularizer), trace));
    }

    let mut residual = x.to_vec();
    let mut support: Vec<usize> = Vec::with_capacity(sparsity);
    let mut selected = vec![false; k];
    let mut chol = Cholesky::new();
    let mut rhs = Vec::with_capacity(sparsity);
    let mut coef = Vec::new();

    for iteration in 0..sparsity {
        let mut best = None;
        let mut best_abs = 0.0;
        for (j, atom) in atoms.columns().enumerate() {
            if selected[j] {
                continue;
            }
            let c = dot(atom, &residual).abs();
            if c > best_abs {
                best_abs = c;
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        // Residual already orthogonal to every remaining atom.
        if best_abs <= 1e-14 * xnorm * norm(atoms.col(j)) {
            break;
        }
        let atom = atoms.col(j);
        let cross: Vec<f64> = support.iter().map(|&s| dot(atoms.col(s), atom)).collect();
        if !chol.push(&cross, dot(atom, atom)) {
            return Err(Error::Numerical {
                iteration,
                reason: format!("support Gram matrix singular when adding atom {j}"),
            });
        }
        support.push(j);
        selected[j] = true;
        rhs.push(dot(atom, x));
        coef = chol.solve(&rhs);

        residual.copy_from_slice(x);
        for (&s, &c) in support.iter().zip(&coef) {
            axpy(-c, atoms.col(s), &mut residual);
        }
        let rnorm = norm(&residual);
        trace.push(rnorm);
        if rnorm <= cfg.tol {
            break;
        }
    }

    let entries = support.into_iter().zip(coef).collect();
    Ok((SparseCode::new(k, entries, cfg.regularizer)?, trace))
}

/// Largest KKT violation of `y` for the ℓ1 objective, given `DᵀD y` and `Dᵀx`.
///
/// Active coordinates must satisfy `2dᵢᵀ(Dy − x) + λ sign(yᵢ) = 0`, inactive
/// ones `|2dᵢᵀ(Dy − x)| ≤ λ`.
pub fn kkt_violation_from_parts(y: &[f64], gy: &[f64], dtx: &[f64], lambda: f64) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..y.len() {
        let g = 2.0 * (gy[i] - dtx[i]);
        let v = if y[i] != 0.0 {
            (g + lambda * y[i].signum()).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// KKT violation of a code for the ℓ1 objective, computed from scratch.
pub fn kkt_violation(x: &[f64], atoms: &Matrix, code: &SparseCode, lambda: f64) -> f64 {
    let residual: Vec<f64> = {
        let r = code.reconstruct(atoms);
        r.iter().zip(x).map(|(a, b)| a - b).collect()
    };
    let y = code.to_dense();
    let mut worst = 0.0f64;
    for (i, atom) in atoms.columns().enumerate() {
        let g = 2.0 * dot(atom, &residual);
        let v = if y[i] != 0.0 {
            (g + lambda * y[i].signum()).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

#[inline]
fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// ℓ1 sparse coding (LASSO).
pub fn lasso_encode<D: AsRef<Matrix> + ?Sized>(
    x: &[f64],
    dict: &D,
    cfg: &SolverConfig,
) -> Result<SparseCode> {
    let atoms = dict.as_ref();
    check_dims(x, atoms)?;
    let gram = atoms.gram();
    lasso_with_gram(x, atoms, &gram, cfg)
}

/// LASSO with a precomputed `DᵀD`.
///
/// Cyclic coordinate descent with covariance updates. Whenever the active
/// set and signs stay unchanged for a sweep, an active-set refinement
/// (solving `G_SS y_S = Dᵀ_S x − (λ/2) sign(y_S)` with sign-crossing line
/// searches) is tried from the iterate and accepted once it satisfies every
/// KKT condition; otherwise descent continues. For overcomplete
/// dictionaries the active-set method is tried from zero before any
/// descent. The returned code always satisfies the KKT conditions within
/// `cfg.tol`, checked from freshly recomputed products.
pub fn lasso_with_gram(
    x: &[f64],
    atoms: &Matrix,
    gram: &Matrix,
    cfg: &SolverConfig,
) -> Result<SparseCode> {
    let Regularizer::L1 { lambda } = cfg.regularizer else {
        return Err(Error::Config("LASSO needs an L1 regularizer".into()));
    };
    cfg.validate()?;
    check_dims(x, atoms)?;
    let k = atoms.cols();
    debug_assert_eq!(gram.shape(), (k, k));

    let dtx = atoms.tr_mul_vec(x)?;
    let half = 0.5 * lambda;
    let mut y = vec![0.0; k];
    let mut gy = vec![0.0; k];

    // Zero is optimal: nothing to do.
    if dtx.iter().all(|b| b.abs() <= half) {
        return Ok(SparseCode::zero(k, cfg.regularizer));
    }

    // Overcomplete dictionaries make coordinate descent crawl through
    // strongly correlated atoms, while the optimal support is at most N
    // atoms; the active-set method reaches it in about that many steps.
    let mut tried_from_zero = false;
    if k > atoms.rows() {
        tried_from_zero = true;
        if let Some((ys, _)) = refine_active_set(&y, &dtx, gram, lambda, cfg.tol) {
            return SparseCode::from_dense(&ys, cfg.regularizer);
        }
    }

    let mut prev_pattern: Vec<i8> = vec![0; k];
    let mut pattern: Vec<i8> = vec![0; k];
    let mut last_polish: Option<Vec<i8>> = None;
    let mut kkt = f64::INFINITY;

    for sweep in 1..=cfg.max_iter {
        let mut max_delta = 0.0f64;
        for i in 0..k {
            let gii = gram.get(i, i);
            if gii <= 0.0 {
                continue;
            }
            let rho = dtx[i] - gy[i] + gii * y[i];
            let new = soft_threshold(rho, half) / gii;
            let delta = new - y[i];
            if delta != 0.0 {
                y[i] = new;
                axpy(delta, gram.col(i), &mut gy);
                max_delta = max_delta.max(delta.abs());
            }
        }

        for (p, &v) in pattern.iter_mut().zip(&y) {
            *p = sign_of(v);
        }

        if max_delta < cfg.tol {
            refresh_products(&y, gram, &mut gy);
            kkt = kkt_violation_from_parts(&y, &gy, &dtx, lambda);
            if kkt <= cfg.tol {
                return SparseCode::from_dense(&y, cfg.regularizer);
            }
        }

        let stable = pattern == prev_pattern;
        if stable && last_polish.as_ref() != Some(&pattern) {
            last_polish = Some(pattern.clone());
            if let Some((ys, _)) = refine_active_set(&y, &dtx, gram, lambda, cfg.tol) {
                return SparseCode::from_dense(&ys, cfg.regularizer);
            }
            if !tried_from_zero {
                tried_from_zero = true;
                let zero = vec![0.0; k];
                if let Some((ys, _)) = refine_active_set(&zero, &dtx, gram, lambda, cfg.tol) {
                    return SparseCode::from_dense(&ys, cfg.regularizer);
                }
            }
        }
        std::mem::swap(&mut prev_pattern, &mut pattern);

        // Keep the incrementally updated products from drifting.
        if sweep % 64 == 0 {
            refresh_products(&y, gram, &mut gy);
        }
    }

    // The iterate may carry more nonzeros than the support Gram can hold;
    // refining from zero avoids that.
    for startpoint in [y.clone(), vec![0.0; k]] {
        if let Some((ys, _)) = refine_active_set(&startpoint, &dtx, gram, lambda, cfg.tol) {
            return SparseCode::from_dense(&ys, cfg.regularizer);
        }
    }
    refresh_products(&y, gram, &mut gy);
    kkt = kkt.min(kkt_violation_from_parts(&y, &gy, &dtx, lambda));
    Err(Error::Convergence {
        iterations: cfg.max_iter,
        kkt_violation: kkt,
    })
}

fn sign_of(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn refresh_products(y: &[f64], gram: &Matrix, gy: &mut [f64]) {
    gy.iter_mut().for_each(|v| *v = 0.0);
    for (i, &yi) in y.iter().enumerate() {
        if yi != 0.0 {
            axpy(yi, gram.col(i), gy);
        }
    }
}

/// Smooth part `−2 bᵀy + yᵀGy` of the objective plus `λ‖y‖₁` (the constant
/// `‖x‖²` is dropped), for `y` given by its values on `support`.
fn reduced_objective(support: &[usize], vals: &[f64], dtx: &[f64], gram: &Matrix, lambda: f64) -> f64 {
    let mut f = 0.0;
    for (a, &i) in support.iter().enumerate() {
        let va = vals[a];
        if va == 0.0 {
            continue;
        }
        let gi = gram.col(i);
        let quad: f64 = support.iter().zip(vals).map(|(&j, &vb)| gi[j] * vb).sum();
        f += va * quad - 2.0 * dtx[i] * va + lambda * va.abs();
    }
    f
}

/// Active-set refinement from a coordinate-descent iterate.
///
/// Repeatedly solves the stationarity system on the current support with
/// the current signs, moves to the best point on the segment towards that
/// solution (checking each sign crossing), and activates the most violating
/// zero coordinate once the support is optimal. If the activated atom is
/// linearly dependent on the support, the step instead follows the null
/// direction of the support Gram until some coefficient reaches zero. Every
/// step lowers the objective. Returns `None` if the iterate's own support is
/// singular or the step budget runs out.
fn refine_active_set(
    start: &[f64],
    dtx: &[f64],
    gram: &Matrix,
    lambda: f64,
    tol: f64,
) -> Option<(Vec<f64>, f64)> {
    let k = start.len();
    let half = 0.5 * lambda;
    let mut y = start.to_vec();
    let mut theta: Vec<f64> = y.iter().map(|&v| f64::from(sign_of(v))).collect();
    let mut gy = vec![0.0; k];
    for _ in 0..20 * k + 20 {
        refresh_products(&y, gram, &mut gy);
        let kkt = kkt_violation_from_parts(&y, &gy, dtx, lambda);
        if kkt <= tol {
            return Some((y, kkt));
        }
        let active_ok = (0..k)
            .filter(|&i| y[i] != 0.0)
            .all(|i| (2.0 * (gy[i] - dtx[i]) + lambda * theta[i]).abs() <= tol);
        let mut added = None;
        if active_ok {
            // Activate the zero coordinate with the largest violation.
            let (i, g) = (0..k)
                .filter(|&i| y[i] == 0.0)
                .map(|i| (i, 2.0 * (gy[i] - dtx[i])))
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))?;
            if g.abs() <= lambda {
                return None;
            }
            theta[i] = -g.signum();
            added = Some(i);
        }

        let mut support: Vec<usize> = (0..k)
            .filter(|&i| theta[i] != 0.0 && Some(i) != added)
            .collect();
        support.extend(added);
        let mut chol = Cholesky::new();
        let mut cross = Vec::with_capacity(support.len());
        let mut dependent = false;
        for (a, &i) in support.iter().enumerate() {
            cross.clear();
            cross.extend(support[..a].iter().map(|&j| gram.get(i, j)));
            if !chol.push(&cross, gram.get(i, i)) {
                if a + 1 == support.len() && added.is_some() {
                    dependent = true;
                    break;
                }
                return None;
            }
        }
        let cur: Vec<f64> = support.iter().map(|&i| y[i]).collect();

        // Search direction and the step at which it should end.
        let (dir, t_end) = if dependent {
            let last = support.len() - 1;
            let j = support[last];
            let coupling: Vec<f64> = support[..last].iter().map(|&i| gram.get(i, j)).collect();
            let w = chol.solve(&coupling);
            let mut v: Vec<f64> = w.iter().map(|wi| -theta[j] * wi).collect();
            v.push(theta[j]);
            let slope: f64 = support
                .iter()
                .zip(&v)
                .map(|(&i, &vi)| (2.0 * (gy[i] - dtx[i]) + lambda * theta[i]) * vi)
                .sum();
            if slope >= 0.0 {
                return None;
            }
            // `D v` vanishes, so the objective falls linearly until the
            // first coefficient reaches zero.
            (v, f64::INFINITY)
        } else {
            let rhs: Vec<f64> = support.iter().map(|&i| dtx[i] - half * theta[i]).collect();
            let z = chol.solve(&rhs);
            let dir = z.iter().zip(&cur).map(|(zi, ci)| zi - ci).collect();
            (dir, 1.0)
        };

        // Candidates: the end of the step and every sign crossing before it.
        let mut ts: Vec<(f64, Option<usize>)> = Vec::new();
        if t_end.is_finite() {
            ts.push((t_end, None));
        }
        for (a, (&c, &da)) in cur.iter().zip(&dir).enumerate() {
            if c != 0.0 && c * da < 0.0 {
                let t = -c / da;
                if t < t_end {
                    ts.push((t, Some(a)));
                }
            }
        }
        let point = |t: f64, zeroed: Option<usize>| -> Vec<f64> {
            (0..support.len())
                .map(|a| if zeroed == Some(a) { 0.0 } else { cur[a] + t * dir[a] })
                .collect()
        };
        let best = ts
            .iter()
            .map(|&(t, zeroed)| {
                let p = point(t, zeroed);
                let f = reduced_objective(&support, &p, dtx, gram, lambda);
                (p, f)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))?;
        let now = reduced_objective(&support, &cur, dtx, gram, lambda);
        if best.1 > now + 1e-15 * best.1.abs() {
            return None;
        }
        for (&i, &v) in support.iter().zip(&best.0) {
            y[i] = v;
        }
        for i in 0..k {
            theta[i] = f64::from(sign_of(y[i]));
        }
    }
    None
}

/// Dispatches on the configured regularizer.
pub fn encode<D: AsRef<Matrix> + ?Sized>(
    x: &[f64],
    dict: &D,
    cfg: &SolverConfig,
) -> Result<SparseCode> {
    match cfg.regularizer {
        Regularizer::L0 { .. } => omp_encode(x, dict, cfg),
        Regularizer::L1 { .. } => lasso_encode(x, dict, cfg),
    }
}

/// Encodes every column of `xs`, in order.
///
/// Columns are processed in parallel; each column is an independent pure
/// computation, so the result is identical to a sequential run. The first
/// failing column (by index) is reported.
pub fn batch_encode<D: AsRef<Matrix> + ?Sized>(
    xs: &Matrix,
    dict: &D,
    cfg: &SolverConfig,
) -> Result<Vec<SparseCode>> {
    let atoms = dict.as_ref();
    if xs.cols() == 0 {
        return Err(Error::Argument("batch has no columns".into()));
    }
    check_dims(xs.col(0), atoms)?;
    cfg.validate()?;
    let gram = match cfg.regularizer {
        Regularizer::L1 { .. } => Some(atoms.gram()),
        Regularizer::L0 { .. } => None,
    };
    let results: Vec<Result<SparseCode>> = (0..xs.cols())
        .into_par_iter()
        .map(|j| {
            let x = xs.col(j);
            match &gram {
                Some(g) => lasso_with_gram(x, atoms, g, cfg),
                None => omp_encode(x, atoms, cfg),
            }
        })
        .collect();
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::Column {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

impl AsRef<Matrix> for Matrix {
    fn as_ref(&self) -> &Matrix {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{gaussian_unit_dictionary, sparse_combination};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn omp_single_atom() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = gaussian_unit_dictionary(16, 20, &mut rng);
        let x: Vec<f64> = d.col(7).iter().map(|v| 3.0 * v).collect();
        let (code, trace) = omp_trace(&x, &d, &SolverConfig::l0(1)).unwrap();
        assert_eq!(code.support(), vec![7]);
        assert!((code.get(7) - 3.0).abs() < 1e-12);
        assert!(*trace.last().unwrap() < 1e-12);
    }

    #[test]
    fn omp_standard_basis_is_exact() {
        let d = Matrix::identity(8);
        let mut x = vec![0.0; 8];
        x[7] = 3.0;
        let code = omp_encode(&x, &d, &SolverConfig::l0(1)).unwrap();
        assert_eq!(code.entries(), &[(7, 3.0)]);
    }

    #[test]
    fn omp_zero_signal() {
        let d = Matrix::identity(4);
        let code = omp_encode(&[0.0; 4], &d, &SolverConfig::l0(2)).unwrap();
        assert!(code.is_zero());
    }

    #[test]
    fn omp_recovers_five_sparse() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = gaussian_unit_dictionary(64, 128, &mut rng);
        let (x, truth) = sparse_combination(&d, 5, &mut rng);
        let code = omp_encode(&x, &d, &SolverConfig::l0(5)).unwrap();
        let mut want: Vec<usize> = truth.iter().map(|&(i, _)| i).collect();
        want.sort_unstable();
        assert_eq!(code.support(), want);
        for &(i, v) in &truth {
            assert!((code.get(i) - v).abs() < 1e-8);
        }
    }

    #[test]
    fn omp_sparsity_exceeding_atoms() {
        let d = Matrix::identity(3);
        assert!(matches!(
            omp_encode(&[1.0, 0.0, 0.0], &d, &SolverConfig::l0(4)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn omp_skips_zero_atom() {
        let d = Matrix::from_col_major(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let code = omp_encode(&[1.0, 1.0], &d, &SolverConfig::l0(2)).unwrap();
        assert_eq!(code.support(), vec![0]);
    }

    #[test]
    fn omp_nearly_dependent_atoms_report_iteration() {
        let e = 1e-7;
        let n = (1.0f64 + e * e).sqrt();
        let d = Matrix::from_col_major(2, 2, vec![1.0, 0.0, 1.0 / n, e / n]).unwrap();
        let err = omp_encode(&[0.0, 1.0], &d, &SolverConfig::l0(2)).unwrap_err();
        assert!(matches!(err, Error::Numerical { iteration: 1, .. }), "{err}");
    }

    #[test]
    fn omp_ties_break_to_lowest_index() {
        let d = Matrix::identity(3);
        let code = omp_encode(&[1.0, 1.0, 1.0], &d, &SolverConfig::l0(1)).unwrap();
        assert_eq!(code.support(), vec![0]);
    }

    #[test]
    fn lasso_zero_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = gaussian_unit_dictionary(8, 12, &mut rng);
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lam_max = 2.0 * d.tr_mul_vec(&x).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let code = lasso_encode(&x, &d, &SolverConfig::l1(lam_max)).unwrap();
        assert!(code.is_zero());
        let code = lasso_encode(&x, &d, &SolverConfig::l1(0.9 * lam_max)).unwrap();
        assert!(!code.is_zero());
    }

    #[test]
    fn lasso_orthonormal_soft_threshold() {
        let d = Matrix::identity(5);
        let x = [1.0, -0.2, 0.05, -2.0, 0.3];
        let lambda = 0.5;
        let code = lasso_encode(&x, &d, &SolverConfig::l1(lambda)).unwrap();
        for (i, &xi) in x.iter().enumerate() {
            assert_eq!(code.get(i), soft_threshold(xi, lambda / 2.0));
        }

        // A rotated orthonormal basis agrees up to rounding.
        let (c, s) = (0.7f64.cos(), 0.7f64.sin());
        let q = Matrix::from_row_major(2, 2, &[c, -s, s, c]).unwrap();
        let x = [0.9, -0.4];
        let code = lasso_encode(&x, &q, &SolverConfig::l1(0.3)).unwrap();
        let proj = q.tr_mul_vec(&x).unwrap();
        for i in 0..2 {
            assert!((code.get(i) - soft_threshold(proj[i], 0.15)).abs() < 1e-12);
        }
    }

    #[test]
    fn lasso_wrong_regularizer() {
        let d = Matrix::identity(2);
        assert!(matches!(
            lasso_encode(&[1.0, 1.0], &d, &SolverConfig::l0(1)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn lasso_matches_enumeration_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let d = gaussian_unit_dictionary(8, 12, &mut rng);
            let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lam_max = 2.0 * d.tr_mul_vec(&x).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let lambda = rng.random_range(0.4..0.9) * lam_max;
            let code = lasso_encode(&x, &d, &SolverConfig::l1(lambda)).unwrap();
            let got = l1_objective(&x, &d, &code, lambda);
            let want = crate::testutil::lasso_enumeration_oracle(&x, &d, lambda, 8);
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn batch_matches_single_and_is_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = gaussian_unit_dictionary(10, 20, &mut rng);
        let col: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let other: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cfg = SolverConfig::l1(0.1);
        let single = lasso_encode(&col, &d, &cfg).unwrap();

        let one = Matrix::from_columns(&[&col]).unwrap();
        assert_eq!(batch_encode(&one, &d, &cfg).unwrap(), vec![single.clone()]);

        let three = Matrix::from_columns(&[&col, &other, &col]).unwrap();
        let codes = batch_encode(&three, &d, &cfg).unwrap();
        assert_eq!(codes[0], single);
        assert_eq!(codes[2], single);
    }

    #[test]
    fn batch_columns_satisfy_postconditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = gaussian_unit_dictionary(12, 24, &mut rng);
        let cols: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..12).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let xs = Matrix::from_columns(&cols).unwrap();
        let lambda = 0.2;
        let codes = batch_encode(&xs, &d, &SolverConfig::l1(lambda)).unwrap();
        for (x, code) in xs.columns().zip(&codes) {
            assert!(kkt_violation(x, &d, code, lambda) <= 1e-7);
        }
        let codes = batch_encode(&xs, &d, &SolverConfig::l0(3)).unwrap();
        assert!(codes.iter().all(|c| c.nnz() <= 3));
    }

    #[test]
    fn batch_error_carries_column() {
        let d = Matrix::identity(2);
        let xs = Matrix::zeros(2, 3);
        let err = batch_encode(&xs, &d, &SolverConfig::l0(3)).unwrap_err();
        assert!(matches!(err, Error::Column { index: 0, .. }));
        assert!(batch_encode(&Matrix::zeros(2, 0), &d, &SolverConfig::l0(1)).is_err());
    }

    #[test]
    fn code_invariants() {
        let reg = Regularizer::L0 { sparsity: 2 };
        let c = SparseCode::new(5, vec![(3, 1.0), (1, 0.0), (0, -2.0)], reg).unwrap();
        assert_eq!(c.entries(), &[(0, -2.0), (3, 1.0)]);
        assert!(SparseCode::new(5, vec![(1, 1.0), (1, 2.0)], reg).is_err());
        assert!(SparseCode::new(5, vec![(5, 1.0)], reg).is_err());
        assert!(SparseCode::new(5, vec![(0, 1.0), (1, 1.0), (2, 1.0)], reg).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn omp_residual_monotone_and_unique(seed in any::<u64>(), s in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = gaussian_unit_dictionary(16, 32, &mut rng);
            let x: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (code, trace) = omp_trace(&x, &d, &SolverConfig::l0(s)).unwrap();
            for w in trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
            let support = code.support();
            let mut dedup = support.clone();
            dedup.dedup();
            prop_assert_eq!(support, dedup);
            prop_assert!(code.nnz() <= s);
        }

        #[test]
        fn lasso_kkt_and_descent(seed in any::<u64>(), frac in 0.05f64..0.95) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = gaussian_unit_dictionary(10, 20, &mut rng);
            let x: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lam_max = 2.0 * d.tr_mul_vec(&x).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let lambda = frac * lam_max;
            let cfg = SolverConfig::l1(lambda);
            let code = lasso_encode(&x, &d, &cfg).unwrap();
            prop_assert!(kkt_violation(&x, &d, &code, lambda) <= 1e-7);
            let zero = SparseCode::zero(20, cfg.regularizer);
            prop_assert!(l1_objective(&x, &d, &code, lambda) <= l1_objective(&x, &d, &zero, lambda) + 1e-12);
            prop_assert_eq!(lasso_encode(&x, &d, &cfg).unwrap(), code);
        }
    }
}
