//! Test fixtures and brute-force oracles.
//!
//! Shared by the unit tests and (via `#[path]`) the integration tests, so it
//! only names library items through `crate::tensor`. Nothing here calls the
//! solvers it is used to check.
#![allow(dead_code)]

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::tensor::Matrix;

pub fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::from_col_major(rows, cols, data).unwrap()
}

/// Gaussian dictionary with unit-norm columns.
pub fn gaussian_unit_dictionary<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let mut d = gaussian_matrix(rows, cols, rng);
    for j in 0..cols {
        let c = d.col_mut(j);
        let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        c.iter_mut().for_each(|v| *v /= n);
    }
    d
}

/// Random `s`-sparse combination of dictionary columns with coefficient
/// magnitudes in `[1, 2]` and random signs.
pub fn sparse_combination<R: Rng>(
    d: &Matrix,
    s: usize,
    rng: &mut R,
) -> (Vec<f64>, Vec<(usize, f64)>) {
    let idx = sample(rng, d.cols(), s).into_vec();
    let mut x = vec![0.0; d.rows()];
    let mut truth = Vec::with_capacity(s);
    for i in idx {
        let mag: f64 = rng.random_range(1.0..2.0);
        let c = if rng.random_bool(0.5) { mag } else { -mag };
        for (xr, dr) in x.iter_mut().zip(d.col(i)) {
            *xr += c * dr;
        }
        truth.push((i, c));
    }
    (x, truth)
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// `‖x − D y‖² + λ‖y‖₁` evaluated directly from a dense `y`.
pub fn l1_objective_dense(x: &[f64], d: &Matrix, y: &[f64], lambda: f64) -> f64 {
    let mut r = x.to_vec();
    for (j, &yj) in y.iter().enumerate() {
        for (ri, dij) in r.iter_mut().zip(d.col(j)) {
            *ri -= yj * dij;
        }
    }
    r.iter().map(|v| v * v).sum::<f64>() + lambda * y.iter().map(|v| v.abs()).sum::<f64>()
}

fn for_each_subset(k: usize, size: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, k: usize, size: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == size {
            f(cur);
            return;
        }
        for i in start..k {
            cur.push(i);
            rec(i + 1, k, size, cur, f);
            cur.pop();
        }
    }
    rec(0, k, size, &mut Vec::new(), f);
}

/// Minimum LASSO objective over all supports of size at most `max_support`.
///
/// For each support and sign pattern the stationarity condition
/// `D_Sᵀ D_S y = D_Sᵀ x − (λ/2) s` is solved in closed form; solutions whose
/// signs match the pattern are feasible candidates. The zero code is always
/// a candidate. Some minimizer has linearly independent active atoms, so
/// `max_support = min(N, K)` makes the result exact.
///
/// Per support, `u = G⁻¹ D_Sᵀx` and `G⁻¹` are computed once and the sign
/// patterns are walked in Gray-code order, so each pattern costs `O(|S|)`.
pub fn lasso_enumeration_oracle(x: &[f64], d: &Matrix, lambda: f64, max_support: usize) -> f64 {
    let k = d.cols();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let mut best = x.iter().map(|v| v * v).sum::<f64>();
    for size in 1..=max_support.min(k) {
        for_each_subset(k, size, &mut |support| {
            let g: Vec<Vec<f64>> = support
                .iter()
                .map(|&i| support.iter().map(|&j| dot(d.col(i), d.col(j))).collect())
                .collect();
            let dtx: Vec<f64> = support.iter().map(|&i| dot(d.col(i), x)).collect();
            let Some(u) = gauss_solve(g.clone(), dtx) else { return };
            let mut inv = Vec::with_capacity(size);
            for c in 0..size {
                let mut e = vec![0.0; size];
                e[c] = 1.0;
                let Some(col) = gauss_solve(g.clone(), e) else { return };
                inv.push(col);
            }
            let direct = |s: &[f64]| -> Vec<f64> {
                (0..size)
                    .map(|r| u[r] - 0.5 * lambda * (0..size).map(|c| inv[c][r] * s[c]).sum::<f64>())
                    .collect()
            };
            let mut s = vec![1.0; size];
            let mut z = direct(&s);
            for t in 0u64..(1 << size) {
                if t > 0 {
                    let b = t.trailing_zeros() as usize;
                    // s_b → −s_b moves z by λ s_b G⁻¹e_b
                    for (zr, mr) in z.iter_mut().zip(&inv[b]) {
                        *zr += lambda * s[b] * mr;
                    }
                    s[b] = -s[b];
                }
                if z.iter().zip(&s).all(|(zi, si)| zi * si > 0.0) {
                    let exact = direct(&s);
                    if exact.iter().zip(&s).any(|(zi, si)| zi * si <= 0.0) {
                        continue;
                    }
                    let mut y = vec![0.0; k];
                    for (&i, &zi) in support.iter().zip(&exact) {
                        y[i] = zi;
                    }
                    best = best.min(l1_objective_dense(x, d, &y, lambda));
                }
            }
        });
    }
    best
}

/// Maximum-weight assignment by exhaustive augmenting search (Hungarian
/// method, O(n³)). `score[i][j]` is the benefit of pairing row i with
/// column j; returns `assign[i] = j`.
pub fn max_weight_matching(score: &[Vec<f64>]) -> Vec<usize> {
    let n = score.len();
    let m = score[0].len();
    assert!(n <= m);
    // Minimize cost = -score with the classic potentials formulation.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = -score[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Random orthonormal columns via Gram-Schmidt on a Gaussian matrix.
pub fn random_orthonormal<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    assert!(cols <= rows);
    let mut q = gaussian_matrix(rows, cols, rng);
    for j in 0..cols {
        for _ in 0..2 {
            for i in 0..j {
                let proj: f64 = q.col(i).iter().zip(q.col(j)).map(|(a, b)| a * b).sum();
                let qi = q.col(i).to_vec();
                for (a, b) in q.col_mut(j).iter_mut().zip(&qi) {
                    *a -= proj * b;
                }
            }
        }
        let n = q.col(j).iter().map(|v| v * v).sum::<f64>().sqrt();
        q.col_mut(j).iter_mut().for_each(|v| *v /= n);
    }
    q
}
