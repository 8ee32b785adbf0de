//! Linear classifiers and evaluation metrics.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{axpy, dot, norm, Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Svm,
    Logistic,
}

/// `scores = W x + b`, one row of `W` per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Matrix,
    pub bias: Vector,
    pub kind: ModelKind,
    /// Label of each class row, ascending.
    pub classes: Vec<usize>,
}

impl LinearModel {
    pub fn num_features(&self) -> usize {
        self.weights.cols()
    }

    /// `C × n` class scores.
    pub fn scores(&self, features: &Matrix) -> Result<Matrix> {
        if features.rows() != self.num_features() {
            return Err(Error::Shape(format!(
                "model has {} features, data has {}",
                self.num_features(),
                features.rows()
            )));
        }
        let mut s = self.weights.matmul(features)?;
        for j in 0..s.cols() {
            for (v, b) in s.col_mut(j).iter_mut().zip(self.bias.iter()) {
                *v += b;
            }
        }
        Ok(s)
    }

    /// Highest-scoring label per column; ties go to the lowest class.
    pub fn predict(&self, features: &Matrix) -> Result<Vec<usize>> {
        let s = self.scores(features)?;
        Ok(s.columns().map(|c| self.classes[argmax(c)]).collect())
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn check_labels(features: &Matrix, labels: &[usize]) -> Result<Vec<usize>> {
    if features.cols() != labels.len() {
        return Err(Error::Shape(format!(
            "{} examples, {} labels",
            features.cols(),
            labels.len()
        )));
    }
    if labels.len() < 2 {
        return Err(Error::Argument("need at least two examples".into()));
    }
    if !features.is_finite() {
        return Err(Error::Argument("features contain non-finite values".into()));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Argument(format!(
            "need at least two classes, got {:?}",
            classes
        )));
    }
    Ok(classes)
}

/// One-vs-all linear SVMs trained with Pegasos.
///
/// Each binary problem minimizes `(Λ/2)‖w‖² + mean hinge` with
/// `Λ = 1/(C n)`, step `1/(Λt)`, projection onto the ball of radius `1/√Λ`,
/// and returns the average of the iterates over the last half of training.
/// The bias is an extra constant feature. Examples are visited in a seeded
/// shuffle each epoch.
pub fn train_svm_ova(
    features: &Matrix,
    labels: &[usize],
    c: f64,
    epochs: usize,
    seed: u64,
) -> Result<LinearModel> {
    let classes = check_labels(features, labels)?;
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Argument(format!("C must be positive, got {c}")));
    }
    if epochs == 0 {
        return Err(Error::Argument("epochs must be positive".into()));
    }
    let (f, n) = features.shape();
    let reg = 1.0 / (c * n as f64);
    let radius = 1.0 / reg.sqrt();
    let total = epochs * n;
    let average_from = total / 2;

    let mut weights = Matrix::zeros(classes.len(), f);
    let mut bias = vec![0.0; classes.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut orders = Vec::with_capacity(epochs);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        orders.push(order.clone());
    }

    for (row, &class) in classes.iter().enumerate() {
        // w holds the feature weights followed by the bias weight.
        let mut w = vec![0.0; f + 1];
        let mut avg = vec![0.0; f + 1];
        let mut averaged = 0usize;
        let mut t = 0usize;
        for order in &orders {
            for &i in order {
                t += 1;
                let x = features.col(i);
                let y = if labels[i] == class { 1.0 } else { -1.0 };
                let margin = y * (dot(&w[..f], x) + w[f]);
                let eta = 1.0 / (reg * t as f64);
                let shrink = 1.0 - eta * reg;
                w.iter_mut().for_each(|v| *v *= shrink);
                if margin < 1.0 {
                    axpy(eta * y, x, &mut w[..f]);
                    w[f] += eta * y;
                }
                let len = norm(&w);
                if len > radius {
                    let s = radius / len;
                    w.iter_mut().for_each(|v| *v *= s);
                }
                if t > average_from {
                    averaged += 1;
                    let k = averaged as f64;
                    for (a, v) in avg.iter_mut().zip(&w) {
                        *a += (v - *a) / k;
                    }
                }
            }
        }
        for (j, &v) in avg[..f].iter().enumerate() {
            weights.set(row, j, v);
        }
        bias[row] = avg[f];
    }
    Ok(LinearModel {
        weights,
        bias: Vector::from(bias),
        kind: ModelKind::Svm,
        classes,
    })
}

/// Test-set indices of `k` folds over a seeded shuffle of `0..n`.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::Argument(format!("cannot split {n} examples into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (pos, &i) in order.iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Complement of a fold within `0..n`.
pub fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in fold {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

fn pick(labels: &[usize], idx: &[usize]) -> Vec<usize> {
    idx.iter().map(|&i| labels[i]).collect()
}

/// Mean cross-validated accuracy of the SVM at each `C`; returns the best
/// `C` (smallest on ties) and the per-`C` accuracies.
pub fn select_svm_c(
    features: &Matrix,
    labels: &[usize],
    grid: &[f64],
    folds: usize,
    epochs: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    if grid.is_empty() {
        return Err(Error::Config("empty C grid".into()));
    }
    let splits = kfold(labels.len(), folds, seed)?;
    let mut scores = Vec::with_capacity(grid.len());
    for &c in grid {
        let mut total = 0.0;
        for test in &splits {
            let train = complement(labels.len(), test);
            let train_labels = pick(labels, &train);
            let model = train_svm_ova(&features.select_columns(&train), &train_labels, c, epochs, seed)?;
            total += accuracy(&model, &features.select_columns(test), &pick(labels, test))?;
        }
        scores.push(total / splits.len() as f64);
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok((grid[best], scores))
}

/// Mean cross-entropy plus `(l2/2)‖W‖²` (bias unregularized) and its
/// gradient, for parameters laid out as `C` rows of `F` weights followed by
/// `C` biases.
pub fn logistic_loss_and_grad(
    params: &[f64],
    features: &Matrix,
    targets: &[usize],
    num_classes: usize,
    l2: f64,
) -> (f64, Vec<f64>) {
    let (f, n) = features.shape();
    let c = num_classes;
    debug_assert_eq!(params.len(), c * (f + 1));
    let (w, b) = params.split_at(c * f);
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    let mut z = vec![0.0; c];
    for (j, x) in features.columns().enumerate() {
        for k in 0..c {
            z[k] = dot(&w[k * f..(k + 1) * f], x) + b[k];
        }
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|v| (v - m).exp()).sum();
        let log_norm = m + sum.ln();
        loss += log_norm - z[targets[j]];
        for k in 0..c {
            let p = (z[k] - log_norm).exp();
            let r = p - if k == targets[j] { 1.0 } else { 0.0 };
            axpy(r, x, &mut grad[k * f..(k + 1) * f]);
            grad[c * f + k] += r;
        }
    }
    let inv = 1.0 / n as f64;
    loss *= inv;
    grad.iter_mut().for_each(|g| *g *= inv);
    loss += 0.5 * l2 * dot(w, w);
    for (g, wi) in grad[..c * f].iter_mut().zip(w) {
        *g += l2 * wi;
    }
    (loss, grad)
}

/// Multinomial logistic regression by full-batch gradient descent with a
/// fixed step from a smoothness bound, starting from zero weights.
pub fn train_logistic(
    features: &Matrix,
    labels: &[usize],
    l2: f64,
    epochs: usize,
) -> Result<LinearModel> {
    let classes = check_labels(features, labels)?;
    if !(l2 >= 0.0) || !l2.is_finite() {
        return Err(Error::Argument(format!("l2 must be >= 0, got {l2}")));
    }
    let (f, _) = features.shape();
    let c = classes.len();
    let targets: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).unwrap())
        .collect();
    // Softmax cross-entropy has Hessian bounded by ½‖x̃‖² per example.
    let max_sq = features
        .columns()
        .map(|x| dot(x, x) + 1.0)
        .fold(0.0f64, f64::max);
    let step = 1.0 / (0.5 * max_sq + l2);
    let mut params = vec![0.0; c * (f + 1)];
    for _ in 0..epochs {
        let (_, grad) = logistic_loss_and_grad(&params, features, &targets, c, l2);
        axpy(-step, &grad, &mut params);
    }
    let weights = Matrix::from_row_major(c, f, &params[..c * f])?;
    Ok(LinearModel {
        weights,
        bias: Vector::from(params[c * f..].to_vec()),
        kind: ModelKind::Logistic,
        classes,
    })
}

/// Fraction of examples whose predicted label is correct.
pub fn accuracy(model: &LinearModel, features: &Matrix, labels: &[usize]) -> Result<f64> {
    let pred = model.predict(features)?;
    if pred.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions, {} labels",
            pred.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Undefined("accuracy of an empty set".into()));
    }
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// One-vs-all view of a multiclass prediction: for each class, the binary
/// accuracy of "predicted as this class" against "labelled as this class",
/// averaged over the model's classes.
pub fn mean_binary_accuracy(model: &LinearModel, features: &Matrix, labels: &[usize]) -> Result<f64> {
    let pred = model.predict(features)?;
    if labels.is_empty() || pred.len() != labels.len() {
        return Err(Error::Shape("labels do not match predictions".into()));
    }
    let n = labels.len() as f64;
    let total: f64 = model
        .classes
        .iter()
        .map(|&c| {
            pred.iter()
                .zip(labels)
                .filter(|(p, l)| (**p == c) == (**l == c))
                .count() as f64
                / n
        })
        .sum();
    Ok(total / model.classes.len() as f64)
}

/// Items sorted by descending score; equal scores keep their input order.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    items: Vec<(f64, bool)>,
}

impl RankedList {
    pub fn new(mut items: Vec<(f64, bool)>) -> Result<Self> {
        if items.iter().any(|(s, _)| s.is_nan()) {
            return Err(Error::Argument("NaN score in ranked list".into()));
        }
        items.sort_by(|a, b| b.0.total_cmp(&a.0));
        Ok(RankedList { items })
    }

    pub fn items(&self) -> &[(f64, bool)] {
        &self.items
    }

    pub fn positives(&self) -> usize {
        self.items.iter().filter(|i| i.1).count()
    }
}

/// Mean of the precision at the rank of each positive item.
pub fn average_precision(r: &RankedList) -> Result<f64> {
    let p = r.positives();
    if p == 0 {
        return Err(Error::Undefined("average precision without positives".into()));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &(_, pos)) in r.items.iter().enumerate() {
        if pos {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(sum / p as f64)
}

pub fn mean_average_precision(lists: &[RankedList]) -> Result<f64> {
    if lists.is_empty() {
        return Err(Error::Undefined("mAP of no lists".into()));
    }
    let mut total = 0.0;
    for l in lists {
        total += average_precision(l)?;
    }
    Ok(total / lists.len() as f64)
}

/// mAP of a model's class scores, one ranked list per class that has
/// positives in `labels`.
pub fn model_map(model: &LinearModel, features: &Matrix, labels: &[usize]) -> Result<f64> {
    let scores = model.scores(features)?;
    let mut lists = Vec::new();
    for (row, &class) in model.classes.iter().enumerate() {
        let items: Vec<(f64, bool)> = (0..labels.len())
            .map(|j| (scores.get(row, j), labels[j] == class))
            .collect();
        if items.iter().any(|i| i.1) {
            lists.push(RankedList::new(items)?);
        }
    }
    mean_average_precision(&lists)
}

/// PSNR in decibels, or `Exact` when the estimate equals the reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Exact,
    Db(f64),
}

impl Psnr {
    pub fn db(self) -> Option<f64> {
        match self {
            Psnr::Exact => None,
            Psnr::Db(v) => Some(v),
        }
    }
}

impl std::fmt::Display for Psnr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Psnr::Exact => write!(f, "exact"),
            Psnr::Db(v) => write!(f, "{v:.2}"),
        }
    }
}

impl Serialize for Psnr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Psnr::Exact => s.serialize_str("exact"),
            Psnr::Db(v) => s.serialize_f64(*v),
        }
    }
}

/// PSNR from a mean squared error.
pub fn psnr_from_mse(mse: f64, peak: f64) -> Result<Psnr> {
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::Argument(format!("peak must be positive, got {peak}")));
    }
    if !(mse >= 0.0) || !mse.is_finite() {
        return Err(Error::Argument(format!("invalid MSE {mse}")));
    }
    if mse == 0.0 {
        return Ok(Psnr::Exact);
    }
    Ok(Psnr::Db(10.0 * (peak * peak / mse).log10()))
}

/// `10·log10(peak² / MSE)`.
pub fn psnr(clean: &Matrix, estimate: &Matrix, peak: f64) -> Result<Psnr> {
    if clean.shape() != estimate.shape() {
        return Err(Error::Shape(format!(
            "{}x{} vs {}x{}",
            clean.rows(),
            clean.cols(),
            estimate.rows(),
            estimate.cols()
        )));
    }
    if clean.data().is_empty() {
        return Err(Error::Argument("PSNR of empty data".into()));
    }
    psnr_from_mse(crate::preprocess::mean_sq_diff(clean, estimate), peak)
}

/// Scales every column to unit ℓ2 norm; zero columns stay zero.
pub fn l2_normalize_columns(m: &mut Matrix) {
    for j in 0..m.cols() {
        let col = m.col_mut(j);
        let n = norm(col);
        if n > 0.0 {
            col.iter_mut().for_each(|v| *v /= n);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn blobs(n: usize, sigma: f64, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let l = i % 2;
            let cx = if l == 0 { -1.0 } else { 1.0 };
            cols.push(vec![
                cx + sigma * rng.sample::<f64, _>(StandardNormal),
                sigma * rng.sample::<f64, _>(StandardNormal),
            ]);
            labels.push(l);
        }
        (Matrix::from_columns(&cols).unwrap(), labels)
    }

    #[test]
    fn svm_separates_two_points() {
        let x = Matrix::from_columns(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let m = train_svm_ova(&x, &[0, 1], 10.0, 50, 1).unwrap();
        assert_eq!(accuracy(&m, &x, &[0, 1]).unwrap(), 1.0);
    }

    #[test]
    fn svm_conflicting_duplicates() {
        let x = Matrix::from_columns(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let m = train_svm_ova(&x, &[0, 1], 1.0, 20, 1).unwrap();
        assert!(accuracy(&m, &x, &[0, 1]).unwrap() <= 0.5);
    }

    #[test]
    fn svm_blobs() {
        let (train, tl) = blobs(200, 0.1, 1);
        let (test, sl) = blobs(200, 0.1, 2);
        let m = train_svm_ova(&train, &tl, 1.0, 20, 3).unwrap();
        assert!(accuracy(&m, &test, &sl).unwrap() > 0.95);
    }

    #[test]
    fn svm_rejects_single_class() {
        let x = Matrix::identity(2);
        assert!(matches!(
            train_svm_ova(&x, &[1, 1], 1.0, 5, 0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn argmax_invariant_to_constant_shift() {
        let (x, l) = blobs(60, 0.5, 4);
        let m = train_svm_ova(&x, &l, 1.0, 10, 0).unwrap();
        let mut shifted = m.clone();
        shifted.bias.iter_mut().for_each(|b| *b += 3.7);
        assert_eq!(m.predict(&x).unwrap(), shifted.predict(&x).unwrap());
    }

    #[test]
    fn cv_picks_from_grid() {
        let (x, l) = blobs(100, 0.3, 5);
        let (c, scores) = select_svm_c(&x, &l, &[0.01, 1.0, 100.0], 5, 10, 0).unwrap();
        assert_eq!(scores.len(), 3);
        assert!([0.01, 1.0, 100.0].contains(&c));
    }

    #[test]
    fn kfold_partitions() {
        let folds = kfold(23, 5, 1).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(folds.iter().all(|f| f.len() == 4 || f.len() == 5));
    }

    #[test]
    fn logistic_separable_and_uniform_start() {
        let (x, l) = blobs(100, 0.1, 6);
        let m = train_logistic(&x, &l, 1e-4, 200).unwrap();
        assert_eq!(accuracy(&m, &x, &l).unwrap(), 1.0);
        let zero = train_logistic(&x, &l, 1e-4, 0).unwrap();
        let s = zero.scores(&x).unwrap();
        assert!(s.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let (f, n, c) = (4, 9, 3);
            let x = crate::testutil::gaussian_matrix(f, n, &mut rng);
            let t: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
            let p: Vec<f64> = (0..c * (f + 1)).map(|_| rng.sample(StandardNormal)).collect();
            let (_, g) = logistic_loss_and_grad(&p, &x, &t, c, 0.3);
            let h = 1e-5;
            for i in 0..p.len() {
                let mut up = p.clone();
                up[i] += h;
                let mut dn = p.clone();
                dn[i] -= h;
                let fd = (logistic_loss_and_grad(&up, &x, &t, c, 0.3).0
                    - logistic_loss_and_grad(&dn, &x, &t, c, 0.3).0)
                    / (2.0 * h);
                let rel = (fd - g[i]).abs() / g[i].abs().max(fd.abs()).max(1e-8);
                assert!(rel < 1e-5, "param {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn accuracy_and_binary_accuracy() {
        let x = Matrix::from_columns(&[vec![1.0], vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        let constant = LinearModel {
            weights: Matrix::zeros(2, 1),
            bias: Vector::from(vec![1.0, 0.0]),
            kind: ModelKind::Svm,
            classes: vec![0, 1],
        };
        let labels = [0, 1, 0, 1];
        assert_eq!(accuracy(&constant, &x, &labels).unwrap(), 0.5);
        assert_eq!(mean_binary_accuracy(&constant, &x, &labels).unwrap(), 0.5);
        let perfect = [0, 0, 0, 0];
        assert_eq!(accuracy(&constant, &x, &perfect).unwrap(), 1.0);
    }

    #[test]
    fn ap_basics() {
        let perfect = RankedList::new(vec![(3.0, true), (2.0, true), (1.0, false)]).unwrap();
        assert_eq!(average_precision(&perfect).unwrap(), 1.0);
        let single = RankedList::new(vec![(5.0, false), (4.0, false), (3.0, true), (1.0, false)]).unwrap();
        assert!((average_precision(&single).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let none = RankedList::new(vec![(1.0, false)]).unwrap();
        assert!(matches!(average_precision(&none), Err(Error::Undefined(_))));
    }

    #[test]
    fn ap_ties_keep_input_order() {
        let r = RankedList::new(vec![(1.0, false), (1.0, true)]).unwrap();
        assert_eq!(average_precision(&r).unwrap(), 0.5);
    }

    #[test]
    fn ap_reversed_perfect_ranking() {
        let (n, p) = (10usize, 3usize);
        let items: Vec<(f64, bool)> = (0..n).map(|i| (i as f64, i >= n - p)).collect();
        let reversed: Vec<(f64, bool)> = items.iter().map(|&(s, b)| (-s, b)).collect();
        let r = RankedList::new(reversed).unwrap();
        let want: f64 = (1..=p).map(|k| k as f64 / (n - p + k) as f64).sum::<f64>() / p as f64;
        assert!((average_precision(&r).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn ap_invariant_to_monotone_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let items: Vec<(f64, bool)> = (0..30)
            .map(|_| (rng.random_range(-2.0..2.0), rng.random_bool(0.3)))
            .chain(std::iter::once((0.5, true)))
            .collect();
        let mapped: Vec<(f64, bool)> = items.iter().map(|&(s, b)| (s.exp() * 3.0 + 1.0, b)).collect();
        let a = average_precision(&RankedList::new(items).unwrap()).unwrap();
        let b = average_precision(&RankedList::new(mapped).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn psnr_values() {
        let clean = Matrix::zeros(1, 4);
        let est = Matrix::from_col_major(1, 4, vec![0.1, -0.1, 0.1, -0.1]).unwrap();
        let v = psnr(&clean, &est, 1.0).unwrap().db().unwrap();
        assert!((v - 20.0).abs() < 1e-12);
        assert_eq!(psnr(&clean, &clean, 1.0).unwrap(), Psnr::Exact);
        assert!(psnr(&clean, &Matrix::zeros(2, 2), 1.0).is_err());
        assert_eq!(serde_json::to_string(&Psnr::Exact).unwrap(), "\"exact\"");
    }

    #[test]
    fn normalize_columns() {
        let mut m = Matrix::from_columns(&[vec![3.0, 4.0], vec![0.0, 0.0]]).unwrap();
        l2_normalize_columns(&mut m);
        assert_eq!(m.col(0), &[0.6, 0.8]);
        assert_eq!(m.col(1), &[0.0, 0.0]);
    }
}
