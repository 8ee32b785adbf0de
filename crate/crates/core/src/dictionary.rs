//! Dictionary learning: K-SVD and online (minibatch) learning.
//!
//! Both methods alternate a sparse coding step with a dictionary step and
//! keep every atom inside the unit ℓ2 ball.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{load_matrix, save_matrix, with_suffix};
use crate::sparse::{batch_encode, Regularizer, SolverConfig, SparseCode};
use crate::tensor::{axpy, dot, norm, Matrix};

/// Slack allowed on the unit-norm atom constraint.
pub const NORM_SLACK: f64 = 1e-12;
/// Atoms shorter than this are treated as dead.
pub const MIN_ATOM_NORM: f64 = 1e-8;

/// During training, an atom this correlated with a lower-indexed atom is
/// replaced like a dead one.
pub const DUPLICATE_CORRELATION: f64 = 0.99;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 500;

/// Rows `row_start..row_end` of a joint dictionary belonging to one modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityBlock {
    pub name: String,
    pub row_start: usize,
    pub row_end: usize,
    /// Scale applied to this modality's input before concatenation.
    pub weight: f64,
}

impl ModalityBlock {
    pub fn len(&self) -> usize {
        self.row_end - self.row_start
    }

    pub fn is_empty(&self) -> bool {
        self.row_end == self.row_start
    }
}

/// `K` atoms of dimension `N`, stored as the columns of an `N × K` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: Matrix,
    blocks: Option<Vec<ModalityBlock>>,
}

impl Dictionary {
    pub fn new(atoms: Matrix) -> Result<Self> {
        if atoms.rows() == 0 || atoms.cols() == 0 {
            return Err(Error::Argument(format!(
                "degenerate {}x{} dictionary",
                atoms.rows(),
                atoms.cols()
            )));
        }
        if let Some((j, n)) = atoms
            .columns()
            .map(norm)
            .enumerate()
            .find(|&(_, n)| n > 1.0 + NORM_SLACK)
        {
            return Err(Error::Argument(format!(
                "atom {j} has norm {n}, exceeding 1"
            )));
        }
        Ok(Dictionary {
            atoms,
            blocks: None,
        })
    }

    /// Attaches modality blocks, which must partition the rows in order.
    pub fn with_blocks(mut self, blocks: Vec<ModalityBlock>) -> Result<Self> {
        let mut next = 0;
        for b in &blocks {
            if b.row_start != next || b.row_end <= b.row_start {
                return Err(Error::Argument(format!(
                    "modality block `{}` ({}..{}) does not continue the partition at row {next}",
                    b.name, b.row_start, b.row_end
                )));
            }
            next = b.row_end;
        }
        if next != self.atom_dim() {
            return Err(Error::Argument(format!(
                "modality blocks cover {next} of {} rows",
                self.atom_dim()
            )));
        }
        self.blocks = Some(blocks);
        Ok(self)
    }

    pub fn atom_dim(&self) -> usize {
        self.atoms.rows()
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.cols()
    }

    pub fn atoms(&self) -> &Matrix {
        &self.atoms
    }

    pub fn into_atoms(self) -> Matrix {
        self.atoms
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        self.atoms.col(j)
    }

    pub fn blocks(&self) -> Option<&[ModalityBlock]> {
        self.blocks.as_deref()
    }
}

impl AsRef<Matrix> for Dictionary {
    fn as_ref(&self) -> &Matrix {
        &self.atoms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMethod {
    Ksvd,
    Online,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub num_atoms: usize,
    pub solver: SolverConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub method: TrainMethod,
    /// Atoms used at most this many times in an epoch are replaced.
    /// `None` disables replacement.
    pub dead_atom_threshold: Option<usize>,
}

impl TrainConfig {
    pub fn ksvd(num_atoms: usize, sparsity: usize) -> Self {
        TrainConfig {
            num_atoms,
            solver: SolverConfig::l0(sparsity),
            epochs: 50,
            batch_size: 256,
            seed: 0,
            method: TrainMethod::Ksvd,
            dead_atom_threshold: Some(0),
        }
    }

    pub fn online(num_atoms: usize, lambda: f64) -> Self {
        TrainConfig {
            num_atoms,
            solver: SolverConfig::l1(lambda),
            epochs: 50,
            batch_size: 256,
            seed: 0,
            method: TrainMethod::Online,
            dead_atom_threshold: Some(0),
        }
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_atoms == 0 {
            return Err(Error::Config("num_atoms must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        self.solver.validate()?;
        match (self.method, self.solver.regularizer) {
            (TrainMethod::Ksvd, Regularizer::L0 { sparsity }) => {
                if sparsity > self.num_atoms {
                    return Err(Error::Config(format!(
                        "sparsity {sparsity} exceeds {} atoms",
                        self.num_atoms
                    )));
                }
                Ok(())
            }
            (TrainMethod::Online, Regularizer::L1 { .. }) => Ok(()),
            (TrainMethod::Ksvd, _) => Err(Error::Config("K-SVD needs an L0 solver".into())),
            (TrainMethod::Online, _) => {
                Err(Error::Config("online learning needs an L1 solver".into()))
            }
        }
    }
}

fn check_data(xs: &Matrix) -> Result<()> {
    if xs.cols() == 0 || xs.rows() == 0 {
        return Err(Error::Argument(format!(
            "empty dataset ({}x{})",
            xs.rows(),
            xs.cols()
        )));
    }
    Ok(())
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|x| x / n).collect()
}

/// Initial dictionary: `K` distinct random training columns, unit-normalized.
///
/// All-zero columns are never picked. When fewer than `K` usable columns
/// exist, the remainder is drawn with replacement and perturbed by a small
/// Gaussian jitter before normalizing.
pub fn init_dictionary(xs: &Matrix, cfg: &TrainConfig) -> Result<Dictionary> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    init_with_rng(xs, cfg.num_atoms, &mut rng)
}

fn init_with_rng(xs: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Result<Dictionary> {
    check_data(xs)?;
    if k == 0 {
        return Err(Error::Config("num_atoms must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..xs.cols()).collect();
    order.shuffle(rng);
    let usable: Vec<usize> = order
        .into_iter()
        .filter(|&j| norm(xs.col(j)) > 0.0)
        .collect();
    if usable.is_empty() {
        return Err(Error::Argument("every training column is zero".into()));
    }
    let n = xs.rows();
    let mut atoms = Matrix::zeros(n, k);
    for a in 0..k {
        let col = if a < usable.len() {
            normalized(xs.col(usable[a]))
        } else {
            let src = normalized(xs.col(usable[rng.random_range(0..usable.len())]));
            let jitter = 0.01 / (n as f64).sqrt();
            let v: Vec<f64> = src
                .iter()
                .map(|x| x + jitter * rng.sample::<f64, _>(StandardNormal))
                .collect();
            normalized(&v)
        };
        atoms.col_mut(a).copy_from_slice(&col);
    }
    Dictionary::new(atoms)
}

/// Number of codes using each atom.
pub fn atom_usage(codes: &[SparseCode], num_atoms: usize) -> Vec<usize> {
    let mut usage = vec![0; num_atoms];
    for c in codes {
        for &(i, _) in c.entries() {
            usage[i] += 1;
        }
    }
    usage
}

/// Replaces atoms whose usage is at most `threshold`.
///
/// Dead atoms are filled, lowest index first, with the training column of
/// largest residual energy `residual_sq[j]` (ties to the lower column
/// index), normalized. After each pick the residuals are lowered to the
/// error of approximating each column by the new atom alone. Columns with
/// zero residual are never used.
pub fn replace_dead_atoms(
    dict: &Dictionary,
    usage: &[usize],
    xs: &Matrix,
    residual_sq: &[f64],
    threshold: usize,
) -> Result<Dictionary> {
    if usage.len() != dict.num_atoms() {
        return Err(Error::Shape(format!(
            "{} usage counts for {} atoms",
            usage.len(),
            dict.num_atoms()
        )));
    }
    if residual_sq.len() != xs.cols() || xs.rows() != dict.atom_dim() {
        return Err(Error::Shape("residuals do not match training data".into()));
    }
    let (atoms, _) = replace_dead(dict.atoms(), usage, xs, residual_sq, threshold, false);
    let mut out = Dictionary::new(atoms)?;
    out.blocks = dict.blocks.clone();
    Ok(out)
}

fn replace_dead(
    atoms: &Matrix,
    usage: &[usize],
    xs: &Matrix,
    residual_sq: &[f64],
    threshold: usize,
    clear_duplicates: bool,
) -> (Matrix, Vec<usize>) {
    let mut atoms = atoms.clone();
    let duplicate = |j: usize| {
        clear_duplicates
            && (0..j).any(|i| dot(atoms.col(i), atoms.col(j)).abs() > DUPLICATE_CORRELATION)
    };
    let dead: Vec<usize> = (0..usage.len())
        .filter(|&j| usage[j] <= threshold || norm(atoms.col(j)) < MIN_ATOM_NORM || duplicate(j))
        .collect();
    if dead.is_empty() {
        return (atoms, dead);
    }
    // Each pick lowers the remaining columns' residuals to what the new
    // atom alone would leave, so several dead atoms are not all filled
    // from the same poorly represented direction.
    let mut rsq = residual_sq.to_vec();
    let mut replaced = Vec::new();
    for &atom in &dead {
        let Some(col) = (0..xs.cols())
            .filter(|&j| rsq[j] > 0.0 && norm(xs.col(j)) > 0.0)
            .max_by(|&a, &b| rsq[a].total_cmp(&rsq[b]).then(b.cmp(&a)))
        else {
            break;
        };
        let d = normalized(xs.col(col));
        for (j, r) in rsq.iter_mut().enumerate() {
            let x = xs.col(j);
            let c = dot(&d, x);
            *r = r.min((dot(x, x) - c * c).max(0.0));
        }
        rsq[col] = 0.0;
        atoms.col_mut(atom).copy_from_slice(&d);
        replaced.push(atom);
    }
    (atoms, replaced)
}

/// Outcome of K-SVD training.
#[derive(Debug, Clone)]
pub struct KsvdResult {
    pub dictionary: Dictionary,
    pub codes: Vec<SparseCode>,
    /// `‖X − DY‖²_F` after each epoch's atom updates.
    pub loss_trace: Vec<f64>,
    /// `‖X − DY‖²_F` after each epoch's coding step, before atom updates.
    pub coding_loss_trace: Vec<f64>,
}

/// K-SVD.
///
/// Each epoch OMP-encodes every column with the current dictionary, keeping
/// a column's previous code whenever it reconstructs strictly better, then
/// sweeps the atoms: atom `k` and its coefficients are replaced by the
/// leading singular pair of the residual restricted to the columns that use
/// it. Both steps are non-increasing in `‖X − DY‖²_F`.
pub fn train_ksvd(xs: &Matrix, cfg: &TrainConfig) -> Result<KsvdResult> {
    if cfg.method != TrainMethod::Ksvd {
        return Err(Error::Config("train_ksvd called with a non-K-SVD config".into()));
    }
    cfg.validate()?;
    check_data(xs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dict = init_with_rng(xs, cfg.num_atoms, &mut rng)?;
    let mut atoms = dict.into_atoms();
    let (n, cols) = xs.shape();
    let k = cfg.num_atoms;

    let mut codes: Option<Vec<SparseCode>> = None;
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let mut coding_loss_trace = Vec::with_capacity(cfg.epochs);

    for _epoch in 0..cfg.epochs {
        let fresh = batch_encode(xs, &atoms, &cfg.solver)?;
        let current: Vec<SparseCode> = match codes.take() {
            None => fresh,
            Some(prev) => fresh
                .into_iter()
                .zip(prev)
                .enumerate()
                .map(|(j, (new, old))| {
                    let x = xs.col(j);
                    if old.residual_sq(x, &atoms) < new.residual_sq(x, &atoms) {
                        old
                    } else {
                        new
                    }
                })
                .collect(),
        };

        // Residual matrix R = X − DY and the per-atom column lists.
        let mut residual = xs.clone();
        let mut users: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
        for (j, code) in current.iter().enumerate() {
            for &(i, v) in code.entries() {
                axpy(-v, atoms.col(i), residual.col_mut(j));
                users[i].push((j, v));
            }
        }
        coding_loss_trace.push(residual.frobenius_sq());

        let mut coeffs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cols];
        for (atom, list) in users.iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            // E = R_ω + d yᵀ
            let mut e = Matrix::zeros(n, list.len());
            for (c, &(j, v)) in list.iter().enumerate() {
                let ec = e.col_mut(c);
                ec.copy_from_slice(residual.col(j));
                axpy(v, atoms.col(atom), ec);
            }
            let (u, y) = rank_one_update(&e, atoms.col(atom));
            for (c, &(j, _)) in list.iter().enumerate() {
                let rc = residual.col_mut(j);
                rc.copy_from_slice(e.col(c));
                axpy(-y[c], &u, rc);
                if y[c] != 0.0 {
                    coeffs[j].push((atom, y[c]));
                }
            }
            atoms.col_mut(atom).copy_from_slice(&u);
        }
        loss_trace.push(residual.frobenius_sq());

        let updated: Vec<SparseCode> = coeffs
            .into_iter()
            .map(|entries| SparseCode::new(k, entries, cfg.solver.regularizer))
            .collect::<Result<_>>()?;

        if let Some(threshold) = cfg.dead_atom_threshold {
            let usage = atom_usage(&updated, k);
            if usage.iter().any(|&u| u > 0) {
                let rsq: Vec<f64> = residual.columns().map(|c| dot(c, c)).collect();
                atoms = replace_dead(&atoms, &usage, xs, &rsq, threshold, true).0;
            }
        }
        codes = Some(updated);
    }

    Ok(KsvdResult {
        dictionary: Dictionary::new(atoms)?,
        codes: codes.unwrap_or_default(),
        loss_trace,
        coding_loss_trace,
    })
}

/// Leading left singular vector `u` of `e` and the optimal coefficients
/// `eᵀu`, by power iteration on `e eᵀ` started from the current atom.
///
/// Starting from the current atom makes `‖eᵀu‖` non-decreasing, so the
/// restricted residual never grows even if iteration stops early.
fn rank_one_update(e: &Matrix, start: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let proj = |u: &[f64]| -> Vec<f64> { e.columns().map(|c| dot(c, u)).collect() };
    let mut u = start.to_vec();
    let mut y = proj(&u);
    if norm(&y) == 0.0 {
        return (u, y);
    }
    for _ in 0..POWER_MAX_ITER {
        let mut next = vec![0.0; e.rows()];
        for (c, &yc) in y.iter().enumerate() {
            axpy(yc, e.col(c), &mut next);
        }
        let s = norm(&next);
        if s == 0.0 {
            break;
        }
        next.iter_mut().for_each(|v| *v /= s);
        let change = crate::tensor::sq_dist(&next, &u).sqrt();
        u = next;
        y = proj(&u);
        if change <= POWER_TOL {
            break;
        }
    }
    (u, y)
}

/// Outcome of online dictionary learning.
#[derive(Debug, Clone)]
pub struct OnlineResult {
    pub dictionary: Dictionary,
    /// Sum over the epoch's minibatches of `‖x − Dy‖² + λ‖y‖₁`, each
    /// evaluated with the dictionary the batch was encoded against.
    pub loss_trace: Vec<f64>,
}

/// Passes of block-coordinate descent over the atoms per minibatch.
const ONLINE_DICT_PASSES: usize = 3;

/// Online dictionary learning with minibatches.
///
/// Per minibatch: ℓ1-encode against the current dictionary, accumulate
/// `A += Σ y yᵀ` and `B += Σ x yᵀ`, then update each atom by block
/// coordinate descent on the surrogate `½tr(DᵀDA) − tr(DᵀB)`, projecting it
/// onto the unit ball. Examples are visited in a seeded shuffle each epoch.
pub fn train_online(xs: &Matrix, cfg: &TrainConfig) -> Result<OnlineResult> {
    if cfg.method != TrainMethod::Online {
        return Err(Error::Config(
            "train_online called with a non-online config".into(),
        ));
    }
    cfg.validate()?;
    check_data(xs)?;
    let lambda = cfg.solver.lambda().expect("validated L1 solver");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dict = init_with_rng(xs, cfg.num_atoms, &mut rng)?;
    let mut atoms = dict.into_atoms();
    let (n, cols) = xs.shape();
    let k = cfg.num_atoms;

    let mut a_stats = Matrix::zeros(k, k);
    let mut b_stats = Matrix::zeros(n, k);
    // Each example's latest code; its contribution to the statistics is
    // swapped out when the example is revisited.
    let mut held: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cols];
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..cols).collect();

    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut objective = 0.0;
        let mut usage = vec![0usize; k];
        let mut residual_sq = vec![0.0; cols];

        for batch in order.chunks(cfg.batch_size) {
            let xb = xs.select_columns(batch);
            let codes = batch_encode(&xb, &atoms, &cfg.solver)?;
            for (c, (code, &j)) in codes.iter().zip(batch).enumerate() {
                let r = code.residual_sq(xb.col(c), &atoms);
                residual_sq[j] = r;
                objective += r + lambda * code.l1_norm();
                accumulate(&mut a_stats, &mut b_stats, xb.col(c), &held[j], -1.0);
                accumulate(&mut a_stats, &mut b_stats, xb.col(c), code.entries(), 1.0);
                for &(p, _) in code.entries() {
                    usage[p] += 1;
                }
                held[j] = code.entries().to_vec();
            }
            update_atoms(&mut atoms, &a_stats, &b_stats);
        }
        loss_trace.push(objective);

        if let Some(threshold) = cfg.dead_atom_threshold {
            if usage.iter().any(|&u| u > 0) {
                let (fresh, replaced) =
                    replace_dead(&atoms, &usage, xs, &residual_sq, threshold, true);
                atoms = fresh;
                for j in replaced {
                    for i in 0..k {
                        a_stats.set(i, j, 0.0);
                        a_stats.set(j, i, 0.0);
                    }
                    b_stats.col_mut(j).iter_mut().for_each(|v| *v = 0.0);
                    for h in held.iter_mut() {
                        h.retain(|&(p, _)| p != j);
                    }
                }
            }
        }
    }

    Ok(OnlineResult {
        dictionary: Dictionary::new(atoms)?,
        loss_trace,
    })
}

/// Adds `sign · (y yᵀ, x yᵀ)` to the statistics.
fn accumulate(a: &mut Matrix, b: &mut Matrix, x: &[f64], y: &[(usize, f64)], sign: f64) {
    for &(p, vp) in y {
        axpy(sign * vp, x, b.col_mut(p));
        for &(q, vq) in y {
            let cur = a.get(q, p);
            a.set(q, p, cur + sign * vp * vq);
        }
    }
}

fn update_atoms(atoms: &mut Matrix, a_stats: &Matrix, b_stats: &Matrix) {
    let (n, k) = atoms.shape();
    let mut da = vec![0.0; n];
    for _ in 0..ONLINE_DICT_PASSES {
        for j in 0..k {
            let ajj = a_stats.get(j, j);
            if ajj <= 1e-12 {
                continue;
            }
            // D a_j
            da.iter_mut().for_each(|v| *v = 0.0);
            for (i, &aij) in a_stats.col(j).iter().enumerate() {
                if aij != 0.0 {
                    axpy(aij, atoms.col(i), &mut da);
                }
            }
            let mut u: Vec<f64> = atoms.col(j).to_vec();
            for ((ui, bi), dai) in u.iter_mut().zip(b_stats.col(j)).zip(&da) {
                *ui += (bi - dai) / ajj;
            }
            let len = norm(&u);
            if len < MIN_ATOM_NORM {
                continue;
            }
            let scale = 1.0 / len.max(1.0);
            let col = atoms.col_mut(j);
            for (c, ui) in col.iter_mut().zip(&u) {
                *c = ui * scale;
            }
        }
    }
}

/// Trains with whichever method the config selects.
pub fn train(xs: &Matrix, cfg: &TrainConfig) -> Result<Dictionary> {
    train_with_trace(xs, cfg).map(|(d, _)| d)
}

/// Like [`train`], also returning the per-epoch loss trace.
pub fn train_with_trace(xs: &Matrix, cfg: &TrainConfig) -> Result<(Dictionary, Vec<f64>)> {
    match cfg.method {
        TrainMethod::Ksvd => train_ksvd(xs, cfg).map(|r| (r.dictionary, r.loss_trace)),
        TrainMethod::Online => train_online(xs, cfg).map(|r| (r.dictionary, r.loss_trace)),
    }
}

/// Sidecar metadata written next to a dictionary's atom matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryMeta {
    pub atom_dim: usize,
    pub num_atoms: usize,
    #[serde(default)]
    pub modality_blocks: Vec<ModalityBlock>,
    pub solver: Option<SolverConfig>,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_joint: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_cross: Option<f64>,
}

impl DictionaryMeta {
    pub fn for_dictionary(d: &Dictionary, solver: Option<SolverConfig>, seed: Option<u64>) -> Self {
        DictionaryMeta {
            atom_dim: d.atom_dim(),
            num_atoms: d.num_atoms(),
            modality_blocks: d.blocks().map(<[_]>::to_vec).unwrap_or_default(),
            solver,
            seed,
            lambda_joint: None,
            lambda_cross: None,
        }
    }
}

/// `<stem>.msc` and `<stem>.json` for a dictionary stem.
pub fn dictionary_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (with_suffix(stem, "msc"), with_suffix(stem, "json"))
}

pub fn save_dictionary(d: &Dictionary, meta: &DictionaryMeta, stem: &Path) -> Result<()> {
    let (mat, json) = dictionary_paths(stem);
    save_matrix(d.atoms(), &mat)?;
    let text = serde_json::to_string_pretty(meta).map_err(|e| Error::Json {
        path: json.clone(),
        source: e,
    })?;
    std::fs::write(&json, text + "\n")
        .map_err(|e| Error::io(format!("writing {}", json.display()), e))
}

pub fn load_dictionary(stem: &Path) -> Result<(Dictionary, DictionaryMeta)> {
    let (mat, json) = dictionary_paths(stem);
    let atoms = load_matrix(&mat)?;
    let text = std::fs::read_to_string(&json)
        .map_err(|e| Error::io(format!("reading {}", json.display()), e))?;
    let meta: DictionaryMeta = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: json.clone(),
        source: e,
    })?;
    if meta.atom_dim != atoms.rows() || meta.num_atoms != atoms.cols() {
        return Err(Error::Format {
            path: json,
            reason: format!(
                "metadata says {}x{}, matrix is {}x{}",
                meta.atom_dim,
                meta.num_atoms,
                atoms.rows(),
                atoms.cols()
            ),
        });
    }
    let mut d = Dictionary::new(atoms)?;
    if !meta.modality_blocks.is_empty() {
        d = d.with_blocks(meta.modality_blocks.clone())?;
    }
    Ok((d, meta))
}
