//! Classification on synthetic paired modalities.
//!
//! Examples carry a shared latent code `z` that drives both modalities:
//!
//! ```text
//! xa = A z + noise      xb = B g(z) + noise
//! ```
//!
//! In the correlated variant `g` is the identity, `z ≥ 0`, and the label is
//! the factor group most of the active factors come from. In the
//! nonlinear variant `g(z) = z∘z`, `z` is signed, and every example is a
//! sequence of descriptors: its label is decided by which *pair* of
//! factors co-occurs across the sequence, arranged so that the presence of
//! individual factors is balanced between classes and only the pairing
//! separates them.
//!
//! Each feature scheme is trained without labels on the training folds,
//! the per-descriptor features are max-pooled per example, and a one-vs-all
//! linear SVM is evaluated on the held-out fold.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{derive_seed, mean_and_sem, Experiment};
use crate::deep::{
    pool_all, train_stack, LayerConfig, ModalityLayers, PoolingConfig, PoolingKind, StackConfig,
};
use crate::dictionary::{train, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::{
    accuracy, complement, kfold, mean_binary_accuracy, model_map, select_svm_c, train_svm_ova,
};
use crate::multimodal::{coupling_factor, train_joint, ModalitySpec};
use crate::sparse::{batch_encode, codes_to_matrix, SolverConfig};
use crate::tensor::Matrix;

pub const MODALITY_A: &str = "a";
pub const MODALITY_B: &str = "b";

/// Feature schemes, from unimodal coding through deep stacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "uni-a")]
    UniA,
    #[serde(rename = "uni-b")]
    UniB,
    #[serde(rename = "uni-union")]
    UniUnion,
    #[serde(rename = "joint")]
    Joint,
    #[serde(rename = "cross-a")]
    CrossA,
    #[serde(rename = "cross-b")]
    CrossB,
    #[serde(rename = "multi-union")]
    MultiUnion,
    #[serde(rename = "deep-3a")]
    Deep3a,
    #[serde(rename = "deep-3b")]
    Deep3b,
}

impl Scheme {
    pub const ALL: [Scheme; 9] = [
        Scheme::UniA,
        Scheme::UniB,
        Scheme::UniUnion,
        Scheme::Joint,
        Scheme::CrossA,
        Scheme::CrossB,
        Scheme::MultiUnion,
        Scheme::Deep3a,
        Scheme::Deep3b,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::UniA => "uni-a",
            Scheme::UniB => "uni-b",
            Scheme::UniUnion => "uni-union",
            Scheme::Joint => "joint",
            Scheme::CrossA => "cross-a",
            Scheme::CrossB => "cross-b",
            Scheme::MultiUnion => "multi-union",
            Scheme::Deep3a => "deep-3a",
            Scheme::Deep3b => "deep-3b",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}`")))
    }
}

/// Parses a comma-separated scheme list, rejecting duplicates.
pub fn parse_schemes(list: &str) -> Result<Vec<Scheme>> {
    let mut out: Vec<Scheme> = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let s: Scheme = part.parse()?;
        if out.contains(&s) {
            return Err(Error::Config(format!("scheme `{s}` listed twice")));
        }
        out.push(s);
    }
    if out.is_empty() {
        return Err(Error::Config("empty scheme list".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub nonlinear: bool,
    /// Correlated variant: number of classes, one factor group each.
    pub classes: usize,
    pub factors_per_class: usize,
    /// Correlated variant: active factors per example, and how many of
    /// them come from the label's group.
    pub sparsity: usize,
    pub class_factors: usize,
    /// Nonlinear variant: independent four-factor blocks.
    pub blocks: usize,
    /// Descriptors per example (nonlinear variant).
    pub descriptors: usize,
    pub dim_a: usize,
    pub dim_b: usize,
    /// Noise standard deviations.
    pub noise_a: f64,
    pub noise_b: f64,
    /// Correlated variant: probability that an active factor drives both
    /// modalities; otherwise it drives one of them, chosen evenly.
    pub share: f64,
    /// Probability that one modality of an example, chosen evenly, is
    /// missing and recorded as zeros.
    pub missing: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            nonlinear: false,
            classes: 4,
            factors_per_class: 6,
            sparsity: 3,
            class_factors: 2,
            blocks: 3,
            descriptors: 6,
            dim_a: 12,
            dim_b: 12,
            noise_a: 0.1,
            noise_b: 0.1,
            share: 0.8,
            missing: 0.0,
        }
    }
}

impl GeneratorConfig {
    pub fn latent_dim(&self) -> usize {
        if self.nonlinear {
            4 * self.blocks
        } else {
            self.classes * self.factors_per_class
        }
    }

    pub fn num_classes(&self) -> usize {
        if self.nonlinear {
            2
        } else {
            self.classes
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.dim_a == 0 || self.dim_b == 0 {
            return bad("modality dimensions must be positive");
        }
        if !(self.noise_a >= 0.0 && self.noise_b >= 0.0)
            || !self.noise_a.is_finite()
            || !self.noise_b.is_finite()
        {
            return bad("noise levels must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&self.share) {
            return bad("share must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.missing) {
            return bad("missing must lie in [0, 1)");
        }
        if self.nonlinear {
            if self.blocks == 0 || self.descriptors < 2 {
                return bad("nonlinear data needs >= 1 block and >= 2 descriptors");
            }
        } else {
            if self.classes < 2 || self.factors_per_class == 0 {
                return bad("need >= 2 classes with >= 1 factor each");
            }
            if self.class_factors == 0
                || self.class_factors > self.sparsity
                || self.class_factors > self.factors_per_class
                || self.sparsity - self.class_factors > self.latent_dim() - self.factors_per_class
            {
                return bad("class_factors / sparsity do not fit the factor groups");
            }
        }
        Ok(())
    }
}

/// Paired examples: per modality one descriptor sequence (columns) each.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset {
    pub a: Vec<Matrix>,
    pub b: Vec<Matrix>,
    pub labels: Vec<usize>,
}

impl PairedDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> PairedDataset {
        PairedDataset {
            a: idx.iter().map(|&i| self.a[i].clone()).collect(),
            b: idx.iter().map(|&i| self.b[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

fn unit_gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for j in 0..cols {
        let c = m.col_mut(j);
        c.iter_mut()
            .for_each(|v| *v = rng.sample::<f64, _>(StandardNormal));
        let n = crate::tensor::norm(c);
        c.iter_mut().for_each(|v| *v /= n);
    }
    m
}

fn observe(mixing: &Matrix, z: &[f64], noise: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x = mixing.mul_vec(z).expect("latent size matches").into_inner();
    for v in &mut x {
        *v += noise * rng.sample::<f64, _>(StandardNormal);
    }
    x
}

/// Templates of one four-factor block, as factor offsets: class 0 pairs
/// the block as {0,1},{2,3}; class 1 as {0,2},{1,3}. Every factor appears
/// once per class.
const TEMPLATES: [[[usize; 2]; 2]; 2] = [[[0, 1], [2, 3]], [[0, 2], [1, 3]]];

/// Draws `n` labelled examples. The mixing matrices come from `seed` as
/// well, so one seed fixes the whole task.
pub fn generate(cfg: &GeneratorConfig, n: usize, seed: u64) -> Result<PairedDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = cfg.latent_dim();
    let mix_a = unit_gaussian(cfg.dim_a, l, &mut rng);
    let mix_b = unit_gaussian(cfg.dim_b, l, &mut rng);
    let classes = cfg.num_classes();
    let mut out = PairedDataset {
        a: Vec::with_capacity(n),
        b: Vec::with_capacity(n),
        labels: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let label = rng.random_range(0..classes);
        // (latent of a, latent of b) per descriptor
        let zs: Vec<(Vec<f64>, Vec<f64>)> = if cfg.nonlinear {
            let block = rng.random_range(0..cfg.blocks);
            let pair = TEMPLATES[label][rng.random_range(0..2)];
            (0..cfg.descriptors)
                .map(|t| {
                    let mut z = vec![0.0; l];
                    let f = 4 * block + pair[t % 2];
                    let mag: f64 = rng.random_range(0.5..1.5);
                    z[f] = if rng.random_bool(0.5) { mag } else { -mag };
                    let g = z.iter().map(|v| v * v).collect();
                    (z, g)
                })
                .collect()
        } else {
            let mut z = vec![0.0; l];
            let fpc = cfg.factors_per_class;
            for i in sample(&mut rng, fpc, cfg.class_factors) {
                z[label * fpc + i] = rng.random_range(0.5..1.5);
            }
            let others = l - fpc;
            for i in sample(&mut rng, others, cfg.sparsity - cfg.class_factors) {
                let f = if i < label * fpc { i } else { i + fpc };
                z[f] = rng.random_range(0.5..1.5);
            }
            let mut zb = z.clone();
            if cfg.share < 1.0 {
                for f in 0..l {
                    if z[f] != 0.0 && !rng.random_bool(cfg.share) {
                        if rng.random_bool(0.5) {
                            z[f] = 0.0;
                        } else {
                            zb[f] = 0.0;
                        }
                    }
                }
            }
            vec![(z, zb)]
        };
        let mut xa = Vec::with_capacity(zs.len());
        let mut xb = Vec::with_capacity(zs.len());
        for (za, zb) in &zs {
            xa.push(observe(&mix_a, za, cfg.noise_a, &mut rng));
            xb.push(observe(&mix_b, zb, cfg.noise_b, &mut rng));
        }
        if cfg.missing > 0.0 && rng.random_bool(cfg.missing) {
            let gone = if rng.random_bool(0.5) { &mut xa } else { &mut xb };
            gone.iter_mut().for_each(|x| x.iter_mut().for_each(|v| *v = 0.0));
        }
        out.a.push(Matrix::from_columns(&xa)?);
        out.b.push(Matrix::from_columns(&xb)?);
        out.labels.push(label);
    }
    Ok(out)
}

/// Layer sizes and penalties of the deep schemes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeepSchemeConfig {
    pub layer1_atoms: usize,
    pub layer2_atoms: usize,
    pub joint_atoms: usize,
    /// Second joint layer (deep-3b only).
    pub joint2_atoms: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda_joint: f64,
    /// Pooling factor after the first layer; 0 pools whole sequences.
    pub pool1: usize,
    pub pool2: usize,
    pub pooling: PoolingKind,
}

impl Default for DeepSchemeConfig {
    fn default() -> Self {
        DeepSchemeConfig {
            layer1_atoms: 24,
            layer2_atoms: 48,
            joint_atoms: 48,
            joint2_atoms: 24,
            lambda1: 0.1,
            lambda2: 0.1,
            lambda_joint: 0.1,
            pool1: 0,
            pool2: 1,
            pooling: PoolingKind::Max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    pub generator: GeneratorConfig,
    pub examples: usize,
    /// Independent datasets, each cross-validated.
    pub repetitions: usize,
    pub folds: usize,
    /// When set, one split per repetition that trains on this fraction of
    /// the examples and tests on the rest, instead of k-fold.
    pub train_fraction: Option<f64>,
    /// Atoms of the unimodal and joint dictionaries.
    pub num_atoms: usize,
    /// Unimodal λ, also the cross-modal λ″; the joint λ′ is the coupled
    /// value `(1/Na + 1/Nb)·λ` unless `lambda_joint` is set.
    pub lambda: f64,
    pub lambda_joint: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub svm_c_grid: Vec<f64>,
    pub svm_epochs: usize,
    /// Inner folds for choosing C on the training part.
    pub svm_folds: usize,
    pub deep: DeepSchemeConfig,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            seed: 0,
            schemes: Scheme::ALL[..7].to_vec(),
            generator: GeneratorConfig::default(),
            examples: 600,
            repetitions: 1,
            folds: 5,
            train_fraction: None,
            num_atoms: 48,
            lambda: 0.3,
            lambda_joint: None,
            epochs: 50,
            batch_size: 128,
            svm_c_grid: vec![0.1, 1.0, 10.0],
            svm_epochs: 20,
            svm_folds: 3,
            deep: DeepSchemeConfig::default(),
        }
    }
}

impl ClassifyConfig {
    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        if self.schemes.is_empty() {
            return Err(Error::Config("no schemes requested".into()));
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return Err(Error::Config(format!("scheme `{s}` listed twice")));
            }
        }
        if self.examples < 2 * self.folds.max(2) || self.repetitions == 0 {
            return Err(Error::Config("too few examples or repetitions".into()));
        }
        if let Some(f) = self.train_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("train_fraction {f} outside (0, 1)")));
            }
        } else if self.folds < 2 {
            return Err(Error::Config("need at least two folds".into()));
        }
        if self.svm_c_grid.is_empty() || self.svm_epochs == 0 || self.svm_folds < 2 {
            return Err(Error::Config("invalid SVM settings".into()));
        }
        self.unimodal_train(0).validate()?;
        self.joint_train(0).validate()?;
        Ok(())
    }

    fn specs(&self) -> Vec<ModalitySpec> {
        vec![
            ModalitySpec {
                name: MODALITY_A.into(),
                dim: self.generator.dim_a,
                weight: 1.0 / (self.generator.dim_a as f64).sqrt(),
            },
            ModalitySpec {
                name: MODALITY_B.into(),
                dim: self.generator.dim_b,
                weight: 1.0 / (self.generator.dim_b as f64).sqrt(),
            },
        ]
    }

    /// λ′ actually used for joint training.
    pub fn resolved_lambda_joint(&self) -> f64 {
        self.lambda_joint
            .unwrap_or_else(|| coupling_factor(&self.specs()) * self.lambda)
    }

    fn unimodal_train(&self, seed: u64) -> TrainConfig {
        TrainConfig::online(self.num_atoms, self.lambda)
            .with_epochs(self.epochs)
            .with_batch_size(self.batch_size)
            .with_seed(seed)
    }

    fn joint_train(&self, seed: u64) -> TrainConfig {
        TrainConfig::online(self.num_atoms, self.resolved_lambda_joint())
            .with_epochs(self.epochs)
            .with_batch_size(self.batch_size)
            .with_seed(seed)
    }

    fn layer(&self, atoms: usize, lambda: f64, pool: usize, seed: u64) -> LayerConfig {
        LayerConfig {
            train: TrainConfig::online(atoms, lambda)
                .with_epochs(self.epochs)
                .with_batch_size(self.batch_size)
                .with_seed(seed),
            pooling: PoolingConfig::new(self.deep.pooling, pool.max(1)),
        }
    }

    /// Stack layout for a deep scheme; `longest` resolves whole-sequence
    /// pooling.
    pub fn stack(&self, scheme: Scheme, longest: usize, seed: u64) -> StackConfig {
        let d = &self.deep;
        let pool1 = if d.pool1 == 0 { longest } else { d.pool1 };
        let modality = |name: &str, tag: u64| ModalityLayers {
            name: name.into(),
            layers: vec![
                self.layer(d.layer1_atoms, d.lambda1, pool1, derive_seed(seed, &[tag, 1])),
                self.layer(d.layer2_atoms, d.lambda2, d.pool2, derive_seed(seed, &[tag, 2])),
            ],
        };
        let mut joint_layers = vec![self.layer(d.joint_atoms, d.lambda_joint, 1, derive_seed(seed, &[3]))];
        if scheme == Scheme::Deep3b {
            joint_layers.push(self.layer(
                d.joint2_atoms,
                d.lambda_joint,
                1,
                derive_seed(seed, &[4]),
            ));
        }
        StackConfig {
            modalities: vec![modality(MODALITY_A, 1), modality(MODALITY_B, 2)],
            joint_layers,
            final_pooling: d.pooling,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub feature_dim: usize,
    /// Mean over repetitions, and its standard error.
    pub accuracy: f64,
    pub accuracy_sem: f64,
    pub mean_binary_accuracy: f64,
    pub map: f64,
    /// Per repetition, averaged over folds.
    pub accuracy_per_rep: Vec<f64>,
    pub map_per_rep: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifyReport {
    pub experiment: Experiment,
    pub config: ClassifyConfig,
    pub results: Vec<SchemeResult>,
}

impl ClassifyReport {
    pub fn result(&self, scheme: Scheme) -> Option<&SchemeResult> {
        self.results.iter().find(|r| r.scheme == scheme)
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "{} ({} repetitions)\n{:<12} {:>6} {:>9} {:>7} {:>9} {:>7}\n",
            match self.experiment {
                Experiment::DeepSynthClassify => "nonlinear synthetic classification",
                _ => "synthetic classification",
            },
            self.config.repetitions,
            "scheme",
            "dim",
            "accuracy",
            "sem",
            "mean-bin",
            "mAP"
        );
        for r in &self.results {
            out += &format!(
                "{:<12} {:>6} {:>8.2}% {:>6.2}% {:>8.2}% {:>6.2}%\n",
                r.scheme.name(),
                r.feature_dim,
                100.0 * r.accuracy,
                100.0 * r.accuracy_sem,
                100.0 * r.mean_binary_accuracy,
                100.0 * r.map
            );
        }
        out
    }
}

fn flatten(seqs: &[Matrix]) -> Result<Matrix> {
    let refs: Vec<&Matrix> = seqs.iter().collect();
    Matrix::hstack(&refs)
}

/// Per-example pooling of per-descriptor features laid out like
/// `flatten(seqs)`.
fn pool_examples(features: &Matrix, seqs: &[Matrix], kind: PoolingKind) -> Result<Matrix> {
    let mut out = Matrix::zeros(features.rows(), seqs.len());
    let mut start = 0;
    for (i, s) in seqs.iter().enumerate() {
        let idx: Vec<usize> = (start..start + s.cols()).collect();
        start += s.cols();
        out.col_mut(i)
            .copy_from_slice(&pool_all(&features.select_columns(&idx), kind)?);
    }
    Ok(out)
}

fn dense_codes<D: AsRef<Matrix>>(xs: &Matrix, d: &D, solver: &SolverConfig) -> Result<Matrix> {
    Ok(codes_to_matrix(&batch_encode(xs, d, solver)?))
}

/// Features of the training and test examples for every requested scheme.
fn scheme_features(
    cfg: &ClassifyConfig,
    train_set: &PairedDataset,
    test_set: &PairedDataset,
    seed: u64,
) -> Result<Vec<(Matrix, Matrix)>> {
    let kind = cfg.deep.pooling;
    let (tr_a, tr_b) = (flatten(&train_set.a)?, flatten(&train_set.b)?);
    let (te_a, te_b) = (flatten(&test_set.a)?, flatten(&test_set.b)?);
    let wants = |list: &[Scheme]| cfg.schemes.iter().any(|s| list.contains(s));
    let pooled = |f: Matrix, seqs: &[Matrix]| pool_examples(&f, seqs, kind);

    let mut uni: Option<[(Matrix, Matrix); 2]> = None;
    if wants(&[Scheme::UniA, Scheme::UniB, Scheme::UniUnion]) {
        let solver = SolverConfig::l1(cfg.lambda);
        let da = train(&tr_a, &cfg.unimodal_train(derive_seed(seed, &[1])))?;
        let db = train(&tr_b, &cfg.unimodal_train(derive_seed(seed, &[2])))?;
        uni = Some([
            (
                pooled(dense_codes(&tr_a, &da, &solver)?, &train_set.a)?,
                pooled(dense_codes(&te_a, &da, &solver)?, &test_set.a)?,
            ),
            (
                pooled(dense_codes(&tr_b, &db, &solver)?, &train_set.b)?,
                pooled(dense_codes(&te_b, &db, &solver)?, &test_set.b)?,
            ),
        ]);
    }

    let mut joint: Option<[(Matrix, Matrix); 3]> = None;
    if wants(&[Scheme::Joint, Scheme::CrossA, Scheme::CrossB, Scheme::MultiUnion]) {
        let t = train_joint(
            &[(MODALITY_A, &tr_a), (MODALITY_B, &tr_b)],
            &cfg.joint_train(derive_seed(seed, &[3])),
            Some(cfg.lambda),
        )?;
        let m = &t.model;
        let codes = |v: Vec<crate::sparse::SparseCode>| codes_to_matrix(&v);
        joint = Some([
            (
                pooled(codes(m.joint_encode_batch(&[&tr_a, &tr_b])?), &train_set.a)?,
                pooled(codes(m.joint_encode_batch(&[&te_a, &te_b])?), &test_set.a)?,
            ),
            (
                pooled(codes(m.cross_encode_batch(&tr_a, MODALITY_A)?), &train_set.a)?,
                pooled(codes(m.cross_encode_batch(&te_a, MODALITY_A)?), &test_set.a)?,
            ),
            (
                pooled(codes(m.cross_encode_batch(&tr_b, MODALITY_B)?), &train_set.b)?,
                pooled(codes(m.cross_encode_batch(&te_b, MODALITY_B)?), &test_set.b)?,
            ),
        ]);
    }

    let union = |x: &(Matrix, Matrix), y: &(Matrix, Matrix)| -> Result<(Matrix, Matrix)> {
        Ok((
            Matrix::vstack(&[&x.0, &y.0])?,
            Matrix::vstack(&[&x.1, &y.1])?,
        ))
    };
    let longest = train_set.a.iter().map(Matrix::cols).max().unwrap_or(1);

    cfg.schemes
        .iter()
        .map(|&s| match s {
            Scheme::UniA => Ok(uni.as_ref().expect("trained")[0].clone()),
            Scheme::UniB => Ok(uni.as_ref().expect("trained")[1].clone()),
            Scheme::UniUnion => {
                let u = uni.as_ref().expect("trained");
                union(&u[0], &u[1])
            }
            Scheme::Joint => Ok(joint.as_ref().expect("trained")[0].clone()),
            Scheme::CrossA => Ok(joint.as_ref().expect("trained")[1].clone()),
            Scheme::CrossB => Ok(joint.as_ref().expect("trained")[2].clone()),
            Scheme::MultiUnion => {
                let j = joint.as_ref().expect("trained");
                union(&j[1], &j[2])
            }
            Scheme::Deep3a | Scheme::Deep3b => {
                let stack = cfg.stack(s, longest, derive_seed(seed, &[10 + s as u64]));
                let t = train_stack(&[&train_set.a, &train_set.b], &stack)?;
                let test = t.model.forward_batch(&[&test_set.a, &test_set.b])?;
                Ok((t.features, test))
            }
        })
        .collect()
}

struct FoldScore {
    accuracy: f64,
    mean_binary: f64,
    map: f64,
}

fn evaluate(
    cfg: &ClassifyConfig,
    train: &Matrix,
    train_labels: &[usize],
    test: &Matrix,
    test_labels: &[usize],
    seed: u64,
) -> Result<FoldScore> {
    let c = if cfg.svm_c_grid.len() == 1 {
        cfg.svm_c_grid[0]
    } else {
        select_svm_c(train, train_labels, &cfg.svm_c_grid, cfg.svm_folds, cfg.svm_epochs, seed)?.0
    };
    let model = train_svm_ova(train, train_labels, c, cfg.svm_epochs, seed)?;
    Ok(FoldScore {
        accuracy: accuracy(&model, test, test_labels)?,
        mean_binary: mean_binary_accuracy(&model, test, test_labels)?,
        map: model_map(&model, test, test_labels)?,
    })
}

/// Fold-averaged scores of one scheme on one dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeScore {
    pub scheme: Scheme,
    pub feature_dim: usize,
    pub accuracy: f64,
    pub mean_binary_accuracy: f64,
    pub map: f64,
}

/// Evaluates every requested scheme on `data`: k-fold cross-validation,
/// or a single split when `train_fraction` is set. Generator settings in
/// `cfg` are ignored.
pub fn cross_validate(cfg: &ClassifyConfig, data: &PairedDataset, seed: u64) -> Result<Vec<SchemeScore>> {
    let n = data.len();
    if n < 4 || data.a.len() != n || data.b.len() != n {
        return Err(Error::Argument("dataset too small or unpaired".into()));
    }
    let splits: Vec<(Vec<usize>, Vec<usize>)> = match cfg.train_fraction {
        Some(f) => {
            let k = ((n as f64 * f).round() as usize).clamp(2, n - 2);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1]));
            let mut train = sample(&mut rng, n, k).into_vec();
            train.sort_unstable();
            let test = complement(n, &train);
            vec![(train, test)]
        }
        None => kfold(n, cfg.folds, derive_seed(seed, &[1]))?
            .into_iter()
            .map(|test| (complement(n, &test), test))
            .collect(),
    };
    let mut scores: Vec<SchemeScore> = cfg
        .schemes
        .iter()
        .map(|&scheme| SchemeScore {
            scheme,
            feature_dim: 0,
            accuracy: 0.0,
            mean_binary_accuracy: 0.0,
            map: 0.0,
        })
        .collect();
    let k = splits.len() as f64;
    for (fold, (train_idx, test_idx)) in splits.iter().enumerate() {
        let fold_seed = derive_seed(seed, &[2, fold as u64]);
        let train_set = data.subset(train_idx);
        let test_set = data.subset(test_idx);
        let feats = scheme_features(cfg, &train_set, &test_set, fold_seed)?;
        for (score, (tr, te)) in scores.iter_mut().zip(&feats) {
            let fold_score = evaluate(
                cfg,
                tr,
                &train_set.labels,
                te,
                &test_set.labels,
                derive_seed(fold_seed, &[100]),
            )?;
            score.feature_dim = tr.rows();
            score.accuracy += fold_score.accuracy / k;
            score.mean_binary_accuracy += fold_score.mean_binary / k;
            score.map += fold_score.map / k;
        }
    }
    Ok(scores)
}

/// Runs every requested scheme over all repetitions.
pub fn run_classify(cfg: &ClassifyConfig) -> Result<ClassifyReport> {
    cfg.validate()?;
    let ns = cfg.schemes.len();
    let mut acc = vec![Vec::with_capacity(cfg.repetitions); ns];
    let mut mba = vec![Vec::with_capacity(cfg.repetitions); ns];
    let mut map = vec![Vec::with_capacity(cfg.repetitions); ns];
    let mut dims = vec![0; ns];
    for rep in 0..cfg.repetitions as u64 {
        let rep_seed = derive_seed(cfg.seed, &[rep]);
        let data = generate(&cfg.generator, cfg.examples, derive_seed(rep_seed, &[0]))?;
        for (s, score) in cross_validate(cfg, &data, rep_seed)?.into_iter().enumerate() {
            dims[s] = score.feature_dim;
            acc[s].push(score.accuracy);
            mba[s].push(score.mean_binary_accuracy);
            map[s].push(score.map);
        }
    }
    let results = cfg
        .schemes
        .iter()
        .enumerate()
        .map(|(s, &scheme)| {
            let (mean, sem) = mean_and_sem(&acc[s]);
            SchemeResult {
                scheme,
                feature_dim: dims[s],
                accuracy: mean,
                accuracy_sem: sem,
                mean_binary_accuracy: mean_and_sem(&mba[s]).0,
                map: mean_and_sem(&map[s]).0,
                accuracy_per_rep: acc[s].clone(),
                map_per_rep: map[s].clone(),
            }
        })
        .collect();
    Ok(ClassifyReport {
        experiment: if cfg.generator.nonlinear {
            Experiment::DeepSynthClassify
        } else {
            Experiment::SynthClassify
        },
        config: cfg.clone(),
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ClassifyConfig {
        ClassifyConfig {
            examples: 120,
            folds: 3,
            num_atoms: 16,
            epochs: 5,
            svm_c_grid: vec![1.0],
            svm_epochs: 10,
            ..Default::default()
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(json, format!("\"{}\"", s.name()));
        }
        assert!("deep".parse::<Scheme>().is_err());
        assert_eq!(
            parse_schemes("joint, cross-a").unwrap(),
            vec![Scheme::Joint, Scheme::CrossA]
        );
        assert!(parse_schemes("joint,joint").is_err());
        assert!(parse_schemes(" , ").is_err());
    }

    #[test]
    fn generator_shapes_and_determinism() {
        let g = GeneratorConfig::default();
        let d = generate(&g, 50, 3).unwrap();
        assert_eq!(d.len(), 50);
        assert!(d.labels.iter().all(|&l| l < g.num_classes()));
        assert!(d.a.iter().all(|m| m.shape() == (g.dim_a, 1)));
        assert!(d.b.iter().all(|m| m.shape() == (g.dim_b, 1)));
        assert_eq!(d, generate(&g, 50, 3).unwrap());
        assert_ne!(d, generate(&g, 50, 4).unwrap());

        let nl = GeneratorConfig {
            nonlinear: true,
            ..Default::default()
        };
        let d = generate(&nl, 20, 3).unwrap();
        assert!(d.a.iter().all(|m| m.shape() == (nl.dim_a, nl.descriptors)));
        assert!(d.labels.iter().all(|&l| l < 2));
    }

    #[test]
    fn templates_balance_single_factors() {
        for class in TEMPLATES {
            let mut seen = [0; 4];
            class.iter().flatten().for_each(|&f| seen[f] += 1);
            assert_eq!(seen, [1; 4]);
        }
        assert_ne!(TEMPLATES[0], TEMPLATES[1]);
    }

    #[test]
    fn missing_modality_is_zero() {
        let g = GeneratorConfig {
            missing: 0.5,
            ..Default::default()
        };
        let d = generate(&g, 200, 1).unwrap();
        let zero = |m: &Matrix| m.data().iter().all(|&v| v == 0.0);
        let gone = (0..d.len()).filter(|&i| zero(&d.a[i]) || zero(&d.b[i])).count();
        assert!((60..=140).contains(&gone), "{gone}");
        assert!((0..d.len()).all(|i| !(zero(&d.a[i]) && zero(&d.b[i]))));
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = small();
        c.schemes = vec![Scheme::Joint, Scheme::Joint];
        assert!(c.validate().is_err());
        let mut c = small();
        c.train_fraction = Some(1.0);
        assert!(c.validate().is_err());
        let mut c = small();
        c.generator.class_factors = 5;
        assert!(c.validate().is_err());
        let mut c = small();
        c.generator.share = 1.5;
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<ClassifyConfig>(r#"{"bogus":1}"#).is_err());
        let c: ClassifyConfig = serde_json::from_str(r#"{"seed":9}"#).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.folds, 5);
    }

    #[test]
    fn coupled_lambda_by_default() {
        let c = small();
        let expect = (1.0 / 12.0 + 1.0 / 12.0) * c.lambda;
        assert!((c.resolved_lambda_joint() - expect).abs() < 1e-15);
        let c = ClassifyConfig {
            lambda_joint: Some(0.7),
            ..small()
        };
        assert_eq!(c.resolved_lambda_joint(), 0.7);
    }

    #[test]
    fn report_has_every_scheme_once_and_is_reproducible() {
        let cfg = ClassifyConfig {
            schemes: Scheme::ALL[..7].to_vec(),
            ..small()
        };
        let r = run_classify(&cfg).unwrap();
        assert_eq!(r.experiment, Experiment::SynthClassify);
        assert_eq!(r.results.len(), 7);
        for (res, s) in r.results.iter().zip(&cfg.schemes) {
            assert_eq!(res.scheme, *s);
            assert!((0.0..=1.0).contains(&res.accuracy));
            assert!((0.0..=1.0).contains(&res.map));
        }
        assert_eq!(r.result(Scheme::UniUnion).unwrap().feature_dim, 32);
        assert_eq!(r.result(Scheme::Joint).unwrap().feature_dim, 16);
        assert_eq!(r.result(Scheme::MultiUnion).unwrap().feature_dim, 32);
        // well above the 25% chance level
        assert!(r.result(Scheme::Joint).unwrap().accuracy > 0.5);
        let again = run_classify(&cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
        assert!(r.table().contains("multi-union"));
    }

    #[test]
    fn train_fraction_uses_one_split() {
        let cfg = ClassifyConfig {
            train_fraction: Some(0.25),
            schemes: vec![Scheme::UniA],
            ..small()
        };
        let d = generate(&cfg.generator, 80, 0).unwrap();
        let s = cross_validate(&cfg, &d, 0).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s[0].accuracy > 0.0);
    }

    #[test]
    fn deep_schemes_run_on_sequences() {
        let cfg = ClassifyConfig {
            examples: 60,
            folds: 2,
            epochs: 3,
            schemes: vec![Scheme::Joint, Scheme::Deep3a, Scheme::Deep3b],
            generator: GeneratorConfig {
                nonlinear: true,
                ..Default::default()
            },
            deep: DeepSchemeConfig {
                layer1_atoms: 8,
                layer2_atoms: 8,
                joint_atoms: 8,
                joint2_atoms: 4,
                ..Default::default()
            },
            ..small()
        };
        let r = run_classify(&cfg).unwrap();
        assert_eq!(r.experiment, Experiment::DeepSynthClassify);
        assert_eq!(r.result(Scheme::Deep3a).unwrap().feature_dim, 8);
        assert_eq!(r.result(Scheme::Deep3b).unwrap().feature_dim, 4);
    }
}
