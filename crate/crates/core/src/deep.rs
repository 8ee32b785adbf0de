//! Deep stacks of sparse coding and pooling layers.
//!
//! Every example is a sequence of local descriptors (the columns of one
//! matrix per modality). A layer trains a dictionary on all descriptors of
//! all examples, encodes them, and pools consecutive codes within each
//! example into dense vectors that feed the next layer. After the
//! per-modality layers the pooled sequences are concatenated position by
//! position, without rescaling, and passed through one or more joint
//! layers. A final pooling over the whole sequence yields one feature
//! vector per example.
//!
//! Training is greedy and layer-wise; no labels are involved.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dictionary::{
    load_dictionary, save_dictionary, train, Dictionary, DictionaryMeta, TrainConfig,
};
use crate::error::{Error, Result};
use crate::sparse::{batch_encode, codes_to_matrix, SolverConfig, SparseCode};
use crate::tensor::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolingKind {
    /// Per coordinate, the entry of largest magnitude, sign kept (first on ties).
    Max,
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolingConfig {
    pub kind: PoolingKind,
    /// Window length `M`.
    pub factor: usize,
    pub stride: usize,
}

impl PoolingConfig {
    /// Non-overlapping windows of length `factor`.
    pub fn new(kind: PoolingKind, factor: usize) -> Self {
        PoolingConfig {
            kind,
            factor,
            stride: factor,
        }
    }

    pub fn max(factor: usize) -> Self {
        Self::new(PoolingKind::Max, factor)
    }

    pub fn average(factor: usize) -> Self {
        Self::new(PoolingKind::Average, factor)
    }

    pub fn validate(&self) -> Result<()> {
        if self.factor == 0 || self.stride == 0 {
            return Err(Error::Config(format!(
                "pooling factor and stride must be positive (got {} and {})",
                self.factor, self.stride
            )));
        }
        Ok(())
    }

    /// Number of windows over a sequence of `len` codes.
    ///
    /// Windows start every `stride` positions; the last one is the first
    /// that reaches the end, and may be short.
    pub fn output_len(&self, len: usize) -> usize {
        if len <= self.factor {
            1
        } else {
            (len - self.factor).div_ceil(self.stride) + 1
        }
    }
}

fn reduce(kind: PoolingKind, window: &[&[f64]], out: &mut [f64]) {
    match kind {
        PoolingKind::Max => {
            for (j, o) in out.iter_mut().enumerate() {
                let mut best = window[0][j];
                for w in &window[1..] {
                    if w[j].abs() > best.abs() {
                        best = w[j];
                    }
                }
                *o = best;
            }
        }
        PoolingKind::Average => {
            let inv = 1.0 / window.len() as f64;
            for (j, o) in out.iter_mut().enumerate() {
                *o = window.iter().map(|w| w[j]).sum::<f64>() * inv;
            }
        }
    }
}

/// Pools a sequence stored as the columns of `seq`.
pub fn pool(seq: &Matrix, cfg: &PoolingConfig) -> Result<Matrix> {
    cfg.validate()?;
    let len = seq.cols();
    if len == 0 {
        return Err(Error::Argument("cannot pool an empty sequence".into()));
    }
    let windows = cfg.output_len(len);
    let mut out = Matrix::zeros(seq.rows(), windows);
    for w in 0..windows {
        let start = w * cfg.stride;
        let end = (start + cfg.factor).min(len);
        let cols: Vec<&[f64]> = (start..end).map(|j| seq.col(j)).collect();
        reduce(cfg.kind, &cols, out.col_mut(w));
    }
    Ok(out)
}

/// [`pool`] over a list of codes, which must share a dictionary size.
pub fn pool_codes(codes: &[SparseCode], cfg: &PoolingConfig) -> Result<Vec<Vector>> {
    let Some(first) = codes.first() else {
        return Err(Error::Argument("cannot pool an empty sequence".into()));
    };
    if let Some(c) = codes.iter().find(|c| c.dict_size() != first.dict_size()) {
        return Err(Error::Shape(format!(
            "codes of size {} and {} in one sequence",
            first.dict_size(),
            c.dict_size()
        )));
    }
    let pooled = pool(&codes_to_matrix(codes), cfg)?;
    Ok(pooled.columns().map(Vector::from).collect())
}

/// Whole-sequence pooling to a single vector.
pub fn pool_all(seq: &Matrix, kind: PoolingKind) -> Result<Vector> {
    let cfg = PoolingConfig::new(kind, seq.cols().max(1));
    Ok(pool(seq, &cfg)?.col(0).into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub train: TrainConfig,
    pub pooling: PoolingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityLayers {
    pub name: String,
    pub layers: Vec<LayerConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackConfig {
    /// Per-modality layer lists, in concatenation order.
    pub modalities: Vec<ModalityLayers>,
    pub joint_layers: Vec<LayerConfig>,
    /// Reduction over each example's remaining sequence at the top.
    pub final_pooling: PoolingKind,
}

/// Which of the two deep layouts a stack has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    /// Deep unimodal layers followed by a single joint layer.
    UnimodalThenJoint,
    /// Deep unimodal layers followed by several joint layers.
    DeepJoint,
}

impl StackConfig {
    pub fn topology(&self) -> Topology {
        if self.joint_layers.len() == 1 {
            Topology::UnimodalThenJoint
        } else {
            Topology::DeepJoint
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.modalities.len() < 2 {
            return Err(Error::Config(format!(
                "a stack needs at least two modalities, got {}",
                self.modalities.len()
            )));
        }
        if self.joint_layers.is_empty() {
            return Err(Error::Config("a stack needs at least one joint layer".into()));
        }
        for (i, m) in self.modalities.iter().enumerate() {
            if self.modalities[..i].iter().any(|o| o.name == m.name) {
                return Err(Error::Config(format!("duplicate modality `{}`", m.name)));
            }
        }
        for l in self
            .modalities
            .iter()
            .flat_map(|m| &m.layers)
            .chain(&self.joint_layers)
        {
            l.train.validate()?;
            l.pooling.validate()?;
        }
        Ok(())
    }
}

/// A trained layer: its dictionary, coder and pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub dictionary: Dictionary,
    pub solver: SolverConfig,
    pub pooling: PoolingConfig,
}

impl Layer {
    /// Encodes and pools each example's sequence.
    fn apply(&self, seqs: &[Matrix]) -> Result<Vec<Matrix>> {
        let all = concat_columns(seqs)?;
        let codes = batch_encode(&all, &self.dictionary, &self.solver)?;
        let dense = codes_to_matrix(&codes);
        let mut out = Vec::with_capacity(seqs.len());
        let mut start = 0;
        for s in seqs {
            let idx: Vec<usize> = (start..start + s.cols()).collect();
            start += s.cols();
            out.push(pool(&dense.select_columns(&idx), &self.pooling)?);
        }
        Ok(out)
    }
}

fn concat_columns(seqs: &[Matrix]) -> Result<Matrix> {
    let refs: Vec<&Matrix> = seqs.iter().collect();
    Matrix::hstack(&refs)
}

fn train_layer(seqs: &[Matrix], cfg: &LayerConfig, what: &str) -> Result<(Layer, Vec<Matrix>)> {
    let longest = seqs.iter().map(Matrix::cols).max().unwrap_or(0);
    if cfg.pooling.factor > longest {
        return Err(Error::Config(format!(
            "{what}: pooling factor {} exceeds the longest per-example sequence ({longest})",
            cfg.pooling.factor
        )));
    }
    let dictionary = train(&concat_columns(seqs)?, &cfg.train)?;
    let layer = Layer {
        dictionary,
        solver: cfg.train.solver,
        pooling: cfg.pooling,
    };
    let next = layer.apply(seqs)?;
    Ok((layer, next))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalityStack {
    pub name: String,
    pub input_dim: usize,
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepModel {
    pub modalities: Vec<ModalityStack>,
    pub joint_layers: Vec<Layer>,
    pub final_pooling: PoolingKind,
}

/// Outcome of stack training.
#[derive(Debug, Clone)]
pub struct StackTraining {
    pub model: DeepModel,
    /// Top-level feature of every training example, one column each.
    pub features: Matrix,
}

impl DeepModel {
    pub fn topology(&self) -> Topology {
        if self.joint_layers.len() == 1 {
            Topology::UnimodalThenJoint
        } else {
            Topology::DeepJoint
        }
    }

    /// Size of the top representation.
    pub fn output_dim(&self) -> usize {
        self.joint_layers
            .last()
            .map_or(0, |l| l.dictionary.num_atoms())
    }

    /// Top features of a batch of examples, one column per example.
    ///
    /// `inputs[m][i]` is example `i`'s descriptor sequence for modality `m`.
    pub fn forward_batch(&self, inputs: &[&[Matrix]]) -> Result<Matrix> {
        let n = check_inputs(inputs, self.modalities.iter().map(|m| (&m.name[..], m.input_dim)))?;
        let mut hidden = Vec::with_capacity(self.modalities.len());
        for (stack, seqs) in self.modalities.iter().zip(inputs) {
            let mut cur = seqs.to_vec();
            for layer in &stack.layers {
                cur = layer.apply(&cur)?;
            }
            hidden.push(cur);
        }
        let mut cur = join_hidden(&hidden, n)?;
        for layer in &self.joint_layers {
            cur = layer.apply(&cur)?;
        }
        top_features(&cur, self.final_pooling, self.output_dim())
    }

    /// Top feature of one example.
    pub fn forward(&self, inputs: &[&Matrix]) -> Result<Vector> {
        let owned: Vec<Vec<Matrix>> = inputs.iter().map(|&m| vec![m.clone()]).collect();
        let refs: Vec<&[Matrix]> = owned.iter().map(Vec::as_slice).collect();
        Ok(self.forward_batch(&refs)?.col(0).into())
    }
}

fn check_inputs<'a>(
    inputs: &[&[Matrix]],
    expected: impl ExactSizeIterator<Item = (&'a str, usize)>,
) -> Result<usize> {
    if inputs.len() != expected.len() {
        return Err(Error::Shape(format!(
            "{} modalities given, {} expected",
            inputs.len(),
            expected.len()
        )));
    }
    let n = inputs[0].len();
    if n == 0 {
        return Err(Error::Argument("no examples".into()));
    }
    for (seqs, (name, dim)) in inputs.iter().zip(expected) {
        if seqs.len() != n {
            return Err(Error::Argument(format!(
                "unpaired examples: `{name}` has {}, expected {n}",
                seqs.len()
            )));
        }
        for (i, s) in seqs.iter().enumerate() {
            if s.cols() == 0 {
                return Err(Error::Argument(format!("`{name}` example {i} is empty")));
            }
            if dim != 0 && s.rows() != dim {
                return Err(Error::Shape(format!(
                    "`{name}` example {i} has dimension {}, expected {dim}",
                    s.rows()
                )));
            }
        }
    }
    Ok(n)
}

/// Position-wise concatenation of each modality's pooled sequences.
fn join_hidden(hidden: &[Vec<Matrix>], n: usize) -> Result<Vec<Matrix>> {
    (0..n)
        .map(|i| {
            let parts: Vec<&Matrix> = hidden.iter().map(|h| &h[i]).collect();
            let len = parts[0].cols();
            if parts.iter().any(|p| p.cols() != len) {
                return Err(Error::Shape(format!(
                    "example {i}: modalities pool to sequence lengths {:?}",
                    parts.iter().map(|p| p.cols()).collect::<Vec<_>>()
                )));
            }
            Matrix::vstack(&parts)
        })
        .collect()
}

fn top_features(seqs: &[Matrix], kind: PoolingKind, dim: usize) -> Result<Matrix> {
    let mut out = Matrix::zeros(dim, seqs.len());
    for (i, s) in seqs.iter().enumerate() {
        out.col_mut(i).copy_from_slice(&pool_all(s, kind)?);
    }
    Ok(out)
}

/// Greedy layer-wise training of a deep stack.
///
/// `inputs[m][i]` is example `i`'s descriptor sequence for modality
/// `cfg.modalities[m]`. Pooling never crosses example boundaries; an
/// example shorter than a pooling factor yields one short window, but a
/// factor longer than every example is a configuration error.
pub fn train_stack(inputs: &[&[Matrix]], cfg: &StackConfig) -> Result<StackTraining> {
    cfg.validate()?;
    let n = check_inputs(inputs, cfg.modalities.iter().map(|m| (&m.name[..], 0)))?;
    let mut modalities = Vec::with_capacity(cfg.modalities.len());
    let mut hidden = Vec::with_capacity(cfg.modalities.len());
    for (mcfg, seqs) in cfg.modalities.iter().zip(inputs) {
        let input_dim = seqs[0].rows();
        if let Some(i) = seqs.iter().position(|s| s.rows() != input_dim) {
            return Err(Error::Shape(format!(
                "`{}` example {i} has dimension {}, expected {input_dim}",
                mcfg.name,
                seqs[i].rows()
            )));
        }
        let mut cur = seqs.to_vec();
        let mut layers = Vec::with_capacity(mcfg.layers.len());
        for (l, lcfg) in mcfg.layers.iter().enumerate() {
            let (layer, next) = train_layer(&cur, lcfg, &format!("`{}` layer {}", mcfg.name, l + 1))?;
            layers.push(layer);
            cur = next;
        }
        modalities.push(ModalityStack {
            name: mcfg.name.clone(),
            input_dim,
            layers,
        });
        hidden.push(cur);
    }
    let mut cur = join_hidden(&hidden, n)?;
    let mut joint_layers = Vec::with_capacity(cfg.joint_layers.len());
    for (l, lcfg) in cfg.joint_layers.iter().enumerate() {
        let (layer, next) = train_layer(&cur, lcfg, &format!("joint layer {}", l + 1))?;
        joint_layers.push(layer);
        cur = next;
    }
    let model = DeepModel {
        modalities,
        joint_layers,
        final_pooling: cfg.final_pooling,
    };
    let features = top_features(&cur, cfg.final_pooling, model.output_dim())?;
    Ok(StackTraining { model, features })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LayerEntry {
    file: String,
    solver: SolverConfig,
    lambda: Option<f64>,
    pooling: PoolingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModalityEntry {
    name: String,
    input_dim: usize,
    layers: Vec<LayerEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StackManifest {
    topology: Topology,
    final_pooling: PoolingKind,
    modalities: Vec<ModalityEntry>,
    joint_layers: Vec<LayerEntry>,
}

pub const MANIFEST_FILE: &str = "stack.json";

fn save_layer(layer: &Layer, dir: &Path, stem: String) -> Result<LayerEntry> {
    let meta = DictionaryMeta::for_dictionary(&layer.dictionary, Some(layer.solver), None);
    save_dictionary(&layer.dictionary, &meta, &dir.join(&stem))?;
    Ok(LayerEntry {
        file: stem,
        solver: layer.solver,
        lambda: layer.solver.lambda(),
        pooling: layer.pooling,
    })
}

fn load_layer(entry: &LayerEntry, dir: &Path) -> Result<Layer> {
    if entry.file.contains(['/', '\\']) || entry.file.starts_with('.') {
        return Err(Error::Format {
            path: dir.join(MANIFEST_FILE),
            reason: format!("layer file `{}` is not a plain name", entry.file),
        });
    }
    let (dictionary, _) = load_dictionary(&dir.join(&entry.file))?;
    Ok(Layer {
        dictionary,
        solver: entry.solver,
        pooling: entry.pooling,
    })
}

/// Writes every layer dictionary plus `stack.json` into `dir`.
pub fn save_stack(model: &DeepModel, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut modalities = Vec::new();
    for m in &model.modalities {
        let layers = m
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| save_layer(l, dir, format!("{}.layer{}", m.name, i + 1)))
            .collect::<Result<Vec<_>>>()?;
        modalities.push(ModalityEntry {
            name: m.name.clone(),
            input_dim: m.input_dim,
            layers,
        });
    }
    let joint_layers = model
        .joint_layers
        .iter()
        .enumerate()
        .map(|(i, l)| save_layer(l, dir, format!("joint.layer{}", i + 1)))
        .collect::<Result<Vec<_>>>()?;
    let manifest = StackManifest {
        topology: model.topology(),
        final_pooling: model.final_pooling,
        modalities,
        joint_layers,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    std::fs::write(&path, text + "\n")
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_stack(dir: &Path) -> Result<DeepModel> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let manifest: StackManifest = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    let modalities = manifest
        .modalities
        .iter()
        .map(|m| {
            Ok(ModalityStack {
                name: m.name.clone(),
                input_dim: m.input_dim,
                layers: m
                    .layers
                    .iter()
                    .map(|l| load_layer(l, dir))
                    .collect::<Result<_>>()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let joint_layers = manifest
        .joint_layers
        .iter()
        .map(|l| load_layer(l, dir))
        .collect::<Result<Vec<_>>>()?;
    let model = DeepModel {
        modalities,
        joint_layers,
        final_pooling: manifest.final_pooling,
    };
    if model.joint_layers.is_empty() || model.topology() != manifest.topology {
        return Err(Error::Format {
            path,
            reason: "topology does not match the joint layers".into(),
        });
    }
    Ok(model)
}
