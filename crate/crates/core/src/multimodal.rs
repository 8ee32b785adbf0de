//! Joint and cross-modal sparse coding.
//!
//! A joint dictionary is trained on concatenated inputs whose modality
//! blocks are scaled by `1/√Nₘ`:
//!
//! ```text
//! x_ab = [ xa/√Na ; xb/√Nb ]
//! ```
//!
//! Splitting its rows per modality and multiplying each block back by
//! `√Nₘ` gives sub-dictionaries that live in the native modality spaces.
//! Cross-modal coding encodes a single modality against its sub-dictionary;
//! the shared atom indices then let any other modality be reconstructed.

use std::path::Path;

use crate::dictionary::{
    load_dictionary, save_dictionary, train_with_trace, Dictionary, DictionaryMeta,
    ModalityBlock, TrainConfig,
};
use crate::error::{Error, Result};
use crate::sparse::{batch_encode, codes_to_matrix, encode, SolverConfig, SparseCode};
use crate::tensor::{Matrix, Vector};

/// One input modality of dimension `Nₘ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalitySpec {
    pub name: String,
    pub dim: usize,
    /// `1/√dim`, the scale applied before concatenation.
    pub weight: f64,
}

impl ModalitySpec {
    pub fn new(name: impl Into<String>, dim: usize) -> Result<Self> {
        let name = name.into();
        if dim == 0 {
            return Err(Error::Argument(format!("modality `{name}` has dimension 0")));
        }
        if name.is_empty() {
            return Err(Error::Argument("modality name is empty".into()));
        }
        Ok(ModalitySpec {
            name,
            dim,
            weight: 1.0 / (dim as f64).sqrt(),
        })
    }
}

fn check_specs(specs: &[ModalitySpec]) -> Result<()> {
    if specs.len() < 2 {
        return Err(Error::Argument(format!(
            "joint coding needs at least two modalities, got {}",
            specs.len()
        )));
    }
    for (i, s) in specs.iter().enumerate() {
        if specs[..i].iter().any(|t| t.name == s.name) {
            return Err(Error::Argument(format!("duplicate modality name `{}`", s.name)));
        }
    }
    Ok(())
}

/// Scaled concatenation of one example from each modality, in the order of `specs`.
pub fn concat_input(specs: &[ModalitySpec], parts: &[&[f64]]) -> Result<Vector> {
    check_specs(specs)?;
    if parts.len() != specs.len() {
        return Err(Error::Shape(format!(
            "{} parts for {} modalities",
            parts.len(),
            specs.len()
        )));
    }
    let mut out = Vec::with_capacity(specs.iter().map(|s| s.dim).sum());
    for (s, p) in specs.iter().zip(parts) {
        if p.len() != s.dim {
            return Err(Error::Shape(format!(
                "modality `{}` expects length {}, got {}",
                s.name,
                s.dim,
                p.len()
            )));
        }
        out.extend(p.iter().map(|v| v * s.weight));
    }
    Ok(out.into())
}

/// Column-wise [`concat_input`] over paired datasets.
pub fn concat_inputs(specs: &[ModalitySpec], xs: &[&Matrix]) -> Result<Matrix> {
    check_specs(specs)?;
    if xs.len() != specs.len() {
        return Err(Error::Shape(format!(
            "{} datasets for {} modalities",
            xs.len(),
            specs.len()
        )));
    }
    let n = xs[0].cols();
    for (s, x) in specs.iter().zip(xs) {
        if x.cols() != n {
            return Err(Error::Argument(format!(
                "unpaired datasets: `{}` has {} examples, expected {n}",
                s.name,
                x.cols()
            )));
        }
        if x.rows() != s.dim {
            return Err(Error::Shape(format!(
                "modality `{}` expects dimension {}, data has {}",
                s.name,
                s.dim,
                x.rows()
            )));
        }
    }
    let mut scaled: Vec<Matrix> = xs.iter().map(|&x| x.clone()).collect();
    for (m, s) in scaled.iter_mut().zip(specs) {
        m.scale(s.weight);
    }
    let refs: Vec<&Matrix> = scaled.iter().collect();
    Matrix::vstack(&refs)
}

/// `Σₘ 1/Nₘ`, the factor tying λ′ to λ″.
pub fn coupling_factor(specs: &[ModalitySpec]) -> f64 {
    specs.iter().map(|s| 1.0 / s.dim as f64).sum()
}

/// A jointly trained dictionary with its per-modality decomposition.
#[derive(Debug, Clone)]
pub struct JointModel {
    dictionary: Dictionary,
    specs: Vec<ModalitySpec>,
    joint_solver: SolverConfig,
    lambda_cross: f64,
    sub: Vec<Matrix>,
}

impl JointModel {
    /// Wraps a joint dictionary. Modality blocks are attached from `specs`.
    ///
    /// `joint_solver` is the coder used on concatenated inputs (its λ is λ′
    /// for an ℓ1 solver); `lambda_cross` is the λ″ used for cross-modal
    /// coding.
    pub fn new(
        dictionary: Dictionary,
        specs: Vec<ModalitySpec>,
        joint_solver: SolverConfig,
        lambda_cross: f64,
    ) -> Result<Self> {
        check_specs(&specs)?;
        joint_solver.validate()?;
        check_lambda(lambda_cross)?;
        let mut blocks = Vec::with_capacity(specs.len());
        let mut start = 0;
        for s in &specs {
            blocks.push(ModalityBlock {
                name: s.name.clone(),
                row_start: start,
                row_end: start + s.dim,
                weight: s.weight,
            });
            start += s.dim;
        }
        let dictionary = Dictionary::new(dictionary.into_atoms())?.with_blocks(blocks)?;
        let sub = specs
            .iter()
            .zip(dictionary.blocks().unwrap_or_default())
            .map(|(s, b)| {
                let mut m = dictionary.atoms().row_block(b.row_start, b.row_end);
                m.scale((s.dim as f64).sqrt());
                m
            })
            .collect();
        Ok(JointModel {
            dictionary,
            specs,
            joint_solver,
            lambda_cross,
            sub,
        })
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    pub fn specs(&self) -> &[ModalitySpec] {
        &self.specs
    }

    pub fn joint_solver(&self) -> &SolverConfig {
        &self.joint_solver
    }

    /// λ′, when the joint coder is ℓ1.
    pub fn lambda_joint(&self) -> Option<f64> {
        self.joint_solver.lambda()
    }

    pub fn lambda_cross(&self) -> f64 {
        self.lambda_cross
    }

    /// Overrides λ″.
    pub fn with_lambda_cross(mut self, lambda_cross: f64) -> Result<Self> {
        check_lambda(lambda_cross)?;
        self.lambda_cross = lambda_cross;
        Ok(self)
    }

    /// Whether λ′ = (Σₘ 1/Nₘ)·λ″ holds to 1e-12 (relative).
    pub fn is_coupled(&self) -> bool {
        match self.lambda_joint() {
            Some(lj) => {
                let expect = coupling_factor(&self.specs) * self.lambda_cross;
                (lj - expect).abs() <= 1e-12 * lj.abs().max(expect.abs()).max(1.0)
            }
            None => false,
        }
    }

    pub fn num_atoms(&self) -> usize {
        self.dictionary.num_atoms()
    }

    pub fn modality_index(&self, name: &str) -> Result<usize> {
        self.specs
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::UnknownModality(name.to_string()))
    }

    /// The unscaled sub-dictionary `D_ab-m` (`Nₘ × K`).
    pub fn sub_dictionary(&self, name: &str) -> Result<&Matrix> {
        Ok(&self.sub[self.modality_index(name)?])
    }

    fn cross_solver(&self) -> SolverConfig {
        SolverConfig {
            max_iter: self.joint_solver.max_iter,
            tol: self.joint_solver.tol,
            ..SolverConfig::l1(self.lambda_cross)
        }
    }

    /// Codes a full multimodal example against the joint dictionary.
    pub fn joint_encode(&self, parts: &[&[f64]]) -> Result<SparseCode> {
        let x = concat_input(&self.specs, parts)?;
        encode(&x, &self.dictionary, &self.joint_solver)
    }

    /// [`JointModel::joint_encode`] over paired datasets.
    pub fn joint_encode_batch(&self, xs: &[&Matrix]) -> Result<Vec<SparseCode>> {
        let x = concat_inputs(&self.specs, xs)?;
        batch_encode(&x, &self.dictionary, &self.joint_solver)
    }

    /// ℓ1 code of a single modality against its sub-dictionary, with λ″.
    pub fn cross_encode(&self, x: &[f64], modality: &str) -> Result<SparseCode> {
        let d = self.sub_dictionary(modality)?;
        encode(x, d, &self.cross_solver())
    }

    pub fn cross_encode_batch(&self, xs: &Matrix, modality: &str) -> Result<Vec<SparseCode>> {
        let d = self.sub_dictionary(modality)?;
        batch_encode(xs, d, &self.cross_solver())
    }

    /// Estimate of modality `to` from an example of modality `from`.
    pub fn cross_reconstruct(&self, x: &[f64], from: &str, to: &str) -> Result<Vector> {
        let target = self.sub_dictionary(to)?;
        let code = self.cross_encode(x, from)?;
        Ok(code.reconstruct(target))
    }

    pub fn cross_reconstruct_batch(&self, xs: &Matrix, from: &str, to: &str) -> Result<Matrix> {
        let target = self.sub_dictionary(to)?;
        let codes = self.cross_encode_batch(xs, from)?;
        target.matmul(&codes_to_matrix(&codes))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Config(format!("lambda must be finite and ≥ 0, got {lambda}")));
    }
    Ok(())
}

/// Outcome of joint training.
#[derive(Debug, Clone)]
pub struct JointTraining {
    pub model: JointModel,
    pub loss_trace: Vec<f64>,
}

/// Trains one dictionary on the scaled concatenation of paired datasets.
///
/// With an ℓ1 training solver λ″ defaults to λ′/(Σₘ 1/Nₘ); with an ℓ0
/// solver there is no λ′ to derive it from, so `lambda_cross` is required.
pub fn train_joint(
    modalities: &[(&str, &Matrix)],
    cfg: &TrainConfig,
    lambda_cross: Option<f64>,
) -> Result<JointTraining> {
    let specs = modalities
        .iter()
        .map(|(name, x)| ModalitySpec::new(*name, x.rows()))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<&Matrix> = modalities.iter().map(|(_, x)| *x).collect();
    let joint = concat_inputs(&specs, &xs)?;
    let lambda_cross = match (lambda_cross, cfg.solver.lambda()) {
        (Some(l), _) => l,
        (None, Some(lj)) => lj / coupling_factor(&specs),
        (None, None) => {
            return Err(Error::Config(
                "lambda_cross is required when the joint dictionary is trained with an L0 solver"
                    .into(),
            ))
        }
    };
    let (dictionary, loss_trace) = train_with_trace(&joint, cfg)?;
    let model = JointModel::new(dictionary, specs, cfg.solver, lambda_cross)?;
    Ok(JointTraining { model, loss_trace })
}

/// Dense concatenation of codes, in argument order.
pub fn feature_union(codes: &[&SparseCode]) -> Vector {
    let mut out = Vec::with_capacity(codes.iter().map(|c| c.dict_size()).sum());
    for c in codes {
        out.extend_from_slice(&c.to_dense());
    }
    out.into()
}

pub fn save_joint(model: &JointModel, stem: &Path, seed: Option<u64>) -> Result<()> {
    let mut meta = DictionaryMeta::for_dictionary(&model.dictionary, Some(model.joint_solver), seed);
    meta.lambda_joint = model.lambda_joint();
    meta.lambda_cross = Some(model.lambda_cross);
    save_dictionary(&model.dictionary, &meta, stem)
}

/// Loads a joint model saved by [`save_joint`].
pub fn load_joint(stem: &Path) -> Result<(JointModel, DictionaryMeta)> {
    let (dict, meta) = load_dictionary(stem)?;
    let json = crate::dictionary::dictionary_paths(stem).1;
    let bad = |reason: String| Error::Format {
        path: json.clone(),
        reason,
    };
    if meta.modality_blocks.len() < 2 {
        return Err(bad("not a joint dictionary (fewer than two modality blocks)".into()));
    }
    let lambda_cross = meta
        .lambda_cross
        .ok_or_else(|| bad("missing lambda_cross".into()))?;
    let solver = meta.solver.ok_or_else(|| bad("missing solver".into()))?;
    let specs = meta
        .modality_blocks
        .iter()
        .map(|b| ModalitySpec::new(b.name.clone(), b.len()))
        .collect::<Result<Vec<_>>>()?;
    for (s, b) in specs.iter().zip(&meta.modality_blocks) {
        if (s.weight - b.weight).abs() > 1e-15 {
            return Err(bad(format!(
                "block `{}` weight {} is not 1/sqrt({})",
                b.name, b.weight, s.dim
            )));
        }
    }
    if meta.lambda_joint != solver.lambda() {
        return Err(bad("lambda_joint disagrees with the solver".into()));
    }
    let model = JointModel::new(dict, specs, solver, lambda_cross)?;
    Ok((model, meta))
}
