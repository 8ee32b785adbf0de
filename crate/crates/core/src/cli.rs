//! Command-line drivers behind the `msc` binary.
//!
//! Every command reads an optional JSON config, applies flag overrides on
//! top, and writes its outputs under `--out`. Reports are written as
//! `report.json` (byte-identical for a fixed seed) and `report.txt`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dictionary::{
    load_dictionary, save_dictionary, train_with_trace, DictionaryMeta, TrainConfig, TrainMethod,
};
use crate::error::{Error, Result};
use crate::experiment::classify::{parse_schemes, run_classify, ClassifyConfig};
use crate::experiment::denoise::{run_denoise, DenoiseConfig};
use crate::io::{load_examples, save_matrix};
use crate::multimodal::{load_joint, save_joint, train_joint, JointModel};
use crate::preprocess::Image;
use crate::sparse::{batch_encode, codes_to_matrix, SolverConfig};
use crate::tensor::Matrix;

/// Stem of the dictionary written by `train-dict`.
pub const DICTIONARY_STEM: &str = "dictionary";
pub const CODES_FILE: &str = "codes.msc";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
/// Modality name `denoise` accepts for an external image corpus.
pub const IMAGES: &str = "images";

#[derive(Debug, Parser)]
#[command(name = "msc", version, about = "Multimodal sparse coding experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a unimodal dictionary (one --modality) or a joint one (several).
    TrainDict(TrainDictArgs),
    /// Encode data against a trained dictionary.
    Encode(EncodeArgs),
    /// Cross-modal denoising experiment.
    Denoise(DenoiseArgs),
    /// Feature-scheme comparison on synthetic paired modalities.
    SynthClassify(ClassifyArgs),
}

#[derive(Debug, Args)]
pub struct TrainDictArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Input data as NAME=PATH (MSC1 with examples in columns, or CSV rows).
    #[arg(long = "modality", value_name = "NAME=PATH", required = true)]
    pub modalities: Vec<String>,
    #[arg(long)]
    pub k: Option<usize>,
    /// ℓ1 penalty (λ′ for joint dictionaries).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// ℓ0 budget; selects OMP coding and K-SVD by default.
    #[arg(long)]
    pub sparsity: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Dictionary stem, e.g. `out/dictionary`.
    #[arg(long)]
    pub dict: PathBuf,
    #[arg(long = "modality", value_name = "NAME=PATH", required = true)]
    pub modalities: Vec<String>,
    /// Encode one modality against its block of a joint dictionary.
    #[arg(long, value_name = "NAME")]
    pub cross_modal: Option<String>,
    /// Overrides the stored λ (λ′ for joint coding, λ″ for cross-modal).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub sparsity: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Image corpus as `images=PATH`: one square grayscale image per column.
    #[arg(long = "modality", value_name = "NAME=PATH")]
    pub modalities: Vec<String>,
    #[arg(long)]
    pub k: Option<usize>,
    /// λ′ of the joint dictionary.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Noise variances.
    #[arg(long, value_delimiter = ',')]
    pub sigma: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Unimodal and cross-modal λ.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated subset of uni-a, uni-b, uni-union, joint, cross-a,
    /// cross-b, multi-union, deep-3a, deep-3b.
    #[arg(long)]
    pub schemes: Option<String>,
    /// Use the nonlinear sequence variant.
    #[arg(long)]
    pub nonlinear: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Settings of `train-dict`, as read from `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainDictConfig {
    pub seed: u64,
    pub num_atoms: usize,
    pub lambda: Option<f64>,
    pub sparsity: Option<usize>,
    pub method: Option<TrainMethod>,
    pub epochs: usize,
    pub batch_size: usize,
    /// λ″ stored with a joint dictionary; derived from λ′ when absent.
    pub lambda_cross: Option<f64>,
}

impl Default for TrainDictConfig {
    fn default() -> Self {
        TrainDictConfig {
            seed: 0,
            num_atoms: 64,
            lambda: None,
            sparsity: None,
            method: None,
            epochs: 20,
            batch_size: 256,
            lambda_cross: None,
        }
    }
}

pub const DEFAULT_LAMBDA: f64 = 0.1;

impl TrainDictConfig {
    /// Fills in the regularizer and method so the echoed config has no
    /// implicit defaults left.
    pub fn resolve(mut self) -> Result<Self> {
        match (self.lambda, self.sparsity) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either lambda or sparsity, not both".into()))
            }
            (None, None) => self.lambda = Some(DEFAULT_LAMBDA),
            _ => {}
        }
        if self.method.is_none() {
            self.method = Some(if self.sparsity.is_some() {
                TrainMethod::Ksvd
            } else {
                TrainMethod::Online
            });
        }
        Ok(self)
    }

    pub fn solver(&self) -> SolverConfig {
        match self.sparsity {
            Some(s) => SolverConfig::l0(s),
            None => SolverConfig::l1(self.lambda.unwrap_or(DEFAULT_LAMBDA)),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let mut t = TrainConfig::online(self.num_atoms, DEFAULT_LAMBDA)
            .with_epochs(self.epochs)
            .with_batch_size(self.batch_size)
            .with_seed(self.seed);
        t.solver = self.solver();
        t.method = self.method.unwrap_or(TrainMethod::Online);
        t
    }
}

/// Parses `NAME=PATH`.
pub fn parse_modality(arg: &str) -> Result<(String, PathBuf)> {
    match arg.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => Err(Error::Config(format!("expected NAME=PATH, got `{arg}`"))),
    }
}

fn parse_modalities(args: &[String]) -> Result<Vec<(String, PathBuf)>> {
    let mut out: Vec<(String, PathBuf)> = Vec::with_capacity(args.len());
    for a in args {
        let (name, path) = parse_modality(a)?;
        if out.iter().any(|(n, _)| *n == name) {
            return Err(Error::Config(format!("modality `{name}` given twice")));
        }
        out.push((name, path));
    }
    Ok(out)
}

fn load_modalities(args: &[String]) -> Result<Vec<(String, Matrix)>> {
    parse_modalities(args)?
        .into_iter()
        .map(|(name, path)| Ok((name, load_examples(&path)?)))
        .collect()
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("parsing {}: {e}", path.display())))
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    write_text(path, &(text + "\n"))
}

fn write_report<T: Serialize>(out: &Path, report: &T, table: &str) -> Result<()> {
    create_out(out)?;
    write_json(&out.join(REPORT_JSON), report)?;
    write_text(&out.join(REPORT_TEXT), table)
}

pub fn train_dict(args: &TrainDictArgs) -> Result<()> {
    let mut cfg: TrainDictConfig = read_config(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(k) = args.k {
        cfg.num_atoms = k;
    }
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if args.lambda.is_some() || args.sparsity.is_some() {
        cfg.lambda = args.lambda;
        cfg.sparsity = args.sparsity;
    }
    let cfg = cfg.resolve()?;
    let train = cfg.train_config();
    train.validate()?;
    let data = load_modalities(&args.modalities)?;
    create_out(&args.out)?;
    let stem = args.out.join(DICTIONARY_STEM);
    let trace = if data.len() == 1 {
        let (dict, trace) = train_with_trace(&data[0].1, &train)?;
        let meta = DictionaryMeta::for_dictionary(&dict, Some(train.solver), Some(cfg.seed));
        save_dictionary(&dict, &meta, &stem)?;
        trace
    } else {
        let n = data[0].1.cols();
        if let Some((name, m)) = data.iter().find(|(_, m)| m.cols() != n) {
            return Err(Error::Shape(format!(
                "modality `{name}` has {} examples, expected {n}",
                m.cols()
            )));
        }
        let refs: Vec<(&str, &Matrix)> = data.iter().map(|(n, m)| (n.as_str(), m)).collect();
        let t = train_joint(&refs, &train, cfg.lambda_cross)?;
        save_joint(&t.model, &stem, Some(cfg.seed))?;
        t.loss_trace
    };
    write_json(&args.out.join("train-dict.json"), &cfg)?;
    for (epoch, loss) in trace.iter().enumerate() {
        println!("epoch {:>3}  loss {loss:.6e}", epoch + 1);
    }
    println!("wrote {}", crate::io::with_suffix(&stem, "msc").display());
    Ok(())
}

fn override_solver(base: Option<SolverConfig>, args: &EncodeArgs) -> Result<SolverConfig> {
    match (args.lambda, args.sparsity) {
        (Some(_), Some(_)) => Err(Error::Config("give either --lambda or --sparsity".into())),
        (Some(l), None) => Ok(SolverConfig::l1(l)),
        (None, Some(s)) => Ok(SolverConfig::l0(s)),
        (None, None) => {
            base.ok_or_else(|| Error::Config("dictionary metadata has no solver; pass --lambda or --sparsity".into()))
        }
    }
}

pub fn encode(args: &EncodeArgs) -> Result<()> {
    let (dict, meta) = load_dictionary(&args.dict)?;
    let data = load_modalities(&args.modalities)?;
    let codes = if meta.modality_blocks.len() < 2 {
        if args.cross_modal.is_some() {
            return Err(Error::Config(
                "--cross-modal needs a joint dictionary; this one is unimodal".into(),
            ));
        }
        if data.len() != 1 {
            return Err(Error::Config("a unimodal dictionary encodes exactly one modality".into()));
        }
        let solver = override_solver(meta.solver, args)?;
        batch_encode(&data[0].1, &dict, &solver)?
    } else {
        let (model, _) = load_joint(&args.dict)?;
        match &args.cross_modal {
            Some(name) => {
                let x = match data.as_slice() {
                    [(n, x)] if n == name => x,
                    _ => {
                        return Err(Error::Config(format!(
                            "--cross-modal {name} needs exactly --modality {name}=PATH"
                        )))
                    }
                };
                let model = match (args.lambda, args.sparsity) {
                    (_, Some(_)) => {
                        return Err(Error::Config("cross-modal coding is always ℓ1; use --lambda".into()))
                    }
                    (Some(l), None) => model.with_lambda_cross(l)?,
                    (None, None) => model,
                };
                model.cross_encode_batch(x, name)?
            }
            None => {
                let mut parts = Vec::with_capacity(model.specs().len());
                for spec in model.specs() {
                    let x = data
                        .iter()
                        .find(|(n, _)| *n == spec.name)
                        .map(|(_, x)| x)
                        .ok_or_else(|| Error::Config(format!("missing --modality {}=PATH", spec.name)))?;
                    parts.push(x);
                }
                if data.len() != parts.len() {
                    return Err(Error::Config("unexpected extra modality for this dictionary".into()));
                }
                let model = if args.lambda.is_some() || args.sparsity.is_some() {
                    let solver = override_solver(None, args)?;
                    JointModel::new(
                        model.dictionary().clone(),
                        model.specs().to_vec(),
                        solver,
                        model.lambda_cross(),
                    )?
                } else {
                    model
                };
                model.joint_encode_batch(&parts)?
            }
        }
    };
    create_out(&args.out)?;
    let path = args.out.join(CODES_FILE);
    save_matrix(&codes_to_matrix(&codes), &path)?;
    println!("wrote {} ({} codes of size {})", path.display(), codes.len(), dict.num_atoms());
    Ok(())
}

/// Turns a matrix of flattened square grayscale images (one per column,
/// row-major pixels) into images.
pub fn images_from_columns(m: &Matrix) -> Result<Vec<Image>> {
    let side = (m.rows() as f64).sqrt().round() as usize;
    if side == 0 || side * side != m.rows() {
        return Err(Error::Shape(format!(
            "image columns need a square pixel count, got {}",
            m.rows()
        )));
    }
    m.columns()
        .map(|c| Image::new(side, side, 1, c.to_vec()))
        .collect()
}

pub fn denoise(args: &DenoiseArgs) -> Result<()> {
    let mut cfg: DenoiseConfig = read_config(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(k) = args.k {
        cfg.num_atoms = k;
    }
    if let Some(l) = args.lambda {
        cfg.lambda_joint = l;
    }
    if let Some(s) = &args.sigma {
        cfg.sigmas = s.clone();
    }
    cfg.validate()?;
    let corpus = match parse_modalities(&args.modalities)?.as_slice() {
        [] => None,
        [(name, path)] if name == IMAGES => Some(images_from_columns(&load_examples(path)?)?),
        _ => return Err(Error::Config(format!("denoise accepts only --modality {IMAGES}=PATH"))),
    };
    let start = Instant::now();
    let report = run_denoise(&cfg, corpus.as_deref())?;
    let table = report.table();
    write_report(&args.out, &report, &table)?;
    print!("{table}");
    println!("wall time {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}

pub fn synth_classify(args: &ClassifyArgs) -> Result<()> {
    let mut cfg: ClassifyConfig = read_config(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(k) = args.k {
        cfg.num_atoms = k;
    }
    if let Some(l) = args.lambda {
        cfg.lambda = l;
    }
    if let Some(list) = &args.schemes {
        cfg.schemes = parse_schemes(list)?;
    }
    if args.nonlinear {
        cfg.generator.nonlinear = true;
    }
    cfg.validate()?;
    let start = Instant::now();
    let report = run_classify(&cfg)?;
    let table = report.table();
    write_report(&args.out, &report, &table)?;
    print!("{table}");
    println!("wall time {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::TrainDict(a) => train_dict(a),
        Command::Encode(a) => encode(a),
        Command::Denoise(a) => denoise(a),
        Command::SynthClassify(a) => synth_classify(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn modality_flags() {
        assert_eq!(
            parse_modality("a=x/y.msc").unwrap(),
            ("a".to_string(), PathBuf::from("x/y.msc"))
        );
        assert_eq!(parse_modality("a=b=c").unwrap().1, PathBuf::from("b=c"));
        for bad in ["a", "=p", "a="] {
            assert_eq!(parse_modality(bad).unwrap_err().exit_code(), 2);
        }
        let dup = vec!["a=1".to_string(), "a=2".to_string()];
        assert!(parse_modalities(&dup).is_err());
    }

    #[test]
    fn train_config_resolution() {
        let c = TrainDictConfig::default().resolve().unwrap();
        assert_eq!(c.lambda, Some(DEFAULT_LAMBDA));
        assert_eq!(c.method, Some(TrainMethod::Online));
        let c = TrainDictConfig {
            sparsity: Some(3),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        assert_eq!(c.method, Some(TrainMethod::Ksvd));
        assert_eq!(c.train_config().solver, SolverConfig::l0(3));
        let both = TrainDictConfig {
            sparsity: Some(3),
            lambda: Some(0.1),
            ..Default::default()
        };
        assert_eq!(both.resolve().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn square_image_columns() {
        let m = Matrix::from_columns(&[vec![0.5; 16], vec![0.25; 16]]).unwrap();
        let imgs = images_from_columns(&m).unwrap();
        assert_eq!(imgs.len(), 2);
        assert_eq!((imgs[0].width, imgs[0].height), (4, 4));
        let bad = Matrix::zeros(15, 1);
        assert_eq!(images_from_columns(&bad).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn exit_codes_look_through_columns() {
        let e = Error::Column {
            index: 3,
            source: Box::new(Error::Numerical {
                iteration: 1,
                reason: "nan".into(),
            }),
        };
        assert_eq!(e.exit_code(), 4);
        assert_eq!(Error::Config("x".into()).exit_code(), 2);
        assert_eq!(Error::Shape("x".into()).exit_code(), 3);
    }
}
