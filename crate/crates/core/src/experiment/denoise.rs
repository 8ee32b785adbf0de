//! Denoising with a joint clean/noisy dictionary.
//!
//! Clean images and their noisy copies are treated as two modalities. A
//! joint dictionary is trained on paired 4×4 patches; at test time each
//! noisy patch is cross-modally encoded against the noisy sub-dictionary
//! and reconstructed with the clean one. Patches tile the image without
//! overlap, so patch-level errors are image-level errors.
//!
//! The noise level `σ` is used as a variance (standard deviation `√σ`),
//! which puts the noisy-input PSNR at `10·log10(1/σ)` for unit peak.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::texture::textures;
use super::{derive_seed, Experiment};
use crate::dictionary::TrainConfig;
use crate::error::{Error, Result};
use crate::eval::{psnr, psnr_from_mse, Psnr};
use crate::multimodal::train_joint;
use crate::preprocess::{add_gaussian_noise, extract_patches, mean_sq_diff, Image, PatchConfig};
use crate::tensor::Matrix;

pub const CLEAN: &str = "clean";
pub const NOISY: &str = "noisy";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiseConfig {
    pub seed: u64,
    /// Noise variances.
    pub sigmas: Vec<f64>,
    pub train_images: usize,
    pub test_images: usize,
    /// Side of the square synthetic images.
    pub image_size: usize,
    pub patch_size: usize,
    pub num_atoms: usize,
    /// λ′ for joint training.
    pub lambda_joint: f64,
    /// λ″ candidates as multiples of the coupled value; the best on
    /// held-out training patches is used.
    pub lambda_cross_scales: Vec<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    /// Training patches drawn from the training images per repetition.
    pub train_patches: usize,
    /// Further training-image patches held out to choose λ″.
    pub validation_patches: usize,
    pub repetitions: usize,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            seed: 0,
            sigmas: vec![0.001, 0.005, 0.01, 0.1],
            train_images: 2000,
            test_images: 500,
            image_size: 32,
            patch_size: 4,
            num_atoms: 300,
            lambda_joint: 0.3,
            lambda_cross_scales: vec![1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0, 0.125, 0.25, 0.5, 1.0],
            epochs: 2,
            batch_size: 256,
            train_patches: 10_000,
            validation_patches: 500,
            repetitions: 5,
        }
    }
}

impl DenoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.sigmas.is_empty() {
            return bad("no noise levels".into());
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return bad(format!("noise level {s} is not a finite variance"));
        }
        if self.train_images == 0 || self.test_images == 0 || self.repetitions == 0 {
            return bad("image counts and repetitions must be positive".into());
        }
        if self.patch_size == 0 || !self.image_size.is_multiple_of(self.patch_size) {
            return bad(format!(
                "{}x{} images are not tiled by {}x{} patches",
                self.image_size, self.image_size, self.patch_size, self.patch_size
            ));
        }
        if self.train_patches == 0 || self.validation_patches == 0 {
            return bad("patch counts must be positive".into());
        }
        if self.lambda_cross_scales.is_empty()
            || self.lambda_cross_scales.iter().any(|s| !(s.is_finite() && *s > 0.0))
        {
            return bad("lambda_cross_scales must be nonempty and positive".into());
        }
        self.train_config(0).validate()
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig::online(self.num_atoms, self.lambda_joint)
            .with_epochs(self.epochs)
            .with_batch_size(self.batch_size)
            .with_seed(seed)
    }

    fn patch(&self) -> PatchConfig {
        PatchConfig::square(self.patch_size, 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenoiseRow {
    pub sigma: f64,
    /// `10·log10(1/σ)`; absent for `σ = 0`.
    pub reference_db: Option<f64>,
    pub noisy: Psnr,
    pub denoised: Psnr,
    /// Mean over repetitions of denoised minus noisy PSNR.
    pub gain_db: Option<f64>,
    pub noisy_per_rep: Vec<Psnr>,
    pub denoised_per_rep: Vec<Psnr>,
    pub lambda_cross_per_rep: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenoiseReport {
    pub experiment: Experiment,
    pub corpus: String,
    pub config: DenoiseConfig,
    pub rows: Vec<DenoiseRow>,
}

fn stack_patches(images: &[Image], cfg: &PatchConfig) -> Result<Matrix> {
    let mats = images
        .iter()
        .map(|img| extract_patches(img, cfg))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Matrix> = mats.iter().collect();
    Matrix::hstack(&refs)
}

/// Mean of the finite PSNRs; `Exact` only if every repetition was exact.
fn mean_psnr(values: &[Psnr]) -> Psnr {
    let db: Vec<f64> = values.iter().filter_map(|p| p.db()).collect();
    if db.is_empty() {
        Psnr::Exact
    } else {
        Psnr::Db(db.iter().sum::<f64>() / db.len() as f64)
    }
}

/// One repetition's clean training, validation and test patches.
struct Split {
    train: Matrix,
    validation: Matrix,
    test: Matrix,
}

fn split_for_rep(cfg: &DenoiseConfig, corpus: Option<&[Image]>, rep: u64) -> Result<Split> {
    let seed = derive_seed(cfg.seed, &[rep]);
    let total = cfg.train_images + cfg.test_images;
    let images = match corpus {
        None => textures(total, cfg.image_size, cfg.image_size, seed)?,
        Some(all) => {
            if all.len() < total {
                return Err(Error::Argument(format!(
                    "corpus has {} images, {total} needed",
                    all.len()
                )));
            }
            let mut idx: Vec<usize> = (0..all.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            idx[..total].iter().map(|&i| all[i].clone()).collect()
        }
    };
    let patch = cfg.patch();
    let train_all = stack_patches(&images[..cfg.train_images], &patch)?;
    let test = stack_patches(&images[cfg.train_images..], &patch)?;
    let wanted = cfg.train_patches + cfg.validation_patches;
    if wanted > train_all.cols() {
        return Err(Error::Config(format!(
            "{wanted} training patches requested, the training images hold {}",
            train_all.cols()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1]));
    let picked = sample(&mut rng, train_all.cols(), wanted).into_vec();
    Ok(Split {
        train: train_all.select_columns(&picked[..cfg.train_patches]),
        validation: train_all.select_columns(&picked[cfg.train_patches..]),
        test,
    })
}

/// Runs the protocol on synthetic textures, or on `corpus` when given
/// (grayscale images in `[0, 1]`, at least `train_images + test_images`).
pub fn run_denoise(cfg: &DenoiseConfig, corpus: Option<&[Image]>) -> Result<DenoiseReport> {
    cfg.validate()?;
    if let Some(c) = corpus {
        if let Some(i) = c.iter().position(|img| img.channels != 1) {
            return Err(Error::Argument(format!("corpus image {i} is not grayscale")));
        }
    }
    let mut per_sigma: Vec<(Vec<Psnr>, Vec<Psnr>, Vec<f64>)> =
        vec![(Vec::new(), Vec::new(), Vec::new()); cfg.sigmas.len()];
    for rep in 0..cfg.repetitions as u64 {
        let split = split_for_rep(cfg, corpus, rep)?;
        for (s, &sigma) in cfg.sigmas.iter().enumerate() {
            let seed = derive_seed(cfg.seed, &[rep, s as u64]);
            let noisy_train = add_gaussian_noise(&split.train, sigma, derive_seed(seed, &[1]))?;
            let noisy_val = add_gaussian_noise(&split.validation, sigma, derive_seed(seed, &[2]))?;
            let noisy_test = add_gaussian_noise(&split.test, sigma, derive_seed(seed, &[3]))?;

            let trained = train_joint(
                &[(CLEAN, &split.train), (NOISY, &noisy_train)],
                &cfg.train_config(derive_seed(seed, &[4])),
                None,
            )?;
            let coupled = trained.model.lambda_cross();
            let mut best = (f64::INFINITY, coupled);
            for &scale in &cfg.lambda_cross_scales {
                let m = trained.model.clone().with_lambda_cross(coupled * scale)?;
                let est = m.cross_reconstruct_batch(&noisy_val, NOISY, CLEAN)?;
                let mse = mean_sq_diff(&split.validation, &est);
                if mse < best.0 {
                    best = (mse, coupled * scale);
                }
            }
            let model = trained.model.with_lambda_cross(best.1)?;
            let est = model.cross_reconstruct_batch(&noisy_test, NOISY, CLEAN)?;

            let entry = &mut per_sigma[s];
            entry.0.push(psnr(&split.test, &noisy_test, 1.0)?);
            entry.1.push(psnr(&split.test, &est, 1.0)?);
            entry.2.push(best.1);
        }
    }
    let rows = cfg
        .sigmas
        .iter()
        .zip(per_sigma)
        .map(|(&sigma, (noisy, denoised, lambdas))| {
            let gains: Vec<f64> = noisy
                .iter()
                .zip(&denoised)
                .filter_map(|(n, d)| Some(d.db()? - n.db()?))
                .collect();
            Ok(DenoiseRow {
                sigma,
                reference_db: if sigma > 0.0 {
                    psnr_from_mse(sigma, 1.0)?.db()
                } else {
                    None
                },
                noisy: mean_psnr(&noisy),
                denoised: mean_psnr(&denoised),
                gain_db: (!gains.is_empty()).then(|| gains.iter().sum::<f64>() / gains.len() as f64),
                noisy_per_rep: noisy,
                denoised_per_rep: denoised,
                lambda_cross_per_rep: lambdas,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DenoiseReport {
        experiment: Experiment::Denoise,
        corpus: if corpus.is_some() { "external" } else { "synthetic-texture" }.into(),
        config: cfg.clone(),
        rows,
    })
}

impl DenoiseReport {
    /// Human-readable table.
    pub fn table(&self) -> String {
        let mut out = format!(
            "denoising ({} corpus, {} repetitions)\n{:>8}  {:>9}  {:>9}  {:>9}  {:>7}\n",
            self.corpus, self.config.repetitions, "sigma", "reference", "noisy", "denoised", "gain"
        );
        for r in &self.rows {
            let reference = r.reference_db.map_or("-".into(), |v| format!("{v:.2}"));
            let gain = r.gain_db.map_or("-".into(), |v| format!("{v:+.2}"));
            out += &format!(
                "{:>8}  {:>9}  {:>9}  {:>9}  {:>7}\n",
                r.sigma,
                reference,
                r.noisy.to_string(),
                r.denoised.to_string(),
                gain
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> DenoiseConfig {
        DenoiseConfig {
            sigmas: vec![0.0, 0.01],
            train_images: 40,
            test_images: 10,
            image_size: 16,
            num_atoms: 40,
            epochs: 3,
            train_patches: 500,
            validation_patches: 100,
            repetitions: 2,
            lambda_cross_scales: vec![0.5, 1.0, 4.0],
            ..DenoiseConfig::default()
        }
    }

    #[test]
    fn zero_noise_input_is_exact() {
        let r = run_denoise(&tiny(), None).unwrap();
        assert_eq!(r.rows[0].noisy, Psnr::Exact);
        assert_eq!(r.rows[0].reference_db, None);
        assert!(r.rows[0].denoised.db().is_some());
        assert!(r.rows[0].gain_db.is_none());
        assert_eq!(r.rows[1].noisy_per_rep.len(), 2);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"noisy\":\"exact\""));
    }

    #[test]
    fn reproducible() {
        let a = run_denoise(&tiny(), None).unwrap();
        let b = run_denoise(&tiny(), None).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn rejects_bad_configs() {
        let c = DenoiseConfig {
            image_size: 30,
            ..tiny()
        };
        assert!(matches!(run_denoise(&c, None), Err(Error::Config(_))));
        let c = DenoiseConfig {
            train_patches: 100_000,
            ..tiny()
        };
        assert!(matches!(run_denoise(&c, None), Err(Error::Config(_))));
        let c = DenoiseConfig {
            sigmas: vec![-1.0],
            ..tiny()
        };
        assert!(matches!(run_denoise(&c, None), Err(Error::Config(_))));
        let small: Vec<Image> = textures(5, 16, 16, 0).unwrap();
        assert!(matches!(
            run_denoise(&tiny(), Some(&small)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn config_json_fills_defaults() {
        let c: DenoiseConfig = serde_json::from_str(r#"{"seed": 9, "sigmas": [0.01]}"#).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.num_atoms, 300);
        assert!(serde_json::from_str::<DenoiseConfig>(r#"{"sigma": 1}"#).is_err());
    }
}
