//! Patch extraction, PCA whitening and noise injection.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{load_matrix, save_matrix, with_suffix};
use crate::linalg::symmetric_eigen;
use crate::tensor::{Matrix, Vector};

/// Default regularizer added to eigenvalues before inverting them.
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Pixels stored row-major with channels interleaved:
/// `data[(y * width + x) * channels + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::Argument(format!(
                "degenerate {width}x{height}x{channels} image"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::Shape(format!(
                "{width}x{height}x{channels} image needs {} values, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Image {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    #[inline]
    fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    pub fn pixel(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.index(x, y, c)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchConfig {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub stride: usize,
}

impl PatchConfig {
    /// Non-overlapping square patches.
    pub fn square(size: usize, channels: usize) -> Self {
        PatchConfig {
            width: size,
            height: size,
            channels,
            stride: size,
        }
    }

    pub fn patch_len(&self) -> usize {
        self.width * self.height * self.channels
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.channels == 0 || self.stride == 0 {
            return Err(Error::Argument(format!("invalid patch config {self:?}")));
        }
        Ok(())
    }

    fn grid(&self, img: &Image) -> Result<(usize, usize)> {
        self.validate()?;
        if img.channels != self.channels {
            return Err(Error::Shape(format!(
                "{}-channel image, {}-channel patches",
                img.channels, self.channels
            )));
        }
        if self.width > img.width || self.height > img.height {
            return Err(Error::Argument(format!(
                "{}x{} patch larger than {}x{} image",
                self.width, self.height, img.width, img.height
            )));
        }
        let across = (img.width - self.width) / self.stride + 1;
        let down = (img.height - self.height) / self.stride + 1;
        Ok((across, down))
    }
}

/// One column per patch, patches in raster order. Within a patch values are
/// row-major with the channel index fastest. Patches that would run past the
/// image edge are dropped.
pub fn extract_patches(img: &Image, cfg: &PatchConfig) -> Result<Matrix> {
    let (across, down) = cfg.grid(img)?;
    let mut out = Matrix::zeros(cfg.patch_len(), across * down);
    for py in 0..down {
        for px in 0..across {
            let col = out.col_mut(py * across + px);
            let mut k = 0;
            for dy in 0..cfg.height {
                let y = py * cfg.stride + dy;
                let start = img.index(px * cfg.stride, y, 0);
                let len = cfg.width * cfg.channels;
                col[k..k + len].copy_from_slice(&img.data[start..start + len]);
                k += len;
            }
        }
    }
    Ok(out)
}

/// Inverse of non-overlapping [`extract_patches`] for an image the patches
/// tile exactly.
pub fn reassemble_patches(
    patches: &Matrix,
    width: usize,
    height: usize,
    cfg: &PatchConfig,
) -> Result<Image> {
    cfg.validate()?;
    if cfg.stride != cfg.width || cfg.stride != cfg.height {
        return Err(Error::Argument(
            "reassembly needs square non-overlapping patches".into(),
        ));
    }
    if !width.is_multiple_of(cfg.width) || !height.is_multiple_of(cfg.height) {
        return Err(Error::Argument(format!(
            "{width}x{height} image is not tiled by {}x{} patches",
            cfg.width, cfg.height
        )));
    }
    let across = width / cfg.width;
    let down = height / cfg.height;
    if patches.shape() != (cfg.patch_len(), across * down) {
        return Err(Error::Shape(format!(
            "expected {}x{} patch matrix, got {}x{}",
            cfg.patch_len(),
            across * down,
            patches.rows(),
            patches.cols()
        )));
    }
    let mut img = Image::zeros(width, height, cfg.channels);
    for py in 0..down {
        for px in 0..across {
            let col = patches.col(py * across + px);
            let len = cfg.width * cfg.channels;
            for dy in 0..cfg.height {
                let start = img.index(px * cfg.width, py * cfg.height + dy, 0);
                img.data[start..start + len].copy_from_slice(&col[dy * len..(dy + 1) * len]);
            }
        }
    }
    Ok(img)
}

/// Consecutive windows of `patch_len` values taken every `stride`, one per
/// column; a trailing partial window is dropped.
pub fn extract_vector_patches(v: &[f64], patch_len: usize, stride: usize) -> Result<Matrix> {
    if patch_len == 0 || stride == 0 {
        return Err(Error::Argument("patch length and stride must be positive".into()));
    }
    if patch_len > v.len() {
        return Err(Error::Argument(format!(
            "patch length {patch_len} exceeds vector length {}",
            v.len()
        )));
    }
    let count = (v.len() - patch_len) / stride + 1;
    let cols: Vec<&[f64]> = (0..count)
        .map(|i| &v[i * stride..i * stride + patch_len])
        .collect();
    Matrix::from_columns(&cols)
}

/// Mean removal followed by projection onto the leading principal axes,
/// each rescaled to unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningTransform {
    pub mean: Vector,
    /// `d × N`; row `i` is the `i`-th eigenvector scaled by `(λᵢ + ε)^-½`.
    pub projection: Matrix,
    pub eigenvalues: Vector,
    pub epsilon: f64,
}

impl WhiteningTransform {
    pub fn input_dim(&self) -> usize {
        self.projection.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.projection.rows()
    }
}

/// Sample covariance (normalized by `n − 1`) of the columns of `xs`.
pub fn covariance(xs: &Matrix) -> Result<(Vector, Matrix)> {
    let (dim, n) = xs.shape();
    if n < 2 {
        return Err(Error::Argument(format!("covariance needs 2 or more examples, got {n}")));
    }
    let mut mean = vec![0.0; dim];
    for col in xs.columns() {
        for (m, v) in mean.iter_mut().zip(col) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut centered = xs.clone();
    for j in 0..n {
        for (v, m) in centered.col_mut(j).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let mut cov = centered.transpose().gram();
    cov.scale(1.0 / (n - 1) as f64);
    Ok((Vector::from(mean), cov))
}

pub fn fit_whitening(xs: &Matrix, keep_d: usize, epsilon: f64) -> Result<WhiteningTransform> {
    let dim = xs.rows();
    if keep_d == 0 || keep_d > dim {
        return Err(Error::Argument(format!(
            "cannot keep {keep_d} of {dim} dimensions"
        )));
    }
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::Argument(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let (mean, cov) = covariance(xs)?;
    let (values, vectors) = symmetric_eigen(&cov)?;
    let scale = values.first().copied().unwrap_or(0.0).max(0.0);
    let mut projection = Matrix::zeros(keep_d, dim);
    let mut kept = Vec::with_capacity(keep_d);
    for i in 0..keep_d {
        let lam = values[i].max(0.0);
        let denom = lam + epsilon;
        if !(denom > 1e-12 * scale) || denom <= 0.0 {
            return Err(Error::Numerical {
                iteration: i,
                reason: format!("component {i} has variance {lam} and epsilon is {epsilon}"),
            });
        }
        let u = vectors.col(i);
        let pivot = u
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(_, &v)| v)
            .unwrap_or(1.0);
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        let s = sign / denom.sqrt();
        for (j, &uj) in u.iter().enumerate() {
            projection.set(i, j, s * uj);
        }
        kept.push(lam);
    }
    Ok(WhiteningTransform {
        mean,
        projection,
        eigenvalues: Vector::from(kept),
        epsilon,
    })
}

pub fn apply_whitening(t: &WhiteningTransform, xs: &Matrix) -> Result<Matrix> {
    if xs.rows() != t.input_dim() {
        return Err(Error::Shape(format!(
            "whitening expects {} rows, got {}",
            t.input_dim(),
            xs.rows()
        )));
    }
    let mut out = Matrix::zeros(t.output_dim(), xs.cols());
    let mut centered = vec![0.0; xs.rows()];
    for j in 0..xs.cols() {
        for ((c, v), m) in centered.iter_mut().zip(xs.col(j)).zip(t.mean.iter()) {
            *c = v - m;
        }
        let col = out.col_mut(j);
        for (i, o) in col.iter_mut().enumerate() {
            *o = (0..t.input_dim())
                .map(|k| t.projection.get(i, k) * centered[k])
                .sum();
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct WhiteningMeta {
    epsilon: f64,
    keep_d: usize,
    eigenvalues: Vec<f64>,
}

/// Writes `<stem>.mean.msc`, `<stem>.proj.msc` and `<stem>.json`.
pub fn save_whitening(t: &WhiteningTransform, stem: &Path) -> Result<()> {
    let mean = Matrix::from_col_major(t.mean.len(), 1, t.mean.to_vec())?;
    save_matrix(&mean, with_suffix(stem, "mean.msc"))?;
    save_matrix(&t.projection, with_suffix(stem, "proj.msc"))?;
    let json = with_suffix(stem, "json");
    let meta = WhiteningMeta {
        epsilon: t.epsilon,
        keep_d: t.output_dim(),
        eigenvalues: t.eigenvalues.to_vec(),
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Json {
        path: json.clone(),
        source: e,
    })?;
    std::fs::write(&json, text + "\n")
        .map_err(|e| Error::io(format!("writing {}", json.display()), e))
}

pub fn load_whitening(stem: &Path) -> Result<WhiteningTransform> {
    let mean = load_matrix(with_suffix(stem, "mean.msc"))?;
    let projection = load_matrix(with_suffix(stem, "proj.msc"))?;
    let json = with_suffix(stem, "json");
    let text = std::fs::read_to_string(&json)
        .map_err(|e| Error::io(format!("reading {}", json.display()), e))?;
    let meta: WhiteningMeta = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: json.clone(),
        source: e,
    })?;
    if mean.cols() != 1
        || mean.rows() != projection.cols()
        || meta.keep_d != projection.rows()
        || meta.eigenvalues.len() != meta.keep_d
    {
        return Err(Error::Format {
            path: json,
            reason: "whitening files disagree on dimensions".into(),
        });
    }
    Ok(WhiteningTransform {
        mean: Vector::from(mean.into_data()),
        projection,
        eigenvalues: Vector::from(meta.eigenvalues),
        epsilon: meta.epsilon,
    })
}

/// Adds i.i.d. Gaussian noise of variance `sigma` (standard deviation
/// `√sigma`). Values are not clipped.
pub fn add_gaussian_noise(xs: &Matrix, sigma: f64, seed: u64) -> Result<Matrix> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Argument(format!("noise level must be >= 0, got {sigma}")));
    }
    let std = sigma.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = xs.clone();
    if std == 0.0 {
        return Ok(out);
    }
    for j in 0..out.cols() {
        for v in out.col_mut(j) {
            *v += std * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(out)
}

/// Mean of squared differences between corresponding entries.
pub(crate) fn mean_sq_diff(a: &Matrix, b: &Matrix) -> f64 {
    let n = a.data().len() as f64;
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n
}

/// Frobenius distance between the whitened sample covariance and identity,
/// relative to `‖I‖_F`.
pub fn whitening_error(t: &WhiteningTransform, xs: &Matrix) -> Result<f64> {
    let w = apply_whitening(t, xs)?;
    let (_, cov) = covariance(&w)?;
    let d = cov.rows();
    let mut err = 0.0;
    for i in 0..d {
        for j in 0..d {
            let target = if i == j { 1.0 } else { 0.0 };
            err += (cov.get(i, j) - target).powi(2);
        }
    }
    Ok((err / d as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::dot;
    use crate::testutil::gaussian_matrix;

    fn ramp(width: usize, height: usize, channels: usize) -> Image {
        let data = (0..width * height * channels).map(|v| v as f64).collect();
        Image::new(width, height, channels, data).unwrap()
    }

    #[test]
    fn color_patch_is_48_long() {
        let img = ramp(4, 4, 3);
        let p = extract_patches(&img, &PatchConfig::square(4, 3)).unwrap();
        assert_eq!(p.shape(), (48, 1));
        assert_eq!(p.col(0), img.data.as_slice());
    }

    #[test]
    fn gray_patches_in_raster_order() {
        let img = ramp(8, 8, 1);
        let p = extract_patches(&img, &PatchConfig::square(4, 1)).unwrap();
        assert_eq!(p.shape(), (16, 4));
        // Second patch starts at x=4 on the first row.
        assert_eq!(p.get(0, 1), 4.0);
        assert_eq!(p.get(4, 1), 12.0);
        // Third patch starts at row 4.
        assert_eq!(p.get(0, 2), 32.0);
    }

    #[test]
    fn trailing_pixels_dropped() {
        let img = ramp(10, 9, 1);
        let p = extract_patches(&img, &PatchConfig::square(4, 1)).unwrap();
        assert_eq!(p.cols(), 4);
        let big = PatchConfig::square(11, 1);
        assert!(matches!(extract_patches(&img, &big), Err(Error::Argument(_))));
    }

    #[test]
    fn overlapping_stride() {
        let img = ramp(6, 4, 1);
        let cfg = PatchConfig {
            width: 4,
            height: 4,
            channels: 1,
            stride: 1,
        };
        assert_eq!(extract_patches(&img, &cfg).unwrap().cols(), 3);
    }

    #[test]
    fn reassembly_round_trip() {
        let img = ramp(8, 12, 3);
        let cfg = PatchConfig::square(4, 3);
        let p = extract_patches(&img, &cfg).unwrap();
        assert_eq!(reassemble_patches(&p, 8, 12, &cfg).unwrap(), img);
    }

    #[test]
    fn vector_patches() {
        let v: Vec<f64> = (0..84).map(f64::from).collect();
        let p = extract_vector_patches(&v, 42, 42).unwrap();
        assert_eq!(p.shape(), (42, 2));
        assert_eq!(p.get(0, 1), 42.0);
        assert!(extract_vector_patches(&v, 85, 1).is_err());
    }

    #[test]
    fn whitening_full_rank_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut xs = gaussian_matrix(6, 300, &mut rng);
        // Correlate the coordinates.
        let mix = gaussian_matrix(6, 6, &mut rng);
        xs = mix.matmul(&xs).unwrap();
        let t = fit_whitening(&xs, 6, 0.0).unwrap();
        assert!(whitening_error(&t, &xs).unwrap() < 1e-8);
        for w in t.eigenvalues.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn whitening_reduces_and_fixes_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs = gaussian_matrix(48, 600, &mut rng);
        let t = fit_whitening(&xs, 12, DEFAULT_EPSILON).unwrap();
        assert_eq!(t.projection.shape(), (12, 48));
        for i in 0..12 {
            let row: Vec<f64> = (0..48).map(|j| t.projection.get(i, j)).collect();
            let big = row.iter().fold(0.0f64, |m, v| if v.abs() > m.abs() { *v } else { m });
            assert!(big > 0.0);
        }
        let w = apply_whitening(&t, &xs).unwrap();
        assert_eq!(w.shape(), (12, 600));
    }

    #[test]
    fn whitening_maps_mean_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs = gaussian_matrix(4, 50, &mut rng);
        let t = fit_whitening(&xs, 3, DEFAULT_EPSILON).unwrap();
        let m = Matrix::from_col_major(4, 1, t.mean.to_vec()).unwrap();
        let w = apply_whitening(&t, &m).unwrap();
        assert!(w.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn whitening_trace_matches_kept_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs = gaussian_matrix(10, 50 * 5, &mut rng);
        let t = fit_whitening(&xs, 5, DEFAULT_EPSILON).unwrap();
        let (_, cov) = covariance(&apply_whitening(&t, &xs).unwrap()).unwrap();
        let trace: f64 = (0..5).map(|i| cov.get(i, i)).sum();
        assert!((trace - 5.0).abs() < 0.05);
    }

    #[test]
    fn zero_variance_needs_epsilon() {
        let xs = Matrix::from_col_major(2, 3, vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            fit_whitening(&xs, 1, 0.0),
            Err(Error::Numerical { .. })
        ));
        assert!(fit_whitening(&xs, 1, DEFAULT_EPSILON).is_ok());
        assert!(fit_whitening(&xs, 3, 0.0).is_err());
    }

    #[test]
    fn whitening_save_load() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs = gaussian_matrix(5, 40, &mut rng);
        let t = fit_whitening(&xs, 3, DEFAULT_EPSILON).unwrap();
        let stem = dir.path().join("white");
        save_whitening(&t, &stem).unwrap();
        assert_eq!(load_whitening(&stem).unwrap(), t);
    }

    #[test]
    fn noise_zero_is_identity_and_seeded() {
        let xs = Matrix::from_col_major(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(add_gaussian_noise(&xs, 0.0, 1).unwrap(), xs);
        let a = add_gaussian_noise(&xs, 0.01, 7).unwrap();
        assert_eq!(a, add_gaussian_noise(&xs, 0.01, 7).unwrap());
        assert_ne!(a, add_gaussian_noise(&xs, 0.01, 8).unwrap());
        assert!(add_gaussian_noise(&xs, -1.0, 1).is_err());
    }

    #[test]
    fn noise_mean_and_variance() {
        let sigma = 0.01;
        let xs = Matrix::zeros(1000, 1000);
        let noisy = add_gaussian_noise(&xs, sigma, 3).unwrap();
        let n = noisy.data().len() as f64;
        let mean = noisy.data().iter().sum::<f64>() / n;
        let var = dot(noisy.data(), noisy.data()) / n;
        assert!(mean.abs() < 4.0 * sigma.sqrt() / 1e3);
        assert!((var - sigma).abs() < 0.01 * sigma);
        assert!((mean_sq_diff(&noisy, &xs) - var).abs() < 1e-15);
    }
}
