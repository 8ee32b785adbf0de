//! Desk-scale experiment drivers: joint-dictionary denoising and
//! classification on synthetic paired modalities.
//!
//! Every driver is deterministic given its seed. Reports serialize to JSON
//! without timing information; wall time only appears in the text table.

pub mod classify;
pub mod denoise;
pub mod texture;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Denoise,
    SynthClassify,
    DeepSynthClassify,
}

/// Independent stream seed for `(base, tags...)`.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    tags.iter().fold(mix(base), |s, &t| {
        mix(s.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ mix(t.wrapping_add(1)))
    })
}

/// Sample mean and standard error of the mean.
pub fn mean_and_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
