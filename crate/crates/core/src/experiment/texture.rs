//! Seeded synthetic grayscale textures.
//!
//! Each image is a mid-gray level plus a few oriented sinusoidal gratings
//! and a faint linear ramp. Amplitudes are bounded so every pixel stays in
//! `[0.05, 0.95]` and no clipping is needed.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::preprocess::Image;

/// Total excursion budget around 0.5.
const AMPLITUDE_BUDGET: f64 = 0.45;

/// One `width × height` texture.
pub fn texture<R: Rng>(width: usize, height: usize, rng: &mut R) -> Image {
    let gratings = rng.random_range(2..=4);
    let ramp_share: f64 = rng.random_range(0.0..0.15);
    let mut weights: Vec<f64> = (0..gratings).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let grating_budget = AMPLITUDE_BUDGET * (1.0 - ramp_share);
    weights
        .iter_mut()
        .for_each(|w| *w *= grating_budget / total);
    let params: Vec<(f64, f64, f64, f64)> = weights
        .iter()
        .map(|&amp| {
            let period: f64 = rng.random_range(5.0..16.0);
            let theta: f64 = rng.random_range(0.0..PI);
            let phase: f64 = rng.random_range(0.0..2.0 * PI);
            (amp, 2.0 * PI / period, theta, phase)
        })
        .collect();
    let ramp_angle: f64 = rng.random_range(0.0..2.0 * PI);
    let ramp = AMPLITUDE_BUDGET * ramp_share;
    let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
    let half = cx.max(cy).max(1.0) * std::f64::consts::SQRT_2;

    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64, y as f64);
            let mut v = 0.5;
            for &(amp, omega, theta, phase) in &params {
                v += amp * (omega * (fx * theta.cos() + fy * theta.sin()) + phase).sin();
            }
            let along = ((fx - cx) * ramp_angle.cos() + (fy - cy) * ramp_angle.sin()) / half;
            v += ramp * along;
            data.push(v);
        }
    }
    Image {
        width,
        height,
        channels: 1,
        data,
    }
}

/// `count` textures from one seed.
pub fn textures(count: usize, width: usize, height: usize, seed: u64) -> Result<Vec<Image>> {
    if width == 0 || height == 0 {
        return Err(Error::Argument(format!("invalid texture size {width}x{height}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| texture(width, height, &mut rng)).collect())
}
