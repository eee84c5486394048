//! Stochastic views for contrastive training.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ingest::Window;

/// Time-domain augmentation: additive Gaussian noise per value, then one
/// multiplicative scale factor for the whole window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    pub gaussian_noise_sigma: f64,
    pub scale_range: [f64; 2],
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        AugmentationSpec {
            gaussian_noise_sigma: 0.05,
            scale_range: [0.8, 1.2],
        }
    }
}

impl AugmentationSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.gaussian_noise_sigma < 0.0 {
            return Err(format!(
                "noise sigma must be non-negative, got {}",
                self.gaussian_noise_sigma
            ));
        }
        let [lo, hi] = self.scale_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(format!("scale range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"));
        }
        Ok(())
    }
}

/// Draws one augmented view. The scale factor is drawn first, then noise in
/// (time, axis) order, so a fixed seed reproduces the view exactly.
pub fn augment(window: &Window, spec: &AugmentationSpec, rng: &mut impl Rng) -> Window {
    let [lo, hi] = spec.scale_range;
    let factor = if hi > lo { rng.random_range(lo..hi) } else { lo };
    let mut out = window.clone();
    if spec.gaussian_noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.gaussian_noise_sigma).expect("sigma validated");
        for sample in &mut out.values {
            for v in sample.iter_mut() {
                *v = (*v + normal.sample(rng)) * factor;
            }
        }
    } else {
        for sample in &mut out.values {
            for v in sample.iter_mut() {
                *v *= factor;
            }
        }
    }
    out
}

/// Fraction of spectrum bins touched by the frequency-view perturbation and
/// its relative amplitude.
const FREQ_JITTER_PROB: f64 = 0.5;
const FREQ_JITTER: f64 = 0.1;

/// Frequency-domain augmentation: each magnitude bin is, with probability
/// 1/2, scaled by a factor drawn uniformly within ±10%.
pub fn augment_spectrum(channels: &[Vec<f64>], rng: &mut impl Rng) -> Vec<Vec<f64>> {
    channels
        .iter()
        .map(|row| {
            row.iter()
                .map(|&v| {
                    if rng.random_range(0.0..1.0) < FREQ_JITTER_PROB {
                        v * (1.0 + rng.random_range(-FREQ_JITTER..FREQ_JITTER))
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect()
}
