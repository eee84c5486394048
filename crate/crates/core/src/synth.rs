//! Synthetic triaxial accelerometer signals for end-to-end fixtures.
//!
//! Each class is a sinusoid: per-axis DC offset plus a shared-frequency
//! sine with a random phase per recording and Gaussian noise per sample.
//! Class difficulty is tunable: classes separated only by frequency force a
//! pipeline to learn temporal structure, while distinct DC offsets make
//! classes separable by almost any embedding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ingest::RawRecording;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("config needs at least one class")]
    NoClasses,
    #[error("config needs at least one subject")]
    NoSubjects,
    #[error("duplicate class name {0:?}")]
    DuplicateClass(String),
    #[error("{field} must be positive and finite, got {value}")]
    BadValue { field: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    pub base_freq_hz: f64,
    pub amplitude: f64,
    pub noise_sigma: f64,
    /// Constant acceleration per axis; a gravity-like component and the main
    /// knob for making classes trivially or barely separable.
    pub dc_offset: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub classes: Vec<ClassSpec>,
    pub subjects: Vec<String>,
    pub seconds_per_recording: f64,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl SynthConfig {
    fn validate(&self) -> Result<(), SynthError> {
        if self.classes.is_empty() {
            return Err(SynthError::NoClasses);
        }
        if self.subjects.is_empty() {
            return Err(SynthError::NoSubjects);
        }
        let mut seen = std::collections::HashSet::new();
        for class in &self.classes {
            if !seen.insert(class.name.as_str()) {
                return Err(SynthError::DuplicateClass(class.name.clone()));
            }
            for (field, value) in [
                ("base_freq_hz", class.base_freq_hz),
                ("amplitude", class.amplitude),
            ] {
                if !(value.is_finite() && value > 0.0) {
                    return Err(SynthError::BadValue { field, value });
                }
            }
            if !(class.noise_sigma.is_finite() && class.noise_sigma >= 0.0) {
                return Err(SynthError::BadValue {
                    field: "noise_sigma",
                    value: class.noise_sigma,
                });
            }
            if class.dc_offset.iter().any(|v| !v.is_finite()) {
                return Err(SynthError::BadValue {
                    field: "dc_offset",
                    value: f64::NAN,
                });
            }
        }
        for (field, value) in [
            ("seconds_per_recording", self.seconds_per_recording),
            ("sample_rate_hz", self.sample_rate_hz),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(SynthError::BadValue { field, value });
            }
        }
        Ok(())
    }
}

pub const SYNTH_DATASET_ID: &str = "synthetic";
pub const SYNTH_BODY_POSITION: &str = "the user's body";

/// One recording per (subject, class), in subject-major order. Fully
/// determined by the config (including its seed).
pub fn generate(config: &SynthConfig) -> Result<Vec<RawRecording>, SynthError> {
    config.validate()?;
    let n_samples = (config.seconds_per_recording * config.sample_rate_hz).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut recordings = Vec::with_capacity(config.subjects.len() * config.classes.len());
    for subject in &config.subjects {
        for class in &config.classes {
            // One phase triple per recording; windows cut at different
            // offsets see shifted copies of the same waveform.
            let phases = [
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::TAU),
            ];
            let noise = Normal::new(0.0, class.noise_sigma.max(f64::MIN_POSITIVE))
                .expect("sigma validated");
            let omega = std::f64::consts::TAU * class.base_freq_hz;
            let samples = (0..n_samples)
                .map(|i| {
                    let t = i as f64 / config.sample_rate_hz;
                    let mut v = [0.0; 3];
                    for (axis, value) in v.iter_mut().enumerate() {
                        let clean =
                            class.dc_offset[axis] + class.amplitude * (omega * t + phases[axis]).sin();
                        let eps = if class.noise_sigma > 0.0 {
                            noise.sample(&mut rng)
                        } else {
                            0.0
                        };
                        *value = clean + eps;
                    }
                    v
                })
                .collect();
            recordings.push(RawRecording {
                dataset_id: SYNTH_DATASET_ID.into(),
                subject_id: subject.clone(),
                activity_label: class.name.clone(),
                device_position: SYNTH_BODY_POSITION.into(),
                sampling_rate_hz: config.sample_rate_hz,
                samples,
            });
        }
    }
    Ok(recordings)
}

/// Writes recordings in the generic CSV schema
/// (`subject,activity,timestamp_s,ax,ay,az`) so the standard ingest path can
/// consume synthetic data like any other dataset.
pub fn write_generic_csv(path: &std::path::Path, recordings: &[RawRecording]) -> std::io::Result<()> {
    use std::io::Write;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "subject,activity,timestamp_s,ax,ay,az")?;
    for recording in recordings {
        for (i, s) in recording.samples.iter().enumerate() {
            let t = i as f64 / recording.sampling_rate_hz;
            writeln!(
                out,
                "{},{},{t:.6},{:.6},{:.6},{:.6}",
                recording.subject_id, recording.activity_label, s[0], s[1], s[2]
            )?;
        }
    }
    out.flush()
}

fn named_subjects(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("s{i:02}")).collect()
}

/// Two classes sharing DC offset and amplitude, distinguished only by
/// dominant frequency under strong noise. A static feature of the raw
/// window says almost nothing about the class; temporal structure does.
pub fn two_class_frequency_config(seed: u64) -> SynthConfig {
    let class = |name: &str, freq: f64| ClassSpec {
        name: name.into(),
        base_freq_hz: freq,
        amplitude: 1.0,
        noise_sigma: 1.0,
        dc_offset: [0.0, 0.0, 9.8],
    };
    SynthConfig {
        classes: vec![class("slow swing", 2.0), class("fast swing", 8.0)],
        subjects: named_subjects(8),
        seconds_per_recording: 40.0,
        sample_rate_hz: 50.0,
        seed,
    }
}

/// Six classes where c1/c2/c3 are mutually far apart but c4 nearly
/// coincides with c3 and c6 with c5, so confusion concentrates inside the
/// (c3,c4) and (c5,c6) pairs.
pub fn six_class_overlapping_config(seed: u64) -> SynthConfig {
    let class = |name: &str, freq: f64, dc: [f64; 3]| ClassSpec {
        name: name.into(),
        base_freq_hz: freq,
        amplitude: 1.0,
        noise_sigma: 0.3,
        dc_offset: dc,
    };
    SynthConfig {
        classes: vec![
            class("c1", 2.0, [6.0, 0.0, 9.8]),
            class("c2", 4.0, [0.0, 6.0, 9.8]),
            class("c3", 8.0, [-6.0, 0.0, 9.8]),
            class("c4", 8.2, [-6.0, 0.2, 9.8]),
            class("c5", 12.0, [0.0, -6.0, 9.8]),
            class("c6", 12.3, [0.2, -6.0, 9.8]),
        ],
        subjects: named_subjects(6),
        seconds_per_recording: 30.0,
        sample_rate_hz: 50.0,
        seed,
    }
}
