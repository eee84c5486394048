//! Dense array math shared by training, projection, and retrieval code.
//!
//! Everything is 64-bit; sizes stay desk-scale so precision is cheap and the
//! test tolerances can be tight.

mod eigen;
mod fft;
mod gradcheck;
mod optim;

pub use eigen::symmetric_eigen;
pub use fft::fft_magnitude;
pub use gradcheck::grad_check;
pub use optim::{AdamParams, OptimizerKind, OptimizerState};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericError {
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("loss became non-finite")]
    NonFiniteLoss,
}

/// Row-major dense array of `f64` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, NumericError> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(NumericError::ShapeMismatch {
                expected: shape.to_vec(),
                actual: vec![data.len()],
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Distance metric named in prompts and used for retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    Euclidean,
    Manhattan,
    Cosine,
}

impl DistanceMetric {
    pub const ALL: [DistanceMetric; 3] = [
        DistanceMetric::Euclidean,
        DistanceMetric::Manhattan,
        DistanceMetric::Cosine,
    ];

    /// Lower-case name as it appears in prompts and config files.
    pub fn name(&self) -> &'static str {
        match self {
            DistanceMetric::Euclidean => "euclidean",
            DistanceMetric::Manhattan => "manhattan",
            DistanceMetric::Cosine => "cosine",
        }
    }
}

impl std::fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DistanceMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(DistanceMetric::Euclidean),
            "manhattan" => Ok(DistanceMetric::Manhattan),
            "cosine" => Ok(DistanceMetric::Cosine),
            other => Err(format!("unknown distance metric '{other}'")),
        }
    }
}

fn check_same_len(u: &[f64], v: &[f64]) -> Result<(), NumericError> {
    if u.len() != v.len() {
        return Err(NumericError::ShapeMismatch {
            expected: vec![u.len()],
            actual: vec![v.len()],
        });
    }
    Ok(())
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// ⟨u,v⟩ / (‖u‖‖v‖), in [-1, 1].
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, NumericError> {
    check_same_len(u, v)?;
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(NumericError::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// L2, L1, or `1 - cosine_similarity` depending on the metric.
pub fn distance(u: &[f64], v: &[f64], metric: DistanceMetric) -> Result<f64, NumericError> {
    check_same_len(u, v)?;
    match metric {
        DistanceMetric::Euclidean => Ok(u
            .iter()
            .zip(v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()),
        DistanceMetric::Manhattan => Ok(u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum()),
        DistanceMetric::Cosine => Ok(1.0 - cosine_similarity(u, v)?),
    }
}
