//! Dataset parsing, resampling, windowing, and subject-held-out splitting.

mod adapters;

pub use adapters::parse_dataset;

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("malformed file {path} at line {line}: {detail}")]
    MalformedFile {
        path: String,
        line: usize,
        detail: String,
    },
    #[error("unknown adapter '{0}', expected one of motionsense, pamap2, ucihar, hhar, generic-csv")]
    UnknownAdapter(String),
    #[error("no recordings found under {0}")]
    EmptyDataset(String),
    #[error("recording has no samples")]
    EmptyRecording,
    #[error("split produced an empty {0} set")]
    EmptySplit(&'static str),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One continuous recording of a single subject performing one activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecording {
    pub dataset_id: String,
    pub subject_id: String,
    pub activity_label: String,
    pub device_position: String,
    pub sampling_rate_hz: f64,
    pub samples: Vec<[f64; 3]>,
}

/// Fixed-length slice of a recording, the unit that flows through encoding
/// and annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub values: Vec<[f64; 3]>,
    pub subject_id: String,
    pub label: Option<String>,
    pub dataset_id: String,
    pub window_index: usize,
}

/// Held-out-subject split description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub dataset_id: String,
    pub test_subject_ids: BTreeSet<String>,
    pub chosen_classes: Vec<String>,
}

/// Linear resampling to `target_hz`. Output sample k sits at source position
/// k * source_rate / target_hz; duration is preserved within one period.
pub fn resample(recording: &RawRecording, target_hz: f64) -> Result<RawRecording, IngestError> {
    if recording.samples.is_empty() {
        return Err(IngestError::EmptyRecording);
    }
    let source_hz = recording.sampling_rate_hz;
    if (source_hz - target_hz).abs() < f64::EPSILON * source_hz.abs() {
        return Ok(recording.clone());
    }
    let n = recording.samples.len();
    let m = ((n as f64) * target_hz / source_hz).round().max(1.0) as usize;
    let step = source_hz / target_hz;
    let mut samples = Vec::with_capacity(m);
    for k in 0..m {
        let x = k as f64 * step;
        let i = (x.floor() as usize).min(n - 1);
        let j = (i + 1).min(n - 1);
        let frac = x - i as f64;
        let a = recording.samples[i];
        let b = recording.samples[j];
        samples.push([
            a[0] + frac * (b[0] - a[0]),
            a[1] + frac * (b[1] - a[1]),
            a[2] + frac * (b[2] - a[2]),
        ]);
    }
    Ok(RawRecording {
        sampling_rate_hz: target_hz,
        samples,
        ..recording.clone()
    })
}

/// Slices a recording into overlapping windows of length `window_len` with
/// the given stride. Yields floor((n - L)/S) + 1 windows when n >= L, else
/// none.
pub fn windowize(recording: &RawRecording, window_len: usize, stride: usize) -> Vec<Window> {
    assert!(window_len >= 1 && stride >= 1, "degenerate window parameters");
    let n = recording.samples.len();
    if n < window_len {
        return Vec::new();
    }
    let count = (n - window_len) / stride + 1;
    (0..count)
        .map(|w| {
            let start = w * stride;
            Window {
                values: recording.samples[start..start + window_len].to_vec(),
                subject_id: recording.subject_id.clone(),
                label: Some(recording.activity_label.clone()),
                dataset_id: recording.dataset_id.clone(),
                window_index: w,
            }
        })
        .collect()
}

/// Splits by held-out subject: the test side keeps only the chosen classes,
/// the train side keeps every class of the remaining subjects.
pub fn split(
    windows: Vec<Window>,
    spec: &SplitSpec,
) -> Result<(Vec<Window>, Vec<Window>), IngestError> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for w in windows {
        if spec.test_subject_ids.contains(&w.subject_id) {
            let keep = w
                .label
                .as_deref()
                .is_some_and(|l| spec.chosen_classes.iter().any(|c| c == l));
            if keep {
                test.push(w);
            }
        } else {
            train.push(w);
        }
    }
    if train.is_empty() {
        return Err(IngestError::EmptySplit("train"));
    }
    if test.is_empty() {
        return Err(IngestError::EmptySplit("test"));
    }
    Ok((train, test))
}

/// Per-channel mean and standard deviation, fitted on train windows only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl ChannelStats {
    pub fn fit(windows: &[Window]) -> ChannelStats {
        let mut count = 0usize;
        let mut mean = [0.0f64; 3];
        for w in windows {
            for s in &w.values {
                for c in 0..3 {
                    mean[c] += s[c];
                }
            }
            count += w.values.len();
        }
        let count = count.max(1) as f64;
        for m in &mut mean {
            *m /= count;
        }
        let mut var = [0.0f64; 3];
        for w in windows {
            for s in &w.values {
                for c in 0..3 {
                    let d = s[c] - mean[c];
                    var[c] += d * d;
                }
            }
        }
        let std = [
            (var[0] / count).sqrt().max(1e-12),
            (var[1] / count).sqrt().max(1e-12),
            (var[2] / count).sqrt().max(1e-12),
        ];
        ChannelStats { mean, std }
    }

    pub fn apply(&self, window: &mut Window) {
        for s in &mut window.values {
            for c in 0..3 {
                s[c] = (s[c] - self.mean[c]) / self.std[c];
            }
        }
    }
}

/// Writes windows as one JSON object per line.
pub fn write_windows<W: Write>(out: &mut W, windows: &[Window]) -> Result<(), IngestError> {
    for w in windows {
        let line = serde_json::to_string(w).expect("window serializes");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_windows(path: &Path) -> Result<Vec<Window>, IngestError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut windows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let w: Window = serde_json::from_str(&line).map_err(|e| IngestError::MalformedFile {
            path: path.display().to_string(),
            line: idx + 1,
            detail: e.to_string(),
        })?;
        windows.push(w);
    }
    Ok(windows)
}
