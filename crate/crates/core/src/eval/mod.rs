//! Metrics over annotation records: accuracy, confusion matrices, response
//! bias, consistency-vs-example-count curves, and cost/time estimates.

pub mod report;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::llm::AnnotationRecord;
use crate::prompt::ResponseOutcome;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("no ground truth for query {query_id:?}")]
    MissingGroundTruth { query_id: String },
    #[error("label {label:?} is not in the class list")]
    UnknownLabel { label: String },
    #[error("no records to evaluate")]
    EmptyRecords,
    /// No record carried a class prediction, so predicted shares are
    /// undefined (covers all-refusal and all-ambiguous runs).
    #[error("every response was a refusal or ambiguous")]
    AllRefusals,
    #[error("consistency curve needs at least 2 example counts, got {got}")]
    NotEnoughExampleCounts { got: usize },
}

/// Ground truth lookup: query_id -> class name.
pub type GroundTruth = HashMap<String, String>;

fn truth_for<'a>(
    ground_truth: &'a GroundTruth,
    record: &AnnotationRecord,
) -> Result<&'a str, EvalError> {
    ground_truth
        .get(&record.query_id)
        .map(String::as_str)
        .ok_or_else(|| EvalError::MissingGroundTruth {
            query_id: record.query_id.clone(),
        })
}

/// Fraction of records whose parsed label equals the ground truth. Refusals
/// and ambiguous responses count as incorrect.
pub fn accuracy(records: &[AnnotationRecord], ground_truth: &GroundTruth) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyRecords);
    }
    let mut correct = 0usize;
    for record in records {
        let truth = truth_for(ground_truth, record)?;
        if let ResponseOutcome::Label(label) = &record.parsed.outcome {
            if label == truth {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / records.len() as f64)
}

/// Row-per-truth-class count matrix with two extra columns for refusals and
/// ambiguous responses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    /// `counts[i][j]`: truth class `i`; `j < n` predicted class `j`,
    /// `j == n` refusal, `j == n+1` ambiguous.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn refusal_column(&self) -> usize {
        self.n_classes()
    }

    pub fn ambiguous_column(&self) -> usize {
        self.n_classes() + 1
    }

    /// Count on the class-vs-class diagonal (correct predictions).
    pub fn diagonal_total(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }

    /// Sum of class-vs-class cells off the diagonal.
    pub fn off_diagonal_total(&self) -> u64 {
        let n = self.n_classes();
        let mut sum = 0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    sum += self.counts[i][j];
                }
            }
        }
        sum
    }
}

pub fn confusion_matrix(
    records: &[AnnotationRecord],
    ground_truth: &GroundTruth,
    class_names: &[String],
) -> Result<ConfusionMatrix, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyRecords);
    }
    let index: HashMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, name)| (name.as_str(), i))
        .collect();
    let n = class_names.len();
    let mut counts = vec![vec![0u64; n + 2]; n];
    for record in records {
        let truth = truth_for(ground_truth, record)?;
        let row = *index.get(truth).ok_or_else(|| EvalError::UnknownLabel {
            label: truth.to_string(),
        })?;
        let col = match &record.parsed.outcome {
            ResponseOutcome::Label(label) => {
                *index
                    .get(label.as_str())
                    .ok_or_else(|| EvalError::UnknownLabel {
                        label: label.clone(),
                    })?
            }
            ResponseOutcome::Refusal => n,
            ResponseOutcome::Ambiguous => n + 1,
        };
        counts[row][col] += 1;
    }
    Ok(ConfusionMatrix {
        class_names: class_names.to_vec(),
        counts,
    })
}

/// Share of class predictions per class, over records that predicted a
/// class at all. Shares sum to 1.
pub fn response_bias(
    records: &[AnnotationRecord],
    class_names: &[String],
) -> Result<Vec<f64>, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyRecords);
    }
    let index: HashMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, name)| (name.as_str(), i))
        .collect();
    let mut counts = vec![0u64; class_names.len()];
    let mut labeled = 0u64;
    for record in records {
        if let ResponseOutcome::Label(label) = &record.parsed.outcome {
            let i = *index
                .get(label.as_str())
                .ok_or_else(|| EvalError::UnknownLabel {
                    label: label.clone(),
                })?;
            counts[i] += 1;
            labeled += 1;
        }
    }
    if labeled == 0 {
        return Err(EvalError::AllRefusals);
    }
    Ok(counts
        .into_iter()
        .map(|c| c as f64 / labeled as f64)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyCurve {
    /// (example_count, accuracy), ascending by example count.
    pub points: Vec<(usize, f64)>,
    /// Whether accuracy never drops as example count grows.
    pub non_decreasing: bool,
}

pub fn consistency_curve(
    runs: &BTreeMap<usize, Vec<AnnotationRecord>>,
    ground_truth: &GroundTruth,
) -> Result<ConsistencyCurve, EvalError> {
    if runs.len() < 2 {
        return Err(EvalError::NotEnoughExampleCounts { got: runs.len() });
    }
    let mut points = Vec::with_capacity(runs.len());
    for (&count, records) in runs {
        points.push((count, accuracy(records, ground_truth)?));
    }
    let non_decreasing = points.windows(2).all(|w| w[1].1 >= w[0].1);
    Ok(ConsistencyCurve {
        points,
        non_decreasing,
    })
}

/// Backend pricing. Prices are integer micro-units of currency (1e-6) per
/// 1000 tokens, plus an optional flat micro-unit fee per request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceTable {
    pub currency: String,
    pub prompt_micro_per_1k: u64,
    pub completion_micro_per_1k: u64,
    #[serde(default)]
    pub flat_micro_per_request: u64,
}

/// Cost total kept as integer nano-units (micro-units per 1000 tokens times
/// token counts land on 1e-9 currency exactly), so accumulation is exact and
/// linear in token counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub currency: String,
    pub token_nano: u128,
    pub flat_nano: u128,
}

impl CostEstimate {
    pub fn total_nano(&self) -> u128 {
        self.token_nano + self.flat_nano
    }

    /// Total in whole currency units.
    pub fn as_currency(&self) -> f64 {
        self.total_nano() as f64 / 1e9
    }
}

pub fn cost_estimate(records: &[AnnotationRecord], prices: &PriceTable) -> CostEstimate {
    let mut token_nano: u128 = 0;
    for record in records {
        token_nano += record.prompt_tokens as u128 * prices.prompt_micro_per_1k as u128;
        token_nano += record.completion_tokens as u128 * prices.completion_micro_per_1k as u128;
    }
    let flat_nano = records.len() as u128 * prices.flat_micro_per_request as u128 * 1000;
    CostEstimate {
        currency: prices.currency.clone(),
        token_nano,
        flat_nano,
    }
}

/// Minutes to issue `query_count` requests at a steady per-minute rate.
pub fn time_estimate(query_count: u64, rate_per_minute: f64) -> f64 {
    if rate_per_minute <= 0.0 {
        return f64::INFINITY;
    }
    query_count as f64 / rate_per_minute
}

/// Everything the evaluate stage reports for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    /// Predicted share per class, aligned with `confusion.class_names`;
    /// absent when no response carried a class.
    pub bias_index: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistency: Option<ConsistencyCurve>,
    pub cost: CostEstimate,
    pub wall_time_minutes: f64,
    pub record_count: usize,
    pub refusal_count: u64,
    pub ambiguous_count: u64,
}

pub fn build_report(
    records: &[AnnotationRecord],
    ground_truth: &GroundTruth,
    class_names: &[String],
    prices: &PriceTable,
    rate_per_minute: f64,
    consistency: Option<ConsistencyCurve>,
) -> Result<EvalReport, EvalError> {
    let confusion = confusion_matrix(records, ground_truth, class_names)?;
    let accuracy = accuracy(records, ground_truth)?;
    let bias_index = match response_bias(records, class_names) {
        Ok(shares) => Some(shares),
        Err(EvalError::AllRefusals) => None,
        Err(e) => return Err(e),
    };
    let refusal_count = confusion
        .counts
        .iter()
        .map(|row| row[confusion.refusal_column()])
        .sum();
    let ambiguous_count = confusion
        .counts
        .iter()
        .map(|row| row[confusion.ambiguous_column()])
        .sum();
    Ok(EvalReport {
        accuracy,
        confusion,
        bias_index,
        consistency,
        cost: cost_estimate(records, prices),
        wall_time_minutes: time_estimate(records.len() as u64, rate_per_minute),
        record_count: records.len(),
        refusal_count,
        ambiguous_count,
    })
}

/// Reads a `query_id,label` CSV (with header) into a lookup map.
pub fn read_ground_truth_csv(path: &std::path::Path) -> Result<GroundTruth, csv::Error> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut truth = GroundTruth::new();
    for row in reader.deserialize::<(String, String)>() {
        let (query_id, label) = row?;
        truth.insert(query_id, label);
    }
    Ok(truth)
}

pub fn write_ground_truth_csv(
    path: &std::path::Path,
    truth: &[(String, String)],
) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["query_id", "label"])?;
    for (query_id, label) in truth {
        writer.write_record([query_id, label])?;
    }
    writer.flush()?;
    Ok(())
}
