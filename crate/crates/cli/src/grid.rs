//! Grid sweep: every (dimension, metric, example-count) cell annotated and
//! evaluated, cells running concurrently up to the worker limit, followed by
//! a deterministic summary and per-(dimension, metric) consistency curves.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use senselabel_core::eval::{consistency_curve, read_ground_truth_csv, EvalReport};

use crate::config::Resolved;
use crate::error::{stage_error, CliError};
use crate::stages::{
    annotate_cell, cmd_project, enumerate_cells, evaluate_cell, metric_name,
    read_annotation_records, Cell, GROUND_TRUTH,
};

pub const GRID_SUMMARY_JSON: &str = "grid_summary.json";
pub const GRID_SUMMARY_CSV: &str = "grid_summary.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dim: usize,
    pub metric: String,
    pub examples: usize,
    pub accuracy: f64,
    pub record_count: usize,
    pub refusal_count: u64,
    pub ambiguous_count: u64,
    pub cost: f64,
    pub currency: String,
    pub wall_time_minutes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub dim: usize,
    pub metric: String,
    /// (example count, accuracy) pairs in ascending count order.
    pub points: Vec<(usize, f64)>,
    pub non_decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub cells: Vec<SummaryRow>,
    pub consistency: Vec<ConsistencyRow>,
}

pub fn cmd_grid(resolved: &Resolved) -> Result<(), CliError> {
    cmd_project(resolved)?;
    let cells = enumerate_cells(resolved);
    run_cells(resolved, &cells)?;
    let summary = summarize(resolved, &cells)?;
    write_summary(resolved, &summary)?;
    Ok(())
}

/// Runs annotate + evaluate for each cell, at most `grid.workers` at a time.
/// The first failure wins; remaining workers stop picking up new cells.
fn run_cells(resolved: &Resolved, cells: &[Cell]) -> Result<(), CliError> {
    let workers = resolved.raw.grid.workers.min(cells.len()).max(1);
    let next = AtomicUsize::new(0);
    let failure: Mutex<Option<CliError>> = Mutex::new(None);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if failure.lock().expect("failure lock").is_some() {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cells.len() {
                    break;
                }
                let cell = &cells[i];
                let outcome =
                    annotate_cell(resolved, cell).and_then(|()| evaluate_cell(resolved, cell));
                if let Err(e) = outcome {
                    let mut slot = failure.lock().expect("failure lock");
                    if slot.is_none() {
                        *slot = Some(e);
                    }
                    break;
                }
            });
        }
    });

    match failure.into_inner().expect("failure lock") {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn summarize(resolved: &Resolved, cells: &[Cell]) -> Result<GridSummary, CliError> {
    let stage = "grid_summary";
    let truth = read_ground_truth_csv(&resolved.run_dir.join(GROUND_TRUTH))
        .map_err(|e| stage_error(stage, e))?;

    let mut rows = Vec::with_capacity(cells.len());
    for cell in cells {
        let path = resolved.run_dir.join(cell.report_rel());
        let text = std::fs::read_to_string(&path)
            .map_err(|e| stage_error(stage, format!("read {}: {e}", path.display())))?;
        let report: EvalReport = serde_json::from_str(&text)
            .map_err(|e| stage_error(stage, format!("parse {}: {e}", path.display())))?;
        rows.push(SummaryRow {
            dim: cell.dim,
            metric: metric_name(cell.metric).to_string(),
            examples: cell.examples,
            accuracy: report.accuracy,
            record_count: report.record_count,
            refusal_count: report.refusal_count,
            ambiguous_count: report.ambiguous_count,
            cost: report.cost.as_currency(),
            currency: report.cost.currency.clone(),
            wall_time_minutes: report.wall_time_minutes,
        });
    }

    // Consistency across example counts, one curve per (dim, metric) pair
    // that has at least two counts.
    let mut consistency = Vec::new();
    for &dim in &resolved.raw.projection.dims {
        for &metric in &resolved.metrics {
            let mut by_count = BTreeMap::new();
            for cell in cells.iter().filter(|c| c.dim == dim && c.metric == metric) {
                let records = read_annotation_records(resolved, cell, stage)?;
                by_count.insert(cell.examples, records);
            }
            if by_count.len() < 2 {
                continue;
            }
            let curve =
                consistency_curve(&by_count, &truth).map_err(|e| stage_error(stage, e))?;
            consistency.push(ConsistencyRow {
                dim,
                metric: metric_name(metric).to_string(),
                points: curve.points,
                non_decreasing: curve.non_decreasing,
            });
        }
    }
    Ok(GridSummary {
        cells: rows,
        consistency,
    })
}

fn write_summary(resolved: &Resolved, summary: &GridSummary) -> Result<(), CliError> {
    let stage = "grid_summary";
    let mut json = serde_json::to_string_pretty(summary).expect("summary serializes");
    json.push('\n');
    std::fs::write(resolved.run_dir.join(GRID_SUMMARY_JSON), json)
        .map_err(|e| stage_error(stage, format!("write {GRID_SUMMARY_JSON}: {e}")))?;

    let mut csv = String::from(
        "dim,metric,examples,accuracy,record_count,refusal_count,ambiguous_count,cost,currency,wall_time_minutes\n",
    );
    for row in &summary.cells {
        csv.push_str(&format!(
            "{},{},{},{:.6},{},{},{},{:.6},{},{:.4}\n",
            row.dim,
            row.metric,
            row.examples,
            row.accuracy,
            row.record_count,
            row.refusal_count,
            row.ambiguous_count,
            row.cost,
            row.currency,
            row.wall_time_minutes,
        ));
    }
    std::fs::write(resolved.run_dir.join(GRID_SUMMARY_CSV), csv)
        .map_err(|e| stage_error(stage, format!("write {GRID_SUMMARY_CSV}: {e}")))
}
