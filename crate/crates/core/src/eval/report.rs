//! Report serialization: JSON for machines, CSV for spreadsheets, and an
//! SVG heatmap of the confusion matrix.

use std::fmt::Write as _;
use std::path::Path;

use super::{ConfusionMatrix, EvalReport};

pub fn report_json_string(report: &EvalReport) -> serde_json::Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

fn csv_into_string(build: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    build(&mut writer).expect("csv writes to memory cannot fail");
    String::from_utf8(writer.into_inner().expect("flushed")).expect("csv output is utf-8")
}

/// Header `truth,<classes...>,refusal,ambiguous`, one row per truth class.
pub fn confusion_csv_string(matrix: &ConfusionMatrix) -> String {
    csv_into_string(|writer| {
        let mut header = vec!["truth".to_string()];
        header.extend(matrix.class_names.iter().cloned());
        header.push("refusal".into());
        header.push("ambiguous".into());
        writer.write_record(&header)?;
        for (name, row) in matrix.class_names.iter().zip(&matrix.counts) {
            let mut record = vec![name.clone()];
            record.extend(row.iter().map(|c| c.to_string()));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    })
}

/// Flat `metric,value` rows covering the scalar report fields plus one row
/// per consistency-curve point and per-class bias share.
pub fn metrics_csv_string(report: &EvalReport) -> String {
    csv_into_string(|writer| {
        writer.write_record(["metric", "value"])?;
        writer.write_record(["accuracy", &format!("{:.6}", report.accuracy)])?;
        writer.write_record(["record_count", &report.record_count.to_string()])?;
        writer.write_record(["refusal_count", &report.refusal_count.to_string()])?;
        writer.write_record(["ambiguous_count", &report.ambiguous_count.to_string()])?;
        writer.write_record([
            format!("cost_{}", report.cost.currency.to_lowercase()),
            format!("{:.6}", report.cost.as_currency()),
        ])?;
        writer.write_record([
            "wall_time_minutes".to_string(),
            format!("{:.4}", report.wall_time_minutes),
        ])?;
        if let Some(shares) = &report.bias_index {
            for (name, share) in report.confusion.class_names.iter().zip(shares) {
                writer.write_record([format!("bias_share_{name}"), format!("{share:.6}")])?;
            }
        }
        if let Some(curve) = &report.consistency {
            for (count, acc) in &curve.points {
                writer.write_record([
                    format!("accuracy_at_{count}_examples"),
                    format!("{acc:.6}"),
                ])?;
            }
            writer.write_record([
                "consistency_non_decreasing".to_string(),
                curve.non_decreasing.to_string(),
            ])?;
        }
        writer.flush()?;
        Ok(())
    })
}

const CELL: u64 = 56;
const LEFT: u64 = 150;
const TOP: u64 = 70;
const PAD: u64 = 12;

fn heat_color(value: u64, max: u64) -> String {
    let t = if max == 0 {
        0.0
    } else {
        value as f64 / max as f64
    };
    let channel = |from: f64, to: f64| -> u8 { (from + t * (to - from)).round() as u8 };
    format!(
        "rgb({},{},{})",
        channel(255.0, 31.0),
        channel(255.0, 119.0),
        channel(255.0, 180.0)
    )
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Deterministic heatmap: one cell per confusion count, truth on rows,
/// predictions (plus refusal/ambiguous) on columns.
pub fn confusion_svg_string(matrix: &ConfusionMatrix) -> String {
    let n = matrix.n_classes();
    let cols = n + 2;
    let width = LEFT + cols as u64 * CELL + PAD;
    let height = TOP + n as u64 * CELL + PAD;
    let max = matrix.counts.iter().flatten().copied().max().unwrap_or(0);

    let mut col_names: Vec<String> = matrix.class_names.clone();
    col_names.push("refusal".into());
    col_names.push("ambiguous".into());

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"monospace\" font-size=\"11\">"
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"16\" text-anchor=\"middle\" font-size=\"13\">predicted</text>",
        LEFT + cols as u64 * CELL / 2
    );
    let _ = writeln!(
        svg,
        "  <text x=\"14\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 14 {y})\">truth</text>",
        TOP + n as u64 * CELL / 2,
        y = TOP + n as u64 * CELL / 2
    );
    for (j, name) in col_names.iter().enumerate() {
        let x = LEFT + j as u64 * CELL + CELL / 2;
        let _ = writeln!(
            svg,
            "  <text x=\"{x}\" y=\"{}\" text-anchor=\"end\" transform=\"rotate(-40 {x} {y})\">{}</text>",
            TOP - 8,
            xml_escape(name),
            y = TOP - 8
        );
    }
    for (i, name) in matrix.class_names.iter().enumerate() {
        let _ = writeln!(
            svg,
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
            LEFT - 8,
            TOP + i as u64 * CELL + CELL / 2 + 4,
            xml_escape(name)
        );
    }
    for (i, row) in matrix.counts.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            let x = LEFT + j as u64 * CELL;
            let y = TOP + i as u64 * CELL;
            let fill = heat_color(count, max);
            let _ = writeln!(
                svg,
                "  <rect class=\"cell\" x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{fill}\" stroke=\"#999\"/>"
            );
            let dark = max > 0 && count as f64 / max as f64 > 0.55;
            let _ = writeln!(
                svg,
                "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{}\">{count}</text>",
                x + CELL / 2,
                y + CELL / 2 + 4,
                if dark { "#fff" } else { "#000" }
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes report.json, confusion.csv, metrics.csv, and confusion.svg.
pub fn write_report_files(dir: &Path, report: &EvalReport) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let json = report_json_string(report)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    std::fs::write(dir.join("report.json"), json)?;
    std::fs::write(dir.join("confusion.csv"), confusion_csv_string(&report.confusion))?;
    std::fs::write(dir.join("metrics.csv"), metrics_csv_string(report))?;
    std::fs::write(dir.join("confusion.svg"), confusion_svg_string(&report.confusion))?;
    Ok(())
}
