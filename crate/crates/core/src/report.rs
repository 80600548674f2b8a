//! Rendering of evaluation results as JSON, Markdown and CSV tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::{ClassStat, MaedConfig, MetricsReport};

/// One row of a counting results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    pub accuracy: f64,
    pub mse: f64,
    pub mae: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_class: Option<BTreeMap<u32, ClassStat>>,
}

impl ModelRow {
    pub fn new(model: impl Into<String>, report: MetricsReport) -> Self {
        Self {
            model: model.into(),
            accuracy: report.accuracy,
            mse: report.mse,
            mae: report.mae,
            n: report.n,
            per_class: report.per_class,
        }
    }
}

/// Result of a localization evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocateReport {
    pub model: String,
    pub maed: f64,
    pub images: usize,
    pub config: MaedConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Markdown,
    Csv,
}

/// Accepts a single row, an array of rows, or `{"rows": [...]}`.
pub fn parse_rows(text: &str) -> Result<Vec<ModelRow>, serde_json::Error> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value {
        serde_json::Value::Array(_) => serde_json::from_value(value),
        serde_json::Value::Object(ref map) if map.contains_key("rows") => {
            serde_json::from_value(map["rows"].clone())
        }
        other => Ok(vec![serde_json::from_value(other)?]),
    }
}

pub fn render(rows: &[ModelRow], format: Format) -> String {
    match format {
        Format::Json => {
            serde_json::to_string_pretty(&serde_json::json!({ "rows": rows }))
                .expect("rows serialize")
                + "\n"
        }
        Format::Markdown => markdown(rows),
        Format::Csv => csv(rows),
    }
}

/// Counting table with the `Model, Acc↑, MSE↓, MAE↓` columns, followed by a
/// per-class table when any row carries a per-class breakdown.
pub fn markdown(rows: &[ModelRow]) -> String {
    let mut s = String::new();
    s.push_str("| Model | Acc↑ | MSE↓ | MAE↓ |\n");
    s.push_str("|---|---:|---:|---:|\n");
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {:.2} % | {:.3} | {:.3} |",
            r.model,
            r.accuracy * 100.0,
            r.mse,
            r.mae
        );
    }

    let with_classes: Vec<(&str, &BTreeMap<u32, ClassStat>)> = rows
        .iter()
        .filter_map(|r| r.per_class.as_ref().map(|c| (r.model.as_str(), c)))
        .collect();
    if with_classes.is_empty() {
        return s;
    }
    let classes: BTreeSet<u32> = with_classes
        .iter()
        .flat_map(|(_, c)| c.keys().copied())
        .collect();
    let header: Vec<String> = classes.iter().map(u32::to_string).collect();
    let _ = writeln!(s, "\n| Accuracy Count | {} |", header.join(" | "));
    let _ = writeln!(s, "|---|{}", "---:|".repeat(classes.len()));
    let occurrences: Vec<String> = classes
        .iter()
        .map(|k| {
            with_classes
                .iter()
                .find_map(|(_, c)| c.get(k))
                .map_or_else(|| "-".to_string(), |c| c.occurrences.to_string())
        })
        .collect();
    let _ = writeln!(s, "| Occurrences | {} |", occurrences.join(" | "));
    for (model, c) in &with_classes {
        let cells: Vec<String> = classes
            .iter()
            .map(|k| c.get(k).map_or_else(|| "-".to_string(), |v| format!("{:.2}", v.accuracy * 100.0)))
            .collect();
        let _ = writeln!(s, "| {} | {} |", model, cells.join(" | "));
    }
    s
}

pub fn csv(rows: &[ModelRow]) -> String {
    let mut s = String::from("model,accuracy,mse,mae,n\n");
    for r in rows {
        let model = if r.model.contains([',', '"']) {
            format!("\"{}\"", r.model.replace('"', "\"\""))
        } else {
            r.model.clone()
        };
        let _ = writeln!(s, "{},{},{},{},{}", model, r.accuracy, r.mse, r.mae, r.n);
    }
    s
}
