use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::{percent, MacroMetrics};
use crate::classify::ModelCard;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub card: ModelCard,
    pub macro_metrics: Option<MacroMetrics>,
}

/// Accuracy/efficiency comparison across models.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffReport {
    pub rows: Vec<TradeoffRow>,
    /// One row per model.
    pub csv: String,
    pub markdown: String,
    /// Macro metrics against throughput, for models with metrics.
    pub metric_vs_throughput_csv: String,
    /// Macro metrics against parameter count, for models with metrics.
    pub metric_vs_params_csv: String,
}

const HEADER: [&str; 11] = [
    "model_id",
    "mean_class_accuracy",
    "throughput",
    "params_m",
    "gflops",
    "train_hours_total",
    "train_hours_to_90",
    "epochs_to_90",
    "macro_recall",
    "macro_precision",
    "macro_f1",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn pct(v: f64) -> String {
    format!("{:.2}", percent(v))
}

fn row_cells(row: &TradeoffRow) -> Vec<String> {
    let c = &row.card;
    let m = row.macro_metrics;
    vec![
        c.model_id.clone(),
        c.mean_class_accuracy.to_string(),
        c.throughput.to_string(),
        c.params.to_string(),
        c.gflops.to_string(),
        c.train_hours_total.to_string(),
        opt(c.train_hours_to_90),
        opt(c.epochs_to_90),
        opt(m.map(|m| pct(m.macro_recall))),
        opt(m.map(|m| pct(m.macro_precision))),
        opt(m.map(|m| pct(m.macro_f1))),
    ]
}

fn to_csv<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Macro metrics are keyed by `model_id`; models without an entry get
/// empty metric cells and are left out of the series.
pub fn tradeoff_report(cards: &[ModelCard], macros: &BTreeMap<String, MacroMetrics>) -> TradeoffReport {
    let rows: Vec<TradeoffRow> = cards
        .iter()
        .map(|card| TradeoffRow { card: card.clone(), macro_metrics: macros.get(&card.model_id).copied() })
        .collect();

    let csv = to_csv(&HEADER, rows.iter().map(row_cells));

    let mut markdown = format!("| {} |\n|{}\n", HEADER.join(" | "), "---|".repeat(HEADER.len()));
    for r in &rows {
        let cells: Vec<String> = row_cells(r).into_iter().map(|c| if c.is_empty() { "-".into() } else { c.replace('|', "\\|") }).collect();
        markdown.push_str(&format!("| {} |\n", cells.join(" | ")));
    }

    let series = |x_name: &str, x: fn(&ModelCard) -> f64| {
        to_csv(
            &["model_id", x_name, "macro_f1", "macro_precision", "macro_recall"],
            rows.iter().filter_map(|r| {
                r.macro_metrics.map(|m| {
                    vec![r.card.model_id.clone(), x(&r.card).to_string(), pct(m.macro_f1), pct(m.macro_precision), pct(m.macro_recall)]
                })
            }),
        )
    };
    let metric_vs_throughput_csv = series("throughput", |c| c.throughput);
    let metric_vs_params_csv = series("params_m", |c| c.params);

    TradeoffReport { rows, csv, markdown, metric_vs_throughput_csv, metric_vs_params_csv }
}
