//! Report files. CSV output starts with `#` lines holding the version and a
//! JSON echo of the configuration; JSONL output starts with one object
//! holding the same.

use std::path::Path;

use anyhow::{Context as _, Result};
use calm_core::drrn::TrainingReport;
use calm_core::VERSION;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Jsonl => "jsonl",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "jsonl" => Ok(Self::Jsonl),
            other => Err(format!("unknown format `{other}` (csv, jsonl)")),
        }
    }
}

pub fn stamp_csv(echo: &Value, body: &str) -> String {
    format!("# version: {VERSION}\n# config: {echo}\n{body}")
}

fn parse_cell(cell: &str) -> Value {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => json!(v),
        _ => match cell {
            "true" => json!(true),
            "false" => json!(false),
            _ => json!(cell),
        },
    }
}

/// One JSON object per CSV row, keyed by the header; numeric cells become
/// numbers. Cells must not contain commas.
pub fn csv_to_jsonl(echo: &Value, csv: &str) -> String {
    let mut out = json!({ "version": VERSION, "config": echo }).to_string() + "\n";
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().map(|h| h.split(',').collect()).unwrap_or_default();
    for line in lines {
        let row: Map<String, Value> = header
            .iter()
            .zip(line.split(','))
            .map(|(k, v)| (k.to_string(), parse_cell(v)))
            .collect();
        out.push_str(&Value::Object(row).to_string());
        out.push('\n');
    }
    out
}

pub fn render_table(csv: &str, echo: &Value, format: Format) -> String {
    match format {
        Format::Csv => stamp_csv(echo, csv),
        Format::Jsonl => csv_to_jsonl(echo, csv),
    }
}

pub fn write_table(path: &Path, csv: &str, echo: &Value, format: Format) -> Result<()> {
    std::fs::write(path, render_table(csv, echo, format)).with_context(|| format!("writing {}", path.display()))
}

/// JSONL: the whole report on one line. CSV: the stamp, one row per episode
/// and the summary as a final `#` line.
pub fn render_report(report: &TrainingReport, format: Format) -> Result<String> {
    Ok(match format {
        Format::Jsonl => serde_json::to_string(report)? + "\n",
        Format::Csv => {
            let echo = json!({
                "game": report.game,
                "source": report.source,
                "seed": report.seed,
                "max_score": report.max_score,
                "agent": report.config,
            });
            let mut body = String::from("episode,steps,score\n");
            for e in &report.episodes {
                body.push_str(&format!("{},{},{}\n", e.episode, e.steps, e.score));
            }
            let mut out = stamp_csv(&echo, &body);
            out.push_str(&format!("# summary: {}\n", serde_json::to_string(&report.summary)?));
            out
        }
    })
}

pub fn write_report(path: &Path, report: &TrainingReport, format: Format) -> Result<()> {
    std::fs::write(path, render_report(report, format)?).with_context(|| format!("writing {}", path.display()))
}
