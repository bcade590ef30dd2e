//! Score tables in the "Method;F1 Score;Accuracy;Precision;Recall" layout.

use std::fmt::Write as _;
use std::str::FromStr;

use tsr_core::metrics::EvalReport;

pub const TABLE_HEADER: [&str; 5] = ["Method", "F1 Score", "Accuracy", "Precision", "Recall"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownFormat(pub String);

impl std::fmt::Display for UnknownFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "unknown report format {:?} (expected md or csv)", self.0)
    }
}

impl std::error::Error for UnknownFormat {}

impl FromStr for ReportFormat {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(UnknownFormat(other.to_string())),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    Macro,
    Weighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub method: String,
    pub f1: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

impl TableRow {
    pub fn from_report(report: &EvalReport, averaging: Averaging) -> Self {
        let s = &report.scores;
        let (f1, precision, recall) = match averaging {
            Averaging::Macro => (s.macro_f1, s.macro_precision, s.macro_recall),
            Averaging::Weighted => (s.weighted_f1, s.weighted_precision, s.weighted_recall),
        };
        Self {
            method: report.pipeline.name().to_string(),
            f1,
            accuracy: s.accuracy,
            precision,
            recall,
        }
    }

    fn cells(&self) -> [String; 5] {
        [
            self.method.clone(),
            format!("{:.6}", self.f1),
            format!("{:.6}", self.accuracy),
            format!("{:.6}", self.precision),
            format!("{:.6}", self.recall),
        ]
    }
}

pub fn render(rows: &[TableRow], format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(&TABLE_HEADER.join(";"));
            out.push('\n');
            for r in rows {
                out.push_str(&r.cells().join(";"));
                out.push('\n');
            }
        }
        ReportFormat::Markdown => {
            let _ = writeln!(out, "| {} |", TABLE_HEADER.join(" | "));
            out.push_str("|---|---:|---:|---:|---:|\n");
            for r in rows {
                let _ = writeln!(out, "| {} |", r.cells().join(" | "));
            }
        }
    }
    out
}

/// Parse a table written by [`render`] in CSV form.
pub fn parse_csv(text: &str) -> Result<Vec<TableRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TABLE_HEADER.join(";") => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(';').collect();
            if f.len() != 5 {
                return Err(format!(
                    "row {}: expected 5 fields, found {}",
                    i + 2,
                    f.len()
                ));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| format!("row {}: bad number {s:?}", i + 2))
            };
            Ok(TableRow {
                method: f[0].to_string(),
                f1: num(f[1])?,
                accuracy: num(f[2])?,
                precision: num(f[3])?,
                recall: num(f[4])?,
            })
        })
        .collect()
}
