use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use slater_kernels::EvalResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub label: String,
    pub value: f64,
    /// Quadrature error estimate; absent when it is not finite.
    pub err: Option<f64>,
    /// Published value for this term, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper: Option<f64>,
}

impl Term {
    pub fn new(label: impl Into<String>, r: &EvalResult) -> Self {
        Self {
            label: label.into(),
            value: r.value,
            err: Some(r.error_estimate).filter(|e| e.is_finite()),
            paper: None,
        }
    }

    pub fn with_paper(mut self, paper: Option<f64>) -> Self {
        self.paper = paper;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub command: String,
    pub inputs: BTreeMap<String, Value>,
    pub per_term: Vec<Term>,
    /// Absent when the evaluation itself failed.
    pub total: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<f64>,
    /// `passed ⇔ |total - oracle| ≤ tolerance·max(1, |oracle|)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passed: Option<bool>,
    /// Agreement of every published digit, at `paper_sig_digits`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper_passed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper_sig_digits: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub n_evals: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
}

impl ReportRecord {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            per_term: Vec::new(),
            total: None,
            oracle: None,
            tolerance: None,
            passed: None,
            paper_passed: None,
            paper_sig_digits: None,
            note: None,
            n_evals: 0,
            wall_time_ms: None,
        }
    }

    pub fn input(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.inputs.insert(key.to_string(), value.into());
        self
    }

    /// Sets the oracle and derives `passed` from the total.
    pub fn judge(&mut self, oracle: f64, tolerance: f64) {
        self.oracle = Some(oracle);
        self.tolerance = Some(tolerance);
        self.passed = Some(match self.total {
            Some(t) => (t - oracle).abs() <= tolerance * oracle.abs().max(1.0),
            None => false,
        });
    }

    /// Compares every term carrying a published value at `digits`
    /// significant digits.
    pub fn judge_paper(&mut self, digits: u32, paper_total: Option<f64>) {
        let mut ok = self.per_term.iter().filter_map(|t| t.paper.map(|p| (t.value, p))).all(|(v, p)| matches_digits(v, p, digits));
        if let (Some(p), Some(t)) = (paper_total, self.total) {
            ok &= matches_digits(t, p, digits);
        }
        self.paper_passed = Some(ok);
        self.paper_sig_digits = Some(digits);
    }

    pub fn failed(&self) -> bool {
        self.passed == Some(false) || self.paper_passed == Some(false)
    }
}

/// `|value - paper|` within half a unit of the `digits`-th significant
/// digit of `paper`.
pub fn matches_digits(value: f64, paper: f64, digits: u32) -> bool {
    let exponent = paper.abs().log10().floor() as i32;
    let half_unit = 0.5 * 10f64.powi(exponent + 1 - digits as i32);
    (value - paper).abs() <= half_unit
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.10e}"))
}

fn table(records: &[ReportRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(out, "{}", r.command);
        for (k, v) in &r.inputs {
            let _ = writeln!(out, "  {k:<14} {v}");
        }
        if !r.per_term.is_empty() {
            let _ = writeln!(out, "  {:<14} {:>22} {:>18} {:>14}", "term", "value", "err", "paper");
            for t in &r.per_term {
                let paper = t.paper.map_or_else(|| "-".to_string(), |p| p.to_string());
                let _ = writeln!(out, "  {:<14} {:>22.15} {:>18} {:>14}", t.label, t.value, fmt_opt(t.err), paper);
            }
        }
        match r.total {
            Some(t) => {
                let _ = writeln!(out, "  {:<14} {:>22.15}", "total", t);
            }
            None => {
                let _ = writeln!(out, "  {:<14} {:>22}", "total", "failed");
            }
        }
        if let Some(o) = r.oracle {
            let diff = r.total.map(|t| (t - o).abs());
            let _ = writeln!(out, "  {:<14} {:>22.15}", "oracle", o);
            let _ = writeln!(out, "  {:<14} {:>22}", "abs diff", fmt_opt(diff));
        }
        let verdict = |p: Option<bool>| match p {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "-",
        };
        if r.passed.is_some() {
            let _ = writeln!(out, "  {:<14} {:>22}", "oracle check", verdict(r.passed));
        }
        if let Some(d) = r.paper_sig_digits {
            let _ = writeln!(out, "  {:<14} {:>22}", format!("paper ({d} sig)"), verdict(r.paper_passed));
        }
        if let Some(n) = &r.note {
            let _ = writeln!(out, "  note: {n}");
        }
        let _ = writeln!(out, "  {:<14} {:>22}", "evaluations", r.n_evals);
        if let Some(ms) = r.wall_time_ms {
            let _ = writeln!(out, "  {:<14} {:>22}", "wall ms", ms);
        }
    }
    out
}

fn csv_rows(records: &[ReportRecord]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label", "value", "err"])?;
    let many = records.len() > 1;
    for r in records {
        for t in &r.per_term {
            let label = if many { format!("{}:{}", r.command, t.label) } else { t.label.clone() };
            w.write_record([label, t.value.to_string(), t.err.map_or(String::new(), |e| e.to_string())])?;
        }
        let label = if many { format!("{}:TOTAL", r.command) } else { "TOTAL".to_string() };
        let total = r.total.map_or(String::new(), |t| t.to_string());
        let err = r.per_term.iter().map(|t| t.err.unwrap_or(0.0)).sum::<f64>();
        w.write_record([label, total, err.to_string()])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// A single record is written as a JSON object, several as an array.
pub fn to_json(records: &[ReportRecord]) -> anyhow::Result<String> {
    let mut s = match records {
        [one] => serde_json::to_string_pretty(one)?,
        many => serde_json::to_string_pretty(many)?,
    };
    s.push('\n');
    Ok(s)
}

pub fn emit(records: &[ReportRecord], format: Format) -> anyhow::Result<()> {
    let text = match format {
        Format::Table => table(records),
        Format::Json => to_json(records)?,
        Format::Csv => csv_rows(records)?,
    };
    std::io::stdout().lock().write_all(text.as_bytes())?;
    Ok(())
}
