//! Report rows and their CSV/JSON renderings.
//!
//! Floating-point values are printed with 17 significant digits, which
//! round-trips every `f64` exactly, so a report read back compares equal.

use std::path::Path;

use serde_json::{Map, Number, Value};

use crate::config::Format;
use crate::error::{CliError, CliResult};

pub const COLUMNS: [&str; 14] = [
    "experiment_id",
    "theorem",
    "route",
    "t",
    "x",
    "epsilon",
    "variant",
    "k",
    "n",
    "seed",
    "value",
    "stderr",
    "tolerance",
    "verdict",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// The row others are compared against.
    Reference,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Reference => "reference",
        }
    }

    fn parse(s: &str) -> CliResult<Self> {
        match s {
            "pass" => Ok(Verdict::Pass),
            "fail" => Ok(Verdict::Fail),
            "reference" => Ok(Verdict::Reference),
            other => Err(CliError::Format(format!("unknown verdict {other:?}"))),
        }
    }
}

/// One route's result within an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub experiment_id: String,
    pub theorem: String,
    pub route: String,
    pub t: Option<f64>,
    /// Coordinates of the start point, `;`-separated.
    pub x: String,
    pub epsilon: Option<f64>,
    pub variant: String,
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub value: f64,
    pub stderr: Option<f64>,
    pub tolerance: Option<f64>,
    pub verdict: Verdict,
}

impl ReportRow {
    /// A row with only the identifying columns and the value filled in.
    pub fn new(experiment_id: &str, theorem: &str, route: &str, value: f64, verdict: Verdict) -> Self {
        Self {
            experiment_id: experiment_id.to_string(),
            theorem: theorem.to_string(),
            route: route.to_string(),
            t: None,
            x: String::new(),
            epsilon: None,
            variant: String::new(),
            k: None,
            n: None,
            seed: None,
            value,
            stderr: None,
            tolerance: None,
            verdict,
        }
    }
}

/// Renders `v` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn fmt_point(x: &[f64]) -> String {
    x.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(";")
}

/// All rows of one experiment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComparisonRecord {
    pub rows: Vec<ReportRow>,
}

impl ComparisonRecord {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.verdict != Verdict::Fail)
    }

    fn cells(row: &ReportRow) -> [String; 14] {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let opt_int = |v: Option<u64>| v.map(|v| v.to_string()).unwrap_or_default();
        [
            row.experiment_id.clone(),
            row.theorem.clone(),
            row.route.clone(),
            opt(row.t),
            row.x.clone(),
            opt(row.epsilon),
            row.variant.clone(),
            opt_int(row.k.map(|k| k as u64)),
            opt_int(row.n.map(|n| n as u64)),
            opt_int(row.seed),
            fmt_f64(row.value),
            opt(row.stderr),
            opt(row.tolerance),
            row.verdict.label().to_string(),
        ]
    }

    pub fn to_csv(&self) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Format(e.to_string());
        w.write_record(COLUMNS).map_err(io)?;
        for row in &self.rows {
            w.write_record(Self::cells(row)).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Format(e.to_string()))
    }

    pub fn to_json(&self) -> CliResult<String> {
        let number = |s: String| -> Value { s.parse::<Number>().map(Value::Number).unwrap_or(Value::Null) };
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let cells = Self::cells(row);
                let mut obj = Map::new();
                for (col, cell) in COLUMNS.iter().zip(cells) {
                    let v = match *col {
                        "experiment_id" | "theorem" | "route" | "x" | "variant" | "verdict" => Value::String(cell),
                        _ if cell.is_empty() => Value::Null,
                        _ => number(cell),
                    };
                    obj.insert(col.to_string(), v);
                }
                Value::Object(obj)
            })
            .collect();
        let mut text =
            serde_json::to_string_pretty(&Value::Array(rows)).map_err(|e| CliError::Format(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }

    pub fn render(&self, format: Format) -> CliResult<String> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    /// Writes the rendered report; the file is only created once rendering
    /// has succeeded.
    pub fn emit(&self, format: Format, path: &Path) -> CliResult<()> {
        let text = self.render(format)?;
        std::fs::write(path, text).map_err(|source| CliError::ReportWrite {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn from_csv(text: &str) -> CliResult<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = r
            .headers()
            .map_err(|e| CliError::Format(e.to_string()))?
            .iter()
            .map(String::from)
            .collect();
        if header != COLUMNS {
            return Err(CliError::Format(format!("unexpected CSV header {header:?}")));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| CliError::Format(e.to_string()))?;
            let cells: Vec<&str> = rec.iter().collect();
            rows.push(row_from_cells(&cells)?);
        }
        Ok(Self { rows })
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| CliError::Format(e.to_string()))?;
        let arr = value
            .as_array()
            .ok_or_else(|| CliError::Format("JSON report must be an array".into()))?;
        let mut rows = Vec::with_capacity(arr.len());
        for item in arr {
            let obj = item
                .as_object()
                .ok_or_else(|| CliError::Format("JSON report rows must be objects".into()))?;
            let cells: Vec<String> = COLUMNS
                .iter()
                .map(|c| match obj.get(*c) {
                    Some(Value::String(s)) => Ok(s.clone()),
                    Some(Value::Number(n)) => Ok(n.to_string()),
                    Some(Value::Null) => Ok(String::new()),
                    _ => Err(CliError::Format(format!("missing or malformed key {c:?}"))),
                })
                .collect::<CliResult<_>>()?;
            let refs: Vec<&str> = cells.iter().map(String::as_str).collect();
            rows.push(row_from_cells(&refs)?);
        }
        Ok(Self { rows })
    }
}

fn row_from_cells(c: &[&str]) -> CliResult<ReportRow> {
    if c.len() != COLUMNS.len() {
        return Err(CliError::Format(format!(
            "expected {} cells, got {}",
            COLUMNS.len(),
            c.len()
        )));
    }
    fn opt<T: std::str::FromStr>(s: &str) -> CliResult<Option<T>> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse()
            .map(Some)
            .map_err(|_| CliError::Format(format!("cannot parse {s:?}")))
    }
    Ok(ReportRow {
        experiment_id: c[0].to_string(),
        theorem: c[1].to_string(),
        route: c[2].to_string(),
        t: opt(c[3])?,
        x: c[4].to_string(),
        epsilon: opt(c[5])?,
        variant: c[6].to_string(),
        k: opt(c[7])?,
        n: opt(c[8])?,
        seed: opt(c[9])?,
        value: opt(c[10])?.ok_or_else(|| CliError::Format("value is required".into()))?,
        stderr: opt(c[11])?,
        tolerance: opt(c[12])?,
        verdict: Verdict::parse(c[13])?,
    })
}
