//! Result records and their CSV and JSON renderings.
//!
//! Floats are printed with 17 significant digits (`{:.16e}`), which round-trips
//! every `f64`. Non-finite values become `NaN`/`inf` in CSV and `null` in JSON.

use std::io::{self, Write};

use brwd_core::stats::Estimate;

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Float(f64),
    Int(i64),
    Uint(u64),
    Bool(bool),
    Str(String),
}

impl Value {
    fn csv(&self) -> String {
        match self {
            Value::Float(x) => fmt_float(*x),
            Value::Int(x) => x.to_string(),
            Value::Uint(x) => x.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Str(s) => csv_escape(s),
        }
    }

    fn json(&self) -> String {
        match self {
            Value::Float(x) if x.is_finite() => fmt_float(*x),
            Value::Float(_) => "null".into(),
            Value::Int(x) => x.to_string(),
            Value::Uint(x) => x.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Str(s) => serde_json::to_string(s).expect("strings serialize"),
        }
    }
}

pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<u64> for Value {
    fn from(x: u64) -> Self {
        Value::Uint(x)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Uint(x as u64)
    }
}

impl From<i64> for Value {
    fn from(x: i64) -> Self {
        Value::Int(x)
    }
}

impl From<bool> for Value {
    fn from(x: bool) -> Self {
        Value::Bool(x)
    }
}

impl From<&str> for Value {
    fn from(x: &str) -> Self {
        Value::Str(x.into())
    }
}

impl From<String> for Value {
    fn from(x: String) -> Self {
        Value::Str(x)
    }
}

/// One output row: ordered named values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Record {
    pub fields: Vec<(String, Value)>,
}

impl Record {
    pub fn new(kind: &str) -> Self {
        Record {
            fields: vec![("record".into(), kind.into())],
        }
    }

    pub fn with(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.fields.push((key.into(), v.into()));
        self
    }

    /// `key` and `key_se`.
    pub fn estimate(self, key: &str, e: Estimate) -> Self {
        self.with(key, e.value).with(&format!("{key}_se"), e.std_err)
    }

    /// A value known without sampling error.
    pub fn exact(self, key: &str, x: f64) -> Self {
        self.with(key, x).with(&format!("{key}_se"), "exact")
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    /// `pass = false` marks a failed statistical check.
    pub fn failed(&self) -> bool {
        matches!(self.get("pass"), Some(Value::Bool(false)))
    }
}

/// Column order: first appearance across records, then the config echo.
fn columns(records: &[Record]) -> Vec<String> {
    let mut cols: Vec<String> = Vec::new();
    for r in records {
        for (k, _) in &r.fields {
            if !cols.contains(k) {
                cols.push(k.clone());
            }
        }
    }
    cols
}

pub fn write_csv<W: Write>(mut w: W, records: &[Record], config: &[(String, String)]) -> io::Result<()> {
    let cols = columns(records);
    let header: Vec<String> = cols
        .iter()
        .cloned()
        .chain(config.iter().map(|(k, _)| format!("config.{k}")))
        .map(|c| csv_escape(&c))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    let cfg: Vec<String> = config.iter().map(|(_, v)| csv_escape(v)).collect();
    for r in records {
        let row: Vec<String> = cols
            .iter()
            .map(|c| r.get(c).map(Value::csv).unwrap_or_default())
            .chain(cfg.iter().cloned())
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_json<W: Write>(mut w: W, records: &[Record], config: &[(String, String)]) -> io::Result<()> {
    let cfg: Vec<String> = config
        .iter()
        .map(|(k, v)| format!("{}:{}", Value::Str(k.clone()).json(), Value::Str(v.clone()).json()))
        .collect();
    let cfg = format!("{{{}}}", cfg.join(","));
    writeln!(w, "[")?;
    for (i, r) in records.iter().enumerate() {
        let body: Vec<String> = r
            .fields
            .iter()
            .map(|(k, v)| format!("{}:{}", Value::Str(k.clone()).json(), v.json()))
            .chain(std::iter::once(format!("\"config\":{cfg}")))
            .collect();
        let sep = if i + 1 < records.len() { "," } else { "" };
        writeln!(w, "  {{{}}}{sep}", body.join(","))?;
    }
    writeln!(w, "]")?;
    Ok(())
}
