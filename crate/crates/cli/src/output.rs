use std::io::Write;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Significant digits kept in every printed number.
pub const DIGITS: usize = 12;

pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", DIGITS - 1, x).parse().unwrap_or(x)
}

/// Rounds every float in `v` to `DIGITS` significant digits.
pub fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64");
            *v = serde_json::Number::from_f64(round_sig(x)).map_or(Value::Null, Value::Number);
        }
        Value::Array(xs) => xs.iter_mut().for_each(round_value),
        Value::Object(m) => m.values_mut().for_each(round_value),
        _ => {}
    }
}

fn flatten_into(prefix: &str, v: &Value, out: &mut Map<String, Value>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_into(&key, x, out);
            }
        }
        Value::Array(xs) => {
            for (i, x) in xs.iter().enumerate() {
                flatten_into(&format!("{prefix}.{i}"), x, out);
            }
        }
        _ => {
            out.insert(prefix.to_string(), v.clone());
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Rows for CSV: the `rows` array when the result has one, else the
/// flattened result as a single row.
pub fn write_csv<W: Write>(w: W, result: &Value) -> Result<(), CliError> {
    let rows: Vec<Map<String, Value>> = match result.get("rows").and_then(Value::as_array) {
        Some(rows) => rows
            .iter()
            .map(|r| {
                let mut m = Map::new();
                flatten_into("", r, &mut m);
                m
            })
            .collect(),
        None => {
            let mut m = Map::new();
            flatten_into("", result, &mut m);
            vec![m]
        }
    };
    let mut header: Vec<String> = Vec::new();
    for r in &rows {
        for k in r.keys() {
            if !header.contains(k) {
                header.push(k.clone());
            }
        }
    }
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(&header)?;
    for r in &rows {
        wr.write_record(header.iter().map(|k| r.get(k).map(cell).unwrap_or_default()))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn render(report: &Value, format: Format) -> Result<Vec<u8>, CliError> {
    let mut report = report.clone();
    round_value(&mut report);
    let mut buf = Vec::new();
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut buf, &report)?;
            buf.push(b'\n');
        }
        Format::Csv => write_csv(&mut buf, &report["result"])?,
    }
    Ok(buf)
}
