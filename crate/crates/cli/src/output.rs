use std::fs;
use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use crate::failure::Failure;
use crate::Format;

/// Everything needed to reproduce a report; embedded in every output.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    /// Command line after the program name, verbatim.
    pub args: Vec<String>,
    pub inputs: Vec<String>,
    pub seed: Option<u64>,
    pub output: Option<String>,
    pub format: Format,
    /// Every tolerance and policy in effect, including untouched defaults.
    pub defaults: Value,
    pub threads: Option<usize>,
    pub wall_time_s: f64,
}

/// A report plus, for simulations, the fixed-column CSV row.
pub struct Rendered {
    pub report: Value,
    pub row: Option<Vec<(&'static str, String)>>,
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => map.iter().for_each(|(k, v)| flatten(&key(k), v, out)),
        Value::Array(items) => items
            .iter()
            .enumerate()
            .for_each(|(i, v)| flatten(&key(&i.to_string()), v, out)),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => out.push((prefix.to_string(), String::new())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn csv_error(e: impl std::fmt::Display) -> Failure {
    Failure::input("Io", format!("cannot write CSV: {e}"), Value::Null)
}

pub fn render(manifest: &Manifest, rendered: &Rendered) -> Result<Vec<u8>, Failure> {
    match manifest.format {
        Format::Json => {
            let mut text = serde_json::to_string_pretty(
                &json!({ "manifest": manifest, "report": rendered.report }),
            )
            .expect("reports serialize");
            text.push('\n');
            Ok(text.into_bytes())
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let manifest_json = serde_json::to_string(manifest).expect("manifests serialize");
            match &rendered.row {
                Some(row) => {
                    let mut header: Vec<&str> = row.iter().map(|(k, _)| *k).collect();
                    header.push("manifest");
                    w.write_record(&header).map_err(csv_error)?;
                    let mut values: Vec<&str> = row.iter().map(|(_, v)| v.as_str()).collect();
                    values.push(&manifest_json);
                    w.write_record(&values).map_err(csv_error)?;
                }
                None => {
                    w.write_record(["metric", "value"]).map_err(csv_error)?;
                    let mut rows = Vec::new();
                    flatten("", &rendered.report, &mut rows);
                    flatten(
                        "manifest",
                        &serde_json::to_value(manifest).expect("manifests serialize"),
                        &mut rows,
                    );
                    for (k, v) in rows {
                        w.write_record([k, v]).map_err(csv_error)?;
                    }
                }
            }
            w.into_inner().map_err(csv_error)
        }
    }
}

pub fn write(bytes: &[u8], out: Option<&str>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| {
            Failure::input(
                "Io",
                format!("cannot write {path}: {e}"),
                json!({ "path": path }),
            )
        }),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::input("Io", format!("cannot write to stdout: {e}"), Value::Null)),
    }
}
