use std::fs;

use avar_core::chain::CtmcModel;
use nalgebra::DVector;
use serde::de::DeserializeOwned;
use serde_json::json;

use crate::failure::Failure;

pub fn read_text(path: &str) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| {
        Failure::input(
            "Io",
            format!("cannot read {path}: {e}"),
            json!({ "path": path }),
        )
    })
}

/// Byte offset of a 1-based `(line, column)` position in `text`.
pub fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let before: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    before + column.saturating_sub(1)
}

/// Parses JSON from `path`. Syntax errors name the byte offset; schema
/// errors (missing or unknown fields, wrong types) name the position too.
pub fn read_json<T: DeserializeOwned>(path: &str) -> Result<T, Failure> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| {
        let kind = if e.is_data() {
            "InvalidInput"
        } else {
            "MalformedJson"
        };
        Failure::input(
            kind,
            format!("{path}: {e}"),
            json!({
                "path": path,
                "line": e.line(),
                "column": e.column(),
                "byte_offset": byte_offset(&text, e.line(), e.column()),
            }),
        )
    })
}

pub fn parse_list(raw: &str, what: &str) -> Result<Vec<f64>, Failure> {
    raw.split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|_| {
                Failure::input(
                    "InvalidInput",
                    format!("{what}: {t:?} is not a number"),
                    json!({ "value": raw }),
                )
            })
        })
        .collect()
}

pub fn observable(
    raw: Option<&str>,
    from_file: Option<Vec<f64>>,
    n: usize,
) -> Result<DVector<f64>, Failure> {
    let values = match (raw, from_file) {
        (Some(r), _) => parse_list(r, "--f")?,
        (None, Some(v)) => v,
        (None, None) => {
            return Err(Failure::usage(
                "no observable: pass --f or add \"f\" to the model file".into(),
            ));
        }
    };
    if values.len() != n {
        return Err(avar_core::Error::DimensionMismatch {
            expected: n,
            got: values.len(),
        }
        .into());
    }
    Ok(DVector::from_vec(values))
}

/// States named by index or label; mixing both is allowed.
pub fn omega(raw: &str, model: &CtmcModel) -> Result<Vec<usize>, Failure> {
    raw.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t.parse::<usize>() {
            Ok(i) => Ok(i),
            Err(_) => model.state_index(t).ok_or_else(|| {
                Failure::input(
                    "UnknownLabel",
                    format!("no state labelled {t:?}"),
                    json!({ "label": t }),
                )
            }),
        })
        .collect()
}

pub fn read_manifest_args(path: &str) -> Result<Vec<String>, Failure> {
    let text = read_text(path)?;
    let report: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
        Failure::input(
            "MalformedJson",
            format!("{path}: {e}"),
            json!({ "path": path, "byte_offset": byte_offset(&text, e.line(), e.column()) }),
        )
    })?;
    let args = report["manifest"]["args"].as_array().ok_or_else(|| {
        Failure::input(
            "InvalidInput",
            format!("{path} has no manifest.args"),
            json!({ "path": path }),
        )
    })?;
    args.iter()
        .map(|a| {
            a.as_str().map(str::to_string).ok_or_else(|| {
                Failure::input(
                    "InvalidInput",
                    "manifest args must be strings".into(),
                    json!({}),
                )
            })
        })
        .collect()
}
