//! Deterministic output: every float is written with 17 significant digits
//! ('.' separator, no locale), JSON objects with sorted keys, so identical
//! invocations produce byte-identical files.

use std::fmt;
use std::fs;
use std::path::Path;

use serde_json::Value;

/// Validation failure carrying its machine-parsable prefix; printed as one
/// line on stderr and mapped to exit code 2.
#[derive(Debug)]
pub struct CliError {
    pub prefix: &'static str,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let line = self.message.lines().next().unwrap_or("");
        write!(f, "{}: {}", self.prefix, line)
    }
}

pub fn flag_error(message: impl Into<String>) -> CliError {
    CliError {
        prefix: "E_FLAG",
        message: message.into(),
    }
}

pub fn file_error(message: impl Into<String>) -> CliError {
    CliError {
        prefix: "E_FILE",
        message: message.into(),
    }
}

pub fn json_error(message: impl Into<String>) -> CliError {
    CliError {
        prefix: "E_JSON",
        message: message.into(),
    }
}

pub fn model_error(message: impl Into<String>) -> CliError {
    CliError {
        prefix: "E_MODEL",
        message: message.into(),
    }
}

/// 17 significant digits, scientific notation.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Render a JSON value with fixed float formatting and sorted object keys.
pub fn emit_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, &mut out);
    out
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                out.push_str(&fmt_float(n.as_f64().expect("finite float")));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            // serde_json's default map is ordered by key
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push(':');
                write_value(item, out);
            }
            out.push('}');
        }
    }
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| file_error(format!("{}: {e}", path.display())))
}

pub fn parse_json(path: &Path, text: &str) -> Result<Value, CliError> {
    serde_json::from_str(text).map_err(|e| json_error(format!("{}: {e}", path.display())))
}

pub fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content).map_err(|e| file_error(format!("{}: {e}", path.display())))
}

/// Shared numeric flag validation: dt > 0, t_final >= dt, ntraj >= 1, tol > 0.
/// Negated comparisons so NaN flags are rejected too.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate_numeric(dt: f64, t_final: f64, ntraj: usize, tol: f64) -> Result<(), CliError> {
    if !(dt > 0.0) {
        return Err(flag_error("dt must be positive"));
    }
    if !(t_final >= dt) {
        return Err(flag_error("t-final must be at least dt"));
    }
    if ntraj < 1 {
        return Err(flag_error("ntraj must be at least 1"));
    }
    if !(tol > 0.0) {
        return Err(flag_error("tol must be positive"));
    }
    Ok(())
}
