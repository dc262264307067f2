//! Plain-text rendering of a JSON report: one `key: value` line per scalar,
//! nested structures indented by two spaces.

use std::fmt::Write;

use serde_json::Value;

pub fn human(document: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, document, 0);
    out
}

fn scalar(value: &Value) -> Option<String> {
    match value {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Array(items) if items.is_empty() => Some("(none)".into()),
        Value::Array(items) if items.iter().all(|v| matches!(v, Value::String(_) | Value::Number(_))) => {
            Some(items.iter().map(|v| scalar(v).unwrap_or_default()).collect::<Vec<_>>().join("  "))
        }
        Value::Object(map) if map.is_empty() => Some("(none)".into()),
        _ => None,
    }
}

fn write_value(out: &mut String, value: &Value, depth: usize) {
    let pad = "  ".repeat(depth);
    match value {
        Value::Object(map) => {
            for (key, v) in map {
                match scalar(v) {
                    Some(s) => writeln!(out, "{pad}{key}: {s}").unwrap(),
                    None => {
                        writeln!(out, "{pad}{key}:").unwrap();
                        write_value(out, v, depth + 1);
                    }
                }
            }
        }
        Value::Array(items) => {
            for item in items {
                match scalar(item) {
                    Some(s) => writeln!(out, "{pad}- {s}").unwrap(),
                    None => {
                        writeln!(out, "{pad}-").unwrap();
                        write_value(out, item, depth + 1);
                    }
                }
            }
        }
        other => writeln!(out, "{pad}{}", scalar(other).unwrap_or_default()).unwrap(),
    }
}
