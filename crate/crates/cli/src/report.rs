//! Versioned report envelope and its two renderings.

use serde::Serialize;
use serde_json::{json, Map, Value};

pub const FORMAT: &str = "relaxflow-report";
pub const VERSION: u32 = 1;

/// One command's output: a JSON document with a fixed envelope.
///
/// ```text
/// { "format": "relaxflow-report", "version": 1, "command": ..., "case": ...,
///   "degenerate": ..., "result": { ... } }
/// ```
pub struct Report {
    pub command: &'static str,
    pub case: Option<String>,
    pub degenerate: bool,
    pub result: Value,
}

impl Report {
    pub fn new(command: &'static str, case: Option<String>, degenerate: bool, result: impl Serialize) -> Self {
        let result = serde_json::to_value(result).expect("report values serialize");
        Self { command, case, degenerate, result }
    }

    pub fn to_value(&self) -> Value {
        json!({
            "format": FORMAT,
            "version": VERSION,
            "command": self.command,
            "case": self.case,
            "degenerate": self.degenerate,
            "result": self.result,
        })
    }

    pub fn render(&self, pretty: bool) -> String {
        let value = self.to_value();
        if pretty {
            let mut out = String::new();
            render_human(&value, 0, &mut out);
            out
        } else {
            let mut s = serde_json::to_string_pretty(&value).expect("report values serialize");
            s.push('\n');
            s
        }
    }
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => format_float(f),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

fn format_float(f: f64) -> String {
    if f == 0.0 || (1e-3..1e6).contains(&f.abs()) {
        format!("{f:.6}").trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{f:.4e}")
    }
}

fn inline(items: &[Value]) -> String {
    let parts: Vec<String> = items.iter().map(scalar).collect();
    format!("[{}]", parts.join(", "))
}

fn render_map(map: &Map<String, Value>, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    for (key, v) in map {
        match v {
            Value::Array(items) if items.iter().all(is_scalar) => {
                out.push_str(&format!("{pad}{key}: {}\n", inline(items)));
            }
            v if is_scalar(v) => out.push_str(&format!("{pad}{key}: {}\n", scalar(v))),
            v => {
                out.push_str(&format!("{pad}{key}:\n"));
                render_human(v, depth + 1, out);
            }
        }
    }
}

fn render_human(value: &Value, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match value {
        Value::Object(map) => render_map(map, depth, out),
        Value::Array(items) if items.iter().all(is_scalar) => out.push_str(&format!("{pad}{}\n", inline(items))),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str(&format!("{pad}(none)\n"));
            }
            for (k, item) in items.iter().enumerate() {
                match item {
                    Value::Object(map) => {
                        out.push_str(&format!("{pad}- #{k}\n"));
                        render_map(map, depth + 1, out);
                    }
                    other if is_scalar(other) => out.push_str(&format!("{pad}- {}\n", scalar(other))),
                    other => {
                        out.push_str(&format!("{pad}- #{k}\n"));
                        render_human(other, depth + 1, out);
                    }
                }
            }
        }
        v => out.push_str(&format!("{pad}{}\n", scalar(v))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_is_versioned() {
        let r = Report::new("identities", None, false, json!({"worst": 0.0}));
        let v: Value = serde_json::from_str(&r.render(false)).unwrap();
        assert_eq!(v["format"], FORMAT);
        assert_eq!(v["version"], VERSION);
        assert_eq!(v["result"]["worst"], 0.0);
    }

    #[test]
    fn human_rendering_flattens_nesting() {
        let r = Report::new("pf", Some("c".into()), true, json!({"status": "converged", "trace": [1.0, 0.5], "buses": [{"id": 1}]}));
        let text = r.render(true);
        assert!(text.contains("status: converged"));
        assert!(text.contains("trace: [1, 0.5]"));
        assert!(text.contains("- #0\n      id: 1"));
    }

    #[test]
    fn float_formatting() {
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(1.25), "1.25");
        assert_eq!(format_float(3.5e-9), "3.5000e-9");
    }
}
