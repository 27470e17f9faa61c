// SPDX-License-Identifier: MIT OR Apache-2.0

//! Deterministic JSON emission.
//!
//! Result files must be byte-identical across runs with identical seeds, so
//! serialization goes through an explicit value tree: object fields keep
//! insertion order, floats are printed with 17 significant digits
//! (`{:.16e}`), and nothing depends on hash-map iteration order.

/// JSON value; `Obj` preserves field insertion order. Only the shapes the
/// result schema uses are represented.
#[derive(Debug, Clone)]
pub enum Json {
    UInt(u64),
    Float(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

impl Json {
    pub fn obj() -> Json {
        Json::Obj(Vec::new())
    }

    /// Appends a field. Panics when `self` is not an object; field names are
    /// compile-time constants, so that is a programming error.
    pub fn push(&mut self, key: &str, value: Json) -> &mut Json {
        match self {
            Json::Obj(fields) => fields.push((key.to_string(), value)),
            _ => panic!("push on non-object JSON value"),
        }
        self
    }

    pub fn floats(values: &[f64]) -> Json {
        Json::Arr(values.iter().map(|&v| Json::Float(v)).collect())
    }

    pub fn uints(values: &[usize]) -> Json {
        Json::Arr(values.iter().map(|&v| Json::UInt(v as u64)).collect())
    }

    /// Serializes the tree: objects indented two spaces per level, arrays on
    /// a single line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }

    fn write(&self, out: &mut String, indent: usize) {
        match self {
            Json::UInt(v) => out.push_str(&v.to_string()),
            Json::Float(v) => out.push_str(&float_token(*v)),
            Json::Str(s) => write_escaped(out, s),
            Json::Arr(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.write(out, indent);
                }
                out.push(']');
            }
            Json::Obj(fields) => {
                if fields.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push('{');
                let pad = "  ".repeat(indent + 1);
                for (i, (key, value)) in fields.iter().enumerate() {
                    out.push_str(if i > 0 { ",\n" } else { "\n" });
                    out.push_str(&pad);
                    write_escaped(out, key);
                    out.push_str(": ");
                    value.write(out, indent + 1);
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent));
                out.push('}');
            }
        }
    }
}

/// 17 significant digits. JSON has no token for non-finite numbers, so those
/// become `null` rather than producing an unparseable file.
pub fn float_token(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn write_escaped(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                out.push_str(&format!("\\u{:04x}", c as u32));
            }
            c => out.push(c),
        }
    }
    out.push('"');
}
