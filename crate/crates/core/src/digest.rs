//! Canonical JSON rendering and SHA-256 digests.
//!
//! The canonical form has object keys in byte order, no whitespace, integers
//! without a fraction and floats in Rust's shortest round-trip notation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq)]
pub enum CanonicalValue {
    Str(String),
    Int(i64),
    UInt(u64),
    Float(f64),
    Bool(bool),
    List(Vec<CanonicalValue>),
    Object(BTreeMap<String, CanonicalValue>),
}

impl CanonicalValue {
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write_to(&mut out);
        out
    }

    fn write_to(&self, out: &mut String) {
        match self {
            CanonicalValue::Str(s) => write_json_string(out, s),
            CanonicalValue::Int(i) => {
                let _ = write!(out, "{i}");
            }
            CanonicalValue::UInt(u) => {
                let _ = write!(out, "{u}");
            }
            CanonicalValue::Float(x) => {
                if x.is_finite() {
                    let _ = write!(out, "{x:?}");
                } else {
                    out.push_str("null");
                }
            }
            CanonicalValue::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            CanonicalValue::List(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    item.write_to(out);
                }
                out.push(']');
            }
            CanonicalValue::Object(map) => {
                out.push('{');
                for (i, (k, v)) in map.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write_json_string(out, k);
                    out.push(':');
                    v.write_to(out);
                }
                out.push('}');
            }
        }
    }
}

fn write_json_string(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn canonical_key_order_and_floats() {
        let mut map = BTreeMap::new();
        map.insert("seed".to_string(), CanonicalValue::UInt(7));
        map.insert("kind".to_string(), CanonicalValue::Str("a\"b".to_string()));
        map.insert("rate".to_string(), CanonicalValue::Float(0.3));
        map.insert("n".to_string(), CanonicalValue::Float(1.0));
        assert_eq!(CanonicalValue::Object(map).render(), r#"{"kind":"a\"b","n":1.0,"rate":0.3,"seed":7}"#);
    }
}
