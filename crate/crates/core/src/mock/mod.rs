//! Deterministic in-process backends built on a small pixel sandbox.

mod classifier;
mod policy;
pub mod sandbox;
mod world_model;

use std::collections::BTreeMap;

pub use classifier::OracleClassifier;
pub use policy::{
    is_near_miss, ProportionalPolicy, ProportionalSettings, ScriptedPolicy, ZeroPolicy,
};
pub use sandbox::{
    decode_pixels, decode_state, initial_layout, sandbox_render, sandbox_step, DecodeError,
    PixelScene, SandboxParams, SandboxState,
};
pub use world_model::SandboxWorldModel;

/// String-valued backend parameters, as given in `mock:` endpoints or a
/// `--params` file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParamMap(pub BTreeMap<String, String>);

impl ParamMap {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn insert(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.insert(key.to_owned(), value.to_string());
        self
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, String> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| format!("parameter `{key}` has invalid value `{v}`")),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, String> {
        self.parsed(key, default)
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, String> {
        self.parsed(key, default)
    }

    pub fn u32_or(&self, key: &str, default: u32) -> Result<u32, String> {
        self.parsed(key, default)
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, String> {
        self.parsed(key, default)
    }

    /// Builds a map from a flat JSON object; numbers and booleans are stringified.
    pub fn from_json(value: &serde_json::Value) -> Result<Self, String> {
        let obj = value
            .as_object()
            .ok_or_else(|| "parameters must be a JSON object".to_owned())?;
        let mut out = ParamMap::default();
        for (k, v) in obj {
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Bool(b) => b.to_string(),
                _ => return Err(format!("parameter `{k}` must be a string, number or bool")),
            };
            out.0.insert(k.clone(), s);
        }
        Ok(out)
    }
}

impl<const N: usize> From<[(&str, &str); N]> for ParamMap {
    fn from(pairs: [(&str, &str); N]) -> Self {
        ParamMap(
            pairs
                .into_iter()
                .map(|(k, v)| (k.to_owned(), v.to_owned()))
                .collect(),
        )
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over a sequence of byte slices.
pub(crate) fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut h = FNV_OFFSET;
    for part in parts {
        for &b in *part {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(&[b""]), 0xcbf29ce484222325);
        assert_eq!(fnv1a(&[b"a"]), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(&[b"foo", b"bar"]), fnv1a(&[b"foobar"]));
    }

    #[test]
    fn params_from_json() {
        let p = ParamMap::from_json(&serde_json::json!({"a": 0.3, "b": "x", "c": true})).unwrap();
        assert_eq!(p.f64_or("a", 0.0).unwrap(), 0.3);
        assert_eq!(p.get("b"), Some("x"));
        assert!(p.f64_or("b", 0.0).is_err());
        assert!(ParamMap::from_json(&serde_json::json!([1])).is_err());
    }
}
