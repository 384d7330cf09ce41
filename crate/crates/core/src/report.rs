//! Report plumbing: number formatting, run manifests, and CSV preambles.
//!
//! All numbers written by the CLI carry at most 12 significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const SIG_DIGITS: usize = 12;

/// `%.12g`-style rendering.
pub fn sig12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIG_DIGITS as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// JSON number rounded to 12 significant digits; non-finite values become
/// the strings `"inf"`, `"-inf"` or `"nan"`.
pub fn num(x: f64) -> Value {
    let text = sig12(x);
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => json!(v),
        _ => Value::String(text),
    }
}

pub fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

/// Provenance carried by every report. The timestamp lives only in the
/// sidecar `manifest.json`, so report files stay byte-identical across
/// reruns with the same inputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: BTreeMap<String, InputRecord>,
    pub lock_digest: Option<String>,
    pub onomasticon_checksum: Option<String>,
    pub seed: u64,
    pub parameters: BTreeMap<String, Value>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            lock_digest: None,
            onomasticon_checksum: None,
            seed,
            parameters: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn add_input(&mut self, role: &str, path: &Path, bytes: &[u8]) {
        self.inputs.insert(
            role.to_string(),
            InputRecord {
                path: path.display().to_string(),
                sha256: sha256_hex(bytes),
            },
        );
    }

    pub fn param(&mut self, key: &str, value: Value) {
        self.parameters.insert(key.to_string(), value);
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("manifest serializes")
    }

    /// Manifest plus timestamp (seconds since the epoch; honours
    /// `SOURCE_DATE_EPOCH`).
    pub fn with_timestamp(&self) -> Value {
        let ts = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.parse::<u64>().ok())
            .unwrap_or_else(|| {
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            });
        let mut v = self.to_value();
        v["timestamp"] = json!(ts);
        v
    }

    /// `#`-prefixed metadata lines for CSV outputs.
    pub fn csv_preamble(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# command: {}", self.command);
        let _ = writeln!(out, "# tool_version: {}", self.tool_version);
        let _ = writeln!(out, "# seed: {}", self.seed);
        let _ = writeln!(
            out,
            "# lock_digest: {}",
            self.lock_digest.as_deref().unwrap_or("-")
        );
        let _ = writeln!(
            out,
            "# onomasticon_checksum: {}",
            self.onomasticon_checksum.as_deref().unwrap_or("-")
        );
        for (role, rec) in &self.inputs {
            let _ = writeln!(out, "# input {role}: {} sha256={}", rec.path, rec.sha256);
        }
        for (k, v) in &self.parameters {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out
    }
}

pub fn to_json_text(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("values serialize");
    s.push('\n');
    s
}

/// Appends CSV records (header first) below a preamble.
pub fn csv_text(preamble: &str, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 records");
    format!("{preamble}{body}")
}
