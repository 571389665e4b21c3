use serde::Serialize;
use serde_json::{Map, Number, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Significant digits kept in every emitted number.
pub const SIGNIFICANT_DIGITS: usize = 12;

pub const ENGINE: &str = concat!("cakeshare ", env!("CARGO_PKG_VERSION"));

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits; `-0` becomes `0`.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    let r: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Shortest decimal for the rounded value, never in exponent form.
pub fn fmt_num(x: f64) -> String {
    format!("{}", round_sig(x))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Rounds every float in a JSON tree.
pub fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"));
            Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_value).collect()),
        Value::Object(map) => Value::Object(
            map.into_iter()
                .map(|(k, v)| (k, round_value(v)))
                .collect::<Map<String, Value>>(),
        ),
        other => other,
    }
}

/// One command's result, in machine form plus a human summary.
#[derive(Debug, Clone)]
pub struct Report {
    pub scenario: String,
    pub command: String,
    pub input_digest: String,
    pub options: Map<String, Value>,
    pub sections: Map<String, Value>,
    pub human: Vec<String>,
}

impl Report {
    pub fn new(scenario: &str, command: &str, source: &str) -> Self {
        Self {
            scenario: scenario.to_string(),
            command: command.to_string(),
            input_digest: format!("sha256:{}", sha256_hex(source.as_bytes())),
            options: Map::new(),
            sections: Map::new(),
            human: Vec::new(),
        }
    }

    pub fn option(&mut self, key: &str, value: impl Serialize) {
        self.options.insert(
            key.to_string(),
            serde_json::to_value(value).expect("serializable"),
        );
    }

    pub fn section(&mut self, key: &str, value: impl Serialize) -> Result<(), CliError> {
        let v = serde_json::to_value(value).map_err(|e| CliError::Compute(e.to_string()))?;
        self.sections.insert(key.to_string(), v);
        Ok(())
    }

    pub fn line(&mut self, text: impl Into<String>) {
        self.human.push(text.into());
    }

    pub fn to_value(&self) -> Value {
        let mut root = Map::new();
        root.insert("engine".into(), Value::String(ENGINE.into()));
        root.insert("scenario".into(), Value::String(self.scenario.clone()));
        root.insert("command".into(), Value::String(self.command.clone()));
        root.insert(
            "input_digest".into(),
            Value::String(self.input_digest.clone()),
        );
        root.insert("options".into(), Value::Object(self.options.clone()));
        for (k, v) in &self.sections {
            root.insert(k.clone(), v.clone());
        }
        round_value(Value::Object(root))
    }

    /// Pretty JSON with a trailing newline.
    pub fn machine(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("json");
        s.push('\n');
        s
    }

    pub fn human(&self) -> String {
        let mut out = format!(
            "{} · {} · {}\n",
            self.scenario,
            self.command,
            &self.input_digest[..self.input_digest.len().min(19)]
        );
        for l in &self.human {
            out.push_str(l);
            out.push('\n');
        }
        out
    }
}
