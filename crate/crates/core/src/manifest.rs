//! Flat `key = value` configuration files and run manifests.
//!
//! Config syntax: one `key = value` per line, `#` starts a comment, blank
//! lines are ignored. A repeated key accumulates values (e.g. several `s`).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Config {
    pub entries: BTreeMap<String, Vec<String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("config line {}: expected key = value", i + 1)))?;
            let k = k.trim();
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(Error::Parse(format!("config line {}: bad key {k:?}", i + 1)));
            }
            entries.entry(k.to_string()).or_default().push(v.trim().to_string());
        }
        Ok(Config { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Last value given for `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).and_then(|v| v.last()).map(String::as_str)
    }

    pub fn get_all(&self, key: &str) -> &[String] {
        self.entries.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Parse(format!("config key {key}: cannot parse {v:?}"))),
        }
    }

    pub fn set(&mut self, key: &str, values: Vec<String>) {
        self.entries.insert(key.to_string(), values);
    }

    /// Canonical text: sorted keys, one line per value.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, vs) in &self.entries {
            for v in vs {
                out.push_str(k);
                out.push_str(" = ");
                out.push_str(v);
                out.push('\n');
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub wall_clock_s: f64,
    pub edges: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub config: Config,
    pub master_seed: u64,
    pub version: String,
    pub outputs: BTreeMap<String, String>,
    /// Per-experiment extras, e.g. the `W` truncation rule.
    pub extra: BTreeMap<String, serde_json::Value>,
    pub telemetry: Telemetry,
}

impl RunManifest {
    /// The run id hashes the command, resolved config and seed, so equal
    /// inputs give equal ids.
    pub fn new(command: &str, config: Config, master_seed: u64) -> Self {
        let run_id = io::hash_str(&format!("{command}\n{master_seed}\n{}", config.to_text()));
        RunManifest {
            run_id,
            command: command.to_string(),
            config,
            master_seed,
            version: io::ARTIFACT_VERSION.to_string(),
            outputs: BTreeMap::new(),
            extra: BTreeMap::new(),
            telemetry: Telemetry::default(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
