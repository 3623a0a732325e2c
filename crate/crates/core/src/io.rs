//! Output formatting shared by every exporter: floats at 17 significant
//! digits, params hashes, JSON Lines and CSV helpers.

use std::io::Write;

use serde::ser::{Serialize, Serializer};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Version string embedded in every output.
pub const ARTIFACT_VERSION: &str = concat!("lrp-", env!("CARGO_PKG_VERSION"));

/// Formats a float with 17 significant digits (round-trips every `f64`).
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// `f64` wrapper that serializes as a JSON number with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F17(pub f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return serializer.serialize_none();
        }
        let raw = RawValue::from_string(fmt_f64(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

/// Serde adapter: `#[serde(serialize_with = "io::ser_f64")]`.
pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    F17(*x).serialize(s)
}

pub fn ser_vec_f64<S: Serializer>(xs: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&F17(*x))?;
    }
    seq.end()
}

pub fn ser_opt_f64<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => F17(*v).serialize(s),
        None => s.serialize_none(),
    }
}

/// First 16 hex digits of SHA-256 over the canonical parameter text.
pub fn params_hash(params: &ModelParams) -> String {
    hash_str(&params.canonical_string())
}

pub fn hash_str(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Writes one JSON value per line.
pub fn write_jsonl<W: Write, T: Serialize>(mut w: W, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Minimal CSV table: header plus string rows, with a leading comment line
/// carrying provenance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub comment: Option<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            comment: None,
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_comment(mut self, c: impl Into<String>) -> Self {
        self.comment = Some(c.into());
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_string(&self) -> String {
        let mut out = String::new();
        if let Some(c) = &self.comment {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_string().as_bytes())?;
        Ok(())
    }

    /// Parses text written by [`CsvTable::to_string`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().peekable();
        let mut comment = None;
        if let Some(l) = lines.peek() {
            if let Some(c) = l.strip_prefix("# ") {
                comment = Some(c.to_string());
                lines.next();
            }
        }
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Parse("csv: missing header".into()))?
            .split(',')
            .map(str::to_string)
            .collect();
        let rows = lines
            .filter(|l| !l.is_empty())
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect();
        Ok(CsvTable {
            comment,
            header,
            rows,
        })
    }
}

/// Provenance line placed at the top of CSV outputs.
pub fn provenance_comment(params: &ModelParams, seed_label: &str) -> String {
    format!(
        "params_hash={} seed={} version={}",
        params_hash(params),
        seed_label,
        ARTIFACT_VERSION
    )
}

/// Extracts `params_hash=...` from a provenance comment.
pub fn parse_params_hash(comment: &str) -> Option<&str> {
    comment
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("params_hash="))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, std::f64::consts::PI, 1e-300, 123456789.125, -2.5] {
            let s = fmt_f64(x);
            let digits: String = s
                .split('e')
                .next()
                .unwrap()
                .chars()
                .filter(|c| c.is_ascii_digit())
                .collect();
            assert_eq!(digits.len(), 17, "{s}");
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn f17_in_json() {
        let v = serde_json::to_string(&vec![F17(0.5), F17(2.0)]).unwrap();
        assert_eq!(v, "[5.0000000000000000e-1,2.0000000000000000e0]");
        let back: Vec<f64> = serde_json::from_str(&v).unwrap();
        assert_eq!(back, vec![0.5, 2.0]);
    }

    #[test]
    fn csv_round_trip_with_provenance() {
        let p = ModelParams::new(1, 1.5, 1.0).unwrap();
        let mut t = CsvTable::new(["k", "value"]).with_comment(provenance_comment(&p, "1:0"));
        t.push(vec!["0".into(), fmt_f64(1.5)]);
        let back = CsvTable::parse(&t.to_string()).unwrap();
        assert_eq!(back, t);
        assert_eq!(
            parse_params_hash(back.comment.as_deref().unwrap()),
            Some(params_hash(&p).as_str())
        );
    }

    #[test]
    fn hash_depends_on_params() {
        let a = ModelParams::new(1, 1.5, 1.0).unwrap();
        let b = ModelParams::new(1, 1.6, 1.0).unwrap();
        assert_ne!(params_hash(&a), params_hash(&b));
        assert_eq!(params_hash(&a).len(), 16);
    }
}
