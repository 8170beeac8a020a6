//! Plain-text `key = value` documents used for calibration, constants and config.
//!
//! ```text
//! # comment
//! format = objrestore-constants
//! version = 1
//! tv.c = 0.9
//! ```
//!
//! Blank lines and `#` comments are ignored, keys are unique and consist of
//! ASCII alphanumerics plus `.`, `_` and `-`. Every document carries a
//! `format` and an integer `version` so readers can refuse files they do not
//! understand.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvDocument {
    entries: BTreeMap<String, String>,
}

fn valid_key(k: &str) -> bool {
    !k.is_empty()
        && k.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b"._-".contains(&b))
}

impl KvDocument {
    pub fn new(format: &str, version: u32) -> Self {
        let mut doc = KvDocument::default();
        doc.set("format", format);
        doc.set("version", version);
        doc
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut offset = 0;
        for (lineno, raw) in text.split('\n').enumerate() {
            let line_offset = offset;
            offset += raw.len() + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::parse(
                    line_offset,
                    format!("line {}: expected `key = value`", lineno + 1),
                )
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !valid_key(k) {
                return Err(Error::parse(
                    line_offset,
                    format!("line {}: invalid key {k:?}", lineno + 1),
                ));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::parse(
                    line_offset,
                    format!("line {}: duplicate key {k:?}", lineno + 1),
                ));
            }
        }
        Ok(KvDocument { entries })
    }

    /// Parses and checks the `format` tag and that `version` is supported.
    pub fn parse_versioned(text: &str, format: &str, max_version: u32) -> Result<Self> {
        let doc = Self::parse(text)?;
        match doc.get("format") {
            Some(f) if f == format => {}
            Some(f) => {
                return Err(Error::parse(
                    0,
                    format!("expected format {format:?}, found {f:?}"),
                ))
            }
            None => return Err(Error::parse(0, "missing `format` key")),
        }
        let version: u32 = doc.require("version")?;
        if version == 0 || version > max_version {
            return Err(Error::parse(
                0,
                format!("unsupported {format} version {version}"),
            ));
        }
        Ok(doc)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get_parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::parse(0, format!("key {key:?}: cannot parse {v:?}"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get_parsed(key)?
            .ok_or_else(|| Error::parse(0, format!("missing key {key:?}")))
    }

    pub fn set(&mut self, key: &str, value: impl std::fmt::Display) {
        debug_assert!(valid_key(key));
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn keys_with_prefix<'a>(
        &'a self,
        prefix: &'a str,
    ) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.entries
            .iter()
            .filter(move |(k, _)| k.starts_with(prefix))
            .map(move |(k, v)| (&k[prefix.len()..], v.as_str()))
    }

    /// Serialises with `format` and `version` first, remaining keys sorted.
    pub fn to_text(&self, header: &str) -> String {
        let mut out = String::new();
        for line in header.lines() {
            let _ = writeln!(out, "# {line}");
        }
        for key in ["format", "version"] {
            if let Some(v) = self.get(key) {
                let _ = writeln!(out, "{key} = {v}");
            }
        }
        for (k, v) in &self.entries {
            if k != "format" && k != "version" {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let mut doc = KvDocument::new("demo", 2);
        doc.set("a.b", 1.5);
        doc.set("name", "x y");
        let text = doc.to_text("demo file");
        let back = KvDocument::parse_versioned(&text, "demo", 2).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.require::<f64>("a.b").unwrap(), 1.5);
    }

    #[test]
    fn rejects_malformed() {
        assert!(KvDocument::parse("novalue").is_err());
        assert!(KvDocument::parse("a = 1\na = 2").is_err());
        assert!(KvDocument::parse("bad key = 1").is_err());
        assert!(KvDocument::parse_versioned("format = x\nversion = 9", "x", 1).is_err());
        assert!(KvDocument::parse_versioned("format = y\nversion = 1", "x", 1).is_err());
    }

    #[test]
    fn comments_and_blank_lines() {
        let doc = KvDocument::parse("# hi\n\n k = v # trailing\n").unwrap();
        assert_eq!(doc.get("k"), Some("v"));
    }
}
