//! Line-oriented `[section]` / `key = value` text used by the network and
//! codebook files.
//!
//! Floats are written with 17 digits after the leading one, which is enough
//! for a bit-exact round trip of any finite `f64`.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, Default)]
pub struct Document {
    pub header: Vec<Entry>,
    pub sections: Vec<Section>,
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.17e}")
}

pub fn fmt_f64s(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ")
}

impl Document {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = Document::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::parse(line, content, "unterminated section header"))?;
                doc.sections.push(Section {
                    name: name.trim().to_string(),
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::parse(line, content, "expected `key = value`"))?;
            let entry = Entry {
                key: key.trim().to_string(),
                value: value.trim().to_string(),
                line,
            };
            match doc.sections.last_mut() {
                Some(section) => section.entries.push(entry),
                None => doc.header.push(entry),
            }
        }
        Ok(doc)
    }

    pub fn section(&self, name: &str) -> Result<&Section> {
        self.sections
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::parse(0, format!("[{name}]"), "missing section"))
    }

    pub fn sections_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Section> {
        self.sections.iter().filter(move |s| s.name.starts_with(prefix))
    }

    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|e| e.key == key)
            .map(|e| e.value.as_str())
    }
}

impl Section {
    pub fn get(&self, key: &str) -> Result<&Entry> {
        self.entries.iter().find(|e| e.key == key).ok_or_else(|| {
            Error::parse(self.line, format!("{}.{key}", self.name), "missing field")
        })
    }
}

impl Entry {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::parse(self.line, self.key.clone(), message)
    }

    pub fn usize(&self) -> Result<usize> {
        self.value
            .parse()
            .map_err(|e| self.err(format!("expected unsigned integer: {e}")))
    }

    pub fn u64(&self) -> Result<u64> {
        self.value
            .parse()
            .map_err(|e| self.err(format!("expected unsigned integer: {e}")))
    }

    pub fn f64(&self) -> Result<f64> {
        let x: f64 = self
            .value
            .parse()
            .map_err(|e| self.err(format!("expected number: {e}")))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(self.err("value is not finite"))
        }
    }

    pub fn f64s(&self, expected: usize) -> Result<Vec<f64>> {
        let xs = self
            .value
            .split_whitespace()
            .enumerate()
            .map(|(i, tok)| {
                let x: f64 = tok
                    .parse()
                    .map_err(|e| self.err(format!("item {i}: expected number: {e}")))?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(self.err(format!("item {i}: value is not finite")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if xs.len() != expected {
            return Err(self.err(format!("expected {expected} numbers, found {}", xs.len())));
        }
        Ok(xs)
    }

    pub fn bits(&self, expected: usize) -> Result<Vec<u8>> {
        let bits: Vec<u8> = self
            .value
            .split_whitespace()
            .map(|tok| match tok {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(self.err(format!("expected 0 or 1, found `{other}`"))),
            })
            .collect::<Result<_>>()?;
        if bits.len() != expected {
            return Err(self.err(format!("expected {expected} entries, found {}", bits.len())));
        }
        Ok(bits)
    }
}
