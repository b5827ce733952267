//! Line-oriented `[section]` / `key = value` text, shared by config files,
//! manifests, and reports.
//!
//! Blank lines and `#` comments are ignored on parse. Section and key
//! order is preserved, so rendering is deterministic.

use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sections {
    sections: Vec<(String, Vec<(String, String)>)>,
}

impl Sections {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::new();
        let mut current: Option<usize> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                out.sections.push((name.trim().to_string(), Vec::new()));
                current = Some(out.sections.len() - 1);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected `key = value` or `[section]`, found `{line}`",
                    lineno + 1
                )));
            };
            let Some(idx) = current else {
                return Err(Error::Config(format!(
                    "line {}: `{line}` appears before any [section]",
                    lineno + 1
                )));
            };
            out.sections[idx]
                .1
                .push((key.trim().to_string(), value.trim().to_string()));
        }
        Ok(out)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, pairs) in &self.sections {
            out.push('[');
            out.push_str(name);
            out.push_str("]\n");
            for (k, v) in pairs {
                out.push_str(k);
                out.push_str(" = ");
                out.push_str(v);
                out.push('\n');
            }
        }
        out
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().map(|(n, _)| n.as_str())
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.iter().any(|(n, _)| n == name)
    }

    pub fn section(&self, name: &str) -> Option<&[(String, String)]> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, pairs)| pairs.as_slice())
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.section(section)?
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Append a section (created empty if absent) and set a key in it,
    /// replacing an existing value.
    pub fn set(&mut self, section: &str, key: &str, value: impl ToString) {
        let idx = match self.sections.iter().position(|(n, _)| n == section) {
            Some(i) => i,
            None => {
                self.sections.push((section.to_string(), Vec::new()));
                self.sections.len() - 1
            }
        };
        let pairs = &mut self.sections[idx].1;
        match pairs.iter_mut().find(|(k, _)| k == key) {
            Some((_, v)) => *v = value.to_string(),
            None => pairs.push((key.to_string(), value.to_string())),
        }
    }
}

/// FNV-1a content hash, rendered as 16 hex digits. Used to fingerprint
/// resolved configurations in every output artifact.
pub fn content_hash(text: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Render a list of ids as a comma-joined string ("" for empty).
pub fn join_ids(ids: &[usize]) -> String {
    ids.iter()
        .map(|id| id.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Parse a comma-joined id list ("" yields empty).
pub fn split_ids(text: &str) -> Result<Vec<usize>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad id `{t}` in id list")))
        })
        .collect()
}
