//! Sectioned `key = value` text format used by the material database and
//! run configs.
//!
//! ```text
//! # comment
//! version = 1
//! [material yig]
//! rho = 5000          # trailing comments allowed
//! ```
//!
//! Keys before the first header belong to an unnamed root section.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    /// First word of the header (`material` in `[material yig]`), empty for root.
    pub kind: String,
    /// Optional second word of the header.
    pub name: Option<String>,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn label(&self) -> String {
        match &self.name {
            Some(n) => format!("{} {}", self.kind, n),
            None => self.kind.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    pub sections: Vec<Section>,
}

impl Document {
    pub fn root(&self) -> Option<&Section> {
        self.sections.iter().find(|s| s.kind.is_empty())
    }

    pub fn sections_of<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Section> + 'a {
        self.sections.iter().filter(move |s| s.kind == kind)
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

pub fn parse(text: &str) -> Result<Document> {
    let mut doc = Document::default();
    let mut current = Section {
        kind: String::new(),
        name: None,
        line: 0,
        entries: Vec::new(),
    };
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let inner = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                line: line_no,
                message: "section header missing closing ']'".into(),
            })?;
            let mut words = inner.split_whitespace();
            let kind = words.next().ok_or_else(|| Error::Parse {
                line: line_no,
                message: "empty section header".into(),
            })?;
            let name = words.next().map(str::to_string);
            if words.next().is_some() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("section header '[{inner}]' has too many words"),
                });
            }
            let finished = std::mem::replace(
                &mut current,
                Section {
                    kind: kind.to_string(),
                    name,
                    line: line_no,
                    entries: Vec::new(),
                },
            );
            if !finished.kind.is_empty() || !finished.entries.is_empty() {
                doc.sections.push(finished);
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            message: format!("expected 'key = value', found '{line}'"),
        })?;
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("invalid key '{key}'"),
            });
        }
        if current.get(key).is_some() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate key '{key}'"),
            });
        }
        current.entries.push(Entry {
            key: key.to_string(),
            value: value.trim().to_string(),
            line: line_no,
        });
    }
    if !current.kind.is_empty() || !current.entries.is_empty() {
        doc.sections.push(current);
    }
    Ok(doc)
}
