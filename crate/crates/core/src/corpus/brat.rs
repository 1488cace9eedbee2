//! Converter for brat-style standoff annotation files.
//!
//! Each text-bound annotation line has the shape
//! `T1<TAB>Label start end<TAB>surface text`; offsets are character
//! offsets into the companion `.txt` file. Lines starting with other
//! annotation ids (relations, notes) are skipped.

use super::{CorpusError, Entity, Label, Source};
use std::collections::BTreeMap;

/// Maps annotation labels to entity labels. Defaults to the canonical
/// lower-snake names; extend or replace entries for corpora using other
/// label vocabularies.
#[derive(Debug, Clone)]
pub struct BratLabelMap {
    map: BTreeMap<String, Label>,
}

impl Default for BratLabelMap {
    fn default() -> Self {
        let mut map = BTreeMap::new();
        for c in crate::corpus::Concept::ALL {
            map.insert(c.as_str().to_string(), Label::Mhe(c));
        }
        for b in crate::corpus::BmeConcept::ALL {
            map.insert(b.as_str().to_string(), Label::Bme(b));
        }
        BratLabelMap { map }
    }
}

impl BratLabelMap {
    pub fn insert(&mut self, from: &str, to: Label) {
        self.map.insert(from.to_string(), to);
    }

    pub fn resolve(&self, label: &str) -> Option<Label> {
        self.map.get(label).copied()
    }
}

/// Parses the annotation file against its document text. Offsets must
/// agree with the quoted surface text.
pub fn parse_brat(
    doc_id: &str,
    text: &str,
    ann: &str,
    map: &BratLabelMap,
) -> Result<Vec<Entity>, CorpusError> {
    let chars: Vec<char> = text.chars().collect();
    let mut entities = Vec::new();
    for (lineno, line) in ann.lines().enumerate() {
        if line.trim().is_empty() || !line.starts_with('T') {
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let id = fields.next().unwrap_or_default().to_string();
        let (body, surface) = match (fields.next(), fields.next()) {
            (Some(b), Some(s)) => (b, s),
            _ => {
                return Err(CorpusError::MalformedInput {
                    line: lineno + 1,
                    column: 1,
                    message: format!("annotation line needs 3 tab-separated fields: {line:?}"),
                })
            }
        };
        let mut parts = body.split_whitespace();
        let label_str = parts.next().unwrap_or_default();
        let start: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CorpusError::MalformedInput {
                line: lineno + 1,
                column: 1,
                message: "missing or non-numeric start offset".to_string(),
            })?;
        let end: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CorpusError::MalformedInput {
                line: lineno + 1,
                column: 1,
                message: "missing or non-numeric end offset".to_string(),
            })?;
        let label = map
            .resolve(label_str)
            .ok_or_else(|| CorpusError::UnknownConcept(label_str.to_string()))?;
        if start >= end || end > chars.len() {
            return Err(CorpusError::OffsetOutOfRange {
                doc_id: doc_id.to_string(),
                start,
                end,
                len: chars.len(),
            });
        }
        let actual: String = chars[start..end].iter().collect();
        if actual != surface {
            return Err(CorpusError::SurfaceMismatch {
                id,
                expected: surface.to_string(),
                actual,
            });
        }
        entities.push(Entity::new(label, start, end, doc_id, Source::Gold));
    }
    Ok(entities)
}

/// Emits entities in the annotation line format, numbering them T1, T2, ...
pub fn emit_brat(text: &str, entities: &[Entity]) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut sorted: Vec<&Entity> = entities.iter().collect();
    sorted.sort_by_key(|e| (e.start, e.end, e.label));
    let mut out = String::new();
    for (i, e) in sorted.iter().enumerate() {
        let surface: String = chars[e.start..e.end].iter().collect();
        out.push_str(&format!("T{}\t{} {} {}\t{}\n", i + 1, e.label, e.start, e.end, surface));
    }
    out
}
