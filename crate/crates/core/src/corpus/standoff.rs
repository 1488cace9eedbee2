//! Canonical standoff JSON interchange format.
//!
//! One document is a JSON object `{doc_id, text, gold, predicted}` where
//! the entity arrays hold `{concept, start, end}` with character offsets
//! and lower-snake concept names. A corpus file is a JSON-Lines stream of
//! such objects. The emitter is canonical: fixed key order, entities
//! sorted by `(start, end, concept)`, no insignificant whitespace.

use super::{CorpusError, Document, Entity, Label, Source};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

#[derive(Serialize, Deserialize)]
struct RawDocument {
    doc_id: String,
    text: String,
    #[serde(default)]
    gold: Vec<RawEntity>,
    #[serde(default)]
    predicted: Vec<RawEntity>,
}

#[derive(Serialize, Deserialize)]
struct RawEntity {
    concept: String,
    start: usize,
    end: usize,
}

fn convert_entities(
    raw: Vec<RawEntity>,
    doc_id: &str,
    source: Source,
) -> Result<Vec<Entity>, CorpusError> {
    raw.into_iter()
        .map(|r| {
            let label = Label::parse(&r.concept)
                .ok_or_else(|| CorpusError::UnknownConcept(r.concept.clone()))?;
            Ok(Entity::new(label, r.start, r.end, doc_id, source))
        })
        .collect()
}

/// Parses one standoff JSON document. Rejects malformed JSON, unknown
/// concept names, and out-of-range offsets.
pub fn parse_standoff_json(input: &str) -> Result<Document, CorpusError> {
    let raw: RawDocument = serde_json::from_str(input).map_err(|e| CorpusError::MalformedInput {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let gold = convert_entities(raw.gold, &raw.doc_id, Source::Gold)?;
    let predicted = convert_entities(raw.predicted, &raw.doc_id, Source::Predicted)?;
    Document::new(&raw.doc_id, &raw.text, gold, predicted)
}

fn sorted_raw(entities: &[Entity]) -> Vec<RawEntity> {
    let mut es: Vec<&Entity> = entities.iter().collect();
    es.sort_by_key(|e| (e.start, e.end, e.label));
    es.iter()
        .map(|e| RawEntity { concept: e.label.as_str().to_string(), start: e.start, end: e.end })
        .collect()
}

/// Serializes a document to its canonical single-line JSON form.
pub fn document_to_standoff_string(doc: &Document) -> String {
    let raw = RawDocument {
        doc_id: doc.doc_id.clone(),
        text: doc.text.clone(),
        gold: sorted_raw(&doc.gold),
        predicted: sorted_raw(&doc.predicted),
    };
    serde_json::to_string(&raw).expect("document serialization cannot fail")
}

/// Reads a JSON-Lines corpus, reporting the first failing line.
pub fn read_corpus_jsonl<R: BufRead>(reader: R) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = parse_standoff_json(&line).map_err(|e| match e {
            CorpusError::MalformedInput { column, message, .. } => {
                CorpusError::MalformedInput { line: lineno + 1, column, message }
            }
            other => other,
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Writes documents as canonical JSON-Lines.
pub fn write_corpus_jsonl<W: Write>(mut writer: W, docs: &[Document]) -> Result<(), CorpusError> {
    for doc in docs {
        writeln!(writer, "{}", document_to_standoff_string(doc))?;
    }
    Ok(())
}
