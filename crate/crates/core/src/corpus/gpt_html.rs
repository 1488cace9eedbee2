//! Ingestion of span-markup output produced by prompted generative models.
//!
//! The expected markup wraps each entity in a `<span>` tag whose single
//! `class` attribute names the entity type in the prompt's dotted
//! camelCase vocabulary (`cc`, `hpi.location`, ..., `socialHistory`).
//! Tags must not nest.

use super::{Concept, CorpusError, Entity, Label, Source};

/// Prompt class names in concept order.
const CLASS_NAMES: [(&str, Concept); 12] = [
    ("cc", Concept::Cc),
    ("hpi.location", Concept::HpiLocation),
    ("hpi.quality", Concept::HpiQuality),
    ("hpi.severity", Concept::HpiSeverity),
    ("hpi.duration", Concept::HpiDuration),
    ("hpi.timing", Concept::HpiTiming),
    ("hpi.context", Concept::HpiContext),
    ("hpi.modifyingFactors", Concept::HpiModifyingFactor),
    ("hpi.assocSignsAndSymptoms", Concept::HpiAssocSignsSymptoms),
    ("pastHistory", Concept::PastHistory),
    ("familyHistory", Concept::FamilyHistory),
    ("socialHistory", Concept::SocialHistory),
];

fn class_to_concept(class: &str) -> Option<Concept> {
    CLASS_NAMES.iter().find(|(name, _)| *name == class).map(|(_, c)| *c)
}

fn concept_to_class(concept: Concept) -> &'static str {
    CLASS_NAMES.iter().find(|(_, c)| *c == concept).map(|(n, _)| *n).unwrap()
}

/// Strips span markup, returning the plain text and one entity per span
/// with character offsets into the plain text.
pub fn parse_gpt_html(doc_id: &str, marked: &str) -> Result<(String, Vec<Entity>), CorpusError> {
    let chars: Vec<char> = marked.chars().collect();
    let mut plain = String::new();
    let mut plain_len = 0usize; // chars written so far
    let mut entities = Vec::new();
    let mut open: Option<(usize, Concept, usize)> = None; // (plain start, concept, tag pos)
    let mut i = 0usize;

    while i < chars.len() {
        if chars[i] == '<' {
            let rest: String = chars[i..].iter().collect();
            if let Some(tag) = rest.strip_prefix("</span>") {
                let _ = tag;
                match open.take() {
                    Some((start, concept, _)) => {
                        entities.push(Entity::new(
                            Label::Mhe(concept),
                            start,
                            plain_len,
                            doc_id,
                            Source::Predicted,
                        ));
                    }
                    None => {
                        return Err(CorpusError::MalformedInput {
                            line: 1,
                            column: i + 1,
                            message: "closing </span> without an open tag".to_string(),
                        })
                    }
                }
                i += "</span>".len();
                continue;
            }
            let is_span_open = rest
                .strip_prefix("<span")
                .is_some_and(|r| r.starts_with(|c: char| c.is_whitespace() || c == '>'));
            if is_span_open {
                if open.is_some() {
                    return Err(CorpusError::NestedTag(i));
                }
                let close = rest.find('>').ok_or(CorpusError::UnclosedTag(i))?;
                let tag: String = chars[i..i + close + 1].iter().collect();
                let class = extract_class(&tag).ok_or_else(|| CorpusError::MalformedInput {
                    line: 1,
                    column: i + 1,
                    message: format!("span tag without class attribute: {tag}"),
                })?;
                let concept =
                    class_to_concept(&class).ok_or(CorpusError::UnknownClass(class.clone()))?;
                open = Some((plain_len, concept, i));
                i += close + 1;
                continue;
            }
        }
        plain.push(chars[i]);
        plain_len += 1;
        i += 1;
    }
    if let Some((_, _, pos)) = open {
        return Err(CorpusError::UnclosedTag(pos));
    }
    Ok((plain, entities))
}

fn extract_class(tag: &str) -> Option<String> {
    let idx = tag.find("class=")?;
    let rest = &tag[idx + "class=".len()..];
    let quote = rest.chars().next()?;
    if quote != '"' && quote != '\'' {
        return None;
    }
    let inner = &rest[1..];
    let end = inner.find(quote)?;
    Some(inner[..end].to_string())
}

/// Inverse of [`parse_gpt_html`] for non-overlapping entities sorted or
/// sortable by span.
pub fn render_gpt_html(text: &str, entities: &[Entity]) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut sorted: Vec<&Entity> = entities.iter().collect();
    sorted.sort_by_key(|e| (e.start, e.end));
    let mut out = String::new();
    let mut pos = 0usize;
    for e in sorted {
        let concept = match e.label {
            Label::Mhe(c) => c,
            Label::Bme(_) => continue,
        };
        out.extend(&chars[pos..e.start]);
        out.push_str(&format!("<span class=\"{}\">", concept_to_class(concept)));
        out.extend(&chars[e.start..e.end]);
        out.push_str("</span>");
        pos = e.end;
    }
    out.extend(&chars[pos..]);
    out
}
