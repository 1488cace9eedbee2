//! Data model for clinical notes and the annotations layered on them.
//!
//! A [`Document`] owns the raw note text plus everything derived from it:
//! tokens, sections, and the gold/predicted entity lists. All offsets in
//! this crate are **character** offsets (Unicode scalar values), matching
//! the convention of standoff annotation tooling; `Document` keeps a
//! char-to-byte map so slicing stays cheap.

mod brat;
mod gpt_html;
mod section;
mod standoff;
mod tokenize;

pub use brat::{emit_brat, parse_brat, BratLabelMap};
pub use gpt_html::{parse_gpt_html, render_gpt_html};
pub use section::{normalize_header, sectionize};
pub use standoff::{
    document_to_standoff_string, parse_standoff_json, read_corpus_jsonl, write_corpus_jsonl,
};
pub use tokenize::tokenize;

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// The twelve patient-history concepts: chief complaint, the eight
/// history-of-present-illness subconcepts, and past/family/social history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Concept {
    Cc,
    HpiLocation,
    HpiQuality,
    HpiSeverity,
    HpiDuration,
    HpiTiming,
    HpiContext,
    HpiModifyingFactor,
    HpiAssocSignsSymptoms,
    PastHistory,
    FamilyHistory,
    SocialHistory,
}

impl Concept {
    pub const ALL: [Concept; 12] = [
        Concept::Cc,
        Concept::HpiLocation,
        Concept::HpiQuality,
        Concept::HpiSeverity,
        Concept::HpiDuration,
        Concept::HpiTiming,
        Concept::HpiContext,
        Concept::HpiModifyingFactor,
        Concept::HpiAssocSignsSymptoms,
        Concept::PastHistory,
        Concept::FamilyHistory,
        Concept::SocialHistory,
    ];

    /// Canonical lower-snake name used in the standoff JSON format.
    pub fn as_str(self) -> &'static str {
        match self {
            Concept::Cc => "cc",
            Concept::HpiLocation => "hpi_location",
            Concept::HpiQuality => "hpi_quality",
            Concept::HpiSeverity => "hpi_severity",
            Concept::HpiDuration => "hpi_duration",
            Concept::HpiTiming => "hpi_timing",
            Concept::HpiContext => "hpi_context",
            Concept::HpiModifyingFactor => "hpi_modifying_factor",
            Concept::HpiAssocSignsSymptoms => "hpi_assoc_signs_symptoms",
            Concept::PastHistory => "past_history",
            Concept::FamilyHistory => "family_history",
            Concept::SocialHistory => "social_history",
        }
    }

    pub fn parse(s: &str) -> Option<Concept> {
        Concept::ALL.iter().copied().find(|c| c.as_str() == s)
    }

    /// Position in [`Concept::ALL`].
    pub fn index(self) -> usize {
        Concept::ALL.iter().position(|c| *c == self).unwrap()
    }

    /// The section group the concept conventionally lives in. All eight
    /// HPI subconcepts fold into a single HPI group.
    pub fn section_group(self) -> SectionGroup {
        match self {
            Concept::Cc => SectionGroup::Cc,
            Concept::PastHistory => SectionGroup::PastHistory,
            Concept::FamilyHistory => SectionGroup::FamilyHistory,
            Concept::SocialHistory => SectionGroup::SocialHistory,
            _ => SectionGroup::Hpi,
        }
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Five coarse groups used by the segmentation analysis; each group has a
/// set of dedicated section headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionGroup {
    Cc,
    Hpi,
    PastHistory,
    FamilyHistory,
    SocialHistory,
}

impl SectionGroup {
    pub const ALL: [SectionGroup; 5] = [
        SectionGroup::Cc,
        SectionGroup::Hpi,
        SectionGroup::PastHistory,
        SectionGroup::FamilyHistory,
        SectionGroup::SocialHistory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SectionGroup::Cc => "cc",
            SectionGroup::Hpi => "hpi",
            SectionGroup::PastHistory => "past_history",
            SectionGroup::FamilyHistory => "family_history",
            SectionGroup::SocialHistory => "social_history",
        }
    }
}

impl fmt::Display for SectionGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The seven basic medical entity types pre-identified by an external
/// extractor and consumed here as features. Group 1 covers
/// problem/test/treatment/drug; group 2 covers body location, severity,
/// and temporal. Spans from different groups may overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BmeConcept {
    Problem,
    Test,
    Treatment,
    Drug,
    BodyLocation,
    Severity,
    Temporal,
}

impl BmeConcept {
    /// Canonical order; this fixes the bit layout of BME feature vectors.
    pub const ALL: [BmeConcept; 7] = [
        BmeConcept::Problem,
        BmeConcept::Test,
        BmeConcept::Treatment,
        BmeConcept::Drug,
        BmeConcept::BodyLocation,
        BmeConcept::Severity,
        BmeConcept::Temporal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BmeConcept::Problem => "problem",
            BmeConcept::Test => "test",
            BmeConcept::Treatment => "treatment",
            BmeConcept::Drug => "drug",
            BmeConcept::BodyLocation => "body_location",
            BmeConcept::Severity => "severity",
            BmeConcept::Temporal => "temporal",
        }
    }

    pub fn parse(s: &str) -> Option<BmeConcept> {
        BmeConcept::ALL.iter().copied().find(|c| c.as_str() == s)
    }

    /// Position in [`BmeConcept::ALL`].
    pub fn index(self) -> usize {
        BmeConcept::ALL.iter().position(|c| *c == self).unwrap()
    }

    pub fn group(self) -> u8 {
        match self {
            BmeConcept::Problem | BmeConcept::Test | BmeConcept::Treatment | BmeConcept::Drug => 1,
            BmeConcept::BodyLocation | BmeConcept::Severity | BmeConcept::Temporal => 2,
        }
    }
}

impl fmt::Display for BmeConcept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An entity label: either one of the twelve history concepts or one of
/// the seven basic medical entity types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Mhe(Concept),
    Bme(BmeConcept),
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Mhe(c) => c.as_str(),
            Label::Bme(b) => b.as_str(),
        }
    }

    /// Parses a canonical lower-snake label name (MHE names win on the
    /// disjoint sets; the two sets do not collide).
    pub fn parse(s: &str) -> Option<Label> {
        Concept::parse(s)
            .map(Label::Mhe)
            .or_else(|| BmeConcept::parse(s).map(Label::Bme))
    }

    pub fn as_mhe(self) -> Option<Concept> {
        match self {
            Label::Mhe(c) => Some(c),
            Label::Bme(_) => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Label::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown concept: {s}")))
    }
}

/// Whether an entity comes from the reference annotation or a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Gold,
    Predicted,
}

/// A concept-labeled character span `[start, end)` of one document.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Entity {
    pub label: Label,
    pub start: usize,
    pub end: usize,
    pub doc_id: String,
    pub source: Source,
}

impl Entity {
    pub fn new(label: Label, start: usize, end: usize, doc_id: &str, source: Source) -> Entity {
        Entity { label, start, end, doc_id: doc_id.to_string(), source }
    }

    /// Strict character-range intersection; touching spans do not overlap.
    pub fn overlaps(&self, other: &Entity) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn same_span(&self, other: &Entity) -> bool {
        self.start == other.start && self.end == other.end
    }
}

/// A token: offsets into the owning document plus its position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub start: usize,
    pub end: usize,
    pub index: usize,
}

/// A headed (or leading headerless) segment of a note. The section spans
/// `[header_start, body_end)`; the body is `[body_start, body_end)` and
/// excludes the header text and its trailing colon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    /// Normalized header (uppercased, whitespace collapsed); `None` for
    /// the headerless text before the first header.
    pub header: Option<String>,
    pub header_start: usize,
    pub body_start: usize,
    pub body_end: usize,
}

impl Section {
    pub fn contains(&self, offset: usize) -> bool {
        offset >= self.header_start && offset < self.body_end
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed input at line {line}, column {column}: {message}")]
    MalformedInput { line: usize, column: usize, message: String },
    #[error("offset range [{start}, {end}) out of bounds for document '{doc_id}' of length {len}")]
    OffsetOutOfRange { doc_id: String, start: usize, end: usize, len: usize },
    #[error("unknown concept '{0}'")]
    UnknownConcept(String),
    #[error("surface text mismatch for annotation {id}: expected {expected:?}, document has {actual:?}")]
    SurfaceMismatch { id: String, expected: String, actual: String },
    #[error("unclosed span tag opened at character {0}")]
    UnclosedTag(usize),
    #[error("unknown span class '{0}'")]
    UnknownClass(String),
    #[error("nested span tag at character {0}")]
    NestedTag(usize),
    #[error("gold entities overlap in document '{doc_id}': [{a_start}, {a_end}) and [{b_start}, {b_end})")]
    OverlappingGold { doc_id: String, a_start: usize, a_end: usize, b_start: usize, b_end: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A clinical note with its derived tokens and sections plus the gold and
/// predicted entity lists. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub sections: Vec<Section>,
    pub gold: Vec<Entity>,
    pub predicted: Vec<Entity>,
    /// Byte offset of each char, plus a final sentinel at `text.len()`.
    char_to_byte: Vec<usize>,
}

impl Document {
    /// Builds a document, deriving tokens and sections and validating
    /// entity offsets and the gold non-overlap invariant.
    pub fn new(
        doc_id: &str,
        text: &str,
        gold: Vec<Entity>,
        predicted: Vec<Entity>,
    ) -> Result<Document, CorpusError> {
        let mut char_to_byte: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        char_to_byte.push(text.len());
        let len = char_to_byte.len() - 1;
        for e in gold.iter().chain(predicted.iter()) {
            if e.start >= e.end || e.end > len {
                return Err(CorpusError::OffsetOutOfRange {
                    doc_id: doc_id.to_string(),
                    start: e.start,
                    end: e.end,
                    len,
                });
            }
        }
        let mut mhe_gold: Vec<&Entity> =
            gold.iter().filter(|e| matches!(e.label, Label::Mhe(_))).collect();
        mhe_gold.sort_by_key(|e| (e.start, e.end));
        for w in mhe_gold.windows(2) {
            if w[0].overlaps(w[1]) {
                return Err(CorpusError::OverlappingGold {
                    doc_id: doc_id.to_string(),
                    a_start: w[0].start,
                    a_end: w[0].end,
                    b_start: w[1].start,
                    b_end: w[1].end,
                });
            }
        }
        let tokens = tokenize(text);
        let sections = sectionize(text);
        Ok(Document {
            doc_id: doc_id.to_string(),
            text: text.to_string(),
            tokens,
            sections,
            gold,
            predicted,
            char_to_byte,
        })
    }

    /// Document length in characters.
    pub fn char_len(&self) -> usize {
        self.char_to_byte.len() - 1
    }

    /// Slices the text by character offsets.
    pub fn slice(&self, start: usize, end: usize) -> &str {
        &self.text[self.char_to_byte[start]..self.char_to_byte[end]]
    }

    pub fn token_text(&self, token: &Token) -> &str {
        self.slice(token.start, token.end)
    }

    /// Index range of tokens a span overlaps (an entity covers every token
    /// it overlaps).
    pub fn covering_tokens(&self, start: usize, end: usize) -> std::ops::Range<usize> {
        let lo = self.tokens.partition_point(|t| t.end <= start);
        let hi = self.tokens.partition_point(|t| t.start < end);
        lo..hi.max(lo)
    }

    /// The section containing a character offset, if any.
    pub fn section_at(&self, offset: usize) -> Option<&Section> {
        self.sections.iter().find(|s| s.contains(offset))
    }

    /// Token index ranges of sentences. A sentence boundary falls after a
    /// period token followed by whitespace (or end of text) and at
    /// newlines; this is the batching unit for the tagger and the blank
    /// line unit of the two-column tag format.
    pub fn sentence_token_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let chars: Vec<char> = self.text.chars().collect();
        let mut ranges = Vec::new();
        let mut sent_start = 0usize;
        for (i, tok) in self.tokens.iter().enumerate() {
            let gap_has_newline = if i + 1 < self.tokens.len() {
                chars[tok.end..self.tokens[i + 1].start].contains(&'\n')
            } else {
                true
            };
            let period_break = self.token_text(tok) == "."
                && (tok.end == self.char_len() || chars[tok.end].is_whitespace());
            if gap_has_newline || period_break || i + 1 == self.tokens.len() {
                ranges.push(sent_start..i + 1);
                sent_start = i + 1;
            }
        }
        ranges
    }
}
