//! BIO tag codecs and the multi-hot feature rows built from pre-identified
//! basic medical entities.
//!
//! History entities use a 25-tag space (B/I per concept plus O); BME spans
//! use a 15-tag space where a token may carry several tags at once because
//! the two BME groups can overlap. The BME tags one-hot encode into
//! 14-dimensional rows, with the all-zero row standing for O.

use crate::corpus::{BmeConcept, Concept, Document, Entity, Label, Source};
use std::fmt;
use thiserror::Error;

/// Number of distinct history tags: B-\<c\> and I-\<c\> for each of the 12
/// concepts, plus O.
pub const MHE_TAG_COUNT: usize = 25;
/// Number of distinct BME tags including O.
pub const BME_TAG_COUNT: usize = 15;
/// Width of one BME feature row: two bits per BME concept.
pub const BME_FEATURE_DIM: usize = 14;

/// One of the 25 history BIO tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MheTag {
    Outside,
    Begin(Concept),
    Inside(Concept),
}

impl MheTag {
    /// Canonical index: O is 0; concept `k` has B at `1 + 2k`, I at `2 + 2k`.
    pub fn index(self) -> usize {
        match self {
            MheTag::Outside => 0,
            MheTag::Begin(c) => 1 + 2 * c.index(),
            MheTag::Inside(c) => 2 + 2 * c.index(),
        }
    }

    pub fn from_index(i: usize) -> Option<MheTag> {
        match i {
            0 => Some(MheTag::Outside),
            _ if i < MHE_TAG_COUNT => {
                let c = Concept::ALL[(i - 1) / 2];
                Some(if (i - 1).is_multiple_of(2) { MheTag::Begin(c) } else { MheTag::Inside(c) })
            }
            _ => None,
        }
    }

    pub fn concept(self) -> Option<Concept> {
        match self {
            MheTag::Outside => None,
            MheTag::Begin(c) | MheTag::Inside(c) => Some(c),
        }
    }

    pub fn parse(s: &str) -> Option<MheTag> {
        if s == "O" {
            return Some(MheTag::Outside);
        }
        let (kind, name) = s.split_once('-')?;
        let c = Concept::parse(name)?;
        match kind {
            "B" => Some(MheTag::Begin(c)),
            "I" => Some(MheTag::Inside(c)),
            _ => None,
        }
    }
}

impl fmt::Display for MheTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MheTag::Outside => f.write_str("O"),
            MheTag::Begin(c) => write!(f, "B-{c}"),
            MheTag::Inside(c) => write!(f, "I-{c}"),
        }
    }
}

/// Per-token history tags, aligned with `Document::tokens`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSequence {
    pub doc_id: String,
    pub tags: Vec<MheTag>,
}

/// The BME tags of one token: any subset of B/I per BME concept, at most
/// one of the two per concept. Empty set means O.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BmeTagSet(u16);

impl BmeTagSet {
    pub fn set_begin(&mut self, b: BmeConcept) {
        self.0 |= 1 << (2 * b.index());
        self.0 &= !(1 << (2 * b.index() + 1)); // B wins over I
    }

    pub fn set_inside(&mut self, b: BmeConcept) {
        if self.0 & (1 << (2 * b.index())) == 0 {
            self.0 |= 1 << (2 * b.index() + 1);
        }
    }

    pub fn is_outside(self) -> bool {
        self.0 == 0
    }

    /// One-hot encoding: bit `2k` is B of concept `k`, bit `2k + 1` is I.
    pub fn to_feature_vector(self) -> FeatureVector {
        FeatureVector(self.0)
    }
}

/// A 14-component binary row; component `2k` flags B and `2k + 1` flags I
/// of the BME concept at index `k`. All zeros encodes O.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FeatureVector(u16);

impl FeatureVector {
    pub fn get(self, i: usize) -> bool {
        debug_assert!(i < BME_FEATURE_DIM);
        self.0 & (1 << i) != 0
    }

    pub fn ones(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn to_array(self) -> [u8; BME_FEATURE_DIM] {
        let mut a = [0u8; BME_FEATURE_DIM];
        for (i, v) in a.iter_mut().enumerate() {
            *v = u8::from(self.get(i));
        }
        a
    }

    pub fn set_indices(self) -> Vec<usize> {
        (0..BME_FEATURE_DIM).filter(|i| self.get(*i)).collect()
    }
}

#[derive(Debug, Error)]
pub enum BioError {
    #[error("entities overlap after token alignment in '{doc_id}': token {token} claimed by [{a_start}, {a_end}) and [{b_start}, {b_end})")]
    OverlappingEntities {
        doc_id: String,
        token: usize,
        a_start: usize,
        a_end: usize,
        b_start: usize,
        b_end: usize,
    },
    #[error("tag sequence length {tags} does not match document token count {tokens}")]
    LengthMismatch { tags: usize, tokens: usize },
}

/// Converts history entities to per-token BIO tags. Entity boundaries are
/// snapped outward to whole tokens: the first overlapped token gets B, the
/// rest I. Two entities claiming the same token is an error.
pub fn encode_bio(doc: &Document, entities: &[Entity]) -> Result<TagSequence, BioError> {
    let mut tags = vec![MheTag::Outside; doc.tokens.len()];
    let mut owner: Vec<Option<(usize, usize)>> = vec![None; doc.tokens.len()];
    let mut sorted: Vec<&Entity> = entities.iter().collect();
    sorted.sort_by_key(|e| (e.start, e.end));
    for e in sorted {
        let concept = match e.label {
            Label::Mhe(c) => c,
            Label::Bme(_) => continue,
        };
        let range = doc.covering_tokens(e.start, e.end);
        for (k, ti) in range.enumerate() {
            if let Some((a_start, a_end)) = owner[ti] {
                return Err(BioError::OverlappingEntities {
                    doc_id: doc.doc_id.clone(),
                    token: ti,
                    a_start,
                    a_end,
                    b_start: e.start,
                    b_end: e.end,
                });
            }
            owner[ti] = Some((e.start, e.end));
            tags[ti] = if k == 0 { MheTag::Begin(concept) } else { MheTag::Inside(concept) };
        }
    }
    Ok(TagSequence { doc_id: doc.doc_id.clone(), tags })
}

/// A repair applied while decoding an invalid tag sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeWarning {
    pub token: usize,
    pub message: String,
}

/// Entities decoded from a tag sequence plus any repairs performed.
#[derive(Debug, Clone)]
pub struct Decoded {
    pub entities: Vec<Entity>,
    pub warnings: Vec<DecodeWarning>,
}

/// Converts tags back to token-aligned entities. Maximal B,I... runs become
/// one entity spanning the first token's start to the last token's end. A
/// bare I after O or after a different concept starts a new entity; such
/// repairs are reported, never fatal. Decoded entities carry
/// [`Source::Predicted`].
pub fn decode_bio(tags: &TagSequence, doc: &Document) -> Result<Decoded, BioError> {
    if tags.tags.len() != doc.tokens.len() {
        return Err(BioError::LengthMismatch { tags: tags.tags.len(), tokens: doc.tokens.len() });
    }
    let mut entities = Vec::new();
    let mut warnings = Vec::new();
    let mut open: Option<(Concept, usize, usize)> = None; // (concept, start char, end char)
    let flush = |open: &mut Option<(Concept, usize, usize)>, entities: &mut Vec<Entity>| {
        if let Some((c, s, e)) = open.take() {
            entities.push(Entity::new(Label::Mhe(c), s, e, &doc.doc_id, Source::Predicted));
        }
    };
    for (i, tag) in tags.tags.iter().enumerate() {
        let tok = &doc.tokens[i];
        match *tag {
            MheTag::Outside => flush(&mut open, &mut entities),
            MheTag::Begin(c) => {
                flush(&mut open, &mut entities);
                open = Some((c, tok.start, tok.end));
            }
            MheTag::Inside(c) => match open {
                Some((oc, s, _)) if oc == c => open = Some((c, s, tok.end)),
                _ => {
                    flush(&mut open, &mut entities);
                    warnings.push(DecodeWarning {
                        token: i,
                        message: format!("I-{c} without a matching B-{c}; treated as B-{c}"),
                    });
                    open = Some((c, tok.start, tok.end));
                }
            },
        }
    }
    flush(&mut open, &mut entities);
    Ok(Decoded { entities, warnings })
}

/// Per-token BME feature rows. A token covered by several BME concepts
/// sets several bits; B wins over I when one concept covers a token both
/// ways through overlapping spans.
pub fn encode_bme_features(doc: &Document, bme: &[Entity]) -> Vec<FeatureVector> {
    let mut sets = vec![BmeTagSet::default(); doc.tokens.len()];
    let mut sorted: Vec<&Entity> = bme.iter().collect();
    sorted.sort_by_key(|e| (e.start, e.end));
    for e in sorted {
        let concept = match e.label {
            Label::Bme(b) => b,
            Label::Mhe(_) => continue,
        };
        for (k, ti) in doc.covering_tokens(e.start, e.end).enumerate() {
            if k == 0 {
                sets[ti].set_begin(concept);
            } else {
                sets[ti].set_inside(concept);
            }
        }
    }
    sets.into_iter().map(BmeTagSet::to_feature_vector).collect()
}

/// Writes the two-column format: `token<TAB>tag` lines with a blank line
/// between sentences.
pub fn write_tagged_tokens<W: std::io::Write>(
    mut w: W,
    doc: &Document,
    tags: &TagSequence,
) -> std::io::Result<()> {
    for (si, sent) in doc.sentence_token_ranges().into_iter().enumerate() {
        if si > 0 {
            writeln!(w)?;
        }
        for ti in sent {
            writeln!(w, "{}\t{}", doc.token_text(&doc.tokens[ti]), tags.tags[ti])?;
        }
    }
    Ok(())
}

/// Reads the two-column format back into (token text, tag) sentences.
pub fn read_tagged_tokens(input: &str) -> Result<Vec<Vec<(String, MheTag)>>, String> {
    let mut sentences = Vec::new();
    let mut current: Vec<(String, MheTag)> = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        if line.is_empty() {
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        let (tok, tag) = line
            .split_once('\t')
            .ok_or_else(|| format!("line {}: expected token<TAB>tag", lineno + 1))?;
        let tag = MheTag::parse(tag).ok_or_else(|| format!("line {}: bad tag {tag:?}", lineno + 1))?;
        current.push((tok.to_string(), tag));
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    Ok(sentences)
}
