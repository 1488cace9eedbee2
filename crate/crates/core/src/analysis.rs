//! Error-association pipelines: entity length, note length, and
//! sectionization.

use crate::corpus::{Concept, Document, Label, SectionGroup};
use crate::matcher::{MatchCategory, MatchDetail, MatchReport};
use crate::report::{format_p, scatter_svg, significance_marker};
use crate::stats::{
    pearson, select_2x2_test, welch_t_test, ContingencyTable, StatsError, SummarySample,
    TestResult,
};
use serde::Deserialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("unknown header group '{0}' (expected cc, hpi, past_history, family_history, social_history)")]
    UnknownHeaderGroup(String),
    #[error("lexicon file is not valid JSON: {0}")]
    BadLexicon(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

// ---------------------------------------------------------------------------
// entity length
// ---------------------------------------------------------------------------

/// One classified entity with its length in covering tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LengthRecord {
    pub category: MatchCategory,
    pub token_length: u32,
}

/// Computes token lengths for classified events: the gold span's covering
/// tokens for exact/relaxed/mismatch/under, the prediction span's for over
/// detections.
pub fn length_records(docs: &BTreeMap<String, Document>, details: &[MatchDetail]) -> Vec<LengthRecord> {
    details
        .iter()
        .filter_map(|d| {
            let doc = docs.get(&d.doc_id)?;
            let tokens = doc.covering_tokens(d.start, d.end).len() as u32;
            Some(LengthRecord { category: d.category, token_length: tokens.max(1) })
        })
        .collect()
}

/// Per-category length summary plus a Welch test against the exact-match
/// reference.
#[derive(Debug, Clone)]
pub struct EntityLengthRow {
    pub category: MatchCategory,
    pub sample: Option<SummarySample>,
    /// `None` for the reference row and for skipped categories.
    pub test: Option<TestResult>,
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct EntityLengthReport {
    pub rows: Vec<EntityLengthRow>,
}

/// Compares entity lengths of each non-exact category against exact
/// matches with Welch's t-test. Categories with fewer than two lengths are
/// reported and skipped.
pub fn entity_length_analysis(records: &[LengthRecord]) -> EntityLengthReport {
    let mut by_cat: BTreeMap<MatchCategory, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_cat.entry(r.category).or_default().push(f64::from(r.token_length));
    }
    let reference = by_cat.get(&MatchCategory::ExactMatch).cloned().unwrap_or_default();
    let ref_sample =
        if reference.len() >= 2 { Some(SummarySample::from_data(&reference)) } else { None };

    let mut rows = Vec::new();
    for cat in MatchCategory::ALL {
        let lengths = by_cat.get(&cat).cloned().unwrap_or_default();
        let sample =
            if lengths.is_empty() { None } else { Some(SummarySample::from_data(&lengths)) };
        if cat == MatchCategory::ExactMatch {
            let note = match &ref_sample {
                Some(_) => Some("reference".to_string()),
                None => Some("skipped: fewer than 2 exact matches".to_string()),
            };
            rows.push(EntityLengthRow { category: cat, sample, test: None, note });
            continue;
        }
        let (test, note) = match (&ref_sample, &sample) {
            (Some(r), Some(s)) if s.n >= 2 => match welch_t_test(r, s) {
                Ok(t) => (Some(t), None),
                Err(StatsError::DegenerateSample) => {
                    (None, Some("skipped: zero variance, different means".to_string()))
                }
                Err(e) => (None, Some(format!("skipped: {e}"))),
            },
            _ => (None, Some("skipped: empty category".to_string())),
        };
        rows.push(EntityLengthRow { category: cat, sample, test, note });
    }
    EntityLengthReport { rows }
}

impl EntityLengthReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,mean,sd,n,t,df,p,note\n");
        for row in &self.rows {
            let (mean, sd, n) = row
                .sample
                .map(|s| (format!("{:.3}", s.mean), format!("{:.3}", s.sd), s.n.to_string()))
                .unwrap_or_default();
            let (t, df, p) = row
                .test
                .as_ref()
                .map(|t| {
                    (
                        format!("{:.4}", t.statistic),
                        t.df.map(|d| format!("{d:.2}")).unwrap_or_default(),
                        format!("{:.6}", t.p_value),
                    )
                })
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{mean},{sd},{n},{t},{df},{p},{}\n",
                row.category.as_str(),
                row.note.as_deref().unwrap_or("")
            ));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Category | Avg | SD | n | p-value |\n|---|---|---|---|---|\n");
        for row in &self.rows {
            let (mean, sd, n) = row
                .sample
                .map(|s| (format!("{:.3}", s.mean), format!("{:.3}", s.sd), s.n.to_string()))
                .unwrap_or(("-".into(), "-".into(), "-".into()));
            let p = match (&row.test, &row.note) {
                (Some(t), _) => format!("{}{}", format_p(t.p_value), significance_marker(t.p_value)),
                (None, Some(note)) => note.clone(),
                (None, None) => String::new(),
            };
            out.push_str(&format!("| {} | {mean} | {sd} | {n} | {p} |\n", row.category.as_str()));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// note length
// ---------------------------------------------------------------------------

/// Per-note tallies feeding the note-length correlations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoteRecord {
    pub doc_id: String,
    /// Tokens in the note.
    pub word_count: u64,
    /// Gold annotations in the note.
    pub gold_count: u64,
    /// em, rm, mm, ud, od.
    pub counts: [u64; 5],
}

/// The eight tallies correlated against note length.
pub const NOTE_CATEGORIES: [&str; 8] = ["em", "rm", "mm", "ud", "od", "mmud", "error", "rm_error"];

impl NoteRecord {
    pub fn category_count(&self, idx: usize) -> u64 {
        let [_, rm, mm, ud, od] = self.counts;
        match idx {
            0..=4 => self.counts[idx],
            5 => mm + ud,
            6 => mm + ud + od,
            7 => rm + mm + ud + od,
            _ => panic!("category index out of range"),
        }
    }

    /// Count divided by the note's gold annotations; can exceed 1.
    pub fn category_rate(&self, idx: usize) -> f64 {
        self.category_count(idx) as f64 / self.gold_count as f64
    }
}

/// Builds per-note records from documents and a merged match report.
pub fn note_records(docs: &BTreeMap<String, Document>, report: &MatchReport) -> Vec<NoteRecord> {
    let per_doc = report.per_document();
    docs.values()
        .map(|doc| {
            let c = per_doc.get(&doc.doc_id).copied().unwrap_or_default();
            NoteRecord {
                doc_id: doc.doc_id.clone(),
                word_count: doc.tokens.len() as u64,
                gold_count: doc.gold.len() as u64,
                counts: [
                    u64::from(c.em),
                    u64::from(c.rm),
                    u64::from(c.mm),
                    u64::from(c.ud),
                    u64::from(c.od),
                ],
            }
        })
        .collect()
}

/// One correlation of note length against a category tally.
#[derive(Debug, Clone)]
pub struct NoteCorrelation {
    pub category: &'static str,
    /// `counts` or `rates`.
    pub basis: &'static str,
    /// `None` when the category column is constant (nothing to correlate).
    pub test: Option<TestResult>,
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct NoteLengthReport {
    pub correlations: Vec<NoteCorrelation>,
}

/// Correlates note word counts against each category's count and rate.
/// Identical word counts across notes are a hard error; a constant
/// category column is reported and skipped.
pub fn note_length_analysis(notes: &[NoteRecord]) -> Result<NoteLengthReport, StatsError> {
    if notes.len() < 3 {
        return Err(StatsError::TooFewPoints(notes.len()));
    }
    let words: Vec<f64> = notes.iter().map(|n| n.word_count as f64).collect();
    let mean = words.iter().sum::<f64>() / words.len() as f64;
    if words.iter().all(|w| *w == mean) {
        return Err(StatsError::ZeroVariance("note word count"));
    }
    let rates_defined = notes.iter().all(|n| n.gold_count > 0);
    let mut correlations = Vec::new();
    for basis in ["counts", "rates"] {
        for (idx, category) in NOTE_CATEGORIES.iter().enumerate() {
            if basis == "rates" && !rates_defined {
                correlations.push(NoteCorrelation {
                    category,
                    basis,
                    test: None,
                    note: Some("skipped: a note has zero gold annotations".to_string()),
                });
                continue;
            }
            let ys: Vec<f64> = if basis == "counts" {
                notes.iter().map(|n| n.category_count(idx) as f64).collect()
            } else {
                notes.iter().map(|n| n.category_rate(idx)).collect()
            };
            let (test, note) = match pearson(&words, &ys) {
                Ok(t) => (Some(t), None),
                Err(StatsError::ZeroVariance(_)) => {
                    (None, Some("skipped: constant across notes".to_string()))
                }
                Err(e) => return Err(e),
            };
            correlations.push(NoteCorrelation { category, basis, test, note });
        }
    }
    Ok(NoteLengthReport { correlations })
}

impl NoteLengthReport {
    pub fn get(&self, basis: &str, category: &str) -> Option<&TestResult> {
        self.correlations
            .iter()
            .find(|c| c.basis == basis && c.category == category)
            .and_then(|c| c.test.as_ref())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("basis,category,r,p,note\n");
        for c in &self.correlations {
            let (r, p) = c
                .test
                .as_ref()
                .map(|t| (format!("{:.5}", t.statistic), format!("{:.5}", t.p_value)))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{r},{p},{}\n",
                c.basis,
                c.category,
                c.note.as_deref().unwrap_or("")
            ));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out =
            String::from("| Basis | Category | r | p-value |\n|---|---|---|---|\n");
        for c in &self.correlations {
            let (r, p) = match (&c.test, &c.note) {
                (Some(t), _) => (
                    format!("{:.5}", t.statistic),
                    format!("{}{}", format_p(t.p_value), significance_marker(t.p_value)),
                ),
                (None, note) => ("-".to_string(), note.clone().unwrap_or_default()),
            };
            out.push_str(&format!("| {} | {} | {r} | {p} |\n", c.basis, c.category));
        }
        out
    }

    /// Scatter plots of word count against error count and error rate.
    pub fn scatter_plots(notes: &[NoteRecord]) -> (String, String) {
        let count_points: Vec<(f64, f64)> = notes
            .iter()
            .map(|n| (n.word_count as f64, n.category_count(6) as f64))
            .collect();
        let rate_points: Vec<(f64, f64)> =
            notes.iter().map(|n| (n.word_count as f64, n.category_rate(6))).collect();
        (
            scatter_svg("Errors vs note length", "words per note", "error count", &count_points),
            scatter_svg("Error rate vs note length", "words per note", "error rate", &rate_points),
        )
    }
}

// ---------------------------------------------------------------------------
// sectionization
// ---------------------------------------------------------------------------

/// Maps each concept group to the headers of its dedicated sections.
#[derive(Debug, Clone)]
pub struct HeaderLexicon {
    map: BTreeMap<SectionGroup, Vec<String>>,
}

impl Default for HeaderLexicon {
    fn default() -> Self {
        let mut map = BTreeMap::new();
        map.insert(SectionGroup::Cc, vec!["CHIEF COMPLAINT".to_string()]);
        map.insert(
            SectionGroup::Hpi,
            vec![
                "HISTORY OF PRESENT ILLNESS".to_string(),
                "BRIEF HISTORY OF PRESENT ILLNESS".to_string(),
                "SUBJECTIVE".to_string(),
            ],
        );
        map.insert(
            SectionGroup::PastHistory,
            vec![
                "PAST MEDICAL HISTORY".to_string(),
                "PAST SURGICAL HISTORY".to_string(),
                "MEDICATIONS".to_string(),
                "CURRENT MEDICATION".to_string(),
                "CURRENT MEDICATIONS".to_string(),
                "ALLERGIES".to_string(),
            ],
        );
        map.insert(SectionGroup::FamilyHistory, vec!["FAMILY HISTORY".to_string()]);
        map.insert(SectionGroup::SocialHistory, vec!["SOCIAL HISTORY".to_string()]);
        HeaderLexicon { map }
    }
}

#[derive(Deserialize)]
struct RawLexicon(BTreeMap<String, Vec<String>>);

impl HeaderLexicon {
    /// Loads a lexicon from JSON: an object mapping group names to header
    /// arrays. Headers are normalized to uppercase.
    pub fn from_json(input: &str) -> Result<HeaderLexicon, AnalysisError> {
        let raw: RawLexicon =
            serde_json::from_str(input).map_err(|e| AnalysisError::BadLexicon(e.to_string()))?;
        let mut map = BTreeMap::new();
        for (name, headers) in raw.0 {
            let group = SectionGroup::ALL
                .iter()
                .copied()
                .find(|g| g.as_str() == name)
                .ok_or_else(|| AnalysisError::UnknownHeaderGroup(name.clone()))?;
            map.insert(
                group,
                headers.iter().map(|h| crate::corpus::normalize_header(h)).collect(),
            );
        }
        Ok(HeaderLexicon { map })
    }

    pub fn headers(&self, group: SectionGroup) -> &[String] {
        self.map.get(&group).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_dedicated(&self, group: SectionGroup, header: Option<&str>) -> bool {
        match header {
            Some(h) => self.headers(group).iter().any(|x| x == h),
            None => false,
        }
    }
}

/// Where a gold entity sits relative to its concept's dedicated sections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionPlacement {
    pub doc_id: String,
    pub group: SectionGroup,
    pub in_dedicated_section: bool,
}

/// Pure placement rule: the section containing the entity start, checked
/// against the group's header set.
pub fn place_entity(
    doc: &Document,
    lexicon: &HeaderLexicon,
    concept: Concept,
    start: usize,
) -> SectionPlacement {
    let group = concept.section_group();
    let header = doc.section_at(start).and_then(|s| s.header.as_deref());
    SectionPlacement {
        doc_id: doc.doc_id.clone(),
        group,
        in_dedicated_section: lexicon.is_dedicated(group, header),
    }
}

/// One group's 2x2 table (matched vs improperly recognized, in vs out of
/// dedicated sections) with its test.
#[derive(Debug, Clone)]
pub struct SegmentationRow {
    pub group: SectionGroup,
    pub table: ContingencyTable,
    pub test: Option<TestResult>,
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SegmentationReport {
    pub rows: Vec<SegmentationRow>,
}

/// Builds the per-group tables from classified gold entities. Each gold
/// entity lands in exactly one cell: matched (exact or relaxed) versus
/// improperly recognized (mismatch or under detection; a gold that is both
/// relaxed-matched and mismatched counts as matched), in versus out of its
/// group's dedicated sections. Over detections have no gold entity and are
/// excluded.
pub fn segmentation_analysis(
    docs: &BTreeMap<String, Document>,
    details: &[MatchDetail],
    lexicon: &HeaderLexicon,
) -> SegmentationReport {
    // (doc, concept label, span) -> best category seen (matched beats mmud)
    let mut per_gold: BTreeMap<(String, Label, usize, usize), bool> = BTreeMap::new();
    for d in details {
        if d.category == MatchCategory::OverDetection {
            continue;
        }
        let matched =
            matches!(d.category, MatchCategory::ExactMatch | MatchCategory::RelaxedMatch);
        per_gold
            .entry((d.doc_id.clone(), d.label, d.start, d.end))
            .and_modify(|m| *m = *m || matched)
            .or_insert(matched);
    }
    let mut cells: BTreeMap<SectionGroup, [u64; 4]> = BTreeMap::new();
    for ((doc_id, label, start, _end), matched) in per_gold {
        let (doc, concept) = match (docs.get(&doc_id), label.as_mhe()) {
            (Some(d), Some(c)) => (d, c),
            _ => continue,
        };
        let placement = place_entity(doc, lexicon, concept, start);
        let entry = cells.entry(placement.group).or_default();
        let idx = match (matched, placement.in_dedicated_section) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        entry[idx] += 1;
    }
    let rows = SectionGroup::ALL
        .iter()
        .filter_map(|g| cells.get(g).map(|c| (*g, *c)))
        .map(|(group, [a, b, c, d])| {
            let table = ContingencyTable::new(a, b, c, d);
            match select_2x2_test(&table) {
                Ok(test) => SegmentationRow { group, table, test: Some(test), note: None },
                Err(e) => SegmentationRow {
                    group,
                    table,
                    test: None,
                    note: Some(format!("skipped: {e}")),
                },
            }
        })
        .collect();
    SegmentationReport { rows }
}

impl SegmentationReport {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("group,in_matched,out_matched,in_mmud,out_mmud,method,statistic,p,note\n");
        for row in &self.rows {
            let (method, stat, p) = row
                .test
                .as_ref()
                .map(|t| (t.method.clone(), format!("{:.4}", t.statistic), format!("{:.6}", t.p_value)))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{method},{stat},{p},{}\n",
                row.group,
                row.table.a,
                row.table.b,
                row.table.c,
                row.table.d,
                row.note.as_deref().unwrap_or("")
            ));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| Group | Matched in/out | MMUD in/out | Method | p-value |\n|---|---|---|---|---|\n",
        );
        for row in &self.rows {
            let (method, p) = match (&row.test, &row.note) {
                (Some(t), _) => (
                    t.method.clone(),
                    format!("{}{}", format_p(t.p_value), significance_marker(t.p_value)),
                ),
                (None, Some(n)) => (String::new(), n.clone()),
                (None, None) => (String::new(), String::new()),
            };
            out.push_str(&format!(
                "| {} | {}/{} | {}/{} | {method} | {p} |\n",
                row.group, row.table.a, row.table.b, row.table.c, row.table.d
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Entity, Source};
    use crate::matcher::classify_details;

    const NOTE: &str = "HISTORY OF PRESENT ILLNESS: She reports chronic migraines for years.\n\
SOCIAL HISTORY: She is a nonsmoker.\n";

    fn fixture_doc() -> Document {
        // gold: PastHistory "chronic migraines" in HPI section,
        //       SocialHistory "nonsmoker" in SOCIAL HISTORY section
        let gold = vec![
            Entity::new(Label::Mhe(Concept::PastHistory), 40, 57, "n1", Source::Gold),
            Entity::new(Label::Mhe(Concept::SocialHistory), 94, 103, "n1", Source::Gold),
        ];
        let doc = Document::new("n1", NOTE, gold, vec![]).unwrap();
        assert_eq!(doc.slice(40, 57), "chronic migraines");
        assert_eq!(doc.slice(94, 103), "nonsmoker");
        doc
    }

    #[test]
    fn placement_follows_lexicon() {
        let doc = fixture_doc();
        let lex = HeaderLexicon::default();
        let social = place_entity(&doc, &lex, Concept::SocialHistory, 94);
        assert!(social.in_dedicated_section);
        let past = place_entity(&doc, &lex, Concept::PastHistory, 40);
        assert!(!past.in_dedicated_section, "past history inside HPI is out of section");
    }

    #[test]
    fn moving_a_header_flips_placement() {
        let doc = fixture_doc();
        let lex = HeaderLexicon::default();
        // same entity text, but the note now opens with the dedicated header
        let moved = format!("PAST MEDICAL HISTORY: {}", &NOTE[28..]);
        let doc2 = Document::new("n2", &moved, vec![], vec![]).unwrap();
        let offset = doc2.text.find("chronic").unwrap();
        assert!(!place_entity(&doc, &lex, Concept::PastHistory, 40).in_dedicated_section);
        assert!(place_entity(&doc2, &lex, Concept::PastHistory, offset).in_dedicated_section);
    }

    #[test]
    fn lexicon_round_trips_json_and_rejects_unknown_groups() {
        let lex = HeaderLexicon::from_json(r#"{"cc": ["REASON FOR VISIT"]}"#).unwrap();
        assert!(lex.is_dedicated(SectionGroup::Cc, Some("REASON FOR VISIT")));
        assert!(!lex.is_dedicated(SectionGroup::Cc, Some("CHIEF COMPLAINT")));
        let err = HeaderLexicon::from_json(r#"{"nope": []}"#).unwrap_err();
        assert!(matches!(err, AnalysisError::UnknownHeaderGroup(_)));
    }

    #[test]
    fn segmentation_counts_each_gold_once() {
        let doc = fixture_doc();
        // prediction overlaps the social-history gold with the right concept
        // but a different span (relaxed) and the past-history gold with the
        // wrong concept (mismatch)
        let preds = vec![
            Entity::new(Label::Mhe(Concept::SocialHistory), 94, 105, "n1", Source::Predicted),
            Entity::new(Label::Mhe(Concept::Cc), 40, 50, "n1", Source::Predicted),
        ];
        let cls = classify_details(&doc.gold, &preds).unwrap();
        let mut docs = BTreeMap::new();
        docs.insert(doc.doc_id.clone(), doc);
        let report = segmentation_analysis(&docs, &cls.details, &HeaderLexicon::default());
        let total: u64 = report
            .rows
            .iter()
            .map(|r| r.table.a + r.table.b + r.table.c + r.table.d)
            .sum();
        assert_eq!(total, 2, "each gold lands in exactly one cell");
        let social = report.rows.iter().find(|r| r.group == SectionGroup::SocialHistory).unwrap();
        assert_eq!((social.table.a, social.table.b, social.table.c, social.table.d), (1, 0, 0, 0));
        let past = report.rows.iter().find(|r| r.group == SectionGroup::PastHistory).unwrap();
        // mismatch only -> improperly recognized, outside its dedicated section
        assert_eq!((past.table.a, past.table.b, past.table.c, past.table.d), (0, 0, 0, 1));
    }

    #[test]
    fn entity_length_degenerate_input_gives_p_one() {
        // every category holds the single length 3
        let records: Vec<LengthRecord> = MatchCategory::ALL
            .iter()
            .flat_map(|c| (0..2).map(|_| LengthRecord { category: *c, token_length: 3 }))
            .collect();
        let report = entity_length_analysis(&records);
        for row in &report.rows {
            if row.category == MatchCategory::ExactMatch {
                continue;
            }
            let t = row.test.as_ref().expect("degenerate equal means still tests");
            assert_eq!(t.p_value, 1.0);
        }
    }

    #[test]
    fn entity_length_separated_populations_are_significant() {
        let mut records = Vec::new();
        for _ in 0..200 {
            records.push(LengthRecord { category: MatchCategory::ExactMatch, token_length: 1 });
            records.push(LengthRecord { category: MatchCategory::ExactMatch, token_length: 3 });
            records.push(LengthRecord { category: MatchCategory::RelaxedMatch, token_length: 4 });
            records.push(LengthRecord { category: MatchCategory::RelaxedMatch, token_length: 6 });
        }
        let report = entity_length_analysis(&records);
        let rm = report
            .rows
            .iter()
            .find(|r| r.category == MatchCategory::RelaxedMatch)
            .unwrap();
        assert!(rm.test.as_ref().unwrap().p_value < 0.001);
    }

    #[test]
    fn entity_length_means_match_recount() {
        let records = vec![
            LengthRecord { category: MatchCategory::ExactMatch, token_length: 1 },
            LengthRecord { category: MatchCategory::ExactMatch, token_length: 2 },
            LengthRecord { category: MatchCategory::ExactMatch, token_length: 4 },
            LengthRecord { category: MatchCategory::UnderDetection, token_length: 7 },
            LengthRecord { category: MatchCategory::UnderDetection, token_length: 9 },
        ];
        let report = entity_length_analysis(&records);
        let em = report.rows.iter().find(|r| r.category == MatchCategory::ExactMatch).unwrap();
        let s = em.sample.unwrap();
        // brute-force recount
        assert!((s.mean - 7.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.n, 3);
        let ud = report.rows.iter().find(|r| r.category == MatchCategory::UnderDetection).unwrap();
        assert!((ud.sample.unwrap().mean - 8.0).abs() < 1e-12);
    }

    #[test]
    fn empty_categories_are_skipped_with_note() {
        let records = vec![
            LengthRecord { category: MatchCategory::ExactMatch, token_length: 1 },
            LengthRecord { category: MatchCategory::ExactMatch, token_length: 2 },
        ];
        let report = entity_length_analysis(&records);
        let od = report.rows.iter().find(|r| r.category == MatchCategory::OverDetection).unwrap();
        assert!(od.test.is_none());
        assert!(od.note.as_deref().unwrap().starts_with("skipped"));
    }

    #[test]
    fn zero_gold_notes_skip_rate_correlations() {
        let mut notes: Vec<NoteRecord> = (0..5)
            .map(|i| NoteRecord {
                doc_id: format!("d{i}"),
                word_count: 100 + i * 37,
                gold_count: 10,
                counts: [i, 1, i % 2, 2, 1],
            })
            .collect();
        notes[2].gold_count = 0;
        let report = note_length_analysis(&notes).unwrap();
        for c in &report.correlations {
            if c.basis == "rates" {
                assert!(c.test.is_none());
                assert!(c.note.as_deref().unwrap().contains("zero gold"));
            } else {
                assert!(c.test.is_some() || c.note.is_some());
            }
        }
    }

    #[test]
    fn note_length_zero_variance_is_reported() {
        let notes: Vec<NoteRecord> = (0..5)
            .map(|i| NoteRecord {
                doc_id: format!("d{i}"),
                word_count: 100,
                gold_count: 10,
                counts: [i, 1, 0, 2, 1],
            })
            .collect();
        assert!(matches!(note_length_analysis(&notes), Err(StatsError::ZeroVariance(_))));
    }

    #[test]
    fn note_rate_arithmetic_matches_published_style() {
        let n = NoteRecord { doc_id: "s".into(), word_count: 708, gold_count: 9, counts: [5, 1, 1, 2, 27] };
        // error = mm + ud + od = 30; 30 / 9 = 333.3%
        assert_eq!(n.category_count(6), 30);
        assert_eq!(crate::report::percent_1dp(n.category_count(6), n.gold_count), "333.3");
    }
}
