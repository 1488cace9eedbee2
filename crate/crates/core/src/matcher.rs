//! Five-category span matching between gold annotations and predictions,
//! plus count/rate table aggregation.
//!
//! Category rules (overlap means nonempty character intersection; touching
//! spans do not overlap):
//!
//! * a gold with no overlapping prediction is one under detection;
//! * a gold with a same-concept, identical-span prediction is one exact
//!   match;
//! * otherwise a gold with any same-concept overlapping prediction is one
//!   relaxed match;
//! * additionally, a non-exact-matched gold overlapping any
//!   different-concept prediction is one mismatch (this can co-occur with
//!   a relaxed match, so category sums can exceed the gold count);
//! * a prediction overlapping no gold is one over detection.
//!
//! Exact/relaxed/mismatch/under counts attribute to the gold's concept;
//! over detections attribute to the prediction's concept. Predictions are
//! deduplicated by (concept, span) first; the duplicate count is reported
//! separately.

use crate::corpus::{Entity, Label};
use crate::report::percent_1dp;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// The five matching scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchCategory {
    ExactMatch,
    RelaxedMatch,
    Mismatch,
    UnderDetection,
    OverDetection,
}

impl MatchCategory {
    pub const ALL: [MatchCategory; 5] = [
        MatchCategory::ExactMatch,
        MatchCategory::RelaxedMatch,
        MatchCategory::Mismatch,
        MatchCategory::UnderDetection,
        MatchCategory::OverDetection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MatchCategory::ExactMatch => "exact_match",
            MatchCategory::RelaxedMatch => "relaxed_match",
            MatchCategory::Mismatch => "mismatch",
            MatchCategory::UnderDetection => "under_detection",
            MatchCategory::OverDetection => "over_detection",
        }
    }

    /// Mismatches and under detections: gold entities recognized
    /// improperly.
    pub fn is_mmud(self) -> bool {
        matches!(self, MatchCategory::Mismatch | MatchCategory::UnderDetection)
    }

    /// The error set: mismatches, under detections, and over detections.
    pub fn is_error(self) -> bool {
        self.is_mmud() || self == MatchCategory::OverDetection
    }
}

/// Per-(document, concept) counts of the five categories.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CategoryCounts {
    pub em: u32,
    pub rm: u32,
    pub mm: u32,
    pub ud: u32,
    pub od: u32,
}

impl CategoryCounts {
    pub fn add(&mut self, cat: MatchCategory) {
        match cat {
            MatchCategory::ExactMatch => self.em += 1,
            MatchCategory::RelaxedMatch => self.rm += 1,
            MatchCategory::Mismatch => self.mm += 1,
            MatchCategory::UnderDetection => self.ud += 1,
            MatchCategory::OverDetection => self.od += 1,
        }
    }

    pub fn merge(&mut self, other: &CategoryCounts) {
        self.em += other.em;
        self.rm += other.rm;
        self.mm += other.mm;
        self.ud += other.ud;
        self.od += other.od;
    }

    pub fn mmud(&self) -> u32 {
        self.mm + self.ud
    }

    pub fn error(&self) -> u32 {
        self.mm + self.ud + self.od
    }

    pub fn rm_plus_error(&self) -> u32 {
        self.rm + self.error()
    }

    pub fn get(&self, cat: MatchCategory) -> u32 {
        match cat {
            MatchCategory::ExactMatch => self.em,
            MatchCategory::RelaxedMatch => self.rm,
            MatchCategory::Mismatch => self.mm,
            MatchCategory::UnderDetection => self.ud,
            MatchCategory::OverDetection => self.od,
        }
    }
}

/// Aggregated category counts keyed by (doc_id, concept), with the number
/// of duplicate predictions dropped before classification.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchReport {
    pub counts: BTreeMap<(String, Label), CategoryCounts>,
    pub duplicate_predictions: u32,
}

impl MatchReport {
    /// Injects externally tallied counts (e.g. published evaluation
    /// tables) for rate rendering.
    pub fn from_counts(doc_id: &str, counts: BTreeMap<Label, CategoryCounts>) -> MatchReport {
        MatchReport {
            counts: counts.into_iter().map(|(l, c)| ((doc_id.to_string(), l), c)).collect(),
            duplicate_predictions: 0,
        }
    }

    /// Associative merge of per-document reports.
    pub fn merge(&mut self, other: &MatchReport) {
        for (key, c) in &other.counts {
            self.counts.entry(key.clone()).or_default().merge(c);
        }
        self.duplicate_predictions += other.duplicate_predictions;
    }

    pub fn total(&self, cat: MatchCategory) -> u32 {
        self.counts.values().map(|c| c.get(cat)).sum()
    }

    pub fn per_concept(&self) -> BTreeMap<Label, CategoryCounts> {
        let mut out: BTreeMap<Label, CategoryCounts> = BTreeMap::new();
        for ((_, label), c) in &self.counts {
            out.entry(*label).or_default().merge(c);
        }
        out
    }

    pub fn per_document(&self) -> BTreeMap<String, CategoryCounts> {
        let mut out: BTreeMap<String, CategoryCounts> = BTreeMap::new();
        for ((doc, _), c) in &self.counts {
            out.entry(doc.clone()).or_default().merge(c);
        }
        out
    }

    /// CSV with one row per (doc_id, concept).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("doc_id,concept,em,rm,mm,ud,od\n");
        for ((doc, label), c) in &self.counts {
            out.push_str(&format!(
                "{doc},{label},{},{},{},{},{}\n",
                c.em, c.rm, c.mm, c.ud, c.od
            ));
        }
        out
    }
}

/// One classified event: the gold span for exact/relaxed/mismatch/under,
/// the prediction span for over detections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchDetail {
    pub doc_id: String,
    pub category: MatchCategory,
    pub label: Label,
    pub start: usize,
    pub end: usize,
}

/// Full classification output: the count report plus per-event details.
#[derive(Debug, Clone, Default)]
pub struct Classification {
    pub report: MatchReport,
    pub details: Vec<MatchDetail>,
}

#[derive(Debug, Error)]
pub enum MatcherError {
    #[error("entities from several documents in one classification: '{0}' and '{1}'")]
    CrossDocumentEntity(String, String),
    #[error("instance too large for the reference oracle: {0}")]
    InstanceTooLarge(String),
    #[error("missing gold total for concept '{0}'")]
    MissingTotal(Label),
}

fn check_single_document(gold: &[Entity], pred: &[Entity]) -> Result<(), MatcherError> {
    let mut iter = gold.iter().chain(pred.iter());
    if let Some(first) = iter.next() {
        for e in iter {
            if e.doc_id != first.doc_id {
                return Err(MatcherError::CrossDocumentEntity(
                    first.doc_id.clone(),
                    e.doc_id.clone(),
                ));
            }
        }
    }
    Ok(())
}

/// Classifies one document's predictions against its gold annotations,
/// returning counts and per-event details.
pub fn classify_details(gold: &[Entity], pred: &[Entity]) -> Result<Classification, MatcherError> {
    check_single_document(gold, pred)?;
    let doc_id = gold.iter().chain(pred.iter()).next().map(|e| e.doc_id.clone()).unwrap_or_default();

    // dedup predictions by (label, span); keep deterministic order
    let mut seen: BTreeSet<(Label, usize, usize)> = BTreeSet::new();
    let mut preds: Vec<&Entity> = Vec::new();
    let mut duplicates = 0u32;
    let mut sorted_pred: Vec<&Entity> = pred.iter().collect();
    sorted_pred.sort_by_key(|e| (e.start, e.end, e.label));
    for p in sorted_pred {
        if seen.insert((p.label, p.start, p.end)) {
            preds.push(p);
        } else {
            duplicates += 1;
        }
    }
    let mut golds: Vec<&Entity> = gold.iter().collect();
    golds.sort_by_key(|e| (e.start, e.end, e.label));

    let mut out = Classification::default();
    out.report.duplicate_predictions = duplicates;
    let mut matched_pred: Vec<bool> = vec![false; preds.len()];

    let push = |detail: MatchDetail, out: &mut Classification| {
        out.report
            .counts
            .entry((detail.doc_id.clone(), detail.label))
            .or_default()
            .add(detail.category);
        out.details.push(detail);
    };

    for g in &golds {
        let mut exact = false;
        let mut same_overlap = false;
        let mut other_overlap = false;
        for (pi, p) in preds.iter().enumerate() {
            if !g.overlaps(p) {
                continue;
            }
            matched_pred[pi] = true;
            if p.label == g.label {
                same_overlap = true;
                if g.same_span(p) {
                    exact = true;
                }
            } else {
                other_overlap = true;
            }
        }
        let primary = if exact {
            Some(MatchCategory::ExactMatch)
        } else if same_overlap {
            Some(MatchCategory::RelaxedMatch)
        } else if !other_overlap {
            Some(MatchCategory::UnderDetection)
        } else {
            None // only wrong-concept overlaps: accounted below as mismatch
        };
        if let Some(cat) = primary {
            push(
                MatchDetail {
                    doc_id: doc_id.clone(),
                    category: cat,
                    label: g.label,
                    start: g.start,
                    end: g.end,
                },
                &mut out,
            );
        }
        if other_overlap && !exact {
            push(
                MatchDetail {
                    doc_id: doc_id.clone(),
                    category: MatchCategory::Mismatch,
                    label: g.label,
                    start: g.start,
                    end: g.end,
                },
                &mut out,
            );
        }
    }
    for (pi, p) in preds.iter().enumerate() {
        if !matched_pred[pi] {
            push(
                MatchDetail {
                    doc_id: doc_id.clone(),
                    category: MatchCategory::OverDetection,
                    label: p.label,
                    start: p.start,
                    end: p.end,
                },
                &mut out,
            );
        }
    }
    Ok(out)
}

/// Classifies and returns the count report only.
pub fn classify(gold: &[Entity], pred: &[Entity]) -> Result<MatchReport, MatcherError> {
    classify_details(gold, pred).map(|c| c.report)
}

/// Limits accepted by [`brute_force_oracle`].
pub const ORACLE_MAX_ENTITIES: usize = 8;
pub const ORACLE_MAX_DOC_LEN: usize = 64;

/// Reference implementation of the category rules by naive double loops,
/// with no dedup set, sorting, or early exits shared with [`classify`].
/// Intended for validating the production path on small instances.
pub fn brute_force_oracle(gold: &[Entity], pred: &[Entity]) -> Result<MatchReport, MatcherError> {
    if gold.len() > ORACLE_MAX_ENTITIES || pred.len() > ORACLE_MAX_ENTITIES {
        return Err(MatcherError::InstanceTooLarge(format!(
            "{} gold x {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    for e in gold.iter().chain(pred.iter()) {
        if e.end > ORACLE_MAX_DOC_LEN {
            return Err(MatcherError::InstanceTooLarge(format!(
                "offset {} beyond {}",
                e.end, ORACLE_MAX_DOC_LEN
            )));
        }
    }
    check_single_document(gold, pred)?;

    let overlaps = |a: &Entity, b: &Entity| a.start < b.end && b.start < a.end;
    // a prediction is a duplicate if an earlier prediction has the same label and span
    let is_dup = |i: usize| {
        (0..i).any(|j| {
            pred[j].label == pred[i].label
                && pred[j].start == pred[i].start
                && pred[j].end == pred[i].end
        })
    };

    let mut report = MatchReport::default();
    for g in gold {
        let mut exact = false;
        let mut same = false;
        let mut other = false;
        let mut any = false;
        for (i, p) in pred.iter().enumerate() {
            if is_dup(i) || !overlaps(g, p) {
                continue;
            }
            any = true;
            if p.label == g.label {
                same = true;
                if p.start == g.start && p.end == g.end {
                    exact = true;
                }
            } else {
                other = true;
            }
        }
        let key = (g.doc_id.clone(), g.label);
        let counts = report.counts.entry(key).or_default();
        if exact {
            counts.em += 1;
        } else if same {
            counts.rm += 1;
        } else if !any {
            counts.ud += 1;
        }
        if other && !exact {
            counts.mm += 1;
        }
    }
    for (i, p) in pred.iter().enumerate() {
        if is_dup(i) {
            report.duplicate_predictions += 1;
            continue;
        }
        let mut any = false;
        for g in gold {
            if overlaps(g, p) {
                any = true;
            }
        }
        if !any {
            report.counts.entry((p.doc_id.clone(), p.label)).or_default().od += 1;
        }
    }
    Ok(report)
}

/// A rendered count/rate table: one row per concept plus a total row.
#[derive(Debug, Clone)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

#[derive(Debug, Clone)]
pub struct RateRow {
    /// `None` labels the total row.
    pub label: Option<Label>,
    pub gold_total: u32,
    /// em, rm, mm, ud, od, mmud, error, rm_plus_error
    pub cells: [u32; 8],
}

pub const RATE_COLUMNS: [&str; 8] = ["em", "rm", "mm", "ud", "od", "mmud", "error", "rm_error"];

impl RateRow {
    fn from_counts(label: Option<Label>, gold_total: u32, c: &CategoryCounts) -> RateRow {
        RateRow {
            label,
            gold_total,
            cells: [c.em, c.rm, c.mm, c.ud, c.od, c.mmud(), c.error(), c.rm_plus_error()],
        }
    }

    pub fn rate_str(&self, col: usize) -> String {
        percent_1dp(u64::from(self.cells[col]), u64::from(self.gold_total))
    }

    pub fn rate(&self, col: usize) -> f64 {
        f64::from(self.cells[col]) / f64::from(self.gold_total)
    }
}

/// Aggregates merged reports into per-concept and total rows. The rate
/// denominator is the concept's gold annotation count (the grand total for
/// the total row). Every concept present in the report needs a total.
pub fn aggregate(
    report: &MatchReport,
    gold_totals: &BTreeMap<Label, u32>,
) -> Result<RateTable, MatcherError> {
    let per_concept = report.per_concept();
    for label in per_concept.keys() {
        if !gold_totals.contains_key(label) {
            return Err(MatcherError::MissingTotal(*label));
        }
    }
    // keep MHE concepts in canonical order, then any BME labels
    let mut labels: Vec<Label> = gold_totals.keys().copied().collect();
    labels.sort_by_key(|l| match l {
        Label::Mhe(c) => (0usize, c.index()),
        Label::Bme(b) => (1usize, b.index()),
    });
    let mut rows = Vec::new();
    let mut grand = CategoryCounts::default();
    let mut grand_total = 0u32;
    for label in labels {
        let counts = per_concept.get(&label).copied().unwrap_or_default();
        let total = gold_totals[&label];
        grand.merge(&counts);
        grand_total += total;
        rows.push(RateRow::from_counts(Some(label), total, &counts));
    }
    rows.push(RateRow::from_counts(None, grand_total, &grand));
    Ok(RateTable { rows })
}

impl RateTable {
    pub fn total_row(&self) -> &RateRow {
        self.rows.last().expect("a rate table always has a total row")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "concept,gold_total,em,em_rate,rm,rm_rate,mm,mm_rate,ud,ud_rate,od,od_rate,\
             mmud,mmud_rate,error,error_rate,rm_error,rm_error_rate\n",
        );
        for row in &self.rows {
            let name = row.label.map(|l| l.as_str()).unwrap_or("total");
            out.push_str(&format!("{name},{}", row.gold_total));
            for col in 0..8 {
                out.push_str(&format!(",{},{}", row.cells[col], row.rate_str(col)));
            }
            out.push('\n');
        }
        out
    }

    /// Markdown table mirroring the published column order.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| Concept | Gold | Exact Match | Relaxed Match | Mismatch | Under Detection \
             | Over Detection | MMUD | Error | RM+Error |\n\
             |---|---|---|---|---|---|---|---|---|---|\n",
        );
        for row in &self.rows {
            let name = row.label.map(|l| l.as_str()).unwrap_or("total");
            out.push_str(&format!("| {name} | {} |", row.gold_total));
            for col in 0..8 {
                out.push_str(&format!(" {} ({}%) |", row.cells[col], row.rate_str(col)));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Concept, Source};
    use proptest::prelude::*;

    fn ent(label: Label, start: usize, end: usize, source: Source) -> Entity {
        Entity::new(label, start, end, "d", source)
    }

    fn cc(start: usize, end: usize, source: Source) -> Entity {
        ent(Label::Mhe(Concept::Cc), start, end, source)
    }

    fn totals(report: &MatchReport) -> (u32, u32, u32, u32, u32) {
        (
            report.total(MatchCategory::ExactMatch),
            report.total(MatchCategory::RelaxedMatch),
            report.total(MatchCategory::Mismatch),
            report.total(MatchCategory::UnderDetection),
            report.total(MatchCategory::OverDetection),
        )
    }

    #[test]
    fn identical_sets_are_all_exact() {
        let gold = vec![cc(0, 5, Source::Gold), cc(10, 14, Source::Gold)];
        let pred = vec![cc(0, 5, Source::Predicted), cc(10, 14, Source::Predicted)];
        let report = classify(&gold, &pred).unwrap();
        assert_eq!(totals(&report), (2, 0, 0, 0, 0));
    }

    #[test]
    fn empty_predictions_are_all_under() {
        let gold = vec![cc(0, 5, Source::Gold), cc(10, 14, Source::Gold)];
        let report = classify(&gold, &[]).unwrap();
        assert_eq!(totals(&report), (0, 0, 0, 2, 0));
    }

    #[test]
    fn relaxed_and_mismatch_can_both_fire_for_one_gold() {
        // gold CC [10,20); predictions CC [12,25) and PastHistory [8,14)
        let gold = vec![cc(10, 20, Source::Gold)];
        let pred = vec![
            cc(12, 25, Source::Predicted),
            ent(Label::Mhe(Concept::PastHistory), 8, 14, Source::Predicted),
        ];
        let report = classify(&gold, &pred).unwrap();
        assert_eq!(totals(&report), (0, 1, 1, 0, 0));
        // category sum exceeds the gold count
        assert_eq!(report.total(MatchCategory::RelaxedMatch) + report.total(MatchCategory::Mismatch), 2);
    }

    #[test]
    fn wrong_concept_only_is_mismatch_not_under() {
        let gold = vec![cc(10, 20, Source::Gold)];
        let pred = vec![ent(Label::Mhe(Concept::PastHistory), 8, 14, Source::Predicted)];
        let report = classify(&gold, &pred).unwrap();
        assert_eq!(totals(&report), (0, 0, 1, 0, 0));
    }

    #[test]
    fn unmatched_prediction_is_over_detection() {
        let gold = vec![cc(0, 4, Source::Gold)];
        let pred = vec![cc(30, 40, Source::Predicted)];
        let report = classify(&gold, &pred).unwrap();
        assert_eq!(totals(&report), (0, 0, 0, 1, 1));
    }

    #[test]
    fn touching_spans_do_not_overlap() {
        let gold = vec![cc(0, 5, Source::Gold)];
        let pred = vec![cc(5, 9, Source::Predicted)];
        let report = classify(&gold, &pred).unwrap();
        assert_eq!(totals(&report), (0, 0, 0, 1, 1));
    }

    #[test]
    fn duplicate_predictions_count_once() {
        let gold = vec![cc(0, 5, Source::Gold)];
        let pred = vec![cc(0, 5, Source::Predicted), cc(0, 5, Source::Predicted)];
        let report = classify(&gold, &pred).unwrap();
        assert_eq!(totals(&report), (1, 0, 0, 0, 0));
        assert_eq!(report.duplicate_predictions, 1);
    }

    #[test]
    fn cross_document_entities_are_rejected() {
        let gold = vec![Entity::new(Label::Mhe(Concept::Cc), 0, 4, "a", Source::Gold)];
        let pred = vec![Entity::new(Label::Mhe(Concept::Cc), 0, 4, "b", Source::Predicted)];
        assert!(matches!(classify(&gold, &pred), Err(MatcherError::CrossDocumentEntity(_, _))));
    }

    #[test]
    fn od_attributes_to_prediction_concept() {
        let pred = vec![ent(Label::Mhe(Concept::SocialHistory), 3, 8, Source::Predicted)];
        let report = classify(&[], &pred).unwrap();
        let per = report.per_concept();
        assert_eq!(per[&Label::Mhe(Concept::SocialHistory)].od, 1);
    }

    #[test]
    fn oracle_rejects_big_instances() {
        let gold: Vec<Entity> = (0..9).map(|i| cc(i * 2, i * 2 + 1, Source::Gold)).collect();
        assert!(matches!(
            brute_force_oracle(&gold, &[]),
            Err(MatcherError::InstanceTooLarge(_))
        ));
    }

    #[test]
    fn oracle_matches_on_empty_and_exact() {
        let r = brute_force_oracle(&[], &[]).unwrap();
        assert_eq!(totals(&r), (0, 0, 0, 0, 0));
        let gold = vec![cc(0, 5, Source::Gold)];
        let pred = vec![cc(0, 5, Source::Predicted)];
        assert_eq!(totals(&brute_force_oracle(&gold, &pred).unwrap()), (1, 0, 0, 0, 0));
    }

    #[test]
    fn aggregate_renders_published_style_rates() {
        let mut counts = BTreeMap::new();
        counts.insert(
            Label::Mhe(Concept::Cc),
            CategoryCounts { em: 746, rm: 0, mm: 0, ud: 0, od: 0 },
        );
        let report = MatchReport::from_counts("all", counts);
        let mut gold_totals = BTreeMap::new();
        gold_totals.insert(Label::Mhe(Concept::Cc), 1449u32);
        let table = aggregate(&report, &gold_totals).unwrap();
        assert_eq!(table.rows[0].rate_str(0), "51.5");
        assert_eq!(table.total_row().rate_str(0), "51.5");
    }

    #[test]
    fn aggregate_requires_totals() {
        let gold = vec![cc(0, 5, Source::Gold)];
        let report = classify(&gold, &[]).unwrap();
        let err = aggregate(&report, &BTreeMap::new()).unwrap_err();
        assert!(matches!(err, MatcherError::MissingTotal(_)));
    }

    #[test]
    fn zero_count_renders_zero_rate() {
        assert_eq!(percent_1dp(0, 37), "0.0");
    }

    prop_compose! {
        fn span()(start in 0usize..60, width in 1usize..8) -> (usize, usize) {
            (start, (start + width).min(ORACLE_MAX_DOC_LEN))
        }
    }

    fn instance() -> impl Strategy<Value = (Vec<Entity>, Vec<Entity>)> {
        let labels = [Concept::Cc, Concept::PastHistory, Concept::SocialHistory];
        let gold = proptest::collection::vec((span(), 0usize..3), 0..4);
        let pred = proptest::collection::vec((span(), 0usize..3), 0..4);
        (gold, pred).prop_map(move |(gs, ps)| {
            let mut gold: Vec<Entity> = Vec::new();
            for ((start, end), li) in gs {
                let e = ent(Label::Mhe(labels[li]), start, end, Source::Gold);
                // keep the gold non-overlap invariant
                if gold.iter().all(|g| !g.overlaps(&e)) {
                    gold.push(e);
                }
            }
            let pred: Vec<Entity> = ps
                .into_iter()
                .map(|((start, end), li)| ent(Label::Mhe(labels[li]), start, end, Source::Predicted))
                .collect();
            (gold, pred)
        })
    }

    proptest! {
        #[test]
        fn classify_equals_oracle((gold, pred) in instance()) {
            let fast = classify(&gold, &pred).unwrap();
            let slow = brute_force_oracle(&gold, &pred).unwrap();
            prop_assert_eq!(fast, slow);
        }

        #[test]
        fn classify_is_order_and_translation_invariant((gold, pred) in instance(), offset in 0usize..100) {
            let base = classify(&gold, &pred).unwrap();
            let mut gold_rev = gold.clone();
            gold_rev.reverse();
            let mut pred_rev = pred.clone();
            pred_rev.reverse();
            prop_assert_eq!(&classify(&gold_rev, &pred_rev).unwrap(), &base);

            let shift = |e: &Entity| {
                let mut e = e.clone();
                e.start += offset;
                e.end += offset;
                e
            };
            let gold_shift: Vec<Entity> = gold.iter().map(shift).collect();
            let pred_shift: Vec<Entity> = pred.iter().map(shift).collect();
            prop_assert_eq!(classify(&gold_shift, &pred_shift).unwrap(), base);
        }

        // Each gold yields exactly one of {EM, RM, UD} unless its only
        // overlaps have the wrong concept (then mismatch only); counts bound
        // the inputs.
        #[test]
        fn category_accounting_invariants((gold, pred) in instance()) {
            let report = classify(&gold, &pred).unwrap();
            let em = report.total(MatchCategory::ExactMatch);
            let rm = report.total(MatchCategory::RelaxedMatch);
            let mm = report.total(MatchCategory::Mismatch);
            let ud = report.total(MatchCategory::UnderDetection);
            let od = report.total(MatchCategory::OverDetection);
            let mismatch_only = gold
                .iter()
                .filter(|g| {
                    let overlapping: Vec<&Entity> =
                        pred.iter().filter(|p| g.overlaps(p)).collect();
                    !overlapping.is_empty() && overlapping.iter().all(|p| p.label != g.label)
                })
                .count() as u32;
            prop_assert_eq!(em + rm + ud, gold.len() as u32 - mismatch_only);
            prop_assert!(em + rm + mm + ud >= gold.len() as u32);
            prop_assert!(od <= pred.len() as u32);
        }
    }
}
