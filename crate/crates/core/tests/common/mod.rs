//! Loaders for the benchmark fixtures under `tests/data/`.

use std::collections::BTreeMap;
use std::path::PathBuf;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn read_csv(name: &str) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(data_path(name))
        .unwrap_or_else(|e| panic!("fixture {name}: {e}"));
    let mut rows: Vec<Vec<String>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|c| c.trim().to_string()).collect())
        .collect();
    rows.remove(0); // header
    rows
}

/// One 2x2 section-placement table with its published p-value.
pub struct SectionFixture {
    pub group: String,
    pub model: String,
    pub in_matched: u64,
    pub out_matched: u64,
    pub in_mmud: u64,
    pub out_mmud: u64,
    pub expected_p: f64,
}

pub fn section_fixtures() -> Vec<SectionFixture> {
    read_csv("section_contingency.csv")
        .into_iter()
        .map(|r| SectionFixture {
            group: r[0].clone(),
            model: r[1].clone(),
            in_matched: r[2].parse().unwrap(),
            out_matched: r[3].parse().unwrap(),
            in_mmud: r[4].parse().unwrap(),
            out_mmud: r[5].parse().unwrap(),
            expected_p: r[6].parse().unwrap(),
        })
        .collect()
}

/// Per-note category counts for one model block.
#[derive(Clone)]
pub struct NoteFixture {
    pub sample: String,
    pub annotations: u64,
    pub words: u64,
    pub counts: [u64; 5],
}

pub fn note_fixtures() -> BTreeMap<String, Vec<NoteFixture>> {
    let mut by_model: BTreeMap<String, Vec<NoteFixture>> = BTreeMap::new();
    for r in read_csv("note_match_counts.csv") {
        by_model.entry(r[0].clone()).or_default().push(NoteFixture {
            sample: r[1].clone(),
            annotations: r[2].parse().unwrap(),
            words: r[3].parse().unwrap(),
            counts: [
                r[4].parse().unwrap(),
                r[5].parse().unwrap(),
                r[6].parse().unwrap(),
                r[7].parse().unwrap(),
                r[8].parse().unwrap(),
            ],
        });
    }
    by_model
}

/// Published correlation footer: (model, basis, category) -> (r, p).
pub fn note_correlation_expected() -> BTreeMap<(String, String, String), (f64, f64)> {
    read_csv("note_correlation_expected.csv")
        .into_iter()
        .map(|r| {
            (
                (r[0].clone(), r[1].clone(), r[2].clone()),
                (r[3].parse().unwrap(), r[4].parse().unwrap()),
            )
        })
        .collect()
}

/// One per-concept row of the published evaluation tables, with counts and
/// the rendered one-decimal percentages.
pub struct ConceptCountFixture {
    pub model: String,
    pub concept: String,
    pub gold_total: u32,
    /// em, rm, mm, ud, od, mmud, error, rm_error
    pub counts: [u32; 8],
    pub percents: [String; 8],
}

pub fn concept_count_fixtures() -> Vec<ConceptCountFixture> {
    read_csv("concept_match_counts.csv")
        .into_iter()
        .map(|r| ConceptCountFixture {
            model: r[0].clone(),
            concept: r[1].clone(),
            gold_total: r[2].parse().unwrap(),
            counts: [
                r[3].parse().unwrap(),
                r[4].parse().unwrap(),
                r[5].parse().unwrap(),
                r[6].parse().unwrap(),
                r[7].parse().unwrap(),
                r[8].parse().unwrap(),
                r[9].parse().unwrap(),
                r[10].parse().unwrap(),
            ],
            percents: [
                r[11].clone(),
                r[12].clone(),
                r[13].clone(),
                r[14].clone(),
                r[15].clone(),
                r[16].clone(),
                r[17].clone(),
                r[18].clone(),
            ],
        })
        .collect()
}

/// Entity-length summary statistics per model and category, with the
/// published p-value ("ref" marks the reference row, "<0.001" a bound).
pub struct LengthSummaryFixture {
    pub model: String,
    pub category: String,
    pub mean: f64,
    pub sd: f64,
    pub n: u64,
    pub expected_p: String,
}

pub fn length_summary_fixtures() -> Vec<LengthSummaryFixture> {
    read_csv("entity_length_summary.csv")
        .into_iter()
        .map(|r| LengthSummaryFixture {
            model: r[0].clone(),
            category: r[1].clone(),
            mean: r[2].parse().unwrap(),
            sd: r[3].parse().unwrap(),
            n: r[4].parse().unwrap(),
            expected_p: r[5].clone(),
        })
        .collect()
}

/// One oracle grid point for the special functions.
pub struct GridPoint {
    pub function: String,
    pub args: Vec<f64>,
    pub expected: f64,
}

pub fn special_function_grid() -> Vec<GridPoint> {
    read_csv("special_function_grid.csv")
        .into_iter()
        .map(|r| GridPoint {
            function: r[0].clone(),
            args: r[1..4].iter().filter(|s| !s.is_empty()).map(|s| s.parse().unwrap()).collect(),
            expected: r[4].parse().unwrap(),
        })
        .collect()
}
