//! Python bindings for the histent toolkit: the document/entity model,
//! the annotation parsers, BIO/feature codecs, the five-category matcher,
//! the statistical tests, and the reference tagger.

use histent::analysis::{note_length_analysis, NoteRecord};
use histent::bio;
use histent::corpus;
use histent::matcher;
use histent::stats;
use histent::tagger;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use std::collections::BTreeMap;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A concept-labeled character span.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Entity {
    inner: corpus::Entity,
}

#[pymethods]
impl Entity {
    #[new]
    #[pyo3(signature = (concept, start, end, doc_id = "doc", source = "gold"))]
    fn new(concept: &str, start: usize, end: usize, doc_id: &str, source: &str) -> PyResult<Self> {
        let label = corpus::Label::parse(concept)
            .ok_or_else(|| value_err(format!("unknown concept: {concept}")))?;
        let source = match source {
            "gold" => corpus::Source::Gold,
            "predicted" => corpus::Source::Predicted,
            other => return Err(value_err(format!("unknown source: {other}"))),
        };
        Ok(Entity { inner: corpus::Entity::new(label, start, end, doc_id, source) })
    }

    #[getter]
    fn concept(&self) -> &'static str {
        self.inner.label.as_str()
    }

    #[getter]
    fn start(&self) -> usize {
        self.inner.start
    }

    #[getter]
    fn end(&self) -> usize {
        self.inner.end
    }

    #[getter]
    fn doc_id(&self) -> &str {
        &self.inner.doc_id
    }

    #[getter]
    fn source(&self) -> &'static str {
        match self.inner.source {
            corpus::Source::Gold => "gold",
            corpus::Source::Predicted => "predicted",
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Entity({}, {}, {}, doc_id={:?}, source={:?})",
            self.inner.label,
            self.inner.start,
            self.inner.end,
            self.inner.doc_id,
            self.source()
        )
    }
}

fn unwrap_entities(entities: Vec<Entity>) -> Vec<corpus::Entity> {
    entities.into_iter().map(|e| e.inner).collect()
}

fn wrap_entities(entities: Vec<corpus::Entity>) -> Vec<Entity> {
    entities.into_iter().map(|inner| Entity { inner }).collect()
}

/// A clinical note with derived tokens, sections, and entity lists.
#[pyclass(frozen)]
struct Document {
    inner: corpus::Document,
}

#[pymethods]
impl Document {
    #[new]
    #[pyo3(signature = (doc_id, text, gold = Vec::new(), predicted = Vec::new()))]
    fn new(
        doc_id: &str,
        text: &str,
        gold: Vec<Entity>,
        predicted: Vec<Entity>,
    ) -> PyResult<Self> {
        let inner = corpus::Document::new(
            doc_id,
            text,
            unwrap_entities(gold),
            unwrap_entities(predicted),
        )
        .map_err(value_err)?;
        Ok(Document { inner })
    }

    #[getter]
    fn doc_id(&self) -> &str {
        &self.inner.doc_id
    }

    #[getter]
    fn text(&self) -> &str {
        &self.inner.text
    }

    #[getter]
    fn gold(&self) -> Vec<Entity> {
        wrap_entities(self.inner.gold.clone())
    }

    #[getter]
    fn predicted(&self) -> Vec<Entity> {
        wrap_entities(self.inner.predicted.clone())
    }

    /// Tokens as (start, end, text) triples.
    fn tokens(&self) -> Vec<(usize, usize, String)> {
        self.inner
            .tokens
            .iter()
            .map(|t| (t.start, t.end, self.inner.token_text(t).to_string()))
            .collect()
    }

    /// Sections as dicts with header, header_start, body_start, body_end.
    fn sections<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .sections
            .iter()
            .map(|s| {
                let d = PyDict::new(py);
                d.set_item("header", s.header.clone())?;
                d.set_item("header_start", s.header_start)?;
                d.set_item("body_start", s.body_start)?;
                d.set_item("body_end", s.body_end)?;
                Ok(d)
            })
            .collect()
    }

    fn to_standoff_json(&self) -> String {
        corpus::document_to_standoff_string(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Document({:?}, {} chars, {} gold, {} predicted)",
            self.inner.doc_id,
            self.inner.char_len(),
            self.inner.gold.len(),
            self.inner.predicted.len()
        )
    }
}

/// Tokenize text into (start, end, text) triples (character offsets).
#[pyfunction]
fn tokenize(text: &str) -> Vec<(usize, usize, String)> {
    let chars: Vec<char> = text.chars().collect();
    corpus::tokenize(text)
        .into_iter()
        .map(|t| (t.start, t.end, chars[t.start..t.end].iter().collect()))
        .collect()
}

/// Detect headed sections; returns dicts like Document.sections().
#[pyfunction]
fn sectionize<'py>(py: Python<'py>, text: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    corpus::sectionize(text)
        .iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("header", s.header.clone())?;
            d.set_item("header_start", s.header_start)?;
            d.set_item("body_start", s.body_start)?;
            d.set_item("body_end", s.body_end)?;
            Ok(d)
        })
        .collect()
}

/// Parse one standoff JSON document.
#[pyfunction]
fn parse_standoff_json(line: &str) -> PyResult<Document> {
    Ok(Document { inner: corpus::parse_standoff_json(line).map_err(value_err)? })
}

/// Strip span markup, returning (plain_text, entities).
#[pyfunction]
#[pyo3(signature = (marked, doc_id = "doc"))]
fn parse_gpt_html(marked: &str, doc_id: &str) -> PyResult<(String, Vec<Entity>)> {
    let (plain, ents) = corpus::parse_gpt_html(doc_id, marked).map_err(value_err)?;
    Ok((plain, wrap_entities(ents)))
}

/// Parse brat-style annotation lines against the document text.
#[pyfunction]
#[pyo3(signature = (text, ann, doc_id = "doc"))]
fn parse_brat(text: &str, ann: &str, doc_id: &str) -> PyResult<Vec<Entity>> {
    let ents = corpus::parse_brat(doc_id, text, ann, &corpus::BratLabelMap::default())
        .map_err(value_err)?;
    Ok(wrap_entities(ents))
}

/// Encode entities as per-token BIO tag strings.
#[pyfunction]
fn encode_bio(doc: &Document, entities: Vec<Entity>) -> PyResult<Vec<String>> {
    let seq = bio::encode_bio(&doc.inner, &unwrap_entities(entities)).map_err(value_err)?;
    Ok(seq.tags.iter().map(|t| t.to_string()).collect())
}

/// Decode BIO tag strings back to entities; returns (entities, warnings).
#[pyfunction]
fn decode_bio(doc: &Document, tags: Vec<String>) -> PyResult<(Vec<Entity>, Vec<String>)> {
    let parsed: Option<Vec<bio::MheTag>> =
        tags.iter().map(|t| bio::MheTag::parse(t)).collect();
    let parsed = parsed.ok_or_else(|| value_err("unknown tag in sequence"))?;
    let seq = bio::TagSequence { doc_id: doc.inner.doc_id.clone(), tags: parsed };
    let decoded = bio::decode_bio(&seq, &doc.inner).map_err(value_err)?;
    let warnings = decoded.warnings.iter().map(|w| w.message.clone()).collect();
    Ok((wrap_entities(decoded.entities), warnings))
}

/// Per-token 14-dimensional BME feature rows.
#[pyfunction]
fn encode_bme_features(doc: &Document, entities: Vec<Entity>) -> Vec<Vec<u8>> {
    bio::encode_bme_features(&doc.inner, &unwrap_entities(entities))
        .into_iter()
        .map(|row| row.to_array().to_vec())
        .collect()
}

/// Classify predictions against gold annotations; returns a dict with
/// per-concept counts of the five categories plus totals.
#[pyfunction]
fn classify<'py>(
    py: Python<'py>,
    gold: Vec<Entity>,
    pred: Vec<Entity>,
) -> PyResult<Bound<'py, PyDict>> {
    let report =
        matcher::classify(&unwrap_entities(gold), &unwrap_entities(pred)).map_err(value_err)?;
    let out = PyDict::new(py);
    let concepts = PyDict::new(py);
    for (label, c) in report.per_concept() {
        let d = PyDict::new(py);
        d.set_item("exact_match", c.em)?;
        d.set_item("relaxed_match", c.rm)?;
        d.set_item("mismatch", c.mm)?;
        d.set_item("under_detection", c.ud)?;
        d.set_item("over_detection", c.od)?;
        concepts.set_item(label.as_str(), d)?;
    }
    out.set_item("concepts", concepts)?;
    let totals = PyDict::new(py);
    for cat in matcher::MatchCategory::ALL {
        totals.set_item(cat.as_str(), report.total(cat))?;
    }
    out.set_item("totals", totals)?;
    out.set_item("duplicate_predictions", report.duplicate_predictions)?;
    Ok(out)
}

fn test_result_dict<'py>(py: Python<'py>, r: &stats::TestResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("method", &r.method)?;
    d.set_item("statistic", r.statistic)?;
    d.set_item("df", r.df)?;
    d.set_item("p_value", r.p_value)?;
    Ok(d)
}

/// Welch's two-sample t-test from summary statistics.
#[pyfunction]
fn welch_t_test<'py>(
    py: Python<'py>,
    mean_x: f64,
    sd_x: f64,
    n_x: u64,
    mean_y: f64,
    sd_y: f64,
    n_y: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = stats::welch_t_test(
        &stats::SummarySample::new(mean_x, sd_x, n_x),
        &stats::SummarySample::new(mean_y, sd_y, n_y),
    )
    .map_err(value_err)?;
    test_result_dict(py, &r)
}

/// Pearson correlation with two-sided significance.
#[pyfunction]
fn pearson<'py>(py: Python<'py>, xs: Vec<f64>, ys: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let r = stats::pearson(&xs, &ys).map_err(value_err)?;
    test_result_dict(py, &r)
}

/// Yates-corrected chi-square test of a 2x2 table.
#[pyfunction]
fn chi_square_yates<'py>(
    py: Python<'py>,
    a: u64,
    b: u64,
    c: u64,
    d: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = stats::chi_square_yates(&stats::ContingencyTable::new(a, b, c, d)).map_err(value_err)?;
    test_result_dict(py, &r)
}

/// Fisher's exact test of a 2x2 table (two-sided, probability method).
#[pyfunction]
fn fisher_exact<'py>(
    py: Python<'py>,
    a: u64,
    b: u64,
    c: u64,
    d: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = stats::fisher_exact(&stats::ContingencyTable::new(a, b, c, d)).map_err(value_err)?;
    test_result_dict(py, &r)
}

/// Fisher when any expected count is below five, else Yates chi-square.
#[pyfunction]
fn select_2x2_test<'py>(
    py: Python<'py>,
    a: u64,
    b: u64,
    c: u64,
    d: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = stats::select_2x2_test(&stats::ContingencyTable::new(a, b, c, d)).map_err(value_err)?;
    test_result_dict(py, &r)
}

/// Note-length correlations over (word_count, gold_count, em, rm, mm, ud,
/// od) rows; returns a list of dicts with basis, category, r, and p.
#[pyfunction]
fn note_length_correlations<'py>(
    py: Python<'py>,
    notes: Vec<(u64, u64, u64, u64, u64, u64, u64)>,
) -> PyResult<Bound<'py, PyList>> {
    let records: Vec<NoteRecord> = notes
        .iter()
        .enumerate()
        .map(|(i, (words, gold, em, rm, mm, ud, od))| NoteRecord {
            doc_id: format!("note{i}"),
            word_count: *words,
            gold_count: *gold,
            counts: [*em, *rm, *mm, *ud, *od],
        })
        .collect();
    let report = note_length_analysis(&records).map_err(value_err)?;
    let out = PyList::empty(py);
    for c in &report.correlations {
        let d = PyDict::new(py);
        d.set_item("basis", c.basis)?;
        d.set_item("category", c.category)?;
        match &c.test {
            Some(t) => {
                d.set_item("r", t.statistic)?;
                d.set_item("p_value", t.p_value)?;
            }
            None => {
                d.set_item("note", c.note.clone())?;
            }
        }
        out.append(d)?;
    }
    Ok(out)
}

/// Train the reference tagger with document-level cross-validation and
/// return each document's out-of-fold predictions.
#[pyfunction]
#[pyo3(signature = (docs, mode = "basic", seed = 0, folds = 5, epochs = 40, hash_width = 1 << 18, learning_rate = 0.1, dropout = 0.1, bme = None))]
#[allow(clippy::too_many_arguments)]
fn train_tagger<'py>(
    py: Python<'py>,
    docs: Vec<PyRef<'py, Document>>,
    mode: &str,
    seed: u64,
    folds: usize,
    epochs: u32,
    hash_width: usize,
    learning_rate: f64,
    dropout: f64,
    bme: Option<BTreeMap<String, Vec<Entity>>>,
) -> PyResult<Bound<'py, PyDict>> {
    let mode = tagger::Mode::parse(mode).ok_or_else(|| value_err("mode must be basic or with_bme"))?;
    let inner_docs: Vec<corpus::Document> = docs.iter().map(|d| d.inner.clone()).collect();
    let ids: Vec<String> = inner_docs.iter().map(|d| d.doc_id.clone()).collect();
    let plan = tagger::FoldPlan::from_seed(&ids, folds, seed);
    let config = tagger::TaggerConfig {
        hash_width,
        learning_rate,
        epochs,
        dropout,
        ..tagger::TaggerConfig::default()
    };
    let bme_map: Option<BTreeMap<String, Vec<corpus::Entity>>> =
        bme.map(|m| m.into_iter().map(|(k, v)| (k, unwrap_entities(v))).collect());
    let outcome = tagger::train(&inner_docs, mode, &plan, bme_map.as_ref(), &config, seed)
        .map_err(value_err)?;
    let out = PyDict::new(py);
    for (doc_id, ents) in outcome.predictions {
        out.set_item(doc_id, wrap_entities(ents))?;
    }
    Ok(out)
}

#[pymodule]
fn histent_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Entity>()?;
    m.add_class::<Document>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(sectionize, m)?)?;
    m.add_function(wrap_pyfunction!(parse_standoff_json, m)?)?;
    m.add_function(wrap_pyfunction!(parse_gpt_html, m)?)?;
    m.add_function(wrap_pyfunction!(parse_brat, m)?)?;
    m.add_function(wrap_pyfunction!(encode_bio, m)?)?;
    m.add_function(wrap_pyfunction!(decode_bio, m)?)?;
    m.add_function(wrap_pyfunction!(encode_bme_features, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(welch_t_test, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(chi_square_yates, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_exact, m)?)?;
    m.add_function(wrap_pyfunction!(select_2x2_test, m)?)?;
    m.add_function(wrap_pyfunction!(note_length_correlations, m)?)?;
    m.add_function(wrap_pyfunction!(train_tagger, m)?)?;
    Ok(())
}
