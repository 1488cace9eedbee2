//! Command implementations behind the `histent` binary: convert between
//! annotation formats, evaluate predictions, run the error-association
//! analyses, and train the reference tagger with cross-validation.
//!
//! Every command writes plain files under an output directory plus a
//! `manifest.json` with input digests, the seed, and the tool version;
//! identical inputs and seed give byte-identical outputs. Diagnostics are
//! serialized as JSON on stderr by the binary.

use crate::analysis::{
    entity_length_analysis, length_records, note_length_analysis, note_records,
    segmentation_analysis, AnalysisError, HeaderLexicon, NoteLengthReport,
};
use crate::corpus::{
    document_to_standoff_string, parse_brat, parse_gpt_html, read_corpus_jsonl, BratLabelMap,
    CorpusError, Document, Label,
};
use crate::matcher::{aggregate, classify_details, Classification, MatcherError, RateTable};
use crate::report::Manifest;
use crate::stats::StatsError;
use crate::tagger::{save_model, train, FoldPlan, Mode, TaggerConfig, TaggerError};
use rayon::prelude::*;
use serde_json::json;
use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Corpus { path: PathBuf, source: CorpusError },
    #[error("document ids differ between gold and predictions; missing in predictions: [{missing_in_pred}], missing in gold: [{missing_in_gold}]")]
    DocIdMismatch { missing_in_pred: String, missing_in_gold: String },
    #[error("unknown format '{0}' (expected standoff-json, brat, or gpt-html)")]
    UnknownFormat(String),
    #[error("unknown analysis '{0}' (expected length, notes, or sections)")]
    UnknownAnalysis(String),
    #[error("unknown mode '{0}' (expected basic or with_bme)")]
    UnknownMode(String),
    #[error("mode with_bme requires --bme")]
    MissingBmeFile,
    #[error(transparent)]
    Matcher(#[from] MatcherError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Tagger(#[from] TaggerError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// Machine-readable form for the structured error stream.
    pub fn to_json(&self) -> String {
        let mut obj = json!({ "error": self.to_string() });
        if let CliError::Corpus { path, source } = self {
            obj["path"] = json!(path.display().to_string());
            if let CorpusError::MalformedInput { line, column, .. } = source {
                obj["line"] = json!(line);
                obj["column"] = json!(column);
            }
        }
        obj.to_string()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn corpus_err(path: &Path) -> impl FnOnce(CorpusError) -> CliError + '_ {
    move |source| CliError::Corpus { path: path.to_path_buf(), source }
}

fn read_corpus(path: &Path) -> Result<Vec<Document>, CliError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    read_corpus_jsonl(BufReader::new(file)).map_err(corpus_err(path))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io_err(&path))
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Output format selectors parsed from `--format`.
#[derive(Debug, Clone, Copy)]
pub struct FormatSelection {
    pub csv: bool,
    pub md: bool,
    pub svg: bool,
}

impl FormatSelection {
    pub fn parse(s: &str) -> FormatSelection {
        let mut sel = FormatSelection { csv: false, md: false, svg: false };
        for part in s.split(',') {
            match part.trim() {
                "csv" => sel.csv = true,
                "md" | "markdown" => sel.md = true,
                "svg" => sel.svg = true,
                _ => {}
            }
        }
        if !(sel.csv || sel.md || sel.svg) {
            sel.csv = true;
            sel.md = true;
        }
        sel
    }
}

/// Supported input formats of `convert`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    StandoffJson,
    Brat,
    GptHtml,
}

impl InputFormat {
    pub fn parse(s: &str) -> Result<InputFormat, CliError> {
        match s {
            "standoff-json" => Ok(InputFormat::StandoffJson),
            "brat" => Ok(InputFormat::Brat),
            "gpt-html" => Ok(InputFormat::GptHtml),
            other => Err(CliError::UnknownFormat(other.to_string())),
        }
    }
}

fn doc_id_from_path(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "doc".to_string())
}

/// Converts annotation files to the canonical standoff JSON-Lines corpus.
/// Brat inputs are `.txt` files with sibling `.ann` files; span-markup
/// inputs are one marked-up document per file; standoff JSON inputs are
/// re-emitted canonicalized.
pub fn cmd_convert(format: InputFormat, inputs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let mut docs: Vec<Document> = Vec::new();
    for input in inputs {
        match format {
            InputFormat::StandoffJson => {
                docs.extend(read_corpus(input)?);
            }
            InputFormat::Brat => {
                let text = fs::read_to_string(input).map_err(io_err(input))?;
                let ann_path = input.with_extension("ann");
                let ann = fs::read_to_string(&ann_path).map_err(io_err(&ann_path))?;
                let doc_id = doc_id_from_path(input);
                let entities = parse_brat(&doc_id, &text, &ann, &BratLabelMap::default())
                    .map_err(corpus_err(input))?;
                docs.push(Document::new(&doc_id, &text, entities, vec![]).map_err(corpus_err(input))?);
            }
            InputFormat::GptHtml => {
                let marked = fs::read_to_string(input).map_err(io_err(input))?;
                let doc_id = doc_id_from_path(input);
                let (plain, entities) =
                    parse_gpt_html(&doc_id, &marked).map_err(corpus_err(input))?;
                docs.push(
                    Document::new(&doc_id, &plain, vec![], entities).map_err(corpus_err(input))?,
                );
            }
        }
    }
    let mut buf = String::new();
    for doc in &docs {
        buf.push_str(&document_to_standoff_string(doc));
        buf.push('\n');
    }
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
    }
    fs::write(out, buf).map_err(io_err(out))?;
    let mut manifest = Manifest::new("convert", None);
    for input in inputs {
        manifest.add_input(input).map_err(io_err(input))?;
    }
    let manifest_path = out.with_extension("manifest.json");
    fs::write(&manifest_path, manifest.to_json()).map_err(io_err(&manifest_path))?;
    Ok(())
}

/// Gold and prediction corpora joined by document id.
pub struct EvaluationInput {
    pub docs: BTreeMap<String, Document>,
    pub classification: Classification,
    pub gold_totals: BTreeMap<Label, u32>,
}

/// Loads both corpora, checks the id sets match, and classifies every
/// document (documents are independent, so classification runs in a
/// parallel pool and merges deterministically).
pub fn load_and_classify(gold_path: &Path, pred_path: &Path) -> Result<EvaluationInput, CliError> {
    let gold_docs = read_corpus(gold_path)?;
    let pred_docs = read_corpus(pred_path)?;
    let preds_by_id: BTreeMap<String, &Document> =
        pred_docs.iter().map(|d| (d.doc_id.clone(), d)).collect();
    let gold_ids: Vec<&String> = gold_docs.iter().map(|d| &d.doc_id).collect();

    let missing_in_pred: Vec<String> = gold_ids
        .iter()
        .filter(|id| !preds_by_id.contains_key(**id))
        .map(|id| (*id).clone())
        .collect();
    let gold_id_set: std::collections::BTreeSet<&String> = gold_ids.iter().copied().collect();
    let missing_in_gold: Vec<String> = preds_by_id
        .keys()
        .filter(|id| !gold_id_set.contains(id))
        .cloned()
        .collect();
    if !missing_in_pred.is_empty() || !missing_in_gold.is_empty() {
        return Err(CliError::DocIdMismatch {
            missing_in_pred: missing_in_pred.join(", "),
            missing_in_gold: missing_in_gold.join(", "),
        });
    }

    let per_doc: Vec<Classification> = gold_docs
        .par_iter()
        .map(|doc| classify_details(&doc.gold, &preds_by_id[&doc.doc_id].predicted))
        .collect::<Result<_, _>>()?;
    let mut classification = Classification::default();
    for c in per_doc {
        classification.report.merge(&c.report);
        classification.details.extend(c.details);
    }

    let mut gold_totals: BTreeMap<Label, u32> = BTreeMap::new();
    for doc in &gold_docs {
        for e in &doc.gold {
            *gold_totals.entry(e.label).or_insert(0) += 1;
        }
    }
    // concepts that only occur in predictions still need a (zero) denominator
    for label in classification.report.per_concept().keys() {
        gold_totals.entry(*label).or_insert(0);
    }
    let docs: BTreeMap<String, Document> =
        gold_docs.into_iter().map(|d| (d.doc_id.clone(), d)).collect();
    Ok(EvaluationInput { docs, classification, gold_totals })
}

fn write_rate_table(
    table: &RateTable,
    out_dir: &Path,
    formats: FormatSelection,
) -> Result<(), CliError> {
    if formats.csv {
        write_file(out_dir, "rate_table.csv", &table.to_csv())?;
    }
    if formats.md {
        write_file(out_dir, "rate_table.md", &table.to_markdown())?;
    }
    Ok(())
}

/// Evaluates predictions against gold annotations and writes the count and
/// rate tables.
pub fn cmd_evaluate(
    gold: &Path,
    pred: &Path,
    out_dir: &Path,
    formats: FormatSelection,
) -> Result<RateTable, CliError> {
    ensure_out_dir(out_dir)?;
    let input = load_and_classify(gold, pred)?;
    let table = aggregate(&input.classification.report, &input.gold_totals)?;
    write_rate_table(&table, out_dir, formats)?;
    write_file(out_dir, "match_report.csv", &input.classification.report.to_csv())?;
    let mut manifest = Manifest::new("evaluate", None);
    manifest.add_input(gold).map_err(io_err(gold))?;
    manifest.add_input(pred).map_err(io_err(pred))?;
    write_file(out_dir, "manifest.json", &manifest.to_json())?;
    Ok(table)
}

/// Which error-association pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalysisKind {
    Length,
    Notes,
    Sections,
}

impl AnalysisKind {
    pub fn parse(s: &str) -> Result<AnalysisKind, CliError> {
        match s {
            "length" => Ok(AnalysisKind::Length),
            "notes" => Ok(AnalysisKind::Notes),
            "sections" => Ok(AnalysisKind::Sections),
            other => Err(CliError::UnknownAnalysis(other.to_string())),
        }
    }
}

/// Runs one of the three analyses over an evaluated corpus and writes its
/// report files.
pub fn cmd_analyze(
    which: AnalysisKind,
    gold: &Path,
    pred: &Path,
    lexicon_path: Option<&Path>,
    out_dir: &Path,
    formats: FormatSelection,
) -> Result<(), CliError> {
    ensure_out_dir(out_dir)?;
    let input = load_and_classify(gold, pred)?;
    match which {
        AnalysisKind::Length => {
            let records = length_records(&input.docs, &input.classification.details);
            let report = entity_length_analysis(&records);
            if formats.csv {
                write_file(out_dir, "length_table.csv", &report.to_csv())?;
            }
            if formats.md {
                write_file(out_dir, "length_table.md", &report.to_markdown())?;
            }
        }
        AnalysisKind::Notes => {
            let notes = note_records(&input.docs, &input.classification.report);
            let report = note_length_analysis(&notes)?;
            if formats.csv {
                write_file(out_dir, "note_correlations.csv", &report.to_csv())?;
            }
            if formats.md {
                write_file(out_dir, "note_correlations.md", &report.to_markdown())?;
            }
            if formats.svg {
                let (counts_svg, rates_svg) = NoteLengthReport::scatter_plots(&notes);
                write_file(out_dir, "scatter_error_counts.svg", &counts_svg)?;
                write_file(out_dir, "scatter_error_rates.svg", &rates_svg)?;
            }
        }
        AnalysisKind::Sections => {
            let lexicon = match lexicon_path {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(io_err(p))?;
                    HeaderLexicon::from_json(&text)?
                }
                None => HeaderLexicon::default(),
            };
            let report =
                segmentation_analysis(&input.docs, &input.classification.details, &lexicon);
            if formats.csv {
                write_file(out_dir, "section_tables.csv", &report.to_csv())?;
            }
            if formats.md {
                write_file(out_dir, "section_tables.md", &report.to_markdown())?;
            }
        }
    }
    let mut manifest = Manifest::new("analyze", None);
    manifest.add_input(gold).map_err(io_err(gold))?;
    manifest.add_input(pred).map_err(io_err(pred))?;
    if let Some(p) = lexicon_path {
        manifest.add_input(p).map_err(io_err(p))?;
    }
    write_file(out_dir, "manifest.json", &manifest.to_json())?;
    Ok(())
}

/// Trains the reference tagger with document-level five-fold
/// cross-validation, writes the per-fold models and out-of-fold
/// predictions, and evaluates them against the gold annotations.
pub fn cmd_train(
    gold: &Path,
    mode: Mode,
    bme_path: Option<&Path>,
    seed: u64,
    out_dir: &Path,
    formats: FormatSelection,
) -> Result<(), CliError> {
    ensure_out_dir(out_dir)?;
    let docs = read_corpus(gold)?;
    let bme: Option<BTreeMap<String, Vec<crate::corpus::Entity>>> = match (mode, bme_path) {
        (Mode::WithBme, Some(path)) => {
            let bme_docs = read_corpus(path)?;
            Some(bme_docs.into_iter().map(|d| (d.doc_id.clone(), d.gold)).collect())
        }
        (Mode::WithBme, None) => return Err(CliError::MissingBmeFile),
        (Mode::Basic, _) => None,
    };
    let ids: Vec<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
    let plan = FoldPlan::from_seed(&ids, 5, seed);
    let config = TaggerConfig::default();
    let outcome = train(&docs, mode, &plan, bme.as_ref(), &config, seed)?;

    for (i, model) in outcome.models.iter().enumerate() {
        let path = out_dir.join(format!("fold_{i}.model"));
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        save_model(std::io::BufWriter::new(file), model).map_err(io_err(&path))?;
    }
    let mut losses = String::from("fold,epoch,mean_token_loss\n");
    for (fi, fold) in outcome.epoch_losses.iter().enumerate() {
        for (ei, loss) in fold.iter().enumerate() {
            losses.push_str(&format!("{fi},{},{loss}\n", ei + 1));
        }
    }
    write_file(out_dir, "fold_losses.csv", &losses)?;

    // out-of-fold predictions as a standoff corpus
    let mut pred_docs = Vec::new();
    for doc in &docs {
        let predicted = outcome.predictions.get(&doc.doc_id).cloned().unwrap_or_default();
        let with_preds = Document::new(&doc.doc_id, &doc.text, doc.gold.clone(), predicted)
            .map_err(corpus_err(gold))?;
        pred_docs.push(with_preds);
    }
    let mut buf = String::new();
    for doc in &pred_docs {
        buf.push_str(&document_to_standoff_string(doc));
        buf.push('\n');
    }
    write_file(out_dir, "predictions.jsonl", &buf)?;

    // evaluate the out-of-fold predictions
    let mut classification = Classification::default();
    for doc in &pred_docs {
        let c = classify_details(&doc.gold, &doc.predicted)?;
        classification.report.merge(&c.report);
        classification.details.extend(c.details);
    }
    let mut gold_totals: BTreeMap<Label, u32> = BTreeMap::new();
    for doc in &docs {
        for e in &doc.gold {
            *gold_totals.entry(e.label).or_insert(0) += 1;
        }
    }
    for label in classification.report.per_concept().keys() {
        gold_totals.entry(*label).or_insert(0);
    }
    let table = aggregate(&classification.report, &gold_totals)?;
    write_rate_table(&table, out_dir, formats)?;

    let mut manifest = Manifest::new(&format!("train --mode {}", mode.as_str()), Some(seed));
    manifest.add_input(gold).map_err(io_err(gold))?;
    if let Some(p) = bme_path {
        manifest.add_input(p).map_err(io_err(p))?;
    }
    write_file(out_dir, "manifest.json", &manifest.to_json())?;
    Ok(())
}
