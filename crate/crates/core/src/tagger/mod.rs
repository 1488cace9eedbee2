//! Desk-scale linear sequence tagger: hashed sparse token features
//! (optionally concatenated with BME feature rows) feed a softmax over the
//! 25 history tags, trained by summed cross-entropy with SGD, seeded
//! dropout, eight-sentence batches, and document-level k-fold
//! cross-validation.

use crate::bio::{decode_bio, encode_bio, encode_bme_features, MheTag, TagSequence, BME_FEATURE_DIM, MHE_TAG_COUNT};
use crate::corpus::{Document, Entity};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaggerError {
    #[error("fold {0} has no documents")]
    EmptyFold(usize),
    #[error("cross-validation needs at least 2 folds with documents, got {0} documents for {1} folds")]
    TooFewDocuments(usize, usize),
    #[error("mode requires BME entities but document '{0}' has none")]
    MissingBme(String),
    #[error("loss is not finite at batch {0}")]
    NonFiniteLoss(usize),
    #[error("{0}")]
    Bio(#[from] crate::bio::BioError),
    #[error("model file is malformed: {0}")]
    BadModelFile(String),
}

/// Whether the model sees only hashed surface features or also the
/// 14-dimensional BME rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Basic,
    WithBme,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Basic => "basic",
            Mode::WithBme => "with_bme",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "basic" => Some(Mode::Basic),
            "with_bme" | "with-bme" => Some(Mode::WithBme),
            _ => None,
        }
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone)]
pub struct TaggerConfig {
    /// Width of the hashed surface-feature space.
    pub hash_width: usize,
    pub learning_rate: f64,
    pub epochs: u32,
    /// Sentences per batch.
    pub batch_sentences: usize,
    /// Probability of deactivating an active feature during training.
    pub dropout: f64,
    /// Apply dropout to the BME tail too; by default only the hashed
    /// surface features are dropped.
    pub dropout_dense_tail: bool,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            hash_width: 1 << 18,
            learning_rate: 0.1,
            epochs: 40,
            batch_sentences: 8,
            dropout: 0.10,
            dropout_dense_tail: false,
        }
    }
}

/// Sparse binary representation of one token: active hashed feature
/// indices, then optional BME bits mapped after the hashed range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenFeatures {
    pub indices: Vec<u32>,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn shape_of(token: &str) -> String {
    let mut shape = String::new();
    let mut last = '\0';
    for c in token.chars() {
        let s = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_numeric() {
            'd'
        } else {
            'p'
        };
        if s != last {
            shape.push(s);
            last = s;
        }
    }
    shape
}

/// Extracts each token's hashed surface features: the lowercased token,
/// its 3-character prefix and suffix, its shape class, and the lowercased
/// neighbors inside the same sentence.
pub fn extract_features(doc: &Document, hash_width: usize) -> Vec<TokenFeatures> {
    let lower: Vec<String> =
        doc.tokens.iter().map(|t| doc.token_text(t).to_lowercase()).collect();
    let mut features = vec![TokenFeatures { indices: Vec::new() }; doc.tokens.len()];
    for sent in doc.sentence_token_ranges() {
        for ti in sent.clone() {
            let word = &lower[ti];
            let chars: Vec<char> = word.chars().collect();
            let prefix: String = chars.iter().take(3).collect();
            let suffix: String = chars.iter().rev().take(3).rev().collect();
            let prev = if ti > sent.start { lower[ti - 1].as_str() } else { "<bos>" };
            let next = if ti + 1 < sent.end { lower[ti + 1].as_str() } else { "<eos>" };
            let raw = [
                format!("w={word}"),
                format!("p3={prefix}"),
                format!("s3={suffix}"),
                format!("shape={}", shape_of(doc.token_text(&doc.tokens[ti]))),
                format!("w-1={prev}"),
                format!("w+1={next}"),
            ];
            let mut set: BTreeSet<u32> =
                raw.iter().map(|f| (fnv1a(f.as_bytes()) % hash_width as u64) as u32).collect();
            features[ti].indices = std::mem::take(&mut set).into_iter().collect();
        }
    }
    features
}

/// Appends the BME bits of each token after the hashed range.
pub fn append_bme_features(
    features: &mut [TokenFeatures],
    doc: &Document,
    bme: &[Entity],
    hash_width: usize,
) {
    let rows = encode_bme_features(doc, bme);
    for (f, row) in features.iter_mut().zip(rows) {
        for bit in row.set_indices() {
            f.indices.push((hash_width + bit) as u32);
        }
    }
}

/// The linear output layer: one weight row per feature, 25 columns, plus a
/// bias. The softmax over a token's summed rows gives its tag distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    pub mode: Mode,
    pub hash_width: usize,
    /// hash_width, plus the BME tail width in `with_bme` mode.
    pub width: usize,
    /// Row-major: `weights[feature * 25 + tag]`.
    pub weights: Vec<f64>,
    pub bias: [f64; MHE_TAG_COUNT],
}

impl TaggerModel {
    pub fn zeroed(mode: Mode, hash_width: usize) -> TaggerModel {
        let width = match mode {
            Mode::Basic => hash_width,
            Mode::WithBme => hash_width + BME_FEATURE_DIM,
        };
        TaggerModel {
            mode,
            hash_width,
            width,
            weights: vec![0.0; width * MHE_TAG_COUNT],
            bias: [0.0; MHE_TAG_COUNT],
        }
    }

    fn logits(&self, token: &TokenFeatures, dropped: Option<&BTreeSet<u32>>) -> [f64; MHE_TAG_COUNT] {
        let mut z = self.bias;
        for j in &token.indices {
            if let Some(mask) = dropped {
                if mask.contains(j) {
                    continue;
                }
            }
            let base = *j as usize * MHE_TAG_COUNT;
            for (k, zk) in z.iter_mut().enumerate() {
                *zk += self.weights[base + k];
            }
        }
        z
    }

    /// Per-token tag distribution; sums to one.
    pub fn probabilities(&self, token: &TokenFeatures) -> [f64; MHE_TAG_COUNT] {
        softmax(&self.logits(token, None))
    }
}

fn softmax(z: &[f64; MHE_TAG_COUNT]) -> [f64; MHE_TAG_COUNT] {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; MHE_TAG_COUNT];
    let mut sum = 0.0;
    for (o, zk) in out.iter_mut().zip(z) {
        *o = (zk - max).exp();
        sum += *o;
    }
    for o in &mut out {
        *o /= sum;
    }
    out
}

/// Gradient of the batch loss, stored sparsely: only rows of features
/// active in the batch can be nonzero. Shapes match the model's weights
/// and bias.
#[derive(Debug, Clone, Default)]
pub struct Gradient {
    pub rows: BTreeMap<u32, [f64; MHE_TAG_COUNT]>,
    pub bias: [f64; MHE_TAG_COUNT],
}

impl Gradient {
    /// Dense view for comparisons against numeric differentiation.
    pub fn to_dense(&self, width: usize) -> Vec<f64> {
        let mut dense = vec![0.0; width * MHE_TAG_COUNT];
        for (j, row) in &self.rows {
            let base = *j as usize * MHE_TAG_COUNT;
            dense[base..base + MHE_TAG_COUNT].copy_from_slice(row);
        }
        dense
    }
}

/// Per-token dropout masks: the set of deactivated feature indices.
pub type DropoutMasks = Vec<BTreeSet<u32>>;

/// Summed cross-entropy loss of a batch and its exact gradient. Dropout
/// masks, when given, zero the masked features before the product; they
/// are sampled by the training loop, never here, so the gradient is exact
/// for the masked objective.
pub fn loss_and_grad(
    model: &TaggerModel,
    batch: &[(TokenFeatures, MheTag)],
    masks: Option<&DropoutMasks>,
) -> (f64, Gradient) {
    let mut loss = 0.0;
    let mut grad = Gradient::default();
    for (i, (token, tag)) in batch.iter().enumerate() {
        let mask = masks.map(|m| &m[i]);
        let z = model.logits(token, mask);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum: f64 = z.iter().map(|zk| (zk - max).exp()).sum::<f64>().ln() + max;
        let y = tag.index();
        loss += log_sum - z[y];
        for (k, zk) in z.iter().enumerate() {
            let p = (zk - log_sum).exp();
            let g = p - if k == y { 1.0 } else { 0.0 };
            grad.bias[k] += g;
            for j in &token.indices {
                if let Some(m) = mask {
                    if m.contains(j) {
                        continue;
                    }
                }
                grad.rows.entry(*j).or_insert([0.0; MHE_TAG_COUNT])[k] += g;
            }
        }
    }
    (loss, grad)
}

fn apply_gradient(model: &mut TaggerModel, grad: &Gradient, lr: f64) {
    for (j, row) in &grad.rows {
        let base = *j as usize * MHE_TAG_COUNT;
        for (k, g) in row.iter().enumerate() {
            model.weights[base + k] -= lr * g;
        }
    }
    for (k, g) in grad.bias.iter().enumerate() {
        model.bias[k] -= lr * g;
    }
}

/// Document-level fold assignment: disjoint, exhaustive, sizes within one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub folds: Vec<BTreeSet<String>>,
}

impl FoldPlan {
    /// Deterministic plan: ids are sorted, shuffled with the seed, and
    /// dealt round-robin.
    pub fn from_seed(doc_ids: &[String], folds: usize, seed: u64) -> FoldPlan {
        let mut ids: Vec<String> = doc_ids.to_vec();
        ids.sort();
        ids.dedup();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ids.shuffle(&mut rng);
        let mut sets = vec![BTreeSet::new(); folds];
        for (i, id) in ids.into_iter().enumerate() {
            sets[i % folds].insert(id);
        }
        FoldPlan { folds: sets }
    }

    pub fn fold_of(&self, doc_id: &str) -> Option<usize> {
        self.folds.iter().position(|f| f.contains(doc_id))
    }
}

/// Everything a cross-validated training run produces.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub models: Vec<TaggerModel>,
    /// Out-of-fold predictions: each document predicted by the one model
    /// not trained on it.
    pub predictions: BTreeMap<String, Vec<Entity>>,
    /// Mean per-token loss of each epoch, per fold.
    pub epoch_losses: Vec<Vec<f64>>,
}

struct PreparedDoc {
    doc_id: String,
    features: Vec<TokenFeatures>,
    tags: Vec<MheTag>,
    sentences: Vec<std::ops::Range<usize>>,
}

fn prepare(
    docs: &[Document],
    mode: Mode,
    bme: Option<&BTreeMap<String, Vec<Entity>>>,
    config: &TaggerConfig,
) -> Result<Vec<PreparedDoc>, TaggerError> {
    docs.iter()
        .map(|doc| {
            let mut features = extract_features(doc, config.hash_width);
            if mode == Mode::WithBme {
                let ents = bme
                    .and_then(|m| m.get(&doc.doc_id))
                    .ok_or_else(|| TaggerError::MissingBme(doc.doc_id.clone()))?;
                append_bme_features(&mut features, doc, ents, config.hash_width);
            }
            let tags: TagSequence = encode_bio(doc, &doc.gold)?;
            Ok(PreparedDoc {
                doc_id: doc.doc_id.clone(),
                features,
                tags: tags.tags,
                sentences: doc.sentence_token_ranges(),
            })
        })
        .collect()
}

fn sample_masks(
    batch: &[(TokenFeatures, MheTag)],
    config: &TaggerConfig,
    rng: &mut ChaCha8Rng,
) -> DropoutMasks {
    batch
        .iter()
        .map(|(token, _)| {
            let mut mask = BTreeSet::new();
            for j in &token.indices {
                let in_tail = (*j as usize) >= config.hash_width;
                if in_tail && !config.dropout_dense_tail {
                    continue;
                }
                if rng.gen::<f64>() < config.dropout {
                    mask.insert(*j);
                }
            }
            mask
        })
        .collect()
}

fn train_single_fold(
    train_docs: &[&PreparedDoc],
    mode: Mode,
    config: &TaggerConfig,
    seed: u64,
) -> Result<(TaggerModel, Vec<f64>), TaggerError> {
    let mut model = TaggerModel::zeroed(mode, config.hash_width);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // (doc index, sentence range)
    let mut sentences: Vec<(usize, std::ops::Range<usize>)> = train_docs
        .iter()
        .enumerate()
        .flat_map(|(di, d)| d.sentences.iter().cloned().map(move |r| (di, r)))
        .collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs as usize);
    for _epoch in 0..config.epochs {
        sentences.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_tokens = 0usize;
        for (bi, chunk) in sentences.chunks(config.batch_sentences.max(1)).enumerate() {
            let batch: Vec<(TokenFeatures, MheTag)> = chunk
                .iter()
                .flat_map(|(di, r)| {
                    let d = train_docs[*di];
                    r.clone().map(move |ti| (d.features[ti].clone(), d.tags[ti]))
                })
                .collect();
            if batch.is_empty() {
                continue;
            }
            let masks = if config.dropout > 0.0 {
                Some(sample_masks(&batch, config, &mut rng))
            } else {
                None
            };
            let (loss, grad) = loss_and_grad(&model, &batch, masks.as_ref());
            if !loss.is_finite() {
                return Err(TaggerError::NonFiniteLoss(bi));
            }
            apply_gradient(&mut model, &grad, config.learning_rate);
            epoch_loss += loss;
            epoch_tokens += batch.len();
        }
        epoch_losses.push(if epoch_tokens > 0 { epoch_loss / epoch_tokens as f64 } else { 0.0 });
    }
    Ok((model, epoch_losses))
}

/// Trains one model per fold on the documents outside it and predicts the
/// held-out documents, so each document is predicted exactly once.
/// Deterministic under a fixed seed.
pub fn train(
    docs: &[Document],
    mode: Mode,
    plan: &FoldPlan,
    bme: Option<&BTreeMap<String, Vec<Entity>>>,
    config: &TaggerConfig,
    seed: u64,
) -> Result<TrainOutcome, TaggerError> {
    for (i, fold) in plan.folds.iter().enumerate() {
        if fold.is_empty() {
            return Err(TaggerError::EmptyFold(i));
        }
    }
    if plan.folds.len() < 2 {
        return Err(TaggerError::TooFewDocuments(docs.len(), plan.folds.len()));
    }
    let prepared = prepare(docs, mode, bme, config)?;
    let by_id: BTreeMap<&str, usize> =
        prepared.iter().enumerate().map(|(i, d)| (d.doc_id.as_str(), i)).collect();

    let fold_results: Vec<Result<(TaggerModel, Vec<f64>), TaggerError>> = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(fi, held_out)| {
            let train_docs: Vec<&PreparedDoc> =
                prepared.iter().filter(|d| !held_out.contains(&d.doc_id)).collect();
            if train_docs.is_empty() {
                return Err(TaggerError::EmptyFold(fi));
            }
            let fold_seed = seed.wrapping_add((fi as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            train_single_fold(&train_docs, mode, config, fold_seed)
        })
        .collect();

    let mut models = Vec::new();
    let mut epoch_losses = Vec::new();
    for r in fold_results {
        let (m, l) = r?;
        models.push(m);
        epoch_losses.push(l);
    }

    let mut predictions = BTreeMap::new();
    for doc in docs {
        let fi = plan.fold_of(&doc.doc_id).unwrap_or(0);
        let d = &prepared[by_id[doc.doc_id.as_str()]];
        let ents = predict_prepared(&models[fi], doc, &d.features)?;
        predictions.insert(doc.doc_id.clone(), ents);
    }
    Ok(TrainOutcome { models, predictions, epoch_losses })
}

fn predict_prepared(
    model: &TaggerModel,
    doc: &Document,
    features: &[TokenFeatures],
) -> Result<Vec<Entity>, TaggerError> {
    let tags: Vec<MheTag> = features
        .iter()
        .map(|f| {
            let z = model.logits(f, None);
            // ties break to the lowest tag index
            let mut best = 0usize;
            for (k, zk) in z.iter().enumerate().skip(1) {
                if *zk > z[best] {
                    best = k;
                }
            }
            MheTag::from_index(best).expect("argmax index is in range")
        })
        .collect();
    let seq = TagSequence { doc_id: doc.doc_id.clone(), tags };
    Ok(decode_bio(&seq, doc)?.entities)
}

/// Tags one document with a trained model (dropout off): per-token argmax
/// then lenient BIO decoding.
pub fn predict(
    model: &TaggerModel,
    doc: &Document,
    bme: Option<&[Entity]>,
) -> Result<Vec<Entity>, TaggerError> {
    let mut features = extract_features(doc, model.hash_width);
    if model.mode == Mode::WithBme {
        let ents = bme.ok_or_else(|| TaggerError::MissingBme(doc.doc_id.clone()))?;
        append_bme_features(&mut features, doc, ents, model.hash_width);
    }
    predict_prepared(model, doc, &features)
}

/// Writes the model in a versioned text format: a dimension header, the
/// bias row, then the nonzero weight rows in row-major order.
pub fn save_model<W: std::io::Write>(mut w: W, model: &TaggerModel) -> std::io::Result<()> {
    writeln!(w, "histent-tagger v1")?;
    writeln!(
        w,
        "mode {} hash_width {} width {} tags {}",
        model.mode.as_str(),
        model.hash_width,
        model.width,
        MHE_TAG_COUNT
    )?;
    let fmt_row = |row: &[f64]| row.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
    writeln!(w, "bias {}", fmt_row(&model.bias))?;
    for j in 0..model.width {
        let base = j * MHE_TAG_COUNT;
        let row = &model.weights[base..base + MHE_TAG_COUNT];
        if row.iter().any(|v| *v != 0.0) {
            writeln!(w, "row {} {}", j, fmt_row(row))?;
        }
    }
    writeln!(w, "end")?;
    Ok(())
}

/// Reads a model written by [`save_model`].
pub fn load_model(input: &str) -> Result<TaggerModel, TaggerError> {
    let bad = |m: &str| TaggerError::BadModelFile(m.to_string());
    let mut lines = input.lines();
    if lines.next() != Some("histent-tagger v1") {
        return Err(bad("missing version header"));
    }
    let header = lines.next().ok_or_else(|| bad("missing dimension header"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 8 || parts[0] != "mode" || parts[2] != "hash_width" || parts[4] != "width" {
        return Err(bad("malformed dimension header"));
    }
    let mode = Mode::parse(parts[1]).ok_or_else(|| bad("unknown mode"))?;
    let hash_width: usize = parts[3].parse().map_err(|_| bad("bad hash_width"))?;
    let width: usize = parts[5].parse().map_err(|_| bad("bad width"))?;
    let tags: usize = parts[7].parse().map_err(|_| bad("bad tag count"))?;
    if tags != MHE_TAG_COUNT {
        return Err(bad("tag count mismatch"));
    }
    let mut model = TaggerModel::zeroed(mode, hash_width);
    if model.width != width {
        return Err(bad("width inconsistent with mode and hash_width"));
    }
    let parse_vals = |iter: std::str::SplitWhitespace<'_>| -> Result<Vec<f64>, TaggerError> {
        iter.map(|v| v.parse::<f64>().map_err(|_| bad("bad float")))
            .collect()
    };
    for line in lines {
        if line == "end" {
            return Ok(model);
        }
        let mut it = line.split_whitespace();
        match it.next() {
            Some("bias") => {
                let vals = parse_vals(it)?;
                if vals.len() != MHE_TAG_COUNT {
                    return Err(bad("bias row length"));
                }
                model.bias.copy_from_slice(&vals);
            }
            Some("row") => {
                let j: usize = it
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| bad("bad row index"))?;
                if j >= model.width {
                    return Err(bad("row index out of range"));
                }
                let vals = parse_vals(it)?;
                if vals.len() != MHE_TAG_COUNT {
                    return Err(bad("weight row length"));
                }
                model.weights[j * MHE_TAG_COUNT..(j + 1) * MHE_TAG_COUNT].copy_from_slice(&vals);
            }
            _ => return Err(bad("unexpected line")),
        }
    }
    Err(bad("missing end marker"))
}
