//! Contextualized skip-gram embeddings with negative sampling: one global
//! vector per word plus one additive deviation matrix per industry.
//!
//! The effective vector of word w in industry i is W[w] + D_i[w]; all
//! vectors share one k-dimensional space, so neighbors can be compared
//! across industries. Only the target side is contextualized; context words
//! are scored with industry-independent output vectors. Deviations start at
//! zero, so before any update the model reduces to plain skip-gram.
//!
//! Training is single-threaded and fully deterministic under a fixed seed.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{clean_and_tokenize, Corpus};
use crate::{Error, Result};

const MODEL_MAGIC: &[u8; 4] = b"CEMB";
const MODEL_FORMAT_VERSION: u32 = 1;
const NOISE_EXPONENT: f64 = 0.75;
const LR_FLOOR_FACTOR: f64 = 1e-4;
const MAX_NEGATIVE_RETRIES: usize = 10;

/// Skip-gram training knobs. Only the dimension k comes from the method
/// being reproduced; the rest are standard defaults declared here.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub min_count: u64,
    /// Frequency subsampling threshold; 0 disables subsampling.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            min_count: 5,
            subsample: 1e-3,
            seed: 1,
        }
    }
}

impl TrainingConfig {
    fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::InvalidArgument("embedding dimension must be >= 1".into()));
        }
        if self.negatives < 1 {
            return Err(Error::InvalidArgument("negatives must be >= 1".into()));
        }
        if self.initial_lr <= 0.0 {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if self.window < 1 {
            return Err(Error::InvalidArgument("window radius must be >= 1".into()));
        }
        Ok(())
    }
}

/// Global vectors, per-industry deviations, and output vectors over one
/// vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualEmbeddingModel {
    words: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
    industries: Vec<String>,
    dim: usize,
    w_global: Array2<f64>,
    c_output: Array2<f64>,
    /// One |V|×k deviation matrix per industry, parallel to `industries`.
    deviations: Vec<Array2<f64>>,
}

/// Ordered (term, cosine) pairs, descending. The query term itself heads the
/// list with cosine 1.0. Candidates with zero-norm vectors are skipped and
/// reported.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub entries: Vec<(String, f64)>,
    pub skipped: Vec<String>,
}

/// Per-epoch average positive-pair loss, for convergence checks.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainStats {
    pub epoch_losses: Vec<f64>,
    pub pairs_trained: u64,
}

/// Loss and analytic gradients of one skip-gram example: a positive
/// (target, context) pair plus sampled negatives. The target row enters as
/// the sum of its global and deviation rows, so both receive the same
/// gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradients {
    pub loss: f64,
    pub target_global: Vec<f64>,
    pub target_deviation: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable −ln σ(x) = softplus(−x).
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Loss = −ln σ((g+d)·c) − Σ_n ln σ(−(g+d)·c_n), with analytic partial
/// derivatives with respect to every row.
pub fn sgns_loss_grad(
    target_global: &[f64],
    target_deviation: &[f64],
    context: &[f64],
    negatives: &[&[f64]],
) -> SgnsGradients {
    let k = target_global.len();
    debug_assert_eq!(target_deviation.len(), k);
    debug_assert_eq!(context.len(), k);

    let target: Vec<f64> = target_global
        .iter()
        .zip(target_deviation)
        .map(|(g, d)| g + d)
        .collect();

    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };

    let s_pos = dot(&target, context);
    let mut loss = softplus(-s_pos);
    let g_pos = sigmoid(s_pos) - 1.0;

    let mut grad_target: Vec<f64> = context.iter().map(|c| g_pos * c).collect();
    let grad_context: Vec<f64> = target.iter().map(|t| g_pos * t).collect();

    let mut grad_negatives = Vec::with_capacity(negatives.len());
    for neg in negatives {
        debug_assert_eq!(neg.len(), k);
        let s_neg = dot(&target, neg);
        loss += softplus(s_neg);
        let g_neg = sigmoid(s_neg);
        for (gt, n) in grad_target.iter_mut().zip(neg.iter()) {
            *gt += g_neg * n;
        }
        grad_negatives.push(target.iter().map(|t| g_neg * t).collect());
    }

    SgnsGradients {
        loss,
        target_global: grad_target.clone(),
        target_deviation: grad_target,
        context: grad_context,
        negatives: grad_negatives,
    }
}

/// Cumulative-weight sampler over the unigram distribution raised to 0.75.
struct NoiseSampler {
    cumulative: Vec<f64>,
    total: f64,
}

impl NoiseSampler {
    fn new(counts: &[u64]) -> NoiseSampler {
        let mut cumulative = Vec::with_capacity(counts.len());
        let mut total = 0.0;
        for &c in counts {
            total += (c as f64).powf(NOISE_EXPONENT);
            cumulative.push(total);
        }
        NoiseSampler { cumulative, total }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let u = rng.gen::<f64>() * self.total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

fn build_vocab(corpus: &Corpus, min_count: u64) -> (Vec<String>, Vec<u64>, u64) {
    let mut raw: HashMap<String, u64> = HashMap::new();
    for user in &corpus.users {
        for post in &user.posts {
            for tok in clean_and_tokenize(post) {
                *raw.entry(tok).or_insert(0) += 1;
            }
        }
    }
    let mut pairs: Vec<(String, u64)> = raw
        .into_iter()
        .filter(|(_, c)| *c >= min_count)
        .collect();
    // frequency-descending with lexicographic tie-break, so ordering is
    // deterministic
    pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let total = pairs.iter().map(|(_, c)| *c).sum();
    let (words, counts) = pairs.into_iter().unzip();
    (words, counts, total)
}

/// Initializes a model without training: global vectors uniform in
/// [−0.5/k, 0.5/k], deviations and output vectors zero.
pub fn init_model(corpus: &Corpus, config: &TrainingConfig) -> Result<ContextualEmbeddingModel> {
    config.validate()?;
    let (words, counts, _total) = build_vocab(corpus, config.min_count);
    if words.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let v = words.len();
    let k = config.dim;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let half = 0.5 / k as f64;
    let w_global = Array2::from_shape_fn((v, k), |_| rng.gen_range(-half..half));
    let c_output = Array2::zeros((v, k));
    let deviations = corpus
        .taxonomy
        .iter()
        .map(|_| Array2::zeros((v, k)))
        .collect();

    let index = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();

    Ok(ContextualEmbeddingModel {
        words,
        index,
        counts,
        industries: corpus.taxonomy.clone(),
        dim: k,
        w_global,
        c_output,
        deviations,
    })
}

/// Trains contextualized skip-gram embeddings with negative sampling.
///
/// For every (target, context) pair inside a post window, with the target
/// user's industry i, the score is (W[t] + D_i[t]) · C[c]; SGD updates
/// W[t], D_i[t], C[c] and the sampled negative output rows. Negatives are
/// drawn from the unigram distribution raised to 0.75, re-drawn when they
/// collide with the positive context word.
pub fn train_embeddings(
    corpus: &Corpus,
    config: &TrainingConfig,
) -> Result<(ContextualEmbeddingModel, TrainStats)> {
    let mut model = init_model(corpus, config)?;
    let k = config.dim;
    let sampler = NoiseSampler::new(&model.counts);
    let total_tokens: u64 = model.counts.iter().sum();

    // token sequences per (industry index, post), restricted to the
    // vocabulary; windows never cross post boundaries
    let industry_index: HashMap<&str, usize> = model
        .industries
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut posts: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut total_positions: u64 = 0;
    for user in &corpus.users {
        let ind = industry_index[user.industry.as_str()];
        for post in &user.posts {
            let ids: Vec<usize> = clean_and_tokenize(post)
                .into_iter()
                .filter_map(|t| model.index.get(&t).copied())
                .collect();
            if ids.len() > 1 {
                total_positions += ids.len() as u64;
                posts.push((ind, ids));
            }
        }
    }
    if posts.is_empty() {
        return Err(Error::InvalidArgument(
            "no trainable posts: every post has fewer than 2 in-vocabulary tokens".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let schedule_total = (total_positions * config.epochs as u64) as f64;
    let mut processed: u64 = 0;
    let mut pairs_trained: u64 = 0;
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    let mut target = Array1::<f64>::zeros(k);
    let mut grad_target = Array1::<f64>::zeros(k);

    for _epoch in 0..config.epochs {
        let mut epoch_loss = 0.0;
        let mut epoch_pairs: u64 = 0;

        for (industry, ids) in &posts {
            let lr = config.initial_lr
                * (1.0 - processed as f64 / schedule_total).max(LR_FLOOR_FACTOR);

            // frequency subsampling of token occurrences
            let kept: Vec<usize> = ids
                .iter()
                .copied()
                .filter(|&id| {
                    processed += 1;
                    if config.subsample <= 0.0 {
                        return true;
                    }
                    let f = model.counts[id] as f64 / total_tokens as f64;
                    let keep = (config.subsample / f).sqrt() + config.subsample / f;
                    rng.gen::<f64>() < keep
                })
                .collect();
            if kept.len() < 2 {
                continue;
            }

            for (pos, &t_id) in kept.iter().enumerate() {
                let reach = rng.gen_range(1..=config.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(kept.len() - 1);
                for (c_pos, &c_id) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                    if c_pos == pos {
                        continue;
                    }
                    let dev = &model.deviations[*industry];
                    for d in 0..k {
                        target[d] = model.w_global[(t_id, d)] + dev[(t_id, d)];
                        grad_target[d] = 0.0;
                    }

                    // positive pair
                    let s_pos: f64 = (0..k).map(|d| target[d] * model.c_output[(c_id, d)]).sum();
                    let mut pair_loss = softplus(-s_pos);
                    let g_pos = sigmoid(s_pos) - 1.0;
                    for d in 0..k {
                        grad_target[d] += g_pos * model.c_output[(c_id, d)];
                        model.c_output[(c_id, d)] -= lr * g_pos * target[d];
                    }

                    // sampled negatives, re-drawn on collision with the context
                    for _ in 0..config.negatives {
                        let mut n_id = sampler.sample(&mut rng);
                        for _ in 0..MAX_NEGATIVE_RETRIES {
                            if n_id != c_id {
                                break;
                            }
                            n_id = sampler.sample(&mut rng);
                        }
                        let s_neg: f64 =
                            (0..k).map(|d| target[d] * model.c_output[(n_id, d)]).sum();
                        pair_loss += softplus(s_neg);
                        let g_neg = sigmoid(s_neg);
                        for d in 0..k {
                            grad_target[d] += g_neg * model.c_output[(n_id, d)];
                            model.c_output[(n_id, d)] -= lr * g_neg * target[d];
                        }
                    }

                    // the global row and the deviation row share the gradient
                    let dev = &mut model.deviations[*industry];
                    for d in 0..k {
                        model.w_global[(t_id, d)] -= lr * grad_target[d];
                        dev[(t_id, d)] -= lr * grad_target[d];
                    }

                    epoch_loss += pair_loss;
                    epoch_pairs += 1;
                }
            }
        }

        pairs_trained += epoch_pairs;
        epoch_losses.push(if epoch_pairs > 0 {
            epoch_loss / epoch_pairs as f64
        } else {
            0.0
        });
    }

    Ok((
        model,
        TrainStats {
            epoch_losses,
            pairs_trained,
        },
    ))
}

impl ContextualEmbeddingModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn industries(&self) -> &[String] {
        &self.industries
    }

    pub fn word_count(&self, word: &str) -> Option<u64> {
        self.index.get(word).map(|&i| self.counts[i])
    }

    fn word_id(&self, word: &str) -> Result<usize> {
        self.index
            .get(word)
            .copied()
            .ok_or_else(|| Error::OutOfVocabulary(word.to_string()))
    }

    fn industry_id(&self, industry: &str) -> Result<usize> {
        self.industries
            .iter()
            .position(|i| i == industry)
            .ok_or_else(|| Error::UnknownIndustry(industry.to_string()))
    }

    /// W[w] when no industry is given; W[w] + D_i[w] otherwise.
    pub fn word_vector(&self, word: &str, industry: Option<&str>) -> Result<Vec<f64>> {
        let w = self.word_id(word)?;
        let mut vec: Vec<f64> = self.w_global.row(w).to_vec();
        if let Some(industry) = industry {
            let i = self.industry_id(industry)?;
            for (v, d) in vec.iter_mut().zip(self.deviations[i].row(w)) {
                *v += d;
            }
        }
        Ok(vec)
    }

    /// Cosine similarity between the query's contextual vector and every
    /// vocabulary word's contextual vector within the same industry,
    /// descending, truncated to `top_n`. The query word itself is included.
    pub fn neighbors(&self, word: &str, industry: &str, top_n: usize) -> Result<NeighborList> {
        let query = self.word_vector(word, Some(industry))?;
        let q_norm = norm(&query);
        if q_norm == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "query vector for `{word}` has zero norm"
            )));
        }
        let i = self.industry_id(industry)?;

        let mut entries: Vec<(String, f64)> = Vec::with_capacity(self.words.len());
        let mut skipped = Vec::new();
        for (w, candidate) in self.words.iter().enumerate() {
            let mut dot = 0.0;
            let mut sq = 0.0;
            for d in 0..self.dim {
                let x = self.w_global[(w, d)] + self.deviations[i][(w, d)];
                dot += x * query[d];
                sq += x * x;
            }
            if sq == 0.0 {
                skipped.push(candidate.clone());
                continue;
            }
            entries.push((candidate.clone(), dot / (sq.sqrt() * q_norm)));
        }
        entries.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        entries.truncate(top_n);
        Ok(NeighborList { entries, skipped })
    }

    /// Versioned little-endian binary: vocabulary with counts, industries,
    /// then the W, C, and per-industry deviation matrices.
    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io_err = |e: std::io::Error| Error::io(path, e);

        w.write_all(MODEL_MAGIC).map_err(io_err)?;
        w.write_u32::<LittleEndian>(MODEL_FORMAT_VERSION).map_err(io_err)?;
        w.write_u32::<LittleEndian>(self.dim as u32).map_err(io_err)?;
        w.write_u32::<LittleEndian>(self.words.len() as u32).map_err(io_err)?;
        w.write_u32::<LittleEndian>(self.industries.len() as u32).map_err(io_err)?;
        for (word, &count) in self.words.iter().zip(&self.counts) {
            write_str(&mut w, word).map_err(io_err)?;
            w.write_u64::<LittleEndian>(count).map_err(io_err)?;
        }
        for industry in &self.industries {
            write_str(&mut w, industry).map_err(io_err)?;
        }
        for m in std::iter::once(&self.w_global)
            .chain(std::iter::once(&self.c_output))
            .chain(self.deviations.iter())
        {
            for &x in m.iter() {
                w.write_f64::<LittleEndian>(x).map_err(io_err)?;
            }
        }
        w.flush().map_err(io_err)?;
        Ok(())
    }

    pub fn load_binary(path: impl AsRef<Path>) -> Result<ContextualEmbeddingModel> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let io_err = |e: std::io::Error| Error::io(path, e);

        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io_err)?;
        if &magic != MODEL_MAGIC {
            return Err(Error::ModelFormat("not an embedding model file".into()));
        }
        let version = r.read_u32::<LittleEndian>().map_err(io_err)?;
        if version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "embedding model format version {version} (expected {MODEL_FORMAT_VERSION})"
            )));
        }
        let dim = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
        let v = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
        let n_ind = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;

        let mut words = Vec::with_capacity(v);
        let mut counts = Vec::with_capacity(v);
        for _ in 0..v {
            words.push(read_str(&mut r).map_err(io_err)?);
            counts.push(r.read_u64::<LittleEndian>().map_err(io_err)?);
        }
        let mut industries = Vec::with_capacity(n_ind);
        for _ in 0..n_ind {
            industries.push(read_str(&mut r).map_err(io_err)?);
        }

        let mut read_matrix = |rows: usize| -> std::result::Result<Array2<f64>, std::io::Error> {
            let mut data = Vec::with_capacity(rows * dim);
            for _ in 0..rows * dim {
                data.push(r.read_f64::<LittleEndian>()?);
            }
            Ok(Array2::from_shape_vec((rows, dim), data).expect("shape matches read size"))
        };
        let w_global = read_matrix(v).map_err(io_err)?;
        let c_output = read_matrix(v).map_err(io_err)?;
        let mut deviations = Vec::with_capacity(n_ind);
        for _ in 0..n_ind {
            deviations.push(read_matrix(v).map_err(io_err)?);
        }

        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Ok(ContextualEmbeddingModel {
            words,
            index,
            counts,
            industries,
            dim,
            w_global,
            c_output,
            deviations,
        })
    }

    /// Tab-separated inspection dump: `word<TAB>industry<TAB>k floats`.
    /// Global vectors come first under the reserved industry label `global`.
    pub fn export_text<W: Write>(&self, mut w: W) -> Result<()> {
        let io_err = |e: std::io::Error| Error::io("<embedding text export>", e);
        let write_row = |w: &mut W, word: &str, industry: &str, row: &[f64]| {
            let floats: Vec<String> = row.iter().map(|x| format!("{x:.6}")).collect();
            writeln!(w, "{word}\t{industry}\t{}", floats.join(" "))
        };
        for (wi, word) in self.words.iter().enumerate() {
            write_row(&mut w, word, "global", &self.w_global.row(wi).to_vec()).map_err(io_err)?;
        }
        for (ii, industry) in self.industries.iter().enumerate() {
            for (wi, word) in self.words.iter().enumerate() {
                let row: Vec<f64> = self
                    .w_global
                    .row(wi)
                    .iter()
                    .zip(self.deviations[ii].row(wi))
                    .map(|(g, d)| g + d)
                    .collect();
                write_row(&mut w, word, industry, &row).map_err(io_err)?;
            }
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn nudge_for_test(&mut self, word: usize, dim: usize, delta: f64) {
        self.w_global[(word, dim)] += delta;
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> std::io::Result<String> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
