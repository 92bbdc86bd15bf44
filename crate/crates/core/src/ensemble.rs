//! Classifier combination: early fusion (feature concatenation), late fusion
//! (stacked generalization), and inter-classifier diagnostics (Fleiss's
//! kappa, double fault).
//!
//! Stacking trains each base (L0) classifier on k−1 folds and lets it
//! predict the held-out fold; the out-of-fold label tuples train a
//! categorical Naive Bayes meta (L1) classifier. L0s are then refit on the
//! full training set for inference. Vocabularies are rebuilt per fold so no
//! L1 training row is influenced by the instance it predicts.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, UserRecord};
use crate::features::{build_vocabulary, TextField};
use crate::nb::{self, CategoricalField, FeatureGroupSpec, NbModel, Prediction};
use crate::{Error, Result};

const MODEL_FORMAT_VERSION: u32 = 1;

/// Instance × classifier matrix of predicted labels plus the true labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    pub classifier_names: Vec<String>,
    /// rows[i][j] = label assigned to instance i by classifier j.
    pub rows: Vec<Vec<String>>,
    pub truth: Vec<String>,
}

impl PredictionMatrix {
    pub fn new(
        classifier_names: Vec<String>,
        rows: Vec<Vec<String>>,
        truth: Vec<String>,
    ) -> Result<Self> {
        if rows.len() != truth.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: truth.len(),
            });
        }
        if rows.iter().any(|r| r.len() != classifier_names.len()) {
            return Err(Error::InvalidArgument(
                "prediction matrix is not rectangular".into(),
            ));
        }
        Ok(PredictionMatrix {
            classifier_names,
            rows,
            truth,
        })
    }

    pub fn column(&self, j: usize) -> Vec<String> {
        self.rows.iter().map(|r| r[j].clone()).collect()
    }
}

/// Fleiss's kappa treating classifiers as raters and labels as categories:
/// κ = (P̄ − P̄ₑ)/(1 − P̄ₑ). When every rating in the matrix is one single
/// category (P̄ₑ = 1), agreement is trivially perfect and κ is defined as 1.
pub fn fleiss_kappa(m: &PredictionMatrix) -> Result<f64> {
    let n_raters = m.classifier_names.len();
    let n_items = m.rows.len();
    if n_raters < 2 {
        return Err(Error::InvalidArgument(
            "Fleiss's kappa needs at least 2 classifiers".into(),
        ));
    }
    if n_items == 0 {
        return Err(Error::InvalidArgument(
            "Fleiss's kappa needs at least 1 instance".into(),
        ));
    }

    let mut categories: Vec<&str> = m
        .rows
        .iter()
        .flat_map(|r| r.iter().map(|s| s.as_str()))
        .collect();
    categories.sort_unstable();
    categories.dedup();
    let cat_index: BTreeMap<&str, usize> = categories
        .iter()
        .enumerate()
        .map(|(i, c)| (*c, i))
        .collect();

    let mut p_bar = 0.0;
    let mut totals = vec![0u64; categories.len()];
    for row in &m.rows {
        let mut counts = vec![0u64; categories.len()];
        for label in row {
            counts[cat_index[label.as_str()]] += 1;
        }
        let sum_sq: u64 = counts.iter().map(|&c| c * c).sum();
        p_bar += (sum_sq - n_raters as u64) as f64
            / (n_raters as f64 * (n_raters as f64 - 1.0));
        for (t, c) in totals.iter_mut().zip(&counts) {
            *t += c;
        }
    }
    p_bar /= n_items as f64;

    let all = (n_items * n_raters) as f64;
    let p_e: f64 = totals
        .iter()
        .map(|&t| {
            let p = t as f64 / all;
            p * p
        })
        .sum();

    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(1.0);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Fraction of instances misclassified by both classifiers.
pub fn double_fault(a: &[String], b: &[String], truth: &[String]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument(
            "double fault needs at least 1 instance".into(),
        ));
    }
    let both_wrong = truth
        .iter()
        .zip(a.iter().zip(b))
        .filter(|(t, (pa, pb))| pa != t && pb != t)
        .count();
    Ok(both_wrong as f64 / truth.len() as f64)
}

/// Diagnostics export in a square layout: classifier names on the diagonal,
/// pairwise kappa below it, double fault above it.
pub fn write_diagnostics_csv<W: Write>(m: &PredictionMatrix, w: W) -> Result<()> {
    let n = m.classifier_names.len();
    let columns: Vec<Vec<String>> = (0..n).map(|j| m.column(j)).collect();
    let mut wtr = csv::Writer::from_writer(w);
    for i in 0..n {
        let mut row: Vec<String> = Vec::with_capacity(n);
        for j in 0..n {
            if i == j {
                row.push(m.classifier_names[i].clone());
            } else if i > j {
                let pair = PredictionMatrix::new(
                    vec![m.classifier_names[i].clone(), m.classifier_names[j].clone()],
                    columns[i]
                        .iter()
                        .zip(&columns[j])
                        .map(|(a, b)| vec![a.clone(), b.clone()])
                        .collect(),
                    m.truth.clone(),
                )?;
                row.push(format!("{:.6}", fleiss_kappa(&pair)?));
            } else {
                row.push(format!(
                    "{:.6}",
                    double_fault(&columns[i], &columns[j], &m.truth)?
                ));
            }
        }
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<diagnostics csv>", e))?;
    Ok(())
}

/// How to build one feature group of a base classifier from a training
/// corpus. Bag groups rebuild their vocabulary from whatever corpus they are
/// fitted on, which is what keeps per-fold training leak-free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GroupRecipe {
    Bag { field: TextField, min_users: usize },
    Categorical { field: CategoricalField },
}

/// A named base classifier: a list of group recipes fitted with one NB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierRecipe {
    pub name: String,
    pub groups: Vec<GroupRecipe>,
}

impl ClassifierRecipe {
    pub fn text() -> Self {
        ClassifierRecipe {
            name: "Text".into(),
            groups: vec![GroupRecipe::Bag {
                field: TextField::Content,
                min_users: 3,
            }],
        }
    }

    pub fn occu() -> Self {
        ClassifierRecipe {
            name: "Occu".into(),
            groups: vec![GroupRecipe::Bag {
                field: TextField::Occupation,
                min_users: 3,
            }],
        }
    }

    pub fn intro() -> Self {
        ClassifierRecipe {
            name: "Intro".into(),
            groups: vec![GroupRecipe::Bag {
                field: TextField::Introduction,
                min_users: 3,
            }],
        }
    }

    pub fn inter() -> Self {
        ClassifierRecipe {
            name: "Inter".into(),
            groups: vec![GroupRecipe::Bag {
                field: TextField::Interests,
                min_users: 3,
            }],
        }
    }

    /// Combined gender + state + city classifier.
    pub fn gloc() -> Self {
        ClassifierRecipe {
            name: "Gloc".into(),
            groups: vec![
                GroupRecipe::Categorical {
                    field: CategoricalField::Gender,
                },
                GroupRecipe::Categorical {
                    field: CategoricalField::State,
                },
                GroupRecipe::Bag {
                    field: TextField::City,
                    min_users: 3,
                },
            ],
        }
    }

    /// Looks up one of the five canonical recipes by case-insensitive name.
    pub fn by_name(name: &str) -> Option<Self> {
        match name.to_lowercase().as_str() {
            "text" => Some(Self::text()),
            "occu" => Some(Self::occu()),
            "intro" => Some(Self::intro()),
            "inter" => Some(Self::inter()),
            "gloc" => Some(Self::gloc()),
            _ => None,
        }
    }

    /// Builds vocabularies from `corpus` and trains the NB.
    pub fn fit(&self, corpus: &Corpus, alpha: f64) -> Result<NbModel> {
        let groups = self.group_specs(corpus)?;
        nb::train(corpus, &groups, alpha)
    }

    /// Resolves the recipes into concrete feature groups on a corpus.
    pub fn group_specs(&self, corpus: &Corpus) -> Result<Vec<FeatureGroupSpec>> {
        self.groups
            .iter()
            .map(|g| match g {
                GroupRecipe::Bag { field, min_users } => Ok(FeatureGroupSpec::bag(
                    build_vocabulary(corpus, *field, *min_users)?,
                )),
                GroupRecipe::Categorical { field } => {
                    Ok(FeatureGroupSpec::categorical(*field))
                }
            })
            .collect()
    }
}

/// Concatenated feature space over several groups. Bag features are
/// namespaced by field, categorical values become one-hot features, so
/// identical words in different fields stay distinct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedSpace {
    groups: Vec<FeatureGroupSpec>,
    offsets: Vec<usize>,
    dim: usize,
}

/// Sparse counts over a [`FusedSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct FusedVector {
    pub counts: BTreeMap<usize, u32>,
}

impl FusedSpace {
    pub fn new(groups: Vec<FeatureGroupSpec>) -> FusedSpace {
        let mut offsets = Vec::with_capacity(groups.len());
        let mut dim = 0;
        for g in &groups {
            offsets.push(dim);
            dim += match g {
                FeatureGroupSpec::BagOfWords { vocab } => vocab.len(),
                FeatureGroupSpec::Categorical { field } => field.values().len(),
            };
        }
        FusedSpace {
            groups,
            offsets,
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Human-readable identity of one fused position, e.g. `content:word`
    /// or `gender=male`.
    pub fn feature_label(&self, pos: usize) -> Option<String> {
        for (g, &off) in self.groups.iter().zip(&self.offsets) {
            let width = match g {
                FeatureGroupSpec::BagOfWords { vocab } => vocab.len(),
                FeatureGroupSpec::Categorical { field } => field.values().len(),
            };
            if pos < off + width {
                return Some(match g {
                    FeatureGroupSpec::BagOfWords { vocab } => {
                        format!("{}:{}", vocab.field(), vocab.words()[pos - off])
                    }
                    FeatureGroupSpec::Categorical { field } => {
                        let values = field.values();
                        let name = match field {
                            CategoricalField::Gender => "gender",
                            CategoricalField::State => "state",
                        };
                        format!("{}={}", name, values[pos - off])
                    }
                });
            }
        }
        None
    }

    pub fn vectorize(&self, user: &UserRecord) -> FusedVector {
        let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
        for (g, &off) in self.groups.iter().zip(&self.offsets) {
            match g {
                FeatureGroupSpec::BagOfWords { vocab } => {
                    for tok in vocab.field().tokens(user) {
                        if let Some(pos) = vocab.position(&tok) {
                            *counts.entry(off + pos).or_insert(0) += 1;
                        }
                    }
                }
                FeatureGroupSpec::Categorical { field } => {
                    let value = field.value_of(user);
                    if let Some(pos) = field.values().iter().position(|v| *v == value) {
                        *counts.entry(off + pos).or_insert(0) += 1;
                    }
                }
            }
        }
        FusedVector { counts }
    }
}

/// One concatenated sparse vector over all groups.
pub fn fuse_early(user: &UserRecord, space: &FusedSpace) -> FusedVector {
    space.vectorize(user)
}

/// A single multinomial NB trained over the concatenated feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyFusionModel {
    format_version: u32,
    classes: Vec<String>,
    log_priors: Vec<f64>,
    alpha: f64,
    space: FusedSpace,
    /// [class][fused feature]
    log_like: Vec<Vec<f64>>,
}

/// Trains one multinomial NB over the fused space: all bag counts and
/// categorical one-hots share a single likelihood normalization.
pub fn train_early_fusion(
    train: &Corpus,
    groups: Vec<FeatureGroupSpec>,
    alpha: f64,
) -> Result<EarlyFusionModel> {
    if alpha <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "smoothing alpha must be positive, got {alpha}"
        )));
    }
    if train.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let space = FusedSpace::new(groups);

    let mut classes: Vec<String> = train.users.iter().map(|u| u.industry.clone()).collect();
    classes.sort_unstable();
    classes.dedup();
    let class_index: BTreeMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();

    let mut class_users = vec![0u64; classes.len()];
    let mut counts = vec![vec![0u64; space.dim()]; classes.len()];
    for user in &train.users {
        let ci = class_index[user.industry.as_str()];
        class_users[ci] += 1;
        for (pos, count) in space.vectorize(user).counts {
            counts[ci][pos] += count as u64;
        }
    }

    let n = train.users.len() as f64;
    let log_priors = class_users
        .iter()
        .map(|&c| (c as f64 / n).ln())
        .collect();
    let log_like = counts
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            let denom = total as f64 + alpha * space.dim() as f64;
            row.iter()
                .map(|&c| ((c as f64 + alpha) / denom).ln())
                .collect()
        })
        .collect();

    Ok(EarlyFusionModel {
        format_version: MODEL_FORMAT_VERSION,
        classes,
        log_priors,
        alpha,
        space,
        log_like,
    })
}

impl EarlyFusionModel {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn space(&self) -> &FusedSpace {
        &self.space
    }

    pub fn predict(&self, user: &UserRecord) -> Prediction {
        let fused = self.space.vectorize(user);
        let mut scores = self.log_priors.clone();
        for (&pos, &count) in &fused.counts {
            for (ci, score) in scores.iter_mut().enumerate() {
                *score += count as f64 * self.log_like[ci][pos];
            }
        }
        prediction_from_scores(&self.classes, scores)
    }

    pub fn predict_many(&self, users: &[UserRecord]) -> Vec<Prediction> {
        use rayon::prelude::*;
        users.par_iter().map(|u| self.predict(u)).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<EarlyFusionModel> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let model: EarlyFusionModel = serde_json::from_reader(BufReader::new(file))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "early fusion model format version {} (expected {MODEL_FORMAT_VERSION})",
                model.format_version
            )));
        }
        Ok(model)
    }
}

fn prediction_from_scores(classes: &[String], scores: Vec<f64>) -> Prediction {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Prediction {
        label: classes[best].clone(),
        log_posteriors: classes.iter().cloned().zip(scores).collect(),
    }
}

/// Categorical NB over L0 label tuples: the L1 combiner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelNb {
    classes: Vec<String>,
    log_priors: Vec<f64>,
    /// Shared value set of every input feature (the taxonomy labels).
    values: Vec<String>,
    /// [input feature][class][value]
    log_like: Vec<Vec<Vec<f64>>>,
}

impl LabelNb {
    fn train(rows: &[Vec<String>], truth: &[String], alpha: f64) -> Result<LabelNb> {
        let n_inputs = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut classes: Vec<String> = truth.to_vec();
        for row in rows {
            classes.extend(row.iter().cloned());
        }
        classes.sort_unstable();
        classes.dedup();
        let values = classes.clone();
        let class_index: BTreeMap<&str, usize> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();

        let mut class_counts = vec![0u64; classes.len()];
        let mut counts = vec![vec![vec![0u64; values.len()]; classes.len()]; n_inputs];
        for (row, t) in rows.iter().zip(truth) {
            let ci = class_index[t.as_str()];
            class_counts[ci] += 1;
            for (j, label) in row.iter().enumerate() {
                counts[j][ci][class_index[label.as_str()]] += 1;
            }
        }

        let n = truth.len() as f64;
        // classes never seen as a truth label keep a smoothed pseudo-prior
        // so their log stays finite
        let log_priors: Vec<f64> = class_counts
            .iter()
            .map(|&c| ((c as f64 + alpha) / (n + alpha * classes.len() as f64)).ln())
            .collect();
        let log_like = counts
            .iter()
            .map(|per_class| {
                per_class
                    .iter()
                    .enumerate()
                    .map(|(ci, row)| {
                        let denom =
                            class_counts[ci] as f64 + alpha * values.len() as f64;
                        row.iter()
                            .map(|&c| ((c as f64 + alpha) / denom).ln())
                            .collect()
                    })
                    .collect()
            })
            .collect();

        Ok(LabelNb {
            classes,
            log_priors,
            values,
            log_like,
        })
    }

    /// Predicts from one L0 label tuple. Labels outside the value set are
    /// skipped; unseen tuples fall back to smoothed posteriors.
    pub fn predict(&self, labels: &[String]) -> Prediction {
        let mut scores = self.log_priors.clone();
        for (j, label) in labels.iter().enumerate() {
            if j >= self.log_like.len() {
                break;
            }
            if let Some(v) = self.values.iter().position(|x| x == label) {
                for (ci, score) in scores.iter_mut().enumerate() {
                    *score += self.log_like[j][ci][v];
                }
            }
        }
        prediction_from_scores(&self.classes, scores)
    }
}

/// Fitted stacking ensemble: refit L0 models plus the L1 combiner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackingModel {
    format_version: u32,
    pub recipes: Vec<ClassifierRecipe>,
    pub k: usize,
    pub seed: u64,
    pub alpha: f64,
    /// L0 models refit on the full training set, parallel to `recipes`.
    pub l0_models: Vec<NbModel>,
    pub l1: LabelNb,
}

/// One out-of-fold L1 training row, kept for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct OofRow {
    pub instance: usize,
    pub fold: usize,
    pub l0_labels: Vec<String>,
    pub truth: String,
}

/// Fold assignment and the out-of-fold predictions produced during stacking.
#[derive(Debug, Clone, PartialEq)]
pub struct StackReport {
    pub fold_of: Vec<usize>,
    pub oof: Vec<OofRow>,
}

/// Trains a stacking ensemble with a deterministic seeded k-fold partition.
pub fn stack_train(
    train: &Corpus,
    recipes: &[ClassifierRecipe],
    k: usize,
    seed: u64,
    alpha: f64,
) -> Result<(StackingModel, StackReport)> {
    if k < 2 {
        return Err(Error::InvalidArgument("stacking needs k >= 2 folds".into()));
    }
    if k > train.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} folds exceed the {} training users",
            train.len()
        )));
    }
    if recipes.is_empty() {
        return Err(Error::InvalidArgument("no L0 classifiers given".into()));
    }

    let n = train.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    // contiguous blocks over the shuffled order; the first n % k folds get
    // one extra instance
    let mut fold_of = vec![0usize; n];
    let base = n / k;
    let extra = n % k;
    let mut cursor = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        for &i in &order[cursor..cursor + size] {
            fold_of[i] = fold;
        }
        cursor += size;
    }

    let mut oof: Vec<OofRow> = Vec::with_capacity(n);
    for fold in 0..k {
        let held_out: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
        let rest: Vec<UserRecord> = (0..n)
            .filter(|&i| fold_of[i] != fold)
            .map(|i| train.users[i].clone())
            .collect();
        let fold_corpus = Corpus {
            users: rest,
            taxonomy: train.taxonomy.clone(),
        };
        let fold_models: Vec<NbModel> = recipes
            .iter()
            .map(|r| r.fit(&fold_corpus, alpha))
            .collect::<Result<_>>()?;
        for &i in &held_out {
            let labels: Vec<String> = fold_models
                .iter()
                .map(|m| m.predict(&train.users[i]).label)
                .collect();
            oof.push(OofRow {
                instance: i,
                fold,
                l0_labels: labels,
                truth: train.users[i].industry.clone(),
            });
        }
    }
    // L1 data ordered by instance index, not by fold completion
    oof.sort_by_key(|r| r.instance);

    let rows: Vec<Vec<String>> = oof.iter().map(|r| r.l0_labels.clone()).collect();
    let truth: Vec<String> = oof.iter().map(|r| r.truth.clone()).collect();
    let l1 = LabelNb::train(&rows, &truth, alpha)?;

    let l0_models: Vec<NbModel> = recipes
        .iter()
        .map(|r| r.fit(train, alpha))
        .collect::<Result<_>>()?;

    Ok((
        StackingModel {
            format_version: MODEL_FORMAT_VERSION,
            recipes: recipes.to_vec(),
            k,
            seed,
            alpha,
            l0_models,
            l1,
        },
        StackReport { fold_of, oof },
    ))
}

/// Each refit L0 predicts a label; the tuple feeds the L1 combiner.
pub fn stack_predict(model: &StackingModel, user: &UserRecord) -> Prediction {
    let labels: Vec<String> = model
        .l0_models
        .iter()
        .map(|m| m.predict(user).label)
        .collect();
    model.l1.predict(&labels)
}

impl StackingModel {
    pub fn predict_many(&self, users: &[UserRecord]) -> Vec<Prediction> {
        use rayon::prelude::*;
        users.par_iter().map(|u| stack_predict(self, u)).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<StackingModel> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file))
    }

    pub fn from_reader<R: Read>(r: R) -> Result<StackingModel> {
        let model: StackingModel = serde_json::from_reader(r)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "stacking model format version {} (expected {MODEL_FORMAT_VERSION})",
                model.format_version
            )));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Gender;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn user(id: &str, industry: &str, posts: &[&str]) -> UserRecord {
        UserRecord {
            user_id: id.to_string(),
            industry: industry.to_string(),
            gender: Gender::Undefined,
            occupation: None,
            city: None,
            state: None,
            introduction: None,
            interests: None,
            posts: posts.iter().map(|p| p.to_string()).collect(),
        }
    }

    #[test]
    fn kappa_perfect_agreement_is_one() {
        let m = PredictionMatrix::new(
            labels(&["c1", "c2", "c3"]),
            vec![
                labels(&["A", "A", "A"]),
                labels(&["B", "B", "B"]),
                labels(&["A", "A", "A"]),
            ],
            labels(&["A", "B", "A"]),
        )
        .unwrap();
        assert!((fleiss_kappa(&m).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_single_constant_category_defined_as_one() {
        let m = PredictionMatrix::new(
            labels(&["c1", "c2"]),
            vec![labels(&["A", "A"]), labels(&["A", "A"])],
            labels(&["A", "A"]),
        )
        .unwrap();
        assert_eq!(fleiss_kappa(&m).unwrap(), 1.0);
    }

    #[test]
    fn kappa_four_instance_two_rater_case() {
        // ((A,A),(A,B),(B,A),(B,B)): P̄ = 0.5, category shares are equal so
        // P̄e = 0.5 and κ = 0 by direct substitution into the formula
        let m = PredictionMatrix::new(
            labels(&["c1", "c2"]),
            vec![
                labels(&["A", "A"]),
                labels(&["A", "B"]),
                labels(&["B", "A"]),
                labels(&["B", "B"]),
            ],
            labels(&["A", "A", "B", "B"]),
        )
        .unwrap();
        assert!(fleiss_kappa(&m).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kappa_invariant_under_category_relabeling() {
        let rows = vec![
            labels(&["A", "B"]),
            labels(&["B", "B"]),
            labels(&["A", "A"]),
            labels(&["B", "A"]),
            labels(&["A", "A"]),
        ];
        let renamed: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|l| if l == "A" { "X".to_string() } else { "Y".to_string() })
                    .collect()
            })
            .collect();
        let truth = labels(&["A", "B", "A", "B", "A"]);
        let m1 = PredictionMatrix::new(labels(&["c1", "c2"]), rows, truth.clone()).unwrap();
        let m2 = PredictionMatrix::new(labels(&["c1", "c2"]), renamed, truth).unwrap();
        assert!((fleiss_kappa(&m1).unwrap() - fleiss_kappa(&m2).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn double_fault_edges() {
        let truth = labels(&["A", "B", "A", "B"]);
        assert_eq!(double_fault(&truth, &truth, &truth).unwrap(), 0.0);
        let wrong = labels(&["B", "A", "B", "A"]);
        assert_eq!(double_fault(&wrong, &wrong, &truth).unwrap(), 1.0);
    }

    #[test]
    fn double_fault_intersection() {
        // a wrong on instances {1,2}, b wrong on {2,3} (0-based), n = 4
        let truth = labels(&["A", "A", "A", "A"]);
        let a = labels(&["A", "B", "B", "A"]);
        let b = labels(&["A", "A", "B", "B"]);
        assert!((double_fault(&a, &b, &truth).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(
            double_fault(&a, &b, &truth).unwrap(),
            double_fault(&b, &a, &truth).unwrap()
        );
    }

    #[test]
    fn double_fault_length_mismatch_fatal() {
        assert!(double_fault(&labels(&["A"]), &labels(&["A", "B"]), &labels(&["A"])).is_err());
    }

    #[test]
    fn fused_space_namespaces_fields() {
        let mut u = user("u", "A", &["writer writes"]);
        u.occupation = Some("writer".into());
        let content_vocab = crate::features::Vocabulary::new(
            TextField::Content,
            vec!["writer".into(), "writes".into()],
        )
        .unwrap();
        let occu_vocab =
            crate::features::Vocabulary::new(TextField::Occupation, vec!["writer".into()])
                .unwrap();
        let space = FusedSpace::new(vec![
            FeatureGroupSpec::bag(content_vocab),
            FeatureGroupSpec::bag(occu_vocab),
        ]);
        assert_eq!(space.dim(), 3);
        let v = fuse_early(&u, &space);
        // "writer" counted separately under content (pos 0) and occupation (pos 2)
        assert_eq!(v.counts.get(&0), Some(&1));
        assert_eq!(v.counts.get(&2), Some(&1));
        assert_eq!(space.feature_label(0).unwrap(), "content:writer");
        assert_eq!(space.feature_label(2).unwrap(), "occupation:writer");
    }

    #[test]
    fn fused_space_one_hot_categoricals() {
        let mut u = user("u", "A", &[]);
        u.gender = Gender::Female;
        let space = FusedSpace::new(vec![FeatureGroupSpec::categorical(
            CategoricalField::Gender,
        )]);
        assert_eq!(space.dim(), 3);
        let v = fuse_early(&u, &space);
        assert_eq!(v.counts.len(), 1);
        assert_eq!(v.counts.get(&1), Some(&1)); // female is the 2nd value
        assert_eq!(space.feature_label(1).unwrap(), "gender=female");
    }

    #[test]
    fn fused_single_group_matches_vectorize() {
        let u = user("u", "A", &["a b a"]);
        let vocab =
            crate::features::Vocabulary::new(TextField::Content, vec!["a".into(), "b".into()])
                .unwrap();
        let space = FusedSpace::new(vec![FeatureGroupSpec::bag(vocab.clone())]);
        let fused = fuse_early(&u, &space);
        let plain = crate::features::vectorize(&u, &vocab);
        assert_eq!(fused.counts, plain.counts);
    }

    #[test]
    fn fused_empty_fields_give_empty_vector() {
        let u = user("u", "A", &[]);
        let vocab =
            crate::features::Vocabulary::new(TextField::Content, vec!["a".into()]).unwrap();
        let space = FusedSpace::new(vec![FeatureGroupSpec::bag(vocab)]);
        assert!(fuse_early(&u, &space).counts.is_empty());
    }

    fn planted_corpus() -> Corpus {
        // content and occupation each carry the full signal
        let mut users = Vec::new();
        for (class, cword, oword) in [
            ("A", "apple", "farmer"),
            ("B", "bolt", "builder"),
            ("C", "cello", "composer"),
        ] {
            for i in 0..8 {
                let mut u = user(
                    &format!("{class}{i}"),
                    class,
                    &[&format!("{cword} {cword} shared")],
                );
                u.occupation = Some(format!("{oword} shared"));
                users.push(u);
            }
        }
        Corpus::new(users, None).unwrap()
    }

    #[test]
    fn stack_train_is_deterministic() {
        let c = planted_corpus();
        let recipes = vec![ClassifierRecipe::text(), ClassifierRecipe::occu()];
        let (m1, r1) = stack_train(&c, &recipes, 4, 11, 1.0).unwrap();
        let (m2, r2) = stack_train(&c, &recipes, 4, 11, 1.0).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(r1, r2);
    }

    #[test]
    fn stack_out_of_fold_discipline() {
        let c = planted_corpus();
        let recipes = vec![ClassifierRecipe::text()];
        let (model, report) = stack_train(&c, &recipes, 4, 3, 1.0).unwrap();
        assert_eq!(model.k, 4);
        assert_eq!(report.oof.len(), c.len());
        // every instance appears exactly once and its row came from its own
        // held-out fold
        for (i, row) in report.oof.iter().enumerate() {
            assert_eq!(row.instance, i);
            assert_eq!(row.fold, report.fold_of[i]);
        }
        // folds partition the corpus near-evenly
        let mut sizes = vec![0usize; 4];
        for &f in &report.fold_of {
            sizes[f] += 1;
        }
        assert_eq!(sizes.iter().sum::<usize>(), c.len());
        assert!(sizes.iter().all(|&s| s == 6));
    }

    #[test]
    fn stack_unanimous_consistent_l0s_predict_that_class() {
        let c = planted_corpus();
        let recipes = vec![ClassifierRecipe::text(), ClassifierRecipe::occu()];
        let (model, _) = stack_train(&c, &recipes, 4, 5, 1.0).unwrap();
        let mut q = user("q", "A", &["apple apple"]);
        q.occupation = Some("farmer".into());
        assert_eq!(stack_predict(&model, &q).label, "A");
    }

    #[test]
    fn stack_unseen_tuple_never_crashes() {
        let c = planted_corpus();
        let recipes = vec![ClassifierRecipe::text(), ClassifierRecipe::occu()];
        let (model, _) = stack_train(&c, &recipes, 4, 5, 1.0).unwrap();
        // conflicting signals produce a tuple the L1 may never have seen
        let mut q = user("q", "A", &["bolt bolt"]);
        q.occupation = Some("composer".into());
        let pred = stack_predict(&model, &q);
        assert!(["A", "B", "C"].contains(&pred.label.as_str()));
    }

    #[test]
    fn stack_k_exceeding_train_size_is_fatal() {
        let c = planted_corpus();
        assert!(stack_train(&c, &[ClassifierRecipe::text()], c.len() + 1, 0, 1.0).is_err());
        assert!(stack_train(&c, &[ClassifierRecipe::text()], 1, 0, 1.0).is_err());
    }

    #[test]
    fn l1_lookup_of_training_tuple() {
        // the tuple ("A","B") is only ever seen with true label B
        let rows = vec![
            labels(&["A", "B"]),
            labels(&["A", "B"]),
            labels(&["A", "A"]),
            labels(&["B", "B"]),
        ];
        let truth = labels(&["B", "B", "A", "B"]);
        let l1 = LabelNb::train(&rows, &truth, 1.0).unwrap();
        assert_eq!(l1.predict(&labels(&["A", "B"])).label, "B");
    }

    #[test]
    fn diagnostics_csv_layout() {
        let m = PredictionMatrix::new(
            labels(&["Text", "Occu"]),
            vec![
                labels(&["A", "A"]),
                labels(&["A", "B"]),
                labels(&["B", "B"]),
            ],
            labels(&["A", "A", "B"]),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_diagnostics_csv(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("Text,"));
        assert!(lines[1].ends_with(",Occu"));
    }
}
