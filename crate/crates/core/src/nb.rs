//! Naive Bayes over one or more feature groups: multinomial bag-of-words
//! groups and categorical metadata groups under a single model, plus the
//! majority baseline.
//!
//! Bag likelihoods use Laplace smoothing over the vocabulary; categorical
//! likelihoods smooth over the value set, with an explicit "unknown" bucket
//! for missing or unlisted values. Prediction iterates a user's in-vocabulary
//! words in lexicographic order so log-posterior sums do not depend on how
//! the vocabulary happens to be ordered.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, UserRecord};
use crate::features::{TextField, Vocabulary};
use crate::{Error, Result};

const MODEL_FORMAT_VERSION: u32 = 1;

const US_STATES: [&str; 50] = [
    "AL", "AK", "AZ", "AR", "CA", "CO", "CT", "DE", "FL", "GA", "HI", "ID", "IL", "IN", "IA",
    "KS", "KY", "LA", "ME", "MD", "MA", "MI", "MN", "MS", "MO", "MT", "NE", "NV", "NH", "NJ",
    "NM", "NY", "NC", "ND", "OH", "OK", "OR", "PA", "RI", "SC", "SD", "TN", "TX", "UT", "VT",
    "VA", "WA", "WV", "WI", "WY",
];

const UNKNOWN: &str = "unknown";

/// Metadata fields encoded as a single categorical feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CategoricalField {
    Gender,
    State,
}

impl CategoricalField {
    /// The full value set of the feature. Gender has exactly three values;
    /// state has the 50 U.S. state codes plus an "unknown" bucket.
    pub fn values(&self) -> Vec<String> {
        match self {
            CategoricalField::Gender => {
                vec!["male".into(), "female".into(), "undefined".into()]
            }
            CategoricalField::State => {
                let mut v: Vec<String> = US_STATES.iter().map(|s| s.to_string()).collect();
                v.push(UNKNOWN.into());
                v
            }
        }
    }

    /// The user's value for this feature; missing or unlisted values fall
    /// into the catch-all bucket.
    pub fn value_of(&self, user: &UserRecord) -> String {
        match self {
            CategoricalField::Gender => user.gender.to_string(),
            CategoricalField::State => match &user.state {
                Some(s) => {
                    let code = s.trim().to_uppercase();
                    if US_STATES.contains(&code.as_str()) {
                        code
                    } else {
                        UNKNOWN.into()
                    }
                }
                None => UNKNOWN.into(),
            },
        }
    }
}

/// One feature group of an NB model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureGroupSpec {
    BagOfWords { vocab: Vocabulary },
    Categorical { field: CategoricalField },
}

impl FeatureGroupSpec {
    pub fn bag(vocab: Vocabulary) -> Self {
        FeatureGroupSpec::BagOfWords { vocab }
    }

    pub fn categorical(field: CategoricalField) -> Self {
        FeatureGroupSpec::Categorical { field }
    }
}

/// Per-group smoothed log-likelihood tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum GroupTable {
    Bag {
        vocab: Vocabulary,
        /// [class][word]
        log_like: Vec<Vec<f64>>,
    },
    Cat {
        field: CategoricalField,
        values: Vec<String>,
        /// [class][value]
        log_like: Vec<Vec<f64>>,
    },
}

/// A trained Naive Bayes model over one or more feature groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    format_version: u32,
    classes: Vec<String>,
    log_priors: Vec<f64>,
    alpha: f64,
    groups: Vec<GroupTable>,
}

/// A predicted label plus the unnormalized joint log-score per class.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: String,
    pub log_posteriors: Vec<(String, f64)>,
}

impl Prediction {
    fn from_scores(classes: &[String], scores: Vec<f64>) -> Prediction {
        debug_assert!(!classes.is_empty());
        // classes are sorted, so keeping the first strict maximum implements
        // the lexicographic tie-break
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
}

/// Trains an NB model. Bag groups get multinomial likelihoods
/// P(word|class) = (count + α)/(class in-vocabulary tokens + α·|V|);
/// categorical groups get P(value|class) = (count + α)/(class users + α·|values|).
pub fn train(train: &Corpus, groups: &[FeatureGroupSpec], alpha: f64) -> Result<NbModel> {
    if alpha <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "smoothing alpha must be positive, got {alpha}"
        )));
    }
    if train.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut classes: Vec<String> = {
        let mut set: Vec<String> = train.users.iter().map(|u| u.industry.clone()).collect();
        set.sort_unstable();
        set.dedup();
        set
    };
    classes.shrink_to_fit();
    let class_index: HashMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();

    let n = train.users.len() as f64;
    let mut class_users = vec![0u64; classes.len()];
    for u in &train.users {
        class_users[class_index[u.industry.as_str()]] += 1;
    }
    let log_priors: Vec<f64> = class_users.iter().map(|&c| (c as f64 / n).ln()).collect();

    let mut tables = Vec::with_capacity(groups.len());
    for group in groups {
        match group {
            FeatureGroupSpec::BagOfWords { vocab } => {
                let v = vocab.len();
                let mut counts = vec![vec![0u64; v]; classes.len()];
                for user in &train.users {
                    let ci = class_index[user.industry.as_str()];
                    for tok in vocab.field().tokens(user) {
                        if let Some(pos) = vocab.position(&tok) {
                            counts[ci][pos] += 1;
                        }
                    }
                }
                let log_like = counts
                    .iter()
                    .map(|row| {
                        let class_tokens: u64 = row.iter().sum();
                        let denom = class_tokens as f64 + alpha * v as f64;
                        row.iter()
                            .map(|&c| ((c as f64 + alpha) / denom).ln())
                            .collect()
                    })
                    .collect();
                tables.push(GroupTable::Bag {
                    vocab: vocab.clone(),
                    log_like,
                });
            }
            FeatureGroupSpec::Categorical { field } => {
                let values = field.values();
                let value_index: HashMap<&str, usize> = values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v.as_str(), i))
                    .collect();
                let mut counts = vec![vec![0u64; values.len()]; classes.len()];
                for user in &train.users {
                    let ci = class_index[user.industry.as_str()];
                    let value = field.value_of(user);
                    counts[ci][value_index[value.as_str()]] += 1;
                }
                let log_like = counts
                    .iter()
                    .enumerate()
                    .map(|(ci, row)| {
                        let denom = class_users[ci] as f64 + alpha * values.len() as f64;
                        row.iter()
                            .map(|&c| ((c as f64 + alpha) / denom).ln())
                            .collect()
                    })
                    .collect();
                tables.push(GroupTable::Cat {
                    field: *field,
                    values: values.clone(),
                    log_like,
                });
            }
        }
    }

    Ok(NbModel {
        format_version: MODEL_FORMAT_VERSION,
        classes,
        log_priors,
        alpha,
        groups: tables,
    })
}

impl NbModel {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Log-posterior per class: log prior plus each group's log-likelihood.
    /// Out-of-vocabulary tokens are ignored; missing text fields contribute
    /// nothing; missing categorical values hit their catch-all bucket.
    pub fn predict(&self, user: &UserRecord) -> Prediction {
        let mut scores = self.log_priors.clone();
        for group in &self.groups {
            match group {
                GroupTable::Bag { vocab, log_like } => {
                    // collect (word -> count), iterate in lexicographic word
                    // order so the sum is independent of vocabulary ordering
                    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
                    for tok in vocab.field().tokens(user) {
                        if vocab.position(&tok).is_some() {
                            *counts.entry(tok).or_insert(0) += 1;
                        }
                    }
                    for (word, count) in &counts {
                        let pos = vocab.position(word).unwrap();
                        for (ci, score) in scores.iter_mut().enumerate() {
                            *score += *count as f64 * log_like[ci][pos];
                        }
                    }
                }
                GroupTable::Cat {
                    field,
                    values,
                    log_like,
                } => {
                    let value = field.value_of(user);
                    if let Some(pos) = values.iter().position(|v| *v == value) {
                        for (ci, score) in scores.iter_mut().enumerate() {
                            *score += log_like[ci][pos];
                        }
                    }
                }
            }
        }
        Prediction::from_scores(&self.classes, scores)
    }

    /// Predicts a batch of users in parallel; output order matches input.
    pub fn predict_many(&self, users: &[UserRecord]) -> Vec<Prediction> {
        users.par_iter().map(|u| self.predict(u)).collect()
    }

    pub fn to_writer<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn from_reader<R: Read>(r: R) -> Result<NbModel> {
        let model: NbModel = serde_json::from_reader(r)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "nb model format version {} (expected {MODEL_FORMAT_VERSION})",
                model.format_version
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.to_writer(BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<NbModel> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file))
    }
}

/// The most frequent training label, lexicographic tie-break.
pub fn majority_baseline(train: &Corpus) -> Result<String> {
    if train.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for u in &train.users {
        *counts.entry(u.industry.as_str()).or_insert(0) += 1;
    }
    // BTreeMap iterates lexicographically; strict > keeps the first max
    let mut best: Option<(&str, u64)> = None;
    for (label, count) in counts {
        match best {
            Some((_, c)) if count <= c => {}
            _ => best = Some((label, count)),
        }
    }
    Ok(best.unwrap().0.to_string())
}
