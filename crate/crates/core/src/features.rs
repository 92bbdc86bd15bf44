//! Per-field vocabularies, count vectors, and feature ranking by
//! Information Gain Ratio (IGR) and Aggressive Feature Ranking (AFR).
//!
//! IGR works on document-level presence: for each word the binary variable
//! "this user's field text contains the word". AFR works on token-level
//! frequencies within the concatenated text of each industry. Both rankings
//! sort descending with lexicographic tie-breaks so results are reproducible.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{clean_and_tokenize, Corpus, UserRecord};
use crate::{Error, Result};

/// Text fields a vocabulary can be built over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextField {
    Content,
    Occupation,
    Introduction,
    Interests,
    City,
}

impl TextField {
    /// Tokenizes the user's text for this field. Missing metadata fields
    /// contribute no tokens.
    pub fn tokens(&self, user: &UserRecord) -> Vec<String> {
        match self {
            TextField::Content => {
                let mut out = Vec::new();
                for post in &user.posts {
                    out.extend(clean_and_tokenize(post));
                }
                out
            }
            TextField::Occupation => opt_tokens(&user.occupation),
            TextField::Introduction => opt_tokens(&user.introduction),
            TextField::Interests => opt_tokens(&user.interests),
            TextField::City => opt_tokens(&user.city),
        }
    }
}

impl fmt::Display for TextField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TextField::Content => "content",
            TextField::Occupation => "occupation",
            TextField::Introduction => "introduction",
            TextField::Interests => "interests",
            TextField::City => "city",
        };
        f.write_str(s)
    }
}

fn opt_tokens(field: &Option<String>) -> Vec<String> {
    field.as_deref().map(clean_and_tokenize).unwrap_or_default()
}

/// An ordered set of distinct tokens for one field, with positional lookup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabData", into = "VocabData")]
pub struct Vocabulary {
    field: TextField,
    words: Vec<String>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabData {
    field: TextField,
    words: Vec<String>,
}

impl TryFrom<VocabData> for Vocabulary {
    type Error = Error;

    fn try_from(data: VocabData) -> Result<Self> {
        Vocabulary::new(data.field, data.words)
    }
}

impl From<Vocabulary> for VocabData {
    fn from(v: Vocabulary) -> VocabData {
        VocabData {
            field: v.field,
            words: v.words,
        }
    }
}

impl Vocabulary {
    pub fn new(field: TextField, words: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate vocabulary word: {w}"
                )));
            }
        }
        Ok(Vocabulary { field, words, index })
    }

    pub fn field(&self) -> TextField {
        self.field
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn position(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }
}

/// Sparse token counts of one user's field text over a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub field: TextField,
    /// position -> count, counts always >= 1.
    pub counts: BTreeMap<usize, u32>,
}

/// Tokens used by at least `min_users` distinct training users, ordered
/// lexicographically.
pub fn build_vocabulary(train: &Corpus, field: TextField, min_users: usize) -> Result<Vocabulary> {
    if min_users < 1 {
        return Err(Error::InvalidArgument("min_users must be >= 1".into()));
    }
    let mut user_counts: HashMap<String, usize> = HashMap::new();
    for user in &train.users {
        let distinct: HashSet<String> = field.tokens(user).into_iter().collect();
        for tok in distinct {
            *user_counts.entry(tok).or_insert(0) += 1;
        }
    }
    let mut words: Vec<String> = user_counts
        .into_iter()
        .filter(|(_, c)| *c >= min_users)
        .map(|(w, _)| w)
        .collect();
    words.sort_unstable();
    Vocabulary::new(field, words)
}

/// Token counts of the user's field text restricted to vocabulary words;
/// out-of-vocabulary tokens are ignored.
pub fn vectorize(user: &UserRecord, vocab: &Vocabulary) -> FeatureVector {
    let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
    for tok in vocab.field.tokens(user) {
        if let Some(pos) = vocab.position(&tok) {
            *counts.entry(pos).or_insert(0) += 1;
        }
    }
    FeatureVector {
        field: vocab.field,
        counts,
    }
}

/// Per-word document and token counts of a training corpus, the raw material
/// of both ranking scores.
///
/// Document counts are user-level presence; token counts are occurrence
/// totals. Token totals per class count *all* tokens of the field text, not
/// just vocabulary words, so token frequencies are frequencies within the
/// class's full text.
#[derive(Debug, Clone)]
pub struct FeatureStats {
    classes: Vec<String>,
    n_users: usize,
    users_per_class: Vec<usize>,
    doc_count: Vec<usize>,
    doc_count_per_class: Vec<Vec<usize>>,
    token_count: Vec<u64>,
    token_count_per_class: Vec<Vec<u64>>,
    tokens_per_class: Vec<u64>,
    total_tokens: u64,
}

impl FeatureStats {
    pub fn compute(train: &Corpus, vocab: &Vocabulary) -> FeatureStats {
        let mut classes: Vec<String> = train
            .users
            .iter()
            .map(|u| u.industry.clone())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        classes.sort_unstable();
        let class_index: HashMap<&str, usize> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();

        let v = vocab.len();
        let c = classes.len();
        let mut stats = FeatureStats {
            classes: classes.clone(),
            n_users: train.users.len(),
            users_per_class: vec![0; c],
            doc_count: vec![0; v],
            doc_count_per_class: vec![vec![0; c]; v],
            token_count: vec![0; v],
            token_count_per_class: vec![vec![0; c]; v],
            tokens_per_class: vec![0; c],
            total_tokens: 0,
        };

        for user in &train.users {
            let ci = class_index[user.industry.as_str()];
            stats.users_per_class[ci] += 1;
            let tokens = vocab.field.tokens(user);
            stats.tokens_per_class[ci] += tokens.len() as u64;
            stats.total_tokens += tokens.len() as u64;
            let mut seen: HashSet<usize> = HashSet::new();
            for tok in &tokens {
                if let Some(pos) = vocab.position(tok) {
                    stats.token_count[pos] += 1;
                    stats.token_count_per_class[pos][ci] += 1;
                    if seen.insert(pos) {
                        stats.doc_count[pos] += 1;
                        stats.doc_count_per_class[pos][ci] += 1;
                    }
                }
            }
        }
        stats
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    /// Class prior P(i) from user frequencies.
    pub fn prior(&self, class: usize) -> f64 {
        self.users_per_class[class] as f64 / self.n_users as f64
    }

    /// Document frequency P(w): fraction of users whose field text contains w.
    pub fn doc_p(&self, word: usize) -> f64 {
        self.doc_count[word] as f64 / self.n_users as f64
    }

    /// P(i|w): fraction of the users containing w that belong to class i.
    pub fn class_given_present(&self, word: usize, class: usize) -> f64 {
        self.doc_count_per_class[word][class] as f64 / self.doc_count[word] as f64
    }

    /// P(i|w̄): fraction of the users not containing w that belong to class i.
    pub fn class_given_absent(&self, word: usize, class: usize) -> f64 {
        let absent = self.n_users - self.doc_count[word];
        (self.users_per_class[class] - self.doc_count_per_class[word][class]) as f64
            / absent as f64
    }

    /// Token frequency T(w) over all training text.
    pub fn token_p(&self, word: usize) -> f64 {
        self.token_count[word] as f64 / self.total_tokens as f64
    }

    /// Token frequency T(w|i) within class i's text; `None` when the class
    /// has no tokens.
    pub fn token_p_given_class(&self, word: usize, class: usize) -> Option<f64> {
        if self.tokens_per_class[class] == 0 {
            return None;
        }
        Some(self.token_count_per_class[word][class] as f64 / self.tokens_per_class[class] as f64)
    }

    /// Number of users whose field text contains the word.
    pub fn doc_count(&self, word: usize) -> usize {
        self.doc_count[word]
    }
}

/// Ranking method identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankMethod {
    Igr,
    Afr,
}

impl fmt::Display for RankMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankMethod::Igr => "IGR",
            RankMethod::Afr => "AFR",
        })
    }
}

/// One ranked word with its score.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedFeature {
    pub word: String,
    pub score: f64,
}

/// A full descending ranking of a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub field: TextField,
    pub method: RankMethod,
    pub features: Vec<RankedFeature>,
}

fn sort_ranking(features: &mut [(String, f64)]) {
    features.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
}

fn xlnx(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * p.ln()
    }
}

/// Information Gain Ratio ranking over document-level presence.
///
/// IGR(w) = (H(i) − H(i|w)) / IV(w) with natural logarithms, where
/// IV(w) = −P(w)ln P(w) − P(w̄)ln P(w̄). Words present in all or in no
/// training users carry no signal and score 0.
pub fn rank_igr(train: &Corpus, vocab: &Vocabulary) -> Result<Ranking> {
    let stats = FeatureStats::compute(train, vocab);
    if stats.classes().len() < 2 {
        return Err(Error::InvalidArgument(
            "IGR ranking requires at least 2 classes in the training corpus".into(),
        ));
    }
    let n_classes = stats.classes().len();
    let class_entropy: f64 = -(0..n_classes).map(|c| xlnx(stats.prior(c))).sum::<f64>();

    let mut scored: Vec<(String, f64)> = Vec::with_capacity(vocab.len());
    for (w, word) in vocab.words().iter().enumerate() {
        let p_w = stats.doc_p(w);
        let p_absent = 1.0 - p_w;
        let score = if stats.doc_count[w] == 0 || stats.doc_count[w] == stats.n_users {
            0.0
        } else {
            let iv = -xlnx(p_w) - xlnx(p_absent);
            let h_given: f64 = -(0..n_classes)
                .map(|c| {
                    p_w * xlnx(stats.class_given_present(w, c))
                        + p_absent * xlnx(stats.class_given_absent(w, c))
                })
                .sum::<f64>();
            (class_entropy - h_given) / iv
        };
        scored.push((word.clone(), score));
    }
    sort_ranking(&mut scored);
    Ok(Ranking {
        field: vocab.field(),
        method: RankMethod::Igr,
        features: scored
            .into_iter()
            .map(|(word, score)| RankedFeature { word, score })
            .collect(),
    })
}

/// Aggressive Feature Ranking over token-level frequencies:
/// AFR(w) = max over industries i of T(w|i)/T(w). Classes with no tokens are
/// skipped in the max.
pub fn rank_afr(train: &Corpus, vocab: &Vocabulary) -> Result<Ranking> {
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let stats = FeatureStats::compute(train, vocab);
    if stats.classes().is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let n_classes = stats.classes().len();

    let mut scored: Vec<(String, f64)> = Vec::with_capacity(vocab.len());
    for (w, word) in vocab.words().iter().enumerate() {
        let p_w = stats.token_p(w);
        let mut best = 0.0f64;
        for c in 0..n_classes {
            if let Some(p_wc) = stats.token_p_given_class(w, c) {
                best = best.max(p_wc / p_w);
            }
        }
        scored.push((word.clone(), best));
    }
    sort_ranking(&mut scored);
    Ok(Ranking {
        field: vocab.field(),
        method: RankMethod::Afr,
        features: scored
            .into_iter()
            .map(|(word, score)| RankedFeature { word, score })
            .collect(),
    })
}

/// The first ceil(proportion × N) ranked features as a new vocabulary,
/// ordered by rank. A 1e-9 tolerance shields the ceiling from float shadow
/// (0.05 × 200 must select 10 features, not 11).
pub fn select_top(ranking: &Ranking, proportion: f64) -> Result<Vocabulary> {
    if ranking.features.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    if proportion <= 0.0 || proportion > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "proportion must be in (0, 1], got {proportion}"
        )));
    }
    let n = ranking.features.len();
    let take = ((proportion * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let take = take.min(n);
    let words = ranking.features[..take]
        .iter()
        .map(|f| f.word.clone())
        .collect();
    Vocabulary::new(ranking.field, words)
}

/// For each industry, the `n` vocabulary words maximizing T(w|i)/T(w),
/// descending with lexicographic tie-breaks. Industries without tokens get
/// an empty list.
pub fn top_words_per_industry(
    train: &Corpus,
    vocab: &Vocabulary,
    n: usize,
) -> Result<BTreeMap<String, Vec<(String, f64)>>> {
    if n < 1 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let stats = FeatureStats::compute(train, vocab);
    let mut out = BTreeMap::new();
    for (c, class) in stats.classes().iter().enumerate() {
        let mut scored: Vec<(String, f64)> = Vec::new();
        if stats.tokens_per_class[c] > 0 {
            for (w, word) in vocab.words().iter().enumerate() {
                let ratio = stats.token_p_given_class(w, c).unwrap() / stats.token_p(w);
                scored.push((word.clone(), ratio));
            }
            sort_ranking(&mut scored);
            scored.truncate(n);
        }
        out.insert(class.clone(), scored);
    }
    Ok(out)
}

/// Ranking export: `rank,word,score,method`.
pub fn write_ranking_csv<W: Write>(ranking: &Ranking, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["rank", "word", "score", "method"])?;
    for (i, f) in ranking.features.iter().enumerate() {
        wtr.write_record([
            (i + 1).to_string(),
            f.word.clone(),
            f.score.to_string(),
            ranking.method.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<ranking csv>", e))?;
    Ok(())
}

/// Per-industry top-word export: `industry,rank,word,ratio`.
pub fn write_top_words_csv<W: Write>(
    top: &BTreeMap<String, Vec<(String, f64)>>,
    w: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["industry", "rank", "word", "ratio"])?;
    for (industry, words) in top {
        for (i, (word, ratio)) in words.iter().enumerate() {
            wtr.write_record([
                industry.clone(),
                (i + 1).to_string(),
                word.clone(),
                ratio.to_string(),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<top words csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Gender;

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

    fn corpus(users: Vec<UserRecord>) -> Corpus {
        Corpus::new(users, None).unwrap()
    }

    #[test]
    fn vocabulary_needs_min_users() {
        let c = corpus(vec![
            user("a", "A", &["shared rare1"]),
            user("b", "A", &["shared rare2"]),
            user("c", "B", &["shared other"]),
        ]);
        let vocab = build_vocabulary(&c, TextField::Content, 3).unwrap();
        assert_eq!(vocab.words(), ["shared"]);
        let all = build_vocabulary(&c, TextField::Content, 1).unwrap();
        assert_eq!(all.len(), 4);
    }

    #[test]
    fn vocabulary_counts_distinct_users_not_occurrences() {
        let c = corpus(vec![
            user("a", "A", &["alpha alpha"]),
            user("b", "A", &["alpha alpha"]),
            user("c", "A", &["alpha alpha"]),
        ]);
        let vocab = build_vocabulary(&c, TextField::Content, 3).unwrap();
        assert_eq!(vocab.words(), ["alpha"]);
        let strict = build_vocabulary(&c, TextField::Content, 4).unwrap();
        assert!(strict.is_empty());
    }

    #[test]
    fn vectorize_counts_and_ignores_oov() {
        let vocab =
            Vocabulary::new(TextField::Content, vec!["a".to_string(), "b".to_string()]).unwrap();
        let v = vectorize(&user("u", "A", &["a b a"]), &vocab);
        assert_eq!(v.counts.get(&0), Some(&2));
        assert_eq!(v.counts.get(&1), Some(&1));

        let oov = vectorize(&user("u", "A", &["c c"]), &vocab);
        assert!(oov.counts.is_empty());

        let empty = vectorize(&user("u", "A", &[]), &vocab);
        assert!(empty.counts.is_empty());
    }

    #[test]
    fn igr_is_one_for_perfectly_separating_word() {
        // 4 users, 2 balanced classes, w present in exactly the class-A users
        let c = corpus(vec![
            user("a1", "A", &["w filler"]),
            user("a2", "A", &["w filler"]),
            user("b1", "B", &["filler only"]),
            user("b2", "B", &["filler only"]),
        ]);
        let vocab = build_vocabulary(&c, TextField::Content, 1).unwrap();
        let ranking = rank_igr(&c, &vocab).unwrap();
        let w = ranking.features.iter().find(|f| f.word == "w").unwrap();
        assert!((w.score - 1.0).abs() < 1e-12, "got {}", w.score);
    }

    #[test]
    fn igr_is_zero_for_class_independent_word() {
        // identical presence rate (1/2) in every class
        let c = corpus(vec![
            user("a1", "A", &["w x"]),
            user("a2", "A", &["x y"]),
            user("b1", "B", &["w x"]),
            user("b2", "B", &["x y"]),
        ]);
        let vocab = build_vocabulary(&c, TextField::Content, 1).unwrap();
        let ranking = rank_igr(&c, &vocab).unwrap();
        let w = ranking.features.iter().find(|f| f.word == "w").unwrap();
        assert!(w.score.abs() < 1e-9, "got {}", w.score);
    }

    #[test]
    fn igr_zero_iv_scores_zero() {
        // "x" is in every document: IV = 0
        let c = corpus(vec![user("a1", "A", &["x w"]), user("b1", "B", &["x"])]);
        let vocab = build_vocabulary(&c, TextField::Content, 1).unwrap();
        let ranking = rank_igr(&c, &vocab).unwrap();
        let x = ranking.features.iter().find(|f| f.word == "x").unwrap();
        assert_eq!(x.score, 0.0);
    }

    #[test]
    fn afr_doubles_for_exclusive_word_in_half_of_tokens() {
        // class A holds exactly half of all training tokens; "w" only in A
        let c = corpus(vec![
            user("a", "A", &["w a1 a2 a3"]),
            user("b", "B", &["b1 b2 b3 b4"]),
        ]);
        let vocab = build_vocabulary(&c, TextField::Content, 1).unwrap();
        let ranking = rank_afr(&c, &vocab).unwrap();
        let w = ranking.features.iter().find(|f| f.word == "w").unwrap();
        assert!((w.score - 2.0).abs() < 1e-12, "got {}", w.score);
    }

    #[test]
    fn afr_is_one_for_uniform_word() {
        let c = corpus(vec![user("a", "A", &["w x"]), user("b", "B", &["w y"])]);
        let vocab = build_vocabulary(&c, TextField::Content, 1).unwrap();
        let ranking = rank_afr(&c, &vocab).unwrap();
        let w = ranking.features.iter().find(|f| f.word == "w").unwrap();
        assert!((w.score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn afr_at_least_one_for_every_word() {
        let c = corpus(vec![
            user("a", "A", &["p q r w"]),
            user("b", "B", &["q r s"]),
            user("c", "C", &["r s t w w"]),
        ]);
        let vocab = build_vocabulary(&c, TextField::Content, 1).unwrap();
        let ranking = rank_afr(&c, &vocab).unwrap();
        for f in &ranking.features {
            assert!(f.score >= 1.0 - 1e-9, "{} scored {}", f.word, f.score);
        }
    }

    #[test]
    fn select_top_ceil_arithmetic() {
        let features: Vec<RankedFeature> = (0..200)
            .map(|i| RankedFeature {
                word: format!("w{i:03}"),
                score: (200 - i) as f64,
            })
            .collect();
        let ranking = Ranking {
            field: TextField::Content,
            method: RankMethod::Afr,
            features,
        };
        assert_eq!(select_top(&ranking, 0.05).unwrap().len(), 10);
        assert_eq!(select_top(&ranking, 1.0).unwrap().len(), 200);
        assert!(select_top(&ranking, 0.0).is_err());
        assert!(select_top(&ranking, 1.2).is_err());

        let small = Ranking {
            field: TextField::Content,
            method: RankMethod::Afr,
            features: ranking.features[..3].to_vec(),
        };
        assert_eq!(select_top(&small, 0.5).unwrap().len(), 2);
    }

    #[test]
    fn select_top_is_nested() {
        let features: Vec<RankedFeature> = (0..37)
            .map(|i| RankedFeature {
                word: format!("w{i:02}"),
                score: (37 - i) as f64,
            })
            .collect();
        let ranking = Ranking {
            field: TextField::Content,
            method: RankMethod::Igr,
            features,
        };
        let mut prev: Vec<String> = Vec::new();
        for p in [0.1, 0.3, 0.5, 0.9, 1.0] {
            let sel = select_top(&ranking, p).unwrap();
            assert!(prev.iter().all(|w| sel.position(w).is_some()));
            prev = sel.words().to_vec();
        }
    }

    #[test]
    fn top_words_finds_planted_signal() {
        let c = corpus(vec![
            user("a", "Construction", &["roof roof roof site"]),
            user("b", "Technology", &["code site code"]),
        ]);
        let vocab = build_vocabulary(&c, TextField::Content, 1).unwrap();
        let top = top_words_per_industry(&c, &vocab, 1).unwrap();
        assert_eq!(top["Construction"][0].0, "roof");
        assert_eq!(top["Technology"][0].0, "code");
    }

    #[test]
    fn top_words_caps_at_vocabulary_size() {
        let c = corpus(vec![user("a", "A", &["x y"]), user("b", "B", &["y z"])]);
        let vocab = build_vocabulary(&c, TextField::Content, 1).unwrap();
        let top = top_words_per_industry(&c, &vocab, 99).unwrap();
        assert_eq!(top["A"].len(), 3);
    }

    #[test]
    fn top_words_tie_break_is_lexicographic() {
        let c = corpus(vec![
            user("a", "A", &["pear apple"]),
            user("b", "B", &["kiwi mango"]),
        ]);
        let vocab = build_vocabulary(&c, TextField::Content, 1).unwrap();
        let top = top_words_per_industry(&c, &vocab, 2).unwrap();
        // apple and pear tie at ratio 2.0 within class A
        assert_eq!(top["A"][0].0, "apple");
        assert_eq!(top["A"][1].0, "pear");
    }

    #[test]
    fn rankings_invariant_under_document_duplication() {
        let base = vec![
            user("a", "A", &["w x y"]),
            user("b", "B", &["x z"]),
            user("c", "B", &["w w z"]),
        ];
        let mut doubled = base.clone();
        for u in &base {
            let mut copy = u.clone();
            copy.user_id = format!("{}-dup", u.user_id);
            doubled.push(copy);
        }
        let c1 = corpus(base);
        let c2 = corpus(doubled);
        let v1 = build_vocabulary(&c1, TextField::Content, 1).unwrap();
        let v2 = build_vocabulary(&c2, TextField::Content, 1).unwrap();
        assert_eq!(v1.words(), v2.words());

        for (r1, r2) in [
            (rank_igr(&c1, &v1).unwrap(), rank_igr(&c2, &v2).unwrap()),
            (rank_afr(&c1, &v1).unwrap(), rank_afr(&c2, &v2).unwrap()),
        ] {
            for (f1, f2) in r1.features.iter().zip(&r2.features) {
                assert_eq!(f1.word, f2.word);
                assert!((f1.score - f2.score).abs() < 1e-12);
            }
        }
    }
}
