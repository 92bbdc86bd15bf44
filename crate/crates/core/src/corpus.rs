//! Corpus ingestion, cleaning, tokenization, filtering, splitting, and
//! per-user statistics.
//!
//! A corpus is a flat list of [`UserRecord`]s plus the industry taxonomy.
//! Ingestion reads one JSON object per line; invalid lines are collected in a
//! rejects report instead of being silently dropped.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Declared gender of a user profile. Missing values map to `Undefined`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Undefined,
}

impl Default for Gender {
    fn default() -> Self {
        Gender::Undefined
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Undefined => "undefined",
        };
        f.write_str(s)
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "male" => Ok(Gender::Male),
            "female" => Ok(Gender::Female),
            "undefined" => Ok(Gender::Undefined),
            other => Err(Error::InvalidArgument(format!("invalid gender: {other}"))),
        }
    }
}

/// One user: industry label, posted text, and six profile metadata fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub industry: String,
    #[serde(default)]
    pub gender: Gender,
    #[serde(default)]
    pub occupation: Option<String>,
    #[serde(default)]
    pub city: Option<String>,
    #[serde(default)]
    pub state: Option<String>,
    #[serde(default)]
    pub introduction: Option<String>,
    #[serde(default)]
    pub interests: Option<String>,
    pub posts: Vec<String>,
}

/// A set of users plus the ordered industry taxonomy they are labeled with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub users: Vec<UserRecord>,
    pub taxonomy: Vec<String>,
}

impl Corpus {
    /// Builds a corpus, deriving the taxonomy from the observed industries
    /// (sorted) when none is supplied.
    pub fn new(users: Vec<UserRecord>, taxonomy: Option<Vec<String>>) -> Result<Self> {
        let taxonomy = match taxonomy {
            Some(t) => {
                let distinct: HashSet<&String> = t.iter().collect();
                if distinct.len() != t.len() {
                    return Err(Error::InvalidArgument(
                        "taxonomy contains duplicate labels".into(),
                    ));
                }
                for u in &users {
                    if !t.contains(&u.industry) {
                        return Err(Error::UnknownIndustry(u.industry.clone()));
                    }
                }
                t
            }
            None => {
                let set: BTreeSet<String> = users.iter().map(|u| u.industry.clone()).collect();
                set.into_iter().collect()
            }
        };
        Ok(Corpus { users, taxonomy })
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Retains exactly the users whose cumulative cleaned post character
    /// count is at least `min_chars`. The boundary is inclusive: a user with
    /// exactly `min_chars` characters is kept.
    pub fn filter_min_chars(&self, min_chars: usize) -> Corpus {
        let users = self
            .users
            .iter()
            .filter(|u| cleaned_char_count(u) >= min_chars)
            .cloned()
            .collect();
        Corpus {
            users,
            taxonomy: self.taxonomy.clone(),
        }
    }

    /// Deterministic seeded shuffle followed by a three-way partition.
    pub fn split(&self, spec: &SplitSpec) -> Result<(Corpus, Corpus, Corpus)> {
        let n = self.users.len();
        let (n_train, n_dev, n_test) = spec.resolve(n)?;

        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        order.shuffle(&mut rng);

        let part = |range: std::ops::Range<usize>| -> Corpus {
            Corpus {
                users: order[range].iter().map(|&i| self.users[i].clone()).collect(),
                taxonomy: self.taxonomy.clone(),
            }
        };
        let train = part(0..n_train);
        let dev = part(n_train..n_train + n_dev);
        let test = part(n_train + n_dev..n_train + n_dev + n_test);
        Ok((train, dev, test))
    }

    /// Max/mean/σ/median of per-user post counts and cleaned character
    /// counts. σ is the population standard deviation. An empty corpus
    /// yields all-zero stats.
    pub fn stats(&self) -> CorpusStats {
        let post_counts: Vec<u64> = self.users.iter().map(|u| u.posts.len() as u64).collect();
        let char_counts: Vec<u64> = self
            .users
            .iter()
            .map(|u| cleaned_char_count(u) as u64)
            .collect();
        CorpusStats {
            posts: DistStats::from_counts(&post_counts),
            chars: DistStats::from_counts(&char_counts),
        }
    }

    /// Serializes the corpus as one JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for user in &self.users {
            serde_json::to_writer(&mut w, user)?;
            w.write_all(b"\n")
                .map_err(|e| Error::io("<jsonl output>", e))?;
        }
        Ok(())
    }
}

/// Requested sizes of the train/dev/test parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitSizes {
    /// Non-negative fractions summing to 1 within 1e-9.
    Fractions(f64, f64, f64),
    /// Absolute user counts; their sum must not exceed the corpus size.
    Counts(usize, usize, usize),
}

/// Deterministic split specification: sizes plus the shuffle seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub sizes: SplitSizes,
    pub seed: u64,
}

impl SplitSpec {
    pub fn fractions(train: f64, dev: f64, test: f64, seed: u64) -> Result<Self> {
        if train < 0.0 || dev < 0.0 || test < 0.0 {
            return Err(Error::InvalidArgument("split fractions must be non-negative".into()));
        }
        if (train + dev + test - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split fractions must sum to 1, got {}",
                train + dev + test
            )));
        }
        Ok(SplitSpec {
            sizes: SplitSizes::Fractions(train, dev, test),
            seed,
        })
    }

    pub fn counts(train: usize, dev: usize, test: usize, seed: u64) -> Self {
        SplitSpec {
            sizes: SplitSizes::Counts(train, dev, test),
            seed,
        }
    }

    /// Resolves the requested sizes against a corpus of `n` users.
    ///
    /// Fractional rounding: train gets the floor, dev gets the floor, the
    /// test part takes the rest.
    fn resolve(&self, n: usize) -> Result<(usize, usize, usize)> {
        match self.sizes {
            SplitSizes::Fractions(tr, dv, _te) => {
                let n_train = (tr * n as f64).floor() as usize;
                let n_dev = (dv * n as f64).floor() as usize;
                Ok((n_train, n_dev, n - n_train - n_dev))
            }
            SplitSizes::Counts(a, b, c) => {
                let total = a
                    .checked_add(b)
                    .and_then(|s| s.checked_add(c))
                    .ok_or_else(|| Error::InvalidArgument("split counts overflow".into()))?;
                if total > n {
                    return Err(Error::InvalidArgument(format!(
                        "split counts sum to {total} but corpus has {n} users"
                    )));
                }
                Ok((a, b, c))
            }
        }
    }
}

/// Max/mean/σ/median of one per-user count distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistStats {
    pub max: u64,
    pub mean: f64,
    pub std_dev: f64,
    pub median: f64,
}

impl DistStats {
    fn from_counts(counts: &[u64]) -> DistStats {
        if counts.is_empty() {
            return DistStats {
                max: 0,
                mean: 0.0,
                std_dev: 0.0,
                median: 0.0,
            };
        }
        let n = counts.len() as f64;
        let max = *counts.iter().max().unwrap();
        let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
        let var = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / n;
        let mut sorted = counts.to_vec();
        sorted.sort_unstable();
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid] as f64
        } else {
            (sorted[mid - 1] as f64 + sorted[mid] as f64) / 2.0
        };
        DistStats {
            max,
            mean,
            std_dev: var.sqrt(),
            median,
        }
    }
}

/// Per-user post-count and character-count distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub posts: DistStats,
    pub chars: DistStats,
}

/// Writes stats as CSV: `metric,max,mean,std_dev,median`.
pub fn write_stats_csv<W: Write>(stats: &CorpusStats, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["metric", "max", "mean", "std_dev", "median"])?;
    for (name, d) in [("posts", stats.posts), ("characters", stats.chars)] {
        wtr.write_record([
            name.to_string(),
            d.max.to_string(),
            d.mean.to_string(),
            d.std_dev.to_string(),
            d.median.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<stats csv>", e))?;
    Ok(())
}

/// A skipped ingest line and the reason it was skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct Reject {
    pub line_number: usize,
    pub reason: String,
}

/// Result of ingesting a JSONL file: the valid records plus a rejects report.
#[derive(Debug, Clone)]
pub struct Ingest {
    pub corpus: Corpus,
    pub rejects: Vec<Reject>,
}

/// Writes the rejects report as CSV: `line_number,reason`.
pub fn write_rejects_csv<W: Write>(rejects: &[Reject], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["line_number", "reason"])?;
    for r in rejects {
        wtr.write_record([r.line_number.to_string(), r.reason.clone()])?;
    }
    wtr.flush().map_err(|e| Error::io("<rejects csv>", e))?;
    Ok(())
}

/// Taxonomy config: an explicit label list plus optional merge directives
/// that map source labels onto a merged label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyConfig {
    pub labels: Vec<String>,
    pub merges: Vec<(String, String)>,
}

impl TaxonomyConfig {
    /// Parses the plain-text format: one label per line, blank lines and
    /// `#` comments ignored, `merge: <source> -> <target>` directives mixed in.
    pub fn parse(text: &str) -> Result<Self> {
        let mut labels = Vec::new();
        let mut merges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("merge:") {
                let (src, dst) = rest.split_once("->").ok_or_else(|| Error::Parse {
                    path: "<taxonomy>".into(),
                    line: i + 1,
                    msg: "merge directive must be `merge: <source> -> <target>`".into(),
                })?;
                merges.push((src.trim().to_string(), dst.trim().to_string()));
            } else {
                labels.push(line.to_string());
            }
        }
        let distinct: HashSet<&String> = labels.iter().collect();
        if distinct.len() != labels.len() {
            return Err(Error::InvalidArgument(
                "taxonomy contains duplicate labels".into(),
            ));
        }
        for (_, dst) in &merges {
            if !labels.contains(dst) {
                return Err(Error::InvalidArgument(format!(
                    "merge target `{dst}` is not a taxonomy label"
                )));
            }
        }
        Ok(TaxonomyConfig { labels, merges })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies merge directives to a raw industry label.
    pub fn resolve(&self, label: &str) -> String {
        for (src, dst) in &self.merges {
            if src == label {
                return dst.clone();
            }
        }
        label.to_string()
    }
}

/// Reads a corpus from a JSONL file; the taxonomy is the sorted set of
/// observed industries.
pub fn ingest_jsonl(path: impl AsRef<Path>) -> Result<Ingest> {
    ingest_jsonl_with(path, None)
}

/// Reads a corpus from a JSONL file. With a taxonomy config: merge
/// directives are applied to each record's industry, and records whose
/// resolved industry is not in the config's label list are rejected.
///
/// Malformed lines, missing required fields, and duplicate user ids are
/// reported as rejects, never silently dropped.
pub fn ingest_jsonl_with(
    path: impl AsRef<Path>,
    taxonomy: Option<&TaxonomyConfig>,
) -> Result<Ingest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;

    let mut users: Vec<UserRecord> = Vec::new();
    let mut rejects: Vec<Reject> = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();

    for (i, line) in text.lines().enumerate() {
        let line_number = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_record_line(line, taxonomy) {
            Ok(mut record) => {
                if !seen_ids.insert(record.user_id.clone()) {
                    rejects.push(Reject {
                        line_number,
                        reason: "duplicate user_id".into(),
                    });
                    continue;
                }
                if let Some(cfg) = taxonomy {
                    record.industry = cfg.resolve(&record.industry);
                    if !cfg.labels.contains(&record.industry) {
                        seen_ids.remove(&record.user_id);
                        rejects.push(Reject {
                            line_number,
                            reason: format!("unknown industry: {}", record.industry),
                        });
                        continue;
                    }
                }
                users.push(record);
            }
            Err(reason) => rejects.push(Reject {
                line_number,
                reason,
            }),
        }
    }

    let labels = taxonomy.map(|cfg| cfg.labels.clone());
    let corpus = Corpus::new(users, labels)?;
    Ok(Ingest { corpus, rejects })
}

fn parse_record_line(line: &str, _taxonomy: Option<&TaxonomyConfig>) -> std::result::Result<UserRecord, String> {
    let value: serde_json::Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(_) => return Err("malformed json".into()),
    };
    let obj = match value.as_object() {
        Some(o) => o,
        None => return Err("not a json object".into()),
    };
    for key in ["user_id", "industry", "posts"] {
        if !obj.contains_key(key) || obj[key].is_null() {
            return Err(format!("missing {key}"));
        }
    }
    let record: UserRecord = match serde_json::from_value(value.clone()) {
        Ok(r) => r,
        Err(e) => return Err(format!("invalid record: {e}")),
    };
    if record.user_id.is_empty() {
        return Err("empty user_id".into());
    }
    if record.industry.is_empty() {
        return Err("empty industry".into());
    }
    Ok(record)
}

/// Removes HTML tags: spans matching `<...>` with no nested `<`. A `<` with
/// no closing `>` before the next `<` is kept as literal text. No entity
/// decoding is performed.
pub fn strip_html(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'<' {
            // scan for `>` before any nested `<`
            let mut j = i + 1;
            let mut closed = None;
            while j < bytes.len() {
                match bytes[j] {
                    b'>' => {
                        closed = Some(j);
                        break;
                    }
                    b'<' => break,
                    _ => j += 1,
                }
            }
            if let Some(end) = closed {
                i = end + 1;
                continue;
            }
        }
        // advance one full UTF-8 character
        let ch_len = utf8_len(bytes[i]);
        out.push_str(&text[i..i + ch_len]);
        i += ch_len;
    }
    out
}

fn utf8_len(first_byte: u8) -> usize {
    match first_byte {
        b if b < 0x80 => 1,
        b if b >> 5 == 0b110 => 2,
        b if b >> 4 == 0b1110 => 3,
        _ => 4,
    }
}

/// Strips HTML tags, lowercases, and splits into maximal runs of Unicode
/// letters and digits. Total function: any input yields a (possibly empty)
/// token list.
pub fn clean_and_tokenize(text: &str) -> Vec<String> {
    let cleaned = strip_html(text);
    let lowered = cleaned.to_lowercase();
    tokenize(&lowered)
}

fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.push(ch);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Cumulative cleaned character count of a user's posts (HTML stripped,
/// before tokenization). This is the quantity the 600-character filter
/// applies to.
pub fn cleaned_char_count(user: &UserRecord) -> usize {
    user.posts.iter().map(|p| strip_html(p).chars().count()).sum()
}
