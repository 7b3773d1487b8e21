//! Loaders for LM score dumps, human judgments and token corpora, plus the
//! dataset filters applied before analysis.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use minpair_core::predictions::{PairRecord, ScoredSentence};
use minpair_core::scoring::{ScoreError, TokenScores, UnigramTable};
use minpair_core::stats::{self, RatingRecord, StatsError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {} problem(s):\n{}", .problems.len(), join_problems(.problems))]
    Invalid { path: PathBuf, problems: Vec<LineProblem> },
    #[error("{path}: missing column(s) {missing:?}")]
    MissingColumns { path: PathBuf, missing: Vec<&'static str> },
    #[error("{path}: empty corpus")]
    EmptyCorpus { path: PathBuf },
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("no pairs to filter")]
    NoPairs,
    #[error("pair `{0}` has no Levenshtein distance")]
    MissingLevenshtein(String),
    #[error("quantile level {0} outside (0, 1]")]
    InvalidQuantile(f64),
    #[error("pair `{pair}`: embedding dimensions differ ({gram} vs {ungram})")]
    EmbeddingDims { pair: String, gram: usize, ungram: usize },
    #[error("token {0:?} contains a tab or newline and cannot be written to a table")]
    UnwritableToken(String),
    #[error("{path}: malformed table: {message}")]
    Table { path: PathBuf, message: String },
}

fn join_problems(problems: &[LineProblem]) -> String {
    problems
        .iter()
        .map(|p| format!("  {p}"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A problem tied to a 1-based line (or CSV row) number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineProblem {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Grammatical,
    Ungrammatical,
}

/// One line of a score dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoredSentenceRecord {
    pub id: String,
    pub dataset: String,
    #[serde(default)]
    pub pair_id: Option<String>,
    pub condition: Condition,
    pub text: String,
    pub tokens: Vec<String>,
    pub token_logprobs: Vec<f64>,
    #[serde(default)]
    pub embedding: Option<Vec<f64>>,
    #[serde(default)]
    pub language: Option<String>,
}

impl ScoredSentenceRecord {
    fn validate(&self) -> Result<(), String> {
        TokenScores::new(self.tokens.clone(), self.token_logprobs.clone())
            .map(|_| ())
            .map_err(|e| format!("record `{}`: {e}", self.id))?;
        if let Some(e) = &self.embedding {
            if e.iter().any(|v| !v.is_finite()) {
                return Err(format!("record `{}`: non-finite embedding value", self.id));
            }
        }
        Ok(())
    }

    pub fn to_sentence(&self) -> Result<ScoredSentence, ScoreError> {
        Ok(ScoredSentence {
            id: self.id.clone(),
            text: self.text.clone(),
            scores: TokenScores::new(self.tokens.clone(), self.token_logprobs.clone())?,
            embedding: self.embedding.clone(),
        })
    }
}

/// A parsed score dump. Every nonblank input line is either the header, a
/// kept record, or a rejection.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreDump {
    pub path: PathBuf,
    /// Contents of the optional leading `{"header": …}` line.
    pub header: Option<serde_json::Value>,
    pub records: Vec<ScoredSentenceRecord>,
    pub rejects: Vec<LineProblem>,
    pub line_count: usize,
}

impl ScoreDump {
    /// Fails listing every rejected line, if any.
    pub fn strict(self) -> Result<Self, IngestError> {
        if self.rejects.is_empty() {
            Ok(self)
        } else {
            Err(IngestError::Invalid {
                path: self.path,
                problems: self.rejects,
            })
        }
    }
}

/// Reads a JSON Lines score dump. Malformed lines, length mismatches,
/// invalid log-probabilities and duplicate (dataset, pair_id, condition)
/// triples are rejected with their line numbers rather than aborting the
/// read; call [`ScoreDump::strict`] to turn rejections into an error.
pub fn read_scored_jsonl(path: &Path) -> Result<ScoreDump, IngestError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut dump = ScoreDump {
        path: path.to_path_buf(),
        ..Default::default()
    };
    let mut seen_pairs: BTreeSet<(String, String, Condition)> = BTreeSet::new();
    let mut seen_ids: BTreeSet<(String, String)> = BTreeSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let lineno = i + 1;
        dump.line_count = lineno;
        let reject = |dump: &mut ScoreDump, message: String| {
            dump.rejects.push(LineProblem { line: lineno, message });
        };
        if line.trim().is_empty() {
            reject(&mut dump, String::from("blank line"));
            continue;
        }
        let value: serde_json::Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                reject(&mut dump, format!("invalid JSON: {e}"));
                continue;
            }
        };
        if let Some(h) = value.as_object().and_then(|o| o.get("header")) {
            if lineno == 1 {
                dump.header = Some(h.clone());
            } else {
                reject(&mut dump, String::from("header record must be the first line"));
            }
            continue;
        }
        let rec: ScoredSentenceRecord = match serde_json::from_value(value) {
            Ok(r) => r,
            Err(e) => {
                reject(&mut dump, format!("invalid record: {e}"));
                continue;
            }
        };
        if let Err(message) = rec.validate() {
            reject(&mut dump, message);
            continue;
        }
        if !seen_ids.insert((rec.dataset.clone(), rec.id.clone())) {
            reject(&mut dump, format!("duplicate id `{}` in dataset `{}`", rec.id, rec.dataset));
            continue;
        }
        if let Some(pid) = &rec.pair_id {
            if !seen_pairs.insert((rec.dataset.clone(), pid.clone(), rec.condition)) {
                reject(
                    &mut dump,
                    format!(
                        "duplicate ({}, {}, {:?}) triple",
                        rec.dataset, pid, rec.condition
                    ),
                );
                continue;
            }
        }
        dump.records.push(rec);
    }
    Ok(dump)
}

/// Writes records (and an optional header line) in the dump format.
pub fn write_scored_jsonl(
    path: &Path,
    header: Option<&serde_json::Value>,
    records: &[ScoredSentenceRecord],
) -> Result<(), IngestError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>, s: String| writeln!(w, "{s}").map_err(io_err(path));
    if let Some(h) = header {
        write(&mut w, serde_json::json!({ "header": h }).to_string())?;
    }
    for r in records {
        write(&mut w, serde_json::to_string(r).expect("records serialize"))?;
    }
    w.flush().map_err(io_err(path))
}

/// Sentences and pairs built from a dump's pairing index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairedCorpus {
    pub sentences: Vec<ScoredSentence>,
    /// Record index of each sentence, for language and dataset lookups.
    pub records: Vec<ScoredSentenceRecord>,
    /// Sorted by (dataset, pair_id).
    pub pairs: Vec<PairRecord>,
    /// Pair ids lacking one of the two conditions.
    pub incomplete: Vec<(String, String)>,
}

impl PairedCorpus {
    pub fn grammatical_flags(&self) -> Vec<bool> {
        self.records
            .iter()
            .map(|r| r.condition == Condition::Grammatical)
            .collect()
    }

    pub fn datasets(&self) -> BTreeSet<String> {
        self.records.iter().map(|r| r.dataset.clone()).collect()
    }

    /// The sub-corpus of one dataset, with pair indices remapped.
    pub fn dataset(&self, name: &str) -> PairedCorpus {
        let mut remap = vec![usize::MAX; self.records.len()];
        let mut out = PairedCorpus::default();
        for (i, r) in self.records.iter().enumerate() {
            if r.dataset == name {
                remap[i] = out.sentences.len();
                out.sentences.push(self.sentences[i].clone());
                out.records.push(r.clone());
            }
        }
        out.pairs = self
            .pairs
            .iter()
            .filter(|p| p.dataset == name)
            .map(|p| PairRecord {
                gram: remap[p.gram],
                ungram: remap[p.ungram],
                ..p.clone()
            })
            .collect();
        out.incomplete = self
            .incomplete
            .iter()
            .filter(|(d, _)| d == name)
            .cloned()
            .collect();
        out
    }
}

/// Groups records into grammatical/ungrammatical pairs on (dataset, pair_id).
pub fn build_pairs(records: &[ScoredSentenceRecord]) -> Result<PairedCorpus, IngestError> {
    let mut corpus = PairedCorpus::default();
    let mut index: BTreeMap<(String, String), [Option<usize>; 2]> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        corpus.sentences.push(r.to_sentence()?);
        corpus.records.push(r.clone());
        if let Some(pid) = &r.pair_id {
            let slot = index.entry((r.dataset.clone(), pid.clone())).or_default();
            slot[usize::from(r.condition == Condition::Ungrammatical)] = Some(i);
        }
    }
    for ((dataset, pair_id), slot) in index {
        match slot {
            [Some(g), Some(u)] => corpus.pairs.push(PairRecord {
                pair_id,
                dataset,
                gram: g,
                ungram: u,
                ..Default::default()
            }),
            _ => corpus.incomplete.push((dataset, pair_id)),
        }
    }
    Ok(corpus)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Judgments {
    pub records: Vec<RatingRecord>,
    /// Rows whose rating lies outside the 1–7 Likert range; kept.
    pub flagged: Vec<LineProblem>,
}

/// Reads `participant,item,rating` CSV. Ratings outside [1, 7] are kept and
/// flagged, since z-scored inputs are legal. All bad rows are reported
/// together.
pub fn read_judgments_csv(path: &Path) -> Result<Judgments, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_io(path, e))?;
    let headers = reader.headers().map_err(|e| csv_io(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (p, i, r) = (col("participant"), col("item"), col("rating"));
    let missing: Vec<&'static str> = [("participant", p), ("item", i), ("rating", r)]
        .into_iter()
        .filter(|(_, c)| c.is_none())
        .map(|(n, _)| n)
        .collect();
    if !missing.is_empty() {
        return Err(IngestError::MissingColumns {
            path: path.to_path_buf(),
            missing,
        });
    }
    let (p, i, r) = (p.unwrap(), i.unwrap(), r.unwrap());
    let mut out = Judgments::default();
    let mut problems = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        // Data rows start on line 2.
        let line = row + 2;
        let rec = match rec {
            Ok(rec) => rec,
            Err(e) => {
                problems.push(LineProblem {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let raw = rec.get(r).unwrap_or("");
        let rating: f64 = match raw.parse() {
            Ok(v) if f64::is_finite(v) => v,
            _ => {
                problems.push(LineProblem {
                    line,
                    message: format!("rating {raw:?} is not a finite number"),
                });
                continue;
            }
        };
        if !(1.0..=7.0).contains(&rating) {
            out.flagged.push(LineProblem {
                line,
                message: format!("rating {rating} outside 1-7"),
            });
        }
        out.records.push(RatingRecord {
            participant: rec.get(p).unwrap_or("").to_string(),
            item: rec.get(i).unwrap_or("").to_string(),
            rating,
        });
    }
    if !problems.is_empty() {
        return Err(IngestError::Invalid {
            path: path.to_path_buf(),
            problems,
        });
    }
    if !out.flagged.is_empty() {
        log::warn!(
            "{}: {} rating(s) outside 1-7 (treated as already scaled)",
            path.display(),
            out.flagged.len()
        );
    }
    Ok(out)
}

fn csv_io(path: &Path, e: csv::Error) -> IngestError {
    IngestError::Invalid {
        path: path.to_path_buf(),
        problems: vec![LineProblem {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        }],
    }
}

/// Mean within-participant z-score per item.
pub fn item_acceptability(judgments: &Judgments) -> Result<BTreeMap<String, f64>, IngestError> {
    let z = stats::zscore_within(&judgments.records)?;
    if !z.zero_variance.is_empty() {
        log::warn!(
            "participants with constant ratings (z-scores set to 0): {:?}",
            z.zero_variance
        );
    }
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in &z.records {
        let e = sums.entry(r.item.clone()).or_default();
        e.0 += r.rating;
        e.1 += 1;
    }
    Ok(sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect())
}

/// Fills `acc_gram`/`acc_ungram` from item acceptability keyed by sentence id.
/// Returns the number of pairs left without both ratings.
pub fn attach_acceptability(
    sentences: &[ScoredSentence],
    pairs: &mut [PairRecord],
    acc: &BTreeMap<String, f64>,
) -> usize {
    let mut missing = 0;
    for p in pairs.iter_mut() {
        p.acc_gram = acc.get(&sentences[p.gram].id).copied();
        p.acc_ungram = acc.get(&sentences[p.ungram].id).copied();
        if p.acc_gram.is_none() || p.acc_ungram.is_none() {
            missing += 1;
        }
    }
    missing
}

/// Counts tokens (one per line; blank lines skipped) and smooths them into a
/// unigram table.
pub fn build_unigram(corpus: &Path, vocab_size: u64, alpha: f64) -> Result<UnigramTable, IngestError> {
    let file = File::open(corpus).map_err(io_err(corpus))?;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err(corpus))?;
        let tok = line.strip_suffix('\r').unwrap_or(&line);
        if tok.is_empty() {
            continue;
        }
        *counts.entry(tok.to_string()).or_default() += 1;
    }
    if counts.is_empty() {
        return Err(IngestError::EmptyCorpus {
            path: corpus.to_path_buf(),
        });
    }
    Ok(UnigramTable::from_counts(counts, vocab_size, alpha)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct UnigramHeader {
    total_count: u64,
    vocab_size: u64,
    smoothing_alpha: f64,
}

/// Writes a JSON header line followed by `token<TAB>count` rows in token order.
pub fn write_unigram_tsv(path: &Path, table: &UnigramTable) -> Result<(), IngestError> {
    if let Some(bad) = table.counts().keys().find(|t| t.contains(['\t', '\n', '\r'])) {
        return Err(IngestError::UnwritableToken(bad.clone()));
    }
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let header = UnigramHeader {
        total_count: table.total_count(),
        vocab_size: table.vocab_size(),
        smoothing_alpha: table.smoothing_alpha(),
    };
    writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes")).map_err(io_err(path))?;
    for (tok, c) in table.counts() {
        writeln!(w, "{tok}\t{c}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_unigram_tsv(path: &Path) -> Result<UnigramTable, IngestError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines();
    let table_err = |message: String| IngestError::Table {
        path: path.to_path_buf(),
        message,
    };
    let first = lines
        .next()
        .ok_or_else(|| table_err(String::from("missing header")))?
        .map_err(io_err(path))?;
    let header: UnigramHeader =
        serde_json::from_str(&first).map_err(|e| table_err(format!("header: {e}")))?;
    let mut counts = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err(path))?;
        let (tok, c) = line
            .split_once('\t')
            .ok_or_else(|| table_err(format!("line {}: expected token<TAB>count", i + 2)))?;
        let c: u64 = c
            .parse()
            .map_err(|_| table_err(format!("line {}: bad count {c:?}", i + 2)))?;
        counts.insert(tok.to_string(), c);
    }
    let table = UnigramTable::from_counts(counts, header.vocab_size, header.smoothing_alpha)?;
    if table.total_count() != header.total_count {
        return Err(table_err(format!(
            "header total_count {} but rows sum to {}",
            header.total_count,
            table.total_count()
        )));
    }
    Ok(table)
}

/// Whether the Levenshtein quantile is computed per dataset or over all pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantileScope {
    #[default]
    PerDataset,
    Pooled,
}

/// Thresholds from a first filtering pass, reusable on later inputs.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct LevThresholds {
    pub q: f64,
    pub scope: Option<QuantileScope>,
    /// Keyed by dataset; the pooled threshold uses the empty key.
    pub by_dataset: BTreeMap<String, f64>,
}

impl LevThresholds {
    fn key<'a>(&self, dataset: &'a str) -> &'a str {
        match self.scope {
            Some(QuantileScope::Pooled) => "",
            _ => dataset,
        }
    }

    /// Keeps pairs strictly below their threshold. Pairs from datasets with
    /// no frozen threshold are kept.
    pub fn apply(&self, pairs: &[PairRecord]) -> Result<FilterOutcome, IngestError> {
        let mut out = FilterOutcome {
            thresholds: self.clone(),
            ..Default::default()
        };
        for p in pairs {
            let d = p
                .lev_dist
                .ok_or_else(|| IngestError::MissingLevenshtein(p.pair_id.clone()))?;
            match self.by_dataset.get(self.key(&p.dataset)) {
                Some(&t) if (d as f64) >= t => out.dropped.push(p.clone()),
                _ => out.kept.push(p.clone()),
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterOutcome {
    pub kept: Vec<PairRecord>,
    pub dropped: Vec<PairRecord>,
    pub thresholds: LevThresholds,
}

/// Keeps pairs whose Levenshtein distance is strictly below the empirical
/// `q`-quantile (linear interpolation between order statistics).
pub fn filter_levenshtein_quantile(
    pairs: &[PairRecord],
    q: f64,
    scope: QuantileScope,
) -> Result<FilterOutcome, IngestError> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(IngestError::InvalidQuantile(q));
    }
    if pairs.is_empty() {
        return Err(IngestError::NoPairs);
    }
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for p in pairs {
        let d = p
            .lev_dist
            .ok_or_else(|| IngestError::MissingLevenshtein(p.pair_id.clone()))?;
        let key = match scope {
            QuantileScope::PerDataset => p.dataset.clone(),
            QuantileScope::Pooled => String::new(),
        };
        groups.entry(key).or_default().push(d as f64);
    }
    let mut thresholds = LevThresholds {
        q,
        scope: Some(scope),
        by_dataset: BTreeMap::new(),
    };
    for (k, v) in groups {
        thresholds.by_dataset.insert(k, stats::quantile(&v, q)?);
    }
    thresholds.apply(pairs)
}

/// Pairs whose members lack embeddings, reported by [`annotate_distances`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotateSummary {
    pub missing_embeddings: Vec<String>,
}

/// Fills character-level `lev_dist` on sentence texts and, when
/// `use_embeddings`, `cosine_dist` on sentence embeddings.
pub fn annotate_distances(
    sentences: &[ScoredSentence],
    pairs: &mut [PairRecord],
    use_embeddings: bool,
) -> Result<AnnotateSummary, IngestError> {
    let mut summary = AnnotateSummary::default();
    for p in pairs.iter_mut() {
        let (g, u) = (&sentences[p.gram], &sentences[p.ungram]);
        p.lev_dist = Some(stats::levenshtein_chars(&g.text, &u.text));
        if !use_embeddings {
            continue;
        }
        match (&g.embedding, &u.embedding) {
            (Some(a), Some(b)) => {
                if a.len() != b.len() {
                    return Err(IngestError::EmbeddingDims {
                        pair: p.pair_id.clone(),
                        gram: a.len(),
                        ungram: b.len(),
                    });
                }
                p.cosine_dist = Some(stats::cosine_distance(a, b)?);
            }
            _ => {
                p.cosine_dist = None;
                summary.missing_embeddings.push(p.pair_id.clone());
            }
        }
    }
    Ok(summary)
}
