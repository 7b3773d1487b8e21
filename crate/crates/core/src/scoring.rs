//! Sentence scores from per-token natural-log probabilities.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("sentence must have at least one token")]
    Empty,
    #[error("{tokens} tokens but {logprobs} log-probabilities")]
    LengthMismatch { tokens: usize, logprobs: usize },
    #[error("log-probability {value} at position {index} is not a finite value ≤ 0")]
    InvalidLogProb { index: usize, value: f64 },
    #[error("vocabulary size must be at least 2, got {0}")]
    VocabTooSmall(u64),
    #[error("metric {0} requires {1}")]
    MissingAuxiliary(MetricKind, &'static str),
    #[error("token `{0}` has no unigram estimate (unseen with alpha = 0)")]
    UnresolvableToken(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("{distinct} distinct tokens exceed the declared vocabulary size {vocab_size}")]
    VocabOverflow { distinct: usize, vocab_size: u64 },
    #[error("invalid smoothing alpha {0}")]
    InvalidAlpha(f64),
    #[error("unigram log-frequency for `{0}` is not finite")]
    NonFiniteLogFreq(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
}

/// Tokens paired with their conditional log-probabilities log p(w_n | w_<n).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TokenScores {
    tokens: Vec<String>,
    logprobs: Vec<f64>,
}

impl TokenScores {
    pub fn new(tokens: Vec<String>, logprobs: Vec<f64>) -> Result<Self, ScoreError> {
        if tokens.len() != logprobs.len() {
            return Err(ScoreError::LengthMismatch {
                tokens: tokens.len(),
                logprobs: logprobs.len(),
            });
        }
        if tokens.is_empty() {
            return Err(ScoreError::Empty);
        }
        if let Some((index, &value)) = logprobs
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v <= 0.0))
        {
            return Err(ScoreError::InvalidLogProb { index, value });
        }
        Ok(Self { tokens, logprobs })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn logprobs(&self) -> &[f64] {
        &self.logprobs
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Token → smoothed natural-log relative frequency.
///
/// Tables built from counts use add-α smoothing over the declared closed
/// vocabulary: log_freq(t) = ln((count(t) + α) / (total + α·V)).
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramTable {
    counts: BTreeMap<String, u64>,
    log_freqs: BTreeMap<String, f64>,
    unseen: Option<f64>,
    vocab_size: u64,
    total_count: u64,
    smoothing_alpha: f64,
}

impl UnigramTable {
    pub fn from_counts(counts: BTreeMap<String, u64>, vocab_size: u64, alpha: f64) -> Result<Self, ScoreError> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(ScoreError::InvalidAlpha(alpha));
        }
        if vocab_size == 0 {
            return Err(ScoreError::VocabTooSmall(vocab_size));
        }
        let total_count: u64 = counts.values().sum();
        if total_count == 0 {
            return Err(ScoreError::EmptyCorpus);
        }
        if counts.len() as u64 > vocab_size {
            return Err(ScoreError::VocabOverflow {
                distinct: counts.len(),
                vocab_size,
            });
        }
        let denom = total_count as f64 + alpha * vocab_size as f64;
        let mut log_freqs = BTreeMap::new();
        for (tok, &c) in &counts {
            let lf = libm::log((c as f64 + alpha) / denom);
            if !lf.is_finite() {
                return Err(ScoreError::NonFiniteLogFreq(tok.clone()));
            }
            log_freqs.insert(tok.clone(), lf);
        }
        let unseen = (alpha > 0.0).then(|| libm::log(alpha / denom));
        Ok(Self {
            counts,
            log_freqs,
            unseen,
            vocab_size,
            total_count,
            smoothing_alpha: alpha,
        })
    }

    /// A table with explicit log-frequencies and a fallback for unlisted
    /// tokens. No normalization is imposed; used for degenerate reference
    /// tables (uniform, all-zero).
    pub fn from_log_freqs(
        log_freqs: BTreeMap<String, f64>,
        unseen: Option<f64>,
        vocab_size: u64,
    ) -> Result<Self, ScoreError> {
        if let Some((tok, _)) = log_freqs.iter().find(|(_, v)| !v.is_finite()) {
            return Err(ScoreError::NonFiniteLogFreq(tok.clone()));
        }
        if unseen.is_some_and(|u| !u.is_finite()) {
            return Err(ScoreError::NonFiniteLogFreq(String::from("<unseen>")));
        }
        Ok(Self {
            counts: BTreeMap::new(),
            log_freqs,
            unseen,
            vocab_size,
            total_count: 0,
            smoothing_alpha: 0.0,
        })
    }

    /// Every token maps to -ln(V).
    pub fn uniform(vocab_size: u64) -> Result<Self, ScoreError> {
        if vocab_size < 2 {
            return Err(ScoreError::VocabTooSmall(vocab_size));
        }
        Self::from_log_freqs(BTreeMap::new(), Some(-libm::log(vocab_size as f64)), vocab_size)
    }

    pub fn log_freq(&self, token: &str) -> Result<f64, ScoreError> {
        self.log_freqs
            .get(token)
            .copied()
            .or(self.unseen)
            .ok_or_else(|| ScoreError::UnresolvableToken(String::from(token)))
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn vocab_size(&self) -> u64 {
        self.vocab_size
    }

    pub fn total_count(&self) -> u64 {
        self.total_count
    }

    pub fn smoothing_alpha(&self) -> f64 {
        self.smoothing_alpha
    }

    /// Σ exp(log_freq) over the closed vocabulary (listed tokens plus the
    /// unseen remainder).
    pub fn total_probability(&self) -> f64 {
        let seen: f64 = self.log_freqs.values().map(|&v| libm::exp(v)).sum();
        let rest = self.vocab_size.saturating_sub(self.log_freqs.len() as u64) as f64;
        seen + self.unseen.map_or(0.0, |u| rest * libm::exp(u))
    }
}

/// The five linking functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum MetricKind {
    #[cfg_attr(feature = "serde", serde(rename = "logprob"))]
    LogProb,
    BfUniform,
    BfUnigram,
    Slor,
    #[cfg_attr(feature = "serde", serde(rename = "mean-logprob"))]
    MeanLogProb,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] = [
        MetricKind::LogProb,
        MetricKind::BfUniform,
        MetricKind::BfUnigram,
        MetricKind::Slor,
        MetricKind::MeanLogProb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::LogProb => "logprob",
            MetricKind::BfUniform => "bf-uniform",
            MetricKind::BfUnigram => "bf-unigram",
            MetricKind::Slor => "slor",
            MetricKind::MeanLogProb => "mean-logprob",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = ScoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| ScoreError::UnknownMetric(String::from(s)))
    }
}

pub fn logprob_sum(ts: &TokenScores) -> f64 {
    ts.logprobs.iter().sum()
}

/// Log Bayes factor against a uniform distribution over the vocabulary.
pub fn bf_uniform(ts: &TokenScores, vocab_size: u64) -> Result<f64, ScoreError> {
    if vocab_size < 2 {
        return Err(ScoreError::VocabTooSmall(vocab_size));
    }
    Ok(logprob_sum(ts) + ts.len() as f64 * libm::log(vocab_size as f64))
}

/// Like [`bf_uniform`] but with a real-valued vocabulary size.
pub fn bf_uniform_real(ts: &TokenScores, vocab_size: f64) -> f64 {
    logprob_sum(ts) + ts.len() as f64 * libm::log(vocab_size)
}

/// Log Bayes factor against the unigram model.
pub fn bf_unigram(ts: &TokenScores, uni: &UnigramTable) -> Result<f64, ScoreError> {
    let mut unigram = 0.0;
    for t in &ts.tokens {
        unigram += uni.log_freq(t)?;
    }
    Ok(logprob_sum(ts) - unigram)
}

/// Mean per-token PMI with the preceding context, i.e. SLOR.
pub fn slor(ts: &TokenScores, uni: &UnigramTable) -> Result<f64, ScoreError> {
    let mut acc = 0.0;
    for (t, lp) in ts.tokens.iter().zip(&ts.logprobs) {
        acc += lp - uni.log_freq(t)?;
    }
    Ok(acc / ts.len() as f64)
}

pub fn mean_logprob(ts: &TokenScores) -> f64 {
    logprob_sum(ts) / ts.len() as f64
}

/// Auxiliary inputs some metrics need.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScoringAux<'a> {
    pub unigram: Option<&'a UnigramTable>,
    pub vocab_size: Option<u64>,
}

impl<'a> ScoringAux<'a> {
    /// Fails with a configuration error naming the first metric whose
    /// auxiliary input is missing.
    pub fn check(&self, metrics: &[MetricKind]) -> Result<(), ScoreError> {
        for &m in metrics {
            match m {
                MetricKind::BfUniform if self.vocab_size.is_none() => {
                    return Err(ScoreError::MissingAuxiliary(m, "a vocabulary size"));
                }
                MetricKind::BfUnigram | MetricKind::Slor if self.unigram.is_none() => {
                    return Err(ScoreError::MissingAuxiliary(m, "a unigram table"));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

pub fn score(metric: MetricKind, ts: &TokenScores, aux: &ScoringAux<'_>) -> Result<f64, ScoreError> {
    aux.check(&[metric])?;
    match metric {
        MetricKind::LogProb => Ok(logprob_sum(ts)),
        MetricKind::BfUniform => bf_uniform(ts, aux.vocab_size.unwrap_or_default()),
        MetricKind::BfUnigram => bf_unigram(ts, aux.unigram.expect("checked")),
        MetricKind::Slor => slor(ts, aux.unigram.expect("checked")),
        MetricKind::MeanLogProb => Ok(mean_logprob(ts)),
    }
}
