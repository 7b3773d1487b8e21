//! Harnesses for the three predictions: correlation of paired log-probabilities,
//! correlation with acceptability differences, and separability of pooled
//! grammatical and ungrammatical strings.
//!
//! All within-pair deltas are grammatical minus ungrammatical.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::model::{ErrorModel, ModelError};
use crate::scoring::{self, MetricKind, ScoreError, ScoringAux, TokenScores};
use crate::stats::{self, RocResult, StatsError};
use crate::world::NodeId;

pub mod sim;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictionError {
    #[error("{context}: {source}")]
    Stats {
        context: String,
        #[source]
        source: StatsError,
    },
    #[error("bin {bin}: {source}")]
    Bin {
        bin: usize,
        #[source]
        source: StatsError,
    },
    #[error("bin {bin} has {n} pairs; at least 3 are needed")]
    SparseBin { bin: usize, n: usize },
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("pair `{0}` lacks acceptability ratings")]
    MissingAcceptability(String),
    #[error("pair `{pair}` refers to sentence index {index} out of {len}")]
    BadReference { pair: String, index: usize, len: usize },
    #[error("pair `{0}` uses the same sentence twice")]
    SelfPair(String),
    #[error("both classes must be nonempty ({gram} grammatical, {ungram} ungrammatical)")]
    EmptyClass { gram: usize, ungram: usize },
    #[error("no pairs")]
    NoPairs,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

type Result<T> = core::result::Result<T, PredictionError>;

fn stats_ctx(context: &str) -> impl FnOnce(StatsError) -> PredictionError + '_ {
    move |source| PredictionError::Stats {
        context: String::from(context),
        source,
    }
}

/// A scored sentence, from the simulator or an LM dump.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoredSentence {
    pub id: String,
    pub text: String,
    pub scores: TokenScores,
    pub embedding: Option<Vec<f64>>,
}

impl ScoredSentence {
    pub fn logprob(&self) -> f64 {
        scoring::logprob_sum(&self.scores)
    }
}

/// A grammatical/ungrammatical pair; `gram` and `ungram` index a sentence list.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairRecord {
    pub pair_id: String,
    pub dataset: String,
    pub gram: usize,
    pub ungram: usize,
    pub error_dist: Option<usize>,
    pub cosine_dist: Option<f64>,
    pub lev_dist: Option<usize>,
    pub msg_similarity: Option<f64>,
    pub acc_gram: Option<f64>,
    pub acc_ungram: Option<f64>,
}

/// Distance annotation used for binning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum BinBy {
    CosineDist,
    MsgSimilarity,
    LevDist,
    ErrorDist,
}

impl BinBy {
    pub fn value(self, pair: &PairRecord) -> Option<f64> {
        match self {
            BinBy::CosineDist => pair.cosine_dist,
            BinBy::MsgSimilarity => pair.msg_similarity,
            BinBy::LevDist => pair.lev_dist.map(|d| d as f64),
            BinBy::ErrorDist => pair.error_dist.map(|d| d as f64),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BinBy::CosineDist => "cosine_dist",
            BinBy::MsgSimilarity => "msg_similarity",
            BinBy::LevDist => "lev_dist",
            BinBy::ErrorDist => "error_dist",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinStat {
    pub bin: usize,
    pub mean_distance: f64,
    pub r: f64,
    pub n: usize,
}

/// A model-derived expectation next to the value observed in simulation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnalyticCheck {
    pub name: String,
    pub predicted: f64,
    pub empirical: f64,
}

/// Percentile bootstrap interval.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BootstrapCi {
    pub statistic: String,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub resamples: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreSummary {
    pub metric: MetricKind,
    pub grammatical: bool,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictionReport {
    pub overall_r: Option<f64>,
    pub n_pairs: usize,
    /// Pairs left out of binning for lack of the binning variable.
    pub excluded: usize,
    pub bin_by: Option<BinBy>,
    pub per_bin: Vec<BinStat>,
    pub auc_by_metric: BTreeMap<MetricKind, f64>,
    pub roc_by_metric: BTreeMap<MetricKind, RocResult>,
    pub score_summary: Vec<ScoreSummary>,
    pub accuracy_by_metric: BTreeMap<MetricKind, f64>,
    pub analytic: Vec<AnalyticCheck>,
    pub bootstrap: Vec<BootstrapCi>,
}

fn check_refs(sentences: &[ScoredSentence], pairs: &[PairRecord]) -> Result<()> {
    for p in pairs {
        for index in [p.gram, p.ungram] {
            if index >= sentences.len() {
                return Err(PredictionError::BadReference {
                    pair: p.pair_id.clone(),
                    index,
                    len: sentences.len(),
                });
            }
        }
        if p.gram == p.ungram {
            return Err(PredictionError::SelfPair(p.pair_id.clone()));
        }
    }
    Ok(())
}

/// Overall and per-bin Pearson r of `(x, y)` columns, binned on `bin_by`.
fn correlate_binned(
    pairs: &[PairRecord],
    x: &[f64],
    y: &[f64],
    k_bins: usize,
    bin_by: BinBy,
) -> Result<PredictionReport> {
    if pairs.is_empty() {
        return Err(PredictionError::NoPairs);
    }
    if k_bins == 0 {
        return Err(PredictionError::InvalidParams(String::from("k_bins must be positive")));
    }
    let overall = stats::pearson_r(x, y).map_err(stats_ctx("overall"))?;

    let keyed: Vec<(usize, f64)> = pairs
        .iter()
        .enumerate()
        .filter_map(|(i, p)| bin_by.value(p).map(|v| (i, v)))
        .collect();
    let excluded = pairs.len() - keyed.len();
    let mut per_bin = Vec::new();
    if !keyed.is_empty() {
        let values: Vec<f64> = keyed.iter().map(|k| k.1).collect();
        let bins = stats::quantile_bins(&values, k_bins).map_err(stats_ctx("binning"))?;
        for bin in 0..k_bins {
            let members: Vec<usize> = (0..keyed.len()).filter(|&j| bins[j] == bin).collect();
            if members.len() < 3 {
                return Err(PredictionError::SparseBin {
                    bin,
                    n: members.len(),
                });
            }
            let bx: Vec<f64> = members.iter().map(|&j| x[keyed[j].0]).collect();
            let by: Vec<f64> = members.iter().map(|&j| y[keyed[j].0]).collect();
            let r = stats::pearson_r(&bx, &by).map_err(|source| PredictionError::Bin { bin, source })?;
            let mean_distance = members.iter().map(|&j| keyed[j].1).sum::<f64>() / members.len() as f64;
            per_bin.push(BinStat {
                bin,
                mean_distance,
                r,
                n: members.len(),
            });
        }
    }
    Ok(PredictionReport {
        overall_r: Some(overall),
        n_pairs: pairs.len(),
        excluded,
        bin_by: Some(bin_by),
        per_bin,
        ..Default::default()
    })
}

/// Correlation between grammatical and ungrammatical log-probabilities within
/// pairs, overall and per distance bin.
pub fn pred1_run(
    sentences: &[ScoredSentence],
    pairs: &[PairRecord],
    k_bins: usize,
    bin_by: BinBy,
) -> Result<PredictionReport> {
    check_refs(sentences, pairs)?;
    let (x, y) = logprob_columns(sentences, pairs);
    correlate_binned(pairs, &x, &y, k_bins, bin_by)
}

/// (log P gram, log P ungram) for each pair.
pub fn logprob_columns(sentences: &[ScoredSentence], pairs: &[PairRecord]) -> (Vec<f64>, Vec<f64>) {
    pairs
        .iter()
        .map(|p| (sentences[p.gram].logprob(), sentences[p.ungram].logprob()))
        .unzip()
}

/// (acceptability delta, log-probability delta) for each pair.
pub fn delta_columns(sentences: &[ScoredSentence], pairs: &[PairRecord]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut acc = Vec::with_capacity(pairs.len());
    let mut lp = Vec::with_capacity(pairs.len());
    for p in pairs {
        let (Some(ag), Some(au)) = (p.acc_gram, p.acc_ungram) else {
            return Err(PredictionError::MissingAcceptability(p.pair_id.clone()));
        };
        acc.push(ag - au);
        lp.push(sentences[p.gram].logprob() - sentences[p.ungram].logprob());
    }
    Ok((acc, lp))
}

/// Correlation between acceptability and log-probability differences.
pub fn pred2_run(
    sentences: &[ScoredSentence],
    pairs: &[PairRecord],
    k_bins: usize,
    bin_by: BinBy,
) -> Result<PredictionReport> {
    check_refs(sentences, pairs)?;
    let (acc, lp) = delta_columns(sentences, pairs)?;
    correlate_binned(pairs, &acc, &lp, k_bins, bin_by)
}

/// Weights of message plausibility and error cost in acceptability ratings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AcceptabilityParams {
    pub w_message: f64,
    pub w_error: f64,
    pub noise_sd: f64,
}

impl Default for AcceptabilityParams {
    fn default() -> Self {
        Self {
            w_message: 0.5,
            w_error: 1.0,
            noise_sd: 0.0,
        }
    }
}

/// E = d·ln(ε/K).
pub fn error_cost(d: usize, epsilon: f64, k_branch: u32) -> f64 {
    if d == 0 {
        return 0.0;
    }
    d as f64 * libm::log(epsilon / k_branch as f64)
}

/// Synthetic acceptability of a pair: w_message·ln P(m*) + w_error·E + noise
/// for each member, where m* is the inferred message of that string and E is
/// the error cost of reaching it from g(m*). Noise draws are independent
/// standard normals scaled by `noise_sd`, deterministic in `seed`.
pub fn synth_acceptability(
    model: &ErrorModel<'_>,
    gram: NodeId,
    ungram: NodeId,
    params: &AcceptabilityParams,
    seed: u64,
) -> Result<(f64, f64)> {
    if !(params.noise_sd >= 0.0 && params.noise_sd.is_finite()) {
        return Err(PredictionError::InvalidParams(alloc::format!(
            "noise_sd {}",
            params.noise_sd
        )));
    }
    let world = model.world();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut one = |node: NodeId| -> Result<f64> {
        world.check_node(node).map_err(ModelError::from)?;
        let (m, d) = sim::inferred_message(model, node)?;
        let base = params.w_message * libm::log(world.message(m).prob)
            + params.w_error * error_cost(d, world.epsilon(), world.k_branch());
        let z: f64 = rng.sample(StandardNormal);
        Ok(base + params.noise_sd * z)
    };
    let g = one(gram)?;
    let u = one(ungram)?;
    Ok((g, u))
}

/// Scores a sentence list under `metrics`, failing on the first
/// configuration or scoring error.
pub fn score_all(
    sentences: &[ScoredSentence],
    metric: MetricKind,
    aux: &ScoringAux<'_>,
) -> Result<Vec<f64>> {
    aux.check(&[metric])?;
    sentences
        .iter()
        .map(|s| scoring::score(metric, &s.scores, aux).map_err(Into::into))
        .collect()
}

fn summarize(metric: MetricKind, grammatical: bool, xs: &[f64]) -> ScoreSummary {
    let sd = if xs.len() > 1 {
        libm::sqrt(stats::variance(xs))
    } else {
        0.0
    };
    ScoreSummary {
        metric,
        grammatical,
        n: xs.len(),
        mean: stats::mean(xs),
        sd,
        min: xs.iter().copied().fold(f64::INFINITY, f64::min),
        max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Pools grammatical and ungrammatical sentences and reports ROC/AUC per
/// metric, with grammatical as the positive class.
pub fn pred3_run(
    sentences: &[ScoredSentence],
    grammatical: &[bool],
    metrics: &[MetricKind],
    aux: &ScoringAux<'_>,
) -> Result<PredictionReport> {
    if sentences.len() != grammatical.len() {
        return Err(PredictionError::InvalidParams(alloc::format!(
            "{} sentences but {} grammaticality flags",
            sentences.len(),
            grammatical.len()
        )));
    }
    let n_gram = grammatical.iter().filter(|g| **g).count();
    let n_ungram = grammatical.len() - n_gram;
    if n_gram == 0 || n_ungram == 0 {
        return Err(PredictionError::EmptyClass {
            gram: n_gram,
            ungram: n_ungram,
        });
    }
    aux.check(metrics)?;
    let mut report = PredictionReport::default();
    for &metric in metrics {
        let scores = score_all(sentences, metric, aux)?;
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for (s, &g) in scores.iter().zip(grammatical) {
            if g {
                pos.push(*s);
            } else {
                neg.push(*s);
            }
        }
        let roc = stats::roc_auc(&pos, &neg).map_err(stats_ctx(metric.name()))?;
        report.auc_by_metric.insert(metric, roc.auc);
        report.roc_by_metric.insert(metric, roc);
        report.score_summary.push(summarize(metric, true, &pos));
        report.score_summary.push(summarize(metric, false, &neg));
    }
    Ok(report)
}

/// Fraction of pairs whose grammatical member scores higher; ties count ½.
/// `None` for an empty pair list.
pub fn minpair_accuracy(
    sentences: &[ScoredSentence],
    pairs: &[PairRecord],
    metric: MetricKind,
    aux: &ScoringAux<'_>,
) -> Result<Option<f64>> {
    check_refs(sentences, pairs)?;
    if pairs.is_empty() {
        return Ok(None);
    }
    aux.check(&[metric])?;
    let mut wins = 0.0;
    for p in pairs {
        let g = scoring::score(metric, &sentences[p.gram].scores, aux)?;
        let u = scoring::score(metric, &sentences[p.ungram].scores, aux)?;
        wins += win(g, u);
    }
    Ok(Some(wins / pairs.len() as f64))
}

fn win(g: f64, u: f64) -> f64 {
    if g > u {
        1.0
    } else if g == u {
        0.5
    } else {
        0.0
    }
}

/// Outcome of checking the sign rule
/// ln P(m_g) − ln P(m_u) > ln ε − ln K  ⇔  P(g) > P(u)
/// on (grammatical, ungrammatical) node pairs.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InequalityCheck {
    pub n_pairs: usize,
    /// Fraction of pairs where the predicted sign matches the reference.
    /// `None` when there are no pairs.
    pub agreement: Option<f64>,
    /// Fraction of pairs with P(g) > P(u) under the reference probabilities
    /// (ties ½).
    pub reference_win_rate: Option<f64>,
    /// Fraction of pairs the rule predicts the grammatical string to win.
    pub predicted_win_rate: Option<f64>,
    /// Left-hand side minus right-hand side of the rule, per pair.
    pub margins: Vec<f64>,
    pub agrees: Vec<bool>,
}

impl InequalityCheck {
    /// Agreement restricted to pairs with |margin| > `min_margin`.
    pub fn agreement_beyond(&self, min_margin: f64) -> Option<f64> {
        let kept: Vec<bool> = self
            .margins
            .iter()
            .zip(&self.agrees)
            .filter(|(m, _)| m.abs() > min_margin)
            .map(|(_, a)| *a)
            .collect();
        if kept.is_empty() {
            return None;
        }
        Some(kept.iter().filter(|a| **a).count() as f64 / kept.len() as f64)
    }
}

/// Compares the sign rule against exact probabilities (`use_exact`) or the
/// closed-form approximation. m_u is the most probable message given the
/// ungrammatical string.
pub fn pred3_inequality_check(
    model: &ErrorModel<'_>,
    pairs: &[(NodeId, NodeId)],
    use_exact: bool,
) -> Result<InequalityCheck> {
    let world = model.world();
    let threshold = libm::log(world.epsilon()) - libm::log(world.k_branch() as f64);
    let prob = |node: NodeId| {
        if use_exact {
            model.string_prob(node).prob
        } else {
            crate::model::node_prob_approx(world, node)
        }
    };
    let mut out = InequalityCheck {
        n_pairs: pairs.len(),
        ..Default::default()
    };
    if pairs.is_empty() {
        return Ok(out);
    }
    let (mut agree, mut ref_wins, mut pred_wins) = (0usize, 0.0, 0usize);
    for &(g, u) in pairs {
        world.check_node(g).map_err(ModelError::from)?;
        world.check_node(u).map_err(ModelError::from)?;
        let mg = world
            .message_at(g)
            .ok_or_else(|| PredictionError::InvalidParams(alloc::format!("node {g} is not grammatical")))?;
        let mu = model.posterior_given_error(u)?.argmax();
        let margin = libm::log(world.message(mg).prob) - libm::log(world.message(mu).prob) - threshold;
        let predicted = margin > 0.0;
        let (pg, pu) = (prob(g), prob(u));
        let actual = pg > pu;
        ref_wins += win(pg, pu);
        pred_wins += usize::from(predicted);
        agree += usize::from(predicted == actual);
        out.margins.push(margin);
        out.agrees.push(predicted == actual);
    }
    let n = pairs.len() as f64;
    out.agreement = Some(agree as f64 / n);
    out.reference_win_rate = Some(ref_wins / n);
    out.predicted_win_rate = Some(pred_wins as f64 / n);
    Ok(out)
}

/// Percentile bootstrap over `n` items: `stat` receives resampled indices.
/// Resamples where `stat` is undefined are skipped; `None` if all are.
pub fn bootstrap_ci<F>(
    name: &str,
    n: usize,
    resamples: usize,
    seed: u64,
    level: f64,
    mut stat: F,
) -> Option<BootstrapCi>
where
    F: FnMut(&[usize]) -> Option<f64>,
{
    if n == 0 || resamples == 0 || !(level > 0.0 && level < 1.0) {
        return None;
    }
    let all: Vec<usize> = (0..n).collect();
    let estimate = stat(&all)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = alloc::vec![0usize; n];
    let mut values = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        if let Some(v) = stat(&idx) {
            values.push(v);
        }
    }
    if values.is_empty() {
        return None;
    }
    let alpha = (1.0 - level) / 2.0;
    Some(BootstrapCi {
        statistic: String::from(name),
        estimate,
        lo: stats::quantile(&values, alpha).ok()?,
        hi: stats::quantile(&values, 1.0 - alpha).ok()?,
        resamples: values.len(),
    })
}

/// Bootstrap interval for Pearson r of paired columns.
pub fn bootstrap_r(name: &str, x: &[f64], y: &[f64], resamples: usize, seed: u64) -> Option<BootstrapCi> {
    bootstrap_ci(name, x.len().min(y.len()), resamples, seed, 0.95, |idx| {
        let bx: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let by: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        stats::pearson_r(&bx, &by).ok()
    })
}
