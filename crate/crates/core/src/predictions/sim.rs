//! Simulated corpora: exact per-token scores from a world's string
//! distribution, pair sampling, and the end-to-end simulation run.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    bootstrap_r, delta_columns, logprob_columns, minpair_accuracy, pred1_run, pred2_run, pred3_inequality_check,
    pred3_run, synth_acceptability, AcceptabilityParams, AnalyticCheck, BinBy, InequalityCheck, PairRecord,
    PredictionError, PredictionReport, ScoredSentence,
};
use crate::model::{enumerate_pairs, ErrorModel, ModelError, PairCriteria};
use crate::scoring::{MetricKind, ScoringAux, TokenScores, UnigramTable};
use crate::stats;
use crate::world::{
    build_random_world, message_similarity, MessageField, MessageId, NodeId, ProbLaw, RandomWorldConfig, World,
};

type Result<T> = core::result::Result<T, PredictionError>;

/// Most probable message given a string, and the error distance from its
/// grammatical realization.
pub fn inferred_message(model: &ErrorModel<'_>, node: NodeId) -> Result<(MessageId, usize)> {
    let world = model.world();
    let m = model.posterior(node)?.argmax();
    let d = world.graph().distances_from(world.realization(m))[node];
    Ok((m, d))
}

/// Where simulated sentence log-probabilities come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum LogProbSource {
    /// Chain-rule conditionals of the exact string distribution.
    Exact,
    /// ln P(m*) + d·ln(ε/K), spread evenly over tokens.
    Approx,
}

/// A world viewed as a language model: exact string probabilities and the
/// token-level conditionals they induce.
#[derive(Debug, Clone)]
pub struct SimulatedLanguage<'w> {
    model: ErrorModel<'w>,
    probs: Vec<f64>,
    /// levels[t][b]: probability of the b-th length-t prefix.
    levels: Vec<Vec<f64>>,
    inferred: Vec<(MessageId, usize)>,
}

impl<'w> SimulatedLanguage<'w> {
    /// Needs ε > 0 so that every string has positive probability.
    pub fn new(world: &'w World) -> Result<Self> {
        if !(world.epsilon() > 0.0) {
            return Err(PredictionError::InvalidParams(String::from(
                "simulated scores need epsilon > 0",
            )));
        }
        let model = ErrorModel::with_default_depth(world);
        let probs = model.distribution();
        let grid = world.grid();
        let mut levels = vec![probs.clone()];
        for t in (0..grid.length()).rev() {
            let width = grid.slots()[t].len();
            let below = levels.last().expect("nonempty");
            let up: Vec<f64> = below.chunks(width).map(|c| c.iter().sum()).collect();
            levels.push(up);
        }
        levels.reverse();

        let dists: Vec<Vec<usize>> = world
            .realizations()
            .iter()
            .map(|&g| world.graph().distances_from(g))
            .collect();
        let mut inferred = Vec::with_capacity(world.node_count());
        for node in 0..world.node_count() {
            let m = model.posterior(node)?.argmax();
            inferred.push((m, dists[m][node]));
        }
        Ok(Self {
            model,
            probs,
            levels,
            inferred,
        })
    }

    pub fn world(&self) -> &'w World {
        self.model.world()
    }

    pub fn model(&self) -> &ErrorModel<'w> {
        &self.model
    }

    /// Exact P(s) per node.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn inferred(&self, node: NodeId) -> (MessageId, usize) {
        self.inferred[node]
    }

    /// ln P(w_t | w_<t) for each position, normalized over the truncated
    /// distribution.
    pub fn token_logprobs(&self, node: NodeId) -> Vec<f64> {
        let grid = self.world().grid();
        (1..=grid.length())
            .map(|t| {
                let child = self.levels[t][node / grid.suffix_block(t)];
                let parent = self.levels[t - 1][node / grid.suffix_block(t - 1)];
                libm::log(child / parent).min(0.0)
            })
            .collect()
    }

    /// ln P(m*) + d·ln(ε/K) for the inferred message m* of `node`.
    pub fn approx_logprob(&self, node: NodeId) -> f64 {
        let world = self.world();
        let (m, d) = self.inferred[node];
        libm::log(world.message(m).prob) + super::error_cost(d, world.epsilon(), world.k_branch())
    }

    pub fn sentence(&self, node: NodeId, source: LogProbSource) -> Result<ScoredSentence> {
        let form = self.world().string_of(node);
        let tokens = form.tokens().to_vec();
        let logprobs = match source {
            LogProbSource::Exact => self.token_logprobs(node),
            LogProbSource::Approx => {
                let each = self.approx_logprob(node) / tokens.len() as f64;
                vec![each.min(0.0); tokens.len()]
            }
        };
        Ok(ScoredSentence {
            id: format!("n{node}"),
            text: format!("{form}"),
            scores: TokenScores::new(tokens, logprobs)?,
            embedding: None,
        })
    }

    /// Unigram table from the expected token frequencies under P(s).
    pub fn unigram_table(&self) -> Result<UnigramTable> {
        let world = self.world();
        let grid = world.grid();
        let len = grid.length() as f64;
        let mut freq: BTreeMap<String, f64> = BTreeMap::new();
        for (node, p) in self.probs.iter().enumerate() {
            for (slot, c) in grid.decode(node).into_iter().enumerate() {
                *freq.entry(grid.slots()[slot][c].clone()).or_default() += p / len;
            }
        }
        let total: f64 = freq.values().sum();
        let log_freqs = freq
            .into_iter()
            .map(|(t, f)| (t, libm::log(f / total)))
            .collect();
        Ok(UnigramTable::from_log_freqs(
            log_freqs,
            None,
            world.vocab().size() as u64,
        )?)
    }
}

/// Sentences and pair annotations drawn from one simulated language.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimCorpus {
    pub sentences: Vec<ScoredSentence>,
    /// World node of each sentence.
    pub nodes: Vec<NodeId>,
    pub grammatical: Vec<bool>,
    pub pairs: Vec<PairRecord>,
}

impl SimCorpus {
    /// Builds sentences (deduplicated by node, first-seen order) and pair
    /// records for (grammatical, ungrammatical) node pairs.
    pub fn from_pairs(
        lang: &SimulatedLanguage<'_>,
        node_pairs: &[(NodeId, NodeId)],
        source: LogProbSource,
        dataset: &str,
    ) -> Result<Self> {
        let world = lang.world();
        let mut corpus = SimCorpus::default();
        let mut index: BTreeMap<NodeId, usize> = BTreeMap::new();
        let mut intern = |corpus: &mut SimCorpus, node: NodeId| -> Result<usize> {
            if let Some(&i) = index.get(&node) {
                return Ok(i);
            }
            let i = corpus.sentences.len();
            corpus.sentences.push(lang.sentence(node, source)?);
            corpus.nodes.push(node);
            corpus.grammatical.push(world.message_at(node).is_some());
            index.insert(node, i);
            Ok(i)
        };
        for (k, &(g, u)) in node_pairs.iter().enumerate() {
            let mg = world.message_at(g).ok_or_else(|| {
                PredictionError::InvalidParams(format!("node {g} is not grammatical"))
            })?;
            let gi = intern(&mut corpus, g)?;
            let ui = intern(&mut corpus, u)?;
            let mu = lang.model().posterior_given_error(u)?.argmax();
            let error_dist = world.graph().distances_from(g)[u];
            let lev = stats::levenshtein(
                corpus.sentences[gi].scores.tokens(),
                corpus.sentences[ui].scores.tokens(),
            );
            corpus.pairs.push(PairRecord {
                pair_id: format!("{dataset}-{k}"),
                dataset: String::from(dataset),
                gram: gi,
                ungram: ui,
                error_dist: Some(error_dist),
                cosine_dist: None,
                lev_dist: Some(lev),
                msg_similarity: Some(message_similarity(world, mg, mu).map_err(ModelError::from)?),
                acc_gram: None,
                acc_ungram: None,
            });
        }
        Ok(corpus)
    }

    /// Fills acceptability ratings; each pair gets its own seed drawn from a
    /// stream seeded with `seed`.
    pub fn attach_acceptability(
        &mut self,
        lang: &SimulatedLanguage<'_>,
        params: &AcceptabilityParams,
        seed: u64,
    ) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut self.pairs {
            let pair_seed: u64 = rng.random();
            let (g, u) = synth_acceptability(lang.model(), self.nodes[p.gram], self.nodes[p.ungram], params, pair_seed)?;
            p.acc_gram = Some(g);
            p.acc_ungram = Some(u);
        }
        Ok(())
    }

    /// Distinct grammatical and ungrammatical sentences appearing in pairs.
    pub fn pool(&self) -> (Vec<ScoredSentence>, Vec<bool>, Vec<NodeId>) {
        let mut seen = vec![false; self.sentences.len()];
        for p in &self.pairs {
            seen[p.gram] = true;
            seen[p.ungram] = true;
        }
        let mut sentences = Vec::new();
        let mut flags = Vec::new();
        let mut nodes = Vec::new();
        for (i, used) in seen.into_iter().enumerate() {
            if used {
                sentences.push(self.sentences[i].clone());
                flags.push(self.grammatical[i]);
                nodes.push(self.nodes[i]);
            }
        }
        (sentences, flags, nodes)
    }

    pub fn node_pairs(&self) -> Vec<(NodeId, NodeId)> {
        self.pairs
            .iter()
            .map(|p| (self.nodes[p.gram], self.nodes[p.ungram]))
            .collect()
    }
}

/// Keeps at most `cap` items, chosen uniformly with `seed`, in original order.
pub fn subsample<T: Clone>(items: &[T], cap: usize, seed: u64) -> Vec<T> {
    if items.len() <= cap {
        return items.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = index::sample(&mut rng, items.len(), cap).into_vec();
    keep.sort_unstable();
    keep.into_iter().map(|i| items[i].clone()).collect()
}

/// Minimal pairs at posterior threshold `delta`, at most `cap` of them.
pub fn minimal_pairs(lang: &SimulatedLanguage<'_>, delta: f64, cap: usize, seed: u64) -> Result<Vec<(NodeId, NodeId)>> {
    let all: Vec<(NodeId, NodeId)> = enumerate_pairs(lang.model(), PairCriteria::minimal(delta))?
        .into_iter()
        .map(|p| (p.gram, p.ungram))
        .collect();
    Ok(subsample(&all, cap, seed))
}

fn ungram_within(world: &World, g: NodeId, max_d: usize) -> Vec<(NodeId, usize)> {
    world
        .graph()
        .distances_from(g)
        .into_iter()
        .enumerate()
        .filter(|&(u, d)| d >= 1 && d <= max_d && world.message_at(u).is_none())
        .collect()
}

/// Pairs within `max_d` edits whose ungrammatical member is inferred to
/// express the grammatical member's message (`matched`) or some other one.
pub fn message_pairs(
    lang: &SimulatedLanguage<'_>,
    max_d: usize,
    matched: bool,
    cap: usize,
    seed: u64,
) -> Vec<(NodeId, NodeId)> {
    let world = lang.world();
    let mut all = Vec::new();
    for m in 0..world.message_count() {
        let g = world.realization(m);
        for (u, _) in ungram_within(world, g, max_d) {
            if (lang.inferred(u).0 == m) == matched {
                all.push((g, u));
            }
        }
    }
    subsample(&all, cap, seed)
}

/// `n` pairs with a uniformly chosen message, a uniform error distance up to
/// the diameter, and a uniform ungrammatical string at that distance.
/// Kept in sampling order.
pub fn graded_pairs(world: &World, n: usize, seed: u64) -> Vec<(NodeId, NodeId)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diameter = world.graph().diameter();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n && attempts < 100 * n.max(1) {
        attempts += 1;
        let g = world.realization(rng.random_range(0..world.message_count()));
        let d = rng.random_range(1..=diameter.max(1));
        let at: Vec<NodeId> = ungram_within(world, g, d)
            .into_iter()
            .filter(|&(_, dd)| dd == d)
            .map(|(u, _)| u)
            .collect();
        if at.is_empty() {
            continue;
        }
        out.push((g, at[rng.random_range(0..at.len())]));
    }
    out
}

/// Cross product of a pool's grammatical and ungrammatical nodes.
pub fn cross_pairs(nodes: &[NodeId], grammatical: &[bool]) -> Vec<(NodeId, NodeId)> {
    let grams: Vec<NodeId> = nodes.iter().zip(grammatical).filter(|(_, g)| **g).map(|(n, _)| *n).collect();
    let ungrams: Vec<NodeId> = nodes.iter().zip(grammatical).filter(|(_, g)| !**g).map(|(n, _)| *n).collect();
    grams
        .iter()
        .flat_map(|&g| ungrams.iter().map(move |&u| (g, u)))
        .collect()
}

/// The world used to calibrate the minimal-pair correlation thresholds.
pub fn calibration_world_config() -> RandomWorldConfig {
    RandomWorldConfig {
        messages: 64,
        length: 9,
        symbols_per_slot: 2,
        law: ProbLaw::Zipf { a: 1.3 },
        field: MessageField::SlotFactored,
        epsilon: 0.02,
        k_branch: 4,
        seed: 20240611,
    }
}

/// Parameters of an end-to-end simulation run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimulationConfig {
    pub world: RandomWorldConfig,
    /// Posterior threshold for minimal pairs.
    pub delta: f64,
    pub max_pairs: usize,
    pub graded_pairs: usize,
    /// Largest error distance for the acceptability pair sets.
    pub max_error_dist: usize,
    pub k_bins: usize,
    pub acceptability: AcceptabilityParams,
    /// Noise levels for synthetic acceptability, ascending.
    pub noise_levels: Vec<f64>,
    pub metrics: Vec<MetricKind>,
    pub bootstrap_resamples: usize,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            world: calibration_world_config(),
            delta: 0.5,
            max_pairs: 500,
            graded_pairs: 2000,
            max_error_dist: 3,
            k_bins: 10,
            acceptability: AcceptabilityParams::default(),
            noise_levels: vec![0.0, 0.5, 1.0, 2.0],
            metrics: MetricKind::ALL.to_vec(),
            bootstrap_resamples: 1000,
            seed: 20240611,
        }
    }
}

/// Acceptability results at one noise level.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Pred2Level {
    pub noise_sd: f64,
    pub matched: PredictionReport,
    pub unmatched: PredictionReport,
}

/// Everything a simulation run produces.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimulationOutput {
    pub config: SimulationConfig,
    pub n_nodes: usize,
    pub tail_bound: f64,
    /// Minimal pairs, exact scores.
    pub pred1: PredictionReport,
    /// Pairs at all error distances, binned by message similarity.
    pub pred1_graded: PredictionReport,
    pub pred2: Vec<Pred2Level>,
    /// Pooled minimal-pair members.
    pub pred3: PredictionReport,
    /// Sign rule on pooled cross pairs, exact reference.
    pub inequality: InequalityCheck,
    /// Sign rule on the minimal pairs themselves, exact reference.
    pub inequality_within: InequalityCheck,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub corpora: SimCorpora,
}

/// The corpora behind a [`SimulationOutput`], for table and plot emission.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimCorpora {
    pub minimal: SimCorpus,
    pub graded: SimCorpus,
    /// One matched and one unmatched corpus per noise level.
    pub acceptability: Vec<(SimCorpus, SimCorpus)>,
}

/// Builds the world and runs all three prediction harnesses on it.
pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationOutput> {
    let world = build_random_world(&config.world).map_err(ModelError::from)?;
    let lang = SimulatedLanguage::new(&world)?;
    let seed = config.seed;

    let minimal = SimCorpus::from_pairs(
        &lang,
        &minimal_pairs(&lang, config.delta, config.max_pairs, seed)?,
        LogProbSource::Exact,
        "minimal",
    )?;
    let mut pred1 = pred1_run(&minimal.sentences, &minimal.pairs, config.k_bins, BinBy::MsgSimilarity)?;
    let (lg, lu) = logprob_columns(&minimal.sentences, &minimal.pairs);
    let x: Vec<f64> = minimal
        .pairs
        .iter()
        .map(|p| libm::log(world.message(world.message_at(minimal.nodes[p.gram]).expect("gram")).prob))
        .collect();
    let y: Vec<f64> = lu.iter().zip(&x).map(|(u, x)| u - x).collect();
    let rho = stats::rho_analytic(stats::variance(&x), stats::variance(&y), stats::covariance(&x, &y))
        .map_err(|source| PredictionError::Stats {
            context: String::from("analytic correlation"),
            source,
        })?;
    pred1.analytic.push(AnalyticCheck {
        name: String::from("rho_analytic"),
        predicted: rho,
        empirical: pred1.overall_r.unwrap_or(f64::NAN),
    });
    pred1
        .bootstrap
        .extend(bootstrap_r("overall_r", &lg, &lu, config.bootstrap_resamples, seed));

    let graded = SimCorpus::from_pairs(
        &lang,
        &graded_pairs(&world, config.graded_pairs, seed.wrapping_add(1)),
        LogProbSource::Exact,
        "graded",
    )?;
    let mut pred1_graded = pred1_run(&graded.sentences, &graded.pairs, config.k_bins, BinBy::MsgSimilarity)?;
    let bins: Vec<f64> = pred1_graded.per_bin.iter().map(|b| b.bin as f64).collect();
    let rs: Vec<f64> = pred1_graded.per_bin.iter().map(|b| b.r).collect();
    if let Ok(trend) = stats::spearman_rho(&bins, &rs) {
        pred1_graded.analytic.push(AnalyticCheck {
            name: String::from("bin_trend_spearman"),
            predicted: -1.0,
            empirical: trend,
        });
    }

    let matched_nodes = message_pairs(&lang, config.max_error_dist, true, config.max_pairs, seed.wrapping_add(2));
    let unmatched_nodes = message_pairs(&lang, config.max_error_dist, false, config.max_pairs, seed.wrapping_add(3));
    let mut pred2 = Vec::new();
    let mut acc_corpora = Vec::new();
    for (level, &noise_sd) in config.noise_levels.iter().enumerate() {
        let params = AcceptabilityParams {
            noise_sd,
            ..config.acceptability
        };
        let acc_seed = seed.wrapping_add(100 + level as u64);
        let mut matched = SimCorpus::from_pairs(&lang, &matched_nodes, LogProbSource::Approx, "matched")?;
        matched.attach_acceptability(&lang, &params, acc_seed)?;
        let mut unmatched = SimCorpus::from_pairs(&lang, &unmatched_nodes, LogProbSource::Approx, "unmatched")?;
        unmatched.attach_acceptability(&lang, &params, acc_seed)?;
        // Within an error-distance stratum both deltas are constant up to
        // noise, so the matched set is reported as a single bin.
        let mut m_rep = pred2_run(&matched.sentences, &matched.pairs, 1, BinBy::ErrorDist)?;
        let u_rep = pred2_run(&unmatched.sentences, &unmatched.pairs, config.k_bins, BinBy::MsgSimilarity)
            .or_else(|_| pred2_run(&unmatched.sentences, &unmatched.pairs, 1, BinBy::MsgSimilarity))?;
        let (acc, lp) = delta_columns(&matched.sentences, &matched.pairs)?;
        m_rep
            .bootstrap
            .extend(bootstrap_r("overall_r", &acc, &lp, config.bootstrap_resamples, acc_seed));
        pred2.push(Pred2Level {
            noise_sd,
            matched: m_rep,
            unmatched: u_rep,
        });
        acc_corpora.push((matched, unmatched));
    }

    let uni = lang.unigram_table()?;
    let aux = ScoringAux {
        unigram: Some(&uni),
        vocab_size: Some(world.vocab().size() as u64),
    };
    let (pool, flags, pool_nodes) = minimal.pool();
    let mut pred3 = pred3_run(&pool, &flags, &config.metrics, &aux)?;
    for &metric in &config.metrics {
        if let Some(acc) = minpair_accuracy(&minimal.sentences, &minimal.pairs, metric, &aux)? {
            pred3.accuracy_by_metric.insert(metric, acc);
        }
    }
    let inequality = pred3_inequality_check(lang.model(), &cross_pairs(&pool_nodes, &flags), true)?;
    let inequality_within = pred3_inequality_check(lang.model(), &minimal.node_pairs(), true)?;
    if let (Some(pred), Some(&auc)) = (
        inequality.predicted_win_rate,
        pred3.auc_by_metric.get(&MetricKind::LogProb),
    ) {
        pred3.analytic.push(AnalyticCheck {
            name: String::from("sign_rule_win_rate"),
            predicted: pred,
            empirical: auc,
        });
    }

    Ok(SimulationOutput {
        config: config.clone(),
        n_nodes: world.node_count(),
        tail_bound: lang.model().tail_bound(),
        pred1,
        pred1_graded,
        pred2,
        pred3,
        inequality,
        inequality_within,
        corpora: SimCorpora {
            minimal,
            graded,
            acceptability: acc_corpora,
        },
    })
}

/// One cell of the separability grid: pooled minimal-pair members from
/// `replicates` independently drawn worlds.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeparabilityCell {
    pub epsilon: f64,
    pub k_branch: u32,
    pub law: ProbLaw,
    pub n_gram: usize,
    pub n_ungram: usize,
    /// AUC of raw log-probability.
    pub auc: f64,
    /// Mean over replicates of the sample variance of ln P(m).
    pub log_msg_var: f64,
    /// Sign-rule agreement on within-world cross pairs, pooled over replicates.
    pub agreement: Option<f64>,
    /// Sign-rule agreement restricted to pairs with |margin| > 2.
    pub agreement_far: Option<f64>,
}

/// Grid world of uniform degree `length·(symbols − 1)`, used as K.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparabilitySpec {
    pub length: usize,
    pub symbols_per_slot: usize,
    pub messages: usize,
    pub replicates: usize,
    pub delta: f64,
}

impl SeparabilitySpec {
    pub fn degree(&self) -> u32 {
        (self.length * (self.symbols_per_slot - 1)) as u32
    }
}

pub fn separability_cell(spec: &SeparabilitySpec, epsilon: f64, law: ProbLaw, seed: u64) -> Result<SeparabilityCell> {
    let mut scores_g = Vec::new();
    let mut scores_u = Vec::new();
    let mut var_sum = 0.0;
    let mut agree = (0usize, 0usize);
    let mut far = (0usize, 0usize);
    for r in 0..spec.replicates {
        let cfg = RandomWorldConfig {
            messages: spec.messages,
            length: spec.length,
            symbols_per_slot: spec.symbols_per_slot,
            law,
            field: MessageField::Independent,
            epsilon,
            k_branch: spec.degree(),
            seed: seed.wrapping_add(r as u64),
        };
        let world = build_random_world(&cfg).map_err(ModelError::from)?;
        let lang = SimulatedLanguage::new(&world)?;
        let pairs = minimal_pairs(&lang, spec.delta, usize::MAX, seed)?;
        let corpus = SimCorpus::from_pairs(&lang, &pairs, LogProbSource::Exact, "pool")?;
        let (pool, flags, nodes) = corpus.pool();
        for (s, g) in pool.iter().zip(&flags) {
            if *g {
                scores_g.push(s.logprob());
            } else {
                scores_u.push(s.logprob());
            }
        }
        let logs: Vec<f64> = world.messages().iter().map(|m| libm::log(m.prob)).collect();
        var_sum += if logs.len() > 1 { stats::variance(&logs) } else { 0.0 };
        let check = pred3_inequality_check(lang.model(), &cross_pairs(&nodes, &flags), true)?;
        for (m, a) in check.margins.iter().zip(&check.agrees) {
            agree.0 += usize::from(*a);
            agree.1 += 1;
            if m.abs() > 2.0 {
                far.0 += usize::from(*a);
                far.1 += 1;
            }
        }
    }
    let roc = stats::roc_auc(&scores_g, &scores_u).map_err(|source| PredictionError::Stats {
        context: format!("separability cell eps={epsilon}"),
        source,
    })?;
    let frac = |(a, n): (usize, usize)| (n > 0).then(|| a as f64 / n as f64);
    Ok(SeparabilityCell {
        epsilon,
        k_branch: spec.degree(),
        law,
        n_gram: scores_g.len(),
        n_ungram: scores_u.len(),
        auc: roc.auc,
        log_msg_var: var_sum / spec.replicates.max(1) as f64,
        agreement: frac(agree),
        agreement_far: frac(far),
    })
}

/// Error rates swept by the separability grid.
pub const GRID_EPSILONS: [f64; 3] = [1e-3, 1e-2, 1e-1];

/// Grid worlds with K = 4 and K = 8. The K = 4 world has only 16 strings, so
/// it is replicated more.
pub fn grid_specs() -> [SeparabilitySpec; 2] {
    [
        SeparabilitySpec {
            length: 4,
            symbols_per_slot: 2,
            messages: 6,
            replicates: 200,
            delta: 0.5,
        },
        SeparabilitySpec {
            length: 8,
            symbols_per_slot: 2,
            messages: 64,
            replicates: 8,
            delta: 0.5,
        },
    ]
}

/// Every (spec, ε, law) cell, in that nesting order.
pub fn separability_grid(laws: &[ProbLaw], seed: u64) -> Result<Vec<SeparabilityCell>> {
    let mut cells = Vec::new();
    for spec in &grid_specs() {
        for &eps in &GRID_EPSILONS {
            for &law in laws {
                cells.push(separability_cell(spec, eps, law, seed)?);
            }
        }
    }
    Ok(cells)
}
