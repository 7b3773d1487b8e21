//! String probabilities under the message × grammaticality × error model.
//!
//! P(s) = Σ_m P(m) [ (1-ε)·1{s = g(m)} + ε·P(s | m, G=0) ], where the
//! errorful realization walks d ≥ 1 uniform edit steps from g(m) with
//! P(d | G=0) = (1-ε)·ε^(d-1). Walks may revisit or end on grammatical strings;
//! only the zero-step walk is excluded. All paths reaching a string are summed.

use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::world::{message_similarity, MessageId, NodeId, StringForm, World, WorldError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("max_depth must be at least 1")]
    ZeroDepth,
    #[error("no message can generate this string under the error model")]
    ZeroEvidence,
    #[error("delta must lie strictly between 0 and 1, got {0}")]
    InvalidDelta(f64),
}

/// A truncated exact probability and the bound on the mass the truncation
/// omitted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StringProb {
    pub prob: f64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationOutcome {
    pub message: MessageId,
    /// `true` when the message was realized without error (G = 1).
    pub grammatical: bool,
    pub string: NodeId,
    pub n_errors: usize,
}

/// P(m | s), indexed by message.
#[derive(Debug, Clone, PartialEq)]
pub struct MessagePosterior {
    probs: Vec<f64>,
}

impl MessagePosterior {
    fn from_weights(weights: Vec<f64>) -> Result<Self, ModelError> {
        let z: f64 = weights.iter().sum();
        if !(z > 0.0) {
            return Err(ModelError::ZeroEvidence);
        }
        Ok(Self {
            probs: weights.into_iter().map(|w| w / z).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, m: MessageId) -> f64 {
        self.probs[m]
    }

    /// Most probable message; the lowest index wins ties.
    pub fn argmax(&self) -> MessageId {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Definition of a meaning-matched pair (`delta`) and, optionally, the
/// maximum error distance (1 for minimal pairs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCriteria {
    pub delta: f64,
    pub max_errors: Option<usize>,
}

impl PairCriteria {
    /// Default δ for the cube world, where every grammatical/ungrammatical
    /// combination counts as meaning-matched.
    pub const CUBE_DELTA: f64 = 0.999;

    pub fn meaning_matched(delta: f64) -> Self {
        Self {
            delta,
            max_errors: None,
        }
    }

    pub fn minimal(delta: f64) -> Self {
        Self {
            delta,
            max_errors: Some(1),
        }
    }
}

/// A grammatical/ungrammatical string pair found in a simulated world.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimPair {
    pub gram: NodeId,
    pub ungram: NodeId,
    /// Message realized by `gram`.
    pub gram_message: MessageId,
    /// argmax_m P(m | ungram, G=0).
    pub ungram_message: MessageId,
    /// P(gram_message | ungram, G=0).
    pub match_posterior: f64,
    pub error_dist: usize,
    /// L1 distance between the coordinates of `gram_message` and `ungram_message`.
    pub msg_similarity: f64,
}

/// Truncation depth used when none is given: four times the graph diameter.
pub fn default_depth(world: &World) -> usize {
    (4 * world.graph().diameter()).max(1)
}

/// Weight of a d-step walk given G = 0.
fn depth_weight(epsilon: f64, d: usize) -> f64 {
    (1.0 - epsilon) * libm::pow(epsilon, (d - 1) as f64)
}

/// P(· | walk starts at `source`, G = 0), truncated at `max_depth` steps.
pub fn error_walk(world: &World, source: NodeId, max_depth: usize) -> Vec<f64> {
    let graph = world.graph();
    let n = graph.node_count();
    let eps = world.epsilon();
    let mut frontier = vec![0.0; n];
    frontier[source] = 1.0;
    let mut next = vec![0.0; n];
    let mut acc = vec![0.0; n];
    for d in 1..=max_depth {
        let w = depth_weight(eps, d);
        if w == 0.0 {
            break;
        }
        next.iter_mut().for_each(|x| *x = 0.0);
        for u in 0..n {
            let mass = frontier[u];
            if mass == 0.0 {
                continue;
            }
            let nbs = graph.neighbors(u);
            let share = mass / nbs.len() as f64;
            for &(v, _) in nbs {
                next[v] += share;
            }
        }
        core::mem::swap(&mut frontier, &mut next);
        for (a, f) in acc.iter_mut().zip(&frontier) {
            *a += w * f;
        }
    }
    acc
}

/// Exact (truncated) error model for one world, caching every message's
/// error-walk distribution.
#[derive(Debug, Clone)]
pub struct ErrorModel<'w> {
    world: &'w World,
    max_depth: usize,
    /// walks[m][s] = P(s | m, G=0)
    walks: Vec<Vec<f64>>,
}

impl<'w> ErrorModel<'w> {
    pub fn new(world: &'w World, max_depth: usize) -> Result<Self, ModelError> {
        if max_depth == 0 {
            return Err(ModelError::ZeroDepth);
        }
        let walks = world
            .realizations()
            .iter()
            .map(|&g| error_walk(world, g, max_depth))
            .collect();
        Ok(Self {
            world,
            max_depth,
            walks,
        })
    }

    pub fn with_default_depth(world: &'w World) -> Self {
        Self::new(world, default_depth(world)).expect("default depth is positive")
    }

    pub fn world(&self) -> &'w World {
        self.world
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Upper bound on the probability mass dropped by truncation.
    pub fn tail_bound(&self) -> f64 {
        libm::pow(self.world.epsilon(), self.max_depth as f64)
    }

    /// P(s | m, G = 0).
    pub fn likelihood_given_error(&self, m: MessageId, node: NodeId) -> f64 {
        self.walks[m][node]
    }

    /// P(s | m) = (1-ε)·1{s = g(m)} + ε·P(s | m, G=0).
    pub fn likelihood(&self, m: MessageId, node: NodeId) -> f64 {
        let eps = self.world.epsilon();
        let gram = if self.world.realization(m) == node {
            1.0 - eps
        } else {
            0.0
        };
        gram + eps * self.walks[m][node]
    }

    pub fn string_prob(&self, node: NodeId) -> StringProb {
        let prob = (0..self.world.message_count())
            .map(|m| self.world.message(m).prob * self.likelihood(m, node))
            .sum();
        StringProb {
            prob,
            tail_bound: self.tail_bound(),
        }
    }

    /// P(s) for every node, in node order.
    pub fn distribution(&self) -> Vec<f64> {
        (0..self.world.node_count())
            .map(|n| self.string_prob(n).prob)
            .collect()
    }

    pub fn posterior(&self, node: NodeId) -> Result<MessagePosterior, ModelError> {
        MessagePosterior::from_weights(
            (0..self.world.message_count())
                .map(|m| self.world.message(m).prob * self.likelihood(m, node))
                .collect(),
        )
    }

    /// P(m | s, G = 0); ε cancels since it does not depend on m.
    pub fn posterior_given_error(&self, node: NodeId) -> Result<MessagePosterior, ModelError> {
        MessagePosterior::from_weights(
            (0..self.world.message_count())
                .map(|m| self.world.message(m).prob * self.walks[m][node])
                .collect(),
        )
    }
}

/// Shortest edit path length between two strings.
pub fn error_distance(world: &World, s1: &StringForm, s2: &StringForm) -> Result<usize, ModelError> {
    let a = world.node_of(s1)?;
    let b = world.node_of(s2)?;
    Ok(node_distance(world, a, b))
}

pub(crate) fn node_distance(world: &World, a: NodeId, b: NodeId) -> usize {
    world.graph().distances_from(a)[b]
}

pub fn string_prob_exact(world: &World, s: &StringForm, max_depth: usize) -> Result<StringProb, ModelError> {
    let node = world.node_of(s)?;
    Ok(ErrorModel::new(world, max_depth)?.string_prob(node))
}

/// Closed-form approximation: (1-ε)·P(m_s) for grammatical strings and
/// (ε/K)·Σ_{m ∈ M¹(s)} P(m) for ungrammatical ones.
pub fn string_prob_approx(world: &World, s: &StringForm) -> Result<f64, ModelError> {
    let node = world.node_of(s)?;
    Ok(node_prob_approx(world, node))
}

pub(crate) fn node_prob_approx(world: &World, node: NodeId) -> f64 {
    let eps = world.epsilon();
    match world.message_at(node) {
        Some(m) => (1.0 - eps) * world.message(m).prob,
        None => {
            let near: f64 = world
                .graph()
                .neighbors(node)
                .iter()
                .filter_map(|&(nb, _)| world.message_at(nb))
                .map(|m| world.message(m).prob)
                .sum();
            eps / world.k_branch() as f64 * near
        }
    }
}

/// Draws one (message, G, string) triple.
pub fn sample_generation<R: Rng + ?Sized>(world: &World, sampler: &MessageSampler, rng: &mut R) -> GenerationOutcome {
    let message = sampler.index.sample(rng);
    let start = world.realization(message);
    let eps = world.epsilon();
    if !rng.random_bool(eps) {
        return GenerationOutcome {
            message,
            grammatical: true,
            string: start,
            n_errors: 0,
        };
    }
    let mut depth = 1;
    while rng.random_bool(eps) {
        depth += 1;
    }
    let graph = world.graph();
    let mut node = start;
    for _ in 0..depth {
        let nbs = graph.neighbors(node);
        node = nbs[rng.random_range(0..nbs.len())].0;
    }
    GenerationOutcome {
        message,
        grammatical: false,
        string: node,
        n_errors: depth,
    }
}

/// Precomputed categorical distribution over a world's messages.
#[derive(Debug, Clone)]
pub struct MessageSampler {
    index: WeightedIndex<f64>,
}

impl MessageSampler {
    pub fn new(world: &World) -> Self {
        let index = WeightedIndex::new(world.messages().iter().map(|m| m.prob))
            .expect("world probabilities are positive and finite");
        Self { index }
    }
}

/// `n` samples from a ChaCha8 stream seeded with `seed`.
pub fn sample_many(world: &World, n: usize, seed: u64) -> Vec<GenerationOutcome> {
    let sampler = MessageSampler::new(world);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_generation(world, &sampler, &mut rng)).collect()
}

pub fn message_posterior(world: &World, s: &StringForm, max_depth: usize) -> Result<MessagePosterior, ModelError> {
    let node = world.node_of(s)?;
    ErrorModel::new(world, max_depth)?.posterior(node)
}

/// True iff `s` is the grammatical realization of some message.
pub fn classify_grammatical(world: &World, s: &StringForm) -> Result<bool, ModelError> {
    Ok(world.message_at(world.node_of(s)?).is_some())
}

/// Meaning-matched (and, with `max_errors`, distance-limited) pairs in node
/// order of the grammatical then the ungrammatical member.
pub fn enumerate_pairs(model: &ErrorModel<'_>, criteria: PairCriteria) -> Result<Vec<SimPair>, ModelError> {
    if !(criteria.delta > 0.0 && criteria.delta < 1.0) {
        return Err(ModelError::InvalidDelta(criteria.delta));
    }
    let world = model.world();
    let n = world.node_count();
    let ungram: Vec<NodeId> = (0..n).filter(|&s| world.message_at(s).is_none()).collect();
    let posts: Vec<Option<MessagePosterior>> = ungram
        .iter()
        .map(|&u| model.posterior_given_error(u).ok())
        .collect();
    let mut pairs = Vec::new();
    for m in 0..world.message_count() {
        let g = world.realization(m);
        let dist = world.graph().distances_from(g);
        for (&u, post) in ungram.iter().zip(&posts) {
            let Some(post) = post else { continue };
            let p = post.prob(m);
            if p <= 1.0 - criteria.delta {
                continue;
            }
            if criteria.max_errors.is_some_and(|k| dist[u] > k) {
                continue;
            }
            let mu = post.argmax();
            pairs.push(SimPair {
                gram: g,
                ungram: u,
                gram_message: m,
                ungram_message: mu,
                match_posterior: p,
                error_dist: dist[u],
                msg_similarity: message_similarity(world, m, mu)?,
            });
        }
    }
    pairs.sort_by_key(|p| (p.gram, p.ungram));
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::build_cube_world;

    fn s(text: &str) -> StringForm {
        StringForm::parse(text).unwrap()
    }

    #[test]
    fn distances_on_cube() {
        let w = build_cube_world([0.6, 0.3, 0.1], 0.01, 3).unwrap();
        assert_eq!(error_distance(&w, &s("The moon emerges"), &s("The moon emerge")).unwrap(), 1);
        assert_eq!(error_distance(&w, &s("The moon emerges"), &s("A moons emerge")).unwrap(), 3);
        assert_eq!(error_distance(&w, &s("A moons emerge"), &s("A moons emerge")).unwrap(), 0);
        assert!(error_distance(&w, &s("The moon"), &s("A moons emerge")).is_err());
    }

    #[test]
    fn zero_epsilon_limit() {
        let w = build_cube_world([0.6, 0.3, 0.1], 0.0, 3).unwrap();
        let model = ErrorModel::new(&w, 12).unwrap();
        for n in 0..w.node_count() {
            let p = model.string_prob(n).prob;
            match w.message_at(n) {
                Some(m) => assert_eq!(p, w.message(m).prob),
                None => assert_eq!(p, 0.0),
            }
        }
        let out = sample_many(&w, 1000, 3);
        assert!(out.iter().all(|o| o.grammatical && o.string == w.realization(o.message)));
    }

    #[test]
    fn approx_examples() {
        let w = build_cube_world([0.6, 0.3, 0.1], 0.01, 3).unwrap();
        let g = string_prob_approx(&w, &s("The moon emerges")).unwrap();
        assert!((g - 0.594).abs() < 1e-15);
        let u = string_prob_approx(&w, &s("The moon emerge")).unwrap();
        assert!((u - 0.01 / 3.0 * 0.7).abs() < 1e-15);
    }

    #[test]
    fn zero_depth_rejected() {
        let w = build_cube_world([0.6, 0.3, 0.1], 0.01, 3).unwrap();
        assert_eq!(ErrorModel::new(&w, 0).unwrap_err(), ModelError::ZeroDepth);
    }

    #[test]
    fn posterior_argmax_a_moon_emerge() {
        let w = build_cube_world([0.6, 0.3, 0.1], 0.1, 3).unwrap();
        let post = message_posterior(&w, &s("A moon emerge"), 20).unwrap();
        assert_eq!(post.argmax(), 1);
        let total: f64 = post.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grammatical_posterior_concentrates() {
        let w = build_cube_world([0.6, 0.3, 0.1], 0.01, 3).unwrap();
        for m in 0..3 {
            let post = message_posterior(&w, &w.string_of(w.realization(m)), 12).unwrap();
            assert_eq!(post.argmax(), m);
            assert!(post.prob(m) > 1.0 - 10.0 * 0.01);
        }
    }

    #[test]
    fn uniform_symmetric_posterior_ties() {
        // "The moon emerge" sits one edit from both s1 and s3, and the cube is
        // symmetric under swapping them, so equal priors give equal posteriors.
        let w = build_cube_world([1.0 / 3.0; 3], 0.05, 3).unwrap();
        let model = ErrorModel::new(&w, 12).unwrap();
        let u = w.node_of(&s("The moon emerge")).unwrap();
        let post = model.posterior_given_error(u).unwrap();
        assert!((post.prob(0) - post.prob(2)).abs() < 1e-15);
    }

    #[test]
    fn classify_cube() {
        let w = build_cube_world([0.6, 0.3, 0.1], 0.01, 3).unwrap();
        let grammatical = (0..8)
            .filter(|&n| classify_grammatical(&w, &w.string_of(n)).unwrap())
            .count();
        assert_eq!(grammatical, 3);
        let w2 = w.without_message("m2").unwrap();
        assert!(!classify_grammatical(&w2, &s("A moon emerges")).unwrap());
    }

    #[test]
    fn cube_pair_counts() {
        let w = build_cube_world([0.6, 0.3, 0.1], 0.1, 3).unwrap();
        let model = ErrorModel::new(&w, default_depth(&w)).unwrap();
        let mm = enumerate_pairs(&model, PairCriteria::meaning_matched(PairCriteria::CUBE_DELTA)).unwrap();
        assert_eq!(mm.len(), 15);
        let minimal = enumerate_pairs(&model, PairCriteria::minimal(PairCriteria::CUBE_DELTA)).unwrap();
        assert_eq!(minimal.len(), 7);
        let g = w.node_of(&s("The moon emerges")).unwrap();
        let u = w.node_of(&s("A moons emerge")).unwrap();
        assert!(mm.iter().any(|p| p.gram == g && p.ungram == u));
        assert!(!minimal.iter().any(|p| p.gram == g && p.ungram == u));
    }

    #[test]
    fn invalid_delta() {
        let w = build_cube_world([0.6, 0.3, 0.1], 0.1, 3).unwrap();
        let model = ErrorModel::new(&w, 4).unwrap();
        assert!(enumerate_pairs(&model, PairCriteria::minimal(1.0)).is_err());
        assert!(enumerate_pairs(&model, PairCriteria::minimal(0.0)).is_err());
    }

    #[test]
    fn error_rate_of_sampler() {
        let w = build_cube_world([0.6, 0.3, 0.1], 0.05, 3).unwrap();
        let out = sample_many(&w, 100_000, 11);
        let errs = out.iter().filter(|o| !o.grammatical).count() as f64 / 1e5;
        assert!((errs - 0.05).abs() < 0.003, "{errs}");
        assert!(out.iter().all(|o| o.grammatical == (o.n_errors == 0)));
    }
}
