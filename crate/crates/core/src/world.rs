//! Synthetic languages: message spaces, grammatical realizations and the
//! edit graph that the error model walks.
//!
//! Every world is a fixed-length slot grid. A string picks one option per
//! slot; two strings are adjacent when they differ in exactly one slot. Nodes
//! are addressed by their mixed-radix index with slot 0 most significant, so
//! all strings sharing a prefix occupy a contiguous index range.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Index of a string (node) in a world's slot grid.
pub type NodeId = usize;

/// Index of a message in a world's message list.
pub type MessageId = usize;

const PROB_SUM_TOLERANCE: f64 = 1e-9;
const EPSILON_WARN_ABOVE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("vocabulary needs at least 2 distinct symbols, got {0}")]
    VocabTooSmall(usize),
    #[error("duplicate vocabulary symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("slot {0} needs at least one option")]
    EmptySlot(usize),
    #[error("string must contain at least one token")]
    EmptyString,
    #[error("message probabilities sum to {0}, expected 1 within 1e-9")]
    ProbabilitySum(f64),
    #[error("message `{id}` has invalid probability {prob}")]
    InvalidProbability { id: String, prob: f64 },
    #[error("epsilon must lie in [0, 0.5), got {0}")]
    EpsilonOutOfRange(f64),
    #[error("k_branch must be positive")]
    ZeroBranching,
    #[error("messages `{0}` and `{1}` share a grammatical realization")]
    RealizationNotInjective(String, String),
    #[error("`{0}` is outside the world's string space")]
    UnknownString(String),
    #[error("unknown message `{0}`")]
    UnknownMessage(String),
    #[error("node index {0} is outside the world's string space")]
    UnknownNode(NodeId),
    #[error("world needs at least one message")]
    NoMessages,
    #[error("{requested} messages requested but the slot grid has only {nodes} nodes")]
    TooManyMessages { requested: usize, nodes: usize },
    #[error("invalid random-world configuration: {0}")]
    InvalidConfig(String),
}

/// Ordered list of distinct tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    symbols: Vec<String>,
}

impl Vocab {
    pub fn new(symbols: Vec<String>) -> Result<Self, WorldError> {
        if symbols.len() < 2 {
            return Err(WorldError::VocabTooSmall(symbols.len()));
        }
        let mut sorted: Vec<&String> = symbols.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(WorldError::DuplicateSymbol(w[0].clone()));
        }
        Ok(Self { symbols })
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.symbols.iter().any(|s| s == token)
    }
}

/// A nonempty token sequence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StringForm {
    tokens: Vec<String>,
}

impl StringForm {
    pub fn new(tokens: Vec<String>) -> Result<Self, WorldError> {
        if tokens.is_empty() {
            return Err(WorldError::EmptyString);
        }
        Ok(Self { tokens })
    }

    /// Splits on whitespace.
    pub fn parse(text: &str) -> Result<Self, WorldError> {
        Self::new(text.split_whitespace().map(String::from).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Display for StringForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(t)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub id: String,
    pub prob: f64,
    /// Slot-grid coordinates of the message's grammatical realization.
    pub coords: Vec<i64>,
}

/// Per-slot option lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotGrid {
    slots: Vec<Vec<String>>,
    /// strides[i] = product of the sizes of slots i+1..
    strides: Vec<usize>,
    node_count: usize,
}

impl SlotGrid {
    pub fn new(slots: Vec<Vec<String>>) -> Result<Self, WorldError> {
        if slots.is_empty() {
            return Err(WorldError::EmptyString);
        }
        if let Some(i) = slots.iter().position(|s| s.is_empty()) {
            return Err(WorldError::EmptySlot(i));
        }
        let mut strides = vec![1usize; slots.len()];
        for i in (0..slots.len() - 1).rev() {
            strides[i] = strides[i + 1]
                .checked_mul(slots[i + 1].len())
                .ok_or_else(|| WorldError::InvalidConfig("slot grid too large".into()))?;
        }
        let node_count = strides[0]
            .checked_mul(slots[0].len())
            .ok_or_else(|| WorldError::InvalidConfig("slot grid too large".into()))?;
        // Options must be unique within a slot or strings would be ambiguous.
        for slot in &slots {
            let mut sorted: Vec<&String> = slot.iter().collect();
            sorted.sort();
            if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                return Err(WorldError::DuplicateSymbol(w[0].clone()));
            }
        }
        Ok(Self {
            slots,
            strides,
            node_count,
        })
    }

    pub fn slots(&self) -> &[Vec<String>] {
        &self.slots
    }

    pub fn length(&self) -> usize {
        self.slots.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Number of strings sharing any fixed prefix of `len` tokens.
    pub fn suffix_block(&self, len: usize) -> usize {
        if len == 0 {
            self.node_count
        } else {
            self.strides[len - 1]
        }
    }

    pub fn encode(&self, coords: &[usize]) -> Option<NodeId> {
        if coords.len() != self.slots.len() {
            return None;
        }
        let mut node = 0;
        for (i, &c) in coords.iter().enumerate() {
            if c >= self.slots[i].len() {
                return None;
            }
            node += c * self.strides[i];
        }
        Some(node)
    }

    pub fn decode(&self, node: NodeId) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.slots)
            .map(|(&stride, slot)| (node / stride) % slot.len())
            .collect()
    }

    pub fn lookup(&self, s: &StringForm) -> Option<NodeId> {
        if s.len() != self.slots.len() {
            return None;
        }
        let mut node = 0;
        for (i, tok) in s.tokens().iter().enumerate() {
            let c = self.slots[i].iter().position(|o| o == tok)?;
            node += c * self.strides[i];
        }
        Some(node)
    }

    pub fn string(&self, node: NodeId) -> StringForm {
        let tokens = self
            .decode(node)
            .into_iter()
            .enumerate()
            .map(|(i, c)| self.slots[i][c].clone())
            .collect();
        StringForm { tokens }
    }
}

/// A single substitution: slot `slot` changes from option `from` to `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edit {
    pub slot: usize,
    pub from: usize,
    pub to: usize,
}

/// Undirected substitution graph over a slot grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EditGraph {
    adjacency: Vec<Vec<(NodeId, Edit)>>,
}

impl EditGraph {
    pub fn from_grid(grid: &SlotGrid) -> Self {
        let mut adjacency = Vec::with_capacity(grid.node_count());
        for node in 0..grid.node_count() {
            let coords = grid.decode(node);
            let mut edges = Vec::new();
            for (slot, &c) in coords.iter().enumerate() {
                for to in 0..grid.slots[slot].len() {
                    if to == c {
                        continue;
                    }
                    let nb = node - c * grid.strides[slot] + to * grid.strides[slot];
                    edges.push((nb, Edit { slot, from: c, to }));
                }
            }
            adjacency.push(edges);
        }
        Self { adjacency }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, Edit)] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency[node].len()
    }

    /// Breadth-first shortest-path lengths from `source`; `usize::MAX` marks
    /// unreachable nodes.
    pub fn distances_from(&self, source: NodeId) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.adjacency.len()];
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.adjacency[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn diameter(&self) -> usize {
        (0..self.adjacency.len())
            .map(|s| {
                self.distances_from(s)
                    .into_iter()
                    .filter(|&d| d != usize::MAX)
                    .max()
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }
}

/// How unnormalized message weights are drawn in [`build_random_world`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "law", rename_all = "lowercase"))]
pub enum ProbLaw {
    Uniform,
    /// Weight ∝ rank^-a, ranks ordered by the latent message score.
    Zipf { a: f64 },
    /// Weight = exp(σ·z) for a standard-normal latent score z.
    LogNormal { sigma: f64 },
}

/// Where the latent message score comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum MessageField {
    /// One independent standard-normal draw per message.
    #[default]
    Independent,
    /// Sum of independent per-(slot, option) effects scaled by 1/sqrt(length).
    /// Messages that share slot choices get correlated log-probabilities, so
    /// message similarity carries information about probability.
    SlotFactored,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RandomWorldConfig {
    pub messages: usize,
    pub length: usize,
    pub symbols_per_slot: usize,
    pub law: ProbLaw,
    #[cfg_attr(feature = "serde", serde(default))]
    pub field: MessageField,
    pub epsilon: f64,
    pub k_branch: u32,
    pub seed: u64,
}

/// A synthetic language. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    vocab: Vocab,
    grid: SlotGrid,
    graph: EditGraph,
    messages: Vec<Message>,
    realization: Vec<NodeId>,
    message_at: Vec<Option<MessageId>>,
    epsilon: f64,
    k_branch: u32,
}

impl World {
    /// Validates and assembles a world. Probabilities must sum to 1 within
    /// 1e-9; sums off by more than 1e-12 are renormalized.
    pub fn new(
        grid: SlotGrid,
        mut messages: Vec<Message>,
        realization: Vec<NodeId>,
        epsilon: f64,
        k_branch: u32,
    ) -> Result<Self, WorldError> {
        check_epsilon(epsilon)?;
        if k_branch == 0 {
            return Err(WorldError::ZeroBranching);
        }
        if messages.is_empty() {
            return Err(WorldError::NoMessages);
        }
        if messages.len() != realization.len() {
            return Err(WorldError::InvalidConfig(format!(
                "{} messages but {} realizations",
                messages.len(),
                realization.len()
            )));
        }
        for m in &messages {
            if !(m.prob > 0.0 && m.prob <= 1.0) || !m.prob.is_finite() {
                return Err(WorldError::InvalidProbability {
                    id: m.id.clone(),
                    prob: m.prob,
                });
            }
        }
        let total: f64 = messages.iter().map(|m| m.prob).sum();
        if libm::fabs(total - 1.0) > PROB_SUM_TOLERANCE {
            return Err(WorldError::ProbabilitySum(total));
        }
        if libm::fabs(total - 1.0) > 1e-12 {
            for m in &mut messages {
                m.prob /= total;
            }
        }

        let mut vocab_symbols = Vec::new();
        for slot in grid.slots() {
            for opt in slot {
                if !vocab_symbols.contains(opt) {
                    vocab_symbols.push(opt.clone());
                }
            }
        }
        let vocab = Vocab::new(vocab_symbols)?;

        let mut message_at = vec![None; grid.node_count()];
        for (mid, &node) in realization.iter().enumerate() {
            if node >= grid.node_count() {
                return Err(WorldError::UnknownNode(node));
            }
            if let Some(prev) = message_at[node] {
                let prev: MessageId = prev;
                return Err(WorldError::RealizationNotInjective(
                    messages[prev].id.clone(),
                    messages[mid].id.clone(),
                ));
            }
            message_at[node] = Some(mid);
        }
        {
            let mut ids: Vec<&String> = messages.iter().map(|m| &m.id).collect();
            ids.sort();
            if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
                return Err(WorldError::InvalidConfig(format!(
                    "duplicate message id `{}`",
                    w[0]
                )));
            }
        }
        for (m, &node) in messages.iter_mut().zip(&realization) {
            m.coords = grid.decode(node).into_iter().map(|c| c as i64).collect();
        }

        let graph = EditGraph::from_grid(&grid);
        Ok(Self {
            vocab,
            grid,
            graph,
            messages,
            realization,
            message_at,
            epsilon,
            k_branch,
        })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn grid(&self) -> &SlotGrid {
        &self.grid
    }

    pub fn graph(&self) -> &EditGraph {
        &self.graph
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn message(&self, m: MessageId) -> &Message {
        &self.messages[m]
    }

    pub fn message_count(&self) -> usize {
        self.messages.len()
    }

    pub fn node_count(&self) -> usize {
        self.grid.node_count()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn k_branch(&self) -> u32 {
        self.k_branch
    }

    pub fn realization(&self, m: MessageId) -> NodeId {
        self.realization[m]
    }

    pub fn realizations(&self) -> &[NodeId] {
        &self.realization
    }

    /// The message whose grammatical realization is `node`, if any.
    pub fn message_at(&self, node: NodeId) -> Option<MessageId> {
        self.message_at.get(node).copied().flatten()
    }

    pub fn message_index(&self, id: &str) -> Result<MessageId, WorldError> {
        self.messages
            .iter()
            .position(|m| m.id == id)
            .ok_or_else(|| WorldError::UnknownMessage(id.to_string()))
    }

    pub fn node_of(&self, s: &StringForm) -> Result<NodeId, WorldError> {
        self.grid
            .lookup(s)
            .ok_or_else(|| WorldError::UnknownString(s.to_string()))
    }

    pub fn string_of(&self, node: NodeId) -> StringForm {
        self.grid.string(node)
    }

    pub fn check_node(&self, node: NodeId) -> Result<(), WorldError> {
        if node < self.node_count() {
            Ok(())
        } else {
            Err(WorldError::UnknownNode(node))
        }
    }

    /// A copy with the given message removed and the rest renormalized.
    pub fn without_message(&self, id: &str) -> Result<World, WorldError> {
        let drop = self.message_index(id)?;
        let rest: f64 = self
            .messages
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != drop)
            .map(|(_, m)| m.prob)
            .sum();
        let mut messages = Vec::new();
        let mut realization = Vec::new();
        for (i, m) in self.messages.iter().enumerate() {
            if i == drop {
                continue;
            }
            let mut m = m.clone();
            m.prob /= rest;
            messages.push(m);
            realization.push(self.realization[i]);
        }
        World::new(
            self.grid.clone(),
            messages,
            realization,
            self.epsilon,
            self.k_branch,
        )
    }

    /// Same messages and grid under a different error rate.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<World, WorldError> {
        check_epsilon(epsilon)?;
        let mut w = self.clone();
        w.epsilon = epsilon;
        Ok(w)
    }
}

fn check_epsilon(epsilon: f64) -> Result<(), WorldError> {
    if !(0.0..0.5).contains(&epsilon) {
        return Err(WorldError::EpsilonOutOfRange(epsilon));
    }
    if epsilon > EPSILON_WARN_ABOVE {
        log::warn!("epsilon = {epsilon} is large; error-model approximations degrade above 0.2");
    }
    Ok(())
}

/// The eight-string "{The, A} {moon, moons} {emerge, emerges}" world with
/// three messages realized as "The moon emerges", "A moon emerges" and
/// "The moons emerge".
pub fn build_cube_world(msg_probs: [f64; 3], epsilon: f64, k_branch: u32) -> Result<World, WorldError> {
    let slots = vec![
        vec!["The".to_string(), "A".to_string()],
        vec!["moon".to_string(), "moons".to_string()],
        vec!["emerge".to_string(), "emerges".to_string()],
    ];
    let grid = SlotGrid::new(slots)?;
    let realized = [[0, 0, 1], [1, 0, 1], [0, 1, 0]];
    let mut messages = Vec::new();
    let mut realization = Vec::new();
    for (i, (&p, coords)) in msg_probs.iter().zip(&realized).enumerate() {
        messages.push(Message {
            id: format!("m{}", i + 1),
            prob: p,
            coords: Vec::new(),
        });
        realization.push(grid.encode(coords).expect("cube coordinates are in range"));
    }
    World::new(grid, messages, realization, epsilon, k_branch)
}

/// Token name for option `value` of slot `slot` in generated worlds.
pub fn slot_token(slot: usize, value: usize) -> String {
    format!("w{slot}_{value}")
}

/// Builds a slot-grid world with randomly placed messages. A pure function of
/// `config` (the seed included).
pub fn build_random_world(config: &RandomWorldConfig) -> Result<World, WorldError> {
    if config.length == 0 {
        return Err(WorldError::InvalidConfig("length must be positive".into()));
    }
    if config.symbols_per_slot < 2 {
        return Err(WorldError::InvalidConfig(
            "symbols_per_slot must be at least 2".into(),
        ));
    }
    if config.messages == 0 {
        return Err(WorldError::NoMessages);
    }
    match config.law {
        ProbLaw::Zipf { a } if !(a.is_finite() && a >= 0.0) => {
            return Err(WorldError::InvalidConfig(format!("zipf exponent {a}")));
        }
        ProbLaw::LogNormal { sigma } if !(sigma.is_finite() && sigma >= 0.0) => {
            return Err(WorldError::InvalidConfig(format!("lognormal sigma {sigma}")));
        }
        _ => {}
    }
    check_epsilon(config.epsilon)?;

    let slots: Vec<Vec<String>> = (0..config.length)
        .map(|s| (0..config.symbols_per_slot).map(|v| slot_token(s, v)).collect())
        .collect();
    let grid = SlotGrid::new(slots)?;
    if config.messages > grid.node_count() {
        return Err(WorldError::TooManyMessages {
            requested: config.messages,
            nodes: grid.node_count(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut nodes = index::sample(&mut rng, grid.node_count(), config.messages).into_vec();
    nodes.sort_unstable();

    let latent: Vec<f64> = match config.field {
        MessageField::Independent => (0..nodes.len())
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect(),
        MessageField::SlotFactored => {
            let effects: Vec<Vec<f64>> = (0..config.length)
                .map(|_| {
                    (0..config.symbols_per_slot)
                        .map(|_| rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect();
            let scale = 1.0 / libm::sqrt(config.length as f64);
            nodes
                .iter()
                .map(|&n| {
                    grid.decode(n)
                        .iter()
                        .enumerate()
                        .map(|(s, &c)| effects[s][c])
                        .sum::<f64>()
                        * scale
                })
                .collect()
        }
    };

    let weights: Vec<f64> = match config.law {
        ProbLaw::Uniform => vec![1.0; nodes.len()],
        ProbLaw::LogNormal { sigma } => latent.iter().map(|z| libm::exp(sigma * z)).collect(),
        ProbLaw::Zipf { a } => {
            let mut order: Vec<usize> = (0..nodes.len()).collect();
            order.sort_by(|&i, &j| latent[j].total_cmp(&latent[i]).then(i.cmp(&j)));
            let mut w = vec![0.0; nodes.len()];
            for (rank, &i) in order.iter().enumerate() {
                w[i] = libm::pow((rank + 1) as f64, -a);
            }
            w
        }
    };
    let total: f64 = weights.iter().sum();
    let messages = weights
        .iter()
        .enumerate()
        .map(|(i, w)| Message {
            id: format!("m{}", i + 1),
            prob: w / total,
            coords: Vec::new(),
        })
        .collect();
    World::new(grid, messages, nodes, config.epsilon, config.k_branch)
}

/// Strings one edit away from `s`.
pub fn edit_neighbors(world: &World, s: &StringForm) -> Result<Vec<StringForm>, WorldError> {
    let node = world.node_of(s)?;
    Ok(world
        .graph()
        .neighbors(node)
        .iter()
        .map(|&(nb, _)| world.string_of(nb))
        .collect())
}

/// L1 distance between message coordinates.
pub fn message_similarity(world: &World, m1: MessageId, m2: MessageId) -> Result<f64, WorldError> {
    let n = world.message_count();
    for m in [m1, m2] {
        if m >= n {
            return Err(WorldError::UnknownMessage(format!("#{m}")));
        }
    }
    let a = &world.message(m1).coords;
    let b = &world.message(m2).coords;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).unsigned_abs()).sum::<u64>() as f64)
}
