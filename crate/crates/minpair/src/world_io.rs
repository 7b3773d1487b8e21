//! JSON (de)serialization of worlds.
//!
//! The file carries the slot structure alongside the vocabulary; the edit
//! graph is rebuilt from the slots on load.

use std::collections::BTreeMap;

use minpair_core::world::{Message, SlotGrid, StringForm, World, WorldError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageEntry {
    pub id: String,
    pub prob: f64,
    pub coords: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldFile {
    pub vocab: Vec<String>,
    /// Options per slot position.
    pub slots: Vec<Vec<String>>,
    pub messages: Vec<MessageEntry>,
    /// Message id → grammatical realization.
    pub realizations: BTreeMap<String, Vec<String>>,
    pub epsilon: f64,
    pub k_branch: u32,
}

impl WorldFile {
    pub fn from_world(world: &World) -> Self {
        Self {
            vocab: world.vocab().symbols().to_vec(),
            slots: world.grid().slots().to_vec(),
            messages: world
                .messages()
                .iter()
                .map(|m| MessageEntry {
                    id: m.id.clone(),
                    prob: m.prob,
                    coords: m.coords.clone(),
                })
                .collect(),
            realizations: world
                .messages()
                .iter()
                .zip(world.realizations())
                .map(|(m, &n)| (m.id.clone(), world.string_of(n).tokens().to_vec()))
                .collect(),
            epsilon: world.epsilon(),
            k_branch: world.k_branch(),
        }
    }

    /// Rebuilds the world; coordinates are recomputed from the realizations.
    pub fn into_world(self) -> Result<World, WorldError> {
        let grid = SlotGrid::new(self.slots)?;
        let mut messages = Vec::with_capacity(self.messages.len());
        let mut realization = Vec::with_capacity(self.messages.len());
        for m in self.messages {
            let tokens = self
                .realizations
                .get(&m.id)
                .ok_or_else(|| WorldError::UnknownMessage(m.id.clone()))?;
            let s = StringForm::new(tokens.clone())?;
            let node = grid
                .lookup(&s)
                .ok_or_else(|| WorldError::UnknownString(s.to_string()))?;
            realization.push(node);
            messages.push(Message {
                id: m.id,
                prob: m.prob,
                coords: Vec::new(),
            });
        }
        World::new(grid, messages, realization, self.epsilon, self.k_branch)
    }
}
