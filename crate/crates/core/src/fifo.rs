//! Bounded FIFO with per-tag order and semi-out-of-order reads.
//!
//! Storage is split in two memories: a slot array holding the tokens and an
//! order list recording which slot arrived when. A reader may take the
//! oldest token of any tag; tokens of one tag always leave in the order
//! they arrived. Capacity is shared by all tags.

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::token::{TagId, Token};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FifoError {
    #[error("no token tagged {0} is present")]
    EmptyForTag(TagId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FifoStatus {
    /// Tags that currently have a token available to read.
    pub head_available: BTreeMap<TagId, bool>,
    pub counts: BTreeMap<TagId, usize>,
    pub free_slots: usize,
}

#[derive(Debug, Clone)]
pub struct TaggedFifo {
    slots: Vec<Option<Token>>,
    order: VecDeque<usize>,
}

impl TaggedFifo {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "fifo capacity must be at least 1");
        Self {
            slots: vec![None; capacity],
            order: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn free_slots(&self) -> usize {
        self.capacity() - self.len()
    }

    /// Stores `tok` if there is room. A full fifo is left untouched.
    pub fn push(&mut self, tok: Token) -> bool {
        let Some(slot) = self.slots.iter().position(Option::is_none) else {
            return false;
        };
        self.slots[slot] = Some(tok);
        self.order.push_back(slot);
        true
    }

    fn position_of(&self, tag: TagId) -> Option<usize> {
        self.order
            .iter()
            .position(|&s| self.slots[s].as_ref().map(|t| t.tag) == Some(tag))
    }

    /// Oldest token tagged `tag`, if any.
    pub fn peek(&self, tag: TagId) -> Option<&Token> {
        self.position_of(tag)
            .and_then(|i| self.slots[self.order[i]].as_ref())
    }

    pub fn has_head(&self, tag: TagId) -> bool {
        self.position_of(tag).is_some()
    }

    /// The globally oldest token, regardless of tag.
    pub fn front(&self) -> Option<&Token> {
        self.order.front().and_then(|&s| self.slots[s].as_ref())
    }

    /// Removes and returns the oldest token tagged `tag`; every other token
    /// keeps its relative position.
    pub fn pop(&mut self, tag: TagId) -> Result<Token, FifoError> {
        let i = self.position_of(tag).ok_or(FifoError::EmptyForTag(tag))?;
        let slot = self.order.remove(i).expect("index from position_of");
        Ok(self.slots[slot].take().expect("ordered slot is occupied"))
    }

    pub fn count(&self, tag: TagId) -> usize {
        self.tokens().filter(|t| t.tag == tag).count()
    }

    /// Tokens in arrival order.
    pub fn tokens(&self) -> impl Iterator<Item = &Token> + '_ {
        self.order.iter().filter_map(|&s| self.slots[s].as_ref())
    }

    pub fn status(&self) -> FifoStatus {
        let mut counts = BTreeMap::new();
        for t in self.tokens() {
            *counts.entry(t.tag).or_insert(0) += 1;
        }
        FifoStatus {
            head_available: counts.keys().map(|t| (*t, true)).collect(),
            counts,
            free_slots: self.free_slots(),
        }
    }
}
