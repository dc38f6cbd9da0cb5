//! Tokens, thread tags and per-thread configuration registers.
//!
//! A "thread" here is always a logical stream of tagged tokens flowing
//! through one dataflow graph, never a host OS thread.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Index of a configuration inside a merged graph's configuration table.
pub type ConfigId = u32;

/// Logical thread identifier carried by every token.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TagId(pub u32);

impl TagId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TagId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tag{}", self.0)
    }
}

impl From<u32> for TagId {
    fn from(v: u32) -> Self {
        TagId(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub payload: Vec<u8>,
    pub tag: TagId,
}

impl Token {
    pub fn new(payload: impl Into<Vec<u8>>, tag: impl Into<TagId>) -> Self {
        Self {
            payload: payload.into(),
            tag: tag.into(),
        }
    }
}

/// Per-tag configuration selection, written like a memory-mapped register.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigRegisterFile {
    regs: BTreeMap<TagId, ConfigId>,
}

impl ConfigRegisterFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write(&mut self, tag: TagId, config: ConfigId) {
        self.regs.insert(tag, config);
    }

    pub fn read(&self, tag: TagId) -> Option<ConfigId> {
        self.regs.get(&tag).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TagId, ConfigId)> + '_ {
        self.regs.iter().map(|(t, c)| (*t, *c))
    }
}

impl FromIterator<(TagId, ConfigId)> for ConfigRegisterFile {
    fn from_iter<I: IntoIterator<Item = (TagId, ConfigId)>>(iter: I) -> Self {
        Self {
            regs: iter.into_iter().collect(),
        }
    }
}
