//! Per-thread input streams.
//!
//! Text form, one section per tag:
//!
//! ```text
//! # two threads
//! [tag 0]
//! config = aes128
//! key = 000102030405060708090a0b0c0d0e0f
//! 00112233445566778899aabbccddeeff
//!
//! [tag 1]
//! start = 16
//! config = 1
//! key = 000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f
//! 00112233445566778899aabbccddeeff
//! ```
//!
//! Block lines are 32 lowercase or uppercase hex digits. `key` and `config`
//! apply to every following block of the section and may change between
//! blocks; `start` delays the section's first injection until that cycle.
//! Configurations are given by id or by name.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::token::{ConfigId, TagId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("workload line {line}: {message}")]
pub struct WorkloadError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigRef {
    Id(ConfigId),
    Name(String),
}

impl fmt::Display for ConfigRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigRef::Id(i) => write!(f, "{i}"),
            ConfigRef::Name(n) => f.write_str(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkItem {
    pub data: Vec<u8>,
    pub key: Option<Vec<u8>>,
    pub config: Option<ConfigRef>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ThreadWorkload {
    /// First cycle at which this thread may inject.
    pub start_cycle: u64,
    pub items: Vec<WorkItem>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Workload {
    pub threads: BTreeMap<TagId, ThreadWorkload>,
}

impl Workload {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `blocks` to `tag`, all under the same key and configuration.
    pub fn add_blocks(
        &mut self,
        tag: TagId,
        config: Option<ConfigId>,
        key: &[u8],
        blocks: impl IntoIterator<Item = Vec<u8>>,
    ) -> &mut Self {
        let t = self.threads.entry(tag).or_default();
        t.items.extend(blocks.into_iter().map(|data| WorkItem {
            data,
            key: Some(key.to_vec()),
            config: config.map(ConfigRef::Id),
        }));
        self
    }

    pub fn total_items(&self) -> usize {
        self.threads.values().map(|t| t.items.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_items() == 0
    }
}

fn err(line: usize, message: impl Into<String>) -> WorkloadError {
    WorkloadError {
        line,
        message: message.into(),
    }
}

fn parse_hex(line: usize, s: &str) -> Result<Vec<u8>, WorkloadError> {
    hex::decode(s).map_err(|e| err(line, format!("bad hex {s:?}: {e}")))
}

pub fn parse_workload(text: &str) -> Result<Workload, WorkloadError> {
    let mut w = Workload::new();
    let mut current: Option<TagId> = None;
    let mut key: Option<Vec<u8>> = None;
    let mut config: Option<ConfigRef> = None;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, "unterminated section header"))?;
            let n = inner
                .trim()
                .strip_prefix("tag")
                .ok_or_else(|| err(line_no, "section header must be [tag N]"))?
                .trim();
            let tag: u32 = n
                .parse()
                .map_err(|_| err(line_no, format!("bad tag number {n:?}")))?;
            if w.threads.contains_key(&TagId(tag)) {
                return Err(err(line_no, format!("tag {tag} declared twice")));
            }
            w.threads.insert(TagId(tag), ThreadWorkload::default());
            current = Some(TagId(tag));
            key = None;
            config = None;
            continue;
        }
        let tag =
            current.ok_or_else(|| err(line_no, "content before the first [tag N] section"))?;
        if let Some((name, value)) = line.split_once('=') {
            let value = value.trim();
            match name.trim() {
                "key" => key = Some(parse_hex(line_no, value)?),
                "config" => {
                    config = Some(match value.parse::<ConfigId>() {
                        Ok(id) => ConfigRef::Id(id),
                        Err(_) if !value.is_empty() => ConfigRef::Name(value.to_string()),
                        Err(_) => return Err(err(line_no, "empty config value")),
                    })
                }
                "start" => {
                    let t = w.threads.get_mut(&tag).expect("section exists");
                    if !t.items.is_empty() {
                        return Err(err(line_no, "start must precede the section's blocks"));
                    }
                    t.start_cycle = value
                        .parse()
                        .map_err(|_| err(line_no, format!("bad start cycle {value:?}")))?;
                }
                other => return Err(err(line_no, format!("unknown directive {other:?}"))),
            }
            continue;
        }
        if line.len() != 32 {
            return Err(err(
                line_no,
                format!("block must be 32 hex digits, got {} characters", line.len()),
            ));
        }
        let data = parse_hex(line_no, line)?;
        w.threads
            .get_mut(&tag)
            .expect("section exists")
            .items
            .push(WorkItem {
                data,
                key: key.clone(),
                config: config.clone(),
            });
    }
    Ok(w)
}

/// Renders `w` in the text form accepted by [`parse_workload`].
pub fn format_workload(w: &Workload) -> String {
    let mut out = String::new();
    for (tag, t) in &w.threads {
        out.push_str(&format!("[tag {}]\n", tag.0));
        if t.start_cycle != 0 {
            out.push_str(&format!("start = {}\n", t.start_cycle));
        }
        let mut key: Option<&Vec<u8>> = None;
        let mut config: Option<&ConfigRef> = None;
        for item in &t.items {
            if item.config.as_ref() != config {
                if let Some(c) = &item.config {
                    out.push_str(&format!("config = {c}\n"));
                }
                config = item.config.as_ref();
            }
            if item.key.as_ref() != key {
                if let Some(k) = &item.key {
                    out.push_str(&format!("key = {}\n", hex::encode(k)));
                }
                key = item.key.as_ref();
            }
            out.push_str(&hex::encode(&item.data));
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
