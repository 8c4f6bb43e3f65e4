//! Batching strategies for variable-length sequences.
//!
//! Every strategy turns a [`Manifest`] into a [`PackingPlan`]: a list of
//! equally sized [`Block`]s. Because all blocks of a plan share one capacity,
//! ranks consuming them in lockstep always run the same number of
//! iterations. The strategies differ in what they give up to get there:
//!
//! * [`pack_naive`] pads every sequence to the longest one.
//! * [`pack_chunks`] cuts sequences into fixed-size chunks and drops the rest.
//! * [`pack_mixed`] trims long sequences and pads short ones to one length.
//! * [`pack_bload`] concatenates whole sequences into blocks of the longest
//!   length, padding only the tail of each block.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::Manifest;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PackingError {
    #[error("manifest is empty")]
    EmptyManifest,
    #[error("capacity must be ≥ 1")]
    ZeroCapacity,
    #[error("sequence {id:?} has {frames} frames, exceeding block capacity {capacity}")]
    SequenceTooLong {
        id: String,
        frames: usize,
        capacity: usize,
    },
    #[error("no packable sequences: every sequence is shorter than {t_block} frames")]
    NoPackableSequences { t_block: usize },
    #[error("plan references unknown sequence {0:?}")]
    DanglingId(String),
    #[error("entry for {id:?} covers frames [{start}, {end}) but the sequence has {frames}")]
    RangeExceedsSource {
        id: String,
        start: usize,
        end: usize,
        frames: usize,
    },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Naive,
    Chunks,
    Mixed,
    Bload,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Naive,
        Strategy::Chunks,
        Strategy::Mixed,
        Strategy::Bload,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Naive => "naive",
            Strategy::Chunks => "chunks",
            Strategy::Mixed => "mixed",
            Strategy::Bload => "bload",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A run of frames from one sequence placed inside a block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockEntry {
    #[serde(rename = "id")]
    pub sequence_id: String,
    /// First frame taken from the source sequence.
    pub source_start: usize,
    pub length: usize,
    /// Position of the entry's first frame within the block.
    pub block_offset: usize,
}

/// Fixed-capacity container: entries laid out back to back from offset 0,
/// followed by `pad_frames` of padding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    entries: Vec<BlockEntry>,
    pad_frames: usize,
    #[serde(skip)]
    capacity: usize,
}

impl Block {
    /// Lays out `(id, source_start, length)` pieces contiguously and pads
    /// the remainder. Callers guarantee the pieces fit.
    fn fill<'a>(
        capacity: usize,
        pieces: impl IntoIterator<Item = (&'a str, usize, usize)>,
    ) -> Self {
        let mut offset = 0;
        let entries: Vec<BlockEntry> = pieces
            .into_iter()
            .map(|(id, source_start, length)| {
                let entry = BlockEntry {
                    sequence_id: id.to_owned(),
                    source_start,
                    length,
                    block_offset: offset,
                };
                offset += length;
                entry
            })
            .collect();
        debug_assert!(!entries.is_empty() && offset <= capacity);
        Self {
            entries,
            pad_frames: capacity - offset,
            capacity,
        }
    }

    /// Builds a block from explicit entries, checking every block invariant.
    pub fn new(
        capacity: usize,
        entries: Vec<BlockEntry>,
        pad_frames: usize,
    ) -> Result<Self, PackingError> {
        let block = Self {
            entries,
            pad_frames,
            capacity,
        };
        block.validate()?;
        Ok(block)
    }

    pub fn entries(&self) -> &[BlockEntry] {
        &self.entries
    }

    pub fn pad_frames(&self) -> usize {
        self.pad_frames
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Real (non-padding) frames in the block.
    pub fn used_frames(&self) -> usize {
        self.capacity - self.pad_frames
    }

    fn validate(&self) -> Result<(), PackingError> {
        let bad = |m: String| Err(PackingError::InvalidPlan(m));
        if self.capacity == 0 {
            return bad("block capacity is 0".into());
        }
        if self.entries.is_empty() {
            return bad("block has no entries".into());
        }
        let mut offset = 0;
        for e in &self.entries {
            if e.length == 0 {
                return bad(format!("entry {:?} has length 0", e.sequence_id));
            }
            if e.block_offset != offset {
                return bad(format!(
                    "entry {:?} at offset {} but expected {offset}",
                    e.sequence_id, e.block_offset
                ));
            }
            offset += e.length;
        }
        if offset + self.pad_frames != self.capacity {
            return bad(format!(
                "entries ({offset}) plus padding ({}) do not fill capacity {}",
                self.pad_frames, self.capacity
            ));
        }
        Ok(())
    }
}

/// Output of a batching strategy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPlan")]
pub struct PackingPlan {
    pub strategy: Strategy,
    pub capacity: usize,
    /// Sampling seed, for strategies that draw randomly.
    pub seed: Option<u64>,
    /// Frame total of the manifest the plan was built from.
    pub input_frames: usize,
    pub blocks: Vec<Block>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    strategy: Strategy,
    capacity: usize,
    seed: Option<u64>,
    input_frames: usize,
    blocks: Vec<Block>,
}

impl TryFrom<RawPlan> for PackingPlan {
    type Error = PackingError;

    fn try_from(raw: RawPlan) -> Result<Self, Self::Error> {
        let mut blocks = raw.blocks;
        for b in &mut blocks {
            b.capacity = raw.capacity;
        }
        let plan = PackingPlan {
            strategy: raw.strategy,
            capacity: raw.capacity,
            seed: raw.seed,
            input_frames: raw.input_frames,
            blocks,
        };
        plan.validate()?;
        Ok(plan)
    }
}

impl PackingPlan {
    pub fn validate(&self) -> Result<(), PackingError> {
        if self.capacity == 0 {
            return Err(PackingError::ZeroCapacity);
        }
        if self.blocks.is_empty() {
            return Err(PackingError::InvalidPlan("plan has no blocks".into()));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.capacity != self.capacity {
                return Err(PackingError::InvalidPlan(format!(
                    "block {i} has capacity {} but plan capacity is {}",
                    b.capacity, self.capacity
                )));
            }
            b.validate()
                .map_err(|e| PackingError::InvalidPlan(format!("block {i}: {e}")))?;
        }
        let placed = self.placed_frames();
        if placed > self.input_frames {
            return Err(PackingError::InvalidPlan(format!(
                "plan places {placed} frames but input has only {}",
                self.input_frames
            )));
        }
        Ok(())
    }

    pub fn placed_frames(&self) -> usize {
        self.blocks.iter().map(Block::used_frames).sum()
    }

    /// Metrics derived from the plan alone, using its recorded input total.
    pub fn metrics(&self) -> PackingMetrics {
        let padding_frames = self.blocks.iter().map(Block::pad_frames).sum();
        let block_count = self.blocks.len();
        let processed_frames = block_count * self.capacity;
        PackingMetrics {
            padding_frames,
            frames_deleted: self.input_frames - self.placed_frames(),
            block_count,
            processed_frames,
            utilization: 1.0 - padding_frames as f64 / processed_frames as f64,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, PackingError> {
        serde_json::from_str(text).map_err(|e| PackingError::InvalidPlan(e.to_string()))
    }
}

/// Padding, deletion and utilization accounting for a plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PackingMetrics {
    pub padding_frames: usize,
    pub frames_deleted: usize,
    pub block_count: usize,
    pub processed_frames: usize,
    /// `1 - padding_frames / processed_frames`.
    pub utilization: f64,
}

fn non_empty(manifest: &Manifest) -> Result<(), PackingError> {
    if manifest.is_empty() {
        Err(PackingError::EmptyManifest)
    } else {
        Ok(())
    }
}

/// One block per sequence, padded to the longest sequence.
pub fn pack_naive(manifest: &Manifest) -> Result<PackingPlan, PackingError> {
    let capacity = manifest.max_len().ok_or(PackingError::EmptyManifest)?;
    let blocks = manifest
        .records()
        .iter()
        .map(|r| Block::fill(capacity, [(r.id.as_str(), 0, r.frames)]))
        .collect();
    Ok(PackingPlan {
        strategy: Strategy::Naive,
        capacity,
        seed: None,
        input_frames: manifest.total_frames(),
        blocks,
    })
}

/// Cuts each sequence into `t_block`-frame chunks in manifest order. The
/// remainder of each sequence, and sequences shorter than `t_block`, are
/// dropped.
pub fn pack_chunks(manifest: &Manifest, t_block: usize) -> Result<PackingPlan, PackingError> {
    if t_block == 0 {
        return Err(PackingError::ZeroCapacity);
    }
    non_empty(manifest)?;
    let blocks: Vec<Block> = manifest
        .records()
        .iter()
        .flat_map(|r| {
            (0..r.frames / t_block)
                .map(move |k| Block::fill(t_block, [(r.id.as_str(), k * t_block, t_block)]))
        })
        .collect();
    if blocks.is_empty() {
        return Err(PackingError::NoPackableSequences { t_block });
    }
    Ok(PackingPlan {
        strategy: Strategy::Chunks,
        capacity: t_block,
        seed: None,
        input_frames: manifest.total_frames(),
        blocks,
    })
}

/// One block of `t_mix` frames per sequence: longer sequences keep their
/// first `t_mix` frames, shorter ones are padded.
pub fn pack_mixed(manifest: &Manifest, t_mix: usize) -> Result<PackingPlan, PackingError> {
    if t_mix == 0 {
        return Err(PackingError::ZeroCapacity);
    }
    non_empty(manifest)?;
    let blocks = manifest
        .records()
        .iter()
        .map(|r| Block::fill(t_mix, [(r.id.as_str(), 0, r.frames.min(t_mix))]))
        .collect();
    Ok(PackingPlan {
        strategy: Strategy::Mixed,
        capacity: t_mix,
        seed: None,
        input_frames: manifest.total_frames(),
        blocks,
    })
}

/// Greedy random block packing.
///
/// Blocks of `t_max` frames are filled by repeatedly drawing, uniformly over
/// all still-unplaced sequences that fit in the remaining space, and
/// appending the draw. When nothing fits the block's tail is padded and the
/// next block opens. Sequences are never split or trimmed.
pub fn pack_bload(
    manifest: &Manifest,
    t_max: usize,
    seed: u64,
) -> Result<PackingPlan, PackingError> {
    if t_max == 0 {
        return Err(PackingError::ZeroCapacity);
    }
    non_empty(manifest)?;
    if let Some(r) = manifest.records().iter().find(|r| r.frames > t_max) {
        return Err(PackingError::SequenceTooLong {
            id: r.id.clone(),
            frames: r.frames,
            capacity: t_max,
        });
    }

    // Unplaced sequences bucketed by length, so the eligible set for a given
    // remaining space is a prefix of the map.
    let records = manifest.records();
    let mut pool: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        pool.entry(r.frames).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = Vec::new();
    let mut unplaced = records.len();

    while unplaced > 0 {
        let mut remaining = t_max;
        let mut members = Vec::new();
        loop {
            let eligible: usize = pool.range(..=remaining).map(|(_, v)| v.len()).sum();
            if eligible == 0 {
                break;
            }
            let mut pick = rng.random_range(0..eligible);
            let (len, slot) = pool
                .range(..=remaining)
                .find_map(|(&len, v)| {
                    if pick < v.len() {
                        Some((len, pick))
                    } else {
                        pick -= v.len();
                        None
                    }
                })
                .expect("pick lies within the eligible count");
            let bucket = pool.get_mut(&len).expect("bucket exists");
            let idx = bucket.swap_remove(slot);
            if bucket.is_empty() {
                pool.remove(&len);
            }
            members.push(idx);
            remaining -= len;
            unplaced -= 1;
        }
        blocks.push(Block::fill(
            t_max,
            members
                .iter()
                .map(|&i| (records[i].id.as_str(), 0, records[i].frames)),
        ));
    }

    Ok(PackingPlan {
        strategy: Strategy::Bload,
        capacity: t_max,
        seed: Some(seed),
        input_frames: manifest.total_frames(),
        blocks,
    })
}

/// Checks the plan against the manifest it claims to cover and computes
/// its metrics.
pub fn compute_metrics(
    plan: &PackingPlan,
    manifest: &Manifest,
) -> Result<PackingMetrics, PackingError> {
    plan.validate()?;
    let frames: HashMap<&str, usize> = manifest
        .records()
        .iter()
        .map(|r| (r.id.as_str(), r.frames))
        .collect();
    for entry in plan.blocks.iter().flat_map(Block::entries) {
        let &len = frames
            .get(entry.sequence_id.as_str())
            .ok_or_else(|| PackingError::DanglingId(entry.sequence_id.clone()))?;
        let end = entry.source_start + entry.length;
        if end > len {
            return Err(PackingError::RangeExceedsSource {
                id: entry.sequence_id.clone(),
                start: entry.source_start,
                end,
                frames: len,
            });
        }
    }
    let total = manifest.total_frames();
    let placed = plan.placed_frames();
    if placed > total {
        return Err(PackingError::InvalidPlan(format!(
            "plan places {placed} frames but the manifest has {total}"
        )));
    }
    Ok(PackingMetrics {
        frames_deleted: total - placed,
        ..plan.metrics()
    })
}

/// Offset within a block where a sequence starts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartIndex {
    pub offset: usize,
    pub id: String,
}

/// Per block, the start offset of every sequence placed in it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StartIndexTable {
    pub blocks: Vec<Vec<StartIndex>>,
}

pub fn start_index_table(plan: &PackingPlan) -> StartIndexTable {
    StartIndexTable {
        blocks: plan
            .blocks
            .iter()
            .map(|b| {
                assert!(!b.entries().is_empty(), "blocks always hold an entry");
                b.entries()
                    .iter()
                    .map(|e| StartIndex {
                        offset: e.block_offset,
                        id: e.sequence_id.clone(),
                    })
                    .collect()
            })
            .collect(),
    }
}
