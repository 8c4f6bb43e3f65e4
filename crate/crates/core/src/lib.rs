//! Batching of variable-length sequences for synchronous data-parallel
//! training.
//!
//! Sequences (videos, utterances, documents) are described only by their
//! length in a [`manifest::Manifest`]. The [`packing`] strategies turn a
//! manifest into equally sized blocks, [`ddp_sim`] replays those blocks
//! through a lockstep all-reduce to expose deadlocks and estimate epoch time,
//! and [`reset_mask`] yields the per-frame masks a recurrent model needs to
//! keep state from leaking between sequences sharing a block.

pub mod cli;
pub mod ddp_sim;
pub mod manifest;
pub mod oracle;
pub mod packing;
pub mod report;
pub mod reset_mask;

pub use manifest::{generate_synthetic, parse_manifest, summarize, Manifest, SequenceRecord};
pub use packing::{
    compute_metrics, pack_bload, pack_chunks, pack_mixed, pack_naive, start_index_table, Block,
    BlockEntry, PackingMetrics, PackingPlan, Strategy,
};
