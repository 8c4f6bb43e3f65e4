//! Exact minimum-block packing for small instances.
//!
//! Ground truth for the greedy packer: a dynamic program over all subsets of
//! the manifest finds the fewest blocks any unsplit packing can use.

use serde::Serialize;
use thiserror::Error;

use crate::manifest::Manifest;
use crate::packing::{Block, BlockEntry};

/// Largest manifest the exhaustive search accepts.
pub const MAX_ORACLE_SEQUENCES: usize = 12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance has {0} sequences; exhaustive search is limited to {MAX_ORACLE_SEQUENCES}")]
    TooLarge(usize),
    #[error("sequence {id:?} has {frames} frames, exceeding capacity {capacity}")]
    LengthExceedsCapacity {
        id: String,
        frames: usize,
        capacity: usize,
    },
    #[error("capacity must be ≥ 1")]
    ZeroCapacity,
    #[error("manifest is empty")]
    EmptyManifest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OptimalResult {
    pub capacity: usize,
    pub min_blocks: usize,
    pub min_padding: usize,
    /// One optimal packing. Each block lists its sequences in manifest
    /// order; blocks are ordered by their first sequence.
    pub witness: Vec<Block>,
}

/// Minimum number of blocks of `capacity` frames needed to hold every
/// sequence unsplit.
///
/// Among optimal packings the witness is the lexicographically least one,
/// comparing blocks as ascending lists of manifest positions.
pub fn optimal_packing(manifest: &Manifest, capacity: usize) -> Result<OptimalResult, OracleError> {
    let n = manifest.len();
    if n > MAX_ORACLE_SEQUENCES {
        return Err(OracleError::TooLarge(n));
    }
    if n == 0 {
        return Err(OracleError::EmptyManifest);
    }
    if capacity == 0 {
        return Err(OracleError::ZeroCapacity);
    }
    let records = manifest.records();
    if let Some(r) = records.iter().find(|r| r.frames > capacity) {
        return Err(OracleError::LengthExceedsCapacity {
            id: r.id.clone(),
            frames: r.frames,
            capacity,
        });
    }

    let full = (1usize << n) - 1;
    let mut load = vec![0usize; full + 1];
    for mask in 1..=full {
        let low = mask.trailing_zeros() as usize;
        load[mask] = load[mask & (mask - 1)] + records[low].frames;
    }

    // best[mask]: fewest blocks covering exactly `mask`. Each split fixes the
    // block holding the lowest member of `mask`, so partitions are counted once.
    let mut best = vec![usize::MAX; full + 1];
    best[0] = 0;
    for mask in 1..=full {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let mut sub = rest;
        loop {
            let block = sub | low;
            if load[block] <= capacity {
                let prev = best[mask ^ block];
                if prev != usize::MAX && prev + 1 < best[mask] {
                    best[mask] = prev + 1;
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }

    let mut witness = Vec::with_capacity(best[full]);
    let mut mask = full;
    while mask != 0 {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let target = best[mask] - 1;
        let mut chosen: Option<usize> = None;
        let mut sub = rest;
        loop {
            let block = sub | low;
            if load[block] <= capacity
                && best[mask ^ block] == target
                && chosen.is_none_or(|c| lex_less(block, c))
            {
                chosen = Some(block);
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
        let block = chosen.expect("an optimal split exists");
        let mut offset = 0;
        let entries = (0..n)
            .filter(|i| block >> i & 1 == 1)
            .map(|i| {
                let entry = BlockEntry {
                    sequence_id: records[i].id.clone(),
                    source_start: 0,
                    length: records[i].frames,
                    block_offset: offset,
                };
                offset += records[i].frames;
                entry
            })
            .collect();
        witness.push(
            Block::new(capacity, entries, capacity - load[block]).expect("witness block is valid"),
        );
        mask ^= block;
    }

    let min_blocks = best[full];
    Ok(OptimalResult {
        capacity,
        min_blocks,
        min_padding: min_blocks * capacity - manifest.total_frames(),
        witness,
    })
}

/// Lexicographic order on subsets viewed as ascending index lists.
fn lex_less(a: usize, b: usize) -> bool {
    let diff = a ^ b;
    if diff == 0 {
        return false;
    }
    let first = diff.trailing_zeros();
    let a_has = a >> first & 1 == 1;
    // The list holding the first differing index is smaller, unless the other
    // list ended before it (a proper prefix).
    let above = !((1usize << first) - 1) & !(1usize << first);
    if a_has {
        (b & above) != 0
    } else {
        (a & above) == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(lengths: &[usize]) -> Manifest {
        Manifest::from_lengths(lengths).unwrap()
    }

    fn ids(block: &Block) -> Vec<&str> {
        block
            .entries()
            .iter()
            .map(|e| e.sequence_id.as_str())
            .collect()
    }

    fn as_list(mask: usize) -> Vec<usize> {
        (0..usize::BITS as usize)
            .filter(|i| mask >> i & 1 == 1)
            .collect()
    }

    #[test]
    fn lex_order_matches_list_comparison() {
        for a in 1usize..64 {
            for b in 1usize..64 {
                assert_eq!(lex_less(a, b), as_list(a) < as_list(b), "{a:b} vs {b:b}");
            }
        }
    }

    #[test]
    fn examples() {
        let r = optimal_packing(&m(&[2, 2, 6, 6]), 6).unwrap();
        assert_eq!((r.min_blocks, r.min_padding), (3, 2));
        let w: Vec<_> = r.witness.iter().map(ids).collect();
        assert_eq!(w, vec![vec!["V1", "V2"], vec!["V3"], vec!["V4"]]);

        let r = optimal_packing(&m(&[3, 3]), 6).unwrap();
        assert_eq!((r.min_blocks, r.min_padding), (1, 0));

        let r = optimal_packing(&m(&[4, 4, 4]), 6).unwrap();
        assert_eq!((r.min_blocks, r.min_padding), (3, 6));
    }

    #[test]
    fn witness_is_lexicographically_least() {
        // V1 pairs with either V2 or V3; [V1, V2] sorts first.
        let r = optimal_packing(&m(&[2, 3, 3]), 5).unwrap();
        let w: Vec<_> = r.witness.iter().map(ids).collect();
        assert_eq!(w, vec![vec!["V1", "V2"], vec!["V3"]]);
    }

    #[test]
    fn errors() {
        assert_eq!(
            optimal_packing(&m(&[1; 13]), 10),
            Err(OracleError::TooLarge(13))
        );
        assert!(matches!(
            optimal_packing(&m(&[3, 7]), 6),
            Err(OracleError::LengthExceedsCapacity { frames: 7, .. })
        ));
        assert_eq!(
            optimal_packing(&Manifest::default(), 6),
            Err(OracleError::EmptyManifest)
        );
    }
}
