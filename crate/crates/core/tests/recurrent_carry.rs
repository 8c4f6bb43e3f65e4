//! Recurrent state driven by the block masks never leaks between sequences.

use bload::reset_mask::build_masks;
use bload::{pack_bload, start_index_table, Manifest};
use proptest::prelude::*;

mod common;
use common::carry_matches;

#[test]
fn mask_counts_match_block() {
    let m = Manifest::from_lengths(&[3, 1, 4, 1, 5, 9, 2, 6]).unwrap();
    let plan = pack_bload(&m, 9, 2).unwrap();
    let table = start_index_table(&plan);
    for (block, starts) in plan.blocks.iter().zip(&table.blocks) {
        let masks = build_masks(block);
        assert_eq!(
            masks.reset.iter().filter(|&&r| r).count(),
            block.entries().len()
        );
        assert_eq!(
            masks.valid.iter().filter(|&&v| v).count(),
            block.capacity() - block.pad_frames()
        );
        let offsets: Vec<usize> = (0..block.capacity()).filter(|&t| masks.reset[t]).collect();
        assert_eq!(offsets, starts.iter().map(|s| s.offset).collect::<Vec<_>>());
        assert!(masks.reset.iter().zip(&masks.valid).all(|(&r, &v)| !r || v));
    }
}

proptest! {
    #[test]
    fn carry_never_leaks(lengths in proptest::collection::vec(1usize..25, 1..50), seed in any::<u64>()) {
        let m = Manifest::from_lengths(&lengths).unwrap();
        let t_max = *lengths.iter().max().unwrap();
        let plan = pack_bload(&m, t_max, seed).unwrap();
        prop_assert!(carry_matches(&m, &plan));
    }
}
