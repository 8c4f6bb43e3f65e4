//! Helpers shared by integration test targets.

use std::collections::HashMap;

use bload::reset_mask::build_masks;
use bload::{Manifest, PackingPlan};

fn frame_value(id: &str, t: usize) -> u64 {
    id.bytes().fold(t as u64 * 31 + 7, |h, b| {
        h.wrapping_mul(131).wrapping_add(b as u64)
    })
}

/// Accumulator over a lone sequence: s_t = s_{t-1} + x_t, s_{-1} = 0.
fn isolated(id: &str, frames: usize) -> Vec<u64> {
    let mut s = 0u64;
    (0..frames)
        .map(|t| {
            s = s.wrapping_add(frame_value(id, t));
            s
        })
        .collect()
}

/// Same accumulator run across whole blocks, resetting where the mask says
/// and skipping padding. Returns each sequence's trajectory.
fn packed(plan: &PackingPlan) -> HashMap<String, Vec<u64>> {
    let mut out: HashMap<String, Vec<u64>> = HashMap::new();
    let mut state = 0u64;
    for block in &plan.blocks {
        let masks = build_masks(block);
        // owner of each frame, read off the entries independently of the masks
        let mut owner = Vec::new();
        for e in block.entries() {
            owner.extend((0..e.length).map(|k| (e.sequence_id.as_str(), e.source_start + k)));
        }
        for (t, &(id, frame)) in owner.iter().enumerate() {
            if !masks.valid[t] {
                continue;
            }
            state = if masks.reset[t] { 0 } else { state };
            state = state.wrapping_add(frame_value(id, frame));
            out.entry(id.to_owned()).or_default().push(state);
        }
    }
    out
}

pub fn carry_matches(manifest: &Manifest, plan: &PackingPlan) -> bool {
    let got = packed(plan);
    manifest
        .records()
        .iter()
        .all(|r| got.get(&r.id) == Some(&isolated(&r.id, r.frames)))
}
