//! Per-frame control masks for recurrent training over packed blocks.

use serde::Serialize;

use crate::packing::Block;

/// `reset[t]` marks frames where a new sequence starts and carried state must
/// be cleared. `valid[t]` is false on tail padding, which consumers skip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrameMasks {
    pub reset: Vec<bool>,
    pub valid: Vec<bool>,
}

impl FrameMasks {
    /// Masks as 0/1 integer arrays.
    pub fn to_json(&self) -> String {
        let bits = |v: &[bool]| v.iter().map(|&b| u8::from(b)).collect::<Vec<_>>();
        serde_json::json!({ "reset": bits(&self.reset), "valid": bits(&self.valid) }).to_string()
    }
}

pub fn build_masks(block: &Block) -> FrameMasks {
    let capacity = block.capacity();
    let mut reset = vec![false; capacity];
    for entry in block.entries() {
        reset[entry.block_offset] = true;
    }
    let used = block.used_frames();
    let valid = (0..capacity).map(|t| t < used).collect();
    FrameMasks { reset, valid }
}
