//! The four-strategy comparison on the Action-Genome-shaped manifest.

use bload::manifest::SyntheticSpec;
use bload::report::{compare, CompareParams};
use bload::{generate_synthetic, Strategy};

#[test]
fn action_genome_comparison() {
    let m = generate_synthetic(&SyntheticSpec::ACTION_GENOME, 17).unwrap();
    let params = CompareParams {
        t_block: 22,
        t_mix: 22,
        t_max: None,
        seed: 7,
        world_size: 8,
        cost_per_frame: 1.0,
    };
    let c = compare(&m, &params).unwrap();
    let naive = c.column(Strategy::Naive).unwrap();
    assert_eq!(naive.metrics.padding_frames, 534_831);
    assert_eq!(naive.epoch_time, Some((7464usize.div_ceil(8) * 94) as f64));

    let mixed = c.column(Strategy::Mixed).unwrap();
    assert_eq!(mixed.metrics.processed_frames, 164_208);
    // trim and pad differ by exactly the frame deficit of 22-frame blocks
    assert_eq!(
        mixed.metrics.frames_deleted - mixed.metrics.padding_frames,
        166_785 - 164_208
    );

    let bload = c.column(Strategy::Bload).unwrap();
    assert_eq!(bload.metrics.frames_deleted, 0);
    assert!(c.padding_reduction.unwrap() >= 100.0);

    let chunks = c.column(Strategy::Chunks).unwrap();
    assert_eq!(chunks.metrics.padding_frames, 0);
    assert!(chunks.metrics.frames_deleted > 0);
}
