//! Sequence-length manifests.
//!
//! A manifest is the only view of a dataset the packers ever see: an ordered
//! list of `(id, frames)` records. Frame content and spatial dimensions are
//! never modeled.
//!
//! On disk a manifest is JSON Lines, one `{"id": "...", "frames": n}` object
//! per line.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ManifestError {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: frames must be ≥ 1 (id {id:?})")]
    ZeroFrames { line: usize, id: String },
    #[error("line {line}: id must be non-empty")]
    EmptyId { line: usize },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("manifest is empty")]
    Empty,
    #[error("io error: {0}")]
    Io(String),
    #[error("infeasible synthetic spec: {0}")]
    Infeasible(String),
}

/// One logical sequence (a video): identifier and frame count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceRecord {
    pub id: String,
    pub frames: usize,
}

impl SequenceRecord {
    pub fn new(id: impl Into<String>, frames: usize) -> Self {
        Self {
            id: id.into(),
            frames,
        }
    }
}

/// Ordered, validated collection of sequence records.
///
/// Ids are unique and every record has at least one frame. An empty manifest
/// can be constructed, but every packing operation rejects it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    records: Vec<SequenceRecord>,
}

impl Manifest {
    /// Validates and wraps `records`. Line numbers in errors are 1-based
    /// record positions.
    pub fn new(records: Vec<SequenceRecord>) -> Result<Self, ManifestError> {
        let mut seen = HashSet::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            let line = i + 1;
            if rec.id.is_empty() {
                return Err(ManifestError::EmptyId { line });
            }
            if rec.frames == 0 {
                return Err(ManifestError::ZeroFrames {
                    line,
                    id: rec.id.clone(),
                });
            }
            if !seen.insert(rec.id.as_str()) {
                return Err(ManifestError::DuplicateId {
                    line,
                    id: rec.id.clone(),
                });
            }
        }
        Ok(Self { records })
    }

    /// Convenience constructor assigning ids `V1, V2, ...`.
    pub fn from_lengths(lengths: &[usize]) -> Result<Self, ManifestError> {
        Self::new(
            lengths
                .iter()
                .enumerate()
                .map(|(i, &frames)| SequenceRecord::new(format!("V{}", i + 1), frames))
                .collect(),
        )
    }

    pub fn records(&self) -> &[SequenceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.records.iter().map(|r| r.frames)
    }

    pub fn total_frames(&self) -> usize {
        self.lengths().sum()
    }

    pub fn max_len(&self) -> Option<usize> {
        self.lengths().max()
    }

    pub fn get(&self, id: &str) -> Option<&SequenceRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// JSON Lines encoding, keys in `id, frames` order, `\n` terminated.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.records {
            // serializing a plain struct of a string and an integer cannot fail
            let line = serde_json::to_string(rec).expect("record serialization");
            writeln!(out, "{line}").unwrap();
        }
        out
    }
}

/// Parses a JSON Lines manifest. Blank lines are skipped; line numbers in
/// errors refer to the physical input line.
pub fn parse_manifest<R: BufRead>(input: R) -> Result<Manifest, ManifestError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| ManifestError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SequenceRecord =
            serde_json::from_str(&line).map_err(|e| ManifestError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        if rec.id.is_empty() {
            return Err(ManifestError::EmptyId { line: line_no });
        }
        if rec.frames == 0 {
            return Err(ManifestError::ZeroFrames {
                line: line_no,
                id: rec.id,
            });
        }
        if !seen.insert(rec.id.clone()) {
            return Err(ManifestError::DuplicateId {
                line: line_no,
                id: rec.id,
            });
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(ManifestError::Empty);
    }
    Ok(Manifest { records })
}

/// Summary statistics of a manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestStats {
    pub count: usize,
    pub total_frames: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// `total_frames / count`; the exact value is the ratio of the two
    /// integer fields.
    pub mean_len: f64,
}

pub fn summarize(manifest: &Manifest) -> Result<ManifestStats, ManifestError> {
    let min_len = manifest.lengths().min().ok_or(ManifestError::Empty)?;
    let max_len = manifest.lengths().max().ok_or(ManifestError::Empty)?;
    let count = manifest.len();
    let total_frames = manifest.total_frames();
    Ok(ManifestStats {
        count,
        total_frames,
        min_len,
        max_len,
        mean_len: total_frames as f64 / count as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LengthShape {
    Uniform,
    /// Log-normal body, clamped to the length bounds.
    HeavyTailed,
}

/// Target shape of a synthetic manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub count: usize,
    pub total_frames: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub shape: LengthShape,
}

impl SyntheticSpec {
    /// Action Genome training split: 7,464 videos, 166,785 frames, 3 to 94
    /// frames each.
    pub const ACTION_GENOME: SyntheticSpec = SyntheticSpec {
        count: 7464,
        total_frames: 166_785,
        min_len: 3,
        max_len: 94,
        shape: LengthShape::HeavyTailed,
    };

    fn check(&self) -> Result<(), ManifestError> {
        let infeasible = |m: String| Err(ManifestError::Infeasible(m));
        if self.count == 0 {
            return infeasible("count must be ≥ 1".into());
        }
        if self.min_len == 0 {
            return infeasible("min_len must be ≥ 1".into());
        }
        if self.min_len > self.max_len {
            return infeasible(format!(
                "min_len {} exceeds max_len {}",
                self.min_len, self.max_len
            ));
        }
        // one record is pinned at max_len, the rest span [min_len, max_len]
        let lo = (self.count - 1) * self.min_len + self.max_len;
        let hi = self.count * self.max_len;
        if self.total_frames < lo || self.total_frames > hi {
            return infeasible(format!(
                "total_frames {} outside achievable range [{lo}, {hi}]",
                self.total_frames
            ));
        }
        Ok(())
    }
}

/// Log-normal spread used for [`LengthShape::HeavyTailed`].
const HEAVY_TAIL_SIGMA: f64 = 0.8;

/// Generates a manifest matching `spec` exactly: `count` records, frame sum
/// `total_frames`, lengths within bounds, and at least one record at
/// `max_len`. Pure function of `(spec, seed)`.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Manifest, ManifestError> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (spec.min_len, spec.max_len);

    let mut lengths: Vec<usize> = match spec.shape {
        LengthShape::Uniform => (0..spec.count).map(|_| rng.random_range(lo..=hi)).collect(),
        LengthShape::HeavyTailed => {
            let mean = spec.total_frames as f64 / spec.count as f64;
            let sigma = HEAVY_TAIL_SIGMA;
            let mu = mean.ln() - sigma * sigma / 2.0;
            let dist = LogNormal::new(mu, sigma).expect("finite log-normal parameters");
            (0..spec.count)
                .map(|_| (dist.sample(&mut rng).round() as usize).clamp(lo, hi))
                .collect()
        }
    };

    let pinned = rng.random_range(0..spec.count);
    lengths[pinned] = hi;

    // ±1 repair on random unpinned records until the sum is exact.
    let sum: usize = lengths.iter().sum();
    if sum != spec.total_frames {
        let grow = sum < spec.total_frames;
        let mut diff = sum.abs_diff(spec.total_frames);
        let mut movable: Vec<usize> = (0..spec.count)
            .filter(|&i| {
                i != pinned
                    && if grow {
                        lengths[i] < hi
                    } else {
                        lengths[i] > lo
                    }
            })
            .collect();
        while diff > 0 {
            let slot = rng.random_range(0..movable.len());
            let i = movable[slot];
            if grow {
                lengths[i] += 1;
            } else {
                lengths[i] -= 1;
            }
            diff -= 1;
            if lengths[i] == hi || lengths[i] == lo {
                movable.swap_remove(slot);
            }
        }
    }

    let records = lengths
        .into_iter()
        .enumerate()
        .map(|(i, frames)| SequenceRecord::new(format!("V{:05}", i + 1), frames))
        .collect();
    Manifest::new(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> Result<Manifest, ManifestError> {
        parse_manifest(s.as_bytes())
    }

    #[test]
    fn parses_three_records() {
        let m = parse(
            "{\"id\": \"V1\", \"frames\": 2}\n{\"id\": \"V2\", \"frames\": 3}\n\n{\"id\": \"V3\", \"frames\": 6}\n",
        )
        .unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.total_frames(), 11);
        assert_eq!(m.records()[2], SequenceRecord::new("V3", 6));
    }

    #[test]
    fn zero_frames_rejected() {
        let err = parse("{\"id\": \"V1\", \"frames\": 0}\n").unwrap_err();
        assert_eq!(
            err,
            ManifestError::ZeroFrames {
                line: 1,
                id: "V1".into()
            }
        );
        assert!(err.to_string().contains("frames must be ≥ 1"));
    }

    #[test]
    fn duplicate_id_rejected() {
        let err =
            parse("{\"id\":\"V1\",\"frames\":2}\n{\"id\":\"V1\",\"frames\":3}\n").unwrap_err();
        assert_eq!(
            err,
            ManifestError::DuplicateId {
                line: 2,
                id: "V1".into()
            }
        );
    }

    #[test]
    fn malformed_lines_report_line_number() {
        for bad in [
            "{\"id\":\"V1\"}",
            "{\"id\":\"V1\",\"frames\":-2}",
            "{\"id\":\"V1\",\"frames\":2,\"extra\":1}",
            "not json",
        ] {
            let input = format!("{{\"id\":\"V0\",\"frames\":1}}\n{bad}\n");
            match parse(&input) {
                Err(ManifestError::Malformed { line, .. }) => assert_eq!(line, 2, "{bad}"),
                other => panic!("{bad}: {other:?}"),
            }
        }
        assert_eq!(
            parse("{\"id\":\"\",\"frames\":1}\n"),
            Err(ManifestError::EmptyId { line: 1 })
        );
    }

    #[test]
    fn empty_input_rejected() {
        assert_eq!(parse(""), Err(ManifestError::Empty));
        assert_eq!(parse("\n  \n"), Err(ManifestError::Empty));
    }

    #[test]
    fn serialization_is_byte_exact() {
        let m = Manifest::from_lengths(&[2, 3]).unwrap();
        assert_eq!(
            m.to_jsonl(),
            "{\"id\":\"V1\",\"frames\":2}\n{\"id\":\"V2\",\"frames\":3}\n"
        );
    }

    #[test]
    fn summarize_small() {
        let s = summarize(&Manifest::from_lengths(&[2, 3, 6]).unwrap()).unwrap();
        assert_eq!(
            (s.count, s.total_frames, s.min_len, s.max_len),
            (3, 11, 2, 6)
        );
        assert!((s.mean_len - 11.0 / 3.0).abs() < 1e-12);

        let s = summarize(&Manifest::from_lengths(&[5]).unwrap()).unwrap();
        assert_eq!((s.count, s.min_len, s.max_len), (1, 5, 5));
        assert_eq!(s.mean_len, 5.0);

        assert_eq!(summarize(&Manifest::default()), Err(ManifestError::Empty));
    }

    #[test]
    fn synthetic_action_genome_stats() {
        let m = generate_synthetic(&SyntheticSpec::ACTION_GENOME, 17).unwrap();
        let s = summarize(&m).unwrap();
        assert_eq!(s.count, 7464);
        assert_eq!(s.total_frames, 166_785);
        assert_eq!(s.max_len, 94);
        assert!(s.min_len >= 3);
    }

    #[test]
    fn synthetic_forced_by_bounds() {
        let spec = SyntheticSpec {
            count: 4,
            total_frames: 4,
            min_len: 1,
            max_len: 1,
            shape: LengthShape::Uniform,
        };
        let m = generate_synthetic(&spec, 0).unwrap();
        assert_eq!(m.lengths().collect::<Vec<_>>(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = generate_synthetic(&SyntheticSpec::ACTION_GENOME, 3).unwrap();
        let b = generate_synthetic(&SyntheticSpec::ACTION_GENOME, 3).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        let c = generate_synthetic(&SyntheticSpec::ACTION_GENOME, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn infeasible_specs_rejected() {
        let base = SyntheticSpec {
            count: 3,
            total_frames: 9,
            min_len: 2,
            max_len: 4,
            shape: LengthShape::Uniform,
        };
        for spec in [
            SyntheticSpec { count: 0, ..base },
            SyntheticSpec { min_len: 0, ..base },
            SyntheticSpec { min_len: 5, ..base },
            SyntheticSpec {
                total_frames: 13,
                ..base
            },
            SyntheticSpec {
                total_frames: 7,
                ..base
            },
        ] {
            assert!(
                matches!(
                    generate_synthetic(&spec, 1),
                    Err(ManifestError::Infeasible(_))
                ),
                "{spec:?}"
            );
        }
        assert!(generate_synthetic(
            &SyntheticSpec {
                total_frames: 8,
                ..base
            },
            1
        )
        .is_ok());
    }

    fn feasible_spec() -> impl Strategy<Value = SyntheticSpec> {
        (1usize..40, 1usize..10, 0usize..20, any::<bool>()).prop_flat_map(
            |(count, min_len, span, heavy)| {
                let max_len = min_len + span;
                let lo = (count - 1) * min_len + max_len;
                let hi = count * max_len;
                (lo..=hi).prop_map(move |total_frames| SyntheticSpec {
                    count,
                    total_frames,
                    min_len,
                    max_len,
                    shape: if heavy {
                        LengthShape::HeavyTailed
                    } else {
                        LengthShape::Uniform
                    },
                })
            },
        )
    }

    fn manifest_strategy() -> impl Strategy<Value = Manifest> {
        proptest::collection::vec(("[A-Za-z0-9_\\- \"\\\\é]{1,8}", 1usize..200), 1..30).prop_map(
            |recs| {
                let mut seen = HashSet::new();
                let records = recs
                    .into_iter()
                    .filter(|(id, _)| seen.insert(id.clone()))
                    .map(|(id, f)| SequenceRecord::new(id, f))
                    .collect();
                Manifest::new(records).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn synthetic_conserves_frames(spec in feasible_spec(), seed in any::<u64>()) {
            let m = generate_synthetic(&spec, seed).unwrap();
            let s = summarize(&m).unwrap();
            prop_assert_eq!(s.count, spec.count);
            prop_assert_eq!(s.total_frames, spec.total_frames);
            prop_assert_eq!(s.max_len, spec.max_len);
            prop_assert!(s.min_len >= spec.min_len);
        }

        #[test]
        fn jsonl_round_trip(m in manifest_strategy()) {
            let text = m.to_jsonl();
            prop_assert_eq!(parse_manifest(text.as_bytes()).unwrap(), m);
        }
    }
}
