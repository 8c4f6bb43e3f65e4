//! Lockstep simulation of synchronous data-parallel training.
//!
//! Each rank consumes one batch per round and runs one iteration per frame of
//! its longest unit; every iteration ends in a gradient all-reduce that needs
//! every rank. A rank whose batch is exhausted has nothing to contribute, so
//! the others block on it forever. The simulator reports that as a deadlock
//! in the trace instead of hanging.
//!
//! Rounds are numbered from 0. Iterations and ranks are numbered from 1, in
//! the same way GPUs are labelled "GPU 1", "GPU 2".

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::Manifest;
use crate::packing::PackingPlan;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("world_size must be ≥ 1")]
    ZeroWorldSize,
    #[error("batch_size must be ≥ 1")]
    ZeroBatchSize,
    #[error("no units to assign")]
    NoUnits,
    #[error("unit {0:?} has zero length")]
    ZeroLengthUnit(String),
    #[error(
        "no complete round: {units} units cannot fill {world_size} ranks × {batch_size} per batch"
    )]
    NoCompleteRound {
        units: usize,
        world_size: usize,
        batch_size: usize,
    },
    #[error("malformed assignment: {0}")]
    Malformed(String),
}

/// What one rank consumes in one batch slot: a raw sequence or a packed block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkUnit {
    pub unit_id: String,
    /// Iterations (frames) this unit takes.
    pub length: usize,
    /// Source block index, for units built from a plan.
    pub block: Option<usize>,
}

impl WorkUnit {
    pub fn new(unit_id: impl Into<String>, length: usize) -> Self {
        Self {
            unit_id: unit_id.into(),
            length,
            block: None,
        }
    }
}

/// Units for each block of a plan; every unit has the plan's capacity.
pub fn units_from_plan(plan: &PackingPlan) -> Vec<WorkUnit> {
    (0..plan.blocks.len())
        .map(|i| WorkUnit {
            unit_id: format!("block-{i}"),
            length: plan.capacity,
            block: Some(i),
        })
        .collect()
}

/// One unit per raw, unpadded sequence.
pub fn units_from_manifest(manifest: &Manifest) -> Vec<WorkUnit> {
    manifest
        .records()
        .iter()
        .map(|r| WorkUnit::new(r.id.clone(), r.frames))
        .collect()
}

/// Batches dealt to each rank. `ranks[r][b]` is rank `r + 1`'s batch for
/// round `b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankAssignment {
    pub world_size: usize,
    pub batch_size: usize,
    pub ranks: Vec<Vec<Vec<WorkUnit>>>,
    /// Units left over after the last complete round.
    pub dropped_units: usize,
}

impl RankAssignment {
    /// Builds an assignment from explicit per-rank batches.
    pub fn from_batches(
        batch_size: usize,
        ranks: Vec<Vec<Vec<WorkUnit>>>,
    ) -> Result<Self, SimError> {
        if ranks.is_empty() {
            return Err(SimError::ZeroWorldSize);
        }
        if batch_size == 0 {
            return Err(SimError::ZeroBatchSize);
        }
        let rounds = ranks[0].len();
        for (r, batches) in ranks.iter().enumerate() {
            if batches.len() != rounds {
                return Err(SimError::Malformed(format!(
                    "rank {} has {} batches, rank 1 has {rounds}",
                    r + 1,
                    batches.len()
                )));
            }
            for batch in batches {
                if batch.len() != batch_size {
                    return Err(SimError::Malformed(format!(
                        "rank {} has a batch of {} units, expected {batch_size}",
                        r + 1,
                        batch.len()
                    )));
                }
                if let Some(u) = batch.iter().find(|u| u.length == 0) {
                    return Err(SimError::ZeroLengthUnit(u.unit_id.clone()));
                }
            }
        }
        Ok(Self {
            world_size: ranks.len(),
            batch_size,
            ranks,
            dropped_units: 0,
        })
    }

    pub fn rounds(&self) -> usize {
        self.ranks.first().map_or(0, Vec::len)
    }
}

/// Shuffles `units` with `seed`, then deals consecutive groups of
/// `batch_size` units round-robin to ranks. Units that do not complete a
/// round are dropped.
pub fn assign_to_ranks(
    units: &[WorkUnit],
    world_size: usize,
    batch_size: usize,
    seed: u64,
) -> Result<RankAssignment, SimError> {
    if world_size == 0 {
        return Err(SimError::ZeroWorldSize);
    }
    if batch_size == 0 {
        return Err(SimError::ZeroBatchSize);
    }
    if units.is_empty() {
        return Err(SimError::NoUnits);
    }
    if let Some(u) = units.iter().find(|u| u.length == 0) {
        return Err(SimError::ZeroLengthUnit(u.unit_id.clone()));
    }
    let per_round = world_size * batch_size;
    let rounds = units.len() / per_round;
    if rounds == 0 {
        return Err(SimError::NoCompleteRound {
            units: units.len(),
            world_size,
            batch_size,
        });
    }

    let mut order: Vec<&WorkUnit> = units.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut ranks = vec![Vec::with_capacity(rounds); world_size];
    for (g, group) in order
        .chunks_exact(batch_size)
        .take(rounds * world_size)
        .enumerate()
    {
        ranks[g % world_size].push(group.iter().map(|&u| u.clone()).collect());
    }
    Ok(RankAssignment {
        world_size,
        batch_size,
        ranks,
        dropped_units: units.len() - rounds * per_round,
    })
}

/// A completed all-reduce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyncEvent {
    pub round: usize,
    pub iteration: usize,
    pub ranks: Vec<usize>,
}

/// Where and why the epoch stalled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Deadlock {
    pub round: usize,
    /// First iteration some rank cannot reach.
    pub iteration: usize,
    /// Ranks blocked waiting in the all-reduce.
    pub stalled_ranks: Vec<usize>,
    /// Ranks with no gradient left to contribute.
    pub exhausted_ranks: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepTrace {
    pub world_size: usize,
    pub batch_size: usize,
    /// `iterations[b][r]`: iterations rank `r + 1` needs in round `b`.
    /// Only rounds that were started are listed.
    pub iterations: Vec<Vec<usize>>,
    pub sync_events: Vec<SyncEvent>,
    pub deadlock: Option<Deadlock>,
    /// Completed synchronous iterations times the per-frame cost.
    pub simulated_time: f64,
}

impl StepTrace {
    pub fn deadlocked(&self) -> bool {
        self.deadlock.is_some()
    }

    pub fn completed_iterations(&self) -> usize {
        self.sync_events.len()
    }

    pub fn summary(&self) -> String {
        match &self.deadlock {
            None => format!(
                "no deadlock: {} rounds, {} synchronized iterations, simulated time {}",
                self.iterations.len(),
                self.completed_iterations(),
                self.simulated_time
            ),
            Some(d) => format!(
                "DEADLOCK at round {}, iteration {}: ranks {:?} wait on exhausted ranks {:?} \
                 (simulated time before stall {})",
                d.round, d.iteration, d.stalled_ranks, d.exhausted_ranks, self.simulated_time
            ),
        }
    }
}

/// Runs one epoch in lockstep. `cost_per_frame` is the time of one
/// synchronized iteration.
pub fn simulate_epoch(assignment: &RankAssignment, cost_per_frame: f64) -> StepTrace {
    let mut iterations = Vec::with_capacity(assignment.rounds());
    let mut sync_events = Vec::new();
    let mut deadlock = None;

    'rounds: for round in 0..assignment.rounds() {
        let needed: Vec<usize> = assignment
            .ranks
            .iter()
            .map(|batches| batches[round].iter().map(|u| u.length).max().unwrap_or(0))
            .collect();
        let longest = needed.iter().copied().max().unwrap_or(0);
        iterations.push(needed.clone());

        for iteration in 1..=longest {
            let (active, exhausted): (Vec<usize>, Vec<usize>) =
                (1..=assignment.world_size).partition(|&r| needed[r - 1] >= iteration);
            if !exhausted.is_empty() {
                deadlock = Some(Deadlock {
                    round,
                    iteration,
                    stalled_ranks: active,
                    exhausted_ranks: exhausted,
                });
                break 'rounds;
            }
            sync_events.push(SyncEvent {
                round,
                iteration,
                ranks: active,
            });
        }
    }

    let simulated_time = sync_events.len() as f64 * cost_per_frame;
    StepTrace {
        world_size: assignment.world_size,
        batch_size: assignment.batch_size,
        iterations,
        sync_events,
        deadlock,
        simulated_time,
    }
}

/// Frames-processed epoch time: ranks advance in lockstep, so the epoch takes
/// `ceil(blocks / world_size)` block-lengths, padding included.
pub fn epoch_time_estimate(plan: &PackingPlan, world_size: usize, cost_per_frame: f64) -> f64 {
    let world = world_size.max(1);
    let steps = plan.blocks.len().div_ceil(world);
    (steps * plan.capacity) as f64 * cost_per_frame
}
