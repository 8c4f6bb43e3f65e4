//! Side-by-side comparison of strategies, laid out like a results table:
//! one column per strategy, one row per metric.

use std::fmt::Write as _;

use serde::Serialize;

use crate::ddp_sim::epoch_time_estimate;
use crate::manifest::Manifest;
use crate::packing::{
    compute_metrics, pack_bload, pack_chunks, pack_mixed, pack_naive, PackingError, PackingMetrics,
    PackingPlan, Strategy,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportColumn {
    pub strategy: Strategy,
    pub capacity: usize,
    pub metrics: PackingMetrics,
    /// Modeled epoch time; only filled in by [`compare`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epoch_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub columns: Vec<ReportColumn>,
    /// Naive padding over bload padding, when both are present and bload
    /// padded at all.
    pub padding_reduction: Option<f64>,
}

impl Comparison {
    fn from_columns(columns: Vec<ReportColumn>) -> Self {
        let padding = |s| {
            columns
                .iter()
                .find(|c| c.strategy == s)
                .map(|c| c.metrics.padding_frames)
        };
        let padding_reduction = match (padding(Strategy::Naive), padding(Strategy::Bload)) {
            (Some(naive), Some(bload)) if bload > 0 => Some(naive as f64 / bload as f64),
            _ => None,
        };
        Self {
            columns,
            padding_reduction,
        }
    }

    pub fn column(&self, strategy: Strategy) -> Option<&ReportColumn> {
        self.columns.iter().find(|c| c.strategy == strategy)
    }

    pub fn render_text(&self) -> String {
        let mut rows: Vec<(&str, Vec<String>)> = vec![
            (
                "",
                self.columns
                    .iter()
                    .map(|c| c.strategy.to_string())
                    .collect(),
            ),
            (
                "padding amount",
                self.columns
                    .iter()
                    .map(|c| c.metrics.padding_frames.to_string())
                    .collect(),
            ),
            (
                "# frames deleted",
                self.columns
                    .iter()
                    .map(|c| c.metrics.frames_deleted.to_string())
                    .collect(),
            ),
            (
                "block length",
                self.columns
                    .iter()
                    .map(|c| c.capacity.to_string())
                    .collect(),
            ),
            (
                "blocks",
                self.columns
                    .iter()
                    .map(|c| c.metrics.block_count.to_string())
                    .collect(),
            ),
            (
                "processed frames",
                self.columns
                    .iter()
                    .map(|c| c.metrics.processed_frames.to_string())
                    .collect(),
            ),
            (
                "utilization",
                self.columns
                    .iter()
                    .map(|c| format!("{:.4}", c.metrics.utilization))
                    .collect(),
            ),
        ];
        if self.columns.iter().all(|c| c.epoch_time.is_some()) {
            rows.push((
                "time (per epoch)",
                self.columns
                    .iter()
                    .map(|c| format!("{}", c.epoch_time.unwrap_or_default()))
                    .collect(),
            ));
        }

        let label_width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
        let col_width = rows
            .iter()
            .flat_map(|(_, cells)| cells.iter().map(String::len))
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        for (label, cells) in &rows {
            write!(out, "{label:<label_width$}").unwrap();
            for cell in cells {
                write!(out, "  {cell:>col_width$}").unwrap();
            }
            out.push('\n');
        }
        if let Some(ratio) = self.padding_reduction {
            writeln!(out, "padding reduction (naive / bload): {ratio:.1}x").unwrap();
        }
        out
    }
}

/// Tabulates already-built plans. Depends on nothing but the plans.
pub fn report(plans: &[PackingPlan]) -> Comparison {
    Comparison::from_columns(
        plans
            .iter()
            .map(|p| ReportColumn {
                strategy: p.strategy,
                capacity: p.capacity,
                metrics: p.metrics(),
                epoch_time: None,
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareParams {
    pub t_block: usize,
    pub t_mix: usize,
    /// Defaults to the longest sequence.
    pub t_max: Option<usize>,
    pub seed: u64,
    pub world_size: usize,
    pub cost_per_frame: f64,
}

/// Packs `manifest` with all four strategies and tabulates the results.
pub fn compare(manifest: &Manifest, params: &CompareParams) -> Result<Comparison, PackingError> {
    let t_max = match params.t_max {
        Some(t) => t,
        None => manifest.max_len().ok_or(PackingError::EmptyManifest)?,
    };
    let plans = [
        pack_naive(manifest)?,
        pack_chunks(manifest, params.t_block)?,
        pack_mixed(manifest, params.t_mix)?,
        pack_bload(manifest, t_max, params.seed)?,
    ];
    let columns = plans
        .iter()
        .map(|p| {
            Ok(ReportColumn {
                strategy: p.strategy,
                capacity: p.capacity,
                metrics: compute_metrics(p, manifest)?,
                epoch_time: Some(epoch_time_estimate(
                    p,
                    params.world_size,
                    params.cost_per_frame,
                )),
            })
        })
        .collect::<Result<Vec<_>, PackingError>>()?;
    Ok(Comparison::from_columns(columns))
}
