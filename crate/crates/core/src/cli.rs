//! `bload` command-line driver.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid manifest or plan file,
//! 3 infeasible packing.

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::ddp_sim::{
    assign_to_ranks, simulate_epoch, units_from_manifest, units_from_plan, SimError,
};
use crate::manifest::{
    generate_synthetic, parse_manifest, LengthShape, Manifest, ManifestError, SyntheticSpec,
};
use crate::oracle::{optimal_packing, OracleError};
use crate::packing::{pack_bload, pack_chunks, pack_mixed, pack_naive, PackingError, PackingPlan};
use crate::report::{compare, report, CompareParams, Comparison};
use crate::reset_mask::build_masks;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::InvalidInput(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }
}

impl From<ManifestError> for CliError {
    fn from(e: ManifestError) -> Self {
        match e {
            ManifestError::Infeasible(_) => CliError::Usage(e.to_string()),
            _ => CliError::InvalidInput(e.to_string()),
        }
    }
}

impl From<PackingError> for CliError {
    fn from(e: PackingError) -> Self {
        match e {
            PackingError::SequenceTooLong { .. } | PackingError::NoPackableSequences { .. } => {
                CliError::Infeasible(e.to_string())
            }
            PackingError::ZeroCapacity => CliError::Usage(e.to_string()),
            _ => CliError::InvalidInput(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::ZeroCapacity => CliError::Usage(e.to_string()),
            OracleError::EmptyManifest => CliError::InvalidInput(e.to_string()),
            _ => CliError::Infeasible(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::NoCompleteRound { .. } => CliError::Infeasible(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bload",
    version,
    about = "Batch variable-length sequences for synchronous data-parallel training"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic sequence-length manifest.
    GenManifest(GenManifestArgs),
    /// Pack a manifest into blocks with one strategy.
    Pack(PackArgs),
    /// Exact minimum-block packing for a small manifest.
    Oracle(OracleArgs),
    /// Simulate a data-parallel epoch and report deadlocks.
    Simulate(SimulateArgs),
    /// Print reset/valid masks for one block of a plan.
    Masks(MasksArgs),
    /// Tabulate metrics of existing plan files.
    Report(ReportArgs),
    /// Pack a manifest with every strategy and tabulate the results.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Dist {
    Uniform,
    HeavyTailed,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Naive,
    Chunks,
    Mixed,
    Bload,
}

#[derive(Debug, Args)]
pub struct GenManifestArgs {
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub total_frames: usize,
    #[arg(long)]
    pub min_len: usize,
    #[arg(long)]
    pub max_len: usize,
    #[arg(long, value_enum)]
    pub dist: Dist,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PackArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum)]
    pub strategy: StrategyArg,
    /// Block length for bload; defaults to the longest sequence.
    #[arg(long)]
    pub t_max: Option<usize>,
    /// Chunk length for the chunks strategy.
    #[arg(long)]
    pub t_block: Option<usize>,
    /// Trim/pad length for the mixed strategy.
    #[arg(long)]
    pub t_mix: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub capacity: usize,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("input").required(true).args(["plan", "manifest"])))]
pub struct SimulateArgs {
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Deal raw, unpadded sequences from a manifest (requires --raw).
    #[arg(long, requires = "raw")]
    pub manifest: Option<PathBuf>,
    #[arg(long, requires = "manifest")]
    pub raw: bool,
    #[arg(long)]
    pub world_size: usize,
    #[arg(long)]
    pub batch_size: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub cost_per_frame: f64,
}

#[derive(Debug, Args)]
pub struct MasksArgs {
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub block: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Comma-separated plan files.
    #[arg(long, value_delimiter = ',', required = true)]
    pub plans: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Chunk length; defaults to the mean sequence length, rounded down.
    #[arg(long)]
    pub t_block: Option<usize>,
    /// Trim/pad length; defaults to the mean sequence length, rounded down.
    #[arg(long)]
    pub t_mix: Option<usize>,
    #[arg(long)]
    pub t_max: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub world_size: usize,
    #[arg(long, default_value_t = 1.0)]
    pub cost_per_frame: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(
    command: Command,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    match command {
        Command::GenManifest(a) => {
            let spec = SyntheticSpec {
                count: a.count,
                total_frames: a.total_frames,
                min_len: a.min_len,
                max_len: a.max_len,
                shape: match a.dist {
                    Dist::Uniform => LengthShape::Uniform,
                    Dist::HeavyTailed => LengthShape::HeavyTailed,
                },
            };
            let manifest = generate_synthetic(&spec, a.seed)?;
            emit(a.out.as_deref(), &manifest.to_jsonl(), stdout)
        }
        Command::Pack(a) => {
            let manifest = read_manifest(&a.manifest)?;
            let plan = match a.strategy {
                StrategyArg::Naive => pack_naive(&manifest)?,
                StrategyArg::Chunks => {
                    pack_chunks(&manifest, required(a.t_block, "--t-block", "chunks")?)?
                }
                StrategyArg::Mixed => {
                    pack_mixed(&manifest, required(a.t_mix, "--t-mix", "mixed")?)?
                }
                StrategyArg::Bload => {
                    let t_max = match a.t_max {
                        Some(t) => t,
                        None => manifest.max_len().ok_or(PackingError::EmptyManifest)?,
                    };
                    pack_bload(&manifest, t_max, a.seed)?
                }
            };
            emit(a.out.as_deref(), &(plan.to_json() + "\n"), stdout)
        }
        Command::Oracle(a) => {
            let manifest = read_manifest(&a.manifest)?;
            let result = optimal_packing(&manifest, a.capacity)?;
            let json = serde_json::to_string_pretty(&result).expect("result serialization");
            writeln!(stdout, "{json}")?;
            Ok(())
        }
        Command::Simulate(a) => {
            if !(a.cost_per_frame > 0.0 && a.cost_per_frame.is_finite()) {
                return Err(CliError::Usage("--cost-per-frame must be positive".into()));
            }
            let units = match (&a.plan, &a.manifest) {
                (Some(plan), _) => units_from_plan(&read_plan(plan)?),
                (None, Some(manifest)) => units_from_manifest(&read_manifest(manifest)?),
                (None, None) => unreachable!("clap requires --plan or --manifest"),
            };
            let assignment = assign_to_ranks(&units, a.world_size, a.batch_size, a.seed)?;
            let trace = simulate_epoch(&assignment, a.cost_per_frame);
            let json = serde_json::to_string(&trace).expect("trace serialization");
            writeln!(stdout, "{json}")?;
            writeln!(stderr, "{}", trace.summary())?;
            Ok(())
        }
        Command::Masks(a) => {
            let plan = read_plan(&a.plan)?;
            let block = plan.blocks.get(a.block).ok_or_else(|| {
                CliError::Usage(format!(
                    "block {} out of range; plan has {} blocks",
                    a.block,
                    plan.blocks.len()
                ))
            })?;
            writeln!(stdout, "{}", build_masks(block).to_json())?;
            Ok(())
        }
        Command::Report(a) => {
            let plans = a
                .plans
                .iter()
                .map(|p| read_plan(p))
                .collect::<Result<Vec<_>, _>>()?;
            write_comparison(&report(&plans), a.format, stdout)
        }
        Command::Compare(a) => {
            let manifest = read_manifest(&a.manifest)?;
            if a.world_size == 0 {
                return Err(CliError::Usage("--world-size must be ≥ 1".into()));
            }
            if !(a.cost_per_frame > 0.0 && a.cost_per_frame.is_finite()) {
                return Err(CliError::Usage("--cost-per-frame must be positive".into()));
            }
            let mean = manifest.total_frames() / manifest.len();
            let params = CompareParams {
                t_block: a.t_block.unwrap_or(mean),
                t_mix: a.t_mix.unwrap_or(mean),
                t_max: a.t_max,
                seed: a.seed,
                world_size: a.world_size,
                cost_per_frame: a.cost_per_frame,
            };
            write_comparison(&compare(&manifest, &params)?, a.format, stdout)
        }
    }
}

fn required(value: Option<usize>, flag: &str, strategy: &str) -> Result<usize, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("{flag} is required for strategy {strategy}")))
}

fn write_comparison(c: &Comparison, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    match format {
        Format::Text => write!(out, "{}", c.render_text())?,
        Format::Json => writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(c).expect("report serialization")
        )?,
    }
    Ok(())
}

fn read_manifest(path: &Path) -> Result<Manifest, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::InvalidInput(format!("{}: {e}", path.display())))?;
    parse_manifest(BufReader::new(file))
        .map_err(|e| CliError::InvalidInput(format!("{}: {e}", path.display())))
}

fn read_plan(path: &Path) -> Result<PackingPlan, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::InvalidInput(format!("{}: {e}", path.display())))?;
    PackingPlan::from_json(&text)
        .map_err(|e| CliError::InvalidInput(format!("{}: {e}", path.display())))
}

/// Writes to `path` via a temp file in the same directory and a rename, or
/// to stdout when no path is given.
fn emit(path: Option<&Path>, contents: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    let Some(path) = path else {
        stdout.write_all(contents.as_bytes())?;
        return Ok(());
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}
