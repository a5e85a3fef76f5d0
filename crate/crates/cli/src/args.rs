use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pargas_core::gcm::MechanismId;
use pargas_core::properties::PropertyId;
use pargas_core::scheduler::Threads;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "pargas",
    version,
    about = "Gas mechanisms for parallel transaction execution"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Thread count `n >= 2`, or `unbounded`.
    #[arg(long, global = true, value_parser = parse_threads)]
    pub threads: Option<Threads>,
    #[arg(long, global = true, value_parser = parse_mech)]
    pub mech: Option<MechanismId>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Random trials per property for `check`, blocks for `simulate`.
    #[arg(long, global = true)]
    pub budget: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Key weights document for weighted area.
    #[arg(long, global = true)]
    pub weights: Option<PathBuf>,
    /// Write output here (atomically) instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Text,
    Csv,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Exact,
    Greedy,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-transaction gas of a block.
    Gas { block: PathBuf },
    /// Schedule a block and render it as a Gantt chart.
    Schedule {
        block: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
    },
    /// Run fixtures and randomized property checks against the reference matrix.
    Check {
        /// Every reference mechanism and property.
        #[arg(long)]
        all: bool,
        #[arg(long = "prop", value_parser = parse_prop)]
        props: Vec<PropertyId>,
        /// Replay a saved witness instead of searching.
        #[arg(long, conflicts_with_all = ["all", "props"])]
        witness: Option<PathBuf>,
    },
    /// Run a base-fee market simulation.
    Simulate {
        /// Workload JSON; defaults apply to missing fields.
        #[arg(long)]
        workload: Option<PathBuf>,
    },
}

fn parse_threads(s: &str) -> Result<Threads, String> {
    s.parse()
}

fn parse_mech(s: &str) -> Result<MechanismId, String> {
    s.parse()
}

fn parse_prop(s: &str) -> Result<PropertyId, String> {
    s.parse()
}
