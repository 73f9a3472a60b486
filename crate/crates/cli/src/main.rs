//! `psm`: design generation, survey collection and the analysis pipeline.
//!
//! Exit codes: 1 I/O, 2 configuration or usage, 3 unparseable input,
//! 4 analysis failure, 5 fatal transport error during collection.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Config(String),
    Parse(String),
    Analysis(String),
    Transport(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Analysis(_) => 4,
            CliError::Transport(_) => 5,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (kind, msg) = match self {
            CliError::Io(m) => ("i/o error", m),
            CliError::Config(m) => ("configuration error", m),
            CliError::Parse(m) => ("parse error", m),
            CliError::Analysis(m) => ("analysis error", m),
            CliError::Transport(m) => ("transport error", m),
        };
        write!(f, "{kind}: {msg}")
    }
}

#[derive(Parser, Debug)]
#[command(name = "psm", version, about = "Priced survey experiments and revealed-preference analysis")]
pub struct Cli {
    /// Pipeline configuration (JSON); flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Cap on worker threads for Monte-Carlo loops.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

/// Sessions to analyse, replacing those of the config file when given.
#[derive(Args, Debug, Clone, Default)]
pub struct SessionArgs {
    /// A design file and its attempt log; repeat for more models.
    #[arg(long, num_args = 2, value_names = ["DESIGN", "LOG"], action = clap::ArgAction::Append)]
    pub session: Vec<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct DesignArgs {
    /// Offer every answer on the budget plane.
    #[arg(long, conflicts_with = "comprehensive")]
    pub full_budget: bool,
    /// Offer every answer costing at most the budget.
    #[arg(long)]
    pub comprehensive: bool,
    #[arg(long, default_value_t = 100)]
    pub options: usize,
    #[arg(long, default_value_t = 12)]
    pub budget: u32,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ProviderArgs {
    /// Provider configuration (JSON); the flags below override it.
    #[arg(long)]
    pub provider: Option<PathBuf>,
    #[arg(long)]
    pub provider_name: Option<String>,
    #[arg(long)]
    pub endpoint_url: Option<String>,
    #[arg(long)]
    pub model_name: Option<String>,
    /// Environment variable holding the bearer token.
    #[arg(long)]
    pub auth_env_var: Option<String>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    #[arg(long)]
    pub retry_limit: Option<u32>,
    #[arg(long)]
    pub requests_per_minute: Option<f64>,
    /// JSON file with the request body template.
    #[arg(long)]
    pub body_template: Option<PathBuf>,
    /// JSON pointer to the reply text in the response.
    #[arg(long)]
    pub response_pointer: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct AgentArgs {
    /// Synthetic agent specification (JSON).
    #[arg(long, conflicts_with = "agent_kind")]
    pub agent: Option<PathBuf>,
    /// uniform_random or fixed_option; utility agents need --agent.
    #[arg(long)]
    pub agent_kind: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub agent_seed: u64,
    #[arg(long)]
    pub fixed_index: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write the 161-round design for an unconstrained answer.
    GenDesign {
        /// Unconstrained answer, e.g. 3,1,4,1,5.
        #[arg(long)]
        q0: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        design: DesignArgs,
    },
    /// Administer a design to an endpoint or synthetic agent.
    Run {
        /// Fixed design; conflicts with --adaptive.
        #[arg(long, required_unless_present = "adaptive")]
        design: Option<PathBuf>,
        /// Ask round 0 first and build the design from its answer.
        #[arg(long, conflicts_with = "design", requires = "design_out")]
        adaptive: bool,
        /// Where the adaptive design is written.
        #[arg(long)]
        design_out: Option<PathBuf>,
        /// Seed of the adaptive design.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        design_args: DesignArgs,
        #[arg(long)]
        model_id: String,
        /// JSONL attempt log to write.
        #[arg(long)]
        log: PathBuf,
        #[command(flatten)]
        agent: AgentArgs,
        #[command(flatten)]
        provider: ProviderArgs,
    },
    /// CCEI of each session.
    Ccei {
        #[command(flatten)]
        sessions: SessionArgs,
    },
    /// Rationality test against uniformly random choice.
    Test {
        #[command(flatten)]
        sessions: SessionArgs,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Draw random datasets on every design round instead of the
        /// answered ones.
        #[arg(long)]
        design_support: bool,
    },
    /// Fit the quadratic utility by multi-start least squares.
    Fit {
        #[command(flatten)]
        sessions: SessionArgs,
        /// lagrangian or paper-verbatim.
        #[arg(long)]
        demand_mode: Option<String>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Partition models into jointly consistent types.
    Partition {
        #[command(flatten)]
        sessions: SessionArgs,
        #[arg(long)]
        e: Option<f64>,
    },
    /// Similarity matrix from random round subsamples.
    Permute {
        #[command(flatten)]
        sessions: SessionArgs,
        #[arg(long)]
        rho: Option<usize>,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        e: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the matrix as JSON, the input of `network`.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Threshold networks, adjacency and node metrics from a similarity
    /// matrix.
    Network {
        /// JSON written by `permute --json`.
        #[arg(long)]
        similarity: PathBuf,
        #[arg(long)]
        alpha: Vec<f64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Rationality, utility and similarity tables plus networks. `--out`
    /// names the output directory (default: the config's `out_dir`).
    Report {
        #[command(flatten)]
        sessions: SessionArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("psm: {e}");
            ExitCode::from(e.code())
        }
    }
}
