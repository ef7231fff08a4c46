use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use redsim_core::policies::PolicyKind;
use redsim_core::simqueue::Preset;

/// Redundancy scheduling toolkit: block designs, overlap indicators, urn
/// experiments and a cancel-on-start queueing simulator.
#[derive(Parser, Debug)]
#[command(name = "redsim", version, about)]
pub struct RunConfig {
    /// Flat key=value file of default flags; keys are long flag names and
    /// explicit flags win over the file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the cyclic (n, r, 1) design with block size r
    Design(DesignArgs),
    /// Analytic LBF, ROF and RDF of a policy
    Indicators(IndicatorArgs),
    /// Monte Carlo urn experiment (T rounds of r-subset draws)
    Urns(UrnArgs),
    /// Simulate the queueing system at one arrival rate
    Simulate(SimulateArgs),
    /// Simulate every policy over a grid of arrival rates
    Sweep(SweepArgs),
    /// Write plot data for the figure presets fig2 ... fig8
    Figures(FigureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    #[value(alias = "json-lines", alias = "json")]
    Jsonl,
    Table,
}

#[derive(Args, Debug, Clone, Default)]
pub struct OutputArgs {
    /// Output format (default: table on stdout, csv when writing a file)
    #[arg(long, value_enum)]
    pub format: Option<Format>,

    /// Emit CSV, to PATH when given
    #[arg(long, num_args = 0..=1, value_name = "PATH")]
    pub csv: Option<Option<PathBuf>>,

    /// Emit JSON
    #[arg(long)]
    pub json: bool,

    /// Write output to PATH instead of stdout
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

impl OutputArgs {
    pub fn path(&self) -> Option<&PathBuf> {
        match &self.csv {
            Some(Some(p)) => Some(p),
            _ => self.output.as_ref(),
        }
    }

    pub fn format(&self) -> Format {
        if self.csv.is_some() {
            Format::Csv
        } else if self.json {
            Format::Jsonl
        } else if let Some(f) = self.format {
            f
        } else if self.output.is_some() {
            Format::Csv
        } else {
            Format::Table
        }
    }
}

/// One policy or `all`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicySet(pub Vec<PolicyKind>);

impl Default for PolicySet {
    fn default() -> Self {
        PolicySet(PolicyKind::ALL.to_vec())
    }
}

pub fn parse_policy_set(s: &str) -> Result<PolicySet, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(PolicySet::default());
    }
    let mut out = Vec::new();
    for part in s.split(',') {
        let kind: PolicyKind = part.trim().parse()?;
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    Ok(PolicySet(out))
}

#[derive(Args, Debug)]
pub struct DesignArgs {
    /// Block size; the design has n = r(r-1)+1 points and blocks
    #[arg(long)]
    pub r: usize,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct IndicatorArgs {
    /// random, round-robin, bibd, a comma list, or all
    #[arg(long, value_parser = parse_policy_set)]
    pub policy: PolicySet,

    #[arg(long)]
    pub r: usize,

    /// Number of servers (default r(r-1)+1)
    #[arg(long)]
    pub n: Option<usize>,

    /// Number of rounds; omitted means the T -> infinity limit
    #[arg(long = "T", alias = "t", value_name = "T")]
    pub t: Option<u64>,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct UrnArgs {
    #[arg(long, value_parser = parse_policy_set)]
    pub policy: PolicySet,

    /// Number of urns (default r(r-1)+1)
    #[arg(long)]
    pub n: Option<usize>,

    #[arg(long)]
    pub r: usize,

    /// Rounds per replication
    #[arg(long = "T", alias = "t", value_name = "T", default_value_t = 50)]
    pub t: u64,

    #[arg(long, default_value_t = 100)]
    pub reps: usize,

    #[arg(long, env = "REDSIM_SEED", default_value_t = 0)]
    pub seed: u64,

    #[command(flatten)]
    pub out: OutputArgs,
}

/// Queueing parameters shared by `simulate` and `sweep`.
#[derive(Args, Debug, Clone)]
pub struct QueueArgs {
    /// Take (n, r, mu1, q, p) from a named experiment
    #[arg(long)]
    pub preset: Option<Preset>,

    #[arg(long)]
    pub n: Option<usize>,

    #[arg(long)]
    pub r: Option<usize>,

    /// Service rate of short jobs
    #[arg(long)]
    pub mu1: Option<f64>,

    /// Long/short mean service ratio
    #[arg(long)]
    pub q: Option<f64>,

    /// Probability that a job is long
    #[arg(long = "p-long", alias = "p")]
    pub p_long: Option<f64>,

    #[arg(long, env = "REDSIM_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Jobs discarded at the start of each replication
    #[arg(long, default_value_t = 10_000)]
    pub warmup: usize,

    /// Jobs measured per replication
    #[arg(long, default_value_t = 100_000)]
    pub jobs: usize,

    #[arg(long, default_value_t = 20)]
    pub reps: usize,

    /// Stop with an underrun error if simulated time passes this value
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_policy_set)]
    pub policy: PolicySet,

    #[command(flatten)]
    pub queue: QueueArgs,

    /// Poisson arrival rate
    #[arg(long, conflicts_with = "rho", required_unless_present = "rho")]
    pub lambda: Option<f64>,

    /// Target utilization, converted to an arrival rate
    #[arg(long)]
    pub rho: Option<f64>,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Grid {
    Low,
    High,
    Both,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_parser = parse_policy_set, default_value = "all")]
    pub policy: PolicySet,

    #[command(flatten)]
    pub queue: QueueArgs,

    /// Arrival rates; defaults to the preset's utilization grid
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,

    /// Which default grid to use when --lambdas is absent
    #[arg(long, value_enum, default_value_t = Grid::Both)]
    pub grid: Grid,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct FigureArgs {
    /// fig2 ... fig8, a comma list, or all
    #[arg(long, default_value = "all")]
    pub preset: String,

    /// Directory for the CSV files
    #[arg(long, default_value = "figures")]
    pub out_dir: PathBuf,

    #[arg(long, env = "REDSIM_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Rounds for the urn figures and the random-policy LBF curve
    #[arg(long = "T", alias = "t", value_name = "T", default_value_t = 50)]
    pub t: u64,

    /// Urn counts for fig2 and fig3
    #[arg(long, value_delimiter = ',', default_value = "10,21,50")]
    pub n_list: Vec<usize>,

    /// Replications of the urn experiment
    #[arg(long, default_value_t = 1000)]
    pub urn_reps: usize,

    /// Largest r in fig4
    #[arg(long, default_value_t = 10)]
    pub r_max: usize,

    /// Override q for the queueing figures, e.g. 15 for fig8
    #[arg(long)]
    pub q: Option<f64>,

    #[arg(long, default_value_t = 10_000)]
    pub warmup: usize,

    #[arg(long, default_value_t = 100_000)]
    pub jobs: usize,

    #[arg(long, default_value_t = 20)]
    pub reps: usize,
}
