use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use metacov::guidance::{DEFAULT_BUDGET, DEFAULT_PLATEAU_LIMIT};
use metacov::ingest::ArtifactFormat;
use metacov::metamorphic::DEFAULT_UNIT_CAP;
use metacov::Granularity;

/// Metamorphic coverage: the code that the two sides of a metamorphic test
/// pair execute differently.
///
/// Exit codes: 0 success, 1 unreadable or malformed input, 2 contract
/// violation (granularity or universe mismatch), 3 a policy flag such as
/// --fail-if-empty tripped. Set MC_NO_COLOR to disable styling.
#[derive(Debug, Parser)]
#[command(name = "mc", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// MC of a single pair of coverage artifacts.
    Pair(PairArgs),
    /// MC of every pair listed in a manifest.
    Suite(SuiteArgs),
    /// Check whether a report's suite MC touches the lines of a fix diff.
    Overlap(OverlapArgs),
    /// Statistics over metric samples.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Evaluate every relation of a built-in toy fixture.
    Demo(DemoArgs),
    /// Run coverage-guided (ccg) or MC-guided (mcg) generation on a toy target.
    Guide(GuideArgs),
    /// Print the numbered source of a built-in toy fixture.
    DumpProgram(DumpArgs),
}

#[derive(Debug, Args)]
pub struct OutputOpts {
    /// Output file; `-` is stdout.
    #[arg(short, long, default_value = "-")]
    pub out: String,
    /// Also print a human-readable table (to stderr when --out is stdout).
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Debug, Args)]
pub struct ReportOpts {
    /// Coverage granularity.
    #[arg(short, long, default_value = "line")]
    pub granularity: Granularity,
    /// Artifact format (lcov, json, bitmap); inferred from the extension by default.
    #[arg(long)]
    pub format: Option<ArtifactFormat>,
    /// Allow sides measured on different universes (warns instead of failing).
    #[arg(long)]
    pub no_strict: bool,
    /// Prefix removed from source paths before comparing units.
    #[arg(long)]
    pub strip_prefix: Option<String>,
    /// Bitmap length in bytes [default: 65536].
    #[arg(long)]
    pub map_size: Option<usize>,
    /// Maximum number of units listed per pair.
    #[arg(long, default_value_t = DEFAULT_UNIT_CAP)]
    pub unit_cap: usize,
    /// Exit with status 3 when the suite MC is empty.
    #[arg(long)]
    pub fail_if_empty: bool,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// Coverage artifacts of the source side.
    #[arg(short = 'a', long = "a", num_args = 1.., required = true)]
    pub side_a: Vec<PathBuf>,
    /// Coverage artifacts of the follow-up side.
    #[arg(short = 'b', long = "b", num_args = 1.., required = true)]
    pub side_b: Vec<PathBuf>,
    /// Pair id used in the report.
    #[arg(long, default_value = "t1")]
    pub id: String,
    #[command(flatten)]
    pub opts: ReportOpts,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    /// Pair manifest (JSON); relative paths resolve against its directory.
    pub manifest: PathBuf,
    #[command(flatten)]
    pub opts: ReportOpts,
}

#[derive(Debug, Args)]
pub struct OverlapArgs {
    /// Report written by `pair` or `suite` at line granularity.
    #[arg(long)]
    pub report: PathBuf,
    /// Unified diff of the fix.
    #[arg(long)]
    pub diff: PathBuf,
    /// Prefix removed from diff paths.
    #[arg(long)]
    pub strip_prefix: Option<String>,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct SampleInput {
    /// Samples as CSV (one column per sample) or JSON; `-` reads stdin.
    #[arg(short, long)]
    pub input: PathBuf,
    /// Input format; inferred from the extension, CSV otherwise.
    #[arg(long, value_enum)]
    pub format: Option<SampleFormat>,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Coefficient of variation (sample standard deviation over mean) per column.
    Cv {
        #[command(flatten)]
        input: SampleInput,
        /// Restrict to these columns.
        #[arg(long)]
        column: Vec<String>,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Pearson correlation between two columns.
    Pcc {
        #[command(flatten)]
        input: SampleInput,
        /// First column [default: the first column].
        #[arg(long)]
        x: Option<String>,
        /// Second column [default: the second column].
        #[arg(long)]
        y: Option<String>,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Seeded random subsets of a list of items.
    Subsets {
        /// Number of items, named 0..N-1.
        #[arg(long, conflicts_with = "items", required_unless_present = "items")]
        count: Option<usize>,
        /// File with one item per line.
        #[arg(long)]
        items: Option<PathBuf>,
        /// Subset sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Draws per size.
        #[arg(long, default_value_t = 50)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputOpts,
    },
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Fixture name, e.g. listing1 or abs_mr.
    pub fixture: String,
    #[arg(short, long, default_value = "line")]
    pub granularity: Granularity,
    /// Emit JSON instead of the table.
    #[arg(long)]
    pub json: bool,
    #[arg(short, long, default_value = "-")]
    pub out: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Ccg,
    Mcg,
    Both,
}

#[derive(Debug, Args)]
pub struct GuideArgs {
    /// Toy target.
    #[arg(long, default_value = "minieval")]
    pub target: String,
    #[arg(long, value_enum, default_value = "both")]
    pub policy: PolicyArg,
    /// RNG seed; repeatable [default: 1].
    #[arg(long)]
    pub seed: Vec<u64>,
    /// Inclusive seed range such as 1..10.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Iterations per run.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    /// Consecutive non-improving iterations before the target state mutates.
    #[arg(long, default_value_t = DEFAULT_PLATEAU_LIMIT)]
    pub plateau: usize,
    #[arg(short, long, default_value = "line")]
    pub granularity: Granularity,
    /// JSON summary file.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Event log (JSON Lines); a directory when several runs are requested.
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    pub fixture: String,
    /// Print the correct variant instead.
    #[arg(long)]
    pub reference: bool,
}
