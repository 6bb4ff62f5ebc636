//! Command-line entrypoint binding the pipeline stages: ingest, extract,
//! train, generate (model or baselines), eval, and metric emission.
//!
//! Exit codes: 0 success, 2 input error, 3 data-validation error,
//! 4 budget exhaustion, 1 internal fault.
//!
//! Configuration precedence is flag > config file > built-in default. The
//! config file is plain `key = value` lines (keys are the long flag names
//! without the leading dashes); every effective value is echoed into the
//! stage manifest.

mod commands;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

/// A failed command: exit code plus a diagnostic for stderr.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    pub fn budget(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_BUDGET,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<crate::graph::GraphError> for CliError {
    fn from(e: crate::graph::GraphError) -> Self {
        use crate::graph::GraphError::*;
        match e {
            Io(io) => CliError::input(io.to_string()),
            other => CliError::data(other.to_string()),
        }
    }
}

impl From<crate::ingest::IngestError> for CliError {
    fn from(e: crate::ingest::IngestError) -> Self {
        use crate::ingest::IngestError::*;
        match e {
            Io(io) => CliError::input(io.to_string()),
            Graph(g) => g.into(),
            other => CliError::data(other.to_string()),
        }
    }
}

impl From<crate::community::CommunityError> for CliError {
    fn from(e: crate::community::CommunityError) -> Self {
        use crate::community::CommunityError::*;
        match e {
            InvalidBounds { .. } => CliError::input(e.to_string()),
            PartitionSize { .. } => CliError::internal(e.to_string()),
        }
    }
}

impl From<crate::baselines::BaselineError> for CliError {
    fn from(e: crate::baselines::BaselineError) -> Self {
        use crate::baselines::BaselineError::*;
        match e {
            SampleBudget(_) => CliError::budget(e.to_string()),
            DegenerateSamples { .. } => CliError::data(e.to_string()),
            other => CliError::input(other.to_string()),
        }
    }
}

impl From<crate::dggm::SequenceError> for CliError {
    fn from(e: crate::dggm::SequenceError) -> Self {
        use crate::dggm::SequenceError::*;
        match e {
            EmptyCorpus => CliError::input(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<crate::dggm::TrainError> for CliError {
    fn from(e: crate::dggm::TrainError) -> Self {
        use crate::dggm::TrainError::*;
        match e {
            EmptyCorpus => CliError::input(e.to_string()),
            DisconnectedGraph { .. } | NonFiniteLoss { .. } => CliError::data(e.to_string()),
            Model(m) => CliError::input(m.to_string()),
            Sequence(s) => s.into(),
            Adam(a) => CliError::internal(a.to_string()),
        }
    }
}

impl From<crate::dggm::CheckpointError> for CliError {
    fn from(e: crate::dggm::CheckpointError) -> Self {
        use crate::dggm::CheckpointError::*;
        match e {
            Io(io) => CliError::input(io.to_string()),
            other => CliError::data(other.to_string()),
        }
    }
}

impl From<crate::synth::SynthError> for CliError {
    fn from(e: crate::synth::SynthError) -> Self {
        use crate::synth::SynthError::*;
        match e {
            BudgetExhausted { .. } => CliError::budget(e.to_string()),
            Invalid(_) => CliError::input(e.to_string()),
            Sequence(s) => CliError::internal(s.to_string()),
        }
    }
}

impl From<crate::eval::EvalError> for CliError {
    fn from(e: crate::eval::EvalError) -> Self {
        use crate::eval::EvalError::*;
        match e {
            EmptySide { .. } | EmptySet => CliError::data(e.to_string()),
            BadSigma(_) | Invalid(_) => CliError::input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "topoforge",
    version,
    about = "Intra-AS graph pipeline: ingest, extract, train, generate, evaluate"
)]
pub struct Cli {
    /// Key-value configuration file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse links / router-AS / geo files into per-AS edge lists.
    Ingest(IngestArgs),
    /// Recursively split large graphs into size-bounded training graphs.
    Extract(ExtractArgs),
    /// Train the generative model on a directory of edge lists.
    Train(TrainArgs),
    /// Synthesize graphs from a trained model checkpoint.
    Generate(GenerateArgs),
    /// Generate preferential-attachment baseline corpora.
    GenerateBaseline(GenerateBaselineArgs),
    /// Bootstrap-MMD comparison of two graph corpora.
    Eval(EvalArgs),
    /// Per-graph scalar metrics as CSV scatter data.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Links file: `<link_id>: <member> <member> ...`
    #[arg(long)]
    links: PathBuf,
    /// Router-to-AS table: `<router_id> <as_number>`
    #[arg(long = "router-as")]
    router_as: PathBuf,
    /// Optional geolocation table: `<router_id> <lat> <lon>`
    #[arg(long)]
    geo: Option<PathBuf>,
    /// Fail on the first malformed line instead of skipping it.
    #[arg(long)]
    strict: bool,
    /// Output directory for `as<asn>.edges` files and the manifest.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// Directory of `*.edges` inputs.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Accept subgraphs with more than this many nodes [default: 12].
    #[arg(long)]
    min: Option<usize>,
    /// Accept subgraphs with at most this many nodes [default: 250].
    #[arg(long)]
    max: Option<usize>,
    /// RNG seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Directory of training edge lists.
    #[arg(long = "in")]
    input: PathBuf,
    /// Checkpoint file to write.
    #[arg(long)]
    out: PathBuf,
    /// Validation corpus directory (enables best-checkpoint selection).
    #[arg(long)]
    val: Option<PathBuf>,
    /// Epochs between validation evaluations [default: 10].
    #[arg(long = "val-interval")]
    val_interval: Option<usize>,
    /// Training epochs [default: 500].
    #[arg(long)]
    epochs: Option<usize>,
    /// Mini-batch size [default: 40].
    #[arg(long)]
    batch: Option<usize>,
    /// Initial learning rate [default: 0.003].
    #[arg(long)]
    lr: Option<f64>,
    /// Learning-rate decay factor [default: 0.3].
    #[arg(long = "lr-decay")]
    lr_decay: Option<f64>,
    /// Comma-separated epochs after which the rate decays [default: 300,400].
    #[arg(long = "decay-epochs")]
    decay_epochs: Option<String>,
    /// Global gradient-norm clip [default: 5].
    #[arg(long = "grad-clip")]
    grad_clip: Option<f64>,
    /// Window width M; estimated from the corpus when omitted.
    #[arg(long = "dim-m")]
    dim_m: Option<usize>,
    /// Graph-level state width L [default: 64].
    #[arg(long = "dim-l")]
    dim_l: Option<usize>,
    /// Edge-level state width [default: L/2].
    #[arg(long = "dim-edge")]
    dim_edge: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Training history CSV [default: <out>.history.csv].
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Trained model checkpoint.
    #[arg(long)]
    model: PathBuf,
    /// Number of graphs to synthesize [default: 100].
    #[arg(long)]
    count: Option<usize>,
    /// Inclusive node-count range `MIN..MAX` [default: 12..250].
    #[arg(long)]
    sizes: Option<String>,
    /// File with one allowed node count per line (overrides --sizes).
    #[arg(long = "size-list")]
    size_list: Option<PathBuf>,
    /// Threshold policy: per-node or per-graph [default: per-node].
    #[arg(long)]
    tau: Option<String>,
    /// Stop a run early when a node emits an all-zero window.
    #[arg(long = "early-stop")]
    early_stop: bool,
    /// Free-run budget [default: 200 * count].
    #[arg(long = "max-attempts")]
    max_attempts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GenerateBaselineArgs {
    /// Generator family: ba, eba, dba, or bb.
    #[arg(long)]
    kind: String,
    /// Number of graphs [default: 100].
    #[arg(long)]
    count: Option<usize>,
    /// Smallest node count [default: 12].
    #[arg(long)]
    min: Option<usize>,
    /// Largest node count [default: 250].
    #[arg(long)]
    max: Option<usize>,
    /// Node-count gamma as `shape,scale,location`
    /// [default: 0.852,59.64,11.99].
    #[arg(long)]
    gamma: Option<String>,
    /// Fit the node-count gamma to the node counts of this corpus instead.
    #[arg(long = "gamma-from")]
    gamma_from: Option<PathBuf>,
    /// Links per arriving node [default: 2].
    #[arg(long = "m-links")]
    m_links: Option<usize>,
    /// EBA event probabilities `p_ba,p_add,p_rewire` [default: 0.5,0.25,0.25].
    #[arg(long = "eba-probs")]
    eba_probs: Option<String>,
    /// DBA single-link probability [default: 0.35].
    #[arg(long = "dba-p-single")]
    dba_p_single: Option<f64>,
    /// BB fitness spec: `uniform:LO,HI` or `constant:V` [default: uniform:0,1].
    #[arg(long = "bb-fitness")]
    bb_fitness: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Directory of reference graphs.
    #[arg(long)]
    real: PathBuf,
    /// Directory of graphs to score.
    #[arg(long)]
    synth: PathBuf,
    /// Comma-separated metric list
    /// [default: degree,clustering,betweenness,assortativity].
    #[arg(long)]
    metrics: Option<String>,
    /// Graphs sampled per side per repetition [default: 500].
    #[arg(long)]
    samples: Option<usize>,
    /// Bootstrap repetitions [default: 100].
    #[arg(long)]
    reps: Option<usize>,
    /// Kernel bandwidth; median heuristic when omitted.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report JSON path; histogram CSVs are written alongside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// Directory of `*.edges` inputs.
    #[arg(long = "in")]
    input: PathBuf,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
}

/// Values from the config file plus echo of every resolved setting.
pub(crate) struct Settings {
    file: BTreeMap<String, String>,
    pub effective: BTreeMap<String, String>,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut file = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::input(format!("cannot read config {}: {e}", path.display()))
            })?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::input(format!(
                        "config {} line {}: expected `key = value`",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                file.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Settings {
            file,
            effective: BTreeMap::new(),
        })
    }

    /// flag > config file > default, echoing the winner.
    pub fn resolve<T>(&mut self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr + ToString,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(raw) => raw.parse::<T>().map_err(|_| {
                    CliError::input(format!("config key `{key}`: cannot parse `{raw}`"))
                })?,
                None => default,
            },
        };
        self.effective.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Same, for settings with no default.
    pub fn resolve_opt<T>(&mut self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr + ToString,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(raw) => Some(raw.parse::<T>().map_err(|_| {
                    CliError::input(format!("config key `{key}`: cannot parse `{raw}`"))
                })?),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.effective.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }
}

/// Parse and execute; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version bubble out as "errors" with successful status
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let settings = match Settings::load(cli.config.as_deref()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("topoforge: {}", e.message);
            return e.code;
        }
    };
    let result = match cli.command {
        Command::Ingest(args) => commands::ingest(args, settings),
        Command::Extract(args) => commands::extract(args, settings),
        Command::Train(args) => commands::train(args, settings),
        Command::Generate(args) => commands::generate(args, settings),
        Command::GenerateBaseline(args) => commands::generate_baseline(args, settings),
        Command::Eval(args) => commands::eval(args, settings),
        Command::Metrics(args) => commands::metrics(args, settings),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("topoforge: {}", e.message);
            e.code
        }
    }
}
