use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[command(name = "semres", version, about, args_override_self = true)]
pub struct Cli {
    /// Output directory [default: out]. `replay` defaults to the directory of
    /// the recorded run.
    #[arg(long, global = true, env = "SEMRES_OUT")]
    pub out: Option<PathBuf>,

    /// Seed for every random stream; required by `mc` and `train`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Monte Carlo worker threads. The result depends on this count, so
    /// compare runs at equal `--workers`.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,

    /// File of `key = value` lines, one per flag (without the dashes).
    /// Flags given on the command line take precedence.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Closed-form (p_S, p_I) curves.
    Theory(TheoryArgs),
    /// Monte Carlo estimates over a resolution or item-count grid.
    Mc(McArgs),
    /// Train the toy autoencoder.
    Train(TrainArgs),
    /// Two-stimulus decision function over a probe grid.
    Profile(ProfileArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Theory(_) => "theory",
            Command::Mc(_) => "mc",
            Command::Train(_) => "train",
            Command::Profile(_) => "profile",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryArgs {
    /// Item counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub n: Vec<usize>,

    /// Noise level of the constant similarity.
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,

    /// Grid points per curve.
    #[arg(long, default_value_t = 101)]
    pub grid: usize,

    /// Linearly decaying similarity on the circle instead of the constant one.
    #[arg(long)]
    pub linear_decay: bool,

    /// `circle` sweeps `<b>` directly; `segment` and `torus` sweep the
    /// resolution over `[0, diameter]` and report the resulting moments.
    #[arg(long, default_value = "circle")]
    pub space: String,

    /// Quadrature nodes for ball-measure moments.
    #[arg(long, default_value_t = semres_core::spaces::DEFAULT_QUADRATURE_NODES)]
    pub nodes: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskArg {
    Similarity,
    Identification,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoringArg {
    /// Decision mass on the correct answer.
    Expected,
    /// Sampled 0/1 outcome.
    Sampled,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McArgs {
    /// `circle`, `segment`, `torus`, `discrete-circle:l=50`, `discrete-segment:l=50`.
    #[arg(long, default_value = "circle")]
    pub space: String,

    /// `constant:eps=0.25,delta=0`, `linear:eps=0.5`, `exp:mu=5,delta=0.1` or
    /// `table:path=<csv>` (headerless square matrix).
    #[arg(long)]
    pub sim: String,

    /// Item counts, comma separated. More than one value sweeps over `n`.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub n: Vec<usize>,

    /// Resolutions to sweep (constant and linear similarities only).
    #[arg(long, value_delimiter = ',')]
    pub eps: Vec<f64>,

    #[arg(long, value_enum, default_value = "both")]
    pub task: TaskArg,

    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,

    #[arg(long, value_enum, default_value = "expected")]
    pub scoring: ScoringArg,

    /// Add the closed-form value and the z-score of the estimate.
    #[arg(long)]
    pub compare_theory: bool,

    /// Quadrature nodes for `--compare-theory`.
    #[arg(long, default_value_t = semres_core::spaces::DEFAULT_QUADRATURE_NODES)]
    pub nodes: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossArg {
    Reconstruction,
    Semantic,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormArg {
    /// `-log D` of the correct reference.
    Nll,
    /// `-D / 2` of the correct reference.
    HalfD,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value = "semantic")]
    pub loss: LossArg,

    #[arg(long, value_enum, default_value = "nll")]
    pub form: FormArg,

    /// `discrete-circle:l=N` or `discrete-segment:l=N`.
    #[arg(long, default_value = "discrete-circle:l=50")]
    pub space: String,

    /// Number of stimuli; replaces the point count of `--space`.
    #[arg(long)]
    pub l: Option<usize>,

    /// Hidden dimension.
    #[arg(long, default_value_t = 10)]
    pub m: usize,

    #[arg(long, default_value_t = 500)]
    pub epochs: usize,

    #[arg(long, default_value_t = 2000)]
    pub samples_per_epoch: usize,

    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,

    #[arg(long, default_value_t = 0.0007)]
    pub lr: f64,

    #[arg(long, default_value_t = 0.0)]
    pub weight_decay: f64,

    #[arg(long, default_value_t = 0.0)]
    pub init_low: f64,

    #[arg(long, default_value_t = 2.0)]
    pub init_high: f64,

    /// Triplets per task in each epoch's evaluation.
    #[arg(long, default_value_t = 1000)]
    pub eval_trials: usize,

    /// Save the similarity profile every this many epochs (0 disables).
    #[arg(long, default_value_t = 50)]
    pub profile_every: usize,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileArgs {
    #[arg(long, default_value = "circle")]
    pub space: String,

    #[arg(long)]
    pub sim: String,

    /// First stimulus: a coordinate, `x,y` on the torus, or an index.
    #[arg(long, allow_hyphen_values = true)]
    pub x1: String,

    /// Second stimulus.
    #[arg(long, allow_hyphen_values = true)]
    pub x2: String,

    /// Probes per axis (ignored on discrete spaces, which use every point).
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
}
