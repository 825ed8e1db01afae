use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "trustcal", version, about = "Trust/workload POMDP pipeline")]
pub struct Cli {
    /// Worker threads for restarts and cross-validation (default: all cores).
    #[arg(long, global = true, env = "TRUSTCAL_JOBS")]
    pub jobs: Option<usize>,

    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to sequence data by multi-restart EM.
    Estimate(EstimateArgs),
    /// Rank action structures by cross-validated AIC.
    Select(SelectArgs),
    /// Compute a Q-MDP policy for a model.
    Solve(SolveArgs),
    /// Propagate state marginals under constant actions.
    StepResponse(StepResponseArgs),
    /// Evaluate a policy against a simulated human.
    Simulate(SimulateArgs),
    /// Run the HTTP interaction service until interrupted.
    Serve(ServeArgs),
    /// Write a synthetic study dataset.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NamedStructure {
    /// Trust: transparency, reliability. Workload: transparency, reliability, pedestrians.
    Paper,
    /// Reliability only for trust, nothing for workload.
    Minimal,
    /// Every dimension in both factors.
    Full,
}

#[derive(Debug, Args)]
pub struct StructureArgs {
    /// Named structure.
    #[arg(long, value_enum, conflicts_with_all = ["trust_dims", "workload_dims"])]
    pub structure: Option<NamedStructure>,

    /// Trust action dimensions, e.g. `transparency,reliability`.
    #[arg(long, requires = "workload_dims")]
    pub trust_dims: Option<String>,

    /// Workload action dimensions, or `none`.
    #[arg(long, requires = "trust_dims")]
    pub workload_dims: Option<String>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Sequence CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub structure: StructureArgs,
    #[arg(long, default_value_t = 1000)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop when the total log-likelihood improves by less than this.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Lower bound applied to every re-estimated probability.
    #[arg(long, default_value_t = 0.0)]
    pub prob_floor: f64,
    /// Model document output.
    #[arg(long, default_value = "model.twmodel")]
    pub out: PathBuf,
    /// Fit report output.
    #[arg(long, default_value = "fit-report.txt")]
    pub report: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StratifyArg {
    ParticipantCondition,
    Condition,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    #[arg(long, default_value_t = 24)]
    pub repeats: usize,
    /// EM restarts per training fit.
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = StratifyArg::ParticipantCondition)]
    pub stratify: StratifyArg,
    /// Candidate structures as `trust_dims:workload_dims` pairs, e.g.
    /// `reliability:none`. Default: all 128.
    #[arg(long = "candidate")]
    pub candidates: Vec<String>,
    #[arg(long, default_value = "selection.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Model document.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 25.0 / 26.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub vi_tol: f64,
    /// Reward table CSV (`trust,Rel_low,Rel_mid,Rel_high`). Default: calibration reward.
    #[arg(long)]
    pub reward: Option<PathBuf>,
    /// Context distribution CSV (`context,probability`). Default: uniform.
    #[arg(long)]
    pub context_dist: Option<PathBuf>,
    #[arg(long, default_value = "policy.twpolicy")]
    pub out: PathBuf,
    /// Policy grid CSV output.
    #[arg(long, default_value = "policy-grid.csv")]
    pub grid: PathBuf,
    #[arg(long, default_value_t = 21)]
    pub grid_resolution: usize,
}

#[derive(Debug, Args)]
pub struct StepResponseArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Action such as `AR_on+Rel_high+Traffic_low+Peds_absent`; repeatable.
    /// Default: all 24 actions.
    #[arg(long = "action")]
    pub actions: Vec<String>,
    /// Horizon in seconds (25 frames each).
    #[arg(long, conflicts_with = "frames", default_value_t = 10.0)]
    pub seconds: f64,
    /// Horizon in frames.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Initial joint distribution `p0,p1,p2,p3`. Default: model priors.
    #[arg(long)]
    pub initial: Option<String>,
    #[arg(long, default_value = "step-response")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model of the simulated human.
    #[arg(long)]
    pub model: PathBuf,
    /// Model used for belief tracking (default: same as `--model`).
    #[arg(long)]
    pub belief_model: Option<PathBuf>,
    /// Policy document.
    #[arg(long, required_unless_present = "fixed")]
    pub policy: Option<PathBuf>,
    /// Always show this transparency instead of following a policy.
    #[arg(long, conflicts_with = "policy")]
    pub fixed: Option<String>,
    /// Scenario CSV (`context,duration_frames`); one episode per row.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Random scenario: number of episodes.
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
    /// Random scenario: frames per episode.
    #[arg(long, default_value_t = 200)]
    pub episode_frames: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub reward: Option<PathBuf>,
    /// Keep the belief across episode boundaries instead of resetting.
    #[arg(long)]
    pub carry_belief: bool,
    #[arg(long, default_value_t = 0)]
    pub min_dwell: usize,
    #[arg(long, default_value = "metrics.json")]
    pub metrics: PathBuf,
    #[arg(long, default_value = "trace.csv")]
    pub trace: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Append-only per-session journals; existing journals are replayed on start.
    #[arg(long)]
    pub journal: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Model to sample from; a random model of `--structure` when omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub structure: StructureArgs,
    #[arg(long, default_value_t = 10)]
    pub participants: usize,
    #[arg(long, default_value_t = 3)]
    pub intersections: usize,
    #[arg(long, default_value_t = 200)]
    pub frames: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "data.csv")]
    pub out: PathBuf,
    /// Also write the generating model document here.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}
