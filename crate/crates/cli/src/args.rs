//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

const BURN_IN_HELP: &str = "Burn-in is the first step m after which the trajectory stays within \
2 stationary standard deviations of the stationary mean for 50 consecutive steps. \
Stationary moments come from the final third of a long reference run.";

#[derive(Debug, Parser)]
#[command(name = "mvchain", version, about = "Simulate and diagnose Polya-driven measure-valued Markov chains")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct GlobalArgs {
    /// Master seed; every random quantity derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// JSON object of flag values; explicit flags win over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Also write wall-clock timings to timing.json.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one of the chains and write its trajectory.
    SimulateChain(SimulateArgs),
    /// Mixed moments of Polya cell proportions: closed form, exact sum, Monte Carlo.
    Moments(MomentsArgs),
    /// Small-set radius, drift check, minorization bound and empirical TV decay.
    Diagnose(DiagnoseArgs),
    /// Newton's recursive estimate of a mixing density.
    Newton(NewtonArgs),
    /// Mean chains under a uniform(0,1) base: trajectories and burn-in table.
    #[command(after_help = BURN_IN_HELP)]
    Example1(Example1Args),
    /// Mean chains under a N(0,1) base from several starting points.
    #[command(after_help = BURN_IN_HELP)]
    Example2(Example2Args),
    /// Gaussian mixture density chains started from N(-3,1).
    Example3(Example3Args),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ChainKind {
    /// Mean functional M_m (`m,value`).
    Mean,
    /// Linear functional of g (`m,value`).
    Functional,
    /// Full measure P_m (`m,atom,weight`).
    Measure,
    /// Mixture density f_m on a grid (`x,f` per snapshot).
    Density,
    /// The exchangeable-sequence chain Q_m (`m,atom,weight`).
    Qn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SourceKind {
    Polya,
    Iid,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "mean")]
    pub kind: ChainKind,

    /// Block size.
    #[arg(long, default_value_t = 1)]
    pub n: usize,

    /// Total mass of the base measure.
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,

    /// Base family: uniform:LO,HI | gaussian:MEAN,SD | cauchy:LOC,SCALE | discrete:X1,X2,.../P1,P2,...
    #[arg(long, default_value = "uniform:0,1")]
    pub base: String,

    #[arg(long, default_value_t = 100)]
    pub steps: usize,

    /// Starting value M_0 (the point mass P_0 = δ_{M_0}).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub m0: f64,

    /// Functional for --kind functional: identity | square | abs | power:P | indicator:C (1{x <= C}).
    #[arg(long, default_value = "identity")]
    pub g: String,

    /// Independent replicas; with more than one, files get a _rK suffix.
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,

    /// Innovation weights below this are dropped.
    #[arg(long, default_value_t = 1e-15)]
    pub prune_threshold: f64,

    /// Record every k-th step of measure trajectories.
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,

    /// Driving sequence for --kind qn.
    #[arg(long, value_enum, default_value = "polya")]
    pub source: SourceKind,

    /// Kernel for --kind density: gaussian:SD | laplace:SCALE.
    #[arg(long, default_value = "gaussian:1")]
    pub kernel: String,

    /// Density grid LO,HI,POINTS.
    #[arg(long, default_value = "-10,10,801", allow_hyphen_values = true)]
    pub grid: String,

    /// Kernel location of the initial density f_0 = k(., THETA).
    #[arg(long, default_value_t = -3.0, allow_negative_numbers = true)]
    pub f0_theta: f64,

    /// Steps at which density snapshots are written.
    #[arg(long, value_delimiter = ',', default_value = "1,100,1000")]
    pub snapshots: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    /// Block sizes; one row per (n, orders).
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,

    /// Total mass; must equal the sum of --masses within 1e-9.
    #[arg(long)]
    pub a: Option<f64>,

    /// Cell masses α(B_1),...,α(B_k).
    #[arg(long, value_delimiter = ',', required = true)]
    pub masses: Vec<f64>,

    /// Order vectors r_1,...,r_k; separate several with ';'.
    #[arg(long, conflicts_with = "max_order")]
    pub orders: Option<String>,

    /// Instead of --orders, every order vector with entries up to this value.
    #[arg(long)]
    pub max_order: Option<usize>,

    /// Monte Carlo replicas of Q_n (needs --seed; 0 disables).
    #[arg(long, default_value_t = 100_000)]
    pub mc_samples: usize,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub n: usize,

    #[arg(long)]
    pub a: f64,

    /// Base family (see simulate-chain); needed for the drift and TV checks.
    #[arg(long)]
    pub base: Option<String>,

    /// E|Y|^s of the base; computed from --base when omitted.
    #[arg(long)]
    pub mean_abs_y: Option<f64>,

    /// Drift rate; defaults to the midpoint of the admissible interval.
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Exponent of the drift function V(x) = 1 + |x|^s.
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,

    /// Bound on |f'_T| used by the minorization constant.
    #[arg(long)]
    pub k_deriv: Option<f64>,

    /// Reference block size for the uniform minorization bound.
    #[arg(long)]
    pub n0: Option<usize>,

    #[arg(long, default_value_t = 41)]
    pub drift_points: usize,

    /// One-step transitions per drift grid point.
    #[arg(long, default_value_t = 20_000)]
    pub mc_samples: usize,

    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32")]
    pub tv_checkpoints: Vec<usize>,

    #[arg(long, default_value_t = 10_000)]
    pub tv_replicas: usize,

    #[arg(long, default_value_t = 100)]
    pub tv_bins: usize,

    /// Starting value of the chains in the TV curve.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub m0: f64,
}

#[derive(Debug, Args)]
pub struct NewtonArgs {
    /// Observations, one real per line.
    #[arg(long)]
    pub data: PathBuf,

    /// gaussian:SD | laplace:SCALE.
    #[arg(long, default_value = "gaussian:1")]
    pub kernel: String,

    /// Parameter grid LO,HI[,POINTS]; defaults to the data range widened by 3 kernel spreads.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,

    /// one-over-i | custom:W1,W2,...
    #[arg(long, default_value = "one-over-i")]
    pub schedule: String,

    /// Also write the predictive density after every update on LO,HI,POINTS.
    #[arg(long, allow_hyphen_values = true)]
    pub predictive_grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct Example1Args {
    #[arg(long, value_delimiter = ',', default_value = "10,50,100")]
    pub a: Vec<f64>,

    #[arg(long, value_delimiter = ',', default_value = "1,2,10,20")]
    pub n: Vec<usize>,

    #[arg(long, default_value_t = 500)]
    pub m_max: usize,

    /// Independent trajectories per (a, n); the burn-in table averages over them.
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,

    #[arg(long, default_value_t = 30_000)]
    pub reference_steps: usize,

    /// Block sizes timed after the run; timings go to stderr, and to timing.json with --timing.
    #[arg(long, value_delimiter = ',', default_value = "1,2,10,20,100")]
    pub timing_n: Vec<usize>,

    #[arg(long, default_value_t = 500)]
    pub timing_iterations: usize,
}

#[derive(Debug, Args)]
pub struct Example2Args {
    #[arg(long, default_value_t = 10.0)]
    pub a: f64,

    #[arg(long, value_delimiter = ',', default_value = "1,10,20")]
    pub n: Vec<usize>,

    #[arg(long, value_delimiter = ',', default_value = "-3,0,3", allow_hyphen_values = true)]
    pub starts: Vec<f64>,

    #[arg(long, default_value_t = 500)]
    pub m_max: usize,

    /// Independent chains per (n, start) whose final states feed the KS comparison.
    #[arg(long, default_value_t = 500)]
    pub replicas: usize,

    #[arg(long, default_value_t = 30_000)]
    pub reference_steps: usize,
}

#[derive(Debug, Args)]
pub struct Example3Args {
    #[arg(long, value_delimiter = ',', default_value = "1,100")]
    pub a: Vec<f64>,

    #[arg(long, value_delimiter = ',', default_value = "1,2,10,20")]
    pub n: Vec<usize>,

    #[arg(long, value_delimiter = ',', default_value = "1,100,1000")]
    pub snapshots: Vec<usize>,

    /// Independent draws of the density path per (a, n).
    #[arg(long, default_value_t = 1)]
    pub draws: usize,

    /// Evaluation grid LO,HI,POINTS.
    #[arg(long, default_value = "-10,10,801", allow_hyphen_values = true)]
    pub grid: String,
}
