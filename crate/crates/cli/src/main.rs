use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use kcmlab::chain::ChainKind;
use kcmlab::difficulty::{OracleParams, BUDGET_ENV, DEFAULT_BUDGET};
use kcmlab::droplet::{RingKind, SpreadMode, Q};
use kcmlab::family::{builtin, parse_family, UpdateFamily};
use kcmlab::geometry::Direction;

mod commands;
mod meta;

#[derive(Parser, Debug)]
#[command(name = "kcmlab", version, about = "Bootstrap percolation and kinetically constrained model experiments")]
struct Cli {
    /// Worker threads for trials and specs (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Stable set, difficulties and universality class of a family.
    Classify(ClassifyArgs),
    /// Median infection time of the origin on a torus, over a q grid.
    Bootstrap(BootstrapArgs),
    /// Mean first empty time of the origin under the constrained dynamics.
    Kcm(KcmArgs),
    /// Droplet growth checks on half-rings (critical) or rectangles (supercritical).
    Droplet(DropletArgs),
    /// Spectral checks on one-dimensional East and FA-1f chains.
    Chain(ChainArgs),
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct FamilySource {
    /// Name of a cataloged family (east1d-embedded, east2d, fa1f, fa2f, duarte, anisotropic).
    #[arg(long)]
    builtin: Option<String>,
    /// Path to a family file.
    #[arg(long)]
    family_file: Option<PathBuf>,
}

impl FamilySource {
    pub fn load(&self) -> Result<UpdateFamily> {
        match (&self.builtin, &self.family_file) {
            (Some(name), _) => Ok(builtin(name)?),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                parse_family(&text).with_context(|| format!("parsing {}", path.display()))
            }
            (None, None) => unreachable!("clap requires one family source"),
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct OracleArgs {
    /// Largest set size tried by the difficulty oracle.
    #[arg(long, default_value_t = 4)]
    bound: u32,
    /// Search window radius (default 8 times the rule radius).
    #[arg(long)]
    window: Option<i64>,
    /// Candidate sets closed per direction before giving up.
    #[arg(long, env = BUDGET_ENV, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
}

impl OracleArgs {
    pub fn params(&self, family: &UpdateFamily) -> OracleParams {
        let mut p = OracleParams::for_family(family);
        p.bound = self.bound;
        if let Some(w) = self.window {
            p.window_radius = w;
            p.line_span = 64.max(2 * w);
        }
        p.budget = self.budget;
        p
    }
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[command(flatten)]
    family: FamilySource,
    #[command(flatten)]
    oracle: OracleArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BootstrapArgs {
    #[command(flatten)]
    family: FamilySource,
    /// Comma-separated initial infection densities.
    #[arg(long, value_delimiter = ',', required = true)]
    q: Vec<f64>,
    #[arg(long, default_value_t = 64)]
    width: i64,
    #[arg(long, default_value_t = 64)]
    height: i64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Rounds after which a trial is censored.
    #[arg(long, default_value_t = 10_000)]
    t_max: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct KcmArgs {
    #[command(flatten)]
    family: FamilySource,
    /// Comma-separated equilibrium densities of empty sites.
    #[arg(long, value_delimiter = ',', required = true)]
    q: Vec<f64>,
    #[arg(long, default_value_t = 32)]
    width: i64,
    #[arg(long, default_value_t = 32)]
    height: i64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Time after which a trial is censored.
    #[arg(long, default_value_t = 1000.0)]
    t_max: f64,
    /// Also run the stationarity check up to this time (burn-in is half of it).
    #[arg(long)]
    horizon: Option<f64>,
    /// Run even when the family is subcritical.
    #[arg(long)]
    force: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DropletArgs {
    #[command(flatten)]
    family: FamilySource,
    #[command(flatten)]
    oracle: OracleArgs,
    /// Midpoint of the semicircle as `x,y` (default: the classifier's witness).
    #[arg(long, allow_hyphen_values = true)]
    u: Option<DirArg>,
    /// plain, elongated or generalized.
    #[arg(long, default_value = "plain")]
    kind: RingKind,
    /// Width in multiples of `u` (rational, e.g. 6 or 13/2).
    #[arg(long, default_value = "6")]
    w: Q,
    /// Length in multiples of `u⊥`.
    #[arg(long, default_value = "40")]
    l: Q,
    /// Extra length of an elongated ring.
    #[arg(long, default_value = "0")]
    extra: Q,
    /// advance-one, advance-width or corollary.
    #[arg(long, default_value = "advance-width")]
    mode: SpreadMode,
    /// Largest neighbourhood radius tried.
    #[arg(long, default_value_t = 32)]
    lambda_cap: i64,
    /// Rectangle sides for supercritical families.
    #[arg(long, default_value_t = 8)]
    n1: i64,
    #[arg(long, default_value_t = 8)]
    n2: i64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ChainArgs {
    /// east or fa1f.
    #[arg(long, default_value = "east")]
    kind: ChainKind,
    /// Chain lengths: comma-separated values or ranges like `1..8`.
    #[arg(long, value_delimiter = ',', default_value = "1..8")]
    n: Vec<Span>,
    #[arg(long, value_delimiter = ',', default_value = "0.3")]
    q: Vec<f64>,
    /// Any of relax, poincare, scaling, hitting.
    #[arg(long, value_delimiter = ',', default_value = "relax")]
    checks: Vec<Check>,
    /// Random generalized specs per chain length for the poincare check.
    #[arg(long, default_value_t = 50)]
    specs: usize,
    /// Random test functions per spec for the poincare check.
    #[arg(long, default_value_t = 200)]
    functions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirArg(pub Direction);

impl FromStr for DirArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `x,y`, got `{s}`"))?;
        let x = a.trim().parse::<i64>().map_err(|e| e.to_string())?;
        let y = b.trim().parse::<i64>().map_err(|e| e.to_string())?;
        Direction::new(x, y).map(DirArg).map_err(|e| e.to_string())
    }
}

/// One value or an inclusive range `a..b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Span(pub Vec<usize>);

impl FromStr for Span {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad length `{t}`: {e}"));
        match s.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
                if a > b {
                    return Err(format!("empty range `{s}`"));
                }
                Ok(Span((a..=b).collect()))
            }
            None => Ok(Span(vec![num(s)?])),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Relax,
    Poincare,
    Scaling,
    Hitting,
}

impl FromStr for Check {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "relax" => Ok(Check::Relax),
            "poincare" => Ok(Check::Poincare),
            "scaling" => Ok(Check::Scaling),
            "hitting" => Ok(Check::Hitting),
            _ => Err(format!("unknown check `{s}` (relax, poincare, scaling, hitting)")),
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global().context("configuring worker pool")?;
    }
    match cli.command {
        Command::Classify(a) => commands::classify(&a),
        Command::Bootstrap(a) => commands::bootstrap(&a),
        Command::Kcm(a) => commands::kcm(&a),
        Command::Droplet(a) => commands::droplet(&a),
        Command::Chain(a) => commands::chain(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
