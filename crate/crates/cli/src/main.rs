mod commands;
mod plot;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::Ctx;

/// Experiment driver for the reduction pipelines: SAT extraction
/// through auction menus, tie-breaking, coverage decisions, and
/// multi-unit splits, plus the supporting property and statistics
/// suites.
///
/// Exit codes: 0 on success or a positive verdict (SAT found, YES
/// decided, audit clean, bounds met), 1 on a negative verdict, 2 on
/// any error.
#[derive(Parser)]
#[command(name = "auctionkit", version, max_term_width = 100)]
struct Cli {
    /// Overrides every seed, whether it came from a flag or a config
    /// file. The AUCTIONKIT_MASTER_SEED environment variable does the
    /// same at lower precedence.
    #[arg(long, global = true, value_name = "SEED")]
    master_seed: Option<u64>,

    /// Worker threads for subcommands that fan out over independent
    /// units (claim25 levels, reduce-cpp instances). Per-unit seeds
    /// are fixed up front and results merge in input order, so
    /// reports do not depend on the pool size.
    #[arg(long, global = true, default_value_t = 1, value_name = "N")]
    workers: usize,

    /// Report destination; stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the structural property suite over the valuation families.
    #[command(name = "props")]
    Props(PropsArgs),
    /// Decide a CNF formula through a combinatorial-auction mechanism.
    #[command(name = "reduce-ca")]
    ReduceCa(ReduceCaArgs),
    /// Decide a CNF formula through deterministic tie-breaking.
    #[command(name = "reduce-tie")]
    ReduceTie(ReduceTieArgs),
    /// Decide certified cover instances through a public-project
    /// mechanism.
    #[command(name = "reduce-cpp")]
    ReduceCpp(ReduceCppArgs),
    /// Decide a CNF formula through a multi-unit mechanism, or check
    /// the single-minded split rate.
    #[command(name = "reduce-mua")]
    ReduceMua(ReduceMuaArgs),
    /// Enumerate a structured submenu and probe bundle candidacy.
    #[command(name = "menu")]
    Menu(MenuArgs),
    /// Audit a mechanism's truthfulness against a misreport family.
    #[command(name = "audit")]
    Audit(AuditArgs),
    /// Measure projection-family hit statistics against their bounds.
    #[command(name = "claim25")]
    Claim25(Claim25Args),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteKind {
    /// Every family: bonus draws plus coverage draws.
    Structural,
    /// Alias of structural; every case asserts monotone and
    /// submodular marginals.
    Submodularity,
    /// Bonus-valuation draws only.
    Bonus,
    /// Coverage-valuation draws only.
    Coverage,
}

#[derive(Args)]
pub struct PropsArgs {
    /// Which case families to draw.
    #[arg(long, value_enum, default_value_t = SuiteKind::Structural)]
    pub suite: SuiteKind,
    /// Ground-set ceiling for the bonus draws.
    #[arg(long, default_value_t = 10, value_name = "M")]
    pub max_m: usize,
    /// Number of seeded bonus-valuation cases.
    #[arg(long, default_value_t = 200, value_name = "N")]
    pub bonus_cases: usize,
    /// Number of seeded coverage-valuation cases.
    #[arg(long, default_value_t = 24, value_name = "N")]
    pub coverage_cases: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct ReduceCaArgs {
    /// CNF formula in DIMACS format.
    #[arg(long, value_name = "PATH")]
    pub formula: PathBuf,
    /// Mechanism name: vcg, greedy, dictator:<i>, or cpp:<k>.
    #[arg(long, value_name = "NAME")]
    pub mech: String,
    /// Full pipeline configuration as JSON; when omitted, a default
    /// two-bidder market with two blank items is derived from the
    /// formula.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the config's outer sweep count.
    #[arg(long, value_name = "N")]
    pub repeats: Option<usize>,
    /// Overrides the config's seed.
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct ReduceTieArgs {
    /// CNF formula in DIMACS format; its variable count must match
    /// the advice code's message length.
    #[arg(long, value_name = "PATH")]
    pub formula: PathBuf,
    /// Mechanism name; cpp:<k> matches the carrier the advice builds.
    #[arg(long, value_name = "NAME")]
    pub mech: String,
    /// Advice JSON: {"j", "alpha", "lambda", "beta", "code"}.
    #[arg(long, value_name = "PATH")]
    pub advice: PathBuf,
    /// Polar-market size exponent; 0 runs the single-bidder mode.
    #[arg(long, default_value_t = 0, value_name = "L")]
    pub ell: usize,
    /// Items per block; defaults to the exact carrier size
    /// 2 * m_code * 2^j.
    #[arg(long, value_name = "N")]
    pub m0: Option<usize>,
    #[arg(long, default_value_t = 4, value_name = "N")]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct ReduceCppArgs {
    /// Cover instance JSON; repeat for a batch.
    #[arg(long, value_name = "PATH", required = true)]
    pub instance: Vec<PathBuf>,
    /// Decision configuration as JSON; defaults to c = 1/2,
    /// epsilon = 1/100, p_m = 0, 5 trials.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Mechanism for every instance; defaults to cpp:<k> with each
    /// instance's own k.
    #[arg(long, value_name = "NAME")]
    pub mech: Option<String>,
    /// Certify instances stamped "unknown" by exhaustive search
    /// before deciding, using this NO coverage threshold (e.g. 5/6).
    #[arg(long, value_name = "RAT")]
    pub certify_threshold: Option<String>,
}

#[derive(Args)]
pub struct ReduceMuaArgs {
    /// CNF formula in DIMACS format; required unless --lemma52 is
    /// given.
    #[arg(long, value_name = "PATH")]
    pub formula: Option<PathBuf>,
    /// Mechanism name: midr or uniform-split.
    #[arg(long, default_value = "midr", value_name = "NAME")]
    pub mech: String,
    /// Supply size; must be a power of two. Defaults to 2^(variable
    /// count).
    #[arg(long, value_name = "M")]
    pub m: Option<u64>,
    /// Trial budget; defaults to 8 for extraction and 200 for the
    /// split check.
    #[arg(long, value_name = "N")]
    pub trials: Option<usize>,
    /// Check the single-minded split (x, m - x) rate instead of
    /// extracting an assignment.
    #[arg(long, value_name = "X")]
    pub lemma52: Option<u64>,
    /// Rate bound parameter for --lemma52; the pass threshold is
    /// 2 * epsilon.
    #[arg(long, default_value = "1/4", value_name = "RAT")]
    pub epsilon: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct MenuArgs {
    /// Mechanism name: vcg, greedy, dictator:<i>, or cpp:<k>.
    #[arg(long, value_name = "NAME")]
    pub mech: String,
    /// JSON array of valuations for the non-special bidders.
    #[arg(long, value_name = "PATH")]
    pub bidders: PathBuf,
    /// Ground-set size.
    #[arg(long, value_name = "M")]
    pub m: usize,
    /// Position of the special bidder among the others.
    #[arg(long, default_value_t = 0, value_name = "I")]
    pub special: usize,
    /// Submenu bundle size.
    #[arg(long, value_name = "K")]
    pub k: usize,
    /// Submenu price level, e.g. 3/2.
    #[arg(long, value_name = "RAT")]
    pub p: String,
    /// Bundle to probe through black-box runs, as comma-separated
    /// item indices (e.g. 0,2,3); repeatable.
    #[arg(long, value_name = "ITEMS")]
    pub probe: Vec<String>,
    /// Append each probe's transcript here, one JSON step per line.
    #[arg(long, value_name = "PATH")]
    pub transcripts: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct AuditArgs {
    /// Audit configuration as JSON: mechanism, market, epsilon,
    /// bidders, misreports.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Monte Carlo trial count for mechanisms without exact
    /// distributions; overrides the config.
    #[arg(long, value_name = "N")]
    pub trials: Option<usize>,
}

#[derive(Args)]
pub struct Claim25Args {
    /// Projection dimension; repeat to sweep several.
    #[arg(long, value_name = "L", required = true)]
    pub ell: Vec<usize>,
    /// Family size; only valid with a single --ell. Defaults to
    /// 2^(2*ell) + 1.
    #[arg(long, value_name = "N")]
    pub family: Option<usize>,
    #[arg(long, default_value_t = 10_000, value_name = "N")]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write one summary row per level here.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// Write a static SVG of rates against bounds here.
    #[arg(long, value_name = "PATH")]
    pub plot: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            2
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    let master = match cli.master_seed {
        Some(seed) => Some(seed),
        None => env_master_seed()?,
    };
    let ctx = Ctx { master, workers: cli.workers.max(1), out: cli.out };
    match cli.command {
        Command::Props(args) => commands::props(&args, &ctx),
        Command::ReduceCa(args) => commands::reduce_ca(&args, &ctx),
        Command::ReduceTie(args) => commands::reduce_tie(&args, &ctx),
        Command::ReduceCpp(args) => commands::reduce_cpp(&args, &ctx),
        Command::ReduceMua(args) => commands::reduce_mua(&args, &ctx),
        Command::Menu(args) => commands::menu(&args, &ctx),
        Command::Audit(args) => commands::audit(&args, &ctx),
        Command::Claim25(args) => commands::claim25(&args, &ctx),
    }
}

fn env_master_seed() -> anyhow::Result<Option<u64>> {
    match std::env::var("AUCTIONKIT_MASTER_SEED") {
        Ok(raw) => {
            let seed = raw.parse::<u64>().map_err(|_| {
                anyhow::anyhow!("AUCTIONKIT_MASTER_SEED must be an unsigned integer, got {raw:?}")
            })?;
            Ok(Some(seed))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(std::env::VarError::NotUnicode(_)) => {
            anyhow::bail!("AUCTIONKIT_MASTER_SEED is not valid unicode")
        }
    }
}
