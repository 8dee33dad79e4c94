use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use moid::analysis::{
    rmoid_lambda_exact, bound_eps_k, lambda2_exact, triplet_row, ExponentModel, GallagerBsc, Scheme,
    TRIPLET_CSV_HEADER,
};
use moid::channel::{channel_rng, Dmc, EntropyMode};
use moid::codec::{MoidParams, Probe, WinnerSet, WinnerTuple};
use moid::feedback::{run_feedback_experiment, FeedbackSetup, FeedbackSummary};
use moid::hash::{sample_ids, sample_pairs, CheckKind, FamilyParams, ReceiverId};
use moid::sim::{
    experiment_from_config, parse_ids, run_experiment, sweep, sweep_from_config, KvConfig, TxConfig, CSV_HEADER,
};
use moid::MoidError;

#[derive(Parser)]
#[command(name = "moid", version, about = "Multiple object identification codes: hashing, simulation and bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exhaustively check the hash family's uniformity and pair bounds on sampled ids.
    VerifyHash(VerifyArgs),
    /// Estimate error probabilities for one configuration.
    Simulate(ExperimentArgs),
    /// Run a grid of configurations; list values are comma separated, `a..b` ranges allowed.
    Sweep(ExperimentArgs),
    /// Evaluate achievable (R, E1, E2) triplets.
    Triplets(TripletArgs),
    /// Passive-feedback rounds: distill the key from shared channel outputs.
    Feedback(FeedbackArgs),
    /// Exact error probabilities by enumerating every key.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    m: u32,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    t: u32,
    /// Sampled ids for the uniformity check.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Sampled id pairs for the pair bound.
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Print every checked cell to stderr.
    #[arg(long)]
    full: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// `key=value` file; flags override its entries.
    #[arg(long)]
    config: Option<std::path::PathBuf>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    t: Option<String>,
    #[arg(long = "K")]
    k_winners: Option<String>,
    /// `noiseless`, `bsc:p` or `matrix[a b;c d]`.
    #[arg(long)]
    channel: Option<String>,
    /// `identity`, `rep:N`, `oracle:r=R:p=P`, `oracle:r=R` or `oracle:c=F`.
    #[arg(long)]
    tx: Option<String>,
    /// `plain`, `cr:BITS`, `txmsg`, `vark`, `vark:fixed:KMAX`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    ranked: bool,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Comma-separated winner ids, or `random`.
    #[arg(long)]
    winners: Option<String>,
    /// Number of random non-winner probes, or comma-separated ids.
    #[arg(long)]
    probes: Option<String>,
}

impl ExperimentArgs {
    fn settings(&self) -> Result<KvConfig, MoidError> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| MoidError::Config(format!("cannot read {}: {e}", path.display())))?;
                KvConfig::parse(&text)?
            }
            None => KvConfig::default(),
        };
        let flags = [
            ("m", &self.m),
            ("k", &self.k),
            ("t", &self.t),
            ("K", &self.k_winners),
            ("channel", &self.channel),
            ("tx", &self.tx),
            ("mode", &self.mode),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("winners", &self.winners),
            ("probes", &self.probes),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                c.set(key, v.clone());
            }
        }
        if self.ranked {
            c.set("ranked", "true");
        }
        Ok(c)
    }
}

#[derive(Args)]
struct TripletArgs {
    /// `1`, `rep`, `mk` or `cr`.
    #[arg(long)]
    scheme: String,
    /// Winners; comma-separated list allowed.
    #[arg(long = "K")]
    k_winners: String,
    /// Key length `ℓ = k + 2`; comma-separated list allowed.
    #[arg(long = "l", default_value = "3")]
    ell: String,
    /// Transmission rate, absolute or as a capacity fraction like `0.5C`; list allowed.
    #[arg(long)]
    r: String,
    #[arg(long, default_value_t = 0.25)]
    rho: f64,
    #[arg(long, default_value = "bsc:0.05")]
    channel: String,
    /// Use `K+1` in the last Moulin-Koetter term.
    #[arg(long)]
    mk_k_plus_one: bool,
}

#[derive(Args)]
struct FeedbackArgs {
    #[arg(long)]
    m: u32,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    t: u32,
    #[arg(long = "K")]
    k_winners: usize,
    #[arg(long, default_value = "bsc:0.1")]
    channel: String,
    /// `det` or `stoch`.
    #[arg(long, default_value = "det")]
    mode: String,
    #[arg(long, default_value = "oracle:c=0.5")]
    tx: String,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 8)]
    probes: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    m: u32,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    t: u32,
    /// Comma-separated winner ids; for `--ranked` the order is the ranking.
    #[arg(long)]
    winners: String,
    /// Comma-separated non-winner ids.
    #[arg(long)]
    receivers: Option<String>,
    #[arg(long)]
    ranked: bool,
}

/// Bad input or configuration, reported with exit code 2.
struct Usage(String);

enum Failure {
    Usage(String),
    Check(String),
}

impl From<MoidError> for Failure {
    fn from(e: MoidError) -> Self {
        match e {
            MoidError::Parameter(_) | MoidError::Range(_) | MoidError::Input(_) | MoidError::Config(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Check(other.to_string()),
        }
    }
}

impl From<Usage> for Failure {
    fn from(u: Usage) -> Self {
        Failure::Usage(u.0)
    }
}

fn default_seed() -> Result<u64, Usage> {
    match std::env::var("MOID_SEED") {
        Ok(s) => s.trim().parse().map_err(|_| Usage(format!("MOID_SEED={s:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn verify_hash(a: &VerifyArgs) -> Result<(), Failure> {
    let fam = FamilyParams::new(a.m, a.k, a.t)?;
    let mut rng = channel_rng(a.seed.unwrap_or(default_seed()?), 0);
    let alphas = sample_ids(&fam, a.samples, &mut rng);
    let pairs = sample_pairs(&fam, a.pairs, &mut rng);
    let uniform = fam.verify_strong_uniformity(&alphas)?;
    let pair = fam.verify_pairwise_bound(&pairs)?;
    println!("check,items,cells,violations,max_count,bound");
    let mut violations = 0;
    for (name, kind, report, items) in [
        ("uniformity", CheckKind::Uniformity, &uniform, a.samples),
        ("pair", CheckKind::Pair, &pair, a.pairs),
        ("collision", CheckKind::Collision, &pair, a.pairs),
    ] {
        let lines: Vec<_> = report.lines().iter().filter(|l| l.kind == kind).collect();
        let bad: Vec<_> = lines.iter().filter(|l| !l.ok()).collect();
        let bound = lines.first().map_or(0, |l| l.bound);
        println!("{name},{items},{},{},{},{bound}", lines.len(), bad.len(), report.max_count(kind).unwrap_or(0));
        for l in &bad {
            eprintln!("violation: {}", report.format_line(l));
        }
        if a.full {
            lines.iter().for_each(|l| eprintln!("{}", report.format_line(l)));
        }
        violations += bad.len();
    }
    eprintln!("epsilon = {}, {violations} violations", fam.epsilon());
    if violations > 0 {
        return Err(Failure::Check(format!("{violations} violations")));
    }
    Ok(())
}

fn simulate(a: &ExperimentArgs) -> Result<(), Failure> {
    let cfg = experiment_from_config(&a.settings()?, default_seed()?)?;
    if let Some(w) = cfg.params.variable_k_warning() {
        eprintln!("warning: {w}");
    }
    let result = run_experiment(&cfg)?;
    println!("{CSV_HEADER}");
    println!("{}", result.row);
    let s = &result.stats;
    eprintln!(
        "channel uses {}, header failures {}, message errors {}, type I {}/{}, type II {}/{}",
        s.channel_uses,
        s.header_failures,
        s.message_errors,
        s.type1_pooled().errors,
        s.type1_pooled().trials,
        s.type2_pooled().errors,
        s.type2_pooled().trials
    );
    Ok(())
}

fn run_sweep(a: &ExperimentArgs) -> Result<(), Failure> {
    let grid = sweep_from_config(&a.settings()?, default_seed()?)?;
    print!("{}", sweep(&grid)?);
    Ok(())
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Usage> {
    split_list(s).map(|x| x.parse().map_err(|_| Usage(format!("bad {what} {x:?}")))).collect()
}

fn triplets(a: &TripletArgs) -> Result<(), Failure> {
    let scheme: Scheme = a.scheme.parse()?;
    let w: Dmc = a.channel.parse()?;
    let model = GallagerBsc::for_channel(&w).map_err(|e| Failure::Usage(e.to_string()))?;
    let ks: Vec<usize> = parse_list(&a.k_winners, "K")?;
    let ells: Vec<usize> = parse_list(&a.ell, "l")?;
    let rates = split_list(&a.r)
        .map(|x| match x.strip_suffix('C') {
            Some(f) => f.parse::<f64>().map(|f| f * model.capacity()),
            None => x.parse::<f64>(),
        })
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|_| Usage(format!("bad rate {:?}", a.r)))?;
    println!("{TRIPLET_CSV_HEADER}");
    for &k in &ks {
        for &ell in &ells {
            for &r in &rates {
                println!("{}", triplet_row(scheme, k, ell, r, a.rho, &model, a.mk_k_plus_one)?);
            }
        }
    }
    Ok(())
}

fn feedback(a: &FeedbackArgs) -> Result<(), Failure> {
    let mode = match a.mode.as_str() {
        "det" | "deterministic" => EntropyMode::Deterministic,
        "stoch" | "stochastic" => EntropyMode::Stochastic,
        other => return Err(Failure::Usage(format!("unknown feedback mode {other:?}"))),
    };
    let p = MoidParams::plain(a.m, a.k, a.t, a.k_winners)?;
    let w: Dmc = a.channel.parse()?;
    let tx = a.tx.parse::<TxConfig>()?.resolve(&w, a.k_winners * a.m as usize)?;
    let setup = FeedbackSetup::new(&w, mode)?;
    let seed = a.seed.unwrap_or(default_seed()?);
    let s: FeedbackSummary = run_feedback_experiment(&p, &setup, &tx, a.probes, a.trials, seed)?;
    println!("{}", FeedbackSummary::CSV_HEADER);
    println!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        a.m,
        a.k,
        a.t,
        a.k_winners,
        w,
        a.mode,
        tx,
        s.trials,
        s.entropy,
        s.mean_n_tilde,
        s.n_star,
        s.rate_empirical,
        s.rate_expected.0,
        s.rate_expected.1,
        s.type1_errors,
        s.type2_errors
    );
    if s.key_mismatches > 0 {
        return Err(Failure::Check(format!("{} key mismatches between sender and receivers", s.key_mismatches)));
    }
    Ok(())
}

fn oracle(a: &OracleArgs) -> Result<(), Failure> {
    let winners = parse_ids(&a.winners)?.ok_or_else(|| Usage("oracle needs explicit winners".into()))?;
    let p = MoidParams::plain(a.m, a.k, a.t, winners.len())?;
    let eps = p.family().epsilon();
    let mut failed = false;
    if a.ranked {
        let tuple = WinnerTuple::new(winners)?;
        println!("rank,lambda1_tilde,lambda2_tilde,bound");
        for j in 1..=tuple.len() {
            let (l1, l2) = rmoid_lambda_exact(&p, &tuple, j)?;
            let bound = &eps * num_rational::BigRational::from_integer((j as i64 - 1).into());
            failed |= !num_traits::Zero::is_zero(&l1) || l2 > bound;
            println!("{j},{l1},{l2},{bound}");
        }
    } else {
        let set = WinnerSet::new(winners)?;
        let receivers: Vec<ReceiverId> = match &a.receivers {
            Some(s) => parse_ids(s)?.unwrap_or_default(),
            None => return Err(Failure::Usage("oracle needs --receivers unless --ranked".into())),
        };
        let bound = bound_eps_k(p.family(), set.len());
        println!("receiver,lambda2,bound_epsK");
        for i in &receivers {
            Probe::new(&p, i.clone())?;
            let l2 = lambda2_exact(&p, &set, i)?;
            failed |= l2 > bound;
            println!("{i},{l2},{bound}");
        }
    }
    if failed {
        return Err(Failure::Check("exact error probability exceeds its bound".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::VerifyHash(a) => verify_hash(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Triplets(a) => triplets(a),
        Command::Feedback(a) => feedback(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("moid: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("moid: {msg}");
            ExitCode::from(2)
        }
    }
}
