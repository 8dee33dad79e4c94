//! Monte Carlo estimation of the decoding error probabilities.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::analysis::{bound_eps_k, empirical_exponent, rate_exact, GallagerBsc};
use crate::bitcodec::BitString;
use crate::channel::{channel_rng, Dmc};
use crate::codec::{
    common_prefix, draw_v, draw_v_with_prefix, moid_encode, random_distinct_ids, receive, rmoid_encode,
    to_symbols, Mode, MoidParams, Outcome, Probe, RankOutcome, WinnerSet, WinnerTuple,
};
use crate::error::{bail, MoidError, Result};
use crate::hash::{FamilyParams, ReceiverId};
use crate::txcode::TxCodeSpec;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Non-winner probes drawn per trial by default.
pub const DEFAULT_PROBES: usize = 32;

pub const CSV_HEADER: &str = "m,k,t,K,ranked,channel,tx,mode,trials,lambda1_hat,lambda1_lo,lambda1_hi,lambda2_hat,lambda2_lo,lambda2_hi,bound_epsK,rate_finite,rate_asym,E1_emp,E2_emp";

/// Error count out of a number of Bernoulli trials.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub errors: u64,
    pub trials: u64,
}

impl Tally {
    pub fn new(errors: u64, trials: u64) -> Self {
        Tally { errors, trials }
    }

    pub fn estimate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.errors as f64 / self.trials as f64
        }
    }

    /// Wilson score interval.
    pub fn wilson(&self, z: f64) -> (f64, f64) {
        wilson_interval(self.errors, self.trials, z)
    }

    fn add(&mut self, other: &Tally) {
        self.errors += other.errors;
        self.trials += other.trials;
    }
}

pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if errors == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if errors == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Transmission code as configured; oracle block errors may be derived from
/// the Gallager exponent once `n_0` is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TxConfig {
    Fixed(TxCodeSpec),
    /// Oracle at rate `r`, block error `2^{-n E_r(r)}`.
    OracleRate(f64),
    /// Oracle at rate `c·C`, block error `2^{-n E_r(r)}`.
    OracleCapacityFraction(f64),
}

impl TxConfig {
    pub fn resolve(&self, w: &Dmc, n0: usize) -> Result<TxCodeSpec> {
        let spec = match *self {
            TxConfig::Fixed(spec) => spec,
            TxConfig::OracleRate(r) => crate::analysis::oracle_tx(&GallagerBsc::for_channel(w)?, r, n0)?,
            TxConfig::OracleCapacityFraction(c) => {
                let g = GallagerBsc::for_channel(w)?;
                crate::analysis::oracle_tx(&g, c * w.capacity(), n0)?
            }
        };
        spec.check_channel(w)?;
        Ok(spec)
    }
}

impl FromStr for TxConfig {
    type Err = MoidError;

    /// `identity`, `rep:N`, `oracle:r=R:p=P`, `oracle:r=R` or `oracle:c=F`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || MoidError::Input(format!("cannot parse transmission code {s:?}"));
        if s == "identity" {
            return Ok(TxConfig::Fixed(TxCodeSpec::Identity));
        }
        if let Some(rho) = s.strip_prefix("rep:") {
            return Ok(TxConfig::Fixed(TxCodeSpec::repetition(rho.parse().map_err(|_| bad())?)?));
        }
        let Some(rest) = s.strip_prefix("oracle:") else {
            return Err(bad());
        };
        let mut fields = BTreeMap::new();
        for part in rest.split(':') {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            let v: f64 = v.parse().map_err(|_| bad())?;
            fields.insert(k, v);
        }
        match (fields.get("r"), fields.get("p"), fields.get("c"), fields.len()) {
            (Some(&r), Some(&p), None, 2) => Ok(TxConfig::Fixed(TxCodeSpec::oracle(r, p)?)),
            (Some(&r), None, None, 1) => Ok(TxConfig::OracleRate(r)),
            (None, None, Some(&c), 1) if c > 0.0 && c < 1.0 => Ok(TxConfig::OracleCapacityFraction(c)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for TxConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TxConfig::Fixed(spec) => write!(f, "{spec}"),
            TxConfig::OracleRate(r) => write!(f, "oracle:r={r}"),
            TxConfig::OracleCapacityFraction(c) => write!(f, "oracle:c={c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WinnerPolicy {
    /// The same winners every trial; for ranked runs the order is the ranking.
    Fixed(Vec<ReceiverId>),
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProbePolicy {
    /// Fixed non-winners, probed every trial.
    Fixed(Vec<ReceiverId>),
    /// Fresh uniform non-winners each trial.
    Random(usize),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub params: MoidParams,
    pub channel: Dmc,
    pub tx: TxCodeSpec,
    pub ranked: bool,
    pub trials: usize,
    pub seed: u64,
    pub winners: WinnerPolicy,
    pub probes: ProbePolicy,
}

impl ExperimentConfig {
    pub fn new(params: MoidParams, channel: Dmc, tx: TxCodeSpec) -> Self {
        ExperimentConfig {
            params,
            channel,
            tx,
            ranked: false,
            trials: 1000,
            seed: 0,
            winners: WinnerPolicy::Random,
            probes: ProbePolicy::Random(DEFAULT_PROBES),
        }
    }

    fn validate(&self) -> Result<()> {
        let config = |e: MoidError| MoidError::Config(e.to_string());
        if self.trials == 0 {
            bail!(Config, "trials must be at least 1");
        }
        self.tx.check_channel(&self.channel).map_err(config)?;
        let p = &self.params;
        let mut seen = std::collections::BTreeSet::new();
        if let WinnerPolicy::Fixed(ids) = &self.winners {
            if ids.len() != p.k_winners() {
                bail!(Config, "{} fixed winners but K={}", ids.len(), p.k_winners());
            }
            for id in ids {
                p.check_id(id).map_err(config)?;
                if !seen.insert(id) {
                    bail!(Config, "winner {id} listed twice");
                }
            }
        }
        if let ProbePolicy::Fixed(ids) = &self.probes {
            for id in ids {
                p.check_id(id).map_err(config)?;
                if !seen.insert(id) {
                    bail!(Config, "probe {id} is a winner or listed twice");
                }
            }
        }
        if matches!(self.probes, ProbePolicy::Random(_)) {
            let needed = p.k_winners() + self.probe_count();
            if p.family().log2_n() < &num_bigint::BigUint::from(64u32)
                && (needed as u128) > 1u128 << p.family().log2_n().to_u32().unwrap()
            {
                bail!(Config, "N is too small for {needed} distinct receivers");
            }
        }
        Ok(())
    }

    fn probe_count(&self) -> usize {
        match &self.probes {
            ProbePolicy::Fixed(ids) => ids.len(),
            ProbePolicy::Random(n) => *n,
        }
    }

    /// Both winners and probes fixed: every slot is one `(𝒦, i)` pair.
    pub fn fixed_pairs(&self) -> bool {
        matches!(self.winners, WinnerPolicy::Fixed(_)) && matches!(self.probes, ProbePolicy::Fixed(_))
    }
}

/// Error counts of an experiment. Slot `j` of `type1_slots` is the `j`-th
/// winner; slot `j` of `type2_slots` is the `j`-th non-winner probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStats {
    pub trials: u64,
    pub type1_slots: Vec<Tally>,
    pub type2_slots: Vec<Tally>,
    /// Ranked runs only: winners decoded to a smaller rank.
    pub rank_decrease_slots: Vec<Tally>,
    /// Frames whose decoded `K` differs from the true `K`.
    pub header_failures: u64,
    /// Trials where `v̂ ≠ v`.
    pub message_errors: u64,
    /// Pooled counts over trials whose decoded `K` was correct.
    pub type1_header_ok: Tally,
    pub type2_header_ok: Tally,
    pub fixed_pairs: bool,
    /// `n`, channel uses per trial.
    pub channel_uses: usize,
}

impl ErrorStats {
    fn empty(winners: usize, probes: usize, fixed_pairs: bool, channel_uses: usize) -> Self {
        ErrorStats {
            trials: 0,
            type1_slots: vec![Tally::default(); winners],
            type2_slots: vec![Tally::default(); probes],
            rank_decrease_slots: vec![Tally::default(); winners],
            header_failures: 0,
            message_errors: 0,
            type1_header_ok: Tally::default(),
            type2_header_ok: Tally::default(),
            fixed_pairs,
            channel_uses,
        }
    }

    fn merge(mut self, other: ErrorStats) -> ErrorStats {
        self.trials += other.trials;
        for (a, b) in [
            (&mut self.type1_slots, &other.type1_slots),
            (&mut self.type2_slots, &other.type2_slots),
            (&mut self.rank_decrease_slots, &other.rank_decrease_slots),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| x.add(y));
        }
        self.header_failures += other.header_failures;
        self.message_errors += other.message_errors;
        self.type1_header_ok.add(&other.type1_header_ok);
        self.type2_header_ok.add(&other.type2_header_ok);
        self
    }

    fn pooled(slots: &[Tally]) -> Tally {
        slots.iter().fold(Tally::default(), |mut acc, t| {
            acc.add(t);
            acc
        })
    }

    fn worst(slots: &[Tally]) -> Tally {
        slots.iter().copied().max_by(|a, b| a.estimate().total_cmp(&b.estimate())).unwrap_or_default()
    }

    fn select(&self, slots: &[Tally]) -> Tally {
        if self.fixed_pairs {
            Self::worst(slots)
        } else {
            Self::pooled(slots)
        }
    }

    /// Type I estimate: the worst fixed pair, or pooled over random pairs.
    pub fn lambda1(&self) -> Tally {
        self.select(&self.type1_slots)
    }

    /// Type II estimate over non-winner probes.
    pub fn lambda2(&self) -> Tally {
        self.select(&self.type2_slots)
    }

    pub fn type1_pooled(&self) -> Tally {
        Self::pooled(&self.type1_slots)
    }

    pub fn type2_pooled(&self) -> Tally {
        Self::pooled(&self.type2_slots)
    }

    pub fn e1_emp(&self) -> f64 {
        empirical_exponent(self.lambda1().estimate(), self.channel_uses as f64)
    }

    pub fn e2_emp(&self) -> f64 {
        empirical_exponent(self.lambda2().estimate(), self.channel_uses as f64)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub stats: ErrorStats,
    pub row: String,
}

/// Runs `cfg.trials` independent trials. Trial `i` draws from
/// `channel_rng(seed, i)` and counts are summed, so the result is the same
/// for any number of worker threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let p = &cfg.params;
    let k_winners = p.k_winners();
    let fixed_winners = match &cfg.winners {
        WinnerPolicy::Fixed(ids) => Some(ids.clone()),
        WinnerPolicy::Random => None,
    };
    let fixed_probes = match &cfg.probes {
        ProbePolicy::Fixed(ids) => Some(ids.iter().map(|id| Probe::new(p, id.clone())).collect::<Result<Vec<_>>>()?),
        ProbePolicy::Random(_) => None,
    };
    let fixed_winner_probes = match &fixed_winners {
        Some(ids) => Some(ids.iter().map(|id| Probe::new(p, id.clone())).collect::<Result<Vec<_>>>()?),
        None => None,
    };
    let prefix = (p.shared_bits() > 0).then(|| common_prefix(p, cfg.seed));
    let n = cfg.tx.channel_uses(p.transmitted_bits());
    let probe_count = cfg.probe_count();
    let empty = || ErrorStats::empty(k_winners, probe_count, cfg.fixed_pairs(), n);

    let stats = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = channel_rng(cfg.seed, trial);
            let winners = match &fixed_winners {
                Some(ids) => ids.clone(),
                None => random_distinct_ids(p, k_winners, &[], &mut rng)?,
            };
            let winner_probes = match &fixed_winner_probes {
                Some(probes) => probes.clone(),
                None => winners.iter().map(|id| Probe::new(p, id.clone())).collect::<Result<Vec<_>>>()?,
            };
            let others = match &fixed_probes {
                Some(probes) => probes.clone(),
                None => random_distinct_ids(p, probe_count, &winners, &mut rng)?
                    .into_iter()
                    .map(|id| Probe::new(p, id))
                    .collect::<Result<Vec<_>>>()?,
            };
            let v = match &prefix {
                Some(bits) => draw_v_with_prefix(p, bits, &mut rng)?,
                None => draw_v(p, &mut rng),
            };
            let codeword = if cfg.ranked {
                rmoid_encode(p, &WinnerTuple::new(winners.clone())?, v, &cfg.tx)?
            } else {
                moid_encode(p, &WinnerSet::new(winners.clone())?, v, &cfg.tx)?
            };
            let x = to_symbols(&codeword);
            // the oracle code abstracts the channel into its block error
            let y = if cfg.tx.is_oracle() { x } else { cfg.channel.transmit(&x, &mut rng)? };
            let received = receive(p, &y, &cfg.tx, prefix.as_ref(), &mut rng)?;

            let mut s = empty();
            s.trials = 1;
            s.header_failures = (received.decided_k() != Some(k_winners)) as u64;
            s.message_errors = (received.message() != Some(v)) as u64;
            // ascending order is the decoding order of the unranked code
            let order: Vec<usize> = if cfg.ranked {
                (1..=k_winners).collect()
            } else {
                let set = WinnerSet::new(winners.clone())?;
                winners.iter().map(|id| set.iter().position(|w| w == id).unwrap() + 1).collect()
            };
            for (slot, probe) in winner_probes.iter().enumerate() {
                let (larger, smaller) = if cfg.ranked {
                    match probe.decide_ranked(p, &received) {
                        RankOutcome::F => (true, false),
                        RankOutcome::Rank(r) => (r > order[slot], r < order[slot]),
                    }
                } else {
                    (probe.decide(p, &received) == Outcome::F, false)
                };
                s.type1_slots[slot] = Tally::new(larger as u64, 1);
                s.rank_decrease_slots[slot] = Tally::new(smaller as u64, 1);
            }
            for (slot, probe) in others.iter().enumerate() {
                let hit = probe.decide(p, &received) == Outcome::T;
                s.type2_slots[slot] = Tally::new(hit as u64, 1);
            }
            if s.header_failures == 0 {
                s.type1_header_ok = ErrorStats::pooled(&s.type1_slots);
                s.type2_header_ok = ErrorStats::pooled(&s.type2_slots);
            }
            Ok(s)
        })
        .try_reduce(empty, |a, b| Ok(a.merge(b)))?;
    let row = csv_row(cfg, &stats)?;
    Ok(ExperimentResult { stats, row })
}

/// One CSV row in the [`CSV_HEADER`] layout.
pub fn csv_row(cfg: &ExperimentConfig, stats: &ErrorStats) -> Result<String> {
    let p = &cfg.params;
    let fam = p.family();
    let rates = rate_exact(fam, p.k_winners(), cfg.tx.rate())?;
    let l1 = stats.lambda1();
    let l2 = stats.lambda2();
    let (l1_lo, l1_hi) = l1.wilson(Z95);
    let (l2_lo, l2_hi) = l2.wilson(Z95);
    let bound = bound_eps_k(fam, p.k_winners()).to_f64().unwrap();
    let mut row = String::new();
    write!(
        row,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        fam.m(),
        fam.k(),
        fam.t(),
        p.k_winners(),
        cfg.ranked,
        cfg.channel,
        cfg.tx,
        p.mode(),
        cfg.trials,
        l1.estimate(),
        l1_lo,
        l1_hi,
        l2.estimate(),
        l2_lo,
        l2_hi,
        bound,
        rates.finite,
        rates.asymptotic,
        stats.e1_emp(),
        stats.e2_emp(),
    )
    .unwrap();
    Ok(row)
}

/// Cartesian grid of experiment parameters; `(k, t)` pairs with an invalid
/// `t` are skipped.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub m: Vec<u32>,
    pub k: Vec<usize>,
    pub t: Vec<u32>,
    pub k_winners: Vec<usize>,
    pub channels: Vec<Dmc>,
    pub txs: Vec<TxConfig>,
    pub mode: Mode,
    pub ranked: bool,
    pub trials: usize,
    pub seed: u64,
    pub probes: usize,
}

/// Runs every grid point and returns the CSV text, header included.
pub fn sweep(grid: &SweepGrid) -> Result<String> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for &m in &grid.m {
        for &k in &grid.k {
            for &t in &grid.t {
                if !t_valid(k, t) {
                    continue;
                }
                for &kw in &grid.k_winners {
                    for w in &grid.channels {
                        for tx in &grid.txs {
                            let family = FamilyParams::new(m, k, t).map_err(|e| MoidError::Config(e.to_string()))?;
                            let params = MoidParams::new(family, kw, grid.mode)?;
                            let spec = tx.resolve(w, params.transmitted_bits())?;
                            let mut cfg = ExperimentConfig::new(params, w.clone(), spec);
                            cfg.ranked = grid.ranked;
                            cfg.trials = grid.trials;
                            cfg.seed = grid.seed;
                            cfg.probes = ProbePolicy::Random(grid.probes);
                            out.push_str(&run_experiment(&cfg)?.row);
                            out.push('\n');
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn t_valid(k: usize, t: u32) -> bool {
    if k == 1 {
        t == 0
    } else {
        (t as usize) < k
    }
}

/// Flat `key=value` settings; `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!(Config, "line {}: expected key=value, got {line:?}", lineno + 1);
            };
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(KvConfig { entries })
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| MoidError::Config(format!("bad value for {key}: {v:?}"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        match self.get(key) {
            None => Err(MoidError::Config(format!("missing key {key}"))),
            Some(v) => v.parse().map_err(|_| MoidError::Config(format!("bad value for {key}: {v:?}"))),
        }
    }

    /// Comma-separated values, each either a number or an inclusive `a..b`.
    pub fn list<T>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr + TryFrom<u64>,
    {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        let bad = || MoidError::Config(format!("bad list for {key}: {v:?}"));
        let mut out = Vec::new();
        for part in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if let Some((a, b)) = part.split_once("..") {
                let a: u64 = a.trim().parse().map_err(|_| bad())?;
                let b: u64 = b.trim().parse().map_err(|_| bad())?;
                for x in a..=b {
                    out.push(T::try_from(x).map_err(|_| bad())?);
                }
            } else {
                out.push(part.parse().map_err(|_| bad())?);
            }
        }
        Ok(Some(out))
    }

    /// Comma-separated strings parsed with `FromStr`.
    pub fn str_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<T>().map_err(|e| MoidError::Config(format!("{key}: {e}"))))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

/// Ids listed as `a,b,c`, or `None` for `random`.
pub fn parse_ids(s: &str) -> Result<Option<Vec<ReceiverId>>> {
    if s.trim() == "random" {
        return Ok(None);
    }
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<ReceiverId>().map_err(|_| MoidError::Config(format!("bad receiver id {x:?}"))))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Experiment from `key=value` settings: `m k t K channel tx mode ranked
/// trials seed winners probes`.
pub fn experiment_from_config(c: &KvConfig, default_seed: u64) -> Result<ExperimentConfig> {
    let m: u32 = c.require("m")?;
    let k: usize = c.require("k")?;
    let t: u32 = c.require("t")?;
    let k_winners: usize = c.require("K")?;
    let mode: Mode = c.parse_or("mode", Mode::Plain)?;
    let family = FamilyParams::new(m, k, t).map_err(|e| MoidError::Config(e.to_string()))?;
    let params = MoidParams::new(family, k_winners, mode).map_err(|e| MoidError::Config(e.to_string()))?;
    let channel: Dmc = c.get("channel").unwrap_or("noiseless").parse().map_err(cfg_err)?;
    let tx: TxConfig = c.get("tx").unwrap_or("identity").parse().map_err(cfg_err)?;
    let tx = tx.resolve(&channel, params.transmitted_bits()).map_err(cfg_err)?;
    let mut cfg = ExperimentConfig::new(params, channel, tx);
    cfg.ranked = c.parse_or("ranked", false)?;
    cfg.trials = c.parse_or("trials", 1000)?;
    cfg.seed = c.parse_or("seed", default_seed)?;
    if let Some(ids) = c.get("winners").map(parse_ids).transpose()?.flatten() {
        cfg.winners = WinnerPolicy::Fixed(ids);
    }
    if let Some(s) = c.get("probes") {
        cfg.probes = match s.trim().parse::<usize>() {
            Ok(n) => ProbePolicy::Random(n),
            Err(_) => ProbePolicy::Fixed(parse_ids(s)?.unwrap_or_default()),
        };
    }
    Ok(cfg)
}

/// Sweep grid from settings; `m k t K channel tx` may be lists.
pub fn sweep_from_config(c: &KvConfig, default_seed: u64) -> Result<SweepGrid> {
    let req = |key: &str| MoidError::Config(format!("missing key {key}"));
    Ok(SweepGrid {
        m: c.list("m")?.ok_or_else(|| req("m"))?,
        k: c.list("k")?.ok_or_else(|| req("k"))?,
        t: c.list("t")?.ok_or_else(|| req("t"))?,
        k_winners: c.list("K")?.ok_or_else(|| req("K"))?,
        channels: c.str_list("channel")?.unwrap_or_else(|| vec![Dmc::noiseless()]),
        txs: c.str_list("tx")?.unwrap_or_else(|| vec![TxConfig::Fixed(TxCodeSpec::Identity)]),
        mode: c.parse_or("mode", Mode::Plain)?,
        ranked: c.parse_or("ranked", false)?,
        trials: c.parse_or("trials", 1000)?,
        seed: c.parse_or("seed", default_seed)?,
        probes: c.parse_or("probes", DEFAULT_PROBES)?,
    })
}

fn cfg_err(e: MoidError) -> MoidError {
    match e {
        MoidError::Config(_) => e,
        other => MoidError::Config(other.to_string()),
    }
}

/// The `K`-bit prefix handed to receivers in common-randomness runs.
pub fn shared_prefix(cfg: &ExperimentConfig) -> Option<BitString> {
    (cfg.params.shared_bits() > 0).then(|| common_prefix(&cfg.params, cfg.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::lambda2_exact;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 100, Z95);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.036_995).abs() < 1e-5);
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!((lo - 0.403_832).abs() < 1e-5 && (hi - 0.596_168).abs() < 1e-5);
    }

    fn noiseless(m: u32, k: usize, t: u32, kw: usize) -> ExperimentConfig {
        ExperimentConfig::new(MoidParams::plain(m, k, t, kw).unwrap(), Dmc::noiseless(), TxCodeSpec::Identity)
    }

    #[test]
    fn noiseless_has_no_type_one_errors() {
        let mut cfg = noiseless(2, 2, 1, 3);
        cfg.trials = 2000;
        cfg.probes = ProbePolicy::Random(4);
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.stats.type1_pooled().errors, 0);
        assert_eq!(r.stats.header_failures, 0);
        assert_eq!(r.stats.message_errors, 0);
        cfg.ranked = true;
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.stats.type1_pooled().errors, 0);
    }

    #[test]
    fn determinism() {
        let mut cfg = noiseless(2, 2, 1, 2);
        cfg.trials = 500;
        cfg.seed = 99;
        let a = run_experiment(&cfg).unwrap().row;
        let b = run_experiment(&cfg).unwrap().row;
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| run_experiment(&cfg).unwrap().row);
        assert_eq!(a, c);
    }

    #[test]
    fn fixed_pair_matches_oracle() {
        let mut cfg = noiseless(4, 2, 1, 2);
        cfg.trials = 20_000;
        cfg.seed = 5;
        let winners: Vec<ReceiverId> = vec![3u64.into(), 77u64.into()];
        let i: ReceiverId = 1000u64.into();
        cfg.winners = WinnerPolicy::Fixed(winners.clone());
        cfg.probes = ProbePolicy::Fixed(vec![i.clone()]);
        let stats = run_experiment(&cfg).unwrap().stats;
        let exact = lambda2_exact(&cfg.params, &WinnerSet::new(winners).unwrap(), &i).unwrap();
        assert!(exact <= BigRational::new(BigInt::from(47), BigInt::from(128)));
        let (lo, hi) = stats.lambda2().wilson(4.0);
        let e = exact.to_f64().unwrap();
        assert!(lo <= e && e <= hi, "{lo} {e} {hi}");
    }

    #[test]
    fn config_errors() {
        let mut cfg = noiseless(2, 2, 1, 2);
        cfg.winners = WinnerPolicy::Fixed(vec![1u64.into()]);
        assert!(matches!(run_experiment(&cfg), Err(MoidError::Config(_))));
        cfg.winners = WinnerPolicy::Fixed(vec![1u64.into(), 2u64.into()]);
        cfg.probes = ProbePolicy::Fixed(vec![2u64.into()]);
        assert!(matches!(run_experiment(&cfg), Err(MoidError::Config(_))));
        cfg.probes = ProbePolicy::Random(1);
        cfg.channel = Dmc::bsc(0.1).unwrap();
        assert!(matches!(run_experiment(&cfg), Err(MoidError::Config(_))));
    }

    #[test]
    fn tx_config_parsing() {
        assert_eq!("identity".parse::<TxConfig>().unwrap(), TxConfig::Fixed(TxCodeSpec::Identity));
        assert_eq!("rep:3".parse::<TxConfig>().unwrap(), TxConfig::Fixed(TxCodeSpec::Repetition(3)));
        assert_eq!(
            "oracle:r=0.5:p=0.01".parse::<TxConfig>().unwrap(),
            TxConfig::Fixed(TxCodeSpec::oracle(0.5, 0.01).unwrap())
        );
        assert_eq!("oracle:c=0.5".parse::<TxConfig>().unwrap(), TxConfig::OracleCapacityFraction(0.5));
        assert!("oracle:c=1.5".parse::<TxConfig>().is_err());
        assert!("rep:x".parse::<TxConfig>().is_err());
        let w = Dmc::bsc(0.05).unwrap();
        let spec = TxConfig::OracleCapacityFraction(0.5).resolve(&w, 24).unwrap();
        let TxCodeSpec::Oracle { rate, block_error } = spec else { panic!() };
        assert!((rate - 0.5 * w.capacity()).abs() < 1e-15);
        assert!(block_error > 0.0 && block_error < 1e-2);
    }

    #[test]
    fn kv_config() {
        let c = KvConfig::parse("# header\nm = 4 # inline\nk=2\n\nK=1..3, 5\nchannel=bsc:0.1,noiseless\n").unwrap();
        assert_eq!(c.get("m"), Some("4"));
        assert_eq!(c.list::<usize>("K").unwrap(), Some(vec![1, 2, 3, 5]));
        assert_eq!(c.str_list::<Dmc>("channel").unwrap().unwrap().len(), 2);
        assert!(KvConfig::parse("oops").is_err());
        assert!(matches!(c.require::<u32>("t"), Err(MoidError::Config(_))));
    }

    #[test]
    fn sweep_rows() {
        let grid = SweepGrid {
            m: vec![2],
            k: vec![1, 2],
            t: vec![0, 1],
            k_winners: vec![1, 2],
            channels: vec![Dmc::noiseless()],
            txs: vec![TxConfig::Fixed(TxCodeSpec::Identity)],
            mode: Mode::Plain,
            ranked: true,
            trials: 200,
            seed: 1,
            probes: 2,
        };
        let csv = sweep(&grid).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        // (k,t) in {(1,0), (2,0), (2,1)} times two K
        assert_eq!(lines.len(), 1 + 6);
        for line in &lines[1..] {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols.len(), 20);
            assert_eq!(cols[9], "0");
        }
    }
}
