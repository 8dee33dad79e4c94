//! Passive feedback: the key `v` is distilled from channel outputs that the
//! sender and every receiver observe, via the interval algorithm, and only the
//! winners' hashes are then transmitted.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;

use crate::analysis::biguint_log2;
use crate::bitcodec::{BitString, Payload};
use crate::channel::{binary_entropy, channel_rng, Dmc, EntropyMode};
use crate::codec::{random_distinct_ids, to_symbols, Mode, MoidParams, Outcome, Probe, Received, WinnerSet};
use crate::error::{bail, MoidError, Result};
use crate::txcode::TxCodeSpec;

/// Denominator the stochastic input law is rounded to.
const INPUT_LAW_DENOMINATOR: u64 = 1 << 16;

/// An i.i.d. source `P_Y` with rational probabilities `w_y / D`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceModel {
    weights: Vec<u64>,
    cumulative: Vec<u64>,
    denom: u64,
}

impl SourceModel {
    /// Probabilities must be non-negative and sum to one exactly.
    pub fn new(probs: &[BigRational]) -> Result<Self> {
        if probs.is_empty() {
            bail!(Parameter, "empty source distribution");
        }
        if probs.iter().any(|p| p < &BigRational::zero()) {
            bail!(Parameter, "negative source probability");
        }
        if probs.iter().sum::<BigRational>() != BigRational::one() {
            bail!(Parameter, "source probabilities do not sum to 1");
        }
        let lcm = probs.iter().fold(BigInt::one(), |acc, p| acc.lcm(p.denom()));
        let Some(denom) = lcm.to_u64() else {
            bail!(Parameter, "common denominator {lcm} does not fit in 64 bits");
        };
        let weights = probs
            .iter()
            .map(|p| (p.numer() * (&lcm / p.denom())).to_u64().unwrap())
            .collect();
        Ok(Self::from_parts(weights, denom))
    }

    /// `P(y) = w_y / Σ w`.
    pub fn from_weights(weights: Vec<u64>) -> Result<Self> {
        let total = weights.iter().try_fold(0u64, |a, &w| a.checked_add(w));
        match total {
            Some(0) | None => bail!(Parameter, "source weights must have a positive sum below 2^64"),
            Some(d) => Ok(Self::from_parts(weights, d)),
        }
    }

    fn from_parts(weights: Vec<u64>, denom: u64) -> Self {
        let cumulative = weights
            .iter()
            .scan(0u64, |acc, &w| {
                let c = *acc;
                *acc += w;
                Some(c)
            })
            .collect();
        SourceModel { weights, cumulative, denom }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn prob(&self, y: usize) -> BigRational {
        BigRational::new(BigInt::from(self.weights[y]), BigInt::from(self.denom))
    }

    pub fn probs(&self) -> Vec<f64> {
        self.weights.iter().map(|&w| w as f64 / self.denom as f64).collect()
    }

    pub fn entropy(&self) -> f64 {
        crate::channel::entropy(&self.probs())
    }

    pub fn p_max(&self) -> BigRational {
        let w = self.weights.iter().copied().max().unwrap();
        BigRational::new(BigInt::from(w), BigInt::from(self.denom))
    }

    /// Exact draw from `P_Y`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng.gen_range(0..self.denom);
        self.cumulative.partition_point(|&c| c <= u) - 1
    }
}

/// The nested interval `[lo, lo + width) / D^n` after `n` source symbols.
#[derive(Debug, Clone)]
pub struct IntervalState<'s> {
    src: &'s SourceModel,
    target_bits: u32,
    lo: BigUint,
    width: BigUint,
    scale: BigUint,
    consumed: usize,
}

impl<'s> IntervalState<'s> {
    pub fn new(src: &'s SourceModel, target_bits: u32) -> Result<Self> {
        if !(1..=128).contains(&target_bits) {
            bail!(Parameter, "target of {target_bits} bits outside 1..=128");
        }
        Ok(IntervalState {
            src,
            target_bits,
            lo: BigUint::zero(),
            width: BigUint::one(),
            scale: BigUint::one(),
            consumed: 0,
        })
    }

    pub fn consumed(&self) -> usize {
        self.consumed
    }

    /// Refines by one symbol; returns the cell index once the interval fits
    /// inside a single cell of width `2^{-target_bits}`.
    pub fn push(&mut self, y: usize) -> Result<Option<u128>> {
        let Some(&w) = self.src.weights.get(y) else {
            bail!(Input, "symbol {y} outside the source alphabet");
        };
        if w == 0 {
            bail!(Input, "symbol {y} has probability zero");
        }
        self.consumed += 1;
        let d = self.src.denom;
        self.lo = &self.lo * d + &self.width * self.src.cumulative[y];
        self.width *= w;
        self.scale *= d;
        let j = (&self.lo << self.target_bits) / &self.scale;
        let hi = &self.lo + &self.width;
        if (hi << self.target_bits) <= (&j + 1u32) * &self.scale {
            Ok(Some(j.to_u128().unwrap()))
        } else {
            Ok(None)
        }
    }
}

/// Runs the interval algorithm on `symbols` until a `target_bits`-bit value
/// is determined. Returns the value and the number of symbols consumed.
pub fn interval_generate<I>(src: &SourceModel, symbols: I, target_bits: u32) -> Result<(u128, usize)>
where
    I: IntoIterator<Item = usize>,
{
    let mut state = IntervalState::new(src, target_bits)?;
    if src.p_max().is_one() {
        return Err(MoidError::Underrun { consumed: 0 });
    }
    for y in symbols {
        if let Some(v) = state.push(y)? {
            return Ok((v, state.consumed()));
        }
    }
    Err(MoidError::Underrun { consumed: state.consumed() })
}

/// Bounds on the expected number of symbols consumed:
/// `ℓm/H ≤ E[ñ] ≤ (ℓm + log2 2(|Y|-1) + h(p_max)/(1-p_max))/H`.
pub fn expected_length_bounds(src: &SourceModel, target_bits: u32) -> Result<(f64, f64)> {
    let h = src.entropy();
    if !(h > 0.0) {
        bail!(Domain, "source entropy is zero");
    }
    let b = target_bits as f64;
    let p_max = src.p_max().to_f64().unwrap();
    let alphabet = src.weights.iter().filter(|&&w| w > 0).count() as f64;
    let upper = b + (2.0 * (alphabet - 1.0)).log2() + binary_entropy(p_max) / (1.0 - p_max);
    Ok((b / h, upper / h))
}

/// How the sender drives the channel during key distillation.
#[derive(Debug, Clone)]
pub struct FeedbackSetup {
    channel: Dmc,
    mode: EntropyMode,
    input_weights: Vec<u64>,
    source: SourceModel,
}

impl FeedbackSetup {
    /// Deterministic mode repeats the input with the most random output row;
    /// stochastic mode draws inputs i.i.d. from the output-entropy maximizer,
    /// rounded to a multiple of `2^-16`.
    pub fn new(w: &Dmc, mode: EntropyMode) -> Result<Self> {
        let (_, law) = w.output_entropy_max(mode)?;
        let input_weights = match mode {
            EntropyMode::Deterministic => law.iter().map(|&p| (p == 1.0) as u64).collect(),
            EntropyMode::Stochastic => round_law(&law),
        };
        let denom = BigInt::from(input_weights.iter().sum::<u64>());
        let probs: Vec<BigRational> = (0..w.output_size())
            .map(|y| {
                input_weights
                    .iter()
                    .zip(w.exact_rows())
                    .map(|(&px, row)| BigRational::new(BigInt::from(px), denom.clone()) * &row[y])
                    .sum()
            })
            .collect();
        let source = SourceModel::new(&probs)?;
        Ok(FeedbackSetup { channel: w.clone(), mode, input_weights, source })
    }

    pub fn source(&self) -> &SourceModel {
        &self.source
    }

    pub fn mode(&self) -> EntropyMode {
        self.mode
    }

    pub fn channel(&self) -> &Dmc {
        &self.channel
    }

    fn next_output<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total: u64 = self.input_weights.iter().sum();
        let mut u = rng.gen_range(0..total);
        let x = self
            .input_weights
            .iter()
            .position(|&w| {
                if u < w {
                    true
                } else {
                    u -= w;
                    false
                }
            })
            .unwrap();
        self.channel.sample(x, rng)
    }
}

fn round_law(law: &[f64]) -> Vec<u64> {
    let mut w: Vec<u64> = law.iter().map(|&p| (p * INPUT_LAW_DENOMINATOR as f64).round() as u64).collect();
    let total: u64 = w.iter().sum();
    let last = w.len() - 1;
    w[last] = (w[last] + INPUT_LAW_DENOMINATOR).saturating_sub(total);
    w
}

/// One feedback round as seen by the sender and the receivers.
#[derive(Debug, Clone)]
pub struct FeedbackRound {
    pub v_encoder: u128,
    pub v_decoder: u128,
    /// `ñ`, channel uses spent on key distillation.
    pub n_tilde: usize,
    /// Channel uses spent on the `K·m` hash bits.
    pub tx_uses: usize,
    pub received: Received,
    pub outcomes: Vec<Outcome>,
}

impl FeedbackRound {
    pub fn total_uses(&self) -> usize {
        self.n_tilde + self.tx_uses
    }
}

/// Distills `v` from the shared output stream, then sends the winners' hashes
/// with `tx`; each probe decides with the shared `v`.
pub fn run_feedback_round<R: Rng + ?Sized>(
    p: &MoidParams,
    winners: &WinnerSet,
    setup: &FeedbackSetup,
    tx: &TxCodeSpec,
    probes: &[Probe],
    rng: &mut R,
) -> Result<FeedbackRound> {
    if p.mode() != Mode::Plain {
        bail!(Parameter, "feedback rounds run in plain mode, got {}", p.mode());
    }
    if winners.len() != p.k_winners() {
        bail!(Input, "{} winners given but K={}", winners.len(), p.k_winners());
    }
    tx.check_channel(&setup.channel)?;
    let fam = p.family();
    let key_bits = fam.key_bits();

    // phase 1: both sides watch the same outputs
    let mut observed = Vec::new();
    let mut encoder = IntervalState::new(&setup.source, key_bits)?;
    if setup.source.p_max().is_one() {
        return Err(MoidError::Underrun { consumed: 0 });
    }
    let v_encoder = loop {
        let y = setup.next_output(rng);
        observed.push(y);
        if let Some(v) = encoder.push(y)? {
            break v;
        }
    };
    let (v_decoder, _) = interval_generate(&setup.source, observed.iter().copied(), key_bits)?;

    // phase 2: only the hashes cross the channel
    let payload = crate::codec::make_payload(p, &winners.to_vec(), v_encoder)?;
    let m = fam.m();
    let mut bits = BitString::new();
    for &beta in &payload.betas {
        bits.push_uint(beta as u128, m);
    }
    let x = to_symbols(&tx.encode(&bits));
    // the oracle code abstracts the channel into its block error
    let y = if tx.is_oracle() { x } else { setup.channel.transmit(&x, rng)? };
    let decoded = tx.decode(&y, rng)?;
    let betas = (0..p.k_winners())
        .map(|j| decoded.read_uint(j * m as usize, m).map(|b| b as u16))
        .collect::<Result<Vec<_>>>()?;
    let received = Received { payload: Some(Payload { v: v_decoder, betas }) };
    let outcomes = probes.iter().map(|probe| probe.decide(p, &received)).collect();
    Ok(FeedbackRound {
        v_encoder,
        v_decoder,
        n_tilde: observed.len(),
        tx_uses: tx.channel_uses(bits.len()),
        received,
        outcomes,
    })
}

/// Aggregate of repeated feedback rounds with fresh random winners.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackSummary {
    pub trials: usize,
    pub entropy: f64,
    pub mean_n_tilde: f64,
    pub var_n_tilde: f64,
    /// `n* = K·m/r`.
    pub n_star: f64,
    pub expected_n_tilde: (f64, f64),
    /// `log2 log2 N / (mean ñ + n*)`.
    pub rate_empirical: f64,
    /// `log2 log2 N / (E[ñ] + n*)` over the bounds on `E[ñ]`, as (low, high).
    pub rate_expected: (f64, f64),
    pub type1_errors: u64,
    pub type1_trials: u64,
    pub type2_errors: u64,
    pub type2_trials: u64,
    pub key_mismatches: u64,
}

impl FeedbackSummary {
    pub const CSV_HEADER: &'static str =
        "m,k,t,K,channel,mode,tx,trials,H,mean_n_tilde,n_star,rate_empirical,rate_expected_lo,rate_expected_hi,type1_errors,type2_errors";
}

/// `trials` independent rounds; trial `i` uses `channel_rng(seed, i)`, so
/// the result does not depend on the thread count.
pub fn run_feedback_experiment(
    p: &MoidParams,
    setup: &FeedbackSetup,
    tx: &TxCodeSpec,
    non_winner_probes: usize,
    trials: usize,
    seed: u64,
) -> Result<FeedbackSummary> {
    if trials == 0 {
        bail!(Config, "trials must be at least 1");
    }
    let k_winners = p.k_winners();
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = channel_rng(seed, trial as u64);
            let ids = random_distinct_ids(p, k_winners + non_winner_probes, &[], &mut rng)?;
            let winners = WinnerSet::new(ids[..k_winners].to_vec())?;
            let probes = ids.iter().map(|id| Probe::new(p, id.clone())).collect::<Result<Vec<_>>>()?;
            let round = run_feedback_round(p, &winners, setup, tx, &probes, &mut rng)?;
            let t1 = round.outcomes[..k_winners].iter().filter(|&&o| o == Outcome::F).count() as u64;
            let t2 = round.outcomes[k_winners..].iter().filter(|&&o| o == Outcome::T).count() as u64;
            let n = round.n_tilde as f64;
            Ok((n, n * n, t1, t2, (round.v_encoder != round.v_decoder) as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let sum = per_trial.iter().fold((0.0, 0.0, 0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3 + b.3, a.4 + b.4));
    let count = trials as f64;
    let mean = sum.0 / count;
    let var = (sum.1 / count - mean * mean).max(0.0);
    let fam = p.family();
    let n_star = (k_winners as u32 * fam.m()) as f64 / tx.rate();
    let log_log_n = biguint_log2(fam.log2_n());
    let bounds = expected_length_bounds(&setup.source, fam.key_bits())?;
    Ok(FeedbackSummary {
        trials,
        entropy: setup.source.entropy(),
        mean_n_tilde: mean,
        var_n_tilde: var,
        n_star,
        expected_n_tilde: bounds,
        rate_empirical: log_log_n / (mean + n_star),
        rate_expected: (log_log_n / (bounds.1 + n_star), log_log_n / (bounds.0 + n_star)),
        type1_errors: sum.2,
        type1_trials: (trials * k_winners) as u64,
        type2_errors: sum.3,
        type2_trials: (trials * non_winner_probes) as u64,
        key_mismatches: sum.4,
    })
}
