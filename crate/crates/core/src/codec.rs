//! MOID and ranked MOID encoders and decoders.
//!
//! The sender draws a uniform key `v`, hashes every winner with `h_v`, and
//! sends `(v, h_v(i_1), .., h_v(i_K))` through the transmission code.
//! Receiver `i` decodes `(v̂, β_1, .., β_K)` and says `T` when `h_v̂(i)` equals
//! some `β_j`; the ranked decoder outputs the smallest such `j`.

use std::collections::BTreeSet;
use std::fmt;

use num_rational::Ratio;
use rand::Rng;

use crate::bitcodec::{
    self, elias_delta_decode_at, elias_delta_encode, fixed_header_decode_at, fixed_header_encode, BitString,
    Payload,
};
use crate::channel::channel_rng;
use crate::error::{bail, MoidError, Result};
use crate::hash::{FamilyParams, HashKey, Message, ReceiverId};
use crate::txcode::TxCodeSpec;

/// How `K` is announced in variable-K mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KHeader {
    EliasDelta,
    /// `K - 1` in `⌈log2 K_max⌉` bits.
    Fixed { k_max: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Plain,
    /// The first `shared_bits` bits of `v` are known to every receiver and
    /// are not transmitted.
    CommonRandomness { shared_bits: u32 },
    /// `v` carries a message of `(k+2)m` bits.
    TxMessage,
    /// The number of winners is sent ahead of the payload.
    VariableK(KHeader),
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Plain => f.write_str("plain"),
            Mode::CommonRandomness { shared_bits } => write!(f, "cr:{shared_bits}"),
            Mode::TxMessage => f.write_str("txmsg"),
            Mode::VariableK(KHeader::EliasDelta) => f.write_str("vark:delta"),
            Mode::VariableK(KHeader::Fixed { k_max }) => write!(f, "vark:fixed:{k_max}"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = MoidError;

    /// `plain`, `cr:<bits>`, `txmsg`, `vark` / `vark:delta`, `vark:fixed:<K_max>`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || MoidError::Config(format!("unknown mode {s:?}"));
        match parts.as_slice() {
            ["plain"] => Ok(Mode::Plain),
            ["txmsg"] | ["tx_message"] => Ok(Mode::TxMessage),
            ["cr", bits] => Ok(Mode::CommonRandomness { shared_bits: bits.parse().map_err(|_| bad())? }),
            ["vark"] | ["vark", "delta"] => Ok(Mode::VariableK(KHeader::EliasDelta)),
            ["vark", "fixed", k_max] => Ok(Mode::VariableK(KHeader::Fixed { k_max: k_max.parse().map_err(|_| bad())? })),
            _ => Err(bad()),
        }
    }
}

/// Full parameterization of a code.
#[derive(Debug, Clone, PartialEq)]
pub struct MoidParams {
    family: FamilyParams,
    k_winners: usize,
    mode: Mode,
}

impl MoidParams {
    pub fn new(family: FamilyParams, k_winners: usize, mode: Mode) -> Result<Self> {
        if k_winners == 0 {
            bail!(Parameter, "K must be at least 1");
        }
        match mode {
            Mode::CommonRandomness { shared_bits } if shared_bits > family.key_bits() => {
                bail!(Parameter, "shared bits {shared_bits} exceed the key length {}", family.key_bits())
            }
            Mode::VariableK(KHeader::Fixed { k_max }) if (k_winners as u64) > k_max => {
                bail!(Parameter, "K={k_winners} exceeds K_max={k_max}")
            }
            _ => {}
        }
        Ok(MoidParams { family, k_winners, mode })
    }

    pub fn plain(m: u32, k: usize, t: u32, k_winners: usize) -> Result<Self> {
        Self::new(FamilyParams::new(m, k, t)?, k_winners, Mode::Plain)
    }

    pub fn family(&self) -> &FamilyParams {
        &self.family
    }

    pub fn k_winners(&self) -> usize {
        self.k_winners
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Same code with a different number of winners.
    pub fn with_k(&self, k_winners: usize) -> Result<Self> {
        Self::new(self.family.clone(), k_winners, self.mode)
    }

    /// `n_0 = (k + 2 + K)·m`.
    pub fn n0(&self) -> usize {
        bitcodec::payload_len(&self.family, self.k_winners)
    }

    pub fn shared_bits(&self) -> u32 {
        match self.mode {
            Mode::CommonRandomness { shared_bits } => shared_bits,
            _ => 0,
        }
    }

    /// `R_c = n_0c / n_0`.
    pub fn rate_common(&self) -> Ratio<u64> {
        Ratio::new(self.shared_bits() as u64, self.n0() as u64)
    }

    pub fn header_bits(&self) -> usize {
        match self.mode {
            Mode::VariableK(KHeader::EliasDelta) => elias_delta_encode(self.k_winners as u64).unwrap().len(),
            Mode::VariableK(KHeader::Fixed { k_max }) => bitcodec::fixed_header_width(k_max) as usize,
            _ => 0,
        }
    }

    /// Bits handed to the transmission code.
    pub fn transmitted_bits(&self) -> usize {
        self.header_bits() + self.n0() - self.shared_bits() as usize
    }

    /// Set when `K·m ≥ log2 log2 N`, i.e. the hash part of the payload is no
    /// longer small against the identification rate.
    pub fn variable_k_warning(&self) -> Option<String> {
        if !matches!(self.mode, Mode::VariableK(_)) {
            return None;
        }
        let hash_bits = (self.k_winners as f64) * self.family.m() as f64;
        let lll = self.family.log2_log2_n();
        (hash_bits >= lll).then(|| {
            format!(
                "K={} is large for variable-K mode: K*m = {hash_bits} >= log2 log2 N = {lll:.3}",
                self.k_winners
            )
        })
    }

    pub fn check_id(&self, id: &ReceiverId) -> Result<()> {
        if self.family.contains_id(id) {
            Ok(())
        } else {
            Err(MoidError::Range(format!("receiver id {id} is not below N = 2^{}", self.family.log2_n())))
        }
    }
}

/// The unordered set of winners; iterates in ascending id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WinnerSet(BTreeSet<ReceiverId>);

impl WinnerSet {
    pub fn new(ids: impl IntoIterator<Item = ReceiverId>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for id in ids {
            if let Some(dup) = set.replace(id) {
                bail!(Input, "duplicate winner {dup}");
            }
        }
        if set.is_empty() {
            bail!(Input, "winner set is empty");
        }
        Ok(WinnerSet(set))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: &ReceiverId) -> bool {
        self.0.contains(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReceiverId> {
        self.0.iter()
    }

    pub fn to_vec(&self) -> Vec<ReceiverId> {
        self.0.iter().cloned().collect()
    }
}

/// Winners in rank order: position `j` holds the rank-`j+1` receiver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WinnerTuple(Vec<ReceiverId>);

impl WinnerTuple {
    pub fn new(ids: Vec<ReceiverId>) -> Result<Self> {
        let distinct: BTreeSet<_> = ids.iter().collect();
        if distinct.len() != ids.len() {
            bail!(Input, "ranked winners are not distinct");
        }
        if ids.is_empty() {
            bail!(Input, "winner tuple is empty");
        }
        Ok(WinnerTuple(ids))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ids(&self) -> &[ReceiverId] {
        &self.0
    }

    /// 1-based rank of `id`.
    pub fn rank_of(&self, id: &ReceiverId) -> Option<usize> {
        self.0.iter().position(|w| w == id).map(|j| j + 1)
    }

    pub fn to_set(&self) -> WinnerSet {
        WinnerSet(self.0.iter().cloned().collect())
    }
}

/// Unranked decision of one receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    T,
    F,
}

/// Ranked decision: a rank in `1..=K`, or `F` for outside the ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RankOutcome {
    Rank(usize),
    F,
}

impl RankOutcome {
    /// Treats every rank as the same rank.
    pub fn collapse(self) -> Outcome {
        match self {
            RankOutcome::Rank(_) => Outcome::T,
            RankOutcome::F => Outcome::F,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::T => "T",
            Outcome::F => "F",
        })
    }
}

impl fmt::Display for RankOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankOutcome::Rank(j) => write!(f, "{j}"),
            RankOutcome::F => f.write_str("F"),
        }
    }
}

/// Uniform key index in `[0, q^{k+2})`. The key space is a power of two, so
/// masking the generator's bits is already exact.
pub fn draw_v<R: Rng + ?Sized>(p: &MoidParams, rng: &mut R) -> u128 {
    p.family.random_key_index(rng)
}

/// The shared bits of `v` derived from a common seed.
pub fn common_prefix(p: &MoidParams, seed: u64) -> BitString {
    let mut rng = channel_rng(seed, u64::MAX);
    let mut bits = BitString::new();
    for _ in 0..p.shared_bits() {
        bits.push(rng.gen());
    }
    bits
}

/// Uniform `v` whose most significant bits are `prefix`.
pub fn draw_v_with_prefix<R: Rng + ?Sized>(p: &MoidParams, prefix: &BitString, rng: &mut R) -> Result<u128> {
    let key_bits = p.family.key_bits();
    if prefix.len() > key_bits as usize {
        bail!(Input, "prefix of {} bits is longer than the key", prefix.len());
    }
    let low_bits = key_bits - prefix.len() as u32;
    let high = if prefix.is_empty() { 0 } else { prefix.read_uint(0, prefix.len() as u32)? };
    let low = draw_v(p, rng) & if low_bits == 128 { u128::MAX } else { (1u128 << low_bits) - 1 };
    Ok(if low_bits == 128 { low } else { (high << low_bits) | low })
}

/// Payload with the winners' hashes in the given order.
pub fn make_payload(p: &MoidParams, ordered: &[ReceiverId], v: u128) -> Result<Payload> {
    let fam = &p.family;
    let key = fam.key_from_index(v)?;
    let betas = ordered
        .iter()
        .map(|id| {
            p.check_id(id)?;
            fam.hash_id(&key, id)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Payload { v, betas })
}

/// The bits handed to the transmission code: header, then payload with the
/// shared prefix removed.
pub fn frame(p: &MoidParams, payload: &Payload) -> Result<BitString> {
    if payload.betas.len() != p.k_winners {
        bail!(Input, "payload has {} hashes but K={}", payload.betas.len(), p.k_winners);
    }
    let body = bitcodec::serialize(payload, &p.family)?;
    let mut out = match p.mode {
        Mode::VariableK(KHeader::EliasDelta) => elias_delta_encode(p.k_winners as u64)?,
        Mode::VariableK(KHeader::Fixed { k_max }) => fixed_header_encode(p.k_winners as u64, k_max)?,
        _ => BitString::new(),
    };
    let skip = p.shared_bits() as usize;
    out.extend(&body.slice(skip, body.len()));
    Ok(out)
}

fn check_winner_count(p: &MoidParams, count: usize) -> Result<()> {
    if count != p.k_winners {
        bail!(Input, "{count} winners given but K={}", p.k_winners);
    }
    Ok(())
}

/// `φ(𝒦, v) = f(v, h_v(i_1), .., h_v(i_K))` with winners in ascending order.
pub fn moid_encode(p: &MoidParams, winners: &WinnerSet, v: u128, tx: &TxCodeSpec) -> Result<BitString> {
    check_winner_count(p, winners.len())?;
    let payload = make_payload(p, &winners.to_vec(), v)?;
    Ok(tx.encode(&frame(p, &payload)?))
}

/// Ranked encoder: the `β` order carries the ranks.
pub fn rmoid_encode(p: &MoidParams, winners: &WinnerTuple, v: u128, tx: &TxCodeSpec) -> Result<BitString> {
    check_winner_count(p, winners.len())?;
    let payload = make_payload(p, winners.ids(), v)?;
    Ok(tx.encode(&frame(p, &payload)?))
}

/// What every receiver recovers from the channel output; `None` when the
/// frame could not be parsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Received {
    pub payload: Option<Payload>,
}

impl Received {
    /// `v̂` as the transmission message, if the frame parsed.
    pub fn message(&self) -> Option<u128> {
        self.payload.as_ref().map(|p| p.v)
    }

    pub fn decided_k(&self) -> Option<usize> {
        self.payload.as_ref().map(|p| p.betas.len())
    }
}

/// Undoes the transmission code and the framing. Framing failures yield an
/// empty [`Received`], which every decoder maps to `F`.
pub fn receive<R: Rng + ?Sized>(
    p: &MoidParams,
    received: &[usize],
    tx: &TxCodeSpec,
    shared_prefix: Option<&BitString>,
    rng: &mut R,
) -> Result<Received> {
    let shared = p.shared_bits() as usize;
    match (shared_prefix, shared) {
        (None, s) if s > 0 => bail!(Input, "common-randomness mode needs the shared prefix"),
        (Some(b), s) if b.len() != s => bail!(Input, "shared prefix has {} bits, expected {s}", b.len()),
        _ => {}
    }
    let bits = match tx.decode(received, rng) {
        Ok(bits) => bits,
        Err(MoidError::Framing(_)) => return Ok(Received { payload: None }),
        Err(e) => return Err(e),
    };
    Ok(Received { payload: unframe(p, &bits, shared_prefix) })
}

fn unframe(p: &MoidParams, bits: &BitString, shared_prefix: Option<&BitString>) -> Option<Payload> {
    let (k_winners, start) = match p.mode {
        Mode::VariableK(KHeader::EliasDelta) => {
            let (k, used) = elias_delta_decode_at(bits, 0).ok()?;
            (usize::try_from(k).ok()?, used)
        }
        Mode::VariableK(KHeader::Fixed { k_max }) => {
            let (k, used) = fixed_header_decode_at(bits, 0, k_max).ok()?;
            (k as usize, used)
        }
        _ => (p.k_winners, 0),
    };
    let mut body = shared_prefix.cloned().unwrap_or_default();
    body.extend(&bits.slice(start, bits.len()));
    bitcodec::deserialize(&body, &p.family, k_winners).ok()
}

/// Hashes of one receiver id, prepared once and reused across keys.
#[derive(Debug, Clone)]
pub struct Probe {
    pub id: ReceiverId,
    message: Message,
}

impl Probe {
    pub fn new(p: &MoidParams, id: ReceiverId) -> Result<Self> {
        let message = p.family.message(&id)?;
        Ok(Probe { id, message })
    }

    fn hash(&self, p: &MoidParams, key: &HashKey) -> u16 {
        p.family.hash(key, &self.message)
    }

    /// `T` iff `h_v̂(i) = β_j` for some `j`.
    pub fn decide(&self, p: &MoidParams, r: &Received) -> Outcome {
        match self.decide_ranked(p, r) {
            RankOutcome::Rank(_) => Outcome::T,
            RankOutcome::F => Outcome::F,
        }
    }

    /// The smallest `j` with `h_v̂(i) = β_j`.
    pub fn decide_ranked(&self, p: &MoidParams, r: &Received) -> RankOutcome {
        let Some(payload) = &r.payload else {
            return RankOutcome::F;
        };
        let Ok(key) = p.family.key_from_index(payload.v) else {
            return RankOutcome::F;
        };
        let h = self.hash(p, &key);
        match payload.betas.iter().position(|&b| b == h) {
            Some(j) => RankOutcome::Rank(j + 1),
            None => RankOutcome::F,
        }
    }
}

/// Decoder `ψ_i` of receiver `i`.
pub fn moid_decode<R: Rng + ?Sized>(
    p: &MoidParams,
    i: &ReceiverId,
    received: &[usize],
    tx: &TxCodeSpec,
    shared_prefix: Option<&BitString>,
    rng: &mut R,
) -> Result<Outcome> {
    let probe = Probe::new(p, i.clone())?;
    let r = receive(p, received, tx, shared_prefix, rng)?;
    Ok(probe.decide(p, &r))
}

/// Ranked decoder `ψ̃_i`.
pub fn rmoid_decode<R: Rng + ?Sized>(
    p: &MoidParams,
    i: &ReceiverId,
    received: &[usize],
    tx: &TxCodeSpec,
    shared_prefix: Option<&BitString>,
    rng: &mut R,
) -> Result<RankOutcome> {
    let probe = Probe::new(p, i.clone())?;
    let r = receive(p, received, tx, shared_prefix, rng)?;
    Ok(probe.decide_ranked(p, &r))
}

/// Bits as channel input symbols.
pub fn to_symbols(bits: &BitString) -> Vec<usize> {
    bits.bits().iter().map(|&b| b as usize).collect()
}

/// Uniform ids below `min(N, 2^256)`, distinct from each other and from `avoid`.
pub fn random_distinct_ids<R: Rng + ?Sized>(
    p: &MoidParams,
    count: usize,
    avoid: &[ReceiverId],
    rng: &mut R,
) -> Result<Vec<ReceiverId>> {
    let space = p.family.log2_n();
    if *space < num_bigint::BigUint::from(64u32) {
        let n = 1u128 << num_traits::ToPrimitive::to_u32(space).unwrap();
        if (count + avoid.len()) as u128 > n {
            bail!(Parameter, "cannot pick {count} distinct ids among N = {n}");
        }
    }
    let mut seen: BTreeSet<ReceiverId> = avoid.iter().cloned().collect();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let id = p.family.random_id(rng);
        if seen.insert(id.clone()) {
            out.push(id);
        }
    }
    Ok(out)
}
