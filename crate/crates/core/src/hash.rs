//! The ε-almost strongly universal hash family `{h_v : A → GF(q)}`.
//!
//! A key `v = (e, a, b)` with `e ∈ GF(q^k)` and `a, b ∈ GF(q)` hashes a
//! receiver id `i` in two layers:
//!
//! 1. the id's base-`q^k` digits are the coefficients of a polynomial `P_i` of
//!    degree `< q^t` over GF(q^k), evaluated at `e` (almost universal with
//!    collision probability `(q^t - 1)/q^k`);
//! 2. the GF(q) coordinates `y_1..y_k` of `P_i(e)` feed the polynomial MAC
//!    `b + Σ y_j a^j` (strongly universal with `ε = k/q`).
//!
//! The family has `q^{k+2}` keys, range `GF(q)`, domain size `N = q^{k q^t}`
//! and `ε = k/q + (q^t - 1)/q^k`.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{bail, MoidError, Result};
use crate::field::{ExtFieldElement, ExtFieldParams, FieldParams};

/// Largest key space the exhaustive checks will enumerate.
pub const MAX_ENUMERABLE_KEYS: u64 = 1 << 24;

/// Sampled receiver ids are drawn below `2^ID_SAMPLE_BITS` when `N` is larger.
pub const ID_SAMPLE_BITS: u64 = 256;

/// Largest key length in bits; key indices are carried as `u128`.
pub const MAX_KEY_BITS: u32 = 128;

/// A receiver (object) index `i ∈ [0, N)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReceiverId(pub BigUint);

impl ReceiverId {
    pub fn as_biguint(&self) -> &BigUint {
        &self.0
    }
}

impl From<u64> for ReceiverId {
    fn from(v: u64) -> Self {
        ReceiverId(BigUint::from(v))
    }
}

impl From<BigUint> for ReceiverId {
    fn from(v: BigUint) -> Self {
        ReceiverId(v)
    }
}

impl fmt::Display for ReceiverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl std::str::FromStr for ReceiverId {
    type Err = MoidError;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .parse::<BigUint>()
            .map(ReceiverId)
            .map_err(|_| MoidError::Input(format!("invalid receiver id {s:?}")))
    }
}

/// Parameters `(m, k, t)` of the family and everything derived from them.
#[derive(Debug, Clone)]
pub struct FamilyParams {
    m: u32,
    k: usize,
    t: u32,
    field: Arc<FieldParams>,
    ext: ExtFieldParams,
    log2_n: BigUint,
}

impl PartialEq for FamilyParams {
    fn eq(&self, other: &Self) -> bool {
        (self.m, self.k, self.t) == (other.m, other.k, other.t)
    }
}

impl FamilyParams {
    pub fn new(m: u32, k: usize, t: u32) -> Result<Self> {
        if k == 0 {
            bail!(Parameter, "k must be at least 1");
        }
        if k == 1 && t != 0 {
            bail!(Parameter, "k=1 requires t=0 (epsilon would not vanish)");
        }
        if k >= 2 && t as usize > k - 1 {
            bail!(Parameter, "t={t} exceeds k-1={} (epsilon would not vanish)", k - 1);
        }
        let field = Arc::new(FieldParams::new(m)?);
        if (k as u32 + 2) * m > MAX_KEY_BITS {
            bail!(Parameter, "key length (k+2)m = {} exceeds {MAX_KEY_BITS} bits", (k as u32 + 2) * m);
        }
        let ext = ExtFieldParams::new(field.clone(), k)?;
        // log2 N = k q^t m
        let log2_n = BigUint::from(k as u64 * m as u64) << (t as u64 * m as u64);
        Ok(FamilyParams { m, k, t, field, ext, log2_n })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    /// `ℓ = k + 2`, the key length in field symbols.
    pub fn ell(&self) -> usize {
        self.k + 2
    }

    pub fn q(&self) -> u32 {
        self.field.order()
    }

    pub fn field(&self) -> &Arc<FieldParams> {
        &self.field
    }

    pub fn ext(&self) -> &ExtFieldParams {
        &self.ext
    }

    /// `log2 N = k·q^t·m`; `N` itself is `2^{log2 N}`.
    pub fn log2_n(&self) -> &BigUint {
        &self.log2_n
    }

    /// `log2 log2 N = t·m + log2 k + log2 m`.
    pub fn log2_log2_n(&self) -> f64 {
        self.t as f64 * self.m as f64 + (self.k as f64).log2() + (self.m as f64).log2()
    }

    /// Number of base-`q^k` digits of an id, `q^t`.
    pub fn message_len(&self) -> BigUint {
        BigUint::one() << (self.t as u64 * self.m as u64)
    }

    /// Bits in a key index, `(k+2)·m`.
    pub fn key_bits(&self) -> u32 {
        self.ell() as u32 * self.m
    }

    /// `|V| = |H| = q^{k+2}`.
    pub fn key_count(&self) -> BigUint {
        BigUint::one() << self.key_bits()
    }

    /// `ε = k/q + (q^t - 1)/q^k`, exactly.
    pub fn epsilon(&self) -> BigRational {
        let q = BigUint::from(self.q());
        let qt = num_traits::pow(q.clone(), self.t as usize);
        let qk = num_traits::pow(q.clone(), self.k);
        let au = BigRational::new((qt - 1u32).into(), qk.into());
        BigRational::new(BigUint::from(self.k).into(), q.into()) + au
    }

    /// The pairwise bound `ε|H|/|B| = k q^k + (q^t - 1) q` as an integer.
    pub fn pair_bound(&self) -> BigUint {
        let q = BigUint::from(self.q());
        let qt = num_traits::pow(q.clone(), self.t as usize);
        let qk = num_traits::pow(q.clone(), self.k);
        BigUint::from(self.k) * qk + (qt - 1u32) * q
    }

    pub fn contains_id(&self, id: &ReceiverId) -> bool {
        BigUint::from(id.0.bits()) <= self.log2_n
    }

    fn check_id(&self, id: &ReceiverId) -> Result<()> {
        if self.contains_id(id) {
            Ok(())
        } else {
            Err(MoidError::Range(format!("receiver id {} is not below N = 2^{}", id, self.log2_n)))
        }
    }

    /// Significant base-`q^k` digits of `id`, least significant first, with
    /// trailing zero digits dropped. Hashing only needs these.
    pub fn message(&self, id: &ReceiverId) -> Result<Message> {
        self.check_id(id)?;
        let words: Vec<u64> = id.0.iter_u64_digits().collect();
        let total_bits = id.0.bits();
        let m = self.m as u64;
        let chunks = total_bits.div_ceil(m);
        let digit_count = chunks.div_ceil(self.k as u64) as usize;
        let mut digits = Vec::with_capacity(digit_count);
        let mut coeffs = vec![0u16; self.k];
        for d in 0..digit_count {
            for (j, c) in coeffs.iter_mut().enumerate() {
                let pos = (d as u64 * self.k as u64 + j as u64) * m;
                *c = extract_bits(&words, pos, m as u32) as u16;
            }
            digits.push(self.ext.element(&coeffs).expect("digits are field elements"));
        }
        Ok(Message { digits })
    }

    /// The full message vector of `q^t` digits; refuses when `q^t > 2^20`.
    pub fn id_to_message(&self, id: &ReceiverId) -> Result<Vec<ExtFieldElement>> {
        let len = self.message_len();
        if len > BigUint::from(1u32 << 20) {
            bail!(Refused, "message has q^t = 2^{} digits", self.t as u64 * self.m as u64);
        }
        let mut digits = self.message(id)?.digits;
        digits.resize(len.to_usize().unwrap(), self.ext.zero());
        Ok(digits)
    }

    pub fn message_to_id(&self, digits: &[ExtFieldElement]) -> Result<ReceiverId> {
        if BigUint::from(digits.len()) > self.message_len() {
            bail!(Range, "message longer than q^t digits");
        }
        let km = self.ext.index_bits() as usize;
        let mut id = BigUint::zero();
        for (d, digit) in digits.iter().enumerate() {
            for (j, &c) in digit.coeffs().iter().enumerate() {
                if c != 0 {
                    id |= BigUint::from(c) << (d * km + j * self.m as usize);
                }
            }
        }
        Ok(ReceiverId(id))
    }

    pub fn key(&self, e: ExtFieldElement, a: u16, b: u16) -> Result<HashKey> {
        if e.degree() != self.k {
            bail!(Input, "key element has degree {} instead of {}", e.degree(), self.k);
        }
        if !self.field.contains(a) || !self.field.contains(b) {
            bail!(Range, "key components outside GF(q)");
        }
        Ok(HashKey { e, a, b })
    }

    /// Key with index `v = idx(e)·q² + idx(a)·q + idx(b)`.
    pub fn key_from_index(&self, v: u128) -> Result<HashKey> {
        let bits = self.key_bits();
        if bits < 128 && v >> bits != 0 {
            bail!(Range, "key index {v} not below q^(k+2) = 2^{bits}");
        }
        let mask = (1u128 << self.m) - 1;
        let b = (v & mask) as u16;
        let a = ((v >> self.m) & mask) as u16;
        let e = self.ext.from_index(v >> (2 * self.m))?;
        Ok(HashKey { e, a, b })
    }

    pub fn key_index(&self, key: &HashKey) -> u128 {
        let e = self.ext.to_index(&key.e).expect("key bits fit in 128");
        (e << (2 * self.m)) | ((key.a as u128) << self.m) | key.b as u128
    }

    /// Coordinates `y_1..y_k` of `P_i(e)`.
    fn inner(&self, e: &ExtFieldElement, msg: &Message) -> ExtFieldElement {
        self.ext.poly_eval(&msg.digits, e)
    }

    /// The strongly universal layer `b + Σ_{j=1..k} y_j a^j`.
    #[inline]
    fn outer(&self, y: &ExtFieldElement, a: u16, b: u16) -> u16 {
        let f = &*self.field;
        let s = y.coeffs().iter().rev().fold(0u16, |acc, &yj| f.mul(acc ^ yj, a));
        s ^ b
    }

    pub fn hash(&self, key: &HashKey, msg: &Message) -> u16 {
        self.outer(&self.inner(&key.e, msg), key.a, key.b)
    }

    pub fn hash_id(&self, key: &HashKey, id: &ReceiverId) -> Result<u16> {
        Ok(self.hash(key, &self.message(id)?))
    }

    fn enumerable_keys(&self) -> Result<u64> {
        let count = self.key_count();
        if count > BigUint::from(MAX_ENUMERABLE_KEYS) {
            bail!(Refused, "key space 2^{} is too large to enumerate", self.key_bits());
        }
        Ok(count.to_u64().unwrap())
    }

    /// For every key, `hash(key, msg)` for each message, in key-index order.
    /// Requires an enumerable key space.
    pub fn hash_table(&self, msgs: &[Message]) -> Result<Vec<Vec<u16>>> {
        let count = self.enumerable_keys()? as usize;
        let q = self.q() as usize;
        let mut table = vec![vec![0u16; count]; msgs.len()];
        for (row, msg) in table.iter_mut().zip(msgs) {
            row.par_chunks_mut(q * q).enumerate().for_each(|(e_idx, chunk)| {
                let e = self.ext.from_index(e_idx as u128).unwrap();
                let y = self.inner(&e, msg);
                for a in 0..q {
                    let s = self.outer(&y, a as u16, 0);
                    for b in 0..q {
                        chunk[a * q + b] = s ^ b as u16;
                    }
                }
            });
        }
        Ok(table)
    }

    /// Uniform id below `min(N, 2^ID_SAMPLE_BITS)`.
    pub fn random_id<R: Rng + ?Sized>(&self, rng: &mut R) -> ReceiverId {
        let bits = self.log2_n.to_u64().map_or(ID_SAMPLE_BITS, |b| b.min(ID_SAMPLE_BITS));
        ReceiverId(random_bits(rng, bits))
    }

    pub fn random_key_index<R: Rng + ?Sized>(&self, rng: &mut R) -> u128 {
        let bits = self.key_bits();
        let x: u128 = rng.gen();
        if bits >= 128 {
            x
        } else {
            x & ((1u128 << bits) - 1)
        }
    }

    /// Exact count of keys mapping each sampled `α` to each `β`; every count
    /// must equal `|H|/|B|`.
    pub fn verify_strong_uniformity(&self, alphas: &[ReceiverId]) -> Result<VerificationReport> {
        self.enumerable_keys()?;
        let msgs = alphas.iter().map(|a| self.message(a)).collect::<Result<Vec<_>>>()?;
        let expected = (self.key_count() / self.q()).to_u64().unwrap();
        let q = self.q() as usize;
        let lines = msgs
            .par_iter()
            .enumerate()
            .flat_map_iter(|(idx, msg)| {
                let table = self.hash_table(std::slice::from_ref(msg)).unwrap();
                let mut counts = vec![0u64; q];
                for &h in &table[0] {
                    counts[h as usize] += 1;
                }
                counts.into_iter().enumerate().map(move |(beta, count)| CheckLine {
                    kind: CheckKind::Uniformity,
                    alphas: (idx, None),
                    betas: (beta as u16, None),
                    count,
                    bound: expected,
                })
            })
            .collect();
        Ok(VerificationReport::new(alphas.to_vec(), lines))
    }

    /// Exact count of keys with `h(α₁) = β₁, h(α₂) = β₂` for every `(β₁, β₂)`
    /// and each sampled pair, checked against `ε|H|/|B|`; also reports the
    /// marginal collision count `|{v : h_v(α₁) = h_v(α₂)}|` against `ε|H|`.
    pub fn verify_pairwise_bound(&self, pairs: &[(ReceiverId, ReceiverId)]) -> Result<VerificationReport> {
        self.enumerable_keys()?;
        if let Some((a, _)) = pairs.iter().find(|(a, b)| a == b) {
            bail!(Input, "pair ({a}, {a}) has equal ids");
        }
        let mut alphas = Vec::with_capacity(2 * pairs.len());
        for (a, b) in pairs {
            alphas.push(a.clone());
            alphas.push(b.clone());
        }
        let msgs = alphas.iter().map(|a| self.message(a)).collect::<Result<Vec<_>>>()?;
        let bound = self.pair_bound().to_u64().unwrap();
        let marginal_bound = bound * self.q() as u64;
        let q = self.q() as usize;
        let lines = (0..pairs.len())
            .into_par_iter()
            .flat_map_iter(|p| {
                let table = self.hash_table(&msgs[2 * p..2 * p + 2]).unwrap();
                let mut counts = vec![0u64; q * q];
                for (&h1, &h2) in table[0].iter().zip(&table[1]) {
                    counts[h1 as usize * q + h2 as usize] += 1;
                }
                let collisions: u64 = (0..q).map(|b| counts[b * q + b]).sum();
                let pair_lines = counts.into_iter().enumerate().map(move |(cell, count)| CheckLine {
                    kind: CheckKind::Pair,
                    alphas: (2 * p, Some(2 * p + 1)),
                    betas: ((cell / q) as u16, Some((cell % q) as u16)),
                    count,
                    bound,
                });
                pair_lines.chain(std::iter::once(CheckLine {
                    kind: CheckKind::Collision,
                    alphas: (2 * p, Some(2 * p + 1)),
                    betas: (0, None),
                    count: collisions,
                    bound: marginal_bound,
                }))
            })
            .collect();
        Ok(VerificationReport::new(alphas, lines))
    }
}

/// A key `(e, a, b)` selecting one member of the family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashKey {
    pub e: ExtFieldElement,
    pub a: u16,
    pub b: u16,
}

/// The nonzero-prefix digit vector of a receiver id, ready for hashing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    digits: Vec<ExtFieldElement>,
}

impl Message {
    pub fn digits(&self) -> &[ExtFieldElement] {
        &self.digits
    }
}

fn extract_bits(words: &[u64], pos: u64, width: u32) -> u64 {
    let word = (pos / 64) as usize;
    let offset = (pos % 64) as u32;
    let lo = words.get(word).copied().unwrap_or(0) >> offset;
    let hi = if offset + width > 64 {
        words.get(word + 1).copied().unwrap_or(0) << (64 - offset)
    } else {
        0
    };
    (lo | hi) & ((1u64 << width) - 1)
}

pub(crate) fn random_bits<R: Rng + ?Sized>(rng: &mut R, bits: u64) -> BigUint {
    let words = bits.div_ceil(64) as usize;
    let mut digits: Vec<u64> = (0..words).map(|_| rng.gen()).collect();
    let rem = bits % 64;
    if rem != 0 {
        if let Some(last) = digits.last_mut() {
            *last &= (1u64 << rem) - 1;
        }
    }
    BigUint::from_slice(
        &digits
            .iter()
            .flat_map(|w| [*w as u32, (*w >> 32) as u32])
            .collect::<Vec<_>>(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// `|{v : h_v(α) = β}| = |H|/|B|`.
    Uniformity,
    /// `|{v : h_v(α₁) = β₁, h_v(α₂) = β₂}| ≤ ε|H|/|B|`.
    Pair,
    /// `|{v : h_v(α₁) = h_v(α₂)}| ≤ ε|H|`.
    Collision,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckLine {
    pub kind: CheckKind,
    pub alphas: (usize, Option<usize>),
    pub betas: (u16, Option<u16>),
    pub count: u64,
    pub bound: u64,
}

impl CheckLine {
    pub fn ok(&self) -> bool {
        match self.kind {
            CheckKind::Uniformity => self.count == self.bound,
            CheckKind::Pair | CheckKind::Collision => self.count <= self.bound,
        }
    }
}

/// Outcome of an exhaustive-over-keys verification.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    alphas: Vec<ReceiverId>,
    lines: Vec<CheckLine>,
}

impl VerificationReport {
    fn new(alphas: Vec<ReceiverId>, lines: Vec<CheckLine>) -> Self {
        VerificationReport { alphas, lines }
    }

    pub fn lines(&self) -> &[CheckLine] {
        &self.lines
    }

    pub fn alpha(&self, idx: usize) -> &ReceiverId {
        &self.alphas[idx]
    }

    pub fn violations(&self) -> impl Iterator<Item = &CheckLine> {
        self.lines.iter().filter(|l| !l.ok())
    }

    pub fn violation_count(&self) -> usize {
        self.violations().count()
    }

    pub fn max_count(&self, kind: CheckKind) -> Option<u64> {
        self.lines.iter().filter(|l| l.kind == kind).map(|l| l.count).max()
    }

    /// One line in the form `alpha=.. beta=.. count=.. bound=.. ok=..`.
    pub fn format_line(&self, line: &CheckLine) -> String {
        let alpha = match line.alphas {
            (a, None) => self.alphas[a].to_string(),
            (a, Some(b)) => format!("{},{}", self.alphas[a], self.alphas[b]),
        };
        let beta = match (line.kind, line.betas) {
            (CheckKind::Collision, _) => "*".to_string(),
            (_, (b, None)) => b.to_string(),
            (_, (b1, Some(b2))) => format!("{b1},{b2}"),
        };
        format!("alpha={alpha} beta={beta} count={} bound={} ok={}", line.count, line.bound, line.ok())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(&self.format_line(line));
            out.push('\n');
        }
        out
    }
}

/// `count` ids sampled by [`FamilyParams::random_id`].
pub fn sample_ids<R: Rng + ?Sized>(fam: &FamilyParams, count: usize, rng: &mut R) -> Vec<ReceiverId> {
    (0..count).map(|_| fam.random_id(rng)).collect()
}

/// `count` pairs of distinct sampled ids.
pub fn sample_pairs<R: Rng + ?Sized>(
    fam: &FamilyParams,
    count: usize,
    rng: &mut R,
) -> Vec<(ReceiverId, ReceiverId)> {
    (0..count)
        .map(|_| loop {
            let a = fam.random_id(rng);
            let b = fam.random_id(rng);
            if a != b {
                break (a, b);
            }
        })
        .collect()
}
