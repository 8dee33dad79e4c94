//! Rates, exponents and exact error-probability oracles.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;

use crate::channel::{decimal_rational, golden_section_max, Dmc};
use crate::codec::{MoidParams, WinnerSet, WinnerTuple};
use crate::error::{bail, MoidError, Result};
use crate::hash::{FamilyParams, ReceiverId};
use crate::txcode::TxCodeSpec;

const RHO_TOL: f64 = 1e-12;

/// A transmission-code error exponent `E(r)` on `0 < r < C`.
pub trait ExponentModel {
    fn capacity(&self) -> f64;

    fn exponent(&self, r: f64) -> Result<f64>;
}

/// Gallager's random-coding exponent of a BSC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GallagerBsc {
    p: f64,
}

impl GallagerBsc {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&p) {
            bail!(Parameter, "bsc crossover {p} outside [0, 1/2]");
        }
        Ok(GallagerBsc { p })
    }

    pub fn for_channel(w: &Dmc) -> Result<Self> {
        match w.crossover() {
            Some(p) => Self::new(p),
            None => bail!(Domain, "the Gallager exponent is implemented for bsc channels only, got {w}"),
        }
    }

    /// `E_0(ρ) = ρ - (1+ρ) log2(p^{1/(1+ρ)} + (1-p)^{1/(1+ρ)})`.
    pub fn e0(&self, rho: f64) -> f64 {
        let s = 1.0 / (1.0 + rho);
        let sum = self.p.powf(s) + (1.0 - self.p).powf(s);
        rho - (1.0 + rho) * sum.log2()
    }

    /// Maximizing `ρ ∈ [0, 1]` and the exponent.
    pub fn optimize(&self, r: f64) -> Result<(f64, f64)> {
        let c = self.capacity();
        if !(r > 0.0 && r < c) {
            bail!(Domain, "rate {r} outside (0, C) with C = {c}");
        }
        let f = |rho: f64| self.e0(rho) - rho * r;
        let rho = golden_section_max(f, 0.0, 1.0, RHO_TOL);
        // the concave objective may peak at the boundary
        let best = [0.0, rho, 1.0].into_iter().map(|x| (x, f(x))).fold((0.0, f64::NEG_INFINITY), |a, b| {
            if b.1 > a.1 { b } else { a }
        });
        Ok((best.0, best.1.max(0.0)))
    }
}

impl ExponentModel for GallagerBsc {
    fn capacity(&self) -> f64 {
        1.0 - crate::channel::binary_entropy(self.p)
    }

    fn exponent(&self, r: f64) -> Result<f64> {
        self.optimize(r).map(|(_, e)| e)
    }
}

/// `E_r(r)` for a BSC.
pub fn gallager_exponent(w: &Dmc, r: f64) -> Result<f64> {
    GallagerBsc::for_channel(w)?.exponent(r)
}

/// A fixed exponent value, for plugging numbers into the triplet formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedExponent {
    pub capacity: f64,
    pub value: f64,
}

impl ExponentModel for FixedExponent {
    fn capacity(&self) -> f64 {
        self.capacity
    }

    fn exponent(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r <= self.capacity) {
            bail!(Domain, "rate {r} outside (0, C] with C = {}", self.capacity);
        }
        Ok(self.value)
    }
}

/// Oracle transmission code of rate `r` with block error `2^{-n E(r)}`,
/// `n = ⌈n_0 / r⌉`.
pub fn oracle_tx(model: &dyn ExponentModel, r: f64, n0: usize) -> Result<TxCodeSpec> {
    let e = model.exponent(r)?;
    let n = (n0 as f64 / r).ceil();
    TxCodeSpec::oracle(r, (-n * e).exp2())
}

/// Rate of a code at transmission rate `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// `log2 log2 N / n` with `n = n_0 / r`.
    pub finite: f64,
    /// `(1 - (K+3)/(K+ℓ))·r`.
    pub asymptotic: f64,
    /// `r·t/(k+2+K)` exactly.
    pub t_term: BigRational,
    /// `r·(log2 k + log2 m)/n_0`.
    pub log_term: f64,
    pub asymptotic_exact: BigRational,
    pub n0: usize,
}

/// Evaluates the rate expansion `log2 log2 N / n = r(tm + log2 k + log2 m)/n_0`.
pub fn rate_exact(fam: &FamilyParams, k_winners: usize, r: f64) -> Result<RateReport> {
    if !(r > 0.0) {
        bail!(Domain, "transmission rate {r} must be positive");
    }
    let r_exact = decimal_rational(r)?;
    let (m, k, t) = (fam.m() as usize, fam.k(), fam.t() as usize);
    let ell = fam.ell();
    let n0 = (ell + k_winners) * m;
    let t_term = &r_exact * BigRational::new(BigInt::from(t), BigInt::from(k + 2 + k_winners));
    let log_term = r * ((k as f64).log2() + (m as f64).log2()) / n0 as f64;
    let asymptotic_exact =
        &r_exact * (BigRational::one() - BigRational::new(BigInt::from(k_winners + 3), BigInt::from(k_winners + ell)));
    // log2 log2 N straight from the integer log2 N = k q^t m
    let finite = biguint_log2(fam.log2_n()) * r / n0 as f64;
    Ok(RateReport { finite, asymptotic: asymptotic_exact.to_f64().unwrap(), t_term, log_term, asymptotic_exact, n0 })
}

/// `log2` of a big integer without overflowing `f64`.
pub fn biguint_log2(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap().log2();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().unwrap().log2() + shift as f64
}

/// The `t ∈ {0, .., k-1}` maximizing the finite rate (ties go to the larger `t`).
pub fn best_t(m: u32, k: usize, k_winners: usize, r: f64) -> Result<u32> {
    let ts: Vec<u32> = if k == 1 { vec![0] } else { (0..k as u32).collect() };
    let mut best = (0, f64::NEG_INFINITY);
    for t in ts {
        let rate = rate_exact(&FamilyParams::new(m, k, t)?, k_winners, r)?.finite;
        if rate >= best.1 {
            best = (t, rate);
        }
    }
    Ok(best.0)
}

/// `R̂ = log2 N / n` for `ℓ = 3`, equal to `r/(3+K)`.
pub fn rhat(fam: &FamilyParams, k_winners: usize, r: f64) -> Result<f64> {
    if fam.k() != 1 || fam.t() != 0 {
        bail!(Domain, "R-hat is defined for l = 3 (k = 1, t = 0), got k={} t={}", fam.k(), fam.t());
    }
    Ok(r / (3 + k_winners) as f64)
}

/// `(log2 N)/n` from the raw parameters.
pub fn rhat_raw(fam: &FamilyParams, k_winners: usize, r: f64) -> f64 {
    let n = bitcodec_n0(fam, k_winners) as f64 / r;
    biguint_log2_n(fam) / n
}

fn bitcodec_n0(fam: &FamilyParams, k_winners: usize) -> usize {
    crate::bitcodec::payload_len(fam, k_winners)
}

fn biguint_log2_n(fam: &FamilyParams) -> f64 {
    fam.log2_n().to_f64().unwrap_or(f64::INFINITY)
}

/// Transmission-message rate `r·ℓ/(ℓ+K)`.
pub fn rate_tx_message(r: f64, ell: usize, k_winners: usize) -> Result<f64> {
    if ell < 3 {
        bail!(Domain, "l={ell} below 3");
    }
    Ok(r * ell as f64 / (ell + k_winners) as f64)
}

/// `(log2 |V|)/n` from the raw parameters.
pub fn rate_tx_message_raw(fam: &FamilyParams, k_winners: usize, r: f64) -> f64 {
    fam.key_bits() as f64 * r / bitcodec_n0(fam, k_winners) as f64
}

/// An achievable `(R, E1, E2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub rate: f64,
    pub e1: f64,
    pub e2: f64,
}

impl Triplet {
    pub fn new(rate: f64, e1: f64, e2: f64) -> Self {
        Triplet { rate, e1, e2 }
    }

    /// Componentwise `≥`.
    pub fn dominates(&self, other: &Triplet) -> bool {
        self.rate >= other.rate && self.e1 >= other.e1 && self.e2 >= other.e2
    }

    pub fn strictly_better_somewhere(&self, other: &Triplet) -> bool {
        self.rate > other.rate || self.e1 > other.e1 || self.e2 > other.e2
    }

    /// `(R, E1, E2)/(1 - R_c)`.
    pub fn scale(&self, rc: f64) -> Result<Triplet> {
        if !(0.0..1.0).contains(&rc) {
            bail!(Domain, "common randomness rate {rc} outside [0, 1)");
        }
        let s = 1.0 / (1.0 - rc);
        Ok(Triplet::new(self.rate * s, self.e1 * s, self.e2 * s))
    }
}

fn check_ell(ell: usize) -> Result<()> {
    if ell < 3 {
        bail!(Domain, "l={ell} below 3");
    }
    Ok(())
}

fn check_k(k_winners: usize) -> Result<()> {
    if k_winners == 0 {
        bail!(Domain, "K must be at least 1");
    }
    Ok(())
}

/// `((1 - (K+3)/(K+ℓ)) r, E(r), min{r/(K+ℓ), E(r)})`.
pub fn triplet_scheme1(r: f64, ell: usize, k_winners: usize, model: &dyn ExponentModel) -> Result<Triplet> {
    check_ell(ell)?;
    check_k(k_winners)?;
    let e = model.exponent(r)?;
    let kl = (k_winners + ell) as f64;
    Ok(Triplet::new((1.0 - (k_winners + 3) as f64 / kl) * r, e, (r / kl).min(e)))
}

/// A single-object ID code used `K` times:
/// `((1/K)(1 - 3/ℓ) r, E(r)/K, min{r/(ℓK), E(r)/K})`.
pub fn triplet_repeated_id(r: f64, ell: usize, k_winners: usize, model: &dyn ExponentModel) -> Result<Triplet> {
    check_ell(ell)?;
    check_k(k_winners)?;
    let e = model.exponent(r)?;
    let kk = k_winners as f64;
    Ok(Triplet::new(
        (1.0 - 3.0 / ell as f64) * r / kk,
        e / kk,
        (r / (ell as f64 * kk)).min(e / kk),
    ))
}

/// Moulin–Koetter codewords carrying `K` hashes:
/// `(2ρr/(K+1), 2E(r)/(K+1), min{(1-2ρ)r/(K+1), 2E(r)/K})`. With
/// `denominator_k_plus_one` the last term uses `K+1` instead of `K`.
pub fn triplet_moulin_koetter_ext(
    r: f64,
    rho: f64,
    k_winners: usize,
    model: &dyn ExponentModel,
    denominator_k_plus_one: bool,
) -> Result<Triplet> {
    check_k(k_winners)?;
    if !(0.0..=0.5).contains(&rho) {
        bail!(Domain, "rho={rho} outside [0, 1/2]");
    }
    let e = model.exponent(r)?;
    let k1 = (k_winners + 1) as f64;
    let last = if denominator_k_plus_one { k1 } else { k_winners as f64 };
    Ok(Triplet::new(2.0 * rho * r / k1, 2.0 * e / k1, ((1.0 - 2.0 * rho) * r / k1).min(2.0 * e / last)))
}

/// Maximal common randomness `R_c = ℓ/(ℓ+K)`:
/// `((ℓ-3) r/K, (ℓ+K)E(r)/K, min{r/K, (ℓ+K)E(r)/K})`.
pub fn triplet_common_randomness(r: f64, ell: usize, k_winners: usize, model: &dyn ExponentModel) -> Result<Triplet> {
    check_ell(ell)?;
    check_k(k_winners)?;
    let e = model.exponent(r)?;
    let kk = k_winners as f64;
    let lk = (ell + k_winners) as f64;
    Ok(Triplet::new((ell as f64 - 3.0) * r / kk, lk * e / kk, (r / kk).min(lk * e / kk)))
}

/// Scheme-1 triplet enlarged by common randomness of rate `R_c ≤ ℓ/(ℓ+K)`.
pub fn triplet_common_randomness_at(
    r: f64,
    ell: usize,
    k_winners: usize,
    rc: f64,
    model: &dyn ExponentModel,
) -> Result<Triplet> {
    let max = ell as f64 / (ell + k_winners) as f64;
    if rc > max + 1e-15 {
        bail!(Domain, "R_c={rc} exceeds l/(l+K) = {max}");
    }
    triplet_scheme1(r, ell, k_winners, model)?.scale(rc)
}

/// Triplet schemes selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Scheme1,
    RepeatedId,
    MoulinKoetter,
    CommonRandomness,
}

impl std::str::FromStr for Scheme {
    type Err = MoidError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "scheme1" => Ok(Scheme::Scheme1),
            "rep" | "repeated" => Ok(Scheme::RepeatedId),
            "mk" => Ok(Scheme::MoulinKoetter),
            "cr" => Ok(Scheme::CommonRandomness),
            _ => Err(MoidError::Input(format!("unknown scheme {s:?}"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Scheme1 => "1",
            Scheme::RepeatedId => "rep",
            Scheme::MoulinKoetter => "mk",
            Scheme::CommonRandomness => "cr",
        })
    }
}

pub const TRIPLET_CSV_HEADER: &str = "scheme,K,l,r,rho,R,E1,E2";

/// One triplet row; `ℓ` is ignored by `mk` and `ρ` by every other scheme.
/// `mk_k_plus_one` selects the `K+1` reading of the last `mk` term.
pub fn triplet_row(
    scheme: Scheme,
    k_winners: usize,
    ell: usize,
    r: f64,
    rho: f64,
    model: &dyn ExponentModel,
    mk_k_plus_one: bool,
) -> Result<String> {
    let t = match scheme {
        Scheme::Scheme1 => triplet_scheme1(r, ell, k_winners, model)?,
        Scheme::RepeatedId => triplet_repeated_id(r, ell, k_winners, model)?,
        Scheme::MoulinKoetter => triplet_moulin_koetter_ext(r, rho, k_winners, model, mk_k_plus_one)?,
        Scheme::CommonRandomness => triplet_common_randomness(r, ell, k_winners, model)?,
    };
    Ok(format!("{scheme},{k_winners},{ell},{r},{rho},{},{},{}", t.rate, t.e1, t.e2))
}

/// The `(r, ℓ)` schedule used to approach capacity for a given `ξ`:
/// `r = C(1 - ξ/2)` and the smallest `ℓ ≥ 3` with `(K+3)/(K+ℓ) < ξ/2`.
pub fn capacity_schedule(capacity: f64, xi: f64, k_winners: usize) -> Result<(f64, usize)> {
    if !(xi > 0.0 && xi < 1.0) {
        bail!(Domain, "xi={xi} outside (0, 1)");
    }
    let r = capacity * (1.0 - xi / 2.0);
    let mut ell = 3;
    while (k_winners + 3) as f64 / (k_winners + ell) as f64 >= xi / 2.0 {
        ell += 1;
    }
    Ok((r, ell))
}

/// `-(log2 K + log2 ε)/n_0`, the guaranteed finite-length type II exponent.
pub fn e2_lower_bound(fam: &FamilyParams, k_winners: usize) -> f64 {
    let eps = fam.epsilon().to_f64().unwrap();
    -((k_winners as f64).log2() + eps.log2()) / bitcodec_n0(fam, k_winners) as f64
}

/// `2^{-n_0 E_j} + 2^{-n E(r)}`: the type-j error of the concatenated code,
/// given the noiseless-channel error `λ_j` and the transmission block error.
pub fn concatenated_bound(lambda_noiseless: f64, tx_block_error: f64) -> f64 {
    (lambda_noiseless + tx_block_error).min(1.0)
}

/// `-(1/n) log2 λ`, infinite at zero.
pub fn empirical_exponent(lambda: f64, n: f64) -> f64 {
    if lambda <= 0.0 {
        f64::INFINITY
    } else {
        -lambda.log2() / n
    }
}

/// `ε·K` exactly.
pub fn bound_eps_k(fam: &FamilyParams, k_winners: usize) -> BigRational {
    fam.epsilon() * BigRational::from_integer(BigInt::from(k_winners))
}

fn key_count(fam: &FamilyParams) -> Result<u64> {
    match fam.key_count().to_u64() {
        Some(c) if c <= crate::hash::MAX_ENUMERABLE_KEYS => Ok(c),
        _ => bail!(Refused, "key space 2^{} is too large to enumerate", fam.key_bits()),
    }
}

/// `λ_2(i|𝒦) = |{v : ∃j h_v(i) = h_v(i_j)}| / |V|` over the noiseless channel.
pub fn lambda2_exact(p: &MoidParams, winners: &WinnerSet, i: &ReceiverId) -> Result<BigRational> {
    let fam = p.family();
    let total = key_count(fam)?;
    if winners.contains(i) {
        bail!(Input, "receiver {i} is a winner");
    }
    let mut ids = winners.to_vec();
    ids.push(i.clone());
    let msgs = ids.iter().map(|id| fam.message(id)).collect::<Result<Vec<_>>>()?;
    let table = fam.hash_table(&msgs)?;
    let (probe, rows) = table.split_last().unwrap();
    let hits = (0..total as usize)
        .into_par_iter()
        .filter(|&v| rows.iter().any(|row| row[v] == probe[v]))
        .count();
    Ok(BigRational::new(BigInt::from(hits), BigInt::from(total)))
}

/// Ranked oracle for the rank-`j` winner: key fractions with decoded rank
/// larger than `j` (type I) and smaller than `j` (type II).
pub fn rmoid_lambda_exact(p: &MoidParams, winners: &WinnerTuple, j: usize) -> Result<(BigRational, BigRational)> {
    let fam = p.family();
    let total = key_count(fam)?;
    if j == 0 || j > winners.len() {
        bail!(Input, "rank {j} outside 1..={}", winners.len());
    }
    let msgs = winners.ids().iter().map(|id| fam.message(id)).collect::<Result<Vec<_>>>()?;
    let table = fam.hash_table(&msgs)?;
    let (larger, smaller) = (0..total as usize)
        .into_par_iter()
        .map(|v| {
            let h = table[j - 1][v];
            let decoded = table.iter().position(|row| row[v] == h).map_or(usize::MAX, |d| d + 1);
            ((decoded > j) as u64, (decoded < j) as u64)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let frac = |c: u64| BigRational::new(BigInt::from(c), BigInt::from(total));
    Ok((frac(larger), frac(smaller)))
}
