//! Bit strings, payload framing and the Elias δ integer code.

use std::fmt;
use std::str::FromStr;

use crate::error::{bail, MoidError, Result};
use crate::hash::FamilyParams;

/// A sequence of bits. The text form is a string of `'0'`/`'1'`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn zeros(len: usize) -> Self {
        BitString { bits: vec![false; len] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitString { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, pos: usize) -> Option<bool> {
        self.bits.get(pos).copied()
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    pub fn flip(&mut self, pos: usize) {
        self.bits[pos] = !self.bits[pos];
    }

    pub fn extend(&mut self, other: &BitString) {
        self.bits.extend_from_slice(&other.bits);
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn push_uint(&mut self, value: u128, width: u32) {
        debug_assert!(width == 128 || value >> width == 0);
        for j in (0..width).rev() {
            self.bits.push((value >> j) & 1 == 1);
        }
    }

    /// Reads `width` bits at `pos` as a big-endian integer.
    pub fn read_uint(&self, pos: usize, width: u32) -> Result<u128> {
        if width > 128 || pos + width as usize > self.bits.len() {
            bail!(Framing, "cannot read {width} bits at offset {pos} of {}", self.bits.len());
        }
        Ok(self.bits[pos..pos + width as usize]
            .iter()
            .fold(0u128, |acc, &b| (acc << 1) | b as u128))
    }

    pub fn slice(&self, start: usize, end: usize) -> BitString {
        BitString { bits: self.bits[start..end].to_vec() }
    }

    pub fn hamming_distance(&self, other: &BitString) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
            + self.len().abs_diff(other.len())
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = MoidError;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(MoidError::Input(format!("invalid bit character {c:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitString::from_bits)
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        BitString { bits: iter.into_iter().collect() }
    }
}

/// The uncoded codeword `(v, β_1, .., β_K)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Payload {
    pub v: u128,
    pub betas: Vec<u16>,
}

/// `n_0 = (k + 2 + K)·m`.
pub fn payload_len(fam: &FamilyParams, k_winners: usize) -> usize {
    (fam.ell() + k_winners) * fam.m() as usize
}

/// `v` in `(k+2)·m` bits, then each `β` in `m` bits, all big-endian.
pub fn serialize(p: &Payload, fam: &FamilyParams) -> Result<BitString> {
    let key_bits = fam.key_bits();
    if key_bits < 128 && p.v >> key_bits != 0 {
        bail!(Range, "key index {} not below 2^{key_bits}", p.v);
    }
    if let Some(b) = p.betas.iter().find(|&&b| !fam.field().contains(b)) {
        bail!(Range, "hash value {b} outside GF(2^{})", fam.m());
    }
    let mut out = BitString::new();
    out.push_uint(p.v, key_bits);
    for &b in &p.betas {
        out.push_uint(b as u128, fam.m());
    }
    Ok(out)
}

pub fn deserialize(bits: &BitString, fam: &FamilyParams, k_winners: usize) -> Result<Payload> {
    let expected = payload_len(fam, k_winners);
    if bits.len() != expected {
        bail!(Framing, "payload has {} bits, expected {expected}", bits.len());
    }
    let key_bits = fam.key_bits();
    let v = bits.read_uint(0, key_bits)?;
    let betas = (0..k_winners)
        .map(|j| bits.read_uint(key_bits as usize + j * fam.m() as usize, fam.m()).map(|b| b as u16))
        .collect::<Result<Vec<_>>>()?;
    Ok(Payload { v, betas })
}

fn bit_length(n: u64) -> u32 {
    64 - n.leading_zeros()
}

/// Elias γ: `⌊log2 n⌋` zeros followed by `n` in binary.
fn gamma_encode(n: u64, out: &mut BitString) {
    let len = bit_length(n);
    for _ in 1..len {
        out.push(false);
    }
    out.push_uint(n as u128, len);
}

fn gamma_decode(bits: &BitString, pos: usize) -> Result<(u64, usize)> {
    let zeros = bits.bits()[pos.min(bits.len())..].iter().take_while(|&&b| !b).count();
    if pos + zeros >= bits.len() {
        bail!(Framing, "truncated Elias code");
    }
    if zeros >= 64 {
        bail!(Framing, "Elias code prefix of {zeros} zeros is too long");
    }
    let n = bits.read_uint(pos + zeros, zeros as u32 + 1)? as u64;
    Ok((n, 2 * zeros + 1))
}

/// Elias δ: `γ(⌊log2 K⌋ + 1)` followed by the bits of `K` below its leading one.
pub fn elias_delta_encode(k: u64) -> Result<BitString> {
    if k == 0 {
        bail!(Input, "Elias delta encodes positive integers only");
    }
    let len = bit_length(k);
    let mut out = BitString::new();
    gamma_encode(len as u64, &mut out);
    out.push_uint((k & !(1u64 << (len - 1))) as u128, len - 1);
    Ok(out)
}

/// Decodes one δ codeword at the start of `bits`; returns the value and the
/// number of bits consumed.
pub fn elias_delta_decode(bits: &BitString) -> Result<(u64, usize)> {
    elias_delta_decode_at(bits, 0)
}

pub fn elias_delta_decode_at(bits: &BitString, pos: usize) -> Result<(u64, usize)> {
    let (len, used) = gamma_decode(bits, pos)?;
    if len > 64 {
        bail!(Framing, "Elias delta length {len} exceeds 64 bits");
    }
    let rest = bits.read_uint(pos + used, len as u32 - 1)? as u64;
    let k = if len == 64 { (1u64 << 63) | rest } else { (1u64 << (len - 1)) | rest };
    Ok((k, used + len as usize - 1))
}

/// Width of the fixed header, `⌈log2 K_max⌉`.
pub fn fixed_header_width(k_max: u64) -> u32 {
    if k_max <= 1 {
        0
    } else {
        bit_length(k_max - 1)
    }
}

/// Fixed-width header carrying `K - 1` in `⌈log2 K_max⌉` bits.
pub fn fixed_header_encode(k: u64, k_max: u64) -> Result<BitString> {
    if k == 0 || k > k_max {
        bail!(Input, "K={k} outside 1..={k_max}");
    }
    let mut out = BitString::new();
    out.push_uint((k - 1) as u128, fixed_header_width(k_max));
    Ok(out)
}

pub fn fixed_header_decode_at(bits: &BitString, pos: usize, k_max: u64) -> Result<(u64, usize)> {
    let width = fixed_header_width(k_max);
    let k = bits.read_uint(pos, width)? as u64 + 1;
    if k > k_max {
        bail!(Framing, "decoded K={k} exceeds K_max={k_max}");
    }
    Ok((k, width as usize))
}
