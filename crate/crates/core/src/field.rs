//! Arithmetic in GF(2^m) and in the extension GF((2^m)^k).
//!
//! Base-field elements are integers in `[0, 2^m)` whose bit `j` is the
//! coefficient of `x^j`. Extension elements are coefficient vectors over the
//! base field in the polynomial basis, with `coeffs[j]` the coefficient of
//! `X^j`; their integer index is the base-`q` number with `coeffs[0]` as the
//! least significant digit.

use std::fmt;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{bail, MoidError, Result};

/// Largest supported base-field degree `m`.
pub const MAX_BASE_DEGREE: u32 = 16;

/// Largest supported extension degree `k`.
pub const MAX_EXT_DEGREE: usize = 16;

/// Lexicographically smallest irreducible polynomial over GF(2) of each degree 1..=16.
const IRREDUCIBLE: [u32; 16] = [
    0x2, 0x7, 0xb, 0x13, 0x25, 0x43, 0x83, 0x11b, 0x203, 0x409, 0x805, 0x1009, 0x201b, 0x4021,
    0x8003, 0x1002b,
];

/// The built-in irreducible polynomial of degree `m`, as an `(m+1)`-bit mask.
pub fn default_irreducible(m: u32) -> Option<u32> {
    if (1..=MAX_BASE_DEGREE).contains(&m) {
        Some(IRREDUCIBLE[m as usize - 1])
    } else {
        None
    }
}

fn degree(p: u32) -> i32 {
    31 - p.leading_zeros() as i32
}

fn gf2_rem(mut a: u32, b: u32) -> u32 {
    let db = degree(b);
    while a != 0 && degree(a) >= db {
        a ^= b << (degree(a) - db);
    }
    a
}

/// Irreducibility over GF(2) by trial division with every polynomial of
/// degree at most half the degree of `poly`.
pub fn is_irreducible_gf2(poly: u32) -> bool {
    let d = degree(poly);
    if d < 1 {
        return false;
    }
    let half = d / 2;
    (2u32..(1u32 << (half + 1))).all(|divisor| gf2_rem(poly, divisor) != 0)
}

/// Parameters of GF(2^m): the degree and the reduction polynomial, plus
/// log/antilog tables derived from them.
pub struct FieldParams {
    m: u32,
    irreducible: u32,
    exp: Vec<u16>,
    log: Vec<u16>,
}

impl fmt::Debug for FieldParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldParams")
            .field("m", &self.m)
            .field("irreducible", &format_args!("{:#x}", self.irreducible))
            .finish()
    }
}

impl PartialEq for FieldParams {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m && self.irreducible == other.irreducible
    }
}

impl Eq for FieldParams {}

impl FieldParams {
    /// GF(2^m) with the built-in irreducible polynomial.
    pub fn new(m: u32) -> Result<Self> {
        match default_irreducible(m) {
            Some(poly) => Self::with_irreducible(m, poly),
            None => bail!(Parameter, "field degree m={m} outside 1..={MAX_BASE_DEGREE}"),
        }
    }

    /// GF(2^m) reduced modulo a caller-chosen polynomial.
    pub fn with_irreducible(m: u32, irreducible: u32) -> Result<Self> {
        if !(1..=MAX_BASE_DEGREE).contains(&m) {
            bail!(Parameter, "field degree m={m} outside 1..={MAX_BASE_DEGREE}");
        }
        if degree(irreducible) != m as i32 {
            bail!(Parameter, "polynomial {irreducible:#x} does not have degree {m}");
        }
        if !is_irreducible_gf2(irreducible) {
            bail!(Parameter, "polynomial {irreducible:#x} is reducible over GF(2)");
        }
        let mut params = FieldParams { m, irreducible, exp: Vec::new(), log: Vec::new() };
        params.build_tables();
        Ok(params)
    }

    fn build_tables(&mut self) {
        let group = (1usize << self.m) - 1;
        let generator = (1..=group as u32)
            .find(|&g| {
                let mut x = g as u16;
                for step in 1..group {
                    if x == 1 {
                        return step == group;
                    }
                    x = self.mul_reference(x, g as u16);
                }
                x == 1
            })
            .expect("multiplicative group of a finite field is cyclic");
        let mut exp = vec![0u16; 2 * group];
        let mut log = vec![0u16; group + 1];
        let mut x: u16 = 1;
        for (i, slot) in exp.iter_mut().take(group).enumerate() {
            *slot = x;
            log[x as usize] = i as u16;
            x = self.mul_reference(x, generator as u16);
        }
        for i in group..2 * group {
            exp[i] = exp[i - group];
        }
        self.exp = exp;
        self.log = log;
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Field order `q = 2^m`.
    pub fn order(&self) -> u32 {
        1 << self.m
    }

    pub fn irreducible(&self) -> u32 {
        self.irreducible
    }

    #[inline]
    pub fn add(&self, a: u16, b: u16) -> u16 {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: u16, b: u16) -> u16 {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
    }

    /// Shift-and-XOR product reduced modulo the irreducible polynomial.
    pub fn mul_reference(&self, a: u16, b: u16) -> u16 {
        let (mut a, mut b) = (a as u32, b as u32);
        let top = 1u32 << self.m;
        let mut acc = 0u32;
        while b != 0 {
            if b & 1 == 1 {
                acc ^= a;
            }
            b >>= 1;
            a <<= 1;
            if a & top != 0 {
                a ^= self.irreducible;
            }
        }
        acc as u16
    }

    pub fn pow(&self, a: u16, e: u64) -> u16 {
        if e == 0 {
            return 1;
        }
        if a == 0 {
            return 0;
        }
        let group = (1u64 << self.m) - 1;
        let l = (self.log[a as usize] as u64 * (e % group)) % group;
        self.exp[l as usize]
    }

    pub fn inv(&self, a: u16) -> Option<u16> {
        if a == 0 {
            return None;
        }
        let group = (1usize << self.m) - 1;
        Some(self.exp[(group - self.log[a as usize] as usize) % group])
    }

    pub fn contains(&self, value: u16) -> bool {
        (value as u32) < self.order()
    }

    pub fn element(&self, value: u16) -> Result<FieldElement<'_>> {
        if !self.contains(value) {
            bail!(Range, "{value} is not an element of GF(2^{})", self.m);
        }
        Ok(FieldElement { value, params: self })
    }
}

/// An element of GF(2^m) tied to its field.
#[derive(Clone, Copy)]
pub struct FieldElement<'f> {
    value: u16,
    params: &'f FieldParams,
}

impl fmt::Debug for FieldElement<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@GF(2^{})", self.value, self.params.m)
    }
}

impl PartialEq for FieldElement<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value && self.params == other.params
    }
}

impl Eq for FieldElement<'_> {}

impl<'f> FieldElement<'f> {
    pub fn value(&self) -> u16 {
        self.value
    }

    pub fn params(&self) -> &'f FieldParams {
        self.params
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if std::ptr::eq(self.params, other.params) || self.params == other.params {
            Ok(())
        } else {
            Err(MoidError::Parameter(format!(
                "mismatched fields {:?} and {:?}",
                self.params, other.params
            )))
        }
    }

    pub fn try_add(self, other: Self) -> Result<Self> {
        self.check_same(&other)?;
        Ok(FieldElement { value: self.params.add(self.value, other.value), params: self.params })
    }

    pub fn try_mul(self, other: Self) -> Result<Self> {
        self.check_same(&other)?;
        Ok(FieldElement { value: self.params.mul(self.value, other.value), params: self.params })
    }

    pub fn pow(self, e: u64) -> Self {
        FieldElement { value: self.params.pow(self.value, e), params: self.params }
    }
}

/// An element of GF(q^k) in the polynomial basis over GF(q).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ExtFieldElement {
    coeffs: [u16; MAX_EXT_DEGREE],
    k: u8,
}

impl fmt::Debug for ExtFieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.coeffs()).finish()
    }
}

impl ExtFieldElement {
    pub fn coeffs(&self) -> &[u16] {
        &self.coeffs[..self.k as usize]
    }

    pub fn degree(&self) -> usize {
        self.k as usize
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs().iter().all(|&c| c == 0)
    }
}

/// Parameters of GF(q^k): base field, degree, and a monic irreducible
/// modulus of degree `k` over GF(q).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtFieldParams {
    base: Arc<FieldParams>,
    k: usize,
    /// `k + 1` coefficients, lowest degree first; `modulus[k] == 1`.
    modulus: Vec<u16>,
}

/// Search results for the default base fields where the search scans
/// about `q^2` reducible candidates first and takes seconds.
const KNOWN_MODULI: &[(u32, usize, &[u16])] = &[
    (10, 8, &[1, 0, 0, 0, 0, 1, 0, 44]),
    (11, 8, &[1, 0, 0, 0, 0, 1, 0, 7]),
    (12, 8, &[1, 0, 0, 0, 0, 1, 0, 3]),
];

type ModulusCache = Mutex<HashMap<(u32, usize), Vec<u16>>>;

static MODULUS_CACHE: OnceLock<ModulusCache> = OnceLock::new();

fn search_modulus(base: &FieldParams, k: usize) -> Result<Vec<u16>> {
    let q = base.order();
    let mut lower = vec![0u16; k];
    // a zero constant term leaves X as a factor
    if k > 1 {
        lower[0] = 1;
    }
    loop {
        if poly::is_irreducible(base, &lower) {
            return Ok(lower);
        }
        let mut carry = true;
        for digit in lower.iter_mut().rev() {
            let next = *digit as u32 + 1;
            if next == q {
                *digit = 0;
            } else {
                *digit = next as u16;
                carry = false;
                break;
            }
        }
        if carry {
            bail!(Parameter, "no irreducible polynomial of degree {k} found");
        }
    }
}

impl ExtFieldParams {
    /// Degree-`k` extension whose modulus is the first irreducible monic
    /// polynomial in lexicographic order of its coefficient vector
    /// `(c_0, c_1, .., c_{k-1})`, so `c_{k-1}` varies fastest.
    pub fn new(base: Arc<FieldParams>, k: usize) -> Result<Self> {
        if !(1..=MAX_EXT_DEGREE).contains(&k) {
            bail!(Parameter, "extension degree k={k} outside 1..={MAX_EXT_DEGREE}");
        }
        let key = (base.irreducible(), k);
        let cache = MODULUS_CACHE.get_or_init(Default::default);
        let cached = cache.lock().unwrap().get(&key).cloned();
        let lower = match cached {
            Some(lower) => lower,
            None => {
                let known = KNOWN_MODULI
                    .iter()
                    .find(|(m, kk, _)| default_irreducible(*m) == Some(key.0) && *kk == k);
                let lower = match known {
                    Some((_, _, lower)) => lower.to_vec(),
                    None => search_modulus(&base, k)?,
                };
                cache.lock().unwrap().insert(key, lower.clone());
                lower
            }
        };
        let mut modulus = lower;
        modulus.push(1);
        Ok(ExtFieldParams { base, k, modulus })
    }

    /// Extension with an explicit modulus given by its lower `k` coefficients.
    pub fn with_modulus(base: Arc<FieldParams>, lower: &[u16]) -> Result<Self> {
        let k = lower.len();
        if !(1..=MAX_EXT_DEGREE).contains(&k) {
            bail!(Parameter, "extension degree k={k} outside 1..={MAX_EXT_DEGREE}");
        }
        if lower.iter().any(|&c| !base.contains(c)) {
            bail!(Range, "modulus coefficient outside GF(2^{})", base.m());
        }
        if !poly::is_irreducible(&base, lower) {
            bail!(Parameter, "modulus is reducible over GF(2^{})", base.m());
        }
        let mut modulus = lower.to_vec();
        modulus.push(1);
        Ok(ExtFieldParams { base, k, modulus })
    }

    pub fn base(&self) -> &Arc<FieldParams> {
        &self.base
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn modulus(&self) -> &[u16] {
        &self.modulus
    }

    /// Number of bits in the integer index of an element, `k·m`.
    pub fn index_bits(&self) -> u32 {
        self.k as u32 * self.base.m()
    }

    pub fn zero(&self) -> ExtFieldElement {
        ExtFieldElement { coeffs: [0; MAX_EXT_DEGREE], k: self.k as u8 }
    }

    pub fn one(&self) -> ExtFieldElement {
        let mut e = self.zero();
        e.coeffs[0] = 1;
        e
    }

    pub fn element(&self, coeffs: &[u16]) -> Result<ExtFieldElement> {
        if coeffs.len() != self.k {
            bail!(Input, "expected {} coefficients, got {}", self.k, coeffs.len());
        }
        if let Some(&c) = coeffs.iter().find(|&&c| !self.base.contains(c)) {
            bail!(Range, "coefficient {c} outside GF(2^{})", self.base.m());
        }
        let mut e = self.zero();
        e.coeffs[..self.k].copy_from_slice(coeffs);
        Ok(e)
    }

    /// Element whose base-q digits (least significant first) are `index`.
    pub fn from_index(&self, index: u128) -> Result<ExtFieldElement> {
        let bits = self.index_bits();
        if bits < 128 && index >> bits != 0 {
            bail!(Range, "index {index} outside GF(q^{})", self.k);
        }
        if bits > 128 {
            bail!(Range, "GF(q^{}) indices exceed 128 bits", self.k);
        }
        let m = self.base.m();
        let mask = (1u128 << m) - 1;
        let mut e = self.zero();
        for j in 0..self.k {
            e.coeffs[j] = ((index >> (j as u32 * m)) & mask) as u16;
        }
        Ok(e)
    }

    /// Inverse of [`from_index`](Self::from_index); `None` when `k·m > 128`.
    pub fn to_index(&self, e: &ExtFieldElement) -> Option<u128> {
        if self.index_bits() > 128 {
            return None;
        }
        let m = self.base.m();
        Some(
            e.coeffs()
                .iter()
                .enumerate()
                .fold(0u128, |acc, (j, &c)| acc | (c as u128) << (j as u32 * m)),
        )
    }

    #[inline]
    pub fn add(&self, a: &ExtFieldElement, b: &ExtFieldElement) -> ExtFieldElement {
        let mut out = *a;
        for j in 0..self.k {
            out.coeffs[j] ^= b.coeffs[j];
        }
        out
    }

    pub fn mul(&self, a: &ExtFieldElement, b: &ExtFieldElement) -> ExtFieldElement {
        let k = self.k;
        let f = &*self.base;
        let mut prod = [0u16; 2 * MAX_EXT_DEGREE];
        for i in 0..k {
            let ai = a.coeffs[i];
            if ai == 0 {
                continue;
            }
            for j in 0..k {
                prod[i + j] ^= f.mul(ai, b.coeffs[j]);
            }
        }
        // X^k = -(lower modulus) = lower modulus in characteristic 2
        for d in (k..2 * k - 1).rev() {
            let c = prod[d];
            if c == 0 {
                continue;
            }
            prod[d] = 0;
            for j in 0..k {
                prod[d - k + j] ^= f.mul(c, self.modulus[j]);
            }
        }
        let mut out = self.zero();
        out.coeffs[..k].copy_from_slice(&prod[..k]);
        out
    }

    pub fn pow(&self, a: &ExtFieldElement, mut e: u128) -> ExtFieldElement {
        let mut base = *a;
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    /// Horner evaluation of `Σ coeffs[d] · point^d`; the empty sum is zero.
    pub fn poly_eval(&self, coeffs: &[ExtFieldElement], point: &ExtFieldElement) -> ExtFieldElement {
        coeffs
            .iter()
            .rev()
            .fold(self.zero(), |acc, c| self.add(&self.mul(&acc, point), c))
    }
}

/// Dense polynomials over GF(2^m), lowest degree first.
pub(crate) mod poly {
    use super::{FieldParams, MAX_EXT_DEGREE};

    #[cfg(test)]
    pub fn trim(p: &mut Vec<u16>) {
        while p.last() == Some(&0) {
            p.pop();
        }
    }

    #[cfg(test)]
    pub fn rem(f: &FieldParams, a: &[u16], b: &[u16]) -> Vec<u16> {
        let mut r = a.to_vec();
        trim(&mut r);
        let mut b = b.to_vec();
        trim(&mut b);
        assert!(!b.is_empty(), "division by the zero polynomial");
        let lead_inv = f.inv(*b.last().unwrap()).unwrap();
        while r.len() >= b.len() {
            let shift = r.len() - b.len();
            let c = f.mul(*r.last().unwrap(), lead_inv);
            for (j, &bj) in b.iter().enumerate() {
                r[shift + j] ^= f.mul(c, bj);
            }
            trim(&mut r);
        }
        r
    }

    /// Ben-Or test for the monic polynomial `X^k + Σ lower[j] X^j`:
    /// irreducible iff `gcd(f, X^{q^i} - X) = 1` for every `1 <= i <= k/2`.
    pub fn is_irreducible(f: &FieldParams, lower: &[u16]) -> bool {
        let k = lower.len();
        if k == 1 {
            return true;
        }
        if lower[0] == 0 {
            return false;
        }
        let mut h = [0u16; MAX_EXT_DEGREE];
        h[1] = 1;
        let mut sq = [0u16; 2 * MAX_EXT_DEGREE];
        for _ in 1..=k / 2 {
            // X^{q^i} by m Frobenius squarings
            for _ in 0..f.m() {
                sq[..2 * k].fill(0);
                for i in 0..k {
                    sq[2 * i] = f.mul(h[i], h[i]);
                }
                for d in (k..2 * k - 1).rev() {
                    let c = sq[d];
                    if c != 0 {
                        sq[d] = 0;
                        for j in 0..k {
                            sq[d - k + j] ^= f.mul(c, lower[j]);
                        }
                    }
                }
                h[..k].copy_from_slice(&sq[..k]);
            }
            let mut diff = [0u16; MAX_EXT_DEGREE + 1];
            diff[..k].copy_from_slice(&h[..k]);
            diff[1] ^= 1;
            let mut modulus = [0u16; MAX_EXT_DEGREE + 1];
            modulus[..k].copy_from_slice(lower);
            modulus[k] = 1;
            if gcd_degree(f, &mut modulus, &mut diff) != Some(0) {
                return false;
            }
        }
        true
    }

    fn degree(p: &[u16]) -> Option<usize> {
        p.iter().rposition(|&c| c != 0)
    }

    /// Degree of `gcd(a, b)`, or `None` when both are zero. Clobbers both.
    fn gcd_degree(f: &FieldParams, a: &mut [u16], b: &mut [u16]) -> Option<usize> {
        let (mut a, mut b) = (a, b);
        let mut da = degree(a);
        let mut db = degree(b);
        while let Some(d_b) = db {
            if let Some(mut d_a) = da {
                let lead_inv = f.inv(b[d_b]).unwrap();
                while d_a >= d_b {
                    let c = f.mul(a[d_a], lead_inv);
                    let shift = d_a - d_b;
                    for j in 0..=d_b {
                        a[shift + j] ^= f.mul(c, b[j]);
                    }
                    match degree(&a[..d_a]) {
                        Some(d) => d_a = d,
                        None => {
                            da = None;
                            break;
                        }
                    }
                    da = Some(d_a);
                }
            }
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut da, &mut db);
        }
        da
    }
}
