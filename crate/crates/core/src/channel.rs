//! Discrete memoryless channels.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, MoidError, Result};

/// Per-trial random stream used for channel noise and decoder coin flips.
pub type ChannelRng = ChaCha8Rng;

/// Stream `stream` of the generator seeded by `seed`.
pub fn channel_rng(seed: u64, stream: u64) -> ChannelRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Tolerance on float row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

const BA_TOL: f64 = 1e-9;
const GOLDEN_TOL: f64 = 1e-12;

/// A DMC `W(y|x)` with `|X|` rows and `|Y|` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dmc {
    rows: Vec<Vec<f64>>,
    exact: Vec<Vec<BigRational>>,
    cumulative: Vec<Vec<f64>>,
    crossover: Option<f64>,
}

/// Exact rational value of the shortest decimal that round-trips to `x`.
pub fn decimal_rational(x: f64) -> Result<BigRational> {
    if !x.is_finite() {
        bail!(Input, "probability {x} is not finite");
    }
    let text = format!("{x}");
    let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
    let digits: BigInt = format!("{int}{frac}")
        .parse()
        .map_err(|_| MoidError::Input(format!("cannot read {text} as a decimal")))?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    Ok(BigRational::new(digits, den))
}

fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

impl Dmc {
    /// Builds a channel from exact rows; each row must sum to exactly one.
    pub fn from_exact(exact: Vec<Vec<BigRational>>) -> Result<Self> {
        if exact.is_empty() || exact[0].is_empty() {
            bail!(Parameter, "channel matrix is empty");
        }
        let cols = exact[0].len();
        for (x, row) in exact.iter().enumerate() {
            if row.len() != cols {
                bail!(Parameter, "row {x} has {} entries, expected {cols}", row.len());
            }
            if row.iter().any(|p| p.is_negative()) {
                bail!(Parameter, "row {x} has a negative entry");
            }
            let sum: BigRational = row.iter().sum();
            if !sum.is_one() {
                bail!(Parameter, "row {x} sums to {sum}, not 1");
            }
        }
        let rows: Vec<Vec<f64>> = exact.iter().map(|r| r.iter().map(rational_to_f64).collect()).collect();
        Ok(Self::assemble(rows, exact, None))
    }

    /// Builds a channel from float rows via their shortest decimal forms;
    /// rows must sum to one within [`ROW_SUM_TOL`].
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            bail!(Parameter, "channel matrix is empty");
        }
        let cols = rows[0].len();
        for (x, row) in rows.iter().enumerate() {
            if row.len() != cols {
                bail!(Parameter, "row {x} has {} entries, expected {cols}", row.len());
            }
            if row.iter().any(|&p| !(p >= 0.0)) {
                bail!(Parameter, "row {x} has a negative or undefined entry");
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                bail!(Parameter, "row {x} sums to {sum}, not 1");
            }
        }
        let exact = rows
            .iter()
            .map(|r| r.iter().map(|&p| decimal_rational(p)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(rows, exact, None))
    }

    fn assemble(rows: Vec<Vec<f64>>, exact: Vec<Vec<BigRational>>, crossover: Option<f64>) -> Self {
        let cumulative = rows
            .iter()
            .map(|r| {
                let mut acc = 0.0;
                r.iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect()
            })
            .collect();
        Dmc { rows, exact, cumulative, crossover }
    }

    /// Binary symmetric channel with crossover `p ∈ [0, 1/2]`.
    pub fn bsc(p: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&p) {
            bail!(Parameter, "bsc crossover {p} outside [0, 1/2]");
        }
        let pr = decimal_rational(p)?;
        let qr = BigRational::one() - &pr;
        let exact = vec![vec![qr.clone(), pr.clone()], vec![pr, qr]];
        let rows = vec![vec![1.0 - p, p], vec![p, 1.0 - p]];
        Ok(Self::assemble(rows, exact, Some(p)))
    }

    pub fn noiseless() -> Self {
        Self::bsc(0.0).unwrap()
    }

    pub fn input_size(&self) -> usize {
        self.rows.len()
    }

    pub fn output_size(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn exact_rows(&self) -> &[Vec<BigRational>] {
        &self.exact
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.rows[x][y]
    }

    /// The crossover probability if this is a BSC.
    pub fn crossover(&self) -> Option<f64> {
        self.crossover
    }

    pub fn is_binary(&self) -> bool {
        self.input_size() == 2 && self.output_size() == 2
    }

    /// Every row is a point mass on a distinct output.
    pub fn is_noiseless(&self) -> bool {
        let mut seen = vec![false; self.output_size()];
        self.exact.iter().all(|row| match row.iter().position(|p| p.is_one()) {
            Some(y) if !seen[y] => {
                seen[y] = true;
                true
            }
            _ => false,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        if let Some(p) = self.crossover {
            if p == 0.0 {
                return x;
            }
            return if rng.gen::<f64>() < p { 1 - x } else { x };
        }
        let u: f64 = rng.gen();
        let cum = &self.cumulative[x];
        cum.iter().position(|&c| u < c).unwrap_or_else(|| {
            // rounding left the last cumulative value just below one
            self.rows[x].iter().rposition(|&p| p > 0.0).unwrap()
        })
    }

    /// Passes each symbol independently through the channel.
    pub fn transmit<R: Rng + ?Sized>(&self, xs: &[usize], rng: &mut R) -> Result<Vec<usize>> {
        if let Some(&x) = xs.iter().find(|&&x| x >= self.input_size()) {
            bail!(Input, "input symbol {x} outside alphabet of size {}", self.input_size());
        }
        Ok(xs.iter().map(|&x| self.sample(x, rng)).collect())
    }

    /// `C = max_P I(X;Y)` in bits per use.
    pub fn capacity(&self) -> f64 {
        match self.crossover {
            Some(p) => 1.0 - binary_entropy(p),
            None => self.blahut_arimoto().0,
        }
    }

    /// Blahut–Arimoto iteration; returns the capacity and the optimal input.
    pub fn blahut_arimoto(&self) -> (f64, Vec<f64>) {
        let nx = self.input_size();
        let ny = self.output_size();
        let mut p = vec![1.0 / nx as f64; nx];
        for _ in 0..100_000 {
            let out = self.output_dist_unchecked(&p);
            // D(W(.|x) || PW) in nats
            let d: Vec<f64> = (0..nx)
                .map(|x| {
                    (0..ny)
                        .filter(|&y| self.rows[x][y] > 0.0)
                        .map(|y| self.rows[x][y] * (self.rows[x][y] / out[y]).ln())
                        .sum()
                })
                .collect();
            let lower: f64 = p.iter().zip(&d).map(|(pi, di)| pi * di).sum();
            let upper = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if (upper - lower) / std::f64::consts::LN_2 < BA_TOL {
                return (lower / std::f64::consts::LN_2, p);
            }
            let weights: Vec<f64> = p.iter().zip(&d).map(|(pi, di)| pi * di.exp()).collect();
            let z: f64 = weights.iter().sum();
            p = weights.into_iter().map(|w| w / z).collect();
        }
        let out = self.output_dist_unchecked(&p);
        (self.mutual_information_with(&p, &out), p)
    }

    fn mutual_information_with(&self, p: &[f64], out: &[f64]) -> f64 {
        let mut total = 0.0;
        for (x, &px) in p.iter().enumerate() {
            for (y, &w) in self.rows[x].iter().enumerate() {
                if px > 0.0 && w > 0.0 {
                    total += px * w * (w / out[y]).log2();
                }
            }
        }
        total
    }

    pub fn mutual_information(&self, p: &[f64]) -> Result<f64> {
        let out = self.output_dist(p)?;
        Ok(self.mutual_information_with(p, &out))
    }

    fn output_dist_unchecked(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_size()];
        for (row, &px) in self.rows.iter().zip(p) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += px * w;
            }
        }
        out
    }

    /// `P·W`.
    pub fn output_dist(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.input_size() {
            bail!(Input, "input distribution has {} entries, expected {}", p.len(), self.input_size());
        }
        if p.iter().any(|&x| !(x >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            bail!(Input, "input distribution is not normalized");
        }
        Ok(self.output_dist_unchecked(p))
    }

    pub fn row_entropy(&self, x: usize) -> f64 {
        entropy(&self.rows[x])
    }

    /// `max_x H(W(.|x))` or `max_P H(P·W)`, with the maximizer.
    pub fn output_entropy_max(&self, mode: EntropyMode) -> Result<(f64, Vec<f64>)> {
        let nx = self.input_size();
        match mode {
            EntropyMode::Deterministic => {
                let (best, h) = (0..nx)
                    .map(|x| (x, self.row_entropy(x)))
                    .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
                let mut point = vec![0.0; nx];
                point[best] = 1.0;
                Ok((h, point))
            }
            EntropyMode::Stochastic => {
                if nx == 1 {
                    return Ok((self.row_entropy(0), vec![1.0]));
                }
                if nx != 2 {
                    bail!(Domain, "stochastic output entropy is only supported for binary input");
                }
                let f = |a: f64| entropy(&self.output_dist_unchecked(&[a, 1.0 - a]));
                let grid = 1000;
                let best = (0..=grid)
                    .map(|i| i as f64 / grid as f64)
                    .fold((0.0, f64::NEG_INFINITY), |acc, a| {
                        let v = f(a);
                        if v > acc.1 { (a, v) } else { acc }
                    });
                let lo = (best.0 - 1.0 / grid as f64).max(0.0);
                let hi = (best.0 + 1.0 / grid as f64).min(1.0);
                let a = golden_section_max(f, lo, hi, GOLDEN_TOL);
                let (a, v) = if f(a) >= best.1 { (a, f(a)) } else { best };
                Ok((v, vec![a, 1.0 - a]))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyMode {
    Deterministic,
    Stochastic,
}

impl FromStr for EntropyMode {
    type Err = MoidError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deterministic" | "det" => Ok(EntropyMode::Deterministic),
            "stochastic" | "sto" => Ok(EntropyMode::Stochastic),
            _ => Err(MoidError::Input(format!("unknown entropy mode {s:?}"))),
        }
    }
}

/// `h(p) = -p log2 p - (1-p) log2 (1-p)`.
pub fn binary_entropy(p: f64) -> f64 {
    entropy(&[p, 1.0 - p])
}

pub fn entropy(dist: &[f64]) -> f64 {
    dist.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
}

/// Maximizer of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    (lo + hi) / 2.0
}

fn format_prob(p: &BigRational) -> String {
    if p.is_zero() {
        return "0".into();
    }
    format!("{}", rational_to_f64(p))
}

impl fmt::Display for Dmc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_noiseless() && self.is_binary() && self.crossover.is_some() {
            return f.write_str("noiseless");
        }
        if let Some(p) = self.crossover {
            return write!(f, "bsc:{p}");
        }
        let rows: Vec<String> = self
            .exact
            .iter()
            .map(|r| r.iter().map(format_prob).collect::<Vec<_>>().join(" "))
            .collect();
        write!(f, "matrix[{}]", rows.join(";"))
    }
}

/// Parses `noiseless`, `bsc p=0.05`, `bsc:0.05`, `bsc 0.05` or
/// `matrix [0.9 0.1; 0.2 0.8]` (entries separated by spaces or commas).
impl FromStr for Dmc {
    type Err = MoidError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let lower = s.to_ascii_lowercase();
        if lower == "noiseless" {
            return Ok(Dmc::noiseless());
        }
        if let Some(rest) = lower.strip_prefix("bsc") {
            let rest = rest.trim_start_matches([':', ' ', '\t', '(']).trim_end_matches(')').trim();
            let rest = rest.strip_prefix("p").map(|r| r.trim_start().trim_start_matches('=').trim()).unwrap_or(rest);
            let p: f64 = rest
                .parse()
                .map_err(|_| MoidError::Config(format!("bad bsc crossover in {s:?}")))?;
            return Dmc::bsc(p);
        }
        if let Some(rest) = lower.strip_prefix("matrix") {
            let body = rest
                .trim_start_matches([':', ' ', '\t'])
                .trim()
                .strip_prefix('[')
                .and_then(|b| b.strip_suffix(']'))
                .ok_or_else(|| MoidError::Config(format!("matrix must be bracketed: {s:?}")))?;
            let rows = body
                .split(';')
                .map(|row| {
                    row.split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|t| !t.is_empty())
                        .map(parse_prob)
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            return Dmc::from_exact(rows);
        }
        Err(MoidError::Config(format!("unknown channel {s:?}")))
    }
}

/// A probability written as a decimal or a fraction `a/b`.
fn parse_prob(tok: &str) -> Result<BigRational> {
    if let Some((n, d)) = tok.split_once('/') {
        let n: BigInt = n.parse().map_err(|_| MoidError::Config(format!("bad fraction {tok:?}")))?;
        let d: BigInt = d.parse().map_err(|_| MoidError::Config(format!("bad fraction {tok:?}")))?;
        if d.is_zero() {
            bail!(Config, "zero denominator in {tok:?}");
        }
        return Ok(BigRational::new(n, d));
    }
    let x: f64 = tok.parse().map_err(|_| MoidError::Config(format!("bad probability {tok:?}")))?;
    decimal_rational(x)
}
