//! Transmission codes `(f, g)` carrying the payload over the channel.

use std::fmt;

use rand::Rng;

use crate::bitcodec::BitString;
use crate::channel::Dmc;
use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TxCodeSpec {
    /// Uncoded; only meaningful over a noiseless channel.
    Identity,
    /// Each bit sent `ρ` times (odd), majority decoded.
    Repetition(u32),
    /// An idealized code of the given rate whose decoder fails with
    /// probability `block_error`, replacing the payload by uniform bits.
    Oracle { rate: f64, block_error: f64 },
}

impl TxCodeSpec {
    pub fn repetition(rho: u32) -> Result<Self> {
        if rho == 0 || rho % 2 == 0 {
            bail!(Parameter, "repetition factor {rho} must be odd");
        }
        Ok(TxCodeSpec::Repetition(rho))
    }

    pub fn oracle(rate: f64, block_error: f64) -> Result<Self> {
        if !(rate > 0.0) {
            bail!(Parameter, "oracle rate {rate} must be positive");
        }
        if !(0.0..=1.0).contains(&block_error) {
            bail!(Parameter, "oracle block error {block_error} outside [0, 1]");
        }
        Ok(TxCodeSpec::Oracle { rate, block_error })
    }

    /// Payload bits per channel use.
    pub fn rate(&self) -> f64 {
        match *self {
            TxCodeSpec::Identity => 1.0,
            TxCodeSpec::Repetition(rho) => 1.0 / rho as f64,
            TxCodeSpec::Oracle { rate, .. } => rate,
        }
    }

    /// `n = n_0 / r`, rounded up for the oracle.
    pub fn channel_uses(&self, n0: usize) -> usize {
        match *self {
            TxCodeSpec::Identity => n0,
            TxCodeSpec::Repetition(rho) => n0 * rho as usize,
            TxCodeSpec::Oracle { rate, .. } => (n0 as f64 / rate).ceil() as usize,
        }
    }

    pub fn is_oracle(&self) -> bool {
        matches!(self, TxCodeSpec::Oracle { .. })
    }

    /// Rejects code/channel pairs the code cannot run over.
    pub fn check_channel(&self, w: &Dmc) -> Result<()> {
        match self {
            TxCodeSpec::Identity if !w.is_noiseless() => {
                bail!(Parameter, "identity transmission needs a noiseless channel, got {w}")
            }
            TxCodeSpec::Identity | TxCodeSpec::Repetition(_) if !w.is_binary() => {
                bail!(Parameter, "{self} needs a binary channel, got {w}")
            }
            _ => Ok(()),
        }
    }

    pub fn encode(&self, payload: &BitString) -> BitString {
        match *self {
            TxCodeSpec::Identity | TxCodeSpec::Oracle { .. } => payload.clone(),
            TxCodeSpec::Repetition(rho) => payload
                .bits()
                .iter()
                .flat_map(|&b| std::iter::repeat(b).take(rho as usize))
                .collect(),
        }
    }

    pub fn decode<R: Rng + ?Sized>(&self, received: &[usize], rng: &mut R) -> Result<BitString> {
        if let Some(&y) = received.iter().find(|&&y| y > 1) {
            bail!(Input, "received symbol {y} is not binary");
        }
        match *self {
            TxCodeSpec::Identity => Ok(received.iter().map(|&y| y == 1).collect()),
            TxCodeSpec::Repetition(rho) => {
                let rho = rho as usize;
                if received.len() % rho != 0 {
                    bail!(Framing, "{} symbols is not a multiple of {rho}", received.len());
                }
                Ok(received
                    .chunks(rho)
                    .map(|block| 2 * block.iter().filter(|&&y| y == 1).count() > rho)
                    .collect())
            }
            TxCodeSpec::Oracle { block_error, .. } => {
                if rng.gen::<f64>() < block_error {
                    Ok((0..received.len()).map(|_| rng.gen::<bool>()).collect())
                } else {
                    Ok(received.iter().map(|&y| y == 1).collect())
                }
            }
        }
    }

    /// Probability that the decoded payload differs from the `n_0`-bit input.
    pub fn block_error_prob(&self, w: &Dmc, n0: usize) -> Result<f64> {
        self.check_channel(w)?;
        match *self {
            TxCodeSpec::Identity => Ok(0.0),
            TxCodeSpec::Oracle { block_error, .. } => Ok(block_error),
            TxCodeSpec::Repetition(rho) => {
                let Some(p) = w.crossover() else {
                    if w.is_noiseless() {
                        return Ok(0.0);
                    }
                    bail!(Domain, "repetition block error is computed for bsc channels only");
                };
                let p_maj = majority_error(rho, p);
                Ok(-(n0 as f64 * (-p_maj).ln_1p()).exp_m1())
            }
        }
    }
}

/// `Σ_{j > ρ/2} C(ρ, j) p^j (1-p)^{ρ-j}`.
pub fn majority_error(rho: u32, p: f64) -> f64 {
    let mut binom = 1.0f64;
    let mut total = 0.0;
    for j in 0..=rho {
        if 2 * j > rho {
            total += binom * p.powi(j as i32) * (1.0 - p).powi((rho - j) as i32);
        }
        binom = binom * (rho - j) as f64 / (j + 1) as f64;
    }
    total
}

impl fmt::Display for TxCodeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TxCodeSpec::Identity => f.write_str("identity"),
            TxCodeSpec::Repetition(rho) => write!(f, "rep:{rho}"),
            TxCodeSpec::Oracle { rate, block_error } => write!(f, "oracle:r={rate}:p={block_error:e}"),
        }
    }
}
