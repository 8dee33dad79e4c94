//! Multiple object identification (MOID) codes.
//!
//! A sender announces a set of `K` winners among `N` receivers over a noisy
//! channel; each receiver learns only whether it is a winner (or, in the
//! ranked variant, its rank). The construction sends a uniformly random key
//! `v` followed by the hash of every winner under the keyed hash `h_v`, drawn
//! from an almost strongly universal family built over GF(2^m).

pub mod analysis;
pub mod bitcodec;
pub mod channel;
pub mod codec;
pub mod error;
pub mod feedback;
pub mod field;
pub mod hash;
pub mod sim;
pub mod txcode;

pub use error::{MoidError, Result};
