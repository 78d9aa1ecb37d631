//! Error exponents for memory-1 trellis codes obtained from asynchronous
//! two-user multiple-access codes over a virtual MAC.
//!
//! * [`prob`]: distributions, information measures, types.
//! * [`channels`]: DMCs, combining operations, the virtual MAC.
//! * [`gallager`]: `E0` and the time-varying trellis exponent.
//! * [`async_exp`]: the asynchronous MAC random-coding exponent, its grid
//!   oracle, and the comparison curve.
//! * [`trellis`]: the shared-codebook memory-1 trellis construction,
//!   Viterbi decoding, and Monte Carlo error measurement.
//! * [`packing`]: error patterns and the packing-bound verifier.


pub mod async_exp;
pub mod channels;
pub mod error;
pub mod gallager;
pub mod packing;
pub mod prob;
pub mod trellis;

pub use error::{Error, Result};
