//! Secret-key rates, optimal operating points and cutoff distances for
//! passive BB84 transmitters, with an independent truncated Fock-space
//! simulator of the single-photon-source network.

// Negated float comparisons are how the validators reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod coherent;
pub mod engine;
pub mod error;
pub mod math;
pub mod oracle;
pub mod rate;
pub mod sps;

pub use error::{Error, Result};
