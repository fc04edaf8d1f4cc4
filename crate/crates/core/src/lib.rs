//! Blind receiver for coded single-carrier frames over multipath channels:
//! joint channel estimation, equalisation, decoding and modulation/code
//! identification.

pub mod channel;
pub mod decision;
pub mod detector;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod ldpc;
pub mod mcs;
pub mod modem;
pub mod receiver;
pub mod rng;

pub use error::{BerdError, Result};
