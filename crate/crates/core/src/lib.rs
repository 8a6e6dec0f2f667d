//! Link-level simulation of 2x2 MIMO X networks.
//!
//! Three transmission schemes are covered: superposed Alamouti codes with
//! local-CSIT precoding over three slots for two antennas, its extension to
//! four antennas built on a coordinate-interleaved 4x4 code over six slots,
//! and eigenvector-based interference alignment over a 3-symbol extension.
//! Trivial Alamouti repetition and a single-user TDMA baseline are provided
//! for comparison.

pub mod channel;
pub mod constellation;
pub mod error;
pub mod linalg;
pub mod receiver;
pub mod rng;
pub mod schemes;
pub mod sim;
pub mod stbc;
pub mod verify;

pub use error::{Error, Result};
