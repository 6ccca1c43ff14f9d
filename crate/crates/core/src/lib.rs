//! Synthetic full-duplex self-interference (SI) data and complex-valued
//! neural Hammerstein models.
//!
//! The crate covers the whole pipeline: OFDM transmit packets
//! ([`waveform`]), SI channel sampling ([`channel`]), memoryless PA / ADC
//! nonlinearities ([`nonlinearity`]), labeled dataset generation and
//! persistence ([`dataset`]), a small complex-valued reverse-mode engine
//! ([`cxnn`]), the neural and least-squares models ([`models`]) and the
//! experiment orchestration used by the `sicnet` binary ([`harness`]).

pub mod channel;
pub mod cxnn;
pub mod dataset;
mod error;
pub mod harness;
pub mod models;
pub mod nonlinearity;
pub mod rng;
pub mod waveform;

pub use error::{Error, Result};

/// Complex double-precision sample type used throughout the crate.
pub type C64 = num_complex::Complex64;
