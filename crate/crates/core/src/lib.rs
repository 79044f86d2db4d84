//! Transmit covariance design for a full-duplex bidirectional link overheard
//! by an eavesdropper.
//!
//! The crate maximizes the sum secrecy rate `[R_a + R_b - R_e]^+` of two
//! multi-antenna nodes that talk to each other simultaneously on the same band,
//! either with known eavesdropper channels ([`adc`], [`multieve`]) or with only
//! moment information about them ([`robust`]).

pub mod adc;
pub mod conic;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod multieve;
pub mod reduction;
pub mod robust;
mod serde_complex;

pub use error::{Error, Result};
pub use model::{ChannelSet, CovariancePair, LinkRates, SystemParams};
pub use reduction::{ReducedCovariancePair, ReducedProblem};
