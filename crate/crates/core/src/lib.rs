//! Time-domain preamble-based channel estimation for FBMC/OQAM.
//!
//! Modules follow the signal path: [`filterbank`] simulates the transceiver,
//! [`sysmodel`] builds the matrices of `y = Γ h + η`, [`preamble`] designs the
//! training symbols, [`estimators`] recovers the channel and [`montecarlo`]
//! runs NMSE sweeps.

pub mod dft;
pub mod error;
pub mod estimators;
pub mod filterbank;
pub mod montecarlo;
pub mod ofdm;
pub mod preamble;
pub mod sysmodel;

pub use error::{Error, Result};
