//! Capacity of linear periodically time-varying (LPTV) channels with additive
//! cyclostationary Gaussian noise, the standard model for narrowband power
//! line communication.
//!
//! The crate is organised bottom-up:
//!
//! - [`cyclo`]: polyphase (decimated components) split and merge of scalar sequences.
//! - [`noise`]: periodic noise autocorrelations (Katayama and Nassar models),
//!   sample paths and block covariance matrices.
//! - [`channel`]: LPTV tap tables, the equivalent MIMO matrices, a synthetic
//!   RLC channel generator and the channel CSV format.
//! - [`numerics`]: eigensolvers, matrix inverse square root and waterfilling.
//! - [`capacity_time`]: finite-block MIMO rates `R_K` and their limit.
//! - [`capacity_freq`]: the block-DTFT capacity integral.
//! - [`ofdm`]: the time-frequency OFDM baseline rate.
//! - [`outage`]: slow-fading outage estimates.
//! - [`sweep`]: configuration files and the SNR sweeps driven by the CLI.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity_freq;
pub mod capacity_time;
pub mod channel;
pub mod cyclo;
pub mod error;
pub mod noise;
pub mod numerics;
pub mod ofdm;
pub mod outage;
pub mod sweep;

pub use capacity_freq::{build_spectral_grid, capacity_thm2, SpectralGrid};
pub use capacity_time::{
    capacity_thm1, capacity_thm1_converged, katayama_capacity, optimal_input_covariance, CapacityResult,
    KatayamaCapacity, Method,
};
pub use channel::{ChannelInstance, LptvFilter};
pub use error::{Error, Result};
pub use noise::{CyclicAutocorrelation, KatayamaParams, NassarParams};
pub use numerics::WaterfillAllocation;
pub use ofdm::TfOfdmGrid;
pub use outage::OutageEstimate;
