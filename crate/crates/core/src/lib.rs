//! Downlink channel training for FDD massive MIMO through active channel
//! sparsification.
//!
//! The pipeline runs per user: uplink pilots are denoised with a row-sparse
//! (ℓ2,1) recovery to find the uplink beamspace support, the support is mapped
//! back to an angular set and re-sampled on the downlink carrier, and the
//! downlink supports of all users feed a small binary program that picks the
//! beams to probe. Effective channels are then estimated with least squares
//! on the known per-user positions and a greedy zero-forcing precoder is
//! evaluated with ergodic rate bounds. A J-OMP compressed-sensing estimator is
//! provided as the comparison baseline.
//!
//! Modules:
//! - [`channel`]: array geometry, DFT beamspace, channel synthesis and
//!   theoretical variance/support.
//! - [`support`]: MMV recovery, thresholding and UL→DL support transfer.
//! - [`sparsify`]: beam/user graph, exact branch-and-bound ILP and the
//!   pre-beamforming plan.
//! - [`probe`]: probing matrices, pilot reception, LS estimation and J-OMP.
//! - [`precode`]: greedy zero-forcing and rate bounds.
//! - [`harness`]: seeded experiment sweeps and CSV reports.

pub mod channel;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod precode;
pub mod probe;
pub mod rng;
pub mod sparsify;
pub mod support;

pub use error::{Error, Result};
pub use linalg::C64;
