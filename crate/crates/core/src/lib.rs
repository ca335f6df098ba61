//! Distributionally robust risk of cascading soft failures in a platoon of
//! vehicles coupled through a delayed consensus controller.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: communication topologies, Laplacians and their spectra.
//! - [`stability`]: the delay-dependent stability region and platoon certification.
//! - [`statistics`]: steady-state covariance of inter-vehicle distances.
//! - [`risk`]: level sets, conditional expectations, robust cascading risk and bounds.
//! - [`simulate`]: Euler–Maruyama Monte Carlo of the delayed SDE, used as an oracle.
//! - [`cli`]: scenario files and the command implementations behind the binary.

pub mod cli;
pub mod error;
pub mod graph;
pub mod quadrature;
pub mod risk;
pub mod simulate;
pub mod special;
pub mod stability;
pub mod statistics;

pub use error::{Error, Result};
pub use graph::{Graph, SpectralData};
pub use risk::{AmbiguitySet, RiskEntry, RiskResult, SystemicLevelSet};
pub use simulate::{Diffusion, SimConfig, SnapshotEnsemble};
pub use statistics::{DistanceStatistics, PlatoonParams};
