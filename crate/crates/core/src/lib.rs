//! Simulation and estimation of second-order coherence for pulsed and
//! stationary light.
//!
//! * [`states`]: photon-number distributions and their factorial moments.
//! * [`modes`]: temporal mode functions and the overlap factor eta(tau).
//! * [`simulate`]: click streams for pulse trains and stationary chaotic
//!   light, plus the closed-form curves they must reproduce.
//! * [`estimate`]: histograms and the g2 estimators built on them.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod estimate;
pub mod figures;
pub mod io;
pub mod modes;
pub mod quadrature;
pub mod rng;
pub mod simulate;
pub mod states;

pub use error::{Error, Result};
pub use modes::{EtaProfile, TemporalMode};
pub use states::QuantumState;
