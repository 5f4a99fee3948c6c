//! Optimal multiuser scheduling for downlink systems with simultaneous
//! wireless information and power transfer.
//!
//! An access point serves `N` time-switching users. In every slot exactly one
//! user decodes information while the others harvest energy from the same
//! signal. The crate provides:
//!
//! * [`channel`]: placements, path loss and block Rayleigh fading,
//! * [`scheduling`]: the MT, PF and ET dual-metric selection rules,
//! * [`calibration`]: offline computation of their multipliers,
//! * [`baselines`]: order-based comparison schedulers,
//! * [`simulator`]: long-run statistics and rate-energy sweeps,
//! * [`oracle`]: exhaustive short-horizon reference optimizer,
//! * [`output`]: CSV and JSON-lines result rows.

pub mod baselines;
pub mod calibration;
pub mod channel;
pub mod cli;
pub mod error;
pub mod oracle;
pub mod output;
pub mod scheduling;
pub mod seeds;
pub mod simulator;

pub use error::{Error, Result};
