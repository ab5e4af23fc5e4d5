//! Expert aggregation with impossible-tuning regret guarantees and the
//! universal online-learning ensembles built on top of it.
//!
//! * [`numerics`]: weighted-entropy Bregman machinery and the mirror-descent solves.
//! * [`pea_core`]: multi-scale multiplicative weights with an auxiliary initial round.
//! * [`pea_adaptive`]: clipped-loss restart wrapper and the log-horizon doubling trick.
//! * [`base_learners`]: optimistic OMD base learners and surrogate losses.
//! * [`uol`]: the full-information and single-gradient ensembles.
//! * [`environments`]: synthetic adversaries with exactly known difficulty statistics.
//! * [`baseline`]: fixed-rate Hedge for comparison.
//! * [`harness`]: experiment configuration, runs, sweeps and output files.

pub mod base_learners;
pub mod baseline;
pub mod domain;
pub mod environments;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod numerics;
pub mod pea_adaptive;
pub mod pea_core;
mod serde_inf;
pub mod uol;

pub use domain::ConvexDomain;
pub use error::{Error, Result};
