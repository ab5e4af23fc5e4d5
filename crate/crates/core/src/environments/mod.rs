//! Synthetic adversaries whose difficulty statistics are known exactly.
//!
//! Every stream is generated up front from a `ChaCha8Rng` seeded with
//! `seed_from_u64`, so a (config, horizon, seed) triple reproduces the same
//! sequence bit for bit on every platform.

mod oco;
mod pea;

pub use oco::{
    CountingOracle, CurvatureTruth, GradientOracle, OcoStatistics, OcoStream, OcoStreamConfig, RoundLoss,
};
pub use pea::{PeaSequence, PeaStatistics, PeaStreamConfig};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One draw of U[−1, 1).
pub(crate) fn symmetric(rng: &mut ChaCha8Rng) -> f64 {
    2.0 * rng.random::<f64>() - 1.0
}

/// Uniform direction: d draws of U[−1, 1), rejected unless 0 < ‖v‖ ≤ 1,
/// then normalized.
pub(crate) fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| symmetric(rng)).collect();
        let n = crate::linalg::norm2(&v);
        if n > 1e-3 && n <= 1.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Fixed-width scientific formatting used by every CSV writer.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}
