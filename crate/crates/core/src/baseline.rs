//! Fixed-learning-rate Hedge, the non-adaptive comparison point.

use crate::error::{Error, Result};
use crate::linalg::log_sum_exp;
use crate::pea_adaptive::Forecaster;

/// √(log K / T).
pub fn default_rate(experts: usize, horizon: u64) -> f64 {
    ((experts as f64).ln() / horizon.max(1) as f64).sqrt()
}

/// p_t ∝ exp(−η Σ_{s<t} ℓ_s); optimism is ignored.
#[derive(Debug, Clone)]
pub struct Hedge {
    eta: f64,
    cumulative: Vec<f64>,
    pending: bool,
}

impl Hedge {
    pub fn new(experts: usize, eta: f64) -> Result<Self> {
        if experts == 0 {
            return Err(Error::Config("hedge needs at least one expert".into()));
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::Config(format!("hedge rate must be non-negative, got {eta}")));
        }
        Ok(Self { eta, cumulative: vec![0.0; experts], pending: false })
    }

    pub fn rate(&self) -> f64 {
        self.eta
    }
}

impl Forecaster for Hedge {
    fn experts(&self) -> usize {
        self.cumulative.len()
    }

    fn predict(&mut self, _optimism: &[f64]) -> Result<Vec<f64>> {
        if self.pending {
            return Err(Error::Protocol("predict called twice without update".into()));
        }
        self.pending = true;
        let logits: Vec<f64> = self.cumulative.iter().map(|c| -self.eta * c).collect();
        let norm = log_sum_exp(logits.iter().copied());
        Ok(logits.iter().map(|l| (l - norm).exp()).collect())
    }

    fn update(&mut self, loss: &[f64]) -> Result<()> {
        if !self.pending {
            return Err(Error::Protocol("update called before predict".into()));
        }
        if loss.len() != self.cumulative.len() {
            return Err(Error::Domain("loss length does not match the number of experts".into()));
        }
        self.pending = false;
        self.cumulative.iter_mut().zip(loss).for_each(|(c, l)| *c += l);
        Ok(())
    }
}
