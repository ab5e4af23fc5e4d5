//! Unknown loss ranges: a clipped-loss restart wrapper around
//! [`MsmwcSession`], and a doubling trick over log₂ T for unknown horizons.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_inf};
use crate::pea_core::{MsmwcSession, SessionConfig, SessionTrace};

/// Anything that plays distributions over K experts.
pub trait Forecaster {
    fn experts(&self) -> usize;
    fn predict(&mut self, optimism: &[f64]) -> Result<Vec<f64>>;
    fn update(&mut self, loss: &[f64]) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeTracker {
    /// B₀: seed scale and restart reference.
    pub initial: f64,
    /// B_t: running max of ‖ℓ_s − m_s‖_∞ together with the seed.
    pub current: f64,
    pub restart_count: usize,
    /// 1-based rounds after whose update a restart fired.
    pub restart_rounds: Vec<usize>,
}

impl RangeTracker {
    pub fn new(initial: f64) -> Result<Self> {
        if !(initial.is_finite() && initial > 0.0) {
            return Err(Error::Config(format!("initial range must be positive, got {initial}")));
        }
        Ok(Self { initial, current: initial, restart_count: 0, restart_rounds: Vec::new() })
    }
}

/// ℓ̄ = m + (B_prev / B_new)(ℓ − m).
pub fn clipped_loss(loss: &[f64], optimism: &[f64], prev_range: f64, new_range: f64) -> Vec<f64> {
    let ratio = prev_range / new_range;
    loss.iter().zip(optimism).map(|(l, m)| m + ratio * (l - m)).collect()
}

#[derive(Debug, Clone)]
pub struct WrapperConfig {
    pub prior: Vec<f64>,
    pub horizon: u64,
    pub initial_range: f64,
    pub record_trace: bool,
}

impl WrapperConfig {
    pub fn new(prior: Vec<f64>, horizon: u64) -> Self {
        Self { prior, horizon, initial_range: 1.0, record_trace: false }
    }

    pub fn with_initial_range(mut self, b0: f64) -> Self {
        self.initial_range = b0;
        self
    }

    pub fn with_trace(mut self, on: bool) -> Self {
        self.record_trace = on;
        self
    }
}

/// Per-round bookkeeping of the wrapper.
#[derive(Debug, Clone, PartialEq)]
pub struct WrapperRound {
    pub optimism: Vec<f64>,
    pub loss: Vec<f64>,
    pub decision: Vec<f64>,
    pub surrogate: Vec<f64>,
    /// B_{t−1}, the range handed to the inner session.
    pub fed_range: f64,
    /// B_t after seeing ℓ_t.
    pub range: f64,
    pub active_pairs: usize,
    pub restarted: bool,
}

pub struct RestartWrapper {
    prior: Vec<f64>,
    horizon: u64,
    tracker: RangeTracker,
    session: Option<MsmwcSession>,
    pending: Option<(Vec<f64>, Vec<f64>, usize)>,
    rounds: usize,
    record: bool,
    log: Vec<WrapperRound>,
    finished: Vec<SessionTrace>,
}

impl RestartWrapper {
    pub fn new(config: WrapperConfig) -> Result<Self> {
        if config.horizon < 1 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        let prior = crate::numerics::SimplexPoint::new(config.prior)?.into_inner();
        Ok(Self {
            prior,
            horizon: config.horizon,
            tracker: RangeTracker::new(config.initial_range)?,
            session: None,
            pending: None,
            rounds: 0,
            record: config.record_trace,
            log: Vec::new(),
            finished: Vec::new(),
        })
    }

    pub fn tracker(&self) -> &RangeTracker {
        &self.tracker
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn rounds_played(&self) -> usize {
        self.rounds
    }

    pub fn session(&self) -> Option<&MsmwcSession> {
        self.session.as_ref()
    }

    /// Recorded rounds; empty unless tracing is on.
    pub fn log(&self) -> &[WrapperRound] {
        &self.log
    }

    /// Inner-session traces, finished ones first then the live one.
    pub fn session_traces(&self) -> Vec<&SessionTrace> {
        let mut out: Vec<&SessionTrace> = self.finished.iter().collect();
        if let Some(t) = self.session.as_ref().and_then(|s| s.trace()) {
            out.push(t);
        }
        out
    }

    fn ensure_session(&mut self) -> Result<&mut MsmwcSession> {
        if self.session.is_none() {
            let cfg = SessionConfig::new(self.prior.clone(), self.horizon, self.tracker.current).with_trace(self.record);
            self.session = Some(MsmwcSession::new(cfg)?);
        }
        Ok(self.session.as_mut().unwrap())
    }

    /// Fast decision family over one expert's optimism; see
    /// [`MsmwcSession::row_family`].
    pub fn row_family(&mut self, optimism: &[f64], row: usize) -> Result<crate::pea_core::RowTiltFamily> {
        if self.pending.is_some() {
            return Err(Error::Protocol("predict called twice without update".into()));
        }
        let b = self.tracker.current;
        self.ensure_session()?.row_family(optimism, b, row)
    }
}

impl Forecaster for RestartWrapper {
    fn experts(&self) -> usize {
        self.prior.len()
    }

    fn predict(&mut self, optimism: &[f64]) -> Result<Vec<f64>> {
        if self.pending.is_some() {
            return Err(Error::Protocol("predict called twice without update".into()));
        }
        let b = self.tracker.current;
        let record = self.record;
        let session = self.ensure_session()?;
        let p = session.predict(optimism, b)?;
        let active = if record { session.active_pairs(b) } else { 0 };
        self.pending = Some((optimism.to_vec(), p.clone(), active));
        Ok(p)
    }

    fn update(&mut self, loss: &[f64]) -> Result<()> {
        let (optimism, decision, active) = self
            .pending
            .take()
            .ok_or_else(|| Error::Protocol("update called before predict".into()))?;
        if loss.len() != optimism.len() {
            self.pending = Some((optimism, decision, active));
            return Err(Error::Domain("loss length does not match the number of experts".into()));
        }
        let prev = self.tracker.current;
        let err = loss.iter().zip(&optimism).fold(0.0_f64, |a, (l, m)| a.max((l - m).abs()));
        if !err.is_finite() {
            return Err(Error::Numerical("non-finite loss".into()));
        }
        let next = prev.max(err);
        let surrogate = clipped_loss(loss, &optimism, prev, next);
        self.session.as_mut().expect("predict creates the session").update(&surrogate)?;
        self.tracker.current = next;
        self.rounds += 1;
        let restarted = next > self.tracker.initial * self.horizon as f64;
        if restarted {
            self.tracker.restart_count += 1;
            self.tracker.restart_rounds.push(self.rounds);
            // Re-anchor the trigger; otherwise every later round would
            // restart again.
            self.tracker.initial = next;
            if let Some(t) = self.session.take().and_then(MsmwcSession::into_trace) {
                self.finished.push(t);
            }
        }
        if self.record {
            self.log.push(WrapperRound {
                optimism,
                loss: loss.to_vec(),
                decision,
                surrogate,
                fed_range: prev,
                range: next,
                active_pairs: active,
                restarted,
            });
        }
        Ok(())
    }
}

/// Σ_t ‖ℓ_t − ℓ̄_t‖_∞ over a wrapper log.
pub fn surrogate_drift(log: &[WrapperRound]) -> f64 {
    log.iter()
        .map(|r| norm_inf(&r.loss.iter().zip(&r.surrogate).map(|(a, b)| a - b).collect::<Vec<_>>()))
        .sum()
}

/// Restarts the wrapper with horizon 2^{2M} whenever the number of rounds
/// played exceeds the current guess 2^M.
pub struct DoublingRunner {
    prior: Vec<f64>,
    guess: u32,
    rounds: u64,
    record: bool,
    wrapper: RestartWrapper,
    doubling_rounds: Vec<u64>,
    retired: Vec<RestartWrapper>,
}

fn horizon_for(guess: u32) -> u64 {
    if guess >= 64 {
        u64::MAX
    } else {
        1u64 << guess
    }
}

impl DoublingRunner {
    pub fn new(prior: Vec<f64>, initial_guess: u32, initial_range: f64, record: bool) -> Result<Self> {
        if initial_guess < 1 {
            return Err(Error::Config("initial log-horizon guess must be at least 1".into()));
        }
        let wrapper = RestartWrapper::new(
            WrapperConfig::new(prior.clone(), horizon_for(initial_guess))
                .with_initial_range(initial_range)
                .with_trace(record),
        )?;
        Ok(Self { prior, guess: initial_guess, rounds: 0, record, wrapper, doubling_rounds: Vec::new(), retired: Vec::new() })
    }

    pub fn guess(&self) -> u32 {
        self.guess
    }

    pub fn horizon(&self) -> u64 {
        horizon_for(self.guess)
    }

    /// Rounds after which a doubling restart happened.
    pub fn doubling_rounds(&self) -> &[u64] {
        &self.doubling_rounds
    }

    pub fn wrapper(&self) -> &RestartWrapper {
        &self.wrapper
    }

    /// All wrapper instances in play order.
    pub fn wrappers(&self) -> impl Iterator<Item = &RestartWrapper> {
        self.retired.iter().chain(std::iter::once(&self.wrapper))
    }

    /// Range restarts summed over all wrapper instances.
    pub fn range_restarts(&self) -> usize {
        self.wrappers().map(|w| w.tracker().restart_count).sum()
    }
}

impl Forecaster for DoublingRunner {
    fn experts(&self) -> usize {
        self.prior.len()
    }

    fn predict(&mut self, optimism: &[f64]) -> Result<Vec<f64>> {
        if self.rounds + 1 > horizon_for(self.guess) {
            self.guess = self.guess.saturating_mul(2);
            let b = self.wrapper.tracker().current;
            let fresh = RestartWrapper::new(
                WrapperConfig::new(self.prior.clone(), horizon_for(self.guess))
                    .with_initial_range(b)
                    .with_trace(self.record),
            )?;
            self.retired.push(std::mem::replace(&mut self.wrapper, fresh));
            self.doubling_rounds.push(self.rounds);
        }
        self.wrapper.predict(optimism)
    }

    fn update(&mut self, loss: &[f64]) -> Result<()> {
        self.wrapper.update(loss)?;
        self.rounds += 1;
        Ok(())
    }
}

/// One point of a horizon sweep for the adaptive regret shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeSample {
    pub horizon: u64,
    pub regret: f64,
    pub kl: f64,
    pub log_grid: f64,
    pub variance: f64,
    pub final_range: f64,
}

impl ShapeSample {
    /// √((KL + log|G|)·V) + B_T·(KL + log|G|).
    pub fn scale(&self) -> f64 {
        let c = self.kl + self.log_grid;
        (c * self.variance).sqrt() + self.final_range * c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeReport {
    /// (horizon, ρ) for samples with a usable denominator.
    pub ratios: Vec<(u64, f64)>,
    pub skipped: Vec<u64>,
    pub max_ratio: f64,
    /// max ρ divided by ρ at the smallest horizon.
    pub growth: f64,
}

impl ShapeReport {
    pub const MAX_GROWTH: f64 = 2.0;

    pub fn holds(&self) -> bool {
        self.growth <= Self::MAX_GROWTH
    }
}

pub fn check_theorem4_shape(samples: &[ShapeSample]) -> ShapeReport {
    let mut sorted = samples.to_vec();
    sorted.sort_by_key(|s| s.horizon);
    let mut ratios = Vec::new();
    let mut skipped = Vec::new();
    for s in &sorted {
        let d = s.scale();
        if d > 0.0 && d.is_finite() {
            ratios.push((s.horizon, s.regret / d));
        } else {
            skipped.push(s.horizon);
        }
    }
    let max_ratio = ratios.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let growth = match ratios.first() {
        Some(&(_, first)) if first > 0.0 => max_ratio / first,
        Some(_) => {
            if max_ratio <= 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        }
        None => 1.0,
    };
    ShapeReport { ratios, skipped, max_ratio, growth }
}

/// Cumulative regret Σ_t ⟨ℓ_t, p_t − u⟩ of a wrapper log.
pub fn log_regret(log: &[WrapperRound], u: &[f64]) -> f64 {
    log.iter().map(|r| dot(&r.loss, &r.decision) - dot(&r.loss, u)).sum()
}
