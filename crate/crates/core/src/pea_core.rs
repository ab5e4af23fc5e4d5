//! Multi-scale multiplicative weights with correction, run over
//! expert × learning-rate pairs and warmed up by an auxiliary initial round.
//!
//! Pairs are laid out expert-major: pair (i, k) lives at index `i * n + k`
//! where `n` is the grid size and `k` indexes rates in increasing order.

use crate::error::{Error, Result};
use crate::linalg::{dot, log_sum_exp};
use crate::numerics::{
    self, entropic_omd_solve_log, kl_divergence, InequalityCheck,
    LogWeights, OmdSolution, WeightedEntropyGeometry,
};

/// ⌈log₂ T⌉ for T ≥ 1.
pub fn ceil_log2(t: u64) -> u32 {
    if t <= 1 {
        0
    } else {
        64 - (t - 1).leading_zeros()
    }
}

/// Geometric grid {2^k / (32·scale) : k = −⌈log₂T⌉ … ⌈log₂T⌉}.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningRateGrid {
    rates: Vec<f64>,
    exponents: Vec<i32>,
    base_scale: f64,
    exponent_range: u32,
}

impl LearningRateGrid {
    pub fn new(horizon: u64, base_scale: f64) -> Result<Self> {
        if horizon < 1 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if !(base_scale.is_finite() && base_scale > 0.0) {
            return Err(Error::Config(format!("grid base scale must be positive, got {base_scale}")));
        }
        let m = ceil_log2(horizon) as i32;
        let unit = 1.0 / (32.0 * base_scale);
        let exponents: Vec<i32> = (-m..=m).collect();
        let rates = exponents.iter().map(|&k| unit * 2f64.powi(k)).collect();
        Ok(Self { rates, exponents, base_scale, exponent_range: m as u32 })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn exponents(&self) -> &[i32] {
        &self.exponents
    }

    pub fn base_scale(&self) -> f64 {
        self.base_scale
    }

    pub fn exponent_range(&self) -> u32 {
        self.exponent_range
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub prior: Vec<f64>,
    pub horizon: u64,
    /// B₁, the loss range observed before the auxiliary round.
    pub initial_range: f64,
    /// C₀ for the single-gradient grid G′; 1 for the standard grid.
    pub grid_scale_factor: f64,
    pub record_trace: bool,
}

impl SessionConfig {
    pub fn new(prior: Vec<f64>, horizon: u64, initial_range: f64) -> Self {
        Self { prior, horizon, initial_range, grid_scale_factor: 1.0, record_trace: false }
    }

    pub fn with_trace(mut self, on: bool) -> Self {
        self.record_trace = on;
        self
    }

    pub fn with_grid_scale_factor(mut self, c0: f64) -> Self {
        self.grid_scale_factor = c0;
        self
    }
}

/// Everything needed to re-evaluate the per-round inequalities.
#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub optimism: Vec<f64>,
    pub loss: Vec<f64>,
    pub range: f64,
    pub active: Vec<bool>,
    /// w'_t
    pub w_prev: LogWeights,
    /// w_t
    pub w_t: LogWeights,
    /// w'_{t+1}
    pub w_next: LogWeights,
    pub decision: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SessionTrace {
    pub prior: Vec<f64>,
    pub horizon: u64,
    pub initial_range: f64,
    pub grid: LearningRateGrid,
    pub geometry: WeightedEntropyGeometry,
    /// Round 0: ℓ₀ = 0, m₀ = B₁/4, w₀ = w'₀.
    pub auxiliary: RoundRecord,
    pub rounds: Vec<RoundRecord>,
}

struct Pending {
    optimism: Vec<f64>,
    range: f64,
    active: Vec<bool>,
    w_t: LogWeights,
    decision: Vec<f64>,
}

/// One run of the expert algorithm over a fixed horizon.
pub struct MsmwcSession {
    experts: usize,
    prior: Vec<f64>,
    horizon: u64,
    initial_range: f64,
    grid: LearningRateGrid,
    geometry: WeightedEntropyGeometry,
    state: LogWeights,
    pending: Option<Pending>,
    last_range: f64,
    rounds: usize,
    trace: Option<SessionTrace>,
}

impl MsmwcSession {
    pub fn new(config: SessionConfig) -> Result<Self> {
        let SessionConfig { prior, horizon, initial_range, grid_scale_factor, record_trace } = config;
        if horizon < 1 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if !(initial_range.is_finite() && initial_range > 0.0) {
            return Err(Error::Config(format!("initial range must be positive, got {initial_range}")));
        }
        if !(grid_scale_factor.is_finite() && grid_scale_factor > 0.0) {
            return Err(Error::Config("grid scale factor must be positive".into()));
        }
        let prior = numerics::SimplexPoint::new(prior)?.into_inner();
        let experts = prior.len();
        let grid = LearningRateGrid::new(horizon, grid_scale_factor * initial_range)?;
        let n = grid.len();
        let rates: Vec<f64> = (0..experts).flat_map(|_| grid.rates().iter().copied()).collect();
        let geometry = WeightedEntropyGeometry::new(rates)?;

        // Auxiliary round: w'_0(i, η) = p'_0(i)/|G|, cost a_0 = 2ηB₁².
        let w0 = LogWeights::from_values(
            (0..experts * n).map(|j| prior[j / n] / n as f64).collect(),
        );
        let b1 = initial_range;
        let a0: Vec<f64> = geometry.rates().iter().map(|eta| 2.0 * eta * b1 * b1).collect();
        let all = vec![true; experts * n];
        let w1 = entropic_omd_solve_log(&a0, &w0.logs, &geometry, &all)?.weights;

        let trace = record_trace.then(|| SessionTrace {
            prior: prior.clone(),
            horizon,
            initial_range,
            grid: grid.clone(),
            geometry: geometry.clone(),
            auxiliary: RoundRecord {
                optimism: vec![b1 / 4.0; experts],
                loss: vec![0.0; experts],
                range: b1,
                active: all.clone(),
                w_prev: w0.clone(),
                w_t: w0.clone(),
                w_next: w1.clone(),
                decision: prior.clone(),
            },
            rounds: Vec::new(),
        });

        Ok(Self {
            experts,
            prior,
            horizon,
            initial_range,
            grid,
            geometry,
            state: w1,
            pending: None,
            last_range: initial_range,
            rounds: 0,
            trace,
        })
    }

    pub fn experts(&self) -> usize {
        self.experts
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn initial_range(&self) -> f64 {
        self.initial_range
    }

    pub fn grid(&self) -> &LearningRateGrid {
        &self.grid
    }

    pub fn geometry(&self) -> &WeightedEntropyGeometry {
        &self.geometry
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    /// w'_t, the state the next prediction is anchored at.
    pub fn state(&self) -> &LogWeights {
        &self.state
    }

    pub fn rounds_played(&self) -> usize {
        self.rounds
    }

    pub fn trace(&self) -> Option<&SessionTrace> {
        self.trace.as_ref()
    }

    pub fn into_trace(self) -> Option<SessionTrace> {
        self.trace
    }

    /// Pair mask of the restricted simplex: rate 2^k/(32·c·B₁) survives while
    /// 32·c·η·B ≤ 1, i.e. while 2^k · B ≤ B₁ (exact in floating point).
    pub fn active_mask(&self, range: f64) -> Vec<bool> {
        let n = self.grid.len();
        let col: Vec<bool> = self
            .grid
            .exponents()
            .iter()
            .map(|&k| range * 2f64.powi(k) <= self.initial_range)
            .collect();
        (0..self.experts * n).map(|j| col[j % n]).collect()
    }

    pub fn active_pairs(&self, range: f64) -> usize {
        self.active_mask(range).iter().filter(|a| **a).count()
    }

    fn check_predict_inputs(&self, optimism: &[f64], range: f64) -> Result<Vec<bool>> {
        if self.pending.is_some() {
            return Err(Error::Protocol("predict called twice without update".into()));
        }
        if optimism.len() != self.experts {
            return Err(Error::Domain(format!(
                "optimism has {} entries, expected {}",
                optimism.len(),
                self.experts
            )));
        }
        if !(range.is_finite() && range > 0.0) {
            return Err(Error::Range(format!("loss range must be positive, got {range}")));
        }
        if range < self.last_range {
            return Err(Error::Range(format!(
                "loss range decreased from {} to {range}",
                self.last_range
            )));
        }
        let active = self.active_mask(range);
        if !active.iter().any(|a| *a) {
            return Err(Error::Range(format!(
                "every learning rate is pruned at range {range} (initial range {})",
                self.initial_range
            )));
        }
        Ok(active)
    }

    fn marginal(&self, w: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        (0..self.experts).map(|i| w[i * n..(i + 1) * n].iter().sum()).collect()
    }

    fn pair_vector(&self, per_expert: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        (0..self.experts * n).map(|j| per_expert[j / n]).collect()
    }

    /// Computes w_t on the pruned simplex and returns p_t.
    pub fn predict(&mut self, optimism: &[f64], range: f64) -> Result<Vec<f64>> {
        let active = self.check_predict_inputs(optimism, range)?;
        let cost = self.pair_vector(optimism);
        let OmdSolution { weights, .. } = entropic_omd_solve_log(&cost, &self.state.logs, &self.geometry, &active)?;
        let decision = self.marginal(&weights.values);
        self.last_range = range;
        self.pending = Some(Pending { optimism: optimism.to_vec(), range, active, w_t: weights, decision: decision.clone() });
        Ok(decision)
    }

    /// w_t from the most recent predict, if the round is still open.
    pub fn current_weights(&self) -> Option<&LogWeights> {
        self.pending.as_ref().map(|p| &p.w_t)
    }

    /// Feeds ℓ_t and moves the state to w'_{t+1}.
    pub fn update(&mut self, loss: &[f64]) -> Result<()> {
        let pending = self
            .pending
            .take()
            .ok_or_else(|| Error::Protocol("update called before predict".into()))?;
        if loss.len() != self.experts {
            self.pending = Some(pending);
            return Err(Error::Domain(format!("loss has {} entries, expected {}", loss.len(), self.experts)));
        }
        if let Some(bad) = loss.iter().find(|l| !l.is_finite()) {
            self.pending = Some(pending);
            return Err(Error::Numerical(format!("non-finite loss {bad}")));
        }
        let n = self.grid.len();
        let cost: Vec<f64> = (0..self.experts * n)
            .map(|j| {
                let i = j / n;
                let err = loss[i] - pending.optimism[i];
                loss[i] + correction(self.geometry.rates()[j], err)
            })
            .collect();
        let next = entropic_omd_solve_log(&cost, &self.state.logs, &self.geometry, &pending.active)?.weights;
        if let Some(trace) = self.trace.as_mut() {
            trace.rounds.push(RoundRecord {
                optimism: pending.optimism,
                loss: loss.to_vec(),
                range: pending.range,
                active: pending.active,
                w_prev: self.state.clone(),
                w_t: pending.w_t,
                w_next: next.clone(),
                decision: pending.decision,
            });
        }
        self.state = next;
        self.rounds += 1;
        Ok(())
    }

    /// The family of decisions obtained when only expert `row`'s optimism
    /// varies. Used by the fixed-point search of the full-information
    /// ensemble, where the convex learner's optimism depends on the decision.
    pub fn row_family(&self, optimism: &[f64], range: f64, row: usize) -> Result<RowTiltFamily> {
        let active = self.check_predict_inputs(optimism, range)?;
        RowTiltFamily::new(self, optimism, &active, row)
    }
}

/// a(i, η) = 32 η (ℓ(i) − m(i))².
#[inline]
pub fn correction(rate: f64, prediction_error: f64) -> f64 {
    32.0 * rate * prediction_error * prediction_error
}

/// Fast evaluation of p_t as a function of one expert's optimism entry.
///
/// Rows other than `row` are pre-aggregated per rate so each evaluation costs
/// one scalar root find over the grid plus a K × |G| multiply-add.
pub struct RowTiltFamily {
    experts: usize,
    n: usize,
    row: usize,
    rates: Vec<f64>,
    /// per rate: (shift s_k, Σ_{i≠row} exp(b_ik − s_k))
    others: Vec<(f64, f64)>,
    /// exp(b_ik − s_k) for i ≠ row, row-major K × n (row entries unused)
    scaled: Vec<f64>,
    /// log w'_{row,k} on active pairs, −∞ otherwise
    row_logs: Vec<f64>,
}

impl RowTiltFamily {
    fn new(session: &MsmwcSession, optimism: &[f64], active: &[bool], row: usize) -> Result<Self> {
        let k_count = session.experts;
        if row >= k_count {
            return Err(Error::Domain(format!("row {row} out of range")));
        }
        let n = session.grid.len();
        let rates = session.grid.rates().to_vec();
        let logs = &session.state.logs;
        let mut shifts = vec![f64::NEG_INFINITY; n];
        let mut tilted = vec![f64::NEG_INFINITY; k_count * n];
        for (i, &m) in optimism.iter().enumerate().take(k_count) {
            if i == row {
                continue;
            }
            for k in 0..n {
                let j = i * n + k;
                if active[j] && logs[j] > f64::NEG_INFINITY {
                    tilted[j] = logs[j] - rates[k] * m;
                    shifts[k] = shifts[k].max(tilted[j]);
                }
            }
        }
        let mut scaled = vec![0.0; k_count * n];
        let mut sums = vec![0.0; n];
        for j in 0..k_count * n {
            let k = j % n;
            if tilted[j] > f64::NEG_INFINITY {
                scaled[j] = (tilted[j] - shifts[k]).exp();
                sums[k] += scaled[j];
            }
        }
        let others = shifts.into_iter().zip(sums).collect();
        let row_logs = (0..n)
            .map(|k| if active[row * n + k] { logs[row * n + k] } else { f64::NEG_INFINITY })
            .collect();
        Ok(Self { experts: k_count, n, row, rates, others, scaled, row_logs })
    }

    /// p_t when expert `row` is given optimism `value`.
    pub fn decision(&self, value: f64) -> Result<Vec<f64>> {
        let n = self.n;
        let aggregates: Vec<(f64, f64)> = (0..n)
            .filter_map(|k| {
                let (s, sum) = self.others[k];
                let a = if sum > 0.0 { s + sum.ln() } else { f64::NEG_INFINITY };
                let b = self.row_logs[k] - self.rates[k] * value;
                let l = log_sum_exp([a, b].into_iter());
                (l > f64::NEG_INFINITY).then_some((self.rates[k], l))
            })
            .collect();
        if aggregates.is_empty() {
            return Err(Error::Config("active set carries no prior mass".into()));
        }
        let mu = numerics::simplex_multiplier(&aggregates)?;
        let norm = log_sum_exp(aggregates.iter().map(|&(r, l)| l - r * mu));
        let coef: Vec<f64> = (0..n)
            .map(|k| {
                let (s, _) = self.others[k];
                if s > f64::NEG_INFINITY {
                    (s - self.rates[k] * mu - norm).exp()
                } else {
                    0.0
                }
            })
            .collect();
        let mut p = vec![0.0; self.experts];
        for (i, pi) in p.iter_mut().enumerate() {
            if i == self.row {
                *pi = (0..n)
                    .map(|k| (self.row_logs[k] - self.rates[k] * (value + mu) - norm).exp())
                    .sum();
            } else {
                *pi = dot(&self.scaled[i * n..(i + 1) * n], &coef);
            }
        }
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        Ok(p)
    }
}

/// Both forms of the per-round bound on ⟨ℓ̃_t, w_t − ũ⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundBound {
    pub lhs: f64,
    /// Right-hand side with −16 Σ η w ℓ̃'² over every pair plus the
    /// overflow indicator term, exactly as the bound is usually stated.
    pub rhs_stated: f64,
    /// Right-hand side that the one-step argument supports: pairs with
    /// 32η|ℓ̃'| > 1 lose the −16 η w ℓ̃'² credit and keep only w ℓ̃'.
    pub rhs_supported: f64,
    /// Σ 1[32η|ℓ̃'| > 1] w ℓ̃'.
    pub overflow_term: f64,
}

impl RoundBound {
    pub fn slack_stated(&self) -> f64 {
        self.rhs_stated - self.lhs
    }

    pub fn slack_supported(&self) -> f64 {
        self.rhs_supported - self.lhs
    }
}

/// Outcome of the end-to-end regret bound for one admissible η*.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPoint {
    pub rate: f64,
    pub regret: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub points: Vec<BoundPoint>,
}

impl BoundReport {
    pub const TOLERANCE: f64 = 1e-6;

    pub fn holds(&self) -> bool {
        self.points.iter().all(|p| p.regret <= p.bound + Self::TOLERANCE)
    }

    pub fn min_slack(&self) -> f64 {
        self.points.iter().map(|p| p.bound - p.regret).fold(f64::INFINITY, f64::min)
    }
}

impl SessionTrace {
    pub fn experts(&self) -> usize {
        self.prior.len()
    }

    /// Record of round t, with t = 0 the auxiliary round.
    pub fn round(&self, t: usize) -> Option<&RoundRecord> {
        if t == 0 {
            Some(&self.auxiliary)
        } else {
            self.rounds.get(t - 1)
        }
    }

    /// R_T(u) = Σ_t ⟨ℓ_t, p_t − u⟩ over the real rounds.
    pub fn regret(&self, u: &[f64]) -> f64 {
        self.rounds
            .iter()
            .map(|r| dot(&r.loss, &r.decision) - dot(&r.loss, u))
            .sum()
    }

    /// V(u) = Σ_t Σ_i u(i)(ℓ_t(i) − m_t(i))².
    pub fn comparator_variance(&self, u: &[f64]) -> f64 {
        comparator_variance(self.rounds.iter().map(|r| (r.loss.as_slice(), r.optimism.as_slice())), u)
    }

    /// Largest range supplied to the session.
    pub fn final_range(&self) -> f64 {
        self.rounds.iter().map(|r| r.range).fold(self.initial_range, f64::max)
    }

    /// ũ(i, η*) = u(i) on one grid column.
    pub fn lift(&self, u: &[f64], rate_index: usize) -> LogWeights {
        let n = self.grid.len();
        LogWeights::from_values((0..u.len() * n).map(|j| if j % n == rate_index { u[j / n] } else { 0.0 }).collect())
    }

    fn pair_terms(&self, record: &RoundRecord) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.len();
        let k = self.experts();
        let loss: Vec<f64> = (0..k * n).map(|j| record.loss[j / n]).collect();
        let err: Vec<f64> = (0..k * n).map(|j| record.loss[j / n] - record.optimism[j / n]).collect();
        (loss, err)
    }

    /// One-step OMD inequality for round t with comparator ũ.
    pub fn check_omd_inequality(&self, t: usize, comparator: &LogWeights) -> Result<InequalityCheck> {
        let record = self.round(t).ok_or_else(|| Error::Domain(format!("no round {t}")))?;
        let (loss, err) = self.pair_terms(record);
        let rates = self.geometry.rates();
        let full_loss: Vec<f64> = loss.iter().zip(&err).zip(rates).map(|((l, e), r)| l + correction(*r, *e)).collect();
        let optimism: Vec<f64> = loss.iter().zip(&err).map(|(l, e)| l - e).collect();
        self.check_support(record, comparator, t)?;
        numerics::omd_one_step_inequality(
            &full_loss,
            &optimism,
            &record.w_t,
            &record.w_next,
            &record.w_prev,
            comparator,
            &self.geometry,
        )
    }

    fn check_support(&self, record: &RoundRecord, comparator: &LogWeights, t: usize) -> Result<()> {
        if let Some(j) = comparator.values.iter().zip(&record.active).position(|(u, a)| *u > 0.0 && !*a) {
            return Err(Error::Domain(format!("comparator puts mass on pair {j}, pruned in round {t}")));
        }
        Ok(())
    }

    /// Per-round regret bound for round t (t = 0 is the auxiliary round).
    pub fn check_round_bound(&self, t: usize, comparator: &LogWeights) -> Result<RoundBound> {
        let record = self.round(t).ok_or_else(|| Error::Domain(format!("no round {t}")))?;
        self.check_support(record, comparator, t)?;
        let (loss, err) = self.pair_terms(record);
        let rates = self.geometry.rates();
        let w = &record.w_t.values;
        let u = &comparator.values;
        let lhs: f64 = loss.iter().zip(w.iter().zip(u)).map(|(l, (a, b))| l * (a - b)).sum();
        let penalty = numerics::bregman_gap_log(comparator, &record.w_prev, &record.w_next, &self.geometry)?;
        let mut comparator_term = 0.0;
        let mut credit_all = 0.0;
        let mut credit_small = 0.0;
        let mut overflow = 0.0;
        for j in 0..rates.len() {
            let sq = err[j] * err[j];
            comparator_term += 32.0 * rates[j] * u[j] * sq;
            let c = 16.0 * rates[j] * w[j] * sq;
            credit_all += c;
            if 32.0 * rates[j] * err[j].abs() > 1.0 {
                overflow += w[j] * err[j];
            } else {
                credit_small += c;
            }
        }
        Ok(RoundBound {
            lhs,
            rhs_stated: penalty + comparator_term - credit_all + overflow,
            rhs_supported: penalty + comparator_term - credit_small + overflow,
            overflow_term: overflow,
        })
    }

    /// The two round-0 quantities involved in the log T cancellation:
    /// (−16 Σ η w₀ ℓ̃'₀², Σ w'₀/η).
    pub fn auxiliary_cancellation(&self) -> (f64, f64) {
        let rates = self.geometry.rates();
        let aux = &self.auxiliary;
        let n = self.grid.len();
        let mut negative = 0.0;
        let mut penalty = 0.0;
        for (j, &eta) in rates.iter().enumerate() {
            let e = aux.loss[j / n] - aux.optimism[j / n];
            negative -= 16.0 * eta * aux.w_t.values[j] * e * e;
            penalty += aux.w_prev.values[j] / eta;
        }
        (negative, penalty)
    }

    /// Evaluates R_T(u) ≤ (KL(u, p'₀) + log|G|)/η* + 32η*V(u) + 2η*B₁² for
    /// every grid rate η* ≤ 1/(32·c·B_T).
    pub fn check_theorem2_bound(&self, u: &[f64]) -> Result<BoundReport> {
        let kl = kl_divergence(u, &self.prior)?;
        let log_g = (self.grid.len() as f64).ln();
        let v = self.comparator_variance(u);
        let regret = self.regret(u);
        let b1 = self.initial_range;
        let bt = self.final_range();
        let c = self.grid.base_scale() / b1;
        let points = self
            .grid
            .rates()
            .iter()
            .filter(|&&eta| 32.0 * c * eta * bt <= 1.0)
            .map(|&eta| BoundPoint {
                rate: eta,
                regret,
                bound: (kl + log_g) / eta + 32.0 * eta * v + 2.0 * eta * b1 * b1,
            })
            .collect();
        Ok(BoundReport { points })
    }
}

/// V(u) over any (loss, optimism) sequence.
pub fn comparator_variance<'a>(rounds: impl Iterator<Item = (&'a [f64], &'a [f64])>, u: &[f64]) -> f64 {
    rounds
        .map(|(l, m)| u.iter().zip(l.iter().zip(m)).map(|(w, (a, b))| w * (a - b) * (a - b)).sum::<f64>())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(1024), 10);
        assert_eq!(ceil_log2(1025), 11);
    }

    #[test]
    fn grid_for_1024_rounds() {
        let g = LearningRateGrid::new(1024, 1.0).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g.rates()[0], 1.0 / 32768.0);
        assert_eq!(g.rates()[20], 32.0);
        for w in g.rates().windows(2) {
            assert_eq!(w[1] / w[0], 2.0);
        }
        assert_eq!(g.rates()[20] / g.rates()[0], 2f64.powi(20));
    }

    #[test]
    fn single_round_grid() {
        let g = LearningRateGrid::new(1, 2.0).unwrap();
        assert_eq!(g.rates(), &[1.0 / 64.0]);
    }

    #[test]
    fn init_rejects_bad_config() {
        assert!(matches!(MsmwcSession::new(SessionConfig::new(vec![1.0], 0, 1.0)), Err(Error::Config(_))));
        assert!(matches!(MsmwcSession::new(SessionConfig::new(vec![1.0], 4, 0.0)), Err(Error::Config(_))));
        assert!(matches!(MsmwcSession::new(SessionConfig::new(vec![1.0], 4, -1.0)), Err(Error::Config(_))));
    }

    #[test]
    fn auxiliary_round_is_exponential_tilt() {
        // K = 1, T = 2, B₁ = 1: rates 1/64, 1/32, 1/16 and
        // w'_1(η) = (1/3)·exp(−η(2η + μ)) with μ fixed by Σ = 1.
        let s = MsmwcSession::new(SessionConfig::new(vec![1.0], 2, 1.0)).unwrap();
        let rates = [1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0];
        let w = |mu: f64| -> Vec<f64> { rates.iter().map(|r| (-r * (2.0 * r + mu)).exp() / 3.0).collect() };
        let (mut lo, mut hi) = (-100.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if w(mid).iter().sum::<f64>() > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        for (got, want) in s.state().values.iter().zip(w(lo)) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn pruning_threshold_is_inclusive() {
        let s = MsmwcSession::new(SessionConfig::new(vec![0.5, 0.5], 1024, 1.0)).unwrap();
        let mask = s.active_mask(1.0);
        let n = s.grid().len();
        let idx = |r: f64| s.grid().rates().iter().position(|x| *x == r).unwrap();
        assert!(mask[idx(1.0 / 32.0)]);
        assert!(!mask[idx(1.0 / 16.0)]);
        assert!(mask[n + idx(1.0 / 32.0)]);
    }

    #[test]
    fn zero_optimism_is_a_multiplier_tilt_of_the_state() {
        let mut s = MsmwcSession::new(SessionConfig::new(vec![0.3, 0.7], 64, 1.0)).unwrap();
        let mask = s.active_mask(1.0);
        let state = s.state().clone();
        s.predict(&[0.0, 0.0], 1.0).unwrap();
        let w = s.current_weights().unwrap().clone();
        let rates = s.geometry().rates();
        // w = w' exp(−η μ) on the active pairs for one common μ
        let mus: Vec<f64> = (0..mask.len())
            .filter(|&j| mask[j])
            .map(|j| (state.logs[j] - w.logs[j]) / rates[j])
            .collect();
        for mu in &mus {
            assert_abs_diff_eq!(*mu, mus[0], epsilon = 1e-9);
        }
        for (m, v) in mask.iter().zip(&w.values) {
            if !m {
                assert_eq!(*v, 0.0);
            }
        }
        assert_abs_diff_eq!(w.values.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn symmetric_inputs_give_symmetric_decision() {
        let mut s = MsmwcSession::new(SessionConfig::new(vec![0.5, 0.5], 100, 1.0)).unwrap();
        let p = s.predict(&[0.3, 0.3], 1.0).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn correction_examples() {
        assert_eq!(correction(1.0 / 32.0, 1.0), 1.0);
        assert_eq!(correction(1.0 / 16.0, 0.5), 0.5);
        assert_eq!(correction(0.25, 0.0), 0.0);
    }

    #[test]
    fn protocol_errors() {
        let mut s = MsmwcSession::new(SessionConfig::new(vec![0.5, 0.5], 10, 1.0)).unwrap();
        assert!(matches!(s.update(&[0.0, 0.0]), Err(Error::Protocol(_))));
        s.predict(&[0.0, 0.0], 1.0).unwrap();
        assert!(matches!(s.predict(&[0.0, 0.0], 1.0), Err(Error::Protocol(_))));
        s.update(&[0.1, 0.2]).unwrap();
        assert!(matches!(s.predict(&[0.0, 0.0], 0.5), Err(Error::Range(_))));
    }

    #[test]
    fn fully_pruned_is_range_error() {
        let mut s = MsmwcSession::new(SessionConfig::new(vec![1.0], 4, 1.0)).unwrap();
        // smallest rate is 1/128; 2^-2 · B ≤ 1 fails once B > 4
        assert!(matches!(s.predict(&[0.0], 4.5), Err(Error::Range(_))));
    }

    #[test]
    fn row_family_matches_full_solve() {
        let mut s = MsmwcSession::new(SessionConfig::new(vec![0.2, 0.5, 0.3], 256, 2.0)).unwrap();
        s.predict(&[0.1, -0.4, 0.2], 2.0).unwrap();
        s.update(&[1.0, -1.0, 0.5]).unwrap();
        let m = [0.3, -0.2, 0.7];
        let fam = s.row_family(&m, 2.5, 2).unwrap();
        let fast = fam.decision(0.7).unwrap();
        let full = s.predict(&m, 2.5).unwrap();
        for (a, b) in fast.iter().zip(&full) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn pruned_pairs_stay_pruned() {
        let mut s = MsmwcSession::new(SessionConfig::new(vec![0.5, 0.5], 64, 1.0).with_trace(true)).unwrap();
        let ranges = [1.0, 2.0, 2.0, 8.0, 8.0, 16.0];
        for &b in &ranges {
            s.predict(&[0.0, 0.1], b).unwrap();
            s.update(&[0.5, -0.5]).unwrap();
        }
        let tr = s.trace().unwrap();
        for pair in tr.rounds.windows(2) {
            for (a, b) in pair[0].active.iter().zip(&pair[1].active) {
                assert!(*a || !*b);
            }
            for (w, a) in pair[1].w_t.values.iter().zip(&pair[1].active) {
                if !a {
                    assert_eq!(*w, 0.0);
                }
            }
        }
    }

    #[test]
    fn single_expert_has_zero_regret() {
        let mut s = MsmwcSession::new(SessionConfig::new(vec![1.0], 16, 1.0).with_trace(true)).unwrap();
        for t in 0..16 {
            let p = s.predict(&[0.0], 1.0).unwrap();
            assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-15);
            s.update(&[(t as f64).sin()]).unwrap();
        }
        let tr = s.trace().unwrap();
        assert_abs_diff_eq!(tr.regret(&[1.0]), 0.0, epsilon = 1e-12);
        assert!(tr.check_theorem2_bound(&[1.0]).unwrap().holds());
    }

    #[test]
    fn comparator_variance_examples() {
        let l = [vec![1.0, 2.0], vec![0.0, -1.0]];
        let m = [vec![0.0, 2.0], vec![0.5, 1.0]];
        let it = || l.iter().zip(&m).map(|(a, b)| (a.as_slice(), b.as_slice()));
        assert_eq!(comparator_variance(it(), &[1.0, 0.0]), 1.0 + 0.25);
        assert_eq!(comparator_variance(it(), &[0.0, 1.0]), 4.0);
        assert_abs_diff_eq!(comparator_variance(it(), &[0.25, 0.75]), 0.25 * 1.25 + 0.75 * 4.0, epsilon = 1e-15);
        let same = [vec![1.0, 1.0]];
        assert_eq!(comparator_variance(same.iter().zip(&same).map(|(a, b)| (a.as_slice(), b.as_slice())), &[0.5, 0.5]), 0.0);
    }

    #[test]
    fn empty_trace_satisfies_the_bound() {
        let s = MsmwcSession::new(SessionConfig::new(vec![0.5, 0.5], 8, 1.0).with_trace(true)).unwrap();
        let r = s.trace().unwrap().check_theorem2_bound(&[1.0, 0.0]).unwrap();
        assert!(r.holds());
        assert!(r.points.iter().all(|p| p.regret == 0.0));
    }

    #[test]
    fn comparator_outside_active_set_is_domain_error() {
        let mut s = MsmwcSession::new(SessionConfig::new(vec![0.5, 0.5], 64, 1.0).with_trace(true)).unwrap();
        s.predict(&[0.0, 0.0], 1.0).unwrap();
        s.update(&[0.1, 0.2]).unwrap();
        let tr = s.trace().unwrap();
        let top = tr.grid.len() - 1;
        let u = tr.lift(&[1.0, 0.0], top);
        assert!(matches!(tr.check_round_bound(1, &u), Err(Error::Domain(_))));
        // the auxiliary round runs on the full simplex
        assert!(tr.check_round_bound(0, &u).is_ok());
    }
}
