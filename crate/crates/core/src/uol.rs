//! Universal online learning ensembles.
//!
//! [`FullInfoEnsemble`] aggregates a curvature roster with the restart wrapper
//! and needs no bound on the gradient norm; the convex learner's optimism is
//! resolved by a fixed-point search. [`SingleGradientEnsemble`] queries one
//! gradient per round, feeds surrogate losses to the learners and adds
//! cascaded stability corrections to the meta inputs.

use serde::{Deserialize, Serialize};

use crate::base_learners::{roster_build, Roster, RosterKind, SingleGradientConstants, SurrogateKind, SurrogateLoss};
use crate::domain::ConvexDomain;
use crate::environments::{CountingOracle, GradientOracle};
use crate::error::{Error, Result};
use crate::linalg::{dist_sq, dot, mixture, norm1, norm2, sub};
use crate::numerics::InequalityCheck;
use crate::pea_adaptive::{Forecaster, RestartWrapper, WrapperConfig};
use crate::pea_core::{MsmwcSession, SessionConfig};

/// Value and gradient access to one round's loss.
pub trait FunctionOracle: GradientOracle {
    fn value(&mut self, x: &[f64]) -> f64;
}

impl FunctionOracle for CountingOracle<'_> {
    fn value(&mut self, x: &[f64]) -> f64 {
        CountingOracle::value(self, x)
    }
}

/// Cap on the doublings used to bracket the fixed point from below.
pub const MAX_DOUBLINGS: u32 = 64;
const MAX_BISECTIONS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub alpha: f64,
    /// |h(α) − α| at the returned α.
    pub residual: f64,
    pub evaluations: usize,
    /// Doublings spent finding the lower bracket.
    pub doublings: u32,
    /// Residual the search was asked to reach.
    pub tolerance: f64,
}

/// Solves h(α) = α to within `tolerance`, starting from an `upper` point with
/// α ≥ h(α). The lower bracket is searched at `upper` − 2^k·`step`.
pub fn fixed_point_search<H>(mut h: H, upper: f64, step: f64, tolerance: f64) -> Result<SearchOutcome>
where
    H: FnMut(f64) -> Result<f64>,
{
    if !(upper.is_finite() && tolerance > 0.0) {
        return Err(Error::Numerical(format!("bad search inputs: start {upper}, tolerance {tolerance}")));
    }
    let step = if step > 0.0 { step } else { 1.0 };
    let mut evaluations = 0;
    let mut gap = |a: f64, evals: &mut usize| -> Result<f64> {
        *evals += 1;
        let v = h(a)?;
        if !v.is_finite() {
            return Err(Error::Numerical(format!("fixed-point map is not finite at {a}")));
        }
        Ok(v - a)
    };
    let g_hi = gap(upper, &mut evaluations)?;
    let done = |alpha: f64, g: f64, evaluations: usize, doublings: u32| SearchOutcome {
        alpha,
        residual: g.abs(),
        evaluations,
        doublings,
        tolerance,
    };
    if g_hi.abs() <= tolerance {
        return Ok(done(upper, g_hi, evaluations, 0));
    }
    if g_hi > 0.0 {
        return Err(Error::Numerical(format!(
            "upper bracket violated: h(α) − α = {g_hi:e} at α = {upper}; the loss is not convex"
        )));
    }
    let mut hi = upper;
    let mut lo = None;
    let mut doublings = 0;
    for k in 0..=MAX_DOUBLINGS {
        doublings = k;
        let a = upper - 2f64.powi(k as i32) * step;
        let g = gap(a, &mut evaluations)?;
        if g.abs() <= tolerance {
            return Ok(done(a, g, evaluations, k));
        }
        if g > 0.0 {
            lo = Some(a);
            break;
        }
        hi = a;
    }
    let mut lo = lo.ok_or_else(|| {
        Error::Numerical(format!("no lower bracket within {MAX_DOUBLINGS} doublings; the loss is not convex"))
    })?;
    let mut best = (hi, g_hi);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g = gap(mid, &mut evaluations)?;
        if g.abs() < best.1.abs() {
            best = (mid, g);
        }
        if g.abs() <= tolerance {
            return Ok(done(mid, g, evaluations, doublings));
        }
        if g > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numerical(format!(
        "fixed-point search stalled at α = {} with residual {:e} > {tolerance:e}",
        best.0,
        best.1.abs()
    )))
}

/// Both sides of ‖x − y‖² ≤ 2Σ_i p(i)‖x_i − y_i‖² + 2D²‖p − q‖₁² for
/// x = Σ p(i)x_i and y = Σ q(i)y_i.
pub fn mixture_stability_check(
    p: &[f64],
    xs: &[Vec<f64>],
    q: &[f64],
    ys: &[Vec<f64>],
    diameter: f64,
) -> InequalityCheck {
    let x = mixture(p, xs);
    let y = mixture(q, ys);
    let spread: f64 = p.iter().zip(xs.iter().zip(ys)).map(|(w, (a, b))| w * dist_sq(a, b)).sum();
    let shift = norm1(&sub(p, q));
    InequalityCheck { lhs: dist_sq(&x, &y), rhs: 2.0 * spread + 2.0 * diameter * diameter * shift * shift }
}

/// min over i* of ⟨ℓ, p − e_{i*}⟩ + ℓ(i*).
pub fn lower_bound_slack(loss: &[f64], p: &[f64]) -> f64 {
    let inner = dot(loss, p);
    loss.iter().map(|l| inner - l + l).fold(f64::INFINITY, f64::min)
}

/// Stability statistics of a decision trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySums {
    /// Σ‖x_{t+1} − x_t‖².
    pub decision: f64,
    /// Σ‖x_{t+1,i} − x_{t,i}‖² per learner.
    pub base: Vec<f64>,
    /// Σ‖p_{t+1} − p_t‖₁².
    pub weights: f64,
    /// Smallest slack of the mixture inequality over consecutive rounds.
    #[serde(with = "crate::serde_inf")]
    pub mixture_min_slack: f64,
    pub pairs: usize,
}

impl StabilitySums {
    fn empty(experts: usize) -> Self {
        Self { decision: 0.0, base: vec![0.0; experts], weights: 0.0, mixture_min_slack: f64::INFINITY, pairs: 0 }
    }

    pub fn mixture_holds(&self) -> bool {
        self.mixture_min_slack >= -InequalityCheck::TOLERANCE
    }
}

/// Accumulates [`StabilitySums`] one round at a time.
#[derive(Debug, Clone)]
pub struct StabilityAccumulator {
    diameter: f64,
    sums: StabilitySums,
    previous: Option<(Vec<f64>, Vec<Vec<f64>>)>,
}

impl StabilityAccumulator {
    pub fn new(diameter: f64) -> Self {
        Self { diameter, sums: StabilitySums::empty(0), previous: None }
    }

    /// Adds round t+1 given p_{t+1} and the learners' points.
    pub fn push(&mut self, p: &[f64], xs: &[Vec<f64>]) {
        if let Some((q, ys)) = self.previous.take() {
            if q.len() == p.len() {
                let x_prev = mixture(&q, &ys);
                let x = mixture(p, xs);
                self.sums.decision += dist_sq(&x, &x_prev);
                for (s, (a, b)) in self.sums.base.iter_mut().zip(xs.iter().zip(&ys)) {
                    *s += dist_sq(a, b);
                }
                let shift = norm1(&sub(p, &q));
                self.sums.weights += shift * shift;
                let check = mixture_stability_check(&q, &ys, p, xs, self.diameter);
                self.sums.mixture_min_slack = self.sums.mixture_min_slack.min(check.slack());
                self.sums.pairs += 1;
            }
        }
        if self.sums.base.len() != p.len() {
            self.sums.base = vec![0.0; p.len()];
        }
        self.previous = Some((p.to_vec(), xs.to_vec()));
    }

    /// Forgets the previous round; sums restart when the roster changes.
    pub fn reset(&mut self) {
        self.previous = None;
    }

    pub fn sums(&self) -> &StabilitySums {
        &self.sums
    }
}

/// One recorded ensemble round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRound {
    pub decision: Vec<f64>,
    pub weights: Vec<f64>,
    pub optimism: Vec<f64>,
    pub loss: Vec<f64>,
    pub base_points: Vec<Vec<f64>>,
    pub gradient_norm: f64,
    /// Range held by the meta learner after the update.
    pub range: f64,
    pub active_pairs: usize,
    pub search: Option<SearchOutcome>,
    /// The roster was rebuilt before this round.
    pub restarted: bool,
}

/// Recomputes the stability sums of a recorded run.
pub fn stability_sums(rounds: &[EnsembleRound], diameter: f64) -> StabilitySums {
    let mut acc = StabilityAccumulator::new(diameter);
    for r in rounds {
        if r.restarted {
            acc.reset();
        }
        acc.push(&r.weights, &r.base_points);
    }
    acc.sums
}

/// Per-run diagnostics shared by both ensembles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDiagnostics {
    pub rounds: u64,
    /// min over rounds of the lower-bound slack of ⟨ℓ_t, p_t − e_i⟩.
    pub lower_bound_min_slack: f64,
    /// max over rounds of ‖x_t − Σ p_t(i)x_{t,i}‖_∞, the sum taken in reverse order.
    pub mixture_error: f64,
    pub search_max_residual: f64,
    /// max over rounds of residual / tolerance.
    pub search_max_ratio: f64,
    pub search_max_evaluations: usize,
    /// Largest tolerance used.
    pub search_tolerance: f64,
    pub stability: StabilitySums,
    pub gradient_calls: u64,
    pub value_calls: u64,
    /// Rounds before which the roster and meta learner were rebuilt.
    pub restarts: Vec<u64>,
}

impl EnsembleDiagnostics {
    fn new() -> Self {
        Self {
            rounds: 0,
            lower_bound_min_slack: f64::INFINITY,
            mixture_error: 0.0,
            search_max_residual: 0.0,
            search_max_ratio: 0.0,
            search_max_evaluations: 0,
            search_tolerance: 0.0,
            stability: StabilitySums::empty(0),
            gradient_calls: 0,
            value_calls: 0,
            restarts: Vec::new(),
        }
    }

    pub fn lower_bound_holds(&self) -> bool {
        self.lower_bound_min_slack >= -InequalityCheck::TOLERANCE
    }

    pub fn search_holds(&self) -> bool {
        self.search_max_ratio <= 1.0
    }
}

fn reverse_mixture_error(p: &[f64], xs: &[Vec<f64>], x: &[f64]) -> f64 {
    let mut y = vec![0.0; x.len()];
    for (w, pt) in p.iter().zip(xs).rev() {
        for (o, v) in y.iter_mut().zip(pt) {
            *o += w * v;
        }
    }
    x.iter().zip(&y).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

fn uniform(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullInfoConfig {
    pub domain: ConvexDomain,
    /// Horizon guess; squared whenever it is exceeded.
    pub horizon: u64,
    /// Smoothness L, used by the roster's regularizers.
    pub smoothness: f64,
    pub roster: RosterKind,
    /// Seed range B₀ of the meta wrapper.
    pub initial_range: f64,
    /// Scale G in the search tolerance `search_constant`·D·G/T; the largest
    /// gradient norm observed so far when unset.
    pub search_scale: Option<f64>,
    pub search_constant: f64,
    pub record: bool,
}

impl FullInfoConfig {
    pub fn new(domain: ConvexDomain, horizon: u64, smoothness: f64) -> Self {
        Self {
            domain,
            horizon,
            smoothness,
            roster: RosterKind::Standard,
            initial_range: 1.0,
            search_scale: None,
            search_constant: 10.0,
            record: false,
        }
    }
}

struct FullInfoPending {
    points: Vec<Vec<f64>>,
    optimism: Vec<f64>,
    weights: Vec<f64>,
    decision: Vec<f64>,
    search: Option<SearchOutcome>,
}

pub struct FullInfoEnsemble {
    config: FullInfoConfig,
    diameter: f64,
    guess: u64,
    roster: Roster,
    meta: RestartWrapper,
    pending: Option<FullInfoPending>,
    restart_next: bool,
    rounds: u64,
    cumulative_loss: f64,
    stability: StabilityAccumulator,
    diagnostics: EnsembleDiagnostics,
    /// Largest gradient norm seen at any evaluated point.
    observed_scale: f64,
    log: Vec<EnsembleRound>,
}

/// Floor on the observed gradient scale, so the search tolerance stays positive.
const MIN_SEARCH_SCALE: f64 = 1e-9;

impl FullInfoEnsemble {
    pub fn new(config: FullInfoConfig) -> Result<Self> {
        if config.roster == RosterKind::SingleGradient {
            return Err(Error::Config("the full-information ensemble takes a standard or sea roster".into()));
        }
        if !(config.search_scale.unwrap_or(1.0) > 0.0 && config.search_constant > 0.0) {
            return Err(Error::Config("search tolerance constants must be positive".into()));
        }
        let horizon = config.horizon.max(2);
        let (roster, meta) = Self::build(&config, horizon)?;
        let diameter = config.domain.diameter();
        Ok(Self {
            diameter,
            guess: horizon,
            roster,
            meta,
            pending: None,
            restart_next: false,
            rounds: 0,
            cumulative_loss: 0.0,
            stability: StabilityAccumulator::new(diameter),
            diagnostics: EnsembleDiagnostics::new(),
            observed_scale: 0.0,
            log: Vec::new(),
            config,
        })
    }

    fn build(config: &FullInfoConfig, horizon: u64) -> Result<(Roster, RestartWrapper)> {
        let roster = roster_build(config.roster, horizon, &config.domain, Some(config.smoothness), None, None)?;
        let k = roster.learners.len();
        let meta = RestartWrapper::new(
            WrapperConfig::new(uniform(k), horizon).with_initial_range(config.initial_range),
        )?;
        Ok((roster, meta))
    }

    fn search_tolerance(&self) -> f64 {
        let d = if self.diameter > 0.0 { self.diameter } else { 1.0 };
        let g = self.config.search_scale.unwrap_or(self.observed_scale.max(MIN_SEARCH_SCALE));
        self.config.search_constant * d * g / self.guess as f64
    }

    pub fn experts(&self) -> usize {
        self.roster.learners.len()
    }

    pub fn horizon(&self) -> u64 {
        self.guess
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn meta(&self) -> &RestartWrapper {
        &self.meta
    }

    pub fn rounds_played(&self) -> u64 {
        self.rounds
    }

    /// Σ_t f_t(x_t) so far.
    pub fn cumulative_loss(&self) -> f64 {
        self.cumulative_loss
    }

    pub fn diagnostics(&self) -> EnsembleDiagnostics {
        let mut d = self.diagnostics.clone();
        d.stability = self.stability.sums().clone();
        d
    }

    pub fn log(&self) -> &[EnsembleRound] {
        &self.log
    }

    fn restart(&mut self, horizon: u64) -> Result<()> {
        let (roster, meta) = Self::build(&self.config, horizon)?;
        self.roster = roster;
        self.meta = meta;
        self.guess = horizon;
        self.diagnostics.restarts.push(self.rounds + 1);
        self.stability.reset();
        Ok(())
    }

    /// Plays x_t. `previous` is f_{t−1}; `None` stands for f₀ ≡ 0.
    pub fn predict(&mut self, previous: Option<&mut dyn FunctionOracle>) -> Result<Vec<f64>> {
        if self.pending.is_some() {
            return Err(Error::Protocol("predict called twice without update".into()));
        }
        let restarted = self.restart_next || self.rounds + 1 > self.guess;
        if restarted {
            self.restart_next = false;
            self.restart(self.guess.saturating_mul(self.guess))?;
        }
        let points: Vec<Vec<f64>> = self
            .roster
            .learners
            .iter_mut()
            .map(|l| l.step().map(<[f64]>::to_vec))
            .collect::<Result<_>>()?;
        let k = points.len();
        let j = self.roster.convex_index;
        let mut optimism = vec![0.0; k];
        let mut search = None;
        let mut previous = previous;
        if let Some(f) = previous.as_deref_mut() {
            let values: Vec<f64> = points.iter().map(|x| f.value(x)).collect();
            self.diagnostics.value_calls += k as u64;
            let upper = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let family = self.meta.row_family(&optimism, j)?;
            let mut calls = 0;
            let tolerance = self.search_tolerance();
            let outcome = fixed_point_search(
                |alpha| {
                    let p = family.decision(values[j] - alpha)?;
                    calls += 1;
                    Ok(f.value(&mixture(&p, &points)))
                },
                upper,
                self.diameter,
                tolerance,
            )?;
            self.diagnostics.value_calls += calls;
            optimism[j] = values[j] - outcome.alpha;
            search = Some(outcome);
        }
        let weights = self.meta.predict(&optimism)?;
        let decision = mixture(&weights, &points);
        if let (Some(f), Some(s)) = (previous, search.as_mut()) {
            // Residual of the committed decision rather than of the search iterate.
            s.residual = s.residual.max((f.value(&decision) - s.alpha).abs());
            self.diagnostics.value_calls += 1;
            let d = &mut self.diagnostics;
            d.search_max_residual = d.search_max_residual.max(s.residual);
            d.search_max_ratio = d.search_max_ratio.max(s.residual / s.tolerance);
            d.search_tolerance = d.search_tolerance.max(s.tolerance);
            self.diagnostics.search_max_evaluations = self.diagnostics.search_max_evaluations.max(s.evaluations);
        }
        self.diagnostics.mixture_error =
            self.diagnostics.mixture_error.max(reverse_mixture_error(&weights, &points, &decision));
        self.pending = Some(FullInfoPending { points, optimism, weights, decision: decision.clone(), search });
        if restarted {
            self.stability.reset();
        }
        Ok(decision)
    }

    /// Observes f_t, feeds the meta learner and every base learner.
    pub fn update(&mut self, current: &mut dyn FunctionOracle) -> Result<()> {
        let pending = self.pending.take().ok_or_else(|| Error::Protocol("update called before predict".into()))?;
        let FullInfoPending { points, optimism, weights, decision, search } = pending;
        let j = self.roster.convex_index;
        let fx = current.value(&decision);
        let g = current.gradient(&decision);
        let mut loss: Vec<f64> = points.iter().map(|x| dot(&g, &sub(x, &decision))).collect();
        loss[j] = current.value(&points[j]) - fx;
        self.diagnostics.value_calls += 2;
        self.diagnostics.gradient_calls += 1 + points.len() as u64;
        self.meta.update(&loss)?;
        let mut scale = norm2(&g);
        for (learner, x) in self.roster.learners.iter_mut().zip(&points) {
            let gx = current.gradient(x);
            scale = scale.max(norm2(&gx));
            learner.update(&gx)?;
        }
        self.observed_scale = self.observed_scale.max(scale);
        self.rounds += 1;
        self.cumulative_loss += fx;
        self.diagnostics.rounds = self.rounds;
        self.diagnostics.lower_bound_min_slack =
            self.diagnostics.lower_bound_min_slack.min(lower_bound_slack(&loss, &weights));
        self.stability.push(&weights, &points);
        let gradient_norm = norm2(&g);
        if gradient_norm > self.guess as f64 / self.diameter.max(2.0) {
            self.restart_next = true;
        }
        if self.config.record {
            let restarted = self.diagnostics.restarts.last() == Some(&self.rounds);
            let range = self.meta.tracker().current;
            let active_pairs = self.meta.session().map_or(0, |s| s.active_pairs(range));
            self.log.push(EnsembleRound {
                decision,
                weights,
                optimism,
                loss,
                base_points: points,
                gradient_norm,
                range,
                active_pairs,
                search,
                restarted,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleGradientConfig {
    pub domain: ConvexDomain,
    /// T′, the number of rounds to be played.
    pub horizon: u64,
    pub smoothness: f64,
    pub lipschitz: f64,
    /// Overrides for λ, C₀, γ; the smallest admissible values otherwise.
    pub constants: Option<SingleGradientConstants>,
    pub record: bool,
}

impl SingleGradientConfig {
    pub fn new(domain: ConvexDomain, horizon: u64, smoothness: f64, lipschitz: f64) -> Self {
        Self { domain, horizon, smoothness, lipschitz, constants: None, record: false }
    }
}

/// Printed-constant form of the meta bound with negative stability terms,
/// evaluated against every expert at its best admissible rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaBoundReport {
    /// Meta regret against each e_i.
    pub regret: Vec<f64>,
    /// Smallest right-hand side over admissible rates, per expert.
    pub bound: Vec<f64>,
    pub min_slack: f64,
}

struct SingleGradientPending {
    points: Vec<Vec<f64>>,
    optimism: Vec<f64>,
    corrections: Vec<f64>,
    weights: Vec<f64>,
    decision: Vec<f64>,
    pair_weights: Vec<f64>,
}

pub struct SingleGradientEnsemble {
    config: SingleGradientConfig,
    constants: SingleGradientConstants,
    range: f64,
    internal_horizon: u64,
    roster: Roster,
    session: MsmwcSession,
    previous: Option<(Vec<Vec<f64>>, Vec<f64>)>,
    last_gradient: Vec<f64>,
    pending: Option<SingleGradientPending>,
    rounds: u64,
    stability: StabilityAccumulator,
    diagnostics: EnsembleDiagnostics,
    meta_regret: Vec<f64>,
    squared_errors: Vec<f64>,
    weighted_errors: f64,
    log: Vec<EnsembleRound>,
}

impl SingleGradientEnsemble {
    pub fn new(config: SingleGradientConfig) -> Result<Self> {
        let diameter = config.domain.diameter();
        let (l, g) = (config.smoothness, config.lipschitz);
        let roster = roster_build(
            RosterKind::SingleGradient,
            config.horizon.max(2),
            &config.domain,
            Some(l),
            Some(g),
            config.constants,
        )?;
        let constants = roster.constants.expect("single-gradient roster carries its constants");
        let range = (2.0 * g * diameter).max(1.0);
        let internal_horizon = config.horizon.max(2).max((2.0 * g).max(g * diameter).ceil() as u64);
        let k = roster.learners.len();
        let session = MsmwcSession::new(
            SessionConfig::new(uniform(k), internal_horizon, range).with_grid_scale_factor(constants.c0),
        )?;
        Ok(Self {
            constants,
            range,
            internal_horizon,
            session,
            previous: None,
            last_gradient: vec![0.0; config.domain.dim()],
            pending: None,
            rounds: 0,
            stability: StabilityAccumulator::new(diameter),
            diagnostics: EnsembleDiagnostics::new(),
            meta_regret: vec![0.0; k],
            squared_errors: vec![0.0; k],
            weighted_errors: 0.0,
            log: Vec::new(),
            roster,
            config,
        })
    }

    pub fn experts(&self) -> usize {
        self.roster.learners.len()
    }

    pub fn constants(&self) -> SingleGradientConstants {
        self.constants
    }

    /// The constant range B = max(1, 2GD) fed to the meta learner.
    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn internal_horizon(&self) -> u64 {
        self.internal_horizon
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn session(&self) -> &MsmwcSession {
        &self.session
    }

    pub fn rounds_played(&self) -> u64 {
        self.rounds
    }

    pub fn gradient_calls(&self) -> u64 {
        self.diagnostics.gradient_calls
    }

    pub fn diagnostics(&self) -> EnsembleDiagnostics {
        let mut d = self.diagnostics.clone();
        d.stability = self.stability.sums().clone();
        d
    }

    pub fn log(&self) -> &[EnsembleRound] {
        &self.log
    }

    /// Plays x_t without touching the loss.
    pub fn predict(&mut self) -> Result<Vec<f64>> {
        if self.pending.is_some() {
            return Err(Error::Protocol("predict called twice without update".into()));
        }
        let points: Vec<Vec<f64>> = self
            .roster
            .learners
            .iter_mut()
            .map(|l| l.step().map(<[f64]>::to_vec))
            .collect::<Result<_>>()?;
        let lambda = self.constants.lambda;
        let (prev_points, prev_decision) = match &self.previous {
            Some((p, x)) => (p.clone(), x.clone()),
            None => (points.clone(), self.config.domain.center()),
        };
        let corrections: Vec<f64> = points.iter().zip(&prev_points).map(|(x, y)| lambda * dist_sq(x, y)).collect();
        let optimism: Vec<f64> = prev_points
            .iter()
            .zip(&corrections)
            .map(|(y, c)| dot(&self.last_gradient, &sub(y, &prev_decision)) + c)
            .collect();
        let weights = self.session.predict(&optimism, self.range)?;
        let pair_weights = self.session.current_weights().map(|w| w.values.clone()).unwrap_or_default();
        let decision = mixture(&weights, &points);
        self.diagnostics.mixture_error =
            self.diagnostics.mixture_error.max(reverse_mixture_error(&weights, &points, &decision));
        self.pending =
            Some(SingleGradientPending { points, optimism, corrections, weights, decision: decision.clone(), pair_weights });
        Ok(decision)
    }

    /// Queries the gradient at x_t once and updates every learner.
    pub fn update(&mut self, oracle: &mut dyn GradientOracle) -> Result<()> {
        let pending = self.pending.take().ok_or_else(|| Error::Protocol("update called before predict".into()))?;
        let g = oracle.gradient(&pending.decision);
        self.diagnostics.gradient_calls += 1;
        let SingleGradientPending { points, optimism, corrections, weights, decision, pair_weights } = pending;
        let loss: Vec<f64> =
            points.iter().zip(&corrections).map(|(x, c)| dot(&g, &sub(x, &decision)) + c).collect();
        let err = loss.iter().zip(&optimism).fold(0.0_f64, |m, (l, o)| m.max((l - o).abs()));
        if err > self.range * (1.0 + 1e-9) {
            return Err(Error::Range(format!(
                "prediction error {err} exceeds the range {} implied by the declared Lipschitz constant",
                self.range
            )));
        }
        let n = self.session.grid().len();
        let rates = self.session.grid().rates();
        for (idx, w) in pair_weights.iter().enumerate() {
            let i = idx / n;
            let e = loss[i] - optimism[i];
            self.weighted_errors += rates[idx % n] * w * e * e;
        }
        let played = dot(&loss, &weights);
        for (i, (l, o)) in loss.iter().zip(&optimism).enumerate() {
            self.meta_regret[i] += played - l;
            self.squared_errors[i] += (l - o) * (l - o);
        }
        self.session.update(&loss)?;
        for ((learner, kind), x) in self.roster.learners.iter_mut().zip(&self.roster.surrogates).zip(&points) {
            let surrogate = SurrogateLoss { kind: *kind, anchor: &decision, gradient: &g };
            learner.update(&surrogate.gradient_at(x))?;
        }
        self.rounds += 1;
        self.diagnostics.rounds = self.rounds;
        self.diagnostics.lower_bound_min_slack =
            self.diagnostics.lower_bound_min_slack.min(lower_bound_slack(&loss, &weights));
        self.stability.push(&weights, &points);
        let gradient_norm = norm2(&g);
        if self.config.record {
            self.log.push(EnsembleRound {
                decision: decision.clone(),
                weights,
                optimism,
                loss,
                base_points: points.clone(),
                gradient_norm,
                range: self.range,
                active_pairs: self.session.active_pairs(self.range),
                search: None,
                restarted: false,
            });
        }
        self.previous = Some((points, decision));
        self.last_gradient = g;
        Ok(())
    }

    /// Meta bound with the negative terms, for each expert at its best
    /// admissible rate.
    pub fn meta_bound(&self) -> MetaBoundReport {
        let k = self.experts();
        let grid = self.session.grid();
        let complexity = (k as f64).ln() + (grid.len() as f64).ln();
        let cap = 1.0 / (32.0 * self.constants.c0 * self.range);
        let stability = self.constants.c0 * self.range * self.stability.sums().weights;
        let negative = 8.0 * self.weighted_errors + 4.0 * stability;
        let bound: Vec<f64> = self
            .squared_errors
            .iter()
            .map(|&v| {
                grid.rates()
                    .iter()
                    .filter(|&&eta| eta <= cap * (1.0 + 1e-12))
                    .map(|&eta| complexity / eta + 16.0 * eta * v - negative)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let min_slack = bound.iter().zip(&self.meta_regret).map(|(b, r)| b - r).fold(f64::INFINITY, f64::min);
        MetaBoundReport { regret: self.meta_regret.clone(), bound, min_slack }
    }
}

/// Maps a surrogate kind to the curvature label used in reports.
pub fn surrogate_label(kind: SurrogateKind) -> &'static str {
    match kind {
        SurrogateKind::Linear => "convex",
        SurrogateKind::ExpConcave { .. } => "exp_concave",
        SurrogateKind::StronglyConvex { .. } => "strongly_convex",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{OcoStreamConfig, RoundLoss};
    use approx::assert_abs_diff_eq;

    fn ball(dim: usize) -> ConvexDomain {
        ConvexDomain::centered_ball(dim, 1.0).unwrap()
    }

    #[test]
    fn search_constant_map_needs_one_evaluation() {
        let out = fixed_point_search(|_| Ok(3.0), 3.0, 1.0, 1e-9).unwrap();
        assert_eq!(out.evaluations, 1);
        assert_eq!(out.alpha, 3.0);
    }

    #[test]
    fn search_finds_fixed_point_of_contraction() {
        // h(α) = 1 + α/2 has fixed point 2.
        let out = fixed_point_search(|a| Ok(1.0 + 0.5 * a), 10.0, 1.0, 1e-10).unwrap();
        assert_abs_diff_eq!(out.alpha, 2.0, epsilon = 1e-9);
        assert!(out.residual <= 1e-10);
    }

    #[test]
    fn search_rejects_bad_upper_bracket() {
        assert!(matches!(fixed_point_search(|a| Ok(a + 1.0), 0.0, 1.0, 1e-9), Err(Error::Numerical(_))));
    }

    #[test]
    fn search_gives_up_after_doublings() {
        assert!(matches!(fixed_point_search(|a| Ok(2.0 * a), -1.0, 1.0, 1e-9), Err(Error::Numerical(_))));
    }

    #[test]
    fn lambda_contribution_example() {
        // λ = 4, ‖Δx‖ = 0.5 → +1.
        assert_abs_diff_eq!(4.0 * dist_sq(&[0.5, 0.0], &[0.0, 0.0]), 1.0);
    }

    #[test]
    fn mixture_check_frozen_and_single() {
        let xs = vec![vec![0.1, 0.2], vec![-0.3, 0.0]];
        let c = mixture_stability_check(&[0.4, 0.6], &xs, &[0.4, 0.6], &xs, 2.0);
        assert_eq!(c.lhs, 0.0);
        assert!(c.holds());
        let mut acc = StabilityAccumulator::new(2.0);
        for t in 0..5 {
            acc.push(&[1.0], &[vec![0.1 * t as f64, 0.0]]);
        }
        let s = acc.sums();
        assert_abs_diff_eq!(s.decision, s.base[0], epsilon = 1e-15);
        assert_eq!(s.weights, 0.0);
        assert_eq!(s.pairs, 4);
    }

    #[test]
    fn first_round_inputs_vanish() {
        let mut e = FullInfoEnsemble::new(FullInfoConfig::new(ball(2), 64, 2.0)).unwrap();
        let f = RoundLoss::Quadratic { target: vec![0.3, -0.1] };
        let x = e.predict(None).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        e.config.record = true;
        e.update(&mut CountingOracle::new(&f)).unwrap();
        let r = &e.log()[0];
        assert!(r.loss.iter().all(|l| *l == 0.0));
        assert!(r.optimism.iter().all(|m| *m == 0.0));
    }

    #[test]
    fn linear_losses_are_homogeneous() {
        let mut cfg = FullInfoConfig::new(ball(2), 32, 0.0);
        cfg.record = true;
        let mut e = FullInfoEnsemble::new(cfg).unwrap();
        let fs: Vec<RoundLoss> = (0..6)
            .map(|t| RoundLoss::Linear { g: vec![if t % 2 == 0 { 1.0 } else { -0.5 }, 0.3] })
            .collect();
        for t in 0..fs.len() {
            let mut prev = (t > 0).then(|| CountingOracle::new(&fs[t - 1]));
            e.predict(prev.as_mut().map(|o| o as &mut dyn FunctionOracle)).unwrap();
            e.update(&mut CountingOracle::new(&fs[t])).unwrap();
        }
        for (r, f) in e.log().iter().zip(&fs) {
            let RoundLoss::Linear { g } = f else { unreachable!() };
            assert_abs_diff_eq!(r.loss[0], dot(g, &sub(&r.base_points[0], &r.decision)), epsilon = 1e-12);
        }
        let d = e.diagnostics();
        assert!(d.lower_bound_holds());
        assert!(d.search_holds());
        assert!(d.stability.mixture_holds());
    }

    #[test]
    fn full_info_runs_on_quadratic_stream() {
        let cfg = OcoStreamConfig::QuadraticDrift { dim: 2, radius: 1.0, drift: 0.01, burn_in: 8 };
        let stream = cfg.generate(128, 3).unwrap();
        let stats = stream.statistics();
        let mut fc = FullInfoConfig::new(stream.domain.clone(), 128, stats.smoothness);
        fc.search_scale = Some(stats.lipschitz);
        let mut e = FullInfoEnsemble::new(fc).unwrap();
        for t in 1..=128 {
            let mut prev = (t > 1).then(|| CountingOracle::new(stream.round(t - 1)));
            e.predict(prev.as_mut().map(|o| o as &mut dyn FunctionOracle)).unwrap();
            e.update(&mut CountingOracle::new(stream.round(t))).unwrap();
        }
        let regret = e.cumulative_loss() - stats.best_total;
        assert!(regret < 20.0, "regret {regret}");
        let d = e.diagnostics();
        assert!(d.lower_bound_holds(), "{}", d.lower_bound_min_slack);
        assert!(d.search_holds(), "{} > {}", d.search_max_residual, d.search_tolerance);
        assert!(d.mixture_error <= 1e-12);
        assert!(d.restarts.is_empty());
    }

    #[test]
    fn horizon_guess_is_squared_whenever_exceeded() {
        let mut e = FullInfoEnsemble::new(FullInfoConfig::new(ball(1), 2, 1.0)).unwrap();
        let f = RoundLoss::Quadratic { target: vec![0.5] };
        for t in 0..5 {
            let mut prev = (t > 0).then(|| CountingOracle::new(&f));
            e.predict(prev.as_mut().map(|o| o as &mut dyn FunctionOracle)).unwrap();
            e.update(&mut CountingOracle::new(&f)).unwrap();
        }
        assert_eq!(e.diagnostics().restarts, vec![3, 5]);
        assert_eq!(e.horizon(), 16);
    }

    #[test]
    fn single_gradient_counts_one_query_per_round() {
        let cfg = OcoStreamConfig::QuadraticDrift { dim: 2, radius: 0.5, drift: 0.01, burn_in: 8 };
        let stream = cfg.generate(64, 1).unwrap();
        let stats = stream.statistics();
        let mut sc = SingleGradientConfig::new(stream.domain.clone(), 64, stats.smoothness, stats.lipschitz);
        sc.record = true;
        let mut e = SingleGradientEnsemble::new(sc).unwrap();
        let mut calls = 0;
        for t in 1..=64 {
            e.predict().unwrap();
            let mut o = CountingOracle::new(stream.round(t));
            e.update(&mut o).unwrap();
            assert_eq!(o.value_calls, 0);
            calls += o.gradient_calls;
        }
        assert_eq!(calls, 64);
        assert_eq!(e.gradient_calls(), 64);
        let d = e.diagnostics();
        assert!(d.lower_bound_holds());
        assert!(d.stability.mixture_holds());
        let again = stability_sums(e.log(), stream.domain.diameter());
        assert_abs_diff_eq!(again.weights, d.stability.weights, epsilon = 1e-15);
        assert!(e.meta_bound().bound.iter().all(|b| b.is_finite()));
    }

    #[test]
    fn single_gradient_first_round_has_no_correction() {
        let mut e = SingleGradientEnsemble::new(SingleGradientConfig::new(ball(2), 16, 1.0, 1.0)).unwrap();
        e.config.record = true;
        e.predict().unwrap();
        let f = RoundLoss::Linear { g: vec![0.5, 0.0] };
        e.update(&mut CountingOracle::new(&f)).unwrap();
        assert!(e.log()[0].optimism.iter().all(|m| *m == 0.0));
    }

    #[test]
    fn single_gradient_rejects_bad_constants() {
        let mut c = SingleGradientConfig::new(ball(2), 16, 1.0, 1.0);
        c.constants = Some(SingleGradientConstants { c2: 0.0, lambda: 1.0, c0: 1.0, gamma: 1.0 });
        match SingleGradientEnsemble::new(c) {
            Err(Error::Config(msg)) => assert!(msg.contains("lambda")),
            other => panic!("expected config error, got {:?}", other.err()),
        }
    }
}
