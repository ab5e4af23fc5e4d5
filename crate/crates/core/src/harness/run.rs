use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AlgorithmKind, ExperimentConfig, StreamSpec};
use crate::base_learners::RosterKind;
use crate::baseline::{default_rate, Hedge};
use crate::environments::{fmt_float, CountingOracle, OcoStream, PeaSequence};
use crate::error::{Error, Result};
use crate::linalg::{dot, mixture, norm_inf};
use crate::numerics::InequalityCheck;
use crate::pea_adaptive::{DoublingRunner, Forecaster, RestartWrapper, WrapperConfig};
use crate::pea_core::{MsmwcSession, SessionConfig, BoundReport};
use crate::uol::{
    lower_bound_slack, stability_sums, EnsembleRound, FullInfoConfig, FullInfoEnsemble, FunctionOracle,
    MetaBoundReport, SingleGradientConfig, SingleGradientEnsemble, StabilitySums,
};

/// One named check. `passed` is meaningful only when `asserted`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: String,
    /// Measured value; null when there was nothing to measure.
    pub value: Option<f64>,
    /// `value >= threshold` for kind "min", `value <= threshold` for "max".
    pub kind: String,
    pub threshold: f64,
    pub asserted: bool,
    pub passed: bool,
}

impl Diagnostic {
    fn finite(v: f64) -> Option<f64> {
        v.is_finite().then_some(v)
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value: Self::finite(value),
            kind: "min".into(),
            threshold,
            asserted: true,
            passed: value >= threshold || value == f64::INFINITY,
        }
    }

    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value: Self::finite(value),
            kind: "max".into(),
            threshold,
            asserted: true,
            passed: value <= threshold,
        }
    }

    /// Reported only.
    pub fn report(name: &str, value: f64) -> Self {
        Self {
            name: name.into(),
            value: Self::finite(value),
            kind: "report".into(),
            threshold: 0.0,
            asserted: false,
            passed: true,
        }
    }

    fn unreported(mut self) -> Self {
        self.asserted = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Comparator {
    Expert { index: usize },
    Point { x: Vec<f64> },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub algorithm: AlgorithmKind,
    pub stream: String,
    pub seed: u64,
    pub horizon: u64,
    /// Experts (PEA) or base learners (ensembles).
    pub experts: usize,
    /// Accumulated round by round.
    pub regret: f64,
    /// Recomputed from the stored decisions and the regenerated losses.
    pub regret_recomputed: f64,
    pub cumulative_loss: f64,
    pub comparator_loss: f64,
    pub comparator: Comparator,
    /// V(u*) against the best expert (PEA).
    pub comparator_variance: Option<f64>,
    /// V_T (OCO).
    pub gradient_variation: Option<f64>,
    pub sigma_sq: Option<f64>,
    pub drift_sq: Option<f64>,
    pub final_range: Option<f64>,
    /// Rounds after which a range restart fired (PEA wrapper) or before which
    /// the ensemble was rebuilt.
    pub restarts: Vec<u64>,
    pub active_pairs: Option<usize>,
    pub grid_size: Option<usize>,
    pub stability: Option<StabilitySums>,
    pub meta_bound: Option<MetaBoundReport>,
    pub gradient_calls: Option<u64>,
    pub value_calls: Option<u64>,
    pub search_tolerance: Option<f64>,
    pub hedge_rate: Option<f64>,
    pub diagnostics: Vec<Diagnostic>,
    /// Every asserted diagnostic passed.
    pub passed: bool,
}

/// One row of the per-round CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRow {
    pub t: u64,
    pub loss: f64,
    pub comparator_loss: f64,
    pub regret: f64,
    pub range: f64,
    pub active_pairs: usize,
    pub restarted: bool,
    /// p_t (PEA) or x_t (OCO).
    pub decision: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeaRound {
    pub optimism: Vec<f64>,
    pub loss: Vec<f64>,
    pub decision: Vec<f64>,
    /// Range after the round (wrapper) or the fixed range (core).
    pub range: f64,
    pub restarted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcoRound {
    /// f_t(x_t).
    pub value: f64,
    /// f_t(u*) for the fixed comparator.
    pub comparator_value: f64,
    pub round: EnsembleRound,
}

/// Everything needed to re-run the diagnostics without the algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTrace {
    pub config: ExperimentConfig,
    pub summary: RunSummary,
    pub pea: Vec<PeaRound>,
    pub oco: Vec<OcoRound>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub rows: Vec<RoundRow>,
    pub trace: Option<StoredTrace>,
}

/// Plays MsMwC with a known, fixed range.
struct FixedRange {
    session: MsmwcSession,
    range: f64,
}

impl Forecaster for FixedRange {
    fn experts(&self) -> usize {
        self.session.experts()
    }

    fn predict(&mut self, optimism: &[f64]) -> Result<Vec<f64>> {
        self.session.predict(optimism, self.range)
    }

    fn update(&mut self, loss: &[f64]) -> Result<()> {
        self.session.update(loss)
    }
}

enum PeaPlayer {
    Core(FixedRange),
    Wrapper(RestartWrapper),
    Doubling(DoublingRunner),
    Hedge(Hedge),
}

impl PeaPlayer {
    fn forecaster(&mut self) -> &mut dyn Forecaster {
        match self {
            PeaPlayer::Core(f) => f,
            PeaPlayer::Wrapper(f) => f,
            PeaPlayer::Doubling(f) => f,
            PeaPlayer::Hedge(f) => f,
        }
    }

    /// (range after the round, restart count, active pairs, grid size)
    fn state(&self) -> (f64, usize, usize, usize) {
        match self {
            PeaPlayer::Core(f) => (f.range, 0, f.session.active_pairs(f.range), f.session.grid().len()),
            PeaPlayer::Wrapper(w) => wrapper_state(w, 0),
            PeaPlayer::Doubling(d) => wrapper_state(d.wrapper(), d.range_restarts() - d.wrapper().tracker().restart_count),
            PeaPlayer::Hedge(_) => (0.0, 0, 0, 0),
        }
    }
}

fn wrapper_state(w: &RestartWrapper, earlier: usize) -> (f64, usize, usize, usize) {
    let b = w.tracker().current;
    let (active, grid) = w.session().map_or((0, 0), |s| (s.active_pairs(b), s.grid().len()));
    (b, earlier + w.tracker().restart_count, active, grid)
}

fn uniform(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}

fn pea_range(cfg: &ExperimentConfig, max_error: f64) -> f64 {
    cfg.pea_core.range.unwrap_or(if max_error > 0.0 { max_error } else { 1.0 })
}

fn empty_summary(cfg: &ExperimentConfig, seed: u64, horizon: u64) -> RunSummary {
    RunSummary {
        name: cfg.name.clone(),
        algorithm: cfg.algorithm,
        stream: cfg.stream.name().into(),
        seed,
        horizon,
        experts: 0,
        regret: 0.0,
        regret_recomputed: 0.0,
        cumulative_loss: 0.0,
        comparator_loss: 0.0,
        comparator: Comparator::None,
        comparator_variance: None,
        gradient_variation: None,
        sigma_sq: None,
        drift_sq: None,
        final_range: None,
        restarts: Vec::new(),
        active_pairs: None,
        grid_size: None,
        stability: None,
        meta_bound: None,
        gradient_calls: None,
        value_calls: None,
        search_tolerance: None,
        hedge_rate: None,
        diagnostics: Vec::new(),
        passed: true,
    }
}

fn run_pea(cfg: &ExperimentConfig, seq: &PeaSequence, seed: u64, horizon: u64) -> Result<RunOutput> {
    let k = seq.experts();
    let stats = seq.statistics();
    let best = stats.best_expert;
    let mut summary = empty_summary(cfg, seed, horizon);
    summary.experts = k;
    summary.comparator = Comparator::Expert { index: best };
    summary.comparator_variance = Some(seq.comparator_variance(&one_hot(k, best)));
    let mut player = match cfg.algorithm {
        AlgorithmKind::PeaCore => {
            let range = pea_range(cfg, stats.max_error);
            let session = MsmwcSession::new(SessionConfig::new(uniform(k), horizon, range))?;
            PeaPlayer::Core(FixedRange { session, range })
        }
        AlgorithmKind::PeaAdaptive if cfg.pea_adaptive.doubling => PeaPlayer::Doubling(DoublingRunner::new(
            uniform(k),
            cfg.pea_adaptive.initial_guess,
            cfg.pea_adaptive.initial_range,
            false,
        )?),
        AlgorithmKind::PeaAdaptive => PeaPlayer::Wrapper(RestartWrapper::new(
            WrapperConfig::new(uniform(k), horizon).with_initial_range(cfg.pea_adaptive.initial_range),
        )?),
        AlgorithmKind::HedgeFixedEta => {
            let eta = cfg.hedge.eta.unwrap_or_else(|| default_rate(k, horizon));
            summary.hedge_rate = Some(eta);
            PeaPlayer::Hedge(Hedge::new(k, eta)?)
        }
        _ => unreachable!("validated"),
    };
    let mut rows = Vec::with_capacity(seq.len());
    let mut rounds = Vec::new();
    let (mut cumulative, mut comparator, mut restarts_seen) = (0.0, 0.0, 0);
    for t in 1..=seq.len() {
        let (m, l) = seq.round(t);
        let p = player.forecaster().predict(m)?;
        player.forecaster().update(l)?;
        let loss = dot(l, &p);
        cumulative += loss;
        comparator += l[best];
        let (range, restarts, active, _) = player.state();
        let restarted = restarts > restarts_seen;
        if restarted {
            summary.restarts.push(t as u64);
            restarts_seen = restarts;
        }
        if cfg.diagnostics {
            rounds.push(PeaRound { optimism: m.to_vec(), loss: l.to_vec(), decision: p.clone(), range, restarted });
        }
        rows.push(RoundRow {
            t: t as u64,
            loss,
            comparator_loss: l[best],
            regret: cumulative - comparator,
            range,
            active_pairs: active,
            restarted,
            decision: p,
        });
    }
    let (range, _, active, grid) = player.state();
    if !matches!(player, PeaPlayer::Hedge(_)) {
        summary.final_range = Some(range);
        summary.active_pairs = Some(active);
        summary.grid_size = Some(grid);
    }
    summary.cumulative_loss = cumulative;
    summary.comparator_loss = comparator;
    summary.regret = cumulative - comparator;
    // Independent recomputation: losses regenerated, best expert re-derived.
    let best_total = stats.cumulative_losses.iter().copied().fold(f64::INFINITY, f64::min);
    let played: f64 = rows.iter().enumerate().map(|(t, r)| dot(seq.round(t + 1).1, &r.decision)).sum();
    summary.regret_recomputed = played - best_total;
    Ok(RunOutput { summary, rows, trace: cfg.diagnostics.then(|| StoredTrace { config: cfg.clone(), summary: empty_summary(cfg, seed, horizon), pea: rounds, oco: Vec::new() }) })
}

fn one_hot(k: usize, i: usize) -> Vec<f64> {
    let mut u = vec![0.0; k];
    u[i] = 1.0;
    u
}

fn run_oco(cfg: &ExperimentConfig, stream: &OcoStream, seed: u64, horizon: u64) -> Result<RunOutput> {
    let stats = stream.statistics();
    let declared = cfg.declared().expect("oco config");
    let mut summary = empty_summary(cfg, seed, horizon);
    summary.comparator = Comparator::Point { x: stats.minimizer.clone() };
    summary.gradient_variation = Some(stats.gradient_variation);
    summary.sigma_sq = Some(stats.sigma_sq);
    summary.drift_sq = Some(stats.drift_sq);
    let record = cfg.diagnostics;
    let mut rows = Vec::with_capacity(stream.len());
    let mut values = Vec::with_capacity(stream.len());
    let (mut cumulative, mut comparator) = (0.0, 0.0);
    let mut push_row = |t: usize, x: Vec<f64>, range: f64, active: usize, restarted: bool| {
        let f = stream.round(t);
        let v = f.value(&x);
        let c = f.value(&stats.minimizer);
        cumulative += v;
        comparator += c;
        values.push((v, c));
        rows.push(RoundRow {
            t: t as u64,
            loss: v,
            comparator_loss: c,
            regret: cumulative - comparator,
            range,
            active_pairs: active,
            restarted,
            decision: x,
        });
    };
    let log: Vec<EnsembleRound>;
    match cfg.algorithm {
        AlgorithmKind::UolFullinfo => {
            let mut fc = FullInfoConfig::new(stream.domain.clone(), horizon, declared.smoothness);
            fc.roster = cfg.uol.roster.unwrap_or(RosterKind::Standard);
            fc.initial_range = cfg.uol.initial_range;
            fc.search_constant = cfg.uol.search_constant;
            fc.record = record;
            let mut e = FullInfoEnsemble::new(fc)?;
            let mut restarts_seen = 0;
            for t in 1..=stream.len() {
                let mut prev = (t > 1).then(|| CountingOracle::new(stream.round(t - 1)));
                let x = e.predict(prev.as_mut().map(|o| o as &mut dyn FunctionOracle))?;
                e.update(&mut CountingOracle::new(stream.round(t)))?;
                let b = e.meta().tracker().current;
                let active = e.meta().session().map_or(0, |s| s.active_pairs(b));
                let restarts = e.diagnostics().restarts.len();
                push_row(t, x, b, active, restarts > restarts_seen);
                restarts_seen = restarts;
            }
            let d = e.diagnostics();
            summary.experts = e.experts();
            summary.final_range = Some(e.meta().tracker().current);
            summary.restarts = d.restarts.clone();
            summary.stability = Some(d.stability.clone());
            summary.gradient_calls = Some(d.gradient_calls);
            summary.value_calls = Some(d.value_calls);
            summary.search_tolerance = Some(d.search_tolerance);
            summary.grid_size = e.meta().session().map(|s| s.grid().len());
            summary.active_pairs = rows.last().map(|r| r.active_pairs);
            log = e.log().to_vec();
        }
        AlgorithmKind::UolSinglegrad => {
            let mut sc = SingleGradientConfig::new(
                stream.domain.clone(),
                horizon,
                declared.smoothness,
                declared.lipschitz,
            );
            sc.constants = cfg.uol.constants;
            sc.record = record;
            let mut e = SingleGradientEnsemble::new(sc)?;
            let (mut gradient_calls, mut value_calls) = (0, 0);
            for t in 1..=stream.len() {
                let x = e.predict()?;
                let mut oracle = CountingOracle::new(stream.round(t));
                e.update(&mut oracle)?;
                gradient_calls += oracle.gradient_calls;
                value_calls += oracle.value_calls;
                push_row(t, x, e.range(), e.session().active_pairs(e.range()), false);
            }
            summary.experts = e.experts();
            summary.final_range = Some(e.range());
            summary.stability = Some(e.diagnostics().stability);
            summary.meta_bound = Some(e.meta_bound());
            summary.gradient_calls = Some(gradient_calls);
            summary.value_calls = Some(value_calls);
            summary.grid_size = Some(e.session().grid().len());
            summary.active_pairs = Some(e.session().active_pairs(e.range()));
            log = e.log().to_vec();
        }
        _ => unreachable!("validated"),
    }
    summary.cumulative_loss = cumulative;
    summary.comparator_loss = comparator;
    summary.regret = cumulative - comparator;
    let played: f64 = rows.iter().map(|r| stream.round(r.t as usize).value(&r.decision)).sum();
    summary.regret_recomputed = played - stats.best_total;
    let oco = log
        .into_iter()
        .zip(values)
        .map(|(round, (value, comparator_value))| OcoRound { value, comparator_value, round })
        .collect();
    let trace = record.then(|| StoredTrace { config: cfg.clone(), summary: empty_summary(cfg, seed, horizon), pea: Vec::new(), oco });
    Ok(RunOutput { summary, rows, trace })
}

/// One seed at one horizon.
pub fn run_replica(cfg: &ExperimentConfig, seed: u64, horizon: u64) -> Result<RunOutput> {
    let mut out = if horizon == 0 {
        RunOutput { summary: empty_summary(cfg, seed, 0), rows: Vec::new(), trace: None }
    } else {
        match &cfg.stream {
            StreamSpec::Pea(s) => run_pea(cfg, &s.generate(horizon, seed)?, seed, horizon)?,
            StreamSpec::Oco(s) => run_oco(cfg, &s.generate(horizon, seed)?, seed, horizon)?,
        }
    };
    if let Some(trace) = out.trace.as_mut() {
        trace.summary = out.summary.clone();
        let diagnostics = evaluate(trace)?;
        out.summary.passed = diagnostics.iter().all(|d| !d.asserted || d.passed);
        out.summary.diagnostics = diagnostics;
        trace.summary = out.summary.clone();
    }
    Ok(out)
}

/// Every seed of the config at its `horizon`, in parallel; results in seed order.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<RunOutput>> {
    cfg.seeds.par_iter().map(|&s| run_replica(cfg, s, cfg.horizon)).collect()
}

/// B_t = max(B_{t−1}, ‖ℓ_t − m_t‖_∞) with a restart after every round where
/// B_t exceeds the reference times T; the reference then moves to B_t.
/// Returns the restart rounds (1-based) and the ranges.
pub fn expected_restarts(errors: &[f64], initial: f64, horizon: u64) -> (Vec<u64>, Vec<f64>) {
    let (mut reference, mut b) = (initial, initial);
    let mut restarts = Vec::new();
    let mut ranges = Vec::with_capacity(errors.len());
    for (t, &e) in errors.iter().enumerate() {
        b = b.max(e);
        ranges.push(b);
        if b > reference * horizon as f64 {
            restarts.push(t as u64 + 1);
            reference = b;
        }
    }
    (restarts, ranges)
}

const REGRET_TOLERANCE: f64 = 1e-9;

fn regret_agreement(summary: &RunSummary) -> Diagnostic {
    let gap = (summary.regret - summary.regret_recomputed).abs() / summary.regret.abs().max(1.0);
    Diagnostic::at_most("regret_agreement", gap, REGRET_TOLERANCE)
}

/// Checks of the inequalities behind the PEA bound, on a replayed session.
fn pea_core_checks(trace: &StoredTrace) -> Result<Vec<Diagnostic>> {
    let s = &trace.summary;
    let k = s.experts;
    let range = trace.pea.first().map_or(1.0, |r| r.range);
    let mut session = MsmwcSession::new(SessionConfig::new(uniform(k), s.horizon, range).with_trace(true))?;
    let mut replay = 0.0_f64;
    for r in &trace.pea {
        let p = session.predict(&r.optimism, range)?;
        replay = replay.max(norm_inf(&p.iter().zip(&r.decision).map(|(a, b)| a - b).collect::<Vec<_>>()));
        session.update(&r.loss)?;
    }
    let st = session.trace().expect("tracing on");
    let totals: Vec<f64> = (0..k).map(|i| trace.pea.iter().map(|r| r.loss[i]).sum()).collect();
    let best = (0..k).min_by(|a, b| totals[*a].total_cmp(&totals[*b])).unwrap_or(0);
    let worst = (0..k).max_by(|a, b| totals[*a].total_cmp(&totals[*b])).unwrap_or(0);
    let n = st.grid.len();
    let (mut omd, mut stated, mut supported) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut stated_round0 = f64::INFINITY;
    for i in [best, worst] {
        let u = one_hot(k, i);
        for rate in 0..n {
            let lifted = st.lift(&u, rate);
            for t in 0..=trace.pea.len() {
                match st.check_omd_inequality(t, &lifted) {
                    Ok(c) => omd = omd.min(c.slack()),
                    Err(Error::Domain(_)) => continue,
                    Err(e) => return Err(e),
                }
                let b = st.check_round_bound(t, &lifted)?;
                stated = stated.min(b.slack_stated());
                supported = supported.min(b.slack_supported());
                if t == 0 {
                    stated_round0 = stated_round0.min(b.slack_stated());
                }
            }
        }
    }
    let end_to_end = st.check_theorem2_bound(&one_hot(k, best))?;
    let (negative, penalty) = st.auxiliary_cancellation();
    let tol = -InequalityCheck::TOLERANCE;
    Ok(vec![
        Diagnostic::at_most("replay_consistency", replay, 1e-12),
        Diagnostic::at_least("omd_one_step", omd, tol),
        Diagnostic::at_least("round_bound", supported, tol),
        Diagnostic::at_least("round_bound_printed", stated, tol).unreported(),
        Diagnostic::at_least("round_bound_printed_t0", stated_round0, tol).unreported(),
        Diagnostic::at_least("end_to_end_bound", end_to_end.min_slack(), -BoundReport::TOLERANCE),
        Diagnostic::report("auxiliary_negative_term", negative),
        Diagnostic::report("auxiliary_penalty", penalty),
    ])
}

fn pea_adaptive_checks(trace: &StoredTrace) -> Vec<Diagnostic> {
    let s = &trace.summary;
    let cfg = &trace.config.pea_adaptive;
    let errors: Vec<f64> = trace
        .pea
        .iter()
        .map(|r| r.loss.iter().zip(&r.optimism).fold(0.0_f64, |m, (l, o)| m.max((l - o).abs())))
        .collect();
    let mut out = Vec::new();
    if !cfg.doubling {
        let (restarts, ranges) = expected_restarts(&errors, cfg.initial_range, s.horizon);
        let mismatch = if restarts == s.restarts { 0.0 } else { 1.0 };
        out.push(Diagnostic::at_most("restart_rounds", mismatch, 0.0));
        let range_gap = ranges.iter().zip(&trace.pea).fold(0.0_f64, |m, (a, r)| m.max((a - r.range).abs()));
        out.push(Diagnostic::at_most("range_tracking", range_gap, 0.0));
        // Σ‖ℓ − ℓ̄‖_∞ with ℓ̄ = m + (B_{t−1}/B_t)(ℓ − m)
        let mut prev = cfg.initial_range;
        let mut drift = 0.0;
        for (e, b) in errors.iter().zip(&ranges) {
            drift += e * (1.0 - prev / b);
            prev = *b;
        }
        let bt = ranges.last().copied().unwrap_or(cfg.initial_range);
        out.push(Diagnostic::at_most("surrogate_drift_ratio", drift / bt, 2.0));
    }
    out.push(Diagnostic::report("restarts", s.restarts.len() as f64));
    out
}

fn oco_checks(trace: &StoredTrace) -> Vec<Diagnostic> {
    let s = &trace.summary;
    let rounds: Vec<EnsembleRound> = trace.oco.iter().map(|r| r.round.clone()).collect();
    let lower = rounds.iter().map(|r| lower_bound_slack(&r.loss, &r.weights)).fold(f64::INFINITY, f64::min);
    let mixture_error = rounds
        .iter()
        .map(|r| {
            let x = mixture(&r.weights, &r.base_points);
            norm_inf(&x.iter().zip(&r.decision).map(|(a, b)| a - b).collect::<Vec<_>>())
        })
        .fold(0.0, f64::max);
    let diameter = trace.config.declared().map_or(1.0, |d| d.diameter);
    let sums = stability_sums(&rounds, diameter);
    let tol = -InequalityCheck::TOLERANCE;
    let mut out = vec![
        Diagnostic::at_least("lower_bound", lower, tol),
        Diagnostic::at_most("mixture_consistency", mixture_error, 1e-12),
        Diagnostic::at_least("mixture_stability", sums.mixture_min_slack, tol),
    ];
    match s.algorithm {
        AlgorithmKind::UolFullinfo => {
            let ratio = rounds.iter().filter_map(|r| r.search.map(|o| o.residual / o.tolerance)).fold(0.0, f64::max);
            out.push(Diagnostic::at_most("search_residual_ratio", ratio, 1.0));
        }
        AlgorithmKind::UolSinglegrad => {
            out.push(Diagnostic::at_most(
                "gradient_calls_excess",
                (s.gradient_calls.unwrap_or(0) as f64 - s.horizon as f64).abs(),
                0.0,
            ));
            out.push(Diagnostic::at_most("value_calls", s.value_calls.unwrap_or(0) as f64, 0.0));
            if let Some(m) = &s.meta_bound {
                out.push(Diagnostic::report("meta_bound_min_slack", m.min_slack));
            }
        }
        _ => {}
    }
    out
}

/// Diagnostics of a stored trace; asserted ones decide the exit status.
pub fn evaluate(trace: &StoredTrace) -> Result<Vec<Diagnostic>> {
    let s = &trace.summary;
    let mut out = vec![regret_agreement(s)];
    match s.algorithm {
        AlgorithmKind::PeaCore => out.extend(pea_core_checks(trace)?),
        AlgorithmKind::PeaAdaptive => out.extend(pea_adaptive_checks(trace)),
        AlgorithmKind::HedgeFixedEta => {}
        AlgorithmKind::UolFullinfo | AlgorithmKind::UolSinglegrad => out.extend(oco_checks(trace)),
    }
    Ok(out)
}

fn stem(s: &RunSummary) -> String {
    format!("{}_{}_s{}_T{}", s.name, s.algorithm.name(), s.seed, s.horizon)
}

fn write_rows(path: &Path, rows: &[RoundRow], dim: usize, decision_label: &str) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write!(w, "t,loss,comparator_loss,regret,range,active_pairs,restarted")?;
    for i in 0..dim {
        write!(w, ",{decision_label}_{i}")?;
    }
    writeln!(w)?;
    for r in rows {
        write!(
            w,
            "{},{},{},{},{},{},{}",
            r.t,
            fmt_float(r.loss),
            fmt_float(r.comparator_loss),
            fmt_float(r.regret),
            fmt_float(r.range),
            r.active_pairs,
            u8::from(r.restarted)
        )?;
        for v in &r.decision {
            write!(w, ",{}", fmt_float(*v))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Writes `<stem>.summary.json`, `<stem>.rounds.csv` and, with diagnostics,
/// `<stem>.trace.json` for every output. Returns the summary paths.
pub fn write_outputs(dir: &Path, outputs: &[RunOutput]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for out in outputs {
        let stem = stem(&out.summary);
        let summary_path = dir.join(format!("{stem}.summary.json"));
        write_json(&summary_path, &out.summary)?;
        let dim = out.rows.first().map_or(0, |r| r.decision.len());
        let label = if out.summary.algorithm.is_pea() { "p" } else { "x" };
        write_rows(&dir.join(format!("{stem}.rounds.csv")), &out.rows, dim, label)?;
        if let Some(trace) = &out.trace {
            write_json(&dir.join(format!("{stem}.trace.json")), trace)?;
        }
        paths.push(summary_path);
    }
    Ok(paths)
}
