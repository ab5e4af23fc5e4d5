//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass criterion numbers as arguments to run a subset.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uolkit::base_learners::SingleGradientConstants;
use uolkit::baseline::{default_rate, Hedge};
use uolkit::environments::{CountingOracle, OcoStream, PeaSequence, PeaStreamConfig};
use uolkit::error::Error;
use uolkit::harness::{emit_plotdata, run, sweep, write_outputs, write_sweep, ExperimentConfig, SweepReport};
use uolkit::numerics::{entropic_omd_solve, kkt_residual, log_stationarity_gap, LogWeights, WeightedEntropyGeometry};
use uolkit::pea_adaptive::{Forecaster, RestartWrapper, WrapperConfig};
use uolkit::pea_core::{MsmwcSession, SessionConfig};
use uolkit::uol::{
    fixed_point_search, EnsembleRound, FullInfoConfig, FullInfoEnsemble, FunctionOracle, SingleGradientConfig,
    SingleGradientEnsemble,
};

const SLACK_TOLERANCE: f64 = 1e-9;

struct Outcome {
    passed: bool,
    detail: String,
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn uniform(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn mix(p: &[f64], xs: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; xs[0].len()];
    for (w, x) in p.iter().zip(xs) {
        for (o, v) in out.iter_mut().zip(x) {
            *o += w * v;
        }
    }
    out
}

// ---------------------------------------------------------------- criterion 1

/// Direct evaluation of ⟨c, w⟩ + Σ (w ln(w/p) − w + p)/η for one coordinate.
fn omd_term(c: f64, w: f64, p: f64, eta: f64) -> f64 {
    let ent = if w > 0.0 { w * (w / p).ln() - w + p } else { p };
    c * w + ent / eta
}

/// Brute-force minimizer over a 1e-3 grid of the face spanned by `live`.
fn grid_argmin(cost: &[f64], prior: &[f64], rates: &[f64], live: &[usize]) -> Vec<f64> {
    const STEPS: usize = 1000;
    let h = 1.0 / STEPS as f64;
    let table: Vec<Vec<f64>> = live
        .iter()
        .map(|&j| (0..=STEPS).map(|s| omd_term(cost[j], s as f64 * h, prior[j], rates[j])).collect())
        .collect();
    let mut best = (f64::INFINITY, vec![0usize; live.len()]);
    match live.len() {
        1 => best.1 = vec![STEPS],
        2 => {
            for a in 0..=STEPS {
                let v = table[0][a] + table[1][STEPS - a];
                if v < best.0 {
                    best = (v, vec![a, STEPS - a]);
                }
            }
        }
        3 => {
            for a in 0..=STEPS {
                for b in 0..=STEPS - a {
                    let v = table[0][a] + table[1][b] + table[2][STEPS - a - b];
                    if v < best.0 {
                        best = (v, vec![a, b, STEPS - a - b]);
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    let mut w = vec![0.0; cost.len()];
    for (&j, &s) in live.iter().zip(&best.1) {
        w[j] = s as f64 * h;
    }
    w
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_gap: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(3..=8);
        let rates: Vec<f64> = (0..n).map(|_| 2f64.powi(rng.random_range(-3..=3))).collect();
        let prior: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let cost: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let k = rng.random_range(1..=3);
        let mut live: Vec<usize> = Vec::new();
        while live.len() < k {
            let j = rng.random_range(0..n);
            if !live.contains(&j) {
                live.push(j);
            }
        }
        live.sort_unstable();
        let active: Vec<bool> = (0..n).map(|j| live.contains(&j)).collect();
        let geometry = WeightedEntropyGeometry::new(rates.clone()).unwrap();
        let solved = entropic_omd_solve(&cost, &prior, &geometry, &active).unwrap();
        let oracle = grid_argmin(&cost, &prior, &rates, &live);
        let gap = solved.values().iter().zip(&oracle).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        worst_gap = worst_gap.max(gap);
    }
    let mut worst_kkt: f64 = 0.0;
    let mut worst_log: f64 = 0.0;
    for _ in 0..10_000 {
        let n = rng.random_range(1..=64);
        let rates: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-3.0..=3.0))).collect();
        let prior: Vec<f64> =
            (0..n).map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(1e-6..1.0) }).collect();
        let cost: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..=10.0)).collect();
        let mut active: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
        let anchor = rng.random_range(0..n);
        active[anchor] = true;
        let mut prior = prior;
        if prior[anchor] == 0.0 {
            prior[anchor] = 0.5;
        }
        let geometry = WeightedEntropyGeometry::new(rates).unwrap();
        let solved = entropic_omd_solve(&cost, &prior, &geometry, &active).unwrap();
        worst_kkt = worst_kkt.max(kkt_residual(&cost, &prior, &geometry, &active, &solved));
        worst_log = worst_log.max(log_stationarity_gap(&cost, &prior, &geometry, &active, &solved));
    }
    outcome(
        worst_gap <= 5e-3 && worst_kkt <= 1e-10,
        format!("grid-oracle L∞ gap {worst_gap:.2e} (≤ 5e-3, 200 instances); KKT residual {worst_kkt:.2e} (≤ 1e-10, 10⁴ instances); \
             log-scale stationarity gap relative to |η(c+μ)| {worst_log:.2e} (reported)"),
    )
}

// ---------------------------------------------------------------- criteria 2 and 3

fn pea_kinds(k: usize) -> [PeaStreamConfig; 4] {
    [
        PeaStreamConfig::IidGap { experts: k, gap: 0.1 },
        PeaStreamConfig::DriftingLeader { experts: k, gap: 0.2, period: 100 },
        PeaStreamConfig::ScaleShock { experts: k, gap: 0.2, factor: 10.0, shock_round: None },
        PeaStreamConfig::OptimismQuality { experts: k, gap: 0.1, noise_min: 0.01, noise_max: 1.0 },
    ]
}

fn max_error(seq: &PeaSequence) -> f64 {
    seq.loss
        .iter()
        .zip(&seq.optimism)
        .flat_map(|(l, m)| l.iter().zip(m).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

/// Plays MsMwC at the known range of the sequence with tracing on.
fn traced_session(seq: &PeaSequence) -> MsmwcSession {
    let k = seq.experts();
    let range = max_error(seq).max(f64::MIN_POSITIVE);
    let mut s = MsmwcSession::new(SessionConfig::new(uniform(k), seq.len() as u64, range).with_trace(true)).unwrap();
    for t in 1..=seq.len() {
        let (m, l) = seq.round(t);
        s.predict(m, range).unwrap();
        s.update(l).unwrap();
    }
    s
}

fn criterion_2() -> Outcome {
    let (k, horizon) = (8, 1000);
    let kinds = pea_kinds(k);
    let mut omd = f64::INFINITY;
    let mut printed_t0 = f64::INFINITY;
    let mut printed_rest = f64::INFINITY;
    let mut supported = f64::INFINITY;
    let mut indicator_t0 = f64::NEG_INFINITY;
    let mut checked = 0usize;
    for seed in 0..100u64 {
        let seq = kinds[seed as usize % 4].generate(horizon, seed).unwrap();
        let session = traced_session(&seq);
        let trace = session.trace().unwrap();
        let n = trace.grid.len();
        let totals: Vec<f64> = (0..k).map(|i| seq.loss.iter().map(|l| l[i]).sum()).collect();
        let best = (0..k).min_by(|a, b| totals[*a].total_cmp(&totals[*b])).unwrap();
        let worst = (0..k).max_by(|a, b| totals[*a].total_cmp(&totals[*b])).unwrap();
        let mut comparators: Vec<LogWeights> = Vec::new();
        for i in [best, worst] {
            let mut u = vec![0.0; k];
            u[i] = 1.0;
            comparators.extend((0..n).map(|r| trace.lift(&u, r)));
        }
        // a random comparator spread over every pair live in all rounds
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let live: Vec<bool> = (0..k * n).map(|j| trace.rounds.iter().all(|r| r.active[j]) && trace.auxiliary.active[j]).collect();
        let raw: Vec<f64> = live.iter().map(|&a| if a { rng.random_range(0.0..1.0) } else { 0.0 }).collect();
        let total: f64 = raw.iter().sum();
        comparators.push(LogWeights::from_values(raw.iter().map(|v| v / total).collect()));
        for u in &comparators {
            for t in 0..=horizon as usize {
                let one_step = match trace.check_omd_inequality(t, u) {
                    Ok(c) => c,
                    Err(Error::Domain(_)) => continue,
                    Err(e) => panic!("{e}"),
                };
                omd = omd.min(one_step.slack());
                let b = trace.check_round_bound(t, u).unwrap();
                supported = supported.min(b.slack_supported());
                if t == 0 {
                    printed_t0 = printed_t0.min(b.slack_stated());
                    indicator_t0 = indicator_t0.max(b.overflow_term);
                } else {
                    printed_rest = printed_rest.min(b.slack_stated());
                }
                checked += 1;
            }
        }
    }
    let passed = omd >= -SLACK_TOLERANCE
        && printed_t0 >= -SLACK_TOLERANCE
        && printed_rest >= -SLACK_TOLERANCE
        && indicator_t0 <= 0.0;
    outcome(
        passed,
        format!(
            "{checked} (round, comparator) checks; one-step OMD min slack {omd:.3e}; round bound as printed: \
             min slack {printed_rest:.3e} on t ≥ 1, {printed_t0:.3e} on t = 0; round bound with the credit \
             restricted to pairs with 32η|ℓ−m| ≤ 1: {supported:.3e}; t = 0 indicator term max {indicator_t0:.3e} (≤ 0)"
        ),
    )
}

fn criterion_3() -> Outcome {
    let (k, horizon) = (8, 1000);
    let kinds = pea_kinds(k);
    let mut min_slack = f64::INFINITY;
    let mut points = 0usize;
    for seed in 0..100u64 {
        let seq = kinds[seed as usize % 4].generate(horizon, 1000 + seed).unwrap();
        let session = traced_session(&seq);
        let trace = session.trace().unwrap();
        let mut comparators: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                let mut u = vec![0.0; k];
                u[i] = 1.0;
                u
            })
            .collect();
        comparators.push(uniform(k));
        for u in &comparators {
            // realized regret recomputed from the sequence, bound from the trace
            let regret: f64 = trace.rounds.iter().zip(&seq.loss).map(|(r, l)| dot(l, &r.decision) - dot(l, u)).sum();
            let report = trace.check_theorem2_bound(u).unwrap();
            for p in &report.points {
                assert!((p.regret - regret).abs() <= 1e-9 * regret.abs().max(1.0));
                min_slack = min_slack.min(p.bound - regret);
                points += 1;
            }
        }
    }
    outcome(
        min_slack >= -1e-6 && points > 0,
        format!("{points} (seed, comparator, admissible η*) points; min bound − regret {min_slack:.3e}"),
    )
}

// ---------------------------------------------------------------- criterion 4

/// Restart rounds of the range rule replayed on raw prediction errors.
fn restart_oracle(seq: &PeaSequence, b0: f64) -> (Vec<usize>, f64) {
    let (mut reference, mut b) = (b0, b0);
    let mut rounds = Vec::new();
    for t in 1..=seq.len() {
        let (m, l) = seq.round(t);
        b = l.iter().zip(m).fold(b, |acc, (x, y)| acc.max((x - y).abs()));
        if b > reference * seq.len() as f64 {
            rounds.push(t);
            reference = b;
        }
    }
    (rounds, b)
}

fn criterion_4() -> Outcome {
    let mut mismatches = 0;
    let mut cases = 0;
    let mut shocked = 0;
    let mut worst_drift_ratio: f64 = 0.0;
    for &horizon in &[100u64, 1000] {
        for &factor in &[5.0, 50.0, 5000.0, 1e6] {
            for &b0 in &[1.0, 0.25] {
                for seed in 0..5u64 {
                    let cfg = PeaStreamConfig::ScaleShock { experts: 4, gap: 0.2, factor, shock_round: None };
                    let seq = cfg.generate(horizon, seed).unwrap();
                    let mut w = RestartWrapper::new(
                        WrapperConfig::new(uniform(4), horizon).with_initial_range(b0).with_trace(true),
                    )
                    .unwrap();
                    for t in 1..=seq.len() {
                        let (m, l) = seq.round(t);
                        w.predict(m).unwrap();
                        w.update(l).unwrap();
                    }
                    let (expected, bt) = restart_oracle(&seq, b0);
                    if w.tracker().restart_rounds != expected {
                        mismatches += 1;
                    }
                    if factor > b0 * horizon as f64 {
                        shocked += 1;
                        if expected.is_empty() {
                            mismatches += 1;
                        }
                    }
                    let drift: f64 = w
                        .log()
                        .iter()
                        .map(|r| r.loss.iter().zip(&r.surrogate).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
                        .sum();
                    worst_drift_ratio = worst_drift_ratio.max(drift / bt);
                    cases += 1;
                }
            }
        }
    }
    outcome(
        mismatches == 0 && worst_drift_ratio <= 2.0,
        format!(
            "{cases} runs ({shocked} with B₀T exceeded); restart-round mismatches {mismatches}; \
             max Σ‖ℓ−ℓ̄‖∞ / B_T {worst_drift_ratio:.4} (≤ 2)"
        ),
    )
}

// ---------------------------------------------------------------- criterion 5

struct TuningRun {
    /// ρ_i = R_T(e_i) / (√((log K + log|G|)·V(e_i)) + B_T(log K + log|G|)).
    ratios: Vec<f64>,
    variances: Vec<f64>,
}

fn tuning_ratios(seq: &PeaSequence, forecaster: &mut dyn Forecaster, log_grid: f64, b_t: f64) -> TuningRun {
    let k = seq.experts();
    let mut played = 0.0;
    for t in 1..=seq.len() {
        let (m, l) = seq.round(t);
        let p = forecaster.predict(m).unwrap();
        forecaster.update(l).unwrap();
        played += dot(l, &p);
    }
    let c = (k as f64).ln() + log_grid;
    let mut ratios = Vec::new();
    let mut variances = Vec::new();
    for i in 0..k {
        let total: f64 = seq.loss.iter().map(|l| l[i]).sum();
        let v: f64 = seq.loss.iter().zip(&seq.optimism).map(|(l, m)| (l[i] - m[i]).powi(2)).sum();
        ratios.push((played - total) / ((c * v).sqrt() + b_t * c));
        variances.push(v);
    }
    TuningRun { ratios, variances }
}

/// B_T: running max of ‖ℓ_t − m_t‖_∞ seeded with B₀ = 1.
fn final_range(seq: &PeaSequence) -> f64 {
    max_error(seq).max(1.0)
}

fn log_grid(horizon: u64) -> f64 {
    (2.0 * (horizon as f64).log2().ceil() + 1.0).ln()
}

fn wrapper_run(seq: &PeaSequence) -> TuningRun {
    let k = seq.experts();
    let horizon = seq.len() as u64;
    let mut w = RestartWrapper::new(WrapperConfig::new(uniform(k), horizon)).unwrap();
    let run = tuning_ratios(seq, &mut w, log_grid(horizon), final_range(seq));
    assert_eq!(w.session().map(|s| (s.grid().len() as f64).ln()), Some(log_grid(horizon)));
    run
}

fn criterion_5() -> Outcome {
    let (k, horizon) = (8, 2000);
    let cfg = PeaStreamConfig::OptimismQuality { experts: k, gap: 0.1, noise_min: 0.01, noise_max: 1.0 };
    let held_out: f64 = (100..110u64)
        .map(|s| wrapper_run(&cfg.generate(horizon, s).unwrap()).ratios.into_iter().fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::NEG_INFINITY, f64::max);
    // calibrated constant, frozen before the evaluation seeds are drawn
    let c = 1.5 * held_out.max(0.0);
    let mut eval_max = f64::NEG_INFINITY;
    let mut span: f64 = 0.0;
    let mut hedge_low = f64::NEG_INFINITY;
    let mut hedge_high = f64::NEG_INFINITY;
    let mut hedge_fails_both = 0;
    let seeds = 0..20u64;
    let n_seeds = seeds.end - seeds.start;
    for s in seeds {
        let seq = cfg.generate(horizon, s).unwrap();
        let run = wrapper_run(&seq);
        eval_max = run.ratios.iter().copied().fold(eval_max, f64::max);
        let vmin = run.variances.iter().copied().fold(f64::INFINITY, f64::min);
        let vmax = run.variances.iter().copied().fold(0.0, f64::max);
        span = span.max((vmax / vmin).log10());
        let mut hedge = Hedge::new(k, default_rate(k, horizon)).unwrap();
        let h = tuning_ratios(&seq, &mut hedge, log_grid(horizon), final_range(&seq));
        let lo = h.ratios[0];
        let hi = h.ratios[k - 1];
        hedge_low = hedge_low.max(lo);
        hedge_high = hedge_high.max(hi);
        if lo > c && hi > c {
            hedge_fails_both += 1;
        }
    }
    outcome(
        eval_max <= c && span >= 4.0,
        format!(
            "V(e_i) spans {span:.1} decades; C = 1.5 × held-out max ratio {held_out:.3} = {c:.3}; \
             evaluation max ratio {eval_max:.3} (≤ C); fixed-η Hedge (reported): max ratio vs lowest-V expert \
             {hedge_low:.3}, vs highest-V expert {hedge_high:.3}, both above C on {hedge_fails_both}/{n_seeds} seeds"
        ),
    )
}

// ---------------------------------------------------------------- criterion 6

const QUADRATIC: &str = "name = \"quadratic\"\nalgorithm = \"uol_fullinfo\"\nseeds = [0]\ndiagnostics = false\n\
    [stream]\nkind = \"quadratic_drift\"\ndim = 3\nradius = 1.0\ndrift = 0.01\nburn_in = 32\n";
const LOGISTIC: &str = "name = \"logistic\"\nalgorithm = \"uol_fullinfo\"\nseeds = [0]\ndiagnostics = false\n\
    [stream]\nkind = \"logistic_drift\"\ndim = 3\nradius = 1.0\nweight = 2.0\nburn_in = 32\n";
const LINEAR: &str = "name = \"linear\"\nalgorithm = \"uol_fullinfo\"\nseeds = [0]\ndiagnostics = false\n\
    [stream]\nkind = \"linear_drift\"\ndim = 3\nradius = 1.0\nbias = 0.2\namplitude = 1.0\nperiod = 1\nrandom_signs = true\n";

fn sweep_line(r: &SweepReport) -> String {
    let rows: Vec<String> =
        r.rows.iter().map(|row| format!("T={} regret {:.2} V_T {:.3}", row.horizon, row.regret_mean, row.variation)).collect();
    format!("{} {:?} statistic {:.3} (≤ {}): [{}]", r.stream, r.property, r.statistic, r.threshold, rows.join("; "))
}

fn criterion_6() -> Outcome {
    let horizons = [1024, 4096, 16384, 65536];
    let mut passed = true;
    let mut parts = Vec::new();
    for text in [QUADRATIC, LOGISTIC, LINEAR] {
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let report = sweep(&cfg, &horizons).unwrap();
        passed &= report.passed;
        parts.push(sweep_line(&report));
    }
    outcome(passed, parts.join(" | "))
}

// ---------------------------------------------------------------- criterion 7

fn oco_streams(horizon: u64, seed: u64) -> Vec<OcoStream> {
    [QUADRATIC, LOGISTIC, LINEAR]
        .iter()
        .map(|t| match ExperimentConfig::from_toml_str(t).unwrap().stream {
            uolkit::harness::StreamSpec::Oco(c) => c.generate(horizon, seed).unwrap(),
            _ => unreachable!(),
        })
        .collect()
}

/// (min ⟨ℓ_t, p_t⟩, min mixture-inequality slack) over a log.
fn ensemble_slacks(log: &[EnsembleRound], diameter: f64) -> (f64, f64) {
    let lower = log.iter().map(|r| dot(&r.loss, &r.weights)).fold(f64::INFINITY, f64::min);
    let mut mixture = f64::INFINITY;
    for w in log.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let x = mix(&a.weights, &a.base_points);
        let y = mix(&b.weights, &b.base_points);
        let spread: f64 = a.weights.iter().zip(a.base_points.iter().zip(&b.base_points)).map(|(p, (u, v))| p * dist_sq(u, v)).sum();
        let shift: f64 = a.weights.iter().zip(&b.weights).map(|(p, q)| (p - q).abs()).sum();
        mixture = mixture.min(2.0 * spread + 2.0 * diameter * diameter * shift * shift - dist_sq(&x, &y));
    }
    (lower, mixture)
}

fn criterion_7() -> Outcome {
    let horizon = 2048;
    let mut calls_ok = true;
    let mut lower = f64::INFINITY;
    let mut mixture = f64::INFINITY;
    let mut calls = Vec::new();
    for stream in oco_streams(horizon, 3) {
        let stats = stream.statistics();
        let (l, g) = stream.config.declared_constants();
        let mut cfg = SingleGradientConfig::new(stream.domain.clone(), horizon, l, g);
        cfg.record = true;
        let mut e = SingleGradientEnsemble::new(cfg).unwrap();
        let (mut grads, mut values) = (0, 0);
        for t in 1..=stream.len() {
            e.predict().unwrap();
            let mut oracle = CountingOracle::new(stream.round(t));
            e.update(&mut oracle).unwrap();
            grads += oracle.gradient_calls;
            values += oracle.value_calls;
        }
        calls_ok &= grads == horizon && values == 0;
        calls.push(format!("{}: {grads} gradient / {values} value calls", stream.config.name()));
        let (a, b) = ensemble_slacks(e.log(), stream.domain.diameter());
        lower = lower.min(a);
        mixture = mixture.min(b);
        assert!(stats.lipschitz <= g + 1e-12);
    }
    // constraint validation at load time
    let mut load_errors = 0;
    let base = QUADRATIC.replace("uol_fullinfo", "uol_singlegrad");
    let bad = [
        "[uol.constants]\nc2 = 1.0\nlambda = 0.0\nc0 = 1e6\ngamma = 1e9\n",
        "[uol.constants]\nc2 = 1.0\nlambda = 1e6\nc0 = 0.0\ngamma = 1e9\n",
        "[uol.constants]\nc2 = 1.0\nlambda = 1e6\nc0 = 1e6\ngamma = 1.0\n",
    ];
    for extra in bad {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, format!("{base}{extra}")).unwrap();
        if let Err(Error::Config(msg)) = ExperimentConfig::load(&path) {
            if msg.contains("uol.constants") {
                load_errors += 1;
            }
        }
    }
    let good = SingleGradientConstants::minimal(2.0, 2.0, 3.64);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(
        &path,
        format!("{base}[uol.constants]\nc2 = {}\nlambda = {}\nc0 = {}\ngamma = {}\n", good.c2, good.lambda, good.c0, good.gamma),
    )
    .unwrap();
    let good_loads = ExperimentConfig::load(&path).is_ok();
    outcome(
        calls_ok && lower >= -SLACK_TOLERANCE && mixture >= -SLACK_TOLERANCE && load_errors == bad.len() && good_loads,
        format!(
            "{}; bad constants rejected at load {load_errors}/{}; minimal constants accepted {good_loads}; \
             min ⟨ℓ_t, p_t⟩ {lower:.3e}; min mixture-inequality slack {mixture:.3e}",
            calls.join(", "),
            bad.len()
        ),
    )
}

// ---------------------------------------------------------------- criterion 8

/// Dense scan for the first crossing of h(α) − α going down from `upper`.
fn scan_fixed_point(h: &mut dyn FnMut(f64) -> f64, upper: f64, step: f64) -> f64 {
    let g = |h: &mut dyn FnMut(f64) -> f64, a: f64| h(a) - a;
    let coarse = 1e-3;
    let mut hi = upper;
    let mut lo = upper;
    let limit = upper - 64.0 * step;
    while lo > limit {
        lo = hi - coarse;
        if g(h, lo) >= 0.0 {
            break;
        }
        hi = lo;
    }
    let fine = 1e-7;
    let mut a = hi;
    while a > lo {
        let next = a - fine;
        if g(h, next) >= 0.0 {
            // crossing inside [next, a]
            let (ga, gn) = (g(h, a), g(h, next));
            return a - fine * ga / (ga - gn);
        }
        a = next;
    }
    lo
}

fn criterion_8() -> Outcome {
    let horizon = 2048;
    let mut worst_ratio: f64 = 0.0;
    let mut searched = 0;
    for stream in oco_streams(horizon, 5) {
        let stats = stream.statistics();
        let (l, _) = stream.config.declared_constants();
        let mut cfg = FullInfoConfig::new(stream.domain.clone(), horizon, l);
        cfg.record = true;
        let mut e = FullInfoEnsemble::new(cfg).unwrap();
        for t in 1..=stream.len() {
            let mut prev = (t > 1).then(|| CountingOracle::new(stream.round(t - 1)));
            e.predict(prev.as_mut().map(|o| o as &mut dyn FunctionOracle)).unwrap();
            e.update(&mut CountingOracle::new(stream.round(t))).unwrap();
        }
        let bound = 10.0 * stream.domain.diameter() * stats.lipschitz / horizon as f64;
        for r in e.log() {
            if let Some(s) = r.search {
                worst_ratio = worst_ratio.max(s.residual / bound);
                searched += 1;
            }
        }
    }
    // 1-D instances against a dense scan
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_gap: f64 = 0.0;
    let instances = 100;
    for _ in 0..instances {
        let k = 6;
        let mut w = RestartWrapper::new(WrapperConfig::new(uniform(k), 64)).unwrap();
        for _ in 0..rng.random_range(0..20) {
            let m: Vec<f64> = (0..k).map(|_| rng.random_range(-0.5..0.5)).collect();
            let l: Vec<f64> = (0..k).map(|_| rng.random_range(-0.5..0.5)).collect();
            w.predict(&m).unwrap();
            w.update(&l).unwrap();
        }
        let points: Vec<Vec<f64>> = (0..k).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let (a, c, b) = (rng.random_range(0.1..3.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let f = move |x: f64| a * (x - c) * (x - c) + b * x;
        let j = rng.random_range(0..k);
        let optimism: Vec<f64> = vec![0.0; k];
        let family = w.row_family(&optimism, j).unwrap();
        let values: Vec<f64> = points.iter().map(|p| f(p[0])).collect();
        let upper = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut h = |alpha: f64| {
            let p = family.decision(values[j] - alpha).unwrap();
            f(mix(&p, &points)[0])
        };
        let found = fixed_point_search(|al| Ok(h(al)), upper, 2.0, 1e-12).unwrap();
        let oracle = scan_fixed_point(&mut h, upper, 2.0);
        worst_gap = worst_gap.max((found.alpha - oracle).abs());
    }
    outcome(
        worst_ratio <= 1.0 && searched > 0 && worst_gap <= 1e-6,
        format!(
            "{searched} searches: max residual / (10·D·G/T) {worst_ratio:.4} (≤ 1); \
             1-D dense-scan max |α − α_scan| {worst_gap:.2e} over {instances} instances (≤ 1e-6)"
        ),
    )
}

// ---------------------------------------------------------------- criterion 9

const SEA: &str = "name = \"sea\"\nalgorithm = \"uol_fullinfo\"\ndiagnostics = false\n\
    [stream]\nkind = \"sea_sampler\"\ndim = 3\nradius = 1.0\ndrift = 0.0\nnoise = 2.0\n";

fn criterion_9() -> Outcome {
    let mut cfg = ExperimentConfig::from_toml_str(SEA).unwrap();
    cfg.seeds = (0..50).collect();
    let report = sweep(&cfg, &[256, 1024, 4096]).unwrap();
    // Σ ≡ 0: the mean targets never move, so Σ² is only the F₀ ≡ 0 first-round term.
    let stream = match &cfg.stream {
        uolkit::harness::StreamSpec::Oco(c) => c.generate(4096, 0).unwrap(),
        _ => unreachable!(),
    };
    let static_means = stream.means.iter().all(|c| c == &stream.means[0]);
    let sigma_sq = report.summaries.iter().filter_map(|s| s.drift_sq);
    let (lo, hi) = sigma_sq.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let ratios: Vec<String> = report.ratios.iter().map(|(a, b, r)| format!("R({b})/R({a}) = {r:.3}")).collect();
    outcome(
        report.property_passed && static_means,
        format!(
            "50 seeds; static means {static_means}, Σ² in [{lo:.3}, {hi:.3}] (first-round term only); {} (≤ 2.5); {}",
            ratios.join(", "),
            sweep_line(&report)
        ),
    )
}

// ---------------------------------------------------------------- criterion 10

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn produce(dir: &Path) {
    let configs = [
        "name = \"r\"\nalgorithm = \"pea_core\"\nhorizon = 300\nseeds = [0, 1]\n[stream]\nkind = \"optimism_quality\"\nexperts = 5\ngap = 0.1\nnoise_min = 0.01\nnoise_max = 1.0\n".to_string(),
        "name = \"r\"\nalgorithm = \"pea_adaptive\"\nhorizon = 300\nseeds = [2]\n[stream]\nkind = \"scale_shock\"\nexperts = 3\ngap = 0.2\nfactor = 1000.0\n".to_string(),
        QUADRATIC.replace("seeds = [0]", "seeds = [0, 1]\nhorizon = 256").replace("diagnostics = false", "diagnostics = true"),
        QUADRATIC
            .replace("uol_fullinfo", "uol_singlegrad")
            .replace("seeds = [0]", "seeds = [4]\nhorizon = 256")
            .replace("diagnostics = false", "diagnostics = true"),
    ];
    let mut inputs = Vec::new();
    for text in &configs {
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        inputs.extend(write_outputs(dir, &run(&cfg).unwrap()).unwrap());
    }
    let mut cfg = ExperimentConfig::from_toml_str(LINEAR).unwrap();
    cfg.seeds = vec![0, 1];
    inputs.push(write_sweep(dir, &sweep(&cfg, &[64, 128, 256]).unwrap()).unwrap());
    emit_plotdata(&inputs, &dir.join("plot.csv")).unwrap();
}

fn criterion_10() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    produce(a.path());
    produce(b.path());
    let (fa, fb) = (tree_bytes(a.path()), tree_bytes(b.path()));
    let names_match = fa.iter().map(|f| &f.0).eq(fb.iter().map(|f| &f.0));
    let differing: Vec<&str> = fa.iter().zip(&fb).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.as_str()).collect();
    let bytes: usize = fa.iter().map(|f| f.1.len()).sum();
    outcome(
        names_match && differing.is_empty() && !fa.is_empty(),
        format!("{} files ({bytes} bytes) compared; differing: {differing:?}", fa.len()),
    )
}

// ---------------------------------------------------------------- driver

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "OMD solve vs brute-force oracle and KKT", criterion_1),
        (2, "per-round inequalities incl. auxiliary round", criterion_2),
        (3, "end-to-end expert regret bound", criterion_3),
        (4, "restart correctness", criterion_4),
        (5, "impossible-tuning behavior", criterion_5),
        (6, "ensemble growth shapes", criterion_6),
        (7, "single-gradient discipline", criterion_7),
        (8, "fixed-point search", criterion_8),
        (9, "stochastic growth", criterion_9),
        (10, "reproducibility", criterion_10),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, title, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {verdict} {title} ({:.1}s): {}", start.elapsed().as_secs_f64(), o.detail);
        if !o.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
