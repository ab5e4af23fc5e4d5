use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::{run_replica, RunSummary};
use super::{ExperimentConfig, StreamSpec};
use crate::environments::{fmt_float, OcoStreamConfig};
use crate::error::{Error, Result};
use crate::pea_adaptive::{check_theorem4_shape, ShapeSample};

/// Growth property asserted across the horizons of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepProperty {
    /// regret(16T) / regret(T) ≤ 3.
    LogGrowth,
    /// max/min of regret/√V_T ≤ 2.
    SqrtVariationBand,
    /// regret(4T) / regret(T) ≤ 2.5.
    StochasticGrowth,
    /// Growth of regret over its variance scale ≤ 2.
    VarianceShape,
    /// Table only.
    None,
}

impl SweepProperty {
    pub fn default_for(stream: &StreamSpec) -> Self {
        match stream {
            StreamSpec::Pea(_) => SweepProperty::VarianceShape,
            StreamSpec::Oco(OcoStreamConfig::LinearDrift { .. }) => SweepProperty::SqrtVariationBand,
            StreamSpec::Oco(OcoStreamConfig::SeaSampler { .. }) => SweepProperty::StochasticGrowth,
            StreamSpec::Oco(_) => SweepProperty::LogGrowth,
        }
    }

    /// Horizon factor of the ratio properties.
    fn ratio_factor(self) -> Option<u64> {
        match self {
            SweepProperty::LogGrowth => Some(16),
            SweepProperty::StochasticGrowth => Some(4),
            _ => None,
        }
    }

    fn threshold(self) -> f64 {
        match self {
            SweepProperty::LogGrowth => 3.0,
            SweepProperty::StochasticGrowth => 2.5,
            SweepProperty::SqrtVariationBand => 2.0,
            SweepProperty::VarianceShape => 2.0,
            SweepProperty::None => f64::INFINITY,
        }
    }
}

/// Regret below this is treated as this when it divides a ratio.
pub const RATIO_FLOOR: f64 = 1.0;

/// Seed aggregate at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub horizon: u64,
    pub seeds: usize,
    pub regret_mean: f64,
    pub regret_min: f64,
    pub regret_max: f64,
    /// Mean V_T (OCO) or V(u*) (PEA).
    pub variation: f64,
    /// regret_mean / √variation; null when variation is 0.
    pub normalized: Option<f64>,
    pub final_range: Option<f64>,
    pub experts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub name: String,
    pub algorithm: String,
    pub stream: String,
    pub property: SweepProperty,
    pub rows: Vec<SweepRow>,
    /// (T, T', ratio) for the ratio properties.
    pub ratios: Vec<(u64, u64, f64)>,
    /// The statistic compared against `threshold`.
    pub statistic: f64,
    pub threshold: f64,
    pub property_passed: bool,
    /// Every replica passed its own diagnostics.
    pub diagnostics_passed: bool,
    pub passed: bool,
    pub summaries: Vec<RunSummary>,
}

fn check_horizons(horizons: &[u64]) -> Result<()> {
    let bad = |msg: &str| Err(Error::Config(format!("horizons: {msg}")));
    if horizons.len() < 3 {
        return bad("a sweep needs at least 3 horizons");
    }
    if horizons[0] == 0 {
        return bad("horizons must be positive");
    }
    let ratio = horizons[1] as f64 / horizons[0] as f64;
    if ratio <= 1.0 {
        return bad("horizons must increase");
    }
    for w in horizons.windows(2) {
        let r = w[1] as f64 / w[0] as f64;
        if (r - ratio).abs() > 1e-9 * ratio {
            return bad("horizons must be geometric");
        }
    }
    Ok(())
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn variation(s: &RunSummary) -> f64 {
    s.gradient_variation.or(s.comparator_variance).unwrap_or(0.0)
}

fn aggregate(horizon: u64, group: &[RunSummary]) -> SweepRow {
    let regret_mean = mean(group.iter().map(|s| s.regret));
    let v = mean(group.iter().map(variation));
    let final_range = group.iter().all(|s| s.final_range.is_some()).then(|| mean(group.iter().filter_map(|s| s.final_range)));
    SweepRow {
        horizon,
        seeds: group.len(),
        regret_mean,
        regret_min: group.iter().map(|s| s.regret).fold(f64::INFINITY, f64::min),
        regret_max: group.iter().map(|s| s.regret).fold(f64::NEG_INFINITY, f64::max),
        variation: v,
        normalized: (v > 0.0).then(|| regret_mean / v.sqrt()),
        final_range,
        experts: group.first().map_or(0, |s| s.experts),
    }
}

fn evaluate_property(property: SweepProperty, rows: &[SweepRow], summaries: &[RunSummary]) -> (Vec<(u64, u64, f64)>, f64) {
    let mut ratios = Vec::new();
    if let Some(factor) = property.ratio_factor() {
        for a in rows {
            if let Some(b) = rows.iter().find(|b| b.horizon == a.horizon * factor) {
                ratios.push((a.horizon, b.horizon, b.regret_mean / a.regret_mean.max(RATIO_FLOOR)));
            }
        }
        let worst = ratios.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
        return (ratios, worst);
    }
    let statistic = match property {
        SweepProperty::SqrtVariationBand => {
            let vals: Vec<f64> = rows.iter().map(|r| r.normalized.unwrap_or(f64::NAN)).collect();
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            if vals.iter().any(|v| !v.is_finite()) || lo <= 0.0 {
                f64::INFINITY
            } else {
                hi / lo
            }
        }
        SweepProperty::VarianceShape => {
            let samples: Vec<ShapeSample> = rows
                .iter()
                .map(|r| {
                    let group: Vec<&RunSummary> = summaries.iter().filter(|s| s.horizon == r.horizon).collect();
                    let grid = mean(group.iter().map(|s| s.grid_size.unwrap_or(1) as f64));
                    ShapeSample {
                        horizon: r.horizon,
                        regret: r.regret_mean,
                        kl: (r.experts as f64).ln(),
                        log_grid: grid.ln(),
                        variance: r.variation,
                        final_range: r.final_range.unwrap_or(0.0),
                    }
                })
                .collect();
            check_theorem4_shape(&samples).growth
        }
        _ => f64::NEG_INFINITY,
    };
    (ratios, statistic)
}

/// Runs every seed at every horizon and evaluates the sweep property.
pub fn sweep(cfg: &ExperimentConfig, horizons: &[u64]) -> Result<SweepReport> {
    check_horizons(horizons)?;
    let jobs: Vec<(u64, u64)> = horizons.iter().flat_map(|&h| cfg.seeds.iter().map(move |&s| (h, s))).collect();
    let summaries: Vec<RunSummary> = jobs
        .par_iter()
        .map(|&(h, s)| run_replica(cfg, s, h).map(|o| o.summary))
        .collect::<Result<_>>()?;
    let rows: Vec<SweepRow> = horizons
        .iter()
        .map(|&h| {
            let group: Vec<RunSummary> = summaries.iter().filter(|s| s.horizon == h).cloned().collect();
            aggregate(h, &group)
        })
        .collect();
    let property = cfg.sweep.property.unwrap_or_else(|| SweepProperty::default_for(&cfg.stream));
    let (ratios, statistic) = evaluate_property(property, &rows, &summaries);
    let threshold = property.threshold();
    let property_passed = statistic <= threshold;
    let diagnostics_passed = summaries.iter().all(|s| s.passed);
    Ok(SweepReport {
        name: cfg.name.clone(),
        algorithm: cfg.algorithm.name().into(),
        stream: cfg.stream.name().into(),
        property,
        rows,
        ratios,
        statistic,
        threshold,
        property_passed,
        diagnostics_passed,
        passed: property_passed && diagnostics_passed,
        summaries,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

/// Writes `<name>_<algorithm>.sweep.json` and `<name>_<algorithm>.sweep.csv`.
/// Returns the JSON path.
pub fn write_sweep(dir: &Path, report: &SweepReport) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let stem = format!("{}_{}", report.name, report.algorithm);
    let json_path = dir.join(format!("{stem}.sweep.json"));
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(&json_path, text + "\n")?;
    let mut w = BufWriter::new(fs::File::create(dir.join(format!("{stem}.sweep.csv")))?);
    writeln!(w, "horizon,seeds,regret_mean,regret_min,regret_max,variation,normalized,final_range,experts")?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.horizon,
            r.seeds,
            fmt_float(r.regret_mean),
            fmt_float(r.regret_min),
            fmt_float(r.regret_max),
            fmt_float(r.variation),
            opt(r.normalized),
            opt(r.final_range),
            r.experts
        )?;
    }
    w.flush()?;
    Ok(json_path)
}
