use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::run::RunSummary;
use super::sweep::SweepReport;
use crate::environments::fmt_float;
use crate::error::{Error, Result};

pub const PLOT_HEADER: &str = "series,metric,x,y";

/// One tidy row: `y` of `metric` for `series` at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub series: String,
    pub metric: String,
    pub x: u64,
    pub y: f64,
}

type Groups = BTreeMap<(String, String, u64), Vec<f64>>;

fn push_summary(groups: &mut Groups, s: &RunSummary) {
    let series = format!("{}/{}", s.name, s.algorithm.name());
    let mut add = |metric: &str, y: f64| {
        groups.entry((series.clone(), metric.to_string(), s.horizon)).or_default().push(y);
    };
    add("regret", s.regret);
    let v = s.gradient_variation.or(s.comparator_variance).unwrap_or(0.0);
    if v > 0.0 {
        add("regret_per_sqrt_variation", s.regret / v.sqrt());
    }
    if let Some(b) = s.final_range {
        add("final_range", b);
    }
}

fn push_rounds(groups: &mut Groups, path: &Path) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let series = name.trim_end_matches(".rounds.csv").to_string();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let column = |c: &str| {
        header
            .iter()
            .position(|h| *h == c)
            .ok_or_else(|| Error::Io(format!("{}: missing column {c}", path.display())))
    };
    let (t_col, regret_col) = (column("t")?, column("regret")?);
    let bad = |line: &str| Error::Io(format!("{}: malformed row {line:?}", path.display()));
    for line in lines.filter(|l| !l.is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        let t = cells.get(t_col).and_then(|c| c.parse().ok()).ok_or_else(|| bad(line))?;
        let y = cells.get(regret_col).and_then(|c| c.parse().ok()).ok_or_else(|| bad(line))?;
        groups.entry((series.clone(), "regret".into(), t)).or_default().push(y);
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Tidy rows from run summaries (`*.summary.json`, x = horizon), sweep
/// reports (`*.sweep.json`, x = horizon) and per-round tables
/// (`*.rounds.csv`, x = t). Replicas sharing (series, metric, x) are
/// averaged. Rows come out sorted.
pub fn plot_rows(paths: &[PathBuf]) -> Result<Vec<PlotRow>> {
    let mut groups = Groups::new();
    for path in paths {
        let name = path.to_string_lossy();
        if name.ends_with(".rounds.csv") {
            push_rounds(&mut groups, path)?;
        } else if name.ends_with(".sweep.json") {
            let report: SweepReport = read_json(path)?;
            report.summaries.iter().for_each(|s| push_summary(&mut groups, s));
        } else if name.ends_with(".summary.json") {
            push_summary(&mut groups, &read_json(path)?);
        } else {
            return Err(Error::Io(format!("{name}: expected .summary.json, .sweep.json or .rounds.csv")));
        }
    }
    Ok(groups
        .into_iter()
        .map(|((series, metric, x), ys)| PlotRow { series, metric, x, y: ys.iter().sum::<f64>() / ys.len() as f64 })
        .collect())
}

/// Writes the tidy CSV for `inputs` to `out`; returns the row count.
pub fn emit_plotdata(inputs: &[PathBuf], out: &Path) -> Result<usize> {
    let rows = plot_rows(inputs)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(fs::File::create(out)?);
    writeln!(w, "{PLOT_HEADER}")?;
    for r in &rows {
        writeln!(w, "{},{},{},{}", r.series, r.metric, r.x, fmt_float(r.y))?;
    }
    w.flush()?;
    Ok(rows.len())
}
