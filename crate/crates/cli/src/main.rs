//! `uolkit run | sweep | check | emit-plot`.
//!
//! Exit status: 0 when every asserted diagnostic passes, 1 on a diagnostic
//! or numerical failure, 2 on a configuration or I/O error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uolkit::error::Error;
use uolkit::harness::{
    check_trace, emit_plotdata, run, sweep, write_outputs, write_sweep, Diagnostic, ExperimentConfig, StoredTrace,
};

#[derive(Parser)]
#[command(name = "uolkit", version, about = "Adaptive expert and universal online learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config at its horizon.
    Run {
        config: PathBuf,
        /// Overrides `output_dir`.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run a config across geometric horizons and check its growth property.
    Sweep {
        config: PathBuf,
        /// Defaults to `horizons` from the config.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        horizons: Vec<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Re-run the diagnostics of a stored trace.
    Check { trace: PathBuf },
    /// Tidy plot data from summaries, sweep reports or per-round tables.
    EmitPlot {
        inputs: Vec<PathBuf>,
        #[arg(long, short, default_value = "plot.csv")]
        out: PathBuf,
    },
}

const PASS: u8 = 0;
const DIAGNOSTIC_FAILURE: u8 = 1;
const CONFIG_ERROR: u8 = 2;

fn failure_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Io(_) => CONFIG_ERROR,
        _ => DIAGNOSTIC_FAILURE,
    }
}

fn status(passed: bool) -> u8 {
    if passed {
        PASS
    } else {
        DIAGNOSTIC_FAILURE
    }
}

fn output_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("results"))
}

fn print_diagnostics(diagnostics: &[Diagnostic]) {
    for d in diagnostics {
        let verdict = match (d.asserted, d.passed) {
            (false, _) => "info",
            (true, true) => "pass",
            (true, false) => "FAIL",
        };
        let value = d.value.map_or_else(|| "none".to_string(), |v| format!("{v:.6e}"));
        println!("  {verdict:4} {:32} {value} ({} {:e})", d.name, d.kind, d.threshold);
    }
}

fn cmd_run(config: &Path, dir: Option<PathBuf>) -> Result<u8, Error> {
    let cfg = ExperimentConfig::load(config)?;
    let outputs = run(&cfg)?;
    let dir = output_dir(dir, &cfg);
    write_outputs(&dir, &outputs)?;
    let mut passed = true;
    for out in &outputs {
        let s = &out.summary;
        println!(
            "{} {} seed={} T={} regret={:.6} {}",
            s.name,
            s.algorithm.name(),
            s.seed,
            s.horizon,
            s.regret,
            if s.passed { "pass" } else { "FAIL" }
        );
        print_diagnostics(&s.diagnostics);
        passed &= s.passed;
    }
    println!("outputs in {}", dir.display());
    Ok(status(passed))
}

fn cmd_sweep(config: &Path, horizons: Vec<u64>, dir: Option<PathBuf>) -> Result<u8, Error> {
    let cfg = ExperimentConfig::load(config)?;
    let horizons = if horizons.is_empty() { cfg.horizons.clone() } else { horizons };
    let report = sweep(&cfg, &horizons)?;
    let dir = output_dir(dir, &cfg);
    let path = write_sweep(&dir, &report)?;
    println!("{:>10} {:>16} {:>16} {:>16}", "T", "regret", "variation", "normalized");
    for r in &report.rows {
        let n = r.normalized.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
        println!("{:>10} {:>16.6} {:>16.6} {:>16}", r.horizon, r.regret_mean, r.variation, n);
    }
    for (a, b, ratio) in &report.ratios {
        println!("  ratio T={b}/T={a}: {ratio:.4}");
    }
    println!(
        "{:?}: statistic {:.4} (threshold {}) {}; replica diagnostics {}",
        report.property,
        report.statistic,
        report.threshold,
        if report.property_passed { "pass" } else { "FAIL" },
        if report.diagnostics_passed { "pass" } else { "FAIL" }
    );
    println!("report in {}", path.display());
    Ok(status(report.passed))
}

fn cmd_check(path: &Path) -> Result<u8, Error> {
    let text = fs::read_to_string(path)?;
    let trace: StoredTrace =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let report = check_trace(&trace)?;
    println!("{}: {}", path.display(), if report.passed { "pass" } else { "FAIL" });
    print_diagnostics(&report.diagnostics);
    if !report.matches_stored {
        println!("  note: recomputed diagnostics differ from the stored summary");
    }
    Ok(status(report.passed && report.matches_stored))
}

fn cmd_emit_plot(inputs: &[PathBuf], out: &Path) -> Result<u8, Error> {
    let rows = emit_plotdata(inputs, out)?;
    println!("{rows} rows written to {}", out.display());
    Ok(PASS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, output_dir } => cmd_run(&config, output_dir),
        Command::Sweep { config, horizons, output_dir } => cmd_sweep(&config, horizons, output_dir),
        Command::Check { trace } => cmd_check(&trace),
        Command::EmitPlot { inputs, out } => cmd_emit_plot(&inputs, &out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("uolkit: {e}");
            ExitCode::from(failure_code(&e))
        }
    }
}
