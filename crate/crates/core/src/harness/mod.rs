//! Experiment runner: configuration, replicas, sweeps, stored-trace checks
//! and tidy plot data.
//!
//! Configs are TOML. Top-level keys name the run; per-algorithm knobs live in
//! tables named after the module they tune (`[pea_core]`, `[pea_adaptive]`,
//! `[uol]`, `[hedge]`). `UOL_SEED` (comma-separated) and `UOL_OUTPUT_DIR`
//! override `seeds` and `output_dir`.

mod check;
mod plot;
mod run;
mod sweep;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::base_learners::{RosterKind, SingleGradientConstants};
use crate::environments::{OcoStreamConfig, PeaStreamConfig};
use crate::error::{Error, Result};

pub use check::{check_trace, CheckReport};
pub use plot::{emit_plotdata, plot_rows, PlotRow, PLOT_HEADER};
pub use run::{
    evaluate, expected_restarts, run, run_replica, write_outputs, Comparator, Diagnostic, OcoRound, PeaRound,
    RoundRow, RunOutput, RunSummary, StoredTrace,
};
pub use sweep::{sweep, write_sweep, SweepProperty, SweepReport, SweepRow};

pub const SEED_ENV: &str = "UOL_SEED";
pub const OUTPUT_ENV: &str = "UOL_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    PeaCore,
    PeaAdaptive,
    UolFullinfo,
    UolSinglegrad,
    #[serde(alias = "baselines.hedge_fixed_eta")]
    HedgeFixedEta,
}

impl AlgorithmKind {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::PeaCore => "pea_core",
            AlgorithmKind::PeaAdaptive => "pea_adaptive",
            AlgorithmKind::UolFullinfo => "uol_fullinfo",
            AlgorithmKind::UolSinglegrad => "uol_singlegrad",
            AlgorithmKind::HedgeFixedEta => "hedge_fixed_eta",
        }
    }

    pub fn is_pea(self) -> bool {
        matches!(self, AlgorithmKind::PeaCore | AlgorithmKind::PeaAdaptive | AlgorithmKind::HedgeFixedEta)
    }
}

/// Either family of stream, told apart by `kind`.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamSpec {
    Pea(PeaStreamConfig),
    Oco(OcoStreamConfig),
}

const PEA_KINDS: [&str; 4] = ["iid_gap", "drifting_leader", "scale_shock", "optimism_quality"];
const OCO_KINDS: [&str; 4] = ["linear_drift", "quadratic_drift", "logistic_drift", "sea_sampler"];

impl StreamSpec {
    pub fn name(&self) -> &'static str {
        match self {
            StreamSpec::Pea(c) => c.name(),
            StreamSpec::Oco(c) => c.name(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StreamSpec::Pea(c) => c.validate(),
            StreamSpec::Oco(c) => c.validate(),
        }
    }
}

impl Serialize for StreamSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            StreamSpec::Pea(c) => c.serialize(s),
            StreamSpec::Oco(c) => c.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for StreamSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let value = serde_json::Value::deserialize(d)?;
        let kind = value
            .get("kind")
            .and_then(serde_json::Value::as_str)
            .ok_or_else(|| D::Error::custom("stream.kind: missing"))?
            .to_string();
        if PEA_KINDS.contains(&kind.as_str()) {
            serde_json::from_value(value).map(StreamSpec::Pea).map_err(|e| D::Error::custom(format!("stream: {e}")))
        } else if OCO_KINDS.contains(&kind.as_str()) {
            serde_json::from_value(value).map(StreamSpec::Oco).map_err(|e| D::Error::custom(format!("stream: {e}")))
        } else {
            Err(D::Error::custom(format!(
                "stream.kind: unknown kind `{kind}`, expected one of {}",
                PEA_KINDS.iter().chain(&OCO_KINDS).copied().collect::<Vec<_>>().join(", ")
            )))
        }
    }
}

fn one() -> f64 {
    1.0
}

fn ten() -> f64 {
    10.0
}

fn yes() -> bool {
    true
}

fn default_name() -> String {
    "run".into()
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_guess() -> u32 {
    1
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeaCoreOptions {
    /// Known loss range B; defaults to the stream's max |ℓ − m|.
    pub range: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeaAdaptiveOptions {
    #[serde(default = "one")]
    pub initial_range: f64,
    /// Unknown horizon: start from 2^`initial_guess` and square on overflow.
    #[serde(default)]
    pub doubling: bool,
    #[serde(default = "default_guess")]
    pub initial_guess: u32,
}

impl Default for PeaAdaptiveOptions {
    fn default() -> Self {
        Self { initial_range: 1.0, doubling: false, initial_guess: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UolOptions {
    #[serde(default)]
    pub roster: Option<RosterKind>,
    #[serde(default = "ten")]
    pub search_constant: f64,
    #[serde(default = "one")]
    pub initial_range: f64,
    /// Overrides of the stream's declared L and G.
    pub smoothness: Option<f64>,
    pub lipschitz: Option<f64>,
    /// Single-gradient λ, C₀, γ (and C₂, recomputed on validation).
    pub constants: Option<SingleGradientConstants>,
}

impl Default for UolOptions {
    fn default() -> Self {
        Self { roster: None, search_constant: 10.0, initial_range: 1.0, smoothness: None, lipschitz: None, constants: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HedgeOptions {
    /// Fixed rate; √(log K / T) when absent.
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    /// Property checked across horizons; chosen from the stream kind if absent.
    pub property: Option<SweepProperty>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub algorithm: AlgorithmKind,
    #[serde(default)]
    pub horizon: u64,
    #[serde(default)]
    pub horizons: Vec<u64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "yes")]
    pub diagnostics: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub stream: StreamSpec,
    #[serde(default)]
    pub pea_core: PeaCoreOptions,
    #[serde(default)]
    pub pea_adaptive: PeaAdaptiveOptions,
    #[serde(default)]
    pub uol: UolOptions,
    #[serde(default)]
    pub hedge: HedgeOptions,
    #[serde(default)]
    pub sweep: SweepOptions,
}

/// Domain diameter D and the L, G handed to the ensembles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeclaredConstants {
    pub diameter: f64,
    pub smoothness: f64,
    pub lipschitz: f64,
}

fn config_error(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    /// Parses and validates without looking at the environment.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a file, applies environment overrides and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.apply_env()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seeds = v
                .split(',')
                .map(|s| s.trim().parse::<u64>().map_err(|e| config_error(SEED_ENV, format!("`{s}`: {e}"))))
                .collect::<Result<_>>()?;
        }
        if let Ok(v) = std::env::var(OUTPUT_ENV) {
            self.output_dir = Some(PathBuf::from(v));
        }
        Ok(())
    }

    pub fn declared(&self) -> Option<DeclaredConstants> {
        let StreamSpec::Oco(stream) = &self.stream else { return None };
        let (l, g) = stream.declared_constants();
        let diameter = stream.domain().ok()?.diameter();
        Some(DeclaredConstants {
            diameter,
            smoothness: self.uol.smoothness.unwrap_or(l),
            lipschitz: self.uol.lipschitz.unwrap_or(g),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(config_error("seeds", "at least one seed is required"));
        }
        self.stream.validate().map_err(|e| config_error("stream", e))?;
        match (&self.stream, self.algorithm.is_pea()) {
            (StreamSpec::Pea(_), true) | (StreamSpec::Oco(_), false) => {}
            _ => {
                return Err(config_error(
                    "algorithm",
                    format!("{} cannot run on a {} stream", self.algorithm.name(), self.stream.name()),
                ))
            }
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if let Some(b) = self.pea_core.range {
            if !positive(b) {
                return Err(config_error("pea_core.range", format!("must be positive, got {b}")));
            }
        }
        if !positive(self.pea_adaptive.initial_range) {
            return Err(config_error("pea_adaptive.initial_range", "must be positive"));
        }
        if self.pea_adaptive.initial_guess == 0 || self.pea_adaptive.initial_guess > 32 {
            return Err(config_error("pea_adaptive.initial_guess", "must lie in 1..=32"));
        }
        if !positive(self.uol.search_constant) {
            return Err(config_error("uol.search_constant", "must be positive"));
        }
        if !positive(self.uol.initial_range) {
            return Err(config_error("uol.initial_range", "must be positive"));
        }
        if let Some(eta) = self.hedge.eta {
            if !(eta.is_finite() && eta >= 0.0) {
                return Err(config_error("hedge.eta", format!("must be non-negative, got {eta}")));
            }
        }
        if let Some(d) = self.declared() {
            if !(d.smoothness.is_finite() && d.smoothness >= 0.0) {
                return Err(config_error("uol.smoothness", "must be non-negative"));
            }
            match self.algorithm {
                AlgorithmKind::UolFullinfo => {
                    if self.uol.roster == Some(RosterKind::SingleGradient) {
                        return Err(config_error("uol.roster", "the full-information ensemble takes standard or sea"));
                    }
                }
                AlgorithmKind::UolSinglegrad => {
                    if !positive(d.lipschitz) {
                        return Err(config_error("uol.lipschitz", "single-gradient mode needs a positive G"));
                    }
                    if let Some(c) = self.uol.constants {
                        c.validate(d.diameter, d.smoothness, d.lipschitz)
                            .map_err(|e| config_error("uol.constants", e.to_string().trim_start_matches("configuration error: ")))?;
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PEA: &str = r#"
algorithm = "pea_adaptive"
horizon = 50
seeds = [1, 2]
[stream]
kind = "iid_gap"
experts = 4
gap = 0.2
"#;

    #[test]
    fn parses_pea_config() {
        let c = ExperimentConfig::from_toml_str(PEA).unwrap();
        assert_eq!(c.algorithm, AlgorithmKind::PeaAdaptive);
        assert!(matches!(c.stream, StreamSpec::Pea(PeaStreamConfig::IidGap { experts: 4, .. })));
        assert!(c.diagnostics);
    }

    #[test]
    fn unknown_field_is_named() {
        let err = ExperimentConfig::from_toml_str(&PEA.replace("horizon", "horizn")).unwrap_err();
        assert!(err.to_string().contains("horizn"), "{err}");
    }

    #[test]
    fn unknown_stream_kind_is_named() {
        let err = ExperimentConfig::from_toml_str(&PEA.replace("iid_gap", "nope")).unwrap_err();
        assert!(err.to_string().contains("stream.kind"), "{err}");
    }

    #[test]
    fn stream_family_must_match_algorithm() {
        let err = ExperimentConfig::from_toml_str(&PEA.replace("pea_adaptive", "uol_fullinfo")).unwrap_err();
        assert!(err.to_string().contains("algorithm"), "{err}");
    }

    #[test]
    fn hedge_alias() {
        let c = ExperimentConfig::from_toml_str(&PEA.replace("\"pea_adaptive\"", "\"baselines.hedge_fixed_eta\"")).unwrap();
        assert_eq!(c.algorithm, AlgorithmKind::HedgeFixedEta);
    }

    #[test]
    fn single_gradient_constants_checked_at_load() {
        let text = r#"
algorithm = "uol_singlegrad"
horizon = 10
[stream]
kind = "quadratic_drift"
dim = 2
radius = 1.0
drift = 0.01
[uol.constants]
c2 = 0.0
lambda = 1.0
c0 = 1.0
gamma = 1.0
"#;
        let err = ExperimentConfig::from_toml_str(text).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Config(_)));
        assert!(msg.contains("uol.constants") && msg.contains("lambda >= 2 C2"), "{msg}");
    }
}
