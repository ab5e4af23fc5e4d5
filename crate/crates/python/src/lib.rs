//! Python bindings: the expert forecasters, the two ensembles, stream
//! generation, and the config-driven run/sweep/check entry points.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use uolkit::baseline::{default_rate, Hedge as CoreHedge};
use uolkit::environments::{GradientOracle, OcoStreamConfig, PeaStreamConfig};
use uolkit::harness::{self, ExperimentConfig, StoredTrace};
use uolkit::numerics::{entropic_omd_solve, WeightedEntropyGeometry};
use uolkit::pea_adaptive::{Forecaster, RestartWrapper, WrapperConfig};
use uolkit::pea_core::{MsmwcSession, SessionConfig};
use uolkit::uol::{
    FullInfoConfig, FullInfoEnsemble as CoreFullInfo, FunctionOracle, SingleGradientConfig,
    SingleGradientEnsemble as CoreSingleGradient,
};
use uolkit::{ConvexDomain, Error};

type Rows = Vec<Vec<f64>>;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Range(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Minimizer of ⟨cost, w⟩ + D_ψ(w, prior) over the active face of the
/// simplex. Returns (weights, multiplier).
#[pyfunction]
#[pyo3(signature = (cost, prior, rates, active=None))]
fn omd_solve(cost: Vec<f64>, prior: Vec<f64>, rates: Vec<f64>, active: Option<Vec<bool>>) -> PyResult<(Vec<f64>, f64)> {
    let active = active.unwrap_or_else(|| vec![true; cost.len()]);
    let geometry = WeightedEntropyGeometry::new(rates).map_err(py_err)?;
    let s = entropic_omd_solve(&cost, &prior, &geometry, &active).map_err(py_err)?;
    Ok((s.values().to_vec(), s.multiplier))
}

/// Expert algorithm with a known horizon and loss range.
#[pyclass]
struct Msmwc {
    inner: MsmwcSession,
}

#[pymethods]
impl Msmwc {
    #[new]
    fn new(prior: Vec<f64>, horizon: u64, initial_range: f64) -> PyResult<Self> {
        let inner = MsmwcSession::new(SessionConfig::new(prior, horizon, initial_range)).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn predict(&mut self, optimism: Vec<f64>, range: f64) -> PyResult<Vec<f64>> {
        self.inner.predict(&optimism, range).map_err(py_err)
    }

    fn update(&mut self, loss: Vec<f64>) -> PyResult<()> {
        self.inner.update(&loss).map_err(py_err)
    }

    #[getter]
    fn grid_size(&self) -> usize {
        self.inner.grid().len()
    }
}

/// Expert algorithm for unknown loss ranges, restarting on range jumps.
#[pyclass]
struct AdaptiveForecaster {
    inner: RestartWrapper,
}

#[pymethods]
impl AdaptiveForecaster {
    #[new]
    #[pyo3(signature = (prior, horizon, initial_range=1.0))]
    fn new(prior: Vec<f64>, horizon: u64, initial_range: f64) -> PyResult<Self> {
        let cfg = WrapperConfig::new(prior, horizon).with_initial_range(initial_range);
        Ok(Self { inner: RestartWrapper::new(cfg).map_err(py_err)? })
    }

    fn predict(&mut self, optimism: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.predict(&optimism).map_err(py_err)
    }

    fn update(&mut self, loss: Vec<f64>) -> PyResult<()> {
        self.inner.update(&loss).map_err(py_err)
    }

    /// 1-based rounds after which a restart fired.
    #[getter]
    fn restart_rounds(&self) -> Vec<usize> {
        self.inner.tracker().restart_rounds.clone()
    }

    #[getter]
    fn range(&self) -> f64 {
        self.inner.tracker().current
    }
}

/// Fixed-rate exponential weights.
#[pyclass]
struct Hedge {
    inner: CoreHedge,
}

#[pymethods]
impl Hedge {
    /// Rate `eta`, or the worst-case rate for `horizon` when `eta` is omitted.
    #[new]
    #[pyo3(signature = (experts, eta=None, horizon=None))]
    fn new(experts: usize, eta: Option<f64>, horizon: Option<u64>) -> PyResult<Self> {
        let eta = match (eta, horizon) {
            (Some(e), _) => e,
            (None, Some(t)) => default_rate(experts, t),
            (None, None) => return Err(PyValueError::new_err("give either eta or horizon")),
        };
        Ok(Self { inner: CoreHedge::new(experts, eta).map_err(py_err)? })
    }

    #[pyo3(signature = (optimism=None))]
    fn predict(&mut self, optimism: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
        let m = optimism.unwrap_or_else(|| vec![0.0; self.inner.experts()]);
        self.inner.predict(&m).map_err(py_err)
    }

    fn update(&mut self, loss: Vec<f64>) -> PyResult<()> {
        self.inner.update(&loss).map_err(py_err)
    }

    #[getter]
    fn rate(&self) -> f64 {
        self.inner.rate()
    }
}

/// Adapts a Python object with `value(x)` and `gradient(x)` methods. The
/// first Python exception is kept and re-raised once the call returns.
struct PyOracle<'py> {
    obj: Bound<'py, PyAny>,
    error: Option<PyErr>,
}

impl<'py> PyOracle<'py> {
    fn new(obj: Bound<'py, PyAny>) -> Self {
        Self { obj, error: None }
    }

    fn keep<T>(&mut self, r: PyResult<T>, fallback: T) -> T {
        r.unwrap_or_else(|e| {
            self.error.get_or_insert(e);
            fallback
        })
    }

    fn finish<T>(self, r: uolkit::Result<T>) -> PyResult<T> {
        match self.error {
            Some(e) => Err(e),
            None => r.map_err(py_err),
        }
    }
}

impl GradientOracle for PyOracle<'_> {
    fn gradient(&mut self, x: &[f64]) -> Vec<f64> {
        let r = self.obj.call_method1("gradient", (x.to_vec(),)).and_then(|v| v.extract::<Vec<f64>>());
        self.keep(r, vec![f64::NAN; x.len()])
    }
}

impl FunctionOracle for PyOracle<'_> {
    fn value(&mut self, x: &[f64]) -> f64 {
        let r = self.obj.call_method1("value", (x.to_vec(),)).and_then(|v| v.extract::<f64>());
        self.keep(r, f64::NAN)
    }
}

fn ball(center: Vec<f64>, radius: f64) -> PyResult<ConvexDomain> {
    ConvexDomain::ball(center, radius).map_err(py_err)
}

/// Universal ensemble with value and gradient access to each round's loss.
#[pyclass(unsendable)]
struct FullInfoEnsemble {
    inner: CoreFullInfo,
}

#[pymethods]
impl FullInfoEnsemble {
    /// Ball domain of `radius` around `center`; `horizon` is a guess.
    #[new]
    fn new(center: Vec<f64>, radius: f64, horizon: u64, smoothness: f64) -> PyResult<Self> {
        let cfg = FullInfoConfig::new(ball(center, radius)?, horizon, smoothness);
        Ok(Self { inner: CoreFullInfo::new(cfg).map_err(py_err)? })
    }

    /// `previous` is last round's loss object (None on the first round).
    #[pyo3(signature = (previous=None))]
    fn predict(&mut self, previous: Option<Bound<'_, PyAny>>) -> PyResult<Vec<f64>> {
        match previous {
            Some(obj) => {
                let mut oracle = PyOracle::new(obj);
                let r = self.inner.predict(Some(&mut oracle));
                oracle.finish(r)
            }
            None => self.inner.predict(None).map_err(py_err),
        }
    }

    fn update(&mut self, current: Bound<'_, PyAny>) -> PyResult<()> {
        let mut oracle = PyOracle::new(current);
        let r = self.inner.update(&mut oracle);
        oracle.finish(r)
    }

    #[getter]
    fn experts(&self) -> usize {
        self.inner.experts()
    }

    /// Diagnostics as a JSON string.
    fn diagnostics(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.diagnostics()).map_err(json_err)
    }
}

/// Universal ensemble that queries one gradient per round.
#[pyclass(unsendable)]
struct SingleGradientEnsemble {
    inner: CoreSingleGradient,
}

#[pymethods]
impl SingleGradientEnsemble {
    #[new]
    fn new(center: Vec<f64>, radius: f64, horizon: u64, smoothness: f64, lipschitz: f64) -> PyResult<Self> {
        let cfg = SingleGradientConfig::new(ball(center, radius)?, horizon, smoothness, lipschitz);
        Ok(Self { inner: CoreSingleGradient::new(cfg).map_err(py_err)? })
    }

    fn predict(&mut self) -> PyResult<Vec<f64>> {
        self.inner.predict().map_err(py_err)
    }

    /// `current` needs only a `gradient(x)` method.
    fn update(&mut self, current: Bound<'_, PyAny>) -> PyResult<()> {
        let mut oracle = PyOracle::new(current);
        let r = self.inner.update(&mut oracle);
        oracle.finish(r)
    }

    #[getter]
    fn gradient_calls(&self) -> u64 {
        self.inner.gradient_calls()
    }

    #[getter]
    fn experts(&self) -> usize {
        self.inner.experts()
    }
}

/// (optimism, loss) rows of an expert stream given as JSON, e.g.
/// `{"kind": "iid_gap", "experts": 4, "gap": 0.1}`.
#[pyfunction]
fn pea_stream(config: &str, horizon: u64, seed: u64) -> PyResult<(Rows, Rows)> {
    let cfg: PeaStreamConfig = serde_json::from_str(config).map_err(json_err)?;
    let seq = cfg.generate(horizon, seed).map_err(py_err)?;
    Ok((seq.optimism, seq.loss))
}

/// Per-round minimizers ("means") of a convex stream given as JSON, plus
/// its summary statistics as JSON.
#[pyfunction]
fn oco_stream(config: &str, horizon: u64, seed: u64) -> PyResult<(Vec<Vec<f64>>, String)> {
    let cfg: OcoStreamConfig = serde_json::from_str(config).map_err(json_err)?;
    let stream = cfg.generate(horizon, seed).map_err(py_err)?;
    let stats = serde_json::to_string(&stream.statistics()).map_err(json_err)?;
    Ok((stream.means, stats))
}

/// Runs a TOML experiment config; returns the run summaries as JSON.
#[pyfunction]
fn run_config(py: Python<'_>, text: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_toml_str(text).map_err(py_err)?;
    let outputs = py.detach(|| harness::run(&cfg)).map_err(py_err)?;
    let summaries: Vec<_> = outputs.iter().map(|o| &o.summary).collect();
    serde_json::to_string(&summaries).map_err(json_err)
}

/// Sweeps a TOML experiment config over `horizons`; returns the report as JSON.
#[pyfunction]
fn sweep_config(py: Python<'_>, text: &str, horizons: Vec<u64>) -> PyResult<String> {
    let cfg = ExperimentConfig::from_toml_str(text).map_err(py_err)?;
    let report = py.detach(|| harness::sweep(&cfg, &horizons)).map_err(py_err)?;
    serde_json::to_string(&report).map_err(json_err)
}

/// Replays a stored `.trace.json`; True when every asserted diagnostic holds.
#[pyfunction]
fn check_trace(path: &str) -> PyResult<bool> {
    let text = std::fs::read_to_string(path).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let trace: StoredTrace = serde_json::from_str(&text).map_err(json_err)?;
    Ok(harness::check_trace(&trace).map_err(py_err)?.passed)
}

#[pymodule]
#[pyo3(name = "uolkit")]
pub fn uolkit_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(omd_solve, m)?)?;
    m.add_function(wrap_pyfunction!(pea_stream, m)?)?;
    m.add_function(wrap_pyfunction!(oco_stream, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_config, m)?)?;
    m.add_function(wrap_pyfunction!(check_trace, m)?)?;
    m.add_class::<Msmwc>()?;
    m.add_class::<AdaptiveForecaster>()?;
    m.add_class::<Hedge>()?;
    m.add_class::<FullInfoEnsemble>()?;
    m.add_class::<SingleGradientEnsemble>()?;
    Ok(())
}
