//! Python bindings: distributions, models, simulation, oracles and the
//! main diagnostics. Configuration errors raise `ValueError`, runtime and
//! statistical-guard failures raise `RuntimeError`.

use std::path::Path;

use heavybranch::dist::DistributionSpec;
use heavybranch::experiment::{run_experiment as run_experiment_rs, ExperimentConfig, ExperimentKind};
use heavybranch::extremes::{extremal_index_estimate as estimate_index, theoretical_extremal_index, IndexMethod};
use heavybranch::oracle::{stationary_moments, stationary_pmf_bruteforce};
use heavybranch::process::{check_ergodicity as check_ergodicity_rs, Depth, ModelConfig, Regime, StationarySampler, Variant};
use heavybranch::sums::long_run_variance as long_run_variance_rs;
use heavybranch::tail::{hill as hill_rs, model1_tail_constant as model1_rs, model2_tail_constants as model2_rs};
use heavybranch::RandomStream;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyFloat, PyInt};
use serde::Serialize;

fn to_pyerr(e: heavybranch::Error) -> PyErr {
    if e.exit_code() == 2 {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Round-trips a serializable value through `json.loads`.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn parse<T: serde::de::DeserializeOwned>(text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyclass(name = "Distribution", module = "pyheavybranch", from_py_object)]
#[derive(Clone)]
struct PyDistribution {
    inner: DistributionSpec,
}

#[pymethods]
impl PyDistribution {
    /// `Distribution("discrete_pareto", alpha=0.8, scale=1.0)`
    #[new]
    #[pyo3(signature = (family, **params))]
    fn new(family: &str, params: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut obj = serde_json::Map::new();
        obj.insert("family".into(), family.into());
        if let Some(params) = params {
            for (k, v) in params.iter() {
                let key: String = k.extract()?;
                let value = if v.is_instance_of::<PyInt>() {
                    serde_json::Value::from(v.extract::<u64>()?)
                } else if v.is_instance_of::<PyFloat>() {
                    serde_json::Value::from(v.extract::<f64>()?)
                } else {
                    return Err(PyValueError::new_err(format!("parameter `{key}` must be a number")));
                };
                obj.insert(key, value);
            }
        }
        let inner: DistributionSpec = serde_json::from_value(obj.into()).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(to_pyerr)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: DistributionSpec = parse(text)?;
        inner.validate().map_err(to_pyerr)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("spec serializes")
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.family_name()
    }

    #[getter]
    fn tail_index(&self) -> Option<f64> {
        self.inner.tail_index()
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn moments(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.moments())
    }

    fn pmf(&self, n: u64) -> f64 {
        self.inner.pmf(n)
    }

    fn tail_prob(&self, x: u64) -> f64 {
        self.inner.tail_prob(x)
    }

    fn pgf(&self, s: f64) -> PyResult<f64> {
        self.inner.pgf(s).map_err(to_pyerr)
    }

    #[pyo3(signature = (count, seed, stream = 0))]
    fn sample(&self, count: usize, seed: u64, stream: u64) -> Vec<u64> {
        let mut rng = RandomStream::new(seed, stream);
        (0..count).map(|_| self.inner.sample(&mut rng)).collect()
    }

    fn __repr__(&self) -> String {
        format!("Distribution({})", self.to_json())
    }
}

#[pyclass(name = "Model", module = "pyheavybranch")]
struct PyModel {
    inner: ModelConfig,
}

fn parse_regime(s: &str) -> PyResult<Regime> {
    parse(&format!("\"{s}\""))
}

fn parse_variant(s: &str) -> PyResult<Variant> {
    parse(&format!("\"{s}\""))
}

#[pymethods]
impl PyModel {
    /// `Model(offspring, immigration, regime="model_i", variant="sum")`
    #[new]
    #[pyo3(signature = (offspring, immigration, regime = "light", variant = "sum"))]
    fn new(offspring: PyDistribution, immigration: PyDistribution, regime: &str, variant: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ModelConfig::new(offspring.inner, immigration.inner, parse_variant(variant)?, parse_regime(regime)?),
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: parse(text)? })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("config serializes")
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu()
    }

    /// Raises `ValueError` when the model is not ergodic or breaks its regime.
    fn validate(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let report = self.inner.validate().map_err(to_pyerr)?;
        to_py(py, &report)
    }

    #[pyo3(signature = (length, seed, burn_in = 1000, stream = 0))]
    fn simulate_path(&self, py: Python<'_>, length: usize, seed: u64, burn_in: u64, stream: u64) -> PyResult<Vec<u64>> {
        let cfg = self.inner.clone();
        py.detach(move || heavybranch::simulate_path(&cfg, length, burn_in, seed, stream))
            .map(|p| p.values)
            .map_err(to_pyerr)
    }

    /// Independent draws from the stationary law by the backward series.
    #[pyo3(signature = (count, seed, stream_offset = 0))]
    fn sample_stationary(&self, py: Python<'_>, count: usize, seed: u64, stream_offset: u64) -> PyResult<Vec<u64>> {
        let sampler = StationarySampler::new(&self.inner, Depth::Auto).map_err(to_pyerr)?;
        Ok(py.detach(move || sampler.sample_many(count, seed, stream_offset)))
    }

    /// `(mean, variance)` of the stationary law, infinite when divergent.
    fn stationary_moments(&self) -> PyResult<(f64, f64)> {
        let m = stationary_moments(&self.inner).map_err(to_pyerr)?;
        Ok((m.mean, m.variance))
    }

    #[pyo3(signature = (state_cap = 256, tol = 1e-9))]
    fn stationary_pmf(&self, state_cap: usize, tol: f64) -> PyResult<Vec<f64>> {
        stationary_pmf_bruteforce(&self.inner, state_cap, tol)
            .map(|o| o.pmf)
            .map_err(to_pyerr)
    }

    /// `(C, α)` with `P(X > x) ~ C x^{-α}`.
    fn stationary_tail(&self) -> PyResult<(f64, f64)> {
        heavybranch::tail::stationary_tail_scale(&self.inner).map_err(to_pyerr)
    }

    fn __repr__(&self) -> String {
        format!("Model({})", self.to_json())
    }
}

#[pyfunction]
fn check_ergodicity(py: Python<'_>, model: &PyModel) -> PyResult<Py<PyAny>> {
    let report = check_ergodicity_rs(&model.inner).map_err(to_pyerr)?;
    to_py(py, &report)
}

#[pyfunction]
fn model1_tail_constant(mu: f64, alpha: f64) -> PyResult<f64> {
    model1_rs(mu, alpha).map_err(to_pyerr)
}

#[pyfunction]
#[pyo3(signature = (mu, alpha, c, mean_b, k = 0))]
fn model2_tail_constants(py: Python<'_>, mu: f64, alpha: f64, c: f64, mean_b: f64, k: usize) -> PyResult<Py<PyAny>> {
    let consts = model2_rs(mu, alpha, c, mean_b, k).map_err(to_pyerr)?;
    to_py(py, &consts)
}

#[pyfunction]
fn extremal_index(mu: f64, alpha: f64) -> PyResult<f64> {
    theoretical_extremal_index(mu, alpha).map_err(to_pyerr)
}

#[pyfunction]
fn extremal_index_estimate(path: Vec<u64>, threshold: f64, method: &str, param: usize) -> PyResult<f64> {
    let method = match method {
        "blocks" => IndexMethod::Blocks,
        "runs" => IndexMethod::Runs,
        other => return Err(PyValueError::new_err(format!("unknown method `{other}`; use blocks or runs"))),
    };
    estimate_index(&path, threshold, method, param).map_err(to_pyerr)
}

#[pyfunction]
fn hill(py: Python<'_>, samples: Vec<u64>, k_order: usize) -> PyResult<Py<PyAny>> {
    let h = hill_rs(&samples, k_order).map_err(to_pyerr)?;
    to_py(py, &h)
}

#[pyfunction]
#[pyo3(signature = (path, max_lag = None))]
fn long_run_variance(path: Vec<u64>, max_lag: Option<usize>) -> PyResult<f64> {
    long_run_variance_rs(&path, max_lag).map_err(to_pyerr)
}

/// Runs an experiment from a JSON config and returns the one-line digest.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_json: &str, experiment: &str, out_dir: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(to_pyerr)?;
    let kind: ExperimentKind = experiment.parse().map_err(to_pyerr)?;
    let out = out_dir.to_owned();
    py.detach(move || run_experiment_rs(&cfg, kind, Path::new(&out)))
        .map(|o| o.digest)
        .map_err(to_pyerr)
}

#[pymodule]
fn pyheavybranch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(check_ergodicity, m)?)?;
    m.add_function(wrap_pyfunction!(model1_tail_constant, m)?)?;
    m.add_function(wrap_pyfunction!(model2_tail_constants, m)?)?;
    m.add_function(wrap_pyfunction!(extremal_index, m)?)?;
    m.add_function(wrap_pyfunction!(extremal_index_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(hill, m)?)?;
    m.add_function(wrap_pyfunction!(long_run_variance, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
