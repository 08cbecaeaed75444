//! Python bindings: models, rates, the ensemble engine and the oracles.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use nmqj::config::parse_config;
use nmqj::engine::{EngineConfig, Simulation};
use nmqj::models::{LadderStart, ModelKind, ModelParams, ModelSpec};
use nmqj::series::{compare_series, TrajectorySeries};
use nmqj::{acceptance, oracle, scenario, Error};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Parse(_) | Error::Validation(_) | Error::UnsupportedModel(_) | Error::DimensionMismatch { .. } => {
            PyValueError::new_err(err.to_string())
        }
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

/// One of the four atom–reservoir geometries with its rate functions.
#[pyclass(name = "Model", module = "nmqj", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: ModelSpec,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (name="jaynes_cummings", *, detunings=None, coupling=None, width=None, cavity_freq=None,
                        initial_state=None, ladder_start="mixed", lamb_shift=false, constant_rates=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        name: &str,
        detunings: Option<Vec<f64>>,
        coupling: Option<f64>,
        width: Option<f64>,
        cavity_freq: Option<f64>,
        initial_state: Option<Vec<Complex64>>,
        ladder_start: &str,
        lamb_shift: bool,
        constant_rates: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let kind: ModelKind = name.parse().map_err(to_py)?;
        let ladder_start = match ladder_start {
            "mixed" => LadderStart::Mixed,
            "excited" => LadderStart::Excited,
            other => return Err(PyValueError::new_err(format!("ladder_start must be 'mixed' or 'excited', not {other:?}"))),
        };
        let params = ModelParams {
            detunings,
            coupling,
            width,
            cavity_freq,
            initial_state,
            ladder_start,
            lamb_shift_enabled: lamb_shift,
            constant_rates,
        };
        Ok(Self { inner: ModelSpec::build(kind, &params).map_err(to_py)? })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.kind.name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn num_channels(&self) -> usize {
        self.inner.num_channels()
    }

    #[getter]
    fn initial_state(&self) -> Vec<Complex64> {
        self.inner.initial_state.amplitudes().to_vec()
    }

    /// Δ_j(t) for every channel.
    fn decay_rates(&self, t: f64) -> PyResult<Vec<f64>> {
        self.inner.decay_rates(t).map_err(to_py)
    }

    /// λ_j(t) for every channel (zeros unless the Lamb shift is enabled).
    fn lamb_shift_rates(&self, t: f64) -> PyResult<Vec<f64>> {
        self.inner.lamb_shift_rates(t).map_err(to_py)
    }

    /// Closed-form ρ(t) as a nested list of complex numbers.
    fn analytic_density(&self, t: f64) -> PyResult<Vec<Vec<Complex64>>> {
        let rho = oracle::analytic_density(&self.inner, t).map_err(to_py)?;
        Ok(rows(rho.matrix().entries(), rho.dim()))
    }

    fn __repr__(&self) -> String {
        format!("Model({:?}, dim={})", self.inner.kind.name(), self.inner.dim())
    }
}

fn rows(entries: &[Complex64], dim: usize) -> Vec<Vec<Complex64>> {
    entries.chunks(dim).map(<[_]>::to_vec).collect()
}

/// Recorded density matrices, rates and registry counts on a time grid.
#[pyclass(name = "Series", module = "nmqj", frozen)]
struct PySeries {
    inner: TrajectorySeries,
}

#[pymethods]
impl PySeries {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    /// ρ at every recorded time, each as a nested list.
    #[getter]
    fn rho(&self) -> Vec<Vec<Vec<Complex64>>> {
        self.inner.rho.iter().map(|r| rows(r.matrix().entries(), r.dim())).collect()
    }

    /// ρ_kk over time.
    fn population(&self, level: usize) -> PyResult<Vec<f64>> {
        if level >= self.inner.dim {
            return Err(PyValueError::new_err(format!("level {level} out of range for dimension {}", self.inner.dim)));
        }
        Ok((0..self.inner.len()).map(|k| self.inner.population(k, level)).collect())
    }

    /// Δ_j at every recorded time.
    #[getter]
    fn rates(&self) -> Vec<Vec<f64>> {
        self.inner.rates.clone()
    }

    /// Member counts per registry entry (by insertion order) at every recorded time.
    #[getter]
    fn counts(&self) -> Vec<Vec<u64>> {
        self.inner.counts.clone()
    }

    fn to_csv(&self) -> PyResult<String> {
        self.inner.to_csv_string().map_err(to_py)
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(Self { inner: TrajectorySeries::read_csv(text.as_bytes()).map_err(to_py)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

fn engine_config(dt: f64, t_max: f64, n: u64, seed: u64, stride: usize) -> PyResult<EngineConfig> {
    let cfg = EngineConfig { dt, t_max, ensemble_size: n, rng_seed: seed, record_stride: stride, ..Default::default() };
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

/// Run the jump ensemble and return its series.
#[pyfunction]
#[pyo3(signature = (model, *, ensemble_size=100_000, dt=0.01, t_max=6.0, seed=0, record_stride=10))]
fn simulate(
    py: Python<'_>,
    model: &PyModel,
    ensemble_size: u64,
    dt: f64,
    t_max: f64,
    seed: u64,
    record_stride: usize,
) -> PyResult<PySeries> {
    let cfg = engine_config(dt, t_max, ensemble_size, seed, record_stride)?;
    let m = model.inner.clone();
    let inner = py.detach(move || -> nmqj::Result<TrajectorySeries> {
        let (snaps, _) = Simulation::new(&m, cfg)?.run(|_| {})?;
        let labels = m.channels.iter().map(|c| c.label).collect();
        Ok(TrajectorySeries::from_snapshots(m.dim(), labels, &snaps))
    });
    Ok(PySeries { inner: inner.map_err(to_py)? })
}

/// Closed-form series on the engine's recording grid.
#[pyfunction]
#[pyo3(signature = (model, *, dt=0.01, t_max=6.0, record_stride=10))]
fn analytic_series(model: &PyModel, dt: f64, t_max: f64, record_stride: usize) -> PyResult<PySeries> {
    let cfg = engine_config(dt, t_max, 1, 0, record_stride)?;
    let steps = oracle::record_steps(cfg.steps(), record_stride);
    Ok(PySeries { inner: oracle::analytic_series(&model.inner, dt, &steps).map_err(to_py)? })
}

/// RK4 integration of the master equation on the recording grid.
#[pyfunction]
#[pyo3(signature = (model, *, dt=0.01, t_max=6.0, record_stride=10, refine=10))]
fn integrate_master_equation(
    model: &PyModel,
    dt: f64,
    t_max: f64,
    record_stride: usize,
    refine: usize,
) -> PyResult<PySeries> {
    let cfg = engine_config(dt, t_max, 1, 0, record_stride)?;
    let steps = oracle::record_steps(cfg.steps(), record_stride);
    Ok(PySeries { inner: oracle::integrate_master_equation(&model.inner, dt, &steps, refine).map_err(to_py)? })
}

/// First recorded time with an eigenvalue below `-tol`, or None.
#[pyfunction]
#[pyo3(signature = (series, tol=1e-6))]
fn positivity_scan(series: &PySeries, tol: f64) -> PyResult<Option<f64>> {
    oracle::positivity_scan(&series.inner, tol).map_err(to_py)
}

/// `(passed, max_deviation)`; coherences are compared by magnitude.
#[pyfunction]
fn compare(a: &PySeries, b: &PySeries, tol: f64) -> PyResult<(bool, f64)> {
    let r = compare_series(&a.inner, &b.inner, tol).map_err(to_py)?;
    Ok((r.pass, r.max_deviation))
}

/// Run a JSON-configured scenario in memory; returns the summary as JSON text.
#[pyfunction]
fn run_config(py: Python<'_>, config: &str) -> PyResult<String> {
    let cfg = parse_config(config).map_err(to_py)?;
    let outcome = py.detach(|| scenario::execute(&cfg)).map_err(to_py)?;
    serde_json::to_string(&outcome.summary).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Acceptance suite: `[(id, passed, detail), ...]`.
#[pyfunction]
#[pyo3(signature = (seed=0))]
fn selftest(py: Python<'_>, seed: u64) -> Vec<(u8, bool, String)> {
    py.detach(|| acceptance::run_all(seed)).into_iter().map(|r| (r.id, r.pass, r.detail)).collect()
}

#[pymodule(name = "nmqj")]
fn nmqj_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PySeries>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_series, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_master_equation, m)?)?;
    m.add_function(wrap_pyfunction!(positivity_scan, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
