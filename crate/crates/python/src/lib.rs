//! Python bindings: run benchmark tests and scenarios, read results, compare
//! runs and evaluate the source models.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyKeyError, PyOSError};
use pyo3::prelude::*;

use powersim::benchmark::{
    default_options, make_test, run_test as core_run_test, Benchmark, ModelSelection,
};
use powersim::harness::{self, ScenarioConfig};
use powersim::res::pv::PvArray;
use powersim::res::wind::{wind_static_power as core_wind_static_power, CpTable};
use powersim::res::ResParams;
use powersim::sim::RunResult;
use powersim::SimError;

create_exception!(powersim_py, PowersimError, PyException);
create_exception!(powersim_py, ConfigError, PowersimError);
create_exception!(powersim_py, NumericError, PowersimError);

fn to_py(e: SimError) -> PyErr {
    match e.exit_code() {
        2 => ConfigError::new_err(e.to_string()),
        3 => NumericError::new_err(e.to_string()),
        4 => PyOSError::new_err(e.to_string()),
        _ => PowersimError::new_err(e.to_string()),
    }
}

/// Sampled signals of one run.
#[pyclass(name = "RunResult", module = "powersim_py", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyRunResult {
    inner: RunResult,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names.clone()
    }

    #[getter]
    fn time(&self) -> Vec<f64> {
        self.inner.time.clone()
    }

    #[getter]
    fn wall_clock_s(&self) -> f64 {
        self.inner.wall_clock_s
    }

    #[getter]
    fn meta(&self) -> BTreeMap<String, String> {
        self.inner.meta.clone()
    }

    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        self.inner
            .column(name)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| PyKeyError::new_err(name.to_string()))
    }

    fn value_at(&self, name: &str, t: f64) -> PyResult<f64> {
        self.inner
            .value_at(name, t)
            .ok_or_else(|| PyKeyError::new_err(format!("{name} at {t}")))
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        harness::write_run(&self.inner, &path).map_err(to_py)
    }

    #[staticmethod]
    fn read_csv(path: PathBuf) -> PyResult<Self> {
        harness::read_run(&path)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "RunResult(samples={}, signals={}, wall_clock_s={:.4})",
            self.inner.len(),
            self.inner.names.len(),
            self.inner.wall_clock_s
        )
    }
}

/// Run benchmark test `test` (1 to 6) with the named model variants.
#[pyfunction]
#[pyo3(signature = (test, sg_model="model22", line_model="pi", converter_model="emt_avg", res_model="ideal_dc", duration=None, step_h=None, seed=0))]
#[allow(clippy::too_many_arguments)]
fn run_test(
    py: Python<'_>,
    test: u32,
    sg_model: &str,
    line_model: &str,
    converter_model: &str,
    res_model: &str,
    duration: Option<f64>,
    step_h: Option<f64>,
    seed: u64,
) -> PyResult<PyRunResult> {
    let sel = ModelSelection::from_names(sg_model, line_model, converter_model, res_model)
        .map_err(to_py)?;
    let mut t = make_test(test).map_err(to_py)?;
    if let Some(d) = duration {
        t.duration = d;
        t.events.retain(|e| e.time < d);
    }
    let mut opts = default_options(&sel, &t);
    if let Some(h) = step_h {
        opts.step_h = h;
    }
    opts.noise.seed = seed;
    let bench = Benchmark::default();
    py.detach(|| core_run_test(&bench, &sel, &t, &opts))
        .map(|inner| PyRunResult { inner })
        .map_err(to_py)
}

/// Run a scenario file.
#[pyfunction]
fn run_scenario(py: Python<'_>, path: PathBuf) -> PyResult<PyRunResult> {
    let c = ScenarioConfig::load(&path).map_err(to_py)?;
    py.detach(|| harness::run_scenario(&c))
        .map(|inner| PyRunResult { inner })
        .map_err(to_py)
}

/// Run a scenario given as TOML text.
#[pyfunction]
fn run_scenario_toml(py: Python<'_>, text: &str) -> PyResult<PyRunResult> {
    let c = ScenarioConfig::parse(text, "<string>").map_err(to_py)?;
    py.detach(|| harness::run_scenario(&c))
        .map(|inner| PyRunResult { inner })
        .map_err(to_py)
}

/// Per-signal errors of `run` against `reference`:
/// `{signal: {"rms", "max_abs", "windowed_rms", "windowed_max", "windowed_max_rel"}}`.
#[pyfunction]
#[pyo3(signature = (run, reference, windows=None))]
fn compute_metrics(
    run: &PyRunResult,
    reference: &PyRunResult,
    windows: Option<Vec<(f64, f64)>>,
) -> PyResult<BTreeMap<String, BTreeMap<&'static str, f64>>> {
    let w: Vec<[f64; 2]> = match windows {
        Some(w) => w.into_iter().map(|(a, b)| [a, b]).collect(),
        None => harness::meta_windows(&reference.inner),
    };
    let m = harness::compute_metrics(&run.inner, &reference.inner, &w).map_err(to_py)?;
    Ok(m.signals
        .into_iter()
        .map(|s| {
            let v = BTreeMap::from([
                ("rms", s.rms),
                ("max_abs", s.max_abs),
                ("windowed_rms", s.windowed_rms),
                ("windowed_max", s.windowed_max),
                ("windowed_max_rel", s.windowed_max_rel),
            ]);
            (s.name, v)
        })
        .collect())
}

/// `[(label, wall_clock_s, ratio)]` relative to `baseline` (first label by default).
#[pyfunction]
#[pyo3(signature = (runs, baseline=None))]
fn timing_report(
    runs: Vec<PyRunResult>,
    baseline: Option<&str>,
) -> PyResult<Vec<(String, f64, f64)>> {
    let rs: Vec<RunResult> = runs.into_iter().map(|r| r.inner).collect();
    let rep = harness::timing_report(&rs, baseline).map_err(to_py)?;
    Ok(rep
        .entries
        .into_iter()
        .map(|e| (e.label, e.wall_clock_s, e.ratio))
        .collect())
}

/// Current (A) of the default 100 MW PV array at voltage `v` (V) and
/// irradiance `s` (W/m2).
#[pyfunction]
fn pv_array_current(v: f64, s: f64) -> PyResult<f64> {
    let a = PvArray::new(ResParams::default().pv, 100e6).map_err(to_py)?;
    Ok(a.current(v, s))
}

/// `(v, p)` at the maximum power point of the default PV array.
#[pyfunction]
fn pv_array_mpp(s: f64) -> PyResult<(f64, f64)> {
    let a = PvArray::new(ResParams::default().pv, 100e6).map_err(to_py)?;
    Ok(a.mpp(s))
}

/// Static wind model output of one default turbine (W).
#[pyfunction]
fn wind_static_power(v: f64, p_setpoint: f64) -> f64 {
    core_wind_static_power(
        v,
        p_setpoint,
        &ResParams::default().wind,
        &CpTable::default(),
    )
}

/// Add the module contents to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PowersimError", m.py().get_type::<PowersimError>())?;
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("NumericError", m.py().get_type::<NumericError>())?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(run_test, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario_toml, m)?)?;
    m.add_function(wrap_pyfunction!(compute_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(timing_report, m)?)?;
    m.add_function(wrap_pyfunction!(pv_array_current, m)?)?;
    m.add_function(wrap_pyfunction!(pv_array_mpp, m)?)?;
    m.add_function(wrap_pyfunction!(wind_static_power, m)?)?;
    Ok(())
}

#[pymodule]
fn powersim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
