//! Python bindings. Models and test functions cross the boundary as JSON
//! strings in the same shape the Rust types serialize to.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use kgsim::dynamics::{run, DynamicsSpec, Engine};
use kgsim::gibbs::{estimate_k1, sample_gibbs, SamplerSettings};
use kgsim::quadrature::QuadPolicy;
use kgsim::scaling::l2_generator_distance;
use kgsim::testfn::TestFunction;
use kgsim::{Configuration, ModelSpec, Point, SimError};

fn runtime(e: SimError) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn value(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_lists(c: &Configuration) -> Vec<Vec<f64>> {
    let d = c.domain().dim();
    c.points().iter().map(|p| p[..d].to_vec()).collect()
}

#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: ModelSpec,
}

impl PyModel {
    fn config(&self, points: Vec<Vec<f64>>) -> PyResult<Configuration> {
        let d = self.inner.dom.dim();
        let mut pts = Vec::with_capacity(points.len());
        for p in points {
            if p.len() != d {
                return Err(PyValueError::new_err(format!("points must have {d} coordinates")));
            }
            let mut q: Point = [0.0; 3];
            q[..d].copy_from_slice(&p);
            pts.push(q);
        }
        Ok(Configuration::from_points(self.inner.dom, self.inner.phi.range(), pts))
    }
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: ModelSpec = serde_json::from_str(text).map_err(value)?;
        inner.validate().map_err(value)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("model serializes")
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    /// `(lhs, rhs, satisfied)` of the low activity-high temperature condition.
    fn lahht(&self) -> PyResult<(f64, f64, bool)> {
        let c = self.inner.lahht_check().map_err(runtime)?;
        Ok((c.lhs, c.rhs, c.satisfied))
    }

    /// Gibbs samples as lists of points.
    #[pyo3(signature = (n_samples, seed, burn_in_sweeps = 5000, thin = None))]
    fn sample_gibbs(&self, n_samples: usize, seed: u64, burn_in_sweeps: usize, thin: Option<usize>) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let s = SamplerSettings { n_samples, seed, burn_in_sweeps, thin, ..Default::default() };
        let samples = sample_gibbs(&self.inner, &s).map_err(runtime)?;
        Ok(samples.configs.iter().map(to_lists).collect())
    }

    /// `k1 ||a||_1 / z` with its standard error, from fresh samples.
    #[pyo3(signature = (n_samples, seed, burn_in_sweeps = 5000))]
    fn alpha(&self, n_samples: usize, seed: u64, burn_in_sweeps: usize) -> PyResult<(f64, f64)> {
        let s = SamplerSettings { n_samples, seed, burn_in_sweeps, ..Default::default() };
        let samples = sample_gibbs(&self.inner, &s).map_err(runtime)?;
        let k1 = estimate_k1(&samples).map_err(runtime)?;
        let scale = self.inner.kernel.mass() / self.inner.z;
        Ok((k1.value * scale, k1.std_error * scale))
    }

    /// Runs one trajectory; `alpha = None` selects hop dynamics.
    /// Returns `(snapshots, final points, event counts as a dict)`.
    #[pyo3(signature = (points, horizon, seed, alpha = None, snapshot_times = vec![]))]
    fn run(
        &self,
        py: Python<'_>,
        points: Vec<Vec<f64>>,
        horizon: f64,
        seed: u64,
        alpha: Option<f64>,
        snapshot_times: Vec<f64>,
    ) -> PyResult<(Vec<(f64, Vec<Vec<f64>>)>, Vec<Vec<f64>>, Py<PyAny>)> {
        let gamma = self.config(points)?;
        let engine = alpha.map_or(Engine::Kawasaki, |a| Engine::Glauber { alpha: a });
        let spec = DynamicsSpec::new(&self.inner, engine, horizon).with_snapshots(snapshot_times);
        let t = run(&gamma, &spec, seed).map_err(runtime)?;
        let counts = pyo3::types::PyDict::new(py);
        counts.set_item("proposals", t.counts.proposals)?;
        counts.set_item("jumps", t.counts.jumps)?;
        counts.set_item("births", t.counts.births)?;
        counts.set_item("deaths", t.counts.deaths)?;
        let snaps = t.snapshots.iter().map(|(time, c)| (*time, to_lists(c))).collect();
        Ok((snaps, to_lists(&t.final_config), counts.into_any().unbind()))
    }

    /// `||H_eps F - H_0 F||^2` per `eps`, as a JSON report.
    #[pyo3(signature = (test_json, eps_list, n_samples, seed, alpha = None))]
    fn generator_sweep(&self, test_json: &str, eps_list: Vec<f64>, n_samples: usize, seed: u64, alpha: Option<f64>) -> PyResult<String> {
        let test: TestFunction = serde_json::from_str(test_json).map_err(value)?;
        test.validate(&self.inner.dom).map_err(value)?;
        let s = SamplerSettings { n_samples, seed, ..Default::default() };
        let samples = sample_gibbs(&self.inner, &s).map_err(runtime)?;
        let r = l2_generator_distance(&test, &self.inner, &eps_list, alpha, &samples, &QuadPolicy::default())
            .map_err(runtime)?;
        Ok(serde_json::to_string(&r).expect("report serializes"))
    }
}

/// Runs a TOML experiment config; returns the CLI exit code.
#[pyfunction]
#[pyo3(signature = (path, overrides = vec![], out = None))]
fn run_config(path: std::path::PathBuf, overrides: Vec<String>, out: Option<std::path::PathBuf>) -> u8 {
    kgsim::cli::run_config(&path, &overrides, out.as_deref())
}

/// The experiment catalog as JSON.
#[pyfunction]
fn experiments() -> String {
    kgsim::cli::catalog().to_string()
}

#[pymodule]
fn pykgsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(experiments, m)?)?;
    Ok(())
}
