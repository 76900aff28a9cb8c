//! Python bindings for the GP model, the simulated robot, the blending gate
//! and the collect → train → track → probe workflow.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use softblend::config::ExperimentConfig;
use softblend::controller::BlendConfig;
use softblend::gp::{self, Dataset, TrainedGP};
use softblend::harness::io::SavedModel;
use softblend::harness::{self, ExperimentSetup, RecordedDataset, TrackingMetrics};
use softblend::sim::{self, RobotConfig, RobotState};
use softblend::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Divergence { .. }
        | Error::SingularConfiguration { .. }
        | Error::OptimizationFailed(_)
        | Error::IllConditioned { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn dataset(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> PyResult<Dataset> {
    Dataset::from_rows(&inputs, &targets).map_err(py_err)
}

type Rows = Vec<Vec<f64>>;

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[pyclass(name = "Hyperparameters", from_py_object)]
#[derive(Clone)]
pub struct PyHyperparameters {
    inner: gp::Hyperparameters,
}

#[pymethods]
impl PyHyperparameters {
    #[new]
    fn new(signal_variance: f64, lengthscales: Vec<f64>, noise_variance: Vec<f64>) -> PyResult<Self> {
        let inner = gp::Hyperparameters::new(signal_variance, lengthscales, noise_variance).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn signal_variance(&self) -> f64 {
        self.inner.signal_variance
    }

    #[getter]
    fn lengthscales(&self) -> Vec<f64> {
        self.inner.lengthscales.clone()
    }

    #[getter]
    fn noise_variance(&self) -> Vec<f64> {
        self.inner.noise_variance.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "Hyperparameters(signal_variance={}, lengthscales={:?}, noise_variance={:?})",
            self.inner.signal_variance, self.inner.lengthscales, self.inner.noise_variance
        )
    }
}

/// Squared-exponential kernel between two points.
#[pyfunction]
fn kernel(x: Vec<f64>, x_prime: Vec<f64>, hp: &PyHyperparameters) -> PyResult<f64> {
    gp::kernel_se(&x, &x_prime, &hp.inner).map_err(py_err)
}

/// `(value, gradient)` of the log marginal likelihood; gradient is with
/// respect to the log hyperparameters.
#[pyfunction]
fn log_marginal_likelihood(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>, hp: &PyHyperparameters) -> PyResult<(f64, Vec<f64>)> {
    let ll = gp::log_marginal_likelihood(&dataset(inputs, targets)?, &hp.inner).map_err(py_err)?;
    Ok((ll.value, ll.gradient.iter().copied().collect()))
}

#[pyfunction]
#[pyo3(signature = (inputs, targets, restarts = 4, seed = 0))]
fn optimize(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>, restarts: usize, seed: u64) -> PyResult<PyHyperparameters> {
    let inner = gp::optimize_hyperparameters(&dataset(inputs, targets)?, restarts, seed).map_err(py_err)?;
    Ok(PyHyperparameters { inner })
}

#[pyclass(name = "GaussianProcess")]
pub struct PyGaussianProcess {
    inner: TrainedGP,
}

#[pymethods]
impl PyGaussianProcess {
    /// `inputs` is one row per training point, `targets` one row of
    /// outputs per point.
    #[new]
    fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>, hp: &PyHyperparameters) -> PyResult<Self> {
        let inner = TrainedGP::fit(dataset(inputs, targets)?, hp.inner.clone()).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn predict(&self, query: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let (m, v) = self.inner.predict(&query).map_err(py_err)?;
        Ok((m.iter().copied().collect(), v.iter().copied().collect()))
    }

    #[getter]
    fn hyperparameters(&self) -> PyHyperparameters {
        PyHyperparameters {
            inner: self.inner.hyperparameters().clone(),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.dataset().len()
    }
}

#[pyclass(name = "Robot")]
pub struct PyRobot {
    inner: RobotConfig,
}

#[pymethods]
impl PyRobot {
    #[new]
    #[pyo3(signature = (segments = 3, segment_length = 0.1, segment_mass = 0.05, moment_arm = 0.02, passive_stiffness = 0.05, damping = 0.01, gravity = 9.81))]
    fn new(
        segments: usize,
        segment_length: f64,
        segment_mass: f64,
        moment_arm: f64,
        passive_stiffness: f64,
        damping: f64,
        gravity: f64,
    ) -> PyResult<Self> {
        let inner = RobotConfig {
            segments,
            segment_length,
            segment_mass,
            moment_arm,
            passive_stiffness,
            damping,
            gravity,
        };
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    fn mass_matrix(&self, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        self.check(&q)?;
        Ok(rows(&sim::mass_matrix(&DVector::from_vec(q), &self.inner)))
    }

    /// Joint accelerations for muscle forces `p`.
    fn forward_dynamics(&self, q: Vec<f64>, q_dot: Vec<f64>, p: Vec<f64>) -> PyResult<Vec<f64>> {
        let state = self.state(q, q_dot)?;
        let qdd = sim::forward_dynamics(&state, &DVector::from_vec(p), None, &self.inner).map_err(py_err)?;
        Ok(qdd.iter().copied().collect())
    }

    /// One RK4 step; returns the new `(q, q_dot)`.
    fn step(&self, q: Vec<f64>, q_dot: Vec<f64>, p: Vec<f64>, dt: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let state = self.state(q, q_dot)?;
        let next = sim::step(&state, &DVector::from_vec(p), None, dt, &self.inner).map_err(py_err)?;
        Ok((next.q.iter().copied().collect(), next.q_dot.iter().copied().collect()))
    }

    fn total_energy(&self, q: Vec<f64>, q_dot: Vec<f64>) -> PyResult<f64> {
        Ok(sim::total_energy(&self.state(q, q_dot)?, &self.inner))
    }

    fn tip_angle(&self, q: Vec<f64>) -> PyResult<f64> {
        self.check(&q)?;
        Ok(sim::output_map(&DVector::from_vec(q), &self.inner)[0])
    }
}

impl PyRobot {
    fn check(&self, q: &[f64]) -> PyResult<()> {
        if q.len() != self.inner.dof() {
            return Err(PyValueError::new_err(format!("expected {} joint angles, got {}", self.inner.dof(), q.len())));
        }
        Ok(())
    }

    fn state(&self, q: Vec<f64>, q_dot: Vec<f64>) -> PyResult<RobotState> {
        self.check(&q)?;
        self.check(&q_dot)?;
        Ok(RobotState {
            q: DVector::from_vec(q),
            q_dot: DVector::from_vec(q_dot),
            time: 0.0,
        })
    }
}

/// Feedback weight `sig(c1 · max(variances) + c2)`.
#[pyfunction]
fn alpha(variances: Vec<f64>, c1: f64, c2: f64) -> PyResult<f64> {
    let cfg = BlendConfig::new(c1, c2).map_err(py_err)?;
    Ok(softblend::controller::alpha(&DVector::from_vec(variances), &cfg))
}

fn metrics_dict<'py>(py: Python<'py>, m: &TrackingMetrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("rms_error", m.rms_error)?;
    d.set_item("peak_error", m.peak_error)?;
    d.set_item("mean_alpha", m.mean_alpha)?;
    d.set_item("mean_alpha_in_region", m.mean_alpha_in_region)?;
    d.set_item("mean_alpha_out_region", m.mean_alpha_out_region)?;
    d.set_item("steps", m.steps)?;
    Ok(d)
}

/// The full experiment on one TOML config (defaults when omitted).
#[pyclass(name = "Experiment")]
pub struct PyExperiment {
    config: ExperimentConfig,
    data: Option<RecordedDataset>,
    model: Option<SavedModel>,
}

#[pymethods]
impl PyExperiment {
    #[new]
    #[pyo3(signature = (config_toml = None))]
    fn new(config_toml: Option<&str>) -> PyResult<Self> {
        let config = match config_toml {
            Some(text) => ExperimentConfig::from_toml(text).map_err(py_err)?,
            None => ExperimentConfig::default(),
        };
        config.validate().map_err(py_err)?;
        Ok(Self {
            config,
            data: None,
            model: None,
        })
    }

    /// Runs the collection; returns `(inputs, targets)` as row lists.
    fn collect(&mut self) -> PyResult<(Rows, Rows)> {
        let data = self.config.collection_info().collect().map_err(py_err)?;
        let d = &data.recording.dataset;
        let out = (rows(&d.inputs().transpose()), rows(d.targets()));
        self.data = Some(data);
        self.model = None;
        Ok(out)
    }

    /// Trains on the collected data; returns the log marginal likelihood.
    fn train(&mut self) -> PyResult<f64> {
        let data = self.data.as_ref().ok_or_else(|| PyValueError::new_err("call collect() first"))?;
        let model = harness::train_model(data, self.config.training.restarts, self.config.training.seed).map_err(py_err)?;
        let ll = model.log_likelihood;
        self.model = Some(model);
        Ok(ll)
    }

    #[getter]
    fn hyperparameters(&self) -> Option<PyHyperparameters> {
        self.model.as_ref().map(|m| PyHyperparameters {
            inner: m.gp.hyperparameters().clone(),
        })
    }

    /// Tracks the configured sinusoid (or its mirror); returns the metrics.
    #[pyo3(signature = (mirrored = false))]
    fn track<'py>(&self, py: Python<'py>, mirrored: bool) -> PyResult<Bound<'py, PyDict>> {
        self.with_setup(|setup| {
            let mut reference = self.config.tracking.reference;
            if mirrored {
                reference = reference.mirrored();
            }
            let run = harness::run_tracking(setup, &reference, self.config.tracking.duration, None)
                .map_err(|f| py_err(f.error))?;
            metrics_dict(py, &run.metrics)
        })
    }

    /// Stiffness probe at both operating points.
    fn probe<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        self.with_setup(|setup| {
            let r = harness::run_stiffness_probe(setup, &self.config.probe).map_err(py_err)?;
            let d = PyDict::new(py);
            d.set_item("in_region_deflection", r.in_region.peak_deflection)?;
            d.set_item("out_region_deflection", r.out_region.peak_deflection)?;
            d.set_item("compliance_ratio", r.compliance_ratio)?;
            Ok(d)
        })
    }
}

impl PyExperiment {
    fn with_setup<T>(&self, f: impl FnOnce(&ExperimentSetup<'_>) -> PyResult<T>) -> PyResult<T> {
        let model = self.model.as_ref().ok_or_else(|| PyValueError::new_err("call train() first"))?;
        let cfg = &self.config;
        let h = cfg.collection.estimated_model.build(&cfg.robot);
        let setup = ExperimentSetup {
            robot: &cfg.robot,
            gp: &model.gp,
            model: h.as_ref(),
            pid: cfg.pid,
            blend: cfg.blend.resolve(model.gp.hyperparameters()).map_err(py_err)?,
            dt: cfg.collection.dt,
        };
        f(&setup)
    }
}

#[pymodule]
fn softblend_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHyperparameters>()?;
    m.add_class::<PyGaussianProcess>()?;
    m.add_class::<PyRobot>()?;
    m.add_class::<PyExperiment>()?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(log_marginal_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(alpha, m)?)?;
    Ok(())
}
