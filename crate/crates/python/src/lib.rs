//! Python bindings: vessel physics, occupant draws, the binned transition
//! model, and the experiment harness.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tankfleet::control::{rbc_action as core_rbc_action, RbcConfig};
use tankfleet::harness::{self, ExperimentConfig, MetricsReport};
use tankfleet::isotonic::{pava as core_pava, pava_weighted};
use tankfleet::model_learning::{
    self, AgentMemory, FeatureBinning, KnowledgeConfig, TransitionDataset, TransitionSample,
};
use tankfleet::occupants::{generate_draws as core_generate_draws, make_profile, Archetype};
use tankfleet::sensing::Observation;
use tankfleet::vessel::{self, Action, StepInput, VesselParams, VesselState};

fn value_err(e: tankfleet::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Experiment configuration; `text` uses the `key = value` file format.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (text = ""))]
    fn new(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ExperimentConfig::parse(text).map_err(value_err)?,
        })
    }

    /// Sets one key, e.g. `cfg.set("planner.horizon", 24)`.
    fn set(&mut self, key: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
        let text = match value.extract::<bool>() {
            Ok(b) => b.to_string(),
            Err(_) => value.str()?.to_string(),
        };
        self.inner.set(key, &text).map_err(value_err)?;
        self.inner.validate().map_err(value_err)
    }

    #[getter]
    fn n_households(&self) -> usize {
        self.inner.n_households
    }

    #[getter]
    fn n_days(&self) -> usize {
        self.inner.n_days
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.inner.master_seed
    }

    #[getter]
    fn strategies(&self) -> Vec<String> {
        self.inner.strategies.iter().map(|s| s.name().to_string()).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(households={}, days={}, seed={}, strategies={:?})",
            self.inner.n_households,
            self.inner.n_days,
            self.inner.master_seed,
            self.strategies()
        )
    }
}

fn report_to_py<'py>(py: Python<'py>, report: &MetricsReport) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut out = Vec::with_capacity(report.strategies.len());
    for s in &report.strategies {
        let d = PyDict::new(py);
        d.set_item("strategy", s.strategy.name())?;
        d.set_item("cumulative_energy_kwh", s.cumulative_energy_kwh)?;
        d.set_item("violations", s.violations)?;
        d.set_item("draws", s.draws)?;
        d.set_item("final_coverage", s.final_coverage)?;
        d.set_item("final_mae", s.final_mae)?;
        let mut daily = Vec::with_capacity(s.daily.len());
        for m in &s.daily {
            let row = PyDict::new(py);
            row.set_item("day", m.day)?;
            row.set_item("energy_kwh", m.energy_kwh)?;
            row.set_item("violations", m.violations)?;
            row.set_item("draws", m.draws)?;
            row.set_item("coverage", m.coverage)?;
            row.set_item("fleet_coverage", m.fleet_coverage)?;
            row.set_item("agent_coverage", m.agent_coverage)?;
            row.set_item("mae", m.mae)?;
            daily.push(row);
        }
        d.set_item("daily", daily)?;
        out.push(d);
    }
    Ok(out)
}

/// Runs every configured strategy; returns one summary dict per strategy.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = config.inner.clone();
    let report = py
        .detach(|| harness::run_experiment(&cfg))
        .map_err(value_err)?;
    report_to_py(py, &report)
}

/// Runs the experiment and writes its CSV files to `out_dir`.
#[pyfunction]
fn run_to_dir(py: Python<'_>, config: &PyConfig, out_dir: PathBuf) -> PyResult<Vec<PathBuf>> {
    let cfg = config.inner.clone();
    py.detach(|| {
        let report = harness::run_experiment(&cfg)?;
        harness::write_report(&report, &out_dir)
    })
    .map_err(value_err)
}

/// Writes the per-figure tables next to a run's `daily.csv`.
#[pyfunction]
fn write_plot_data(dir: PathBuf) -> PyResult<Vec<PathBuf>> {
    harness::write_plot_data(&dir).map_err(value_err)
}

/// One stratified vessel. Keyword arguments override `VesselParams` fields.
#[pyclass(name = "Vessel")]
struct PyVessel {
    params: VesselParams,
    state: VesselState,
}

#[pymethods]
impl PyVessel {
    #[new]
    #[pyo3(signature = (initial_temp = 60.0, **params))]
    fn new(initial_temp: f64, params: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut cfg = ExperimentConfig::default();
        if let Some(params) = params {
            for (k, v) in params.iter() {
                let key = format!("vessel.{}", k.str()?);
                cfg.set(&key, &v.str()?.to_string()).map_err(value_err)?;
            }
        }
        cfg.vessel.validate().map_err(value_err)?;
        let state = cfg.vessel.uniform_state(initial_temp);
        Ok(Self {
            params: cfg.vessel,
            state,
        })
    }

    /// Layer temperatures, bottom first.
    #[getter]
    fn layer_temps(&self) -> Vec<f64> {
        self.state.layer_temps.clone()
    }

    #[setter]
    fn set_layer_temps(&mut self, temps: Vec<f64>) -> PyResult<()> {
        if temps.len() != self.params.n_layers {
            return Err(PyValueError::new_err(format!(
                "expected {} layers, got {}",
                self.params.n_layers,
                temps.len()
            )));
        }
        self.state = VesselState::new(temps);
        Ok(())
    }

    #[getter]
    fn n_layers(&self) -> usize {
        self.params.n_layers
    }

    /// Advances one step. Returns `energy_used` (kWh), `delivered_temp`
    /// (°C or None) and `losses` (kWh).
    #[pyo3(signature = (on, draw_volume = 0.0))]
    fn step<'py>(&mut self, py: Python<'py>, on: bool, draw_volume: f64) -> PyResult<Bound<'py, PyDict>> {
        let res = vessel::step(
            &self.state,
            &self.params,
            StepInput {
                action: Action::from(on),
                draw_volume,
            },
        )
        .map_err(value_err)?;
        self.state = res.next_state;
        let d = PyDict::new(py);
        d.set_item("energy_used", res.energy_used)?;
        d.set_item("delivered_temp", res.delivered_temp)?;
        d.set_item("losses", res.losses)?;
        Ok(d)
    }
}

/// Seeded draw events `(step, liters)` for one household of `archetype`.
#[pyfunction]
#[pyo3(signature = (archetype, n_days, seed, household_id = 0, steps_per_day = 96))]
fn generate_draws(
    archetype: &str,
    n_days: usize,
    seed: u64,
    household_id: usize,
    steps_per_day: usize,
) -> PyResult<Vec<(usize, f64)>> {
    let archetype: Archetype = archetype.parse().map_err(value_err)?;
    let profile = make_profile(archetype, household_id, seed, steps_per_day);
    let series = core_generate_draws(&profile, n_days, seed).map_err(value_err)?;
    Ok(series.draws.iter().map(|d| (d.step, d.volume)).collect())
}

/// Least-squares non-decreasing fit of `values`.
#[pyfunction]
#[pyo3(signature = (values, weights = None))]
fn pava(values: Vec<f64>, weights: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    match weights {
        None => Ok(core_pava(&values)),
        Some(w) if w.len() == values.len() => Ok(pava_weighted(&values, &w)),
        Some(w) => Err(PyValueError::new_err(format!(
            "{} weights for {} values",
            w.len(),
            values.len()
        ))),
    }
}

/// Hysteresis thermostat on one reading.
#[pyfunction]
#[pyo3(signature = (temp, was_on, low = 55.0, high = 65.0))]
fn rbc_action(temp: f64, was_on: bool, low: f64, high: f64) -> bool {
    let obs = Observation::new(vec![temp], 0);
    let cfg = RbcConfig {
        low_threshold: low,
        high_threshold: high,
    };
    core_rbc_action(&obs, &cfg, Action::from(was_on)).is_on()
}

/// Binned mean-delta transition model.
#[pyclass(name = "TransitionModel")]
struct PyTransitionModel {
    inner: model_learning::TransitionModel,
}

#[pymethods]
impl PyTransitionModel {
    /// Fits on `(obs, on, draw_volume, next_obs)` tuples. With `knowledge`
    /// the physical constraints apply; engineered features stay off since
    /// the tuples carry no reheat history.
    #[staticmethod]
    #[pyo3(signature = (samples, knowledge = true, t_min = 10.0, t_max = 90.0))]
    fn fit(
        samples: Vec<(Vec<f64>, bool, f64, Vec<f64>)>,
        knowledge: bool,
        t_min: f64,
        t_max: f64,
    ) -> PyResult<Self> {
        let k = samples.first().map_or(0, |s| s.0.len());
        let samples = samples
            .into_iter()
            .enumerate()
            .map(|(t, (obs, on, draw, next))| TransitionSample {
                obs: Observation::new(obs, t),
                action: Action::from(on),
                draw_volume: draw,
                memory: AgentMemory::default(),
                next_obs: Observation::new(next, t + 1),
                household_id: 0,
            })
            .collect();
        let ds = TransitionDataset::from_samples(k, samples).map_err(value_err)?;
        let knowledge = if knowledge {
            KnowledgeConfig {
                engineered_features: false,
                ..KnowledgeConfig::full()
            }
        } else {
            KnowledgeConfig::off()
        };
        let inner = model_learning::fit(&ds, &knowledge, &FeatureBinning::new(t_min, t_max))
            .map_err(value_err)?;
        Ok(Self { inner })
    }

    fn predict(&self, obs: Vec<f64>, on: bool, draw_volume: f64) -> PyResult<Vec<f64>> {
        let p = model_learning::predict(
            &self.inner,
            &Observation::new(obs, 0),
            Action::from(on),
            draw_volume,
            AgentMemory::default(),
        )
        .map_err(value_err)?;
        Ok(p.sensor_temps)
    }

    #[getter]
    fn populated_bins(&self) -> usize {
        self.inner.populated_bins()
    }

    fn summary(&self) -> String {
        self.inner.summary()
    }
}

#[pymodule]
fn pytankfleet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyVessel>()?;
    m.add_class::<PyTransitionModel>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_to_dir, m)?)?;
    m.add_function(wrap_pyfunction!(write_plot_data, m)?)?;
    m.add_function(wrap_pyfunction!(generate_draws, m)?)?;
    m.add_function(wrap_pyfunction!(pava, m)?)?;
    m.add_function(wrap_pyfunction!(rbc_action, m)?)?;
    Ok(())
}
