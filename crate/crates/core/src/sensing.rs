//! Agent-visible observations of the hidden vessel state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::vessel::{VesselParams, VesselState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensorKind {
    /// One sensor at layer `n_layers / 2`.
    Midpoint,
    /// `k >= 2` sensors spread from bottom to top, endpoints included.
    Array(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorConfig {
    pub kind: SensorKind,
    /// °C
    pub noise_std: f64,
}

impl SensorConfig {
    pub const DEFAULT_NOISE_STD: f64 = 0.25;
    pub const DEFAULT_ARRAY_SIZE: usize = 4;

    pub fn midpoint() -> Self {
        Self {
            kind: SensorKind::Midpoint,
            noise_std: Self::DEFAULT_NOISE_STD,
        }
    }

    pub fn array(k: usize) -> Self {
        Self {
            kind: SensorKind::Array(k),
            noise_std: Self::DEFAULT_NOISE_STD,
        }
    }

    pub fn with_noise(mut self, noise_std: f64) -> Self {
        self.noise_std = noise_std;
        self
    }

    pub fn sensor_count(&self) -> usize {
        match self.kind {
            SensorKind::Midpoint => 1,
            SensorKind::Array(k) => k,
        }
    }

    pub fn validate(&self, n_layers: usize) -> Result<()> {
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::SensorConfig(format!(
                "noise_std must be >= 0, got {}",
                self.noise_std
            )));
        }
        if let SensorKind::Array(k) = self.kind {
            if k < 2 {
                return Err(Error::SensorConfig(format!("array needs k >= 2, got {k}")));
            }
            if k > n_layers {
                return Err(Error::SensorConfig(format!(
                    "array of {k} sensors exceeds {n_layers} layers"
                )));
            }
        }
        Ok(())
    }

    /// Layer indices read by this configuration, bottom first.
    pub fn layer_indices(&self, n_layers: usize) -> Result<Vec<usize>> {
        self.validate(n_layers)?;
        Ok(match self.kind {
            SensorKind::Midpoint => vec![n_layers / 2],
            SensorKind::Array(k) => (0..k).map(|i| i * (n_layers - 1) / (k - 1)).collect(),
        })
    }
}

/// Sensor readings available to an agent at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// °C, bottom sensor first.
    pub sensor_temps: Vec<f64>,
    pub step_index: usize,
}

impl Observation {
    pub fn new(sensor_temps: Vec<f64>, step_index: usize) -> Self {
        Self {
            sensor_temps,
            step_index,
        }
    }

    pub fn sensor_count(&self) -> usize {
        self.sensor_temps.len()
    }

    /// Topmost available sensor, used as the delivered-temperature proxy.
    pub fn top(&self) -> f64 {
        *self.sensor_temps.last().expect("observation has at least one sensor")
    }

    pub fn mean(&self) -> f64 {
        self.sensor_temps.iter().sum::<f64>() / self.sensor_temps.len() as f64
    }
}

/// Reads the configured sensors with seeded additive Gaussian noise, clipped
/// to `[inlet_temp, max_temp]`.
pub fn observe(
    state: &VesselState,
    params: &VesselParams,
    config: &SensorConfig,
    step_index: usize,
    noise_seed: u64,
) -> Result<Observation> {
    if state.layer_temps.len() != params.n_layers {
        return Err(Error::InvalidInput(format!(
            "state has {} layers, params expect {}",
            state.layer_temps.len(),
            params.n_layers
        )));
    }
    let indices = config.layer_indices(params.n_layers)?;
    let mut temps: Vec<f64> = indices.iter().map(|&i| state.layer_temps[i]).collect();
    if config.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        let noise = Normal::new(0.0, config.noise_std)
            .map_err(|e| Error::SensorConfig(format!("noise: {e}")))?;
        for t in &mut temps {
            *t += noise.sample(&mut rng);
        }
    }
    for t in &mut temps {
        *t = t.clamp(params.inlet_temp, params.max_temp);
    }
    if temps.iter().any(|t| !t.is_finite()) {
        return Err(Error::Numeric("non-finite observation".into()));
    }
    Ok(Observation::new(temps, step_index))
}
