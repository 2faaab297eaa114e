//! Reheat controllers and the reward signal.
//!
//! [`rbc_action`] is a hysteresis thermostat on one sensor. [`plan`] is a
//! receding-horizon planner over the learned transition model: it searches
//! every action sequence with at most `switch_limit` changes, rolls each out
//! through [`predict`], and returns the first action of the cheapest
//! sequence. The search is depth-first with shared prefixes and prunes any
//! branch whose accumulated cost already matches the best complete sequence;
//! costs only grow along a branch, so the pruning is exact.

use crate::error::{Error, Result};
use crate::model_learning::{predict, AgentMemory, TransitionModel};
use crate::occupants::DrawSeries;
use crate::sensing::Observation;
use crate::vessel::Action;

const COST_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbcConfig {
    pub low_threshold: f64,
    pub high_threshold: f64,
}

impl Default for RbcConfig {
    fn default() -> Self {
        Self {
            low_threshold: 55.0,
            high_threshold: 65.0,
        }
    }
}

impl RbcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.low_threshold < self.high_threshold) {
            return Err(Error::InvalidParams("RBC needs low < high threshold".into()));
        }
        Ok(())
    }
}

/// Hysteresis on the first sensor reading.
pub fn rbc_action(obs: &Observation, cfg: &RbcConfig, prev: Action) -> Action {
    let t = obs.sensor_temps[0];
    if t < cfg.low_threshold {
        Action::On
    } else if t > cfg.high_threshold {
        Action::Off
    } else {
        prev
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    /// Steps.
    pub horizon: usize,
    /// °C
    pub comfort_threshold: f64,
    /// kWh-equivalent penalty per predicted violation.
    pub comfort_weight: f64,
    /// Maximum number of action changes within the horizon.
    pub switch_limit: usize,
    /// Energy of one heating step, kWh.
    pub heater_step_kwh: f64,
    /// Extra penalty per °C of predicted shortfall, as a fraction of
    /// `comfort_weight`. Lets the planner rank plans that all violate.
    pub shortfall_weight: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            horizon: 24,
            comfort_threshold: 45.0,
            comfort_weight: 10.0,
            switch_limit: 2,
            heater_step_kwh: 0.6,
            shortfall_weight: 0.2,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParams("planner horizon must be >= 1".into()));
        }
        if !(self.comfort_weight >= 0.0) {
            return Err(Error::InvalidParams("comfort weight must be >= 0".into()));
        }
        if !(self.shortfall_weight >= 0.0) {
            return Err(Error::InvalidParams("shortfall weight must be >= 0".into()));
        }
        if !(self.heater_step_kwh >= 0.0) {
            return Err(Error::InvalidParams("heater step energy must be >= 0".into()));
        }
        Ok(())
    }

    fn step_energy(&self, a: Action) -> f64 {
        if a.is_on() {
            self.heater_step_kwh
        } else {
            0.0
        }
    }

    /// Comfort term for one draw step whose delivered temperature is
    /// predicted at `temp`.
    pub fn comfort_cost(&self, temp: f64) -> f64 {
        let shortfall = self.comfort_threshold - temp;
        if shortfall > 0.0 {
            self.comfort_weight * (1.0 + self.shortfall_weight * shortfall)
        } else {
            0.0
        }
    }
}

/// Expected draw volume (liters) per future step.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawForecast {
    pub volumes: Vec<f64>,
}

/// Mean draw volume per time-of-day slot over whole days of history.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotProfile {
    pub slot_means: Vec<f64>,
}

impl SlotProfile {
    /// Averages the first `full_days` days of `history`.
    pub fn from_history(history: &DrawSeries, full_days: usize, steps_per_day: usize) -> Result<Self> {
        if full_days == 0 || steps_per_day == 0 {
            return Err(Error::InsufficientHistory(
                "forecast needs at least one full day of history".into(),
            ));
        }
        let mut sums = vec![0.0; steps_per_day];
        let horizon_end = full_days * steps_per_day;
        for d in history.draws.iter().take_while(|d| d.step < horizon_end) {
            sums[d.step % steps_per_day] += d.volume;
        }
        let slot_means = sums.into_iter().map(|s| s / full_days as f64).collect();
        Ok(Self { slot_means })
    }

    pub fn forecast(&self, start_step: usize, horizon: usize) -> DrawForecast {
        let spd = self.slot_means.len();
        DrawForecast {
            volumes: (start_step..start_step + horizon)
                .map(|t| self.slot_means[t % spd])
                .collect(),
        }
    }
}

/// Forecast for steps `start_step..start_step + horizon` from the full days
/// contained in the first `history_steps` steps of `history`.
pub fn forecast_draws(
    history: &DrawSeries,
    history_steps: usize,
    steps_per_day: usize,
    start_step: usize,
    horizon: usize,
) -> Result<DrawForecast> {
    let full_days = history_steps / steps_per_day.max(1);
    Ok(SlotProfile::from_history(history, full_days, steps_per_day)?.forecast(start_step, horizon))
}

/// Best sequence found for one first action.
#[derive(Debug, Clone, PartialEq)]
pub struct SequencePlan {
    pub cost: f64,
    pub actions: Vec<Action>,
    /// Horizon steps at which a violation is predicted.
    pub violation_steps: Vec<usize>,
    /// Predicted observation after the first step.
    pub first_prediction: Observation,
}

impl SequencePlan {
    pub fn violations(&self) -> usize {
        self.violation_steps.len()
    }

    pub fn violates_within(&self, steps: usize) -> bool {
        self.violation_steps.iter().any(|&s| s < steps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub action: Action,
    /// Best plan per first action, indexed by [`Action::index`].
    pub by_first_action: [SequencePlan; 2],
}

impl PlanOutcome {
    pub fn chosen(&self) -> &SequencePlan {
        &self.by_first_action[self.action.index()]
    }
}

struct Search<'a> {
    model: &'a TransitionModel,
    forecast: &'a [f64],
    cfg: &'a PlannerConfig,
    best_cost: f64,
    best: Vec<Action>,
    current: Vec<Action>,
}

impl Search<'_> {
    fn comfort_penalty(&self, t: usize, obs: &Observation) -> f64 {
        if self.forecast[t] > 0.0 {
            self.cfg.comfort_cost(obs.top())
        } else {
            0.0
        }
    }

    fn descend(
        &mut self,
        t: usize,
        obs: &Observation,
        memory: AgentMemory,
        switches: usize,
        cost: f64,
    ) -> Result<()> {
        if t == self.cfg.horizon {
            if cost < self.best_cost - COST_EPS {
                self.best_cost = cost;
                self.best.clone_from(&self.current);
            }
            return Ok(());
        }
        let cost = cost + self.comfort_penalty(t, obs);
        for a in Action::BOTH {
            let mut used = switches;
            if let Some(&prev) = self.current.last() {
                if a != prev {
                    if switches >= self.cfg.switch_limit {
                        continue;
                    }
                    used += 1;
                }
            }
            let c = cost + self.cfg.step_energy(a);
            if c >= self.best_cost - COST_EPS {
                continue;
            }
            let draw = self.forecast[t];
            let next = predict(self.model, obs, a, draw, memory)?;
            self.current.push(a);
            self.descend(t + 1, &next, memory.advance(a, draw), used, c)?;
            self.current.pop();
        }
        Ok(())
    }
}

/// Cost of rolling out `actions` from `obs`, plus the predicted violation
/// steps and the first predicted observation.
pub fn rollout_cost(
    model: &TransitionModel,
    obs: &Observation,
    forecast: &DrawForecast,
    cfg: &PlannerConfig,
    memory: AgentMemory,
    actions: &[Action],
) -> Result<(f64, Vec<usize>, Observation)> {
    let mut cost = 0.0;
    let mut violations = Vec::new();
    let mut current = obs.clone();
    let mut mem = memory;
    let mut first = None;
    for (t, &a) in actions.iter().enumerate() {
        let draw = forecast.volumes[t];
        if draw > 0.0 && current.top() < cfg.comfort_threshold {
            cost += cfg.comfort_cost(current.top());
            violations.push(t);
        }
        cost += cfg.step_energy(a);
        current = predict(model, &current, a, draw, mem)?;
        mem = mem.advance(a, draw);
        if first.is_none() {
            first = Some(current.clone());
        }
    }
    Ok((cost, violations, first.unwrap_or(current)))
}

/// Receding-horizon plan; ties between the two first actions go to off.
pub fn plan(
    model: &TransitionModel,
    obs: &Observation,
    forecast: &DrawForecast,
    cfg: &PlannerConfig,
    memory: AgentMemory,
) -> Result<PlanOutcome> {
    cfg.validate()?;
    if model.populated_bins() == 0 {
        return Err(Error::NoPopulatedBins);
    }
    if forecast.volumes.len() < cfg.horizon {
        return Err(Error::InvalidInput(format!(
            "forecast covers {} steps, horizon is {}",
            forecast.volumes.len(),
            cfg.horizon
        )));
    }
    let volumes = &forecast.volumes[..cfg.horizon];

    let mut plans = Vec::with_capacity(2);
    for first in Action::BOTH {
        let mut search = Search {
            model,
            forecast: volumes,
            cfg,
            best_cost: f64::INFINITY,
            best: Vec::new(),
            current: Vec::with_capacity(cfg.horizon),
        };
        let start_cost = search.comfort_penalty(0, obs);
        let c = start_cost + cfg.step_energy(first);
        let next = predict(model, obs, first, volumes[0], memory)?;
        search.current.push(first);
        search.descend(1, &next, memory.advance(first, volumes[0]), 0, c)?;
        let actions = search.best;
        let (cost, violation_steps, first_prediction) =
            rollout_cost(model, obs, forecast, cfg, memory, &actions)?;
        plans.push(SequencePlan {
            cost,
            actions,
            violation_steps,
            first_prediction,
        });
    }
    let on = plans.pop().expect("two plans");
    let off = plans.pop().expect("two plans");
    let action = if on.cost < off.cost - COST_EPS {
        Action::On
    } else {
        Action::Off
    };
    Ok(PlanOutcome {
        action,
        by_first_action: [off, on],
    })
}

pub fn reward(energy_used: f64, violations: usize, comfort_weight: f64) -> f64 {
    -energy_used - comfort_weight * violations as f64
}
