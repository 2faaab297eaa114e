//! Fleet simulation over the configured strategies.
//!
//! Each strategy runs its own fleet from the same occupant draws, so
//! strategies are compared on identical demand. Within a day households are
//! simulated independently; models, pooled visit counts and exploration
//! targets only change at refresh boundaries.
//!
//! Model error is measured on a common held-out set: one probe trajectory
//! per household, driven by a randomized thermostat band so it covers a wide
//! range of states, from which a hash-selected subset of transitions is
//! kept. Every strategy with the same sensor layout is scored on the same
//! held-out transitions, and none of them trains on them.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::{plan, rbc_action, SlotProfile};
use crate::error::{Error, Result};
use crate::exploration::{
    assign_targets, bin_of, choose_action, coverage, Candidates, ExplorationKind, LayeredCounts,
    StateBinning, VisitCounts,
};
use crate::model_learning::{
    evaluate_mae, fit, AgentMemory, FeatureBinning, KnowledgeConfig, TransitionDataset,
    TransitionModel, TransitionSample,
};
use crate::occupants::{generate_draws, make_profile, DrawSeries, HouseholdProfile};
use crate::sensing::{observe, Observation, SensorConfig, SensorKind};
use crate::vessel::{step, Action, StepInput, VesselState};

use super::config::{ExperimentConfig, Strategy};
use super::seed::{derive_seed, mix, step_seed, unit_hash, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct DayMetrics {
    pub day: usize,
    /// Fleet total.
    pub energy_kwh: f64,
    /// Draws delivered below the comfort threshold, fleet total.
    pub violations: usize,
    pub draws: usize,
    /// Coverage of the visits each agent's model learns from: the agent's
    /// own visits for independent agents, the pooled visits for a fleet
    /// sharing experience. Averaged over agents.
    pub coverage: f64,
    /// Coverage of the union of all visits in the fleet.
    pub fleet_coverage: f64,
    /// Coverage of each agent's own visits, averaged over agents.
    pub agent_coverage: f64,
    /// Held-out error of the model(s) in force at the end of the day.
    pub mae: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HouseholdTotals {
    pub household_id: usize,
    pub energy_kwh: f64,
    pub violations: usize,
    pub draws: usize,
}

#[derive(Debug, Clone)]
pub struct StrategyReport {
    pub strategy: Strategy,
    pub daily: Vec<DayMetrics>,
    /// Totals over evaluation days (warm-up excluded), by household id.
    pub households: Vec<HouseholdTotals>,
    pub cumulative_energy_kwh: f64,
    pub violations: usize,
    pub draws: usize,
    pub final_coverage: f64,
    pub final_mae: Option<f64>,
    /// Transitions logged per household, by household id.
    pub logged_samples: Vec<usize>,
    /// Size of the pooled training set for fleet-shared strategies.
    pub pooled_samples: Option<usize>,
    /// Logged transitions by household id, if requested.
    pub transitions: Option<Vec<TransitionDataset>>,
}

#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub n_households: usize,
    pub n_days: usize,
    pub warmup_days: usize,
    pub strategies: Vec<StrategyReport>,
}

impl MetricsReport {
    pub fn strategy(&self, s: Strategy) -> Option<&StrategyReport> {
        self.strategies.iter().find(|r| r.strategy == s)
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    let order: Vec<usize> = (0..cfg.n_households).collect();
    run_experiment_ordered(cfg, &order)
}

/// Runs the experiment stepping households in `order` within each day.
/// The report does not depend on the order.
pub fn run_experiment_ordered(cfg: &ExperimentConfig, order: &[usize]) -> Result<MetricsReport> {
    cfg.validate()?;
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..cfg.n_households).collect::<Vec<_>>() {
        return Err(Error::InvalidInput(
            "household order must be a permutation of the household ids".into(),
        ));
    }

    let spd = cfg.vessel.steps_per_day();
    let households: Vec<Household> = (0..cfg.n_households)
        .map(|h| Household::new(cfg, h, spd))
        .collect::<Result<_>>()?;

    let mut evals: BTreeMap<SensorKindKey, Evaluation> = BTreeMap::new();
    let mut strategies = Vec::with_capacity(cfg.strategies.len());
    for &strategy in &cfg.strategies {
        let sensors = cfg.sensors_for(strategy);
        let eval = match evals.entry(SensorKindKey::from(sensors.kind)) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => e.insert(Evaluation::build(cfg, &sensors, &households)?),
        };
        strategies.push(run_strategy(cfg, strategy, &sensors, &households, eval, order)?);
    }
    Ok(MetricsReport {
        n_households: cfg.n_households,
        n_days: cfg.n_days,
        warmup_days: cfg.warmup_days,
        strategies,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum SensorKindKey {
    Midpoint,
    Array(usize),
}

impl From<SensorKind> for SensorKindKey {
    fn from(k: SensorKind) -> Self {
        match k {
            SensorKind::Midpoint => SensorKindKey::Midpoint,
            SensorKind::Array(n) => SensorKindKey::Array(n),
        }
    }
}

/// Occupant side of one household, shared by every strategy.
struct Household {
    id: usize,
    profile: HouseholdProfile,
    draws: DrawSeries,
    dense: Vec<f64>,
}

impl Household {
    fn new(cfg: &ExperimentConfig, id: usize, spd: usize) -> Result<Self> {
        let archetype = cfg.archetypes[id % cfg.archetypes.len()];
        let seed = derive_seed(cfg.master_seed, id, Stream::Occupant);
        let mut profile = make_profile(archetype, id, seed, spd);
        for p in &mut profile.base_intensity {
            *p = (*p * cfg.intensity_scale).clamp(0.0, 1.0);
        }
        let draws = generate_draws(&profile, cfg.n_days, mix(seed))?;
        let dense = draws.to_dense(cfg.n_days * spd);
        Ok(Self {
            id,
            profile,
            draws,
            dense,
        })
    }
}

/// Held-out transitions and feature binning for one sensor layout.
struct Evaluation {
    binning: FeatureBinning,
    /// Held-out transitions of each household, by id.
    per_household: Vec<TransitionDataset>,
    all: TransitionDataset,
}

impl Evaluation {
    fn build(cfg: &ExperimentConfig, sensors: &SensorConfig, households: &[Household]) -> Result<Self> {
        let k = sensors.sensor_count();
        let mut probe_all = TransitionDataset::new(k);
        let mut per_household = Vec::with_capacity(households.len());
        let mut all = TransitionDataset::new(k);
        for hh in households {
            let probe = probe_trajectory(cfg, sensors, hh)?;
            let mut held = TransitionDataset::new(k);
            for (t, s) in probe.samples.iter().enumerate() {
                if unit_hash(hh.id, t) < cfg.heldout_fraction {
                    held.push(s.clone())?;
                    all.push(s.clone())?;
                }
            }
            probe_all.samples.extend(probe.samples);
            per_household.push(held);
        }
        let binning = if cfg.knowledge.enabled && cfg.knowledge.engineered_features {
            cfg.feature_binning().with_engineered_quantiles(&probe_all)
        } else {
            cfg.feature_binning()
        };
        Ok(Self {
            binning,
            per_household,
            all,
        })
    }
}

/// Probe run: a thermostat on the true middle layer whose band is redrawn
/// every day, with occasional random switching.
fn probe_trajectory(
    cfg: &ExperimentConfig,
    sensors: &SensorConfig,
    hh: &Household,
) -> Result<TransitionDataset> {
    let k = sensors.sensor_count();
    let mut out = TransitionDataset::new(k);
    if cfg.probe_days == 0 {
        return Ok(out);
    }
    let spd = cfg.vessel.steps_per_day();
    let seed = derive_seed(cfg.master_seed, hh.id, Stream::Probe);
    let draws = generate_draws(&hh.profile, cfg.probe_days, seed)?.to_dense(cfg.probe_days * spd);
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ 1));
    let noise = mix(seed ^ 2);
    let mid = cfg.vessel.n_layers / 2;

    let mut state = cfg.vessel.uniform_state(cfg.initial_temp);
    let mut action = Action::Off;
    let mut memory = AgentMemory::default();
    let mut band_low = 0.0;
    let mut obs = observe(&state, &cfg.vessel, sensors, 0, step_seed(noise, 0))?;
    for (t, &volume) in draws.iter().enumerate() {
        if t % spd == 0 {
            band_low = rng.random_range(30.0..70.0);
        }
        let true_mid = state.layer_temps[mid];
        action = if true_mid < band_low {
            Action::On
        } else if true_mid > band_low + 10.0 {
            Action::Off
        } else {
            action
        };
        if rng.random::<f64>() < 0.1 {
            action = action.toggled();
        }
        let draw = volume.min(cfg.vessel.volume_total);
        let res = step(&state, &cfg.vessel, StepInput { action, draw_volume: draw })?;
        state = res.next_state;
        let next = observe(&state, &cfg.vessel, sensors, t + 1, step_seed(noise, t + 1))?;
        out.push(TransitionSample {
            obs: std::mem::replace(&mut obs, next.clone()),
            action,
            draw_volume: draw,
            memory,
            next_obs: next,
            household_id: hh.id,
        })?;
        memory = memory.advance(action, draw);
    }
    Ok(out)
}

/// Controller side of one household under one strategy.
struct Agent {
    id: usize,
    state: VesselState,
    obs: Observation,
    action: Action,
    memory: AgentMemory,
    noise_seed: u64,
    rng: ChaCha8Rng,
    dataset: TransitionDataset,
    /// Samples logged before the current day.
    synced: usize,
    counts: VisitCounts,
    day_counts: VisitCounts,
    targets: Option<HashSet<u64>>,
    forecaster: Option<SlotProfile>,
    model: Option<TransitionModel>,
    day: HouseholdTotals,
    totals: HouseholdTotals,
}

fn run_strategy(
    cfg: &ExperimentConfig,
    strategy: Strategy,
    sensors: &SensorConfig,
    households: &[Household],
    eval: &Evaluation,
    order: &[usize],
) -> Result<StrategyReport> {
    let spd = cfg.vessel.steps_per_day();
    let k = sensors.sensor_count();
    let state_binning = cfg.state_binning(sensors);
    let exploration = cfg.exploration_for(strategy);
    let shared = strategy.is_multi_agent();
    let knowledge = if strategy.is_learning() {
        cfg.knowledge
    } else {
        KnowledgeConfig::off()
    };
    let proxy = k / 2;

    let mut agents: Vec<Agent> = households
        .iter()
        .map(|hh| {
            let state = cfg.vessel.uniform_state(cfg.initial_temp);
            let noise_seed = derive_seed(cfg.master_seed, hh.id, Stream::Noise);
            let obs = observe(&state, &cfg.vessel, sensors, 0, step_seed(noise_seed, 0))?;
            Ok(Agent {
                id: hh.id,
                state,
                obs,
                action: Action::Off,
                memory: AgentMemory::default(),
                noise_seed,
                rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.master_seed, hh.id, Stream::Policy)),
                dataset: TransitionDataset::new(k),
                synced: 0,
                counts: VisitCounts::new(),
                day_counts: VisitCounts::new(),
                targets: None,
                forecaster: None,
                model: None,
                day: HouseholdTotals {
                    household_id: hh.id,
                    ..Default::default()
                },
                totals: HouseholdTotals {
                    household_id: hh.id,
                    ..Default::default()
                },
            })
        })
        .collect::<Result<_>>()?;

    let mut pooled = TransitionDataset::new(k);
    let mut pooled_counts = VisitCounts::new();
    let mut shared_model: Option<TransitionModel> = None;
    let mut mae: Option<f64> = None;
    let mut daily = Vec::with_capacity(cfg.n_days);

    for day in 0..cfg.n_days {
        for &h in order {
            let agent = &mut agents[h];
            let hh = &households[h];
            let fleet = shared.then_some((shared_model.as_ref(), &pooled_counts));
            for s in 0..spd {
                let t = day * spd + s;
                simulate_step(
                    cfg,
                    strategy,
                    sensors,
                    &state_binning,
                    &exploration,
                    fleet,
                    proxy,
                    agent,
                    hh.dense[t],
                    t,
                )?;
            }
        }

        // Day boundary: every agent in id order.
        let mut energy = 0.0;
        let mut violations = 0;
        let mut draws = 0;
        for agent in &mut agents {
            energy += agent.day.energy_kwh;
            violations += agent.day.violations;
            draws += agent.day.draws;
            if day >= cfg.warmup_days {
                agent.totals.energy_kwh += agent.day.energy_kwh;
                agent.totals.violations += agent.day.violations;
                agent.totals.draws += agent.day.draws;
            }
            agent.day = HouseholdTotals {
                household_id: agent.id,
                ..Default::default()
            };
            agent.counts.merge(&agent.day_counts);
            pooled_counts.merge(&agent.day_counts);
            agent.day_counts.clear();
            pooled.samples.extend_from_slice(&agent.dataset.samples[agent.synced..]);
            agent.synced = agent.dataset.len();
            agent.forecaster = Some(SlotProfile::from_history(
                &households[agent.id].draws,
                day + 1,
                spd,
            )?);
        }

        if (day + 1) % cfg.model_refresh_period == 0 {
            if shared || !strategy.is_learning() {
                let m = fit(&pooled, &knowledge, &eval.binning)?;
                if !eval.all.is_empty() {
                    mae = Some(evaluate_mae(&m, &eval.all)?);
                }
                if shared {
                    shared_model = Some(m);
                }
            } else {
                let mut total = 0.0;
                let mut n = 0usize;
                for agent in &mut agents {
                    let m = fit(&agent.dataset, &knowledge, &eval.binning)?;
                    let held = &eval.per_household[agent.id];
                    if !held.is_empty() {
                        total += evaluate_mae(&m, held)?;
                        n += 1;
                    }
                    agent.model = Some(m);
                }
                if n > 0 {
                    mae = Some(total / n as f64);
                }
            }
            if shared && matches!(exploration, ExplorationKind::Targeted(_)) {
                let lists = assign_targets(&pooled_counts, &state_binning, agents.len())?;
                for (agent, list) in agents.iter_mut().zip(lists) {
                    agent.targets = Some(list.into_iter().collect());
                }
            }
        }

        let mut own = 0.0;
        for agent in &agents {
            own += coverage(&agent.counts, &state_binning)?;
        }
        let agent_coverage = own / agents.len() as f64;
        let fleet_coverage = coverage(&pooled_counts, &state_binning)?;
        let cov = if shared { fleet_coverage } else { agent_coverage };
        daily.push(DayMetrics {
            day,
            energy_kwh: energy,
            violations,
            draws,
            coverage: cov,
            fleet_coverage,
            agent_coverage,
            mae,
        });
    }

    let households_totals: Vec<HouseholdTotals> = agents.iter().map(|a| a.totals.clone()).collect();
    let last = daily.last().expect("n_days >= 1");
    Ok(StrategyReport {
        strategy,
        cumulative_energy_kwh: households_totals.iter().map(|h| h.energy_kwh).sum(),
        violations: households_totals.iter().map(|h| h.violations).sum(),
        draws: households_totals.iter().map(|h| h.draws).sum(),
        final_coverage: last.coverage,
        final_mae: last.mae,
        logged_samples: agents.iter().map(|a| a.dataset.len()).collect(),
        pooled_samples: shared.then_some(pooled.len()),
        transitions: cfg
            .keep_transitions
            .then(|| agents.iter().map(|a| a.dataset.clone()).collect()),
        households: households_totals,
        daily,
    })
}

#[allow(clippy::too_many_arguments)]
fn simulate_step(
    cfg: &ExperimentConfig,
    strategy: Strategy,
    sensors: &SensorConfig,
    state_binning: &StateBinning,
    exploration: &ExplorationKind,
    fleet: Option<(Option<&TransitionModel>, &VisitCounts)>,
    proxy: usize,
    agent: &mut Agent,
    volume: f64,
    t: usize,
) -> Result<()> {
    let obs = agent.obs.clone();
    let (model, base_counts) = match fleet {
        Some((m, c)) => (m, c),
        None => (agent.model.as_ref(), &agent.counts),
    };
    let action = match (strategy, model, agent.forecaster.as_ref()) {
        (Strategy::Rbc, _, _) | (_, None, _) | (_, _, None) => {
            let proxy_obs = Observation::new(vec![obs.sensor_temps[proxy]], t);
            rbc_action(&proxy_obs, &cfg.rbc, agent.action)
        }
        (_, Some(model), Some(forecaster)) => {
            let forecast = forecaster.forecast(t, cfg.planner.horizon);
            let out = plan(model, &obs, &forecast, &cfg.planner, agent.memory)?;
            if *exploration == ExplorationKind::None {
                out.action
            } else {
                let alt = &out.by_first_action[out.action.toggled().index()];
                let candidates = Candidates {
                    next_obs: [
                        Some(out.by_first_action[0].first_prediction.clone()),
                        Some(out.by_first_action[1].first_prediction.clone()),
                    ],
                    costs: [out.by_first_action[0].cost, out.by_first_action[1].cost],
                    deviation_allowed: !alt.violates_within(cfg.safety_lookahead),
                };
                let counts = LayeredCounts {
                    base: base_counts,
                    overlay: &agent.day_counts,
                };
                choose_action(
                    exploration,
                    out.action,
                    &candidates,
                    &counts,
                    agent.targets.as_ref(),
                    state_binning,
                    &mut agent.rng,
                )?
            }
        }
    };

    let draw = volume.min(cfg.vessel.volume_total);
    let res = step(&agent.state, &cfg.vessel, StepInput { action, draw_volume: draw })?;
    agent.day.energy_kwh += res.energy_used;
    if let Some(delivered) = res.delivered_temp {
        agent.day.draws += 1;
        if delivered < cfg.comfort_threshold {
            agent.day.violations += 1;
        }
    }
    agent.state = res.next_state;
    let next = observe(
        &agent.state,
        &cfg.vessel,
        sensors,
        t + 1,
        step_seed(agent.noise_seed, t + 1),
    )?;
    agent.day_counts.record(bin_of(&obs, draw, state_binning));
    agent.dataset.push(TransitionSample {
        obs,
        action,
        draw_volume: draw,
        memory: agent.memory,
        next_obs: next.clone(),
        household_id: agent.id,
    })?;
    agent.obs = next;
    agent.memory = agent.memory.advance(action, draw);
    agent.action = action;
    Ok(())
}
