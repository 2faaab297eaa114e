//! Experiment configuration and its `key = value` file format.
//!
//! One assignment per line; `#` starts a comment; keys use dotted section
//! prefixes (`vessel.n_layers = 10`). Values are numbers, booleans
//! (`true`/`false`), bare words, or comma-separated lists of those.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::binning::{TempAxis, VolumeClasses};
use crate::control::{PlannerConfig, RbcConfig};
use crate::error::{Error, Result};
use crate::exploration::{ExplorationKind, StateBinning};
use crate::model_learning::{FeatureBinning, KnowledgeConfig};
use crate::occupants::Archetype;
use crate::sensing::{SensorConfig, SensorKind};
use crate::vessel::VesselParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Rbc,
    SarlK,
    MarlK,
    SarlKi,
    MarlKi,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Rbc,
        Strategy::SarlK,
        Strategy::MarlK,
        Strategy::SarlKi,
        Strategy::MarlKi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Rbc => "RBC",
            Strategy::SarlK => "SARL_K",
            Strategy::MarlK => "MARL_K",
            Strategy::SarlKi => "SARL_KI",
            Strategy::MarlKi => "MARL_KI",
        }
    }

    pub fn is_learning(self) -> bool {
        self != Strategy::Rbc
    }

    pub fn is_multi_agent(self) -> bool {
        matches!(self, Strategy::MarlK | Strategy::MarlKi)
    }

    pub fn uses_extra_sensors(self) -> bool {
        matches!(self, Strategy::SarlKi | Strategy::MarlKi)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .trim()
            .to_ascii_uppercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        match norm.as_str() {
            "RBC" => Ok(Strategy::Rbc),
            "SARLK" => Ok(Strategy::SarlK),
            "MARLK" => Ok(Strategy::MarlK),
            "SARLKI" => Ok(Strategy::SarlKi),
            "MARLKI" => Ok(Strategy::MarlKi),
            _ => Err(Error::Config(format!("unknown strategy `{s}`"))),
        }
    }
}

/// Parses `all` or a comma-separated strategy list.
pub fn parse_strategies(s: &str) -> Result<Vec<Strategy>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Strategy::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let st: Strategy = part.parse()?;
        if !out.contains(&st) {
            out.push(st);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no strategy given".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_households: usize,
    pub n_days: usize,
    pub master_seed: u64,
    pub strategies: Vec<Strategy>,
    pub vessel: VesselParams,
    /// Assigned to households cyclically.
    pub archetypes: Vec<Archetype>,
    /// Multiplier on every household's draw probabilities.
    pub intensity_scale: f64,
    /// Sensors for RBC, SARL_K and MARL_K.
    pub default_sensors: SensorConfig,
    /// Sensors for SARL_KI and MARL_KI.
    pub extra_sensors: SensorConfig,
    pub temp_bin_width: f64,
    pub volume_classes: VolumeClasses,
    pub knowledge: KnowledgeConfig,
    pub rbc: RbcConfig,
    pub planner: PlannerConfig,
    pub single_agent_exploration: ExplorationKind,
    pub multi_agent_exploration: ExplorationKind,
    /// Exploration is suppressed if the deviating plan predicts a violation
    /// within this many steps.
    pub safety_lookahead: usize,
    /// Days between model refits and count pooling.
    pub model_refresh_period: usize,
    pub heldout_fraction: f64,
    /// Length of the held-out probe trajectory.
    pub probe_days: usize,
    pub warmup_days: usize,
    pub initial_temp: f64,
    /// Delivered-temperature comfort limit for ground-truth accounting, °C.
    pub comfort_threshold: f64,
    /// Keep every logged transition in the report.
    pub keep_transitions: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let vessel = VesselParams::default();
        let planner = PlannerConfig {
            heater_step_kwh: vessel.step_heater_energy_kwh(),
            ..PlannerConfig::default()
        };
        Self {
            n_households: 10,
            n_days: 60,
            master_seed: 1,
            strategies: Strategy::ALL.to_vec(),
            vessel,
            archetypes: Archetype::ALL.to_vec(),
            intensity_scale: 1.0,
            default_sensors: SensorConfig::midpoint(),
            extra_sensors: SensorConfig::array(SensorConfig::DEFAULT_ARRAY_SIZE),
            temp_bin_width: 5.0,
            volume_classes: VolumeClasses::default(),
            knowledge: KnowledgeConfig::full(),
            rbc: RbcConfig::default(),
            planner,
            single_agent_exploration: ExplorationKind::EpsGreedy(0.1),
            multi_agent_exploration: ExplorationKind::Targeted(5.0),
            safety_lookahead: 4,
            model_refresh_period: 1,
            heldout_fraction: 0.2,
            probe_days: 14,
            warmup_days: 3,
            initial_temp: 60.0,
            comfort_threshold: 45.0,
            keep_transitions: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_households == 0 {
            return bad("n_households must be >= 1".into());
        }
        if self.n_days == 0 {
            return bad("n_days must be >= 1".into());
        }
        if self.strategies.is_empty() {
            return bad("no strategies selected".into());
        }
        if self.n_households < 2 && self.strategies.iter().any(|s| s.is_multi_agent()) {
            return bad("multi-agent strategies need at least 2 households".into());
        }
        if self.archetypes.is_empty() {
            return bad("archetype mix is empty".into());
        }
        if !(self.intensity_scale >= 0.0 && self.intensity_scale.is_finite()) {
            return bad("occupants.intensity_scale must be >= 0".into());
        }
        self.vessel.validate()?;
        self.default_sensors.validate(self.vessel.n_layers)?;
        self.extra_sensors.validate(self.vessel.n_layers)?;
        self.knowledge.validate()?;
        self.rbc.validate()?;
        self.planner.validate()?;
        self.single_agent_exploration.validate()?;
        self.multi_agent_exploration.validate()?;
        self.volume_classes.validate()?;
        TempAxis::new(self.temp_bin_width, self.vessel.inlet_temp, self.vessel.max_temp)?;
        if self.model_refresh_period == 0 {
            return bad("model_refresh_period must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.heldout_fraction) {
            return bad("heldout_fraction must lie in [0, 1)".into());
        }
        if !(self.vessel.inlet_temp..=self.vessel.max_temp).contains(&self.initial_temp) {
            return bad("initial_temp must lie within [inlet_temp, max_temp]".into());
        }
        Ok(())
    }

    pub fn sensors_for(&self, strategy: Strategy) -> SensorConfig {
        if strategy.uses_extra_sensors() {
            self.extra_sensors
        } else {
            self.default_sensors
        }
    }

    pub fn exploration_for(&self, strategy: Strategy) -> ExplorationKind {
        match strategy {
            Strategy::Rbc => ExplorationKind::None,
            s if s.is_multi_agent() => self.multi_agent_exploration,
            _ => self.single_agent_exploration,
        }
    }

    pub fn temp_axis(&self) -> TempAxis {
        TempAxis {
            width: self.temp_bin_width,
            min: self.vessel.inlet_temp,
            max: self.vessel.max_temp,
        }
    }

    pub fn state_binning(&self, sensors: &SensorConfig) -> StateBinning {
        StateBinning {
            temps: self.temp_axis(),
            volumes: self.volume_classes.clone(),
            sensor_count: sensors.sensor_count(),
        }
    }

    pub fn feature_binning(&self) -> FeatureBinning {
        FeatureBinning {
            temps: self.temp_axis(),
            volumes: self.volume_classes.clone(),
            ..FeatureBinning::new(self.vessel.inlet_temp, self.vessel.max_temp)
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&read_config(path)?)
    }

    /// Parses config text on top of the defaults and validates the result.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies every assignment in `text` without validating. Unless the
    /// text sets `planner.heater_step_kwh`, it is recomputed from the vessel.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        let mut planner_energy_set = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigLine {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if key == "planner.heater_step_kwh" {
                planner_energy_set = true;
            }
            self.set(key, value).map_err(|e| Error::ConfigLine {
                line: i + 1,
                msg: match e {
                    Error::Config(m) => m,
                    other => other.to_string(),
                },
            })?;
        }
        if !planner_energy_set {
            self.planner.heater_step_kwh = self.vessel.step_heater_energy_kwh();
        }
        Ok(())
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "households" | "n_households" => self.n_households = num(key, value)?,
            "days" | "n_days" => self.n_days = num(key, value)?,
            "seed" | "master_seed" => self.master_seed = num(key, value)?,
            "strategy" | "strategies" => self.strategies = parse_strategies(value)?,
            "warmup_days" => self.warmup_days = num(key, value)?,
            "initial_temp" => self.initial_temp = num(key, value)?,
            "model_refresh_period" => self.model_refresh_period = num(key, value)?,
            "heldout_fraction" => self.heldout_fraction = num(key, value)?,
            "probe_days" => self.probe_days = num(key, value)?,
            "comfort_threshold" => self.comfort_threshold = num(key, value)?,
            "keep_transitions" => self.keep_transitions = boolean(key, value)?,

            "vessel.n_layers" => self.vessel.n_layers = num(key, value)?,
            "vessel.volume_total" => self.vessel.volume_total = num(key, value)?,
            "vessel.heater_power" => self.vessel.heater_power = num(key, value)?,
            "vessel.heater_layer" => self.vessel.heater_layer = num(key, value)?,
            "vessel.inlet_temp" => self.vessel.inlet_temp = num(key, value)?,
            "vessel.ambient_temp" => self.vessel.ambient_temp = num(key, value)?,
            "vessel.max_temp" => self.vessel.max_temp = num(key, value)?,
            "vessel.loss_coeff" => self.vessel.loss_coeff = num(key, value)?,
            "vessel.cond_coeff" => self.vessel.cond_coeff = num(key, value)?,
            "vessel.specific_heat" => self.vessel.specific_heat = num(key, value)?,
            "vessel.density" => self.vessel.density = num(key, value)?,
            "vessel.dt" => self.vessel.dt = num(key, value)?,

            "occupants.archetypes" => {
                self.archetypes = list(value)
                    .into_iter()
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }

            "occupants.intensity_scale" => self.intensity_scale = num(key, value)?,

            "sensors.default" => self.default_sensors.kind = sensor_kind(value)?,
            "sensors.extra" => self.extra_sensors.kind = sensor_kind(value)?,
            "sensors.noise_std" => {
                let n = num(key, value)?;
                self.default_sensors.noise_std = n;
                self.extra_sensors.noise_std = n;
            }

            "binning.temp_width" => self.temp_bin_width = num(key, value)?,
            "binning.volume_edges" => {
                self.volume_classes = VolumeClasses {
                    edges: list(value)
                        .into_iter()
                        .map(|v| num(key, v))
                        .collect::<Result<_>>()?,
                }
            }

            "knowledge.enabled" => self.knowledge.enabled = boolean(key, value)?,
            "knowledge.engineered_features" => {
                self.knowledge.engineered_features = boolean(key, value)?
            }
            "knowledge.endpoint_clamp" => {
                self.knowledge.constraints.endpoint_clamp = boolean(key, value)?
            }
            "knowledge.monotone_profile" => {
                self.knowledge.constraints.monotone_profile = boolean(key, value)?
            }
            "knowledge.standby_non_increasing" => {
                self.knowledge.constraints.standby_non_increasing = boolean(key, value)?
            }

            "rbc.low" | "rbc.low_threshold" => self.rbc.low_threshold = num(key, value)?,
            "rbc.high" | "rbc.high_threshold" => self.rbc.high_threshold = num(key, value)?,

            "planner.horizon" => self.planner.horizon = num(key, value)?,
            "planner.comfort_threshold" => self.planner.comfort_threshold = num(key, value)?,
            "planner.comfort_weight" => self.planner.comfort_weight = num(key, value)?,
            "planner.switch_limit" => self.planner.switch_limit = num(key, value)?,
            "planner.shortfall_weight" => self.planner.shortfall_weight = num(key, value)?,
            "planner.heater_step_kwh" => self.planner.heater_step_kwh = num(key, value)?,

            "exploration.single_agent" => self.single_agent_exploration = exploration(value)?,
            "exploration.multi_agent" => self.multi_agent_exploration = exploration(value)?,
            "exploration.safety_lookahead" => self.safety_lookahead = num(key, value)?,

            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }
}

pub fn read_config(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

fn list(value: &str) -> Vec<&str> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

/// `midpoint` or `array:<k>`.
pub fn sensor_kind(value: &str) -> Result<SensorKind> {
    let v = value.trim().to_ascii_lowercase();
    if v == "midpoint" {
        return Ok(SensorKind::Midpoint);
    }
    if let Some(k) = v.strip_prefix("array:") {
        return Ok(SensorKind::Array(num("sensors", k)?));
    }
    Err(Error::Config(format!("invalid sensor kind `{value}`")))
}

/// `none`, `eps_greedy:<eps>` or `targeted:<weight>`.
pub fn exploration(value: &str) -> Result<ExplorationKind> {
    let v = value.trim().to_ascii_lowercase();
    if v == "none" {
        return Ok(ExplorationKind::None);
    }
    let (kind, param) = v
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("invalid exploration `{value}`")))?;
    let p: f64 = num("exploration", param)?;
    match kind {
        "eps_greedy" | "epsilon" => Ok(ExplorationKind::EpsGreedy(p)),
        "targeted" => Ok(ExplorationKind::Targeted(p)),
        _ => Err(Error::Config(format!("invalid exploration `{value}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dotted_keys() {
        let cfg = ExperimentConfig::parse(
            "# demo\nhouseholds = 4\nvessel.n_layers = 8   # fewer layers\n\
             sensors.extra = array:3\nstrategy = RBC, MARL_K\n\
             exploration.single_agent = eps_greedy:0.2\nvessel.heater_power = 3.0\n",
        )
        .unwrap();
        assert_eq!(cfg.n_households, 4);
        assert_eq!(cfg.vessel.n_layers, 8);
        assert_eq!(cfg.extra_sensors.kind, SensorKind::Array(3));
        assert_eq!(cfg.strategies, vec![Strategy::Rbc, Strategy::MarlK]);
        assert_eq!(cfg.single_agent_exploration, ExplorationKind::EpsGreedy(0.2));
        assert!((cfg.planner.heater_step_kwh - 0.75).abs() < 1e-12);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = ExperimentConfig::parse("households = 2\nbogus.key = 1\n").unwrap_err();
        assert!(matches!(err, Error::ConfigLine { line: 2, .. }), "{err}");
        let err = ExperimentConfig::parse("households = two\n").unwrap_err();
        assert!(matches!(err, Error::ConfigLine { line: 1, .. }));
        let err = ExperimentConfig::parse("just words\n").unwrap_err();
        assert!(matches!(err, Error::ConfigLine { line: 1, .. }));
    }

    #[test]
    fn marl_needs_two_households() {
        let err = ExperimentConfig::parse("households = 1\nstrategy = MARL_K\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(ExperimentConfig::parse("households = 1\nstrategy = SARL_K\n").is_ok());
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!("marl(k,i)".parse::<Strategy>().unwrap(), Strategy::MarlKi);
        assert_eq!(parse_strategies("all").unwrap().len(), 5);
    }
}
