//! Stratified hot-water storage vessel.
//!
//! The vessel is split into `n_layers` equal-volume, fully mixed horizontal
//! layers (index 0 at the bottom). One simulation step applies, in order:
//!
//! 1. plug-flow draw: hot water leaves from the top, the column shifts up and
//!    mains water enters at the bottom;
//! 2. heating of the element layer, truncated at the thermostat cutoff;
//! 3. explicit inter-layer conduction and per-layer ambient exchange;
//! 4. buoyancy mixing of any inverted layers.
//!
//! Energies are reported in kWh; internal bookkeeping uses kJ.

use crate::error::{Error, Result};
use crate::isotonic::{is_non_decreasing, pava_weighted};

const KJ_PER_KWH: f64 = 3600.0;

/// Binary reheat command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Action {
    #[default]
    Off,
    On,
}

impl Action {
    pub const BOTH: [Action; 2] = [Action::Off, Action::On];

    pub fn is_on(self) -> bool {
        self == Action::On
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Action::Off => 0.0,
            Action::On => 1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Action::Off => 0,
            Action::On => 1,
        }
    }

    pub fn toggled(self) -> Action {
        match self {
            Action::Off => Action::On,
            Action::On => Action::Off,
        }
    }
}

impl From<bool> for Action {
    fn from(on: bool) -> Self {
        if on {
            Action::On
        } else {
            Action::Off
        }
    }
}

/// Physical parameters of one vessel.
#[derive(Debug, Clone, PartialEq)]
pub struct VesselParams {
    pub n_layers: usize,
    /// Liters.
    pub volume_total: f64,
    /// kW.
    pub heater_power: f64,
    /// Layer index of the heating element, 0 = bottom.
    pub heater_layer: usize,
    /// °C
    pub inlet_temp: f64,
    /// °C
    pub ambient_temp: f64,
    /// Thermostat cutoff, °C.
    pub max_temp: f64,
    /// Ambient loss coefficient per layer, W/K.
    pub loss_coeff: f64,
    /// Conductance between adjacent layers, W/K.
    pub cond_coeff: f64,
    /// kJ/(kg·K)
    pub specific_heat: f64,
    /// kg/L
    pub density: f64,
    /// Seconds per step.
    pub dt: f64,
}

impl Default for VesselParams {
    fn default() -> Self {
        Self {
            n_layers: 10,
            volume_total: 200.0,
            heater_power: 2.4,
            heater_layer: 0,
            inlet_temp: 10.0,
            ambient_temp: 20.0,
            max_temp: 90.0,
            loss_coeff: 0.2,
            cond_coeff: 1.5,
            specific_heat: 4.186,
            density: 1.0,
            dt: 900.0,
        }
    }
}

impl VesselParams {
    /// Checks physical sanity and the explicit-update stability bound.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.n_layers == 0 {
            return bad("n_layers must be at least 1".into());
        }
        let positive = [
            ("volume_total", self.volume_total),
            ("heater_power", self.heater_power),
            ("specific_heat", self.specific_heat),
            ("density", self.density),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        for (name, v) in [("loss_coeff", self.loss_coeff), ("cond_coeff", self.cond_coeff)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        for (name, v) in [
            ("inlet_temp", self.inlet_temp),
            ("ambient_temp", self.ambient_temp),
            ("max_temp", self.max_temp),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if self.heater_layer >= self.n_layers {
            return bad(format!(
                "heater_layer {} out of range for {} layers",
                self.heater_layer, self.n_layers
            ));
        }
        if self.inlet_temp >= self.max_temp {
            return bad("inlet_temp must be below max_temp".into());
        }
        // Ambient exchange outside [inlet, max] would push layers out of range.
        if self.ambient_temp < self.inlet_temp || self.ambient_temp > self.max_temp {
            return bad("ambient_temp must lie within [inlet_temp, max_temp]".into());
        }
        let neighbours = if self.n_layers > 1 { 2.0 } else { 0.0 };
        let courant = self.dt * (neighbours * self.cond_coeff + self.loss_coeff)
            / (self.layer_heat_capacity_kj() * 1000.0);
        if courant > 1.0 {
            return bad(format!(
                "conduction/loss coefficients violate the explicit stability bound (ratio {courant:.3} > 1)"
            ));
        }
        Ok(())
    }

    pub fn layer_volume(&self) -> f64 {
        self.volume_total / self.n_layers as f64
    }

    /// kJ/K
    pub fn layer_heat_capacity_kj(&self) -> f64 {
        self.layer_volume() * self.density * self.specific_heat
    }

    /// Nominal electrical energy of one full heating step, kWh.
    pub fn step_heater_energy_kwh(&self) -> f64 {
        self.heater_power * self.dt / KJ_PER_KWH
    }

    pub fn steps_per_day(&self) -> usize {
        (86_400.0 / self.dt).round().max(1.0) as usize
    }

    pub fn uniform_state(&self, temp: f64) -> VesselState {
        VesselState {
            layer_temps: vec![temp; self.n_layers],
        }
    }
}

/// Per-layer temperatures, index 0 = bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct VesselState {
    pub layer_temps: Vec<f64>,
}

impl VesselState {
    pub fn new(layer_temps: Vec<f64>) -> Self {
        Self { layer_temps }
    }

    pub fn is_stratified(&self) -> bool {
        is_non_decreasing(&self.layer_temps)
    }

    pub fn top(&self) -> f64 {
        *self.layer_temps.last().expect("vessel has at least one layer")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInput {
    pub action: Action,
    /// Liters drawn during this step.
    pub draw_volume: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: VesselState,
    /// Electrical energy delivered by the element, kWh.
    pub energy_used: f64,
    /// Volume-weighted temperature of the drawn water; `None` without a draw.
    pub delivered_temp: Option<f64>,
    /// Net heat lost to ambient, kWh (negative when ambient warms the vessel).
    pub losses: f64,
}

/// Advances the vessel by one step.
pub fn step(state: &VesselState, params: &VesselParams, input: StepInput) -> Result<StepResult> {
    let n = params.n_layers;
    if state.layer_temps.len() != n {
        return Err(Error::InvalidInput(format!(
            "state has {} layers, params expect {n}",
            state.layer_temps.len()
        )));
    }
    if state.layer_temps.iter().any(|t| !t.is_finite()) {
        return Err(Error::Numeric("non-finite layer temperature".into()));
    }
    let draw = input.draw_volume;
    if !draw.is_finite() || draw < 0.0 {
        return Err(Error::InvalidInput(format!("draw_volume {draw} must be >= 0")));
    }
    if draw > params.volume_total {
        return Err(Error::InvalidInput(format!(
            "draw_volume {draw} L exceeds vessel volume {} L",
            params.volume_total
        )));
    }

    let mut temps = state.layer_temps.clone();

    let delivered_temp = if draw > 0.0 {
        Some(plug_flow_draw(&mut temps, params.layer_volume(), draw, params.inlet_temp))
    } else {
        None
    };

    let capacity = params.layer_heat_capacity_kj();
    let mut heat_kj = 0.0;
    let h = params.heater_layer;
    if input.action.is_on() && temps[h] < params.max_temp {
        let raised = temps[h] + params.heater_power * params.dt / capacity;
        let clipped = raised.min(params.max_temp);
        heat_kj = (clipped - temps[h]) * capacity;
        temps[h] = clipped;
    }

    let losses_kj = conduct_and_lose(&mut temps, params);

    let volumes = vec![params.layer_volume(); n];
    let temps = buoyancy_mix(&temps, &volumes);

    if temps.iter().any(|t| !t.is_finite()) {
        return Err(Error::Numeric("non-finite temperature after step".into()));
    }

    Ok(StepResult {
        next_state: VesselState { layer_temps: temps },
        energy_used: heat_kj / KJ_PER_KWH,
        delivered_temp,
        losses: losses_kj / KJ_PER_KWH,
    })
}

/// Displaces `draw` liters out of the top, returns the delivered temperature.
fn plug_flow_draw(temps: &mut [f64], layer_vol: f64, draw: f64, inlet: f64) -> f64 {
    let n = temps.len();
    let total = layer_vol * n as f64;
    let old = temps.to_vec();

    // Integral of temperature over the height interval [a, b] of the old
    // column, measured in liters from the bottom; below 0 is fresh inlet water.
    let integral = |a: f64, b: f64| -> f64 {
        let mut acc = 0.0;
        if a < 0.0 {
            acc += (b.min(0.0) - a) * inlet;
        }
        let lo = a.max(0.0);
        if b > lo {
            let first = ((lo / layer_vol).floor() as usize).min(n - 1);
            for (i, &t) in old.iter().enumerate().skip(first) {
                let seg_lo = i as f64 * layer_vol;
                if seg_lo >= b {
                    break;
                }
                let seg_hi = seg_lo + layer_vol;
                let overlap = seg_hi.min(b) - seg_lo.max(lo);
                if overlap > 0.0 {
                    acc += overlap * t;
                }
            }
        }
        acc
    };

    let delivered = integral(total - draw, total) / draw;
    for (j, t) in temps.iter_mut().enumerate() {
        let lo = j as f64 * layer_vol - draw;
        *t = integral(lo, lo + layer_vol) / layer_vol;
    }
    delivered
}

/// Explicit conduction and ambient exchange; returns heat lost in kJ.
fn conduct_and_lose(temps: &mut [f64], params: &VesselParams) -> f64 {
    if params.cond_coeff == 0.0 && params.loss_coeff == 0.0 {
        return 0.0;
    }
    let n = temps.len();
    let capacity_j = params.layer_heat_capacity_kj() * 1000.0;
    let old = temps.to_vec();
    let mut lost_j = 0.0;
    for i in 0..n {
        let mut flow_w = 0.0;
        if i > 0 {
            flow_w += params.cond_coeff * (old[i - 1] - old[i]);
        }
        if i + 1 < n {
            flow_w += params.cond_coeff * (old[i + 1] - old[i]);
        }
        let loss_w = params.loss_coeff * (old[i] - params.ambient_temp);
        lost_j += loss_w * params.dt;
        temps[i] = old[i] + (flow_w - loss_w) * params.dt / capacity_j;
    }
    lost_j / 1000.0
}

/// Merges inverted adjacent layers into their volume-weighted mean until the
/// profile is non-decreasing from bottom to top.
pub fn buoyancy_mix(layer_temps: &[f64], layer_volumes: &[f64]) -> Vec<f64> {
    if is_non_decreasing(layer_temps) {
        return layer_temps.to_vec();
    }
    pava_weighted(layer_temps, layer_volumes)
}

/// Energy stored above `ref_temp`, kWh.
pub fn energy_content(state: &VesselState, params: &VesselParams, ref_temp: f64) -> f64 {
    let capacity = params.layer_heat_capacity_kj();
    state
        .layer_temps
        .iter()
        .map(|t| capacity * (t - ref_temp))
        .sum::<f64>()
        / KJ_PER_KWH
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lossless(n: usize, volume: f64) -> VesselParams {
        VesselParams {
            n_layers: n,
            volume_total: volume,
            loss_coeff: 0.0,
            cond_coeff: 0.0,
            ..VesselParams::default()
        }
    }

    #[test]
    fn idle_lossless_vessel_is_a_fixed_point() {
        let params = lossless(2, 200.0);
        let state = VesselState::new(vec![50.0, 50.0]);
        let r = step(
            &state,
            &params,
            StepInput {
                action: Action::Off,
                draw_volume: 0.0,
            },
        )
        .unwrap();
        assert_eq!(r.next_state, state);
        assert_eq!(r.energy_used, 0.0);
        assert_eq!(r.delivered_temp, None);
    }

    #[test]
    fn single_layer_heating_matches_hand_balance() {
        let params = lossless(1, 100.0);
        let r = step(
            &VesselState::new(vec![50.0]),
            &params,
            StepInput {
                action: Action::On,
                draw_volume: 0.0,
            },
        )
        .unwrap();
        let expected = 50.0 + 2160.0 / 418.6;
        assert!((r.next_state.layer_temps[0] - expected).abs() < 1e-12);
        assert!((r.next_state.layer_temps[0] - 55.16).abs() < 0.005);
        assert!((r.energy_used - 0.6).abs() < 1e-12);
    }

    #[test]
    fn plug_flow_displaces_top_layer() {
        let params = lossless(2, 100.0);
        let r = step(
            &VesselState::new(vec![10.0, 60.0]),
            &params,
            StepInput {
                action: Action::Off,
                draw_volume: 50.0,
            },
        )
        .unwrap();
        assert_eq!(r.delivered_temp, Some(60.0));
        assert_eq!(r.next_state.layer_temps, vec![10.0, 10.0]);
    }

    #[test]
    fn partial_draw_spans_layers() {
        let params = lossless(2, 100.0);
        let r = step(
            &VesselState::new(vec![20.0, 60.0]),
            &params,
            StepInput {
                action: Action::Off,
                draw_volume: 75.0,
            },
        )
        .unwrap();
        // 50 L at 60 plus 25 L at 20.
        assert!((r.delivered_temp.unwrap() - (50.0 * 60.0 + 25.0 * 20.0) / 75.0).abs() < 1e-12);
        // Top layer: 25 L of old bottom + 25 L inlet; bottom: inlet.
        assert_eq!(r.next_state.layer_temps, vec![10.0, 15.0]);
    }

    #[test]
    fn thermostat_truncates_heat() {
        let params = lossless(1, 100.0);
        let r = step(
            &VesselState::new(vec![88.0]),
            &params,
            StepInput {
                action: Action::On,
                draw_volume: 0.0,
            },
        )
        .unwrap();
        assert_eq!(r.next_state.layer_temps, vec![90.0]);
        assert!((r.energy_used - 2.0 * 418.6 / 3600.0).abs() < 1e-12);
    }

    #[test]
    fn heater_at_cutoff_uses_no_energy() {
        let params = lossless(1, 100.0);
        let r = step(
            &VesselState::new(vec![90.0]),
            &params,
            StepInput {
                action: Action::On,
                draw_volume: 0.0,
            },
        )
        .unwrap();
        assert_eq!(r.energy_used, 0.0);
    }

    #[test]
    fn oversized_draw_is_rejected() {
        let params = VesselParams::default();
        let err = step(
            &params.uniform_state(50.0),
            &params,
            StepInput {
                action: Action::Off,
                draw_volume: 201.0,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn non_finite_state_is_numeric_error() {
        let params = VesselParams::default();
        let mut state = params.uniform_state(50.0);
        state.layer_temps[3] = f64::NAN;
        let err = step(
            &state,
            &params,
            StepInput {
                action: Action::Off,
                draw_volume: 0.0,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn buoyancy_examples() {
        let eq = [1.0, 1.0, 1.0];
        assert_eq!(buoyancy_mix(&[50.0, 60.0, 70.0], &eq), vec![50.0, 60.0, 70.0]);
        assert_eq!(buoyancy_mix(&[70.0, 50.0, 60.0], &eq), vec![60.0, 60.0, 60.0]);
        assert_eq!(buoyancy_mix(&[50.0, 70.0, 60.0], &eq), vec![50.0, 65.0, 65.0]);
    }

    #[test]
    fn energy_content_examples() {
        let params = VesselParams {
            n_layers: 2,
            volume_total: 200.0,
            ..VesselParams::default()
        };
        let zero = energy_content(&params.uniform_state(10.0), &params, 10.0);
        assert_eq!(zero, 0.0);
        let e = energy_content(&VesselState::new(vec![20.0, 60.0]), &params, 10.0);
        assert!((e - 25116.0 / 3600.0).abs() < 1e-12);
        assert!((e - 6.977).abs() < 5e-4);
        let doubled = energy_content(&VesselState::new(vec![30.0, 110.0]), &params, 10.0);
        assert!((doubled - 2.0 * e).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(VesselParams::default().validate().is_ok());
        let unstable = VesselParams {
            cond_coeff: 1000.0,
            ..VesselParams::default()
        };
        assert!(unstable.validate().is_err());
        let bad_heater = VesselParams {
            heater_layer: 10,
            ..VesselParams::default()
        };
        assert!(bad_heater.validate().is_err());
        let inverted = VesselParams {
            inlet_temp: 95.0,
            ..VesselParams::default()
        };
        assert!(inverted.validate().is_err());
        assert_eq!(VesselParams::default().steps_per_day(), 96);
    }
}
