#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tankfleet::isotonic::pava;
use tankfleet::model_learning::{
    fit, predict, AgentMemory, FeatureBinning, KnowledgeConfig, TransitionDataset, TransitionSample,
};
use tankfleet::sensing::Observation;
use tankfleet::vessel::{energy_content, Action, StepInput, StepResult, VesselParams, VesselState};

pub const KJ_PER_KWH: f64 = 3600.0;

/// Random but valid vessel parameters; `lossless` zeroes both coefficients.
pub fn random_params<R: Rng>(rng: &mut R, lossless: bool) -> VesselParams {
    let n_layers = rng.random_range(1..=12);
    VesselParams {
        n_layers,
        volume_total: rng.random_range(50.0..300.0),
        heater_power: rng.random_range(0.5..4.0),
        heater_layer: rng.random_range(0..n_layers),
        inlet_temp: rng.random_range(5.0..15.0),
        ambient_temp: rng.random_range(10.0..25.0),
        max_temp: rng.random_range(70.0..95.0),
        loss_coeff: if lossless { 0.0 } else { rng.random_range(0.0..2.0) },
        cond_coeff: if lossless { 0.0 } else { rng.random_range(0.0..5.0) },
        specific_heat: 4.186,
        density: 1.0,
        dt: rng.random_range(60.0..1800.0),
    }
}

/// Random stratified state between the inlet and thermostat temperatures.
pub fn random_state<R: Rng>(rng: &mut R, p: &VesselParams) -> VesselState {
    let mut temps: Vec<f64> = (0..p.n_layers)
        .map(|_| rng.random_range(p.inlet_temp..p.max_temp))
        .collect();
    temps.sort_by(f64::total_cmp);
    VesselState::new(temps)
}

pub fn random_input<R: Rng>(rng: &mut R, p: &VesselParams) -> StepInput {
    let draw_volume = if rng.random::<f64>() < 0.4 {
        0.0
    } else {
        rng.random_range(0.0..p.volume_total)
    };
    StepInput {
        action: Action::from(rng.random::<bool>()),
        draw_volume,
    }
}

/// Residual of the per-step energy balance and the largest energy involved, kWh.
pub fn energy_residual(
    p: &VesselParams,
    prev: &VesselState,
    input: &StepInput,
    res: &StepResult,
) -> (f64, f64) {
    let (before, after) = (energy_content(prev, p, 0.0), energy_content(&res.next_state, p, 0.0));
    let stored = after - before;
    let mass_c = input.draw_volume * p.density * p.specific_heat / KJ_PER_KWH;
    let inflow = mass_c * p.inlet_temp;
    let outflow = mass_c * res.delivered_temp.unwrap_or(0.0);
    let rhs = res.energy_used + inflow - outflow - res.losses;
    // The stored change is a difference of two contents, so rounding scales
    // with the contents themselves.
    let scale = [before, after, res.energy_used, inflow, outflow, res.losses]
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    ((stored - rhs).abs(), scale)
}

pub fn sample(obs: Vec<f64>, action: Action, draw: f64, next: Vec<f64>) -> TransitionSample {
    TransitionSample {
        obs: Observation::new(obs, 0),
        action,
        draw_volume: draw,
        memory: AgentMemory::default(),
        next_obs: Observation::new(next, 1),
        household_id: 0,
    }
}

/// Least-squares non-decreasing fit by enumerating every split of the
/// sequence into contiguous blocks and keeping the best admissible one.
pub fn isotonic_brute_force(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let mut fitted = Vec::with_capacity(n);
        let mut start = 0;
        for i in 0..n {
            let cut = i == n - 1 || mask & (1 << i) != 0;
            if cut {
                let block = &x[start..=i];
                let mean = block.iter().sum::<f64>() / block.len() as f64;
                fitted.extend(std::iter::repeat_n(mean, block.len()));
                start = i + 1;
            }
        }
        if fitted.windows(2).any(|w| w[0] > w[1] + 1e-12) {
            continue;
        }
        let sse: f64 = x.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().is_none_or(|(b, _)| sse < b - 1e-12) {
            best = Some((sse, fitted));
        }
    }
    best.expect("the all-pooled split is always admissible").1
}

/// Every vector of length `n` over `lo..=hi` in 1 °C steps.
pub fn grid(n: usize, lo: i32, hi: i32) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                (lo..=hi).map(move |t| {
                    let mut w = v.clone();
                    w.push(f64::from(t));
                    w
                })
            })
            .collect();
    }
    out
}

/// Bin key of the toy oracle: absolute 5 °C index and action.
pub fn toy_key(t: f64, a: Action) -> (i64, usize) {
    ((t / 5.0).floor() as i64, a.index())
}

/// Bin-mean prediction written from scratch: exact bin when populated,
/// otherwise the nearest populated bin preferring the same action, ties to
/// the lower temperature then the lower action.
pub fn toy_oracle(samples: &[(f64, Action, f64)], t: f64, a: Action) -> f64 {
    let mut bins: BTreeMap<(i64, usize), (f64, usize)> = BTreeMap::new();
    for &(x, act, next) in samples {
        let e = bins.entry(toy_key(x, act)).or_insert((0.0, 0));
        e.0 += next - x;
        e.1 += 1;
    }
    let (qt, qa) = toy_key(t, a);
    let key = bins
        .keys()
        .min_by_key(|&&(bt, ba)| (ba != qa, (bt - qt).unsigned_abs() + u64::from(ba != qa), bt, ba))
        .copied()
        .unwrap();
    let (sum, n) = bins[&key];
    t + sum / n as f64
}


/// Fits a random one-sensor toy dataset and compares every prediction on a
/// 1 °C query grid against [`toy_oracle`].
pub fn check_toy_dataset(seed: u64) -> Result<(), String> {
    let binning = FeatureBinning::new(10.0, 50.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=50);
    // Four temperature bins times two actions: at most eight populated.
    let raw: Vec<(f64, Action, f64)> = (0..n)
        .map(|_| {
            let t = 20.0 + f64::from(rng.random_range(0..40u32)) * 0.5;
            let d = f64::from(rng.random_range(-12..=12i32)) * 0.25;
            (t, Action::from(rng.random::<bool>()), t + d)
        })
        .collect();
    let ds = TransitionDataset::from_samples(
        1,
        raw.iter().map(|&(t, a, nx)| sample(vec![t], a, 0.0, vec![nx])).collect(),
    )
    .map_err(|e| e.to_string())?;
    let model = fit(&ds, &KnowledgeConfig::off(), &binning).map_err(|e| e.to_string())?;
    if model.populated_bins() > 8 {
        return Err(format!("seed {seed}: {} bins", model.populated_bins()));
    }
    for q in 0..40 {
        let t = 10.0 + f64::from(q);
        for a in Action::BOTH {
            let p = predict(&model, &Observation::new(vec![t], 0), a, 0.0, AgentMemory::default())
                .map_err(|e| e.to_string())?;
            let want = toy_oracle(&raw, t, a);
            if p.sensor_temps[0] != want {
                return Err(format!("seed {seed} t {t} {a:?}: {} vs {want}", p.sensor_temps[0]));
            }
        }
    }
    Ok(())
}

/// Compares `pava` with [`isotonic_brute_force`] on every sequence of length
/// 1 to 5 over `lo..=hi`; returns the number of sequences checked.
pub fn check_pava_grid(lo: i32, hi: i32) -> Result<usize, String> {
    let mut checked = 0;
    for n in 1..=5 {
        for x in grid(n, lo, hi) {
            let fast = pava(&x);
            let slow = isotonic_brute_force(&x);
            if fast.iter().zip(&slow).any(|(a, b)| (a - b).abs() > 1e-9) {
                return Err(format!("{x:?}: {fast:?} vs {slow:?}"));
            }
            checked += 1;
        }
    }
    Ok(checked)
}
