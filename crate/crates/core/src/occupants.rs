//! Stochastic domestic hot-water draw generator.
//!
//! Draw occurrence is an inhomogeneous Bernoulli process over time-of-day
//! slots. A per-day activity multiplier follows a log-normal AR(1) process
//! with unit mean, which gives day-to-day autocorrelation; households sharing
//! an archetype share a time-of-day template, which gives cross-correlation.
//! Draw volumes are log-normal.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::error::{Error, Result};

/// Maximum relative per-household scaling of the archetype template.
pub const INTENSITY_JITTER: f64 = 0.2;
/// Maximum relative per-household scaling of the mean draw volume.
pub const VOLUME_JITTER: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Archetype {
    MorningPeak,
    EveningPeak,
    Flat,
    Family,
}

impl Archetype {
    pub const ALL: [Archetype; 4] = [
        Archetype::MorningPeak,
        Archetype::EveningPeak,
        Archetype::Flat,
        Archetype::Family,
    ];

    /// Shared time-of-day draw probability per step.
    pub fn template(self, steps_per_day: usize) -> Vec<f64> {
        let hour = |s: usize| (s as f64 + 0.5) * 24.0 / steps_per_day as f64;
        let bump = |h: f64, centre: f64, width: f64| (-0.5 * ((h - centre) / width).powi(2)).exp();
        // Probabilities are per 15-minute slot; rescale for other resolutions.
        let scale = 96.0 / steps_per_day as f64;
        (0..steps_per_day)
            .map(|s| {
                let h = hour(s);
                let night = if (1.0..5.5).contains(&h) { 0.005 } else { 0.02 };
                let p = match self {
                    Archetype::Flat => 0.05,
                    Archetype::MorningPeak => night + 0.25 * bump(h, 7.0, 1.0),
                    Archetype::EveningPeak => night + 0.22 * bump(h, 19.5, 1.5),
                    Archetype::Family => {
                        night + 0.2 * bump(h, 7.5, 1.0) + 0.15 * bump(h, 19.0, 2.0)
                    }
                };
                (p * scale).clamp(0.0, 1.0)
            })
            .collect()
    }

    /// Mean draw volume in liters for the archetype.
    pub fn mean_draw_volume(self) -> f64 {
        match self {
            Archetype::Flat => 20.0,
            Archetype::MorningPeak => 25.0,
            Archetype::EveningPeak => 28.0,
            Archetype::Family => 25.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Archetype::MorningPeak => "morning_peak",
            Archetype::EveningPeak => "evening_peak",
            Archetype::Flat => "flat",
            Archetype::Family => "family",
        }
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Archetype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "morning_peak" => Ok(Archetype::MorningPeak),
            "evening_peak" => Ok(Archetype::EveningPeak),
            "flat" => Ok(Archetype::Flat),
            "family" => Ok(Archetype::Family),
            other => Err(Error::UnknownArchetype(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdProfile {
    pub household_id: usize,
    /// Draw probability per step for each time-of-day slot.
    pub base_intensity: Vec<f64>,
    /// Liters.
    pub mean_draw_volume: f64,
    /// Log-scale standard deviation of draw volumes.
    pub volume_dispersion: f64,
    /// AR(1) coefficient of the daily activity process.
    pub activity_persistence: f64,
    /// Innovation standard deviation of the daily activity process.
    pub activity_noise_std: f64,
}

impl HouseholdProfile {
    pub fn steps_per_day(&self) -> usize {
        self.base_intensity.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_intensity.is_empty() {
            return Err(Error::InvalidParams("base_intensity is empty".into()));
        }
        if self
            .base_intensity
            .iter()
            .any(|p| !(0.0..=1.0).contains(p))
        {
            return Err(Error::InvalidParams("base_intensity entries must lie in [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.activity_persistence) {
            return Err(Error::InvalidParams("activity_persistence must lie in [0, 1)".into()));
        }
        if !(self.activity_noise_std >= 0.0 && self.activity_noise_std.is_finite()) {
            return Err(Error::InvalidParams("activity_noise_std must be >= 0".into()));
        }
        if !(self.mean_draw_volume > 0.0 && self.mean_draw_volume.is_finite()) {
            return Err(Error::InvalidParams("mean_draw_volume must be > 0".into()));
        }
        if !(self.volume_dispersion >= 0.0 && self.volume_dispersion.is_finite()) {
            return Err(Error::InvalidParams("volume_dispersion must be >= 0".into()));
        }
        Ok(())
    }
}

/// One hot-water draw event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub step: usize,
    /// Liters, > 0.
    pub volume: f64,
}

/// Draw events with strictly increasing step indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DrawSeries {
    pub draws: Vec<Draw>,
}

impl DrawSeries {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn total_volume(&self) -> f64 {
        self.draws.iter().map(|d| d.volume).sum()
    }

    /// Per-step volumes for steps `0..n_steps` (zero where no draw occurs).
    pub fn to_dense(&self, n_steps: usize) -> Vec<f64> {
        let mut dense = vec![0.0; n_steps];
        for d in self.draws.iter().filter(|d| d.step < n_steps) {
            dense[d.step] += d.volume;
        }
        dense
    }

    /// Total liters drawn in each of the first `n_days` days.
    pub fn daily_totals(&self, steps_per_day: usize, n_days: usize) -> Vec<f64> {
        let mut totals = vec![0.0; n_days];
        for d in &self.draws {
            let day = d.step / steps_per_day;
            if day < n_days {
                totals[day] += d.volume;
            }
        }
        totals
    }

    /// Draws before `end_step`.
    pub fn prefix(&self, end_step: usize) -> DrawSeries {
        DrawSeries {
            draws: self
                .draws
                .iter()
                .take_while(|d| d.step < end_step)
                .copied()
                .collect(),
        }
    }

    /// Writes `step_index,volume_l` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["step_index", "volume_l"])
            .map_err(|e| Error::csv(path, e))?;
        for d in &self.draws {
            w.write_record([d.step.to_string(), crate::harness::report::fmt_sig(d.volume)])
                .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Builds a household profile from its archetype template with seeded
/// per-household scaling.
pub fn make_profile(
    archetype: Archetype,
    household_id: usize,
    seed: u64,
    steps_per_day: usize,
) -> HouseholdProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let intensity_scale = 1.0 + INTENSITY_JITTER * rng.random_range(-1.0..=1.0);
    let volume_scale = 1.0 + VOLUME_JITTER * rng.random_range(-1.0..=1.0);
    let base_intensity = archetype
        .template(steps_per_day)
        .into_iter()
        .map(|p| (p * intensity_scale).clamp(0.0, 1.0))
        .collect();
    HouseholdProfile {
        household_id,
        base_intensity,
        mean_draw_volume: archetype.mean_draw_volume() * volume_scale,
        volume_dispersion: 0.6,
        activity_persistence: 0.7,
        activity_noise_std: 0.4,
    }
}

/// Samples `n_days` of draws for one household.
pub fn generate_draws(profile: &HouseholdProfile, n_days: usize, seed: u64) -> Result<DrawSeries> {
    profile.validate()?;
    if n_days == 0 {
        return Err(Error::InvalidInput("n_days must be at least 1".into()));
    }
    let spd = profile.steps_per_day();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let phi = profile.activity_persistence;
    let sigma = profile.activity_noise_std;
    let stationary_var = sigma * sigma / (1.0 - phi * phi);
    let innovation = Normal::new(0.0, 1.0).expect("unit normal");
    let dispersion = profile.volume_dispersion;
    let volume_dist = LogNormal::new(
        profile.mean_draw_volume.ln() - 0.5 * dispersion * dispersion,
        dispersion,
    )
    .map_err(|e| Error::InvalidParams(format!("volume distribution: {e}")))?;

    let mut activity = stationary_var.sqrt() * innovation.sample(&mut rng);
    let mut draws = Vec::new();
    for day in 0..n_days {
        if day > 0 {
            activity = phi * activity + sigma * innovation.sample(&mut rng);
        }
        let multiplier = (activity - 0.5 * stationary_var).exp();
        for (slot, &base) in profile.base_intensity.iter().enumerate() {
            let p = (multiplier * base).clamp(0.0, 1.0);
            let u: f64 = rng.random();
            if u < p {
                let volume = volume_dist.sample(&mut rng);
                if volume > 0.0 && volume.is_finite() {
                    draws.push(Draw {
                        step: day * spd + slot,
                        volume,
                    });
                }
            }
        }
    }
    Ok(DrawSeries { draws })
}

/// Sample autocorrelation of `series` at `lag`.
pub fn lag_autocorrelation(series: &[f64], lag: usize) -> Result<f64> {
    if series.len() <= lag {
        return Err(Error::InvalidInput(format!(
            "series of length {} too short for lag {lag}",
            series.len()
        )));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let denom: f64 = series.iter().map(|x| (x - mean).powi(2)).sum();
    if denom == 0.0 {
        return Err(Error::Undefined("zero-variance series".into()));
    }
    let num: f64 = series
        .iter()
        .zip(&series[lag..])
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum();
    Ok(num / denom)
}

/// Pearson correlation of two equal-length vectors.
pub fn pearson_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidInput("vectors must be non-empty and equal length".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Undefined("zero-variance vector".into()));
    }
    Ok(cov / (va.sqrt() * vb.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_template_is_constant() {
        let p = make_profile(Archetype::Flat, 3, 11, 96);
        assert!(p.base_intensity.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn profiles_are_deterministic() {
        let a = make_profile(Archetype::Family, 1, 99, 96);
        let b = make_profile(Archetype::Family, 1, 99, 96);
        assert_eq!(a, b);
    }

    #[test]
    fn same_archetype_differs_only_by_bounded_jitter() {
        let a = make_profile(Archetype::MorningPeak, 0, 1, 96);
        let b = make_profile(Archetype::MorningPeak, 1, 2, 96);
        let template = Archetype::MorningPeak.template(96);
        for ((x, y), t) in a.base_intensity.iter().zip(&b.base_intensity).zip(&template) {
            assert!((x - y).abs() <= 2.0 * INTENSITY_JITTER * t + 1e-15);
        }
    }

    #[test]
    fn unknown_archetype_errors() {
        assert!(matches!(
            "weekend".parse::<Archetype>(),
            Err(Error::UnknownArchetype(_))
        ));
        assert_eq!("Flat".parse::<Archetype>().unwrap(), Archetype::Flat);
    }

    #[test]
    fn zero_intensity_yields_no_draws() {
        let mut p = make_profile(Archetype::Flat, 0, 0, 96);
        p.base_intensity = vec![0.0; 96];
        assert!(generate_draws(&p, 30, 5).unwrap().is_empty());
    }

    #[test]
    fn draws_are_deterministic_and_ordered() {
        let p = make_profile(Archetype::Family, 2, 4, 96);
        let a = generate_draws(&p, 20, 8).unwrap();
        let b = generate_draws(&p, 20, 8).unwrap();
        assert_eq!(a, b);
        assert!(a.draws.windows(2).all(|w| w[0].step < w[1].step));
        assert!(a.draws.iter().all(|d| d.volume > 0.0));
    }

    #[test]
    fn flat_mean_count_matches_expectation() {
        let p = HouseholdProfile {
            household_id: 0,
            base_intensity: vec![0.1; 96],
            mean_draw_volume: 20.0,
            volume_dispersion: 0.5,
            activity_persistence: 0.0,
            activity_noise_std: 0.0,
        };
        let series = generate_draws(&p, 1000, 17).unwrap();
        let per_day = series.len() as f64 / 1000.0;
        let expected = 0.1 * 96.0;
        assert!((per_day - expected).abs() / expected < 0.05, "{per_day}");
    }

    #[test]
    fn autocorrelation_of_ramp() {
        let ramp: Vec<f64> = (1..=10).map(f64::from).collect();
        // Hand computation: 57.75 / 82.5.
        let r = lag_autocorrelation(&ramp, 1).unwrap();
        assert!((r - 0.7).abs() < 1e-12);
    }

    #[test]
    fn autocorrelation_errors() {
        assert!(matches!(
            lag_autocorrelation(&[3.0; 8], 1),
            Err(Error::Undefined(_))
        ));
        assert!(lag_autocorrelation(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn white_noise_has_small_autocorrelation() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let noise: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        assert!(lag_autocorrelation(&noise, 1).unwrap().abs() < 0.05);
    }

    #[test]
    fn persistent_activity_is_autocorrelated() {
        let p = make_profile(Archetype::Family, 0, 3, 96);
        assert!(p.activity_persistence > 0.5);
        let series = generate_draws(&p, 2000, 21).unwrap();
        let totals = series.daily_totals(96, 2000);
        assert!(lag_autocorrelation(&totals, 1).unwrap() > 0.3);
    }

    #[test]
    fn archetype_cross_correlation() {
        let a = make_profile(Archetype::MorningPeak, 0, 1, 96);
        let b = make_profile(Archetype::MorningPeak, 1, 2, 96);
        let c = make_profile(Archetype::EveningPeak, 2, 3, 96);
        let same = pearson_correlation(&a.base_intensity, &b.base_intensity).unwrap();
        let cross = pearson_correlation(&a.base_intensity, &c.base_intensity).unwrap();
        assert!(same > 0.3);
        assert!(cross < same);
    }
}
