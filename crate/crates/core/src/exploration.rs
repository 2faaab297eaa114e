//! State-space visitation, coverage and exploration policies.
//!
//! The visited space is the product of per-sensor temperature bins and the
//! draw-volume class of the step taken from that observation. Targeted
//! exploration scores candidate actions by a count-based novelty bonus
//! `1 / sqrt(n + 1)` of the bin their predicted next observation lands in.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;

use crate::binning::{TempAxis, VolumeClasses};
use crate::error::{Error, Result};
use crate::sensing::Observation;
use crate::vessel::Action;

/// Upper bound on the number of bins [`assign_targets`] will deal.
pub const MAX_DEALT_BINS: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq)]
pub struct StateBinning {
    pub temps: TempAxis,
    pub volumes: VolumeClasses,
    pub sensor_count: usize,
}

impl StateBinning {
    pub fn new(temps: TempAxis, volumes: VolumeClasses, sensor_count: usize) -> Result<Self> {
        let b = Self {
            temps,
            volumes,
            sensor_count,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        self.temps.validate()?;
        self.volumes.validate()?;
        if self.sensor_count == 0 {
            return Err(Error::InvalidParams("state binning needs at least one sensor".into()));
        }
        if self.total_bins_checked().is_none() {
            return Err(Error::InvalidParams("state binning has too many bins".into()));
        }
        Ok(())
    }

    fn total_bins_checked(&self) -> Option<u64> {
        let per_axis = self.temps.len() as u64;
        let mut total = self.volumes.len() as u64;
        for _ in 0..self.sensor_count {
            total = total.checked_mul(per_axis)?;
        }
        Some(total)
    }

    pub fn total_bins(&self) -> u64 {
        self.total_bins_checked().unwrap_or(u64::MAX)
    }

    /// Absolute temperature-axis indices of each sensor reading.
    pub fn temp_indices(&self, obs: &Observation) -> Vec<i64> {
        obs.sensor_temps
            .iter()
            .map(|&t| self.temps.absolute_index(t))
            .collect()
    }
}

/// Bin of an observation together with the draw class of its step.
pub fn bin_of(obs: &Observation, draw_volume: f64, binning: &StateBinning) -> u64 {
    let axis = binning.temps.len() as u64;
    let temp_part = obs
        .sensor_temps
        .iter()
        .fold(0u64, |acc, &t| acc * axis + u64::from(binning.temps.index(t)));
    temp_part * binning.volumes.len() as u64 + u64::from(binning.volumes.class_of(draw_volume))
}

/// Read access to visit counts.
pub trait CountLookup {
    fn count(&self, bin: u64) -> u64;
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VisitCounts {
    counts: BTreeMap<u64, u64>,
    total_visits: u64,
}

impl VisitCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, bin: u64) {
        *self.counts.entry(bin).or_insert(0) += 1;
        self.total_visits += 1;
    }

    pub fn merge(&mut self, other: &VisitCounts) {
        for (&bin, &n) in &other.counts {
            *self.counts.entry(bin).or_insert(0) += n;
        }
        self.total_visits += other.total_visits;
    }

    pub fn total_visits(&self) -> u64 {
        self.total_visits
    }

    pub fn visited_bins(&self) -> usize {
        self.counts.values().filter(|&&n| n > 0).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&b, &n)| (b, n))
    }

    pub fn clear(&mut self) {
        self.counts.clear();
        self.total_visits = 0;
    }
}

impl FromIterator<(u64, u64)> for VisitCounts {
    fn from_iter<I: IntoIterator<Item = (u64, u64)>>(iter: I) -> Self {
        let mut c = VisitCounts::new();
        for (bin, n) in iter {
            *c.counts.entry(bin).or_insert(0) += n;
            c.total_visits += n;
        }
        c
    }
}

impl CountLookup for VisitCounts {
    fn count(&self, bin: u64) -> u64 {
        self.counts.get(&bin).copied().unwrap_or(0)
    }
}

/// A shared snapshot plus an agent's private counts since the snapshot.
#[derive(Debug, Clone, Copy)]
pub struct LayeredCounts<'a> {
    pub base: &'a VisitCounts,
    pub overlay: &'a VisitCounts,
}

impl CountLookup for LayeredCounts<'_> {
    fn count(&self, bin: u64) -> u64 {
        self.base.count(bin) + self.overlay.count(bin)
    }
}

/// Fraction of bins visited at least once.
pub fn coverage(counts: &VisitCounts, binning: &StateBinning) -> Result<f64> {
    let total = binning.total_bins();
    if total == 0 {
        return Err(Error::InvalidParams("binning has zero bins".into()));
    }
    Ok(counts.visited_bins() as f64 / total as f64)
}

pub fn novelty_bonus(counts: &impl CountLookup, bin: u64) -> f64 {
    1.0 / ((counts.count(bin) + 1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExplorationKind {
    None,
    EpsGreedy(f64),
    Targeted(f64),
}

impl ExplorationKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ExplorationKind::EpsGreedy(eps) if !(0.0..=1.0).contains(&eps) => Err(
                Error::InvalidParams(format!("epsilon {eps} outside [0, 1]")),
            ),
            ExplorationKind::Targeted(w) if !(w >= 0.0 && w.is_finite()) => Err(
                Error::InvalidParams(format!("bonus weight {w} must be >= 0")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplorationPolicy {
    pub kind: ExplorationKind,
    /// Novelty is looked up in fleet-pooled counts rather than the agent's own.
    pub shared_counts: bool,
}

/// Planner output for the two candidate first actions.
#[derive(Debug, Clone)]
pub struct Candidates {
    /// Predicted next observation, indexed by [`Action::index`].
    pub next_obs: [Option<Observation>; 2],
    /// Best planning cost starting with each action.
    pub costs: [f64; 2],
    /// Whether deviating from the greedy action is comfort-safe.
    pub deviation_allowed: bool,
}

impl Candidates {
    fn rank(&self, action: Action) -> f64 {
        let best = self.costs[0].min(self.costs[1]);
        if self.costs[action.index()] <= best + 1e-9 {
            0.0
        } else {
            1.0
        }
    }
}

/// Picks the executed action from the planner's greedy choice.
///
/// `targets` is the agent's coordinator-assigned bin set; a candidate landing
/// in it earns its novelty bonus twice.
pub fn choose_action<R: Rng + ?Sized>(
    policy: &ExplorationKind,
    greedy: Action,
    candidates: &Candidates,
    counts: &impl CountLookup,
    targets: Option<&HashSet<u64>>,
    binning: &StateBinning,
    rng: &mut R,
) -> Result<Action> {
    match *policy {
        ExplorationKind::None => Ok(greedy),
        ExplorationKind::EpsGreedy(eps) => {
            let explore = rng.random::<f64>() < eps;
            let random = Action::from(rng.random::<bool>());
            if explore && candidates.deviation_allowed {
                Ok(random)
            } else {
                Ok(greedy)
            }
        }
        ExplorationKind::Targeted(weight) => {
            if !candidates.deviation_allowed || weight == 0.0 {
                return Ok(greedy);
            }
            let score = |a: Action| -> Result<f64> {
                let next = candidates.next_obs[a.index()].as_ref().ok_or_else(|| {
                    Error::InvalidInput("missing candidate prediction".into())
                })?;
                // The next draw is not known yet, so novelty is averaged over
                // the draw classes the predicted temperatures can meet.
                let base = bin_of(next, 0.0, binning);
                let classes = binning.volumes.len() as u64;
                let mut bonus = 0.0;
                for bin in base..base + classes {
                    let boost = match targets {
                        Some(t) if t.contains(&bin) => 2.0,
                        _ => 1.0,
                    };
                    bonus += novelty_bonus(counts, bin) * boost;
                }
                Ok(-candidates.rank(a) + weight * bonus / classes as f64)
            };
            let other = greedy.toggled();
            if score(other)? > score(greedy)? {
                Ok(other)
            } else {
                Ok(greedy)
            }
        }
    }
}

/// Deals all bins, least visited first (ties by bin id), round-robin to
/// `n_agents` agents.
pub fn assign_targets(
    pooled: &VisitCounts,
    binning: &StateBinning,
    n_agents: usize,
) -> Result<Vec<Vec<u64>>> {
    if n_agents == 0 {
        return Err(Error::InvalidInput("n_agents must be at least 1".into()));
    }
    let total = binning.total_bins();
    if total > MAX_DEALT_BINS {
        return Err(Error::InvalidParams(format!(
            "{total} bins exceed the dealing limit {MAX_DEALT_BINS}"
        )));
    }
    let mut order: Vec<(u64, u64)> = (0..total).map(|b| (pooled.count(b), b)).collect();
    order.sort_unstable();
    let mut lists = vec![Vec::with_capacity(order.len() / n_agents + 1); n_agents];
    for (i, (_, bin)) in order.into_iter().enumerate() {
        lists[i % n_agents].push(bin);
    }
    Ok(lists)
}
