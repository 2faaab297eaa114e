//! Tabular transition model learned from logged sensor data.
//!
//! Each transition is featurized, discretized into a bin, and the bin stores
//! the mean observed change `next_obs - obs` per sensor. Predictions add the
//! bin's mean change to the current observation; unvisited bins fall back to
//! the nearest populated bin. With domain knowledge enabled, predictions are
//! projected onto thermodynamic constraints (endpoint limits, stratified
//! profile, no standby warming).

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Mutex;

use crate::binning::{lower_inclusive_class, TempAxis, VolumeClasses};
use crate::error::{Error, Result};
use crate::isotonic::pava;
use crate::sensing::Observation;
use crate::vessel::Action;

/// Per-agent bookkeeping since the start of the latest reheat, i.e. the
/// latest off-to-on switch of the heater. While the heater stays on the
/// counters keep running, so during a reheat they measure its duration and
/// the first step of a reheat is told apart from a long standby.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AgentMemory {
    /// Steps since the latest reheat started.
    pub time_since_reheat: f64,
    /// Liters drawn since the latest reheat started.
    pub vol_since_reheat: f64,
    /// Whether the heater was on during the previous step.
    pub heating: bool,
}

impl AgentMemory {
    pub fn new(time_since_reheat: f64, vol_since_reheat: f64) -> Self {
        Self {
            time_since_reheat,
            vol_since_reheat,
            heating: false,
        }
    }

    /// Counters as seen by a step taking `action`: a reheat that starts
    /// with this step has zero elapsed time and volume.
    pub fn for_action(self, action: Action) -> Self {
        if action.is_on() && !self.heating {
            Self::default()
        } else {
            self
        }
    }

    /// Memory after a step with `action` and `draw_volume`.
    pub fn advance(self, action: Action, draw_volume: f64) -> Self {
        let m = self.for_action(action);
        Self {
            time_since_reheat: m.time_since_reheat + 1.0,
            vol_since_reheat: m.vol_since_reheat + draw_volume,
            heating: action.is_on(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSample {
    pub obs: Observation,
    pub action: Action,
    /// Liters drawn during the step.
    pub draw_volume: f64,
    /// Memory before the step.
    pub memory: AgentMemory,
    pub next_obs: Observation,
    pub household_id: usize,
}

impl TransitionSample {
    pub fn deltas(&self) -> impl Iterator<Item = f64> + '_ {
        self.next_obs
            .sensor_temps
            .iter()
            .zip(&self.obs.sensor_temps)
            .map(|(n, o)| n - o)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDataset {
    pub samples: Vec<TransitionSample>,
    pub sensor_count: usize,
}

impl TransitionDataset {
    pub fn new(sensor_count: usize) -> Self {
        Self {
            samples: Vec::new(),
            sensor_count,
        }
    }

    pub fn from_samples(sensor_count: usize, samples: Vec<TransitionSample>) -> Result<Self> {
        let mut ds = Self::new(sensor_count);
        ds.samples.reserve(samples.len());
        for s in samples {
            ds.push(s)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, sample: TransitionSample) -> Result<()> {
        for found in [sample.obs.sensor_count(), sample.next_obs.sensor_count()] {
            if found != self.sensor_count {
                return Err(Error::MixedSensorCount {
                    expected: self.sensor_count,
                    found,
                });
            }
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Writes `household_id, step, obs_*, action, draw_volume, next_obs_*,
    /// time_since_reheat, vol_since_reheat, heating` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        use crate::harness::report::fmt_sig;
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        let k = self.sensor_count;
        let mut header = vec!["household_id".to_string(), "step".to_string()];
        header.extend((0..k).map(|i| format!("obs_{i}")));
        header.push("action".into());
        header.push("draw_volume".into());
        header.extend((0..k).map(|i| format!("next_obs_{i}")));
        header.push("time_since_reheat".into());
        header.push("vol_since_reheat".into());
        header.push("heating".into());
        w.write_record(&header).map_err(|e| Error::csv(path, e))?;
        for s in &self.samples {
            let mut row = vec![s.household_id.to_string(), s.obs.step_index.to_string()];
            row.extend(s.obs.sensor_temps.iter().map(|&t| fmt_sig(t)));
            row.push(s.action.index().to_string());
            row.push(fmt_sig(s.draw_volume));
            row.extend(s.next_obs.sensor_temps.iter().map(|&t| fmt_sig(t)));
            row.push(fmt_sig(s.memory.time_since_reheat));
            row.push(fmt_sig(s.memory.vol_since_reheat));
            row.push(u8::from(s.memory.heating).to_string());
            w.write_record(&row).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a file written by [`TransitionDataset::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let headers = r.headers().map_err(|e| Error::csv(path, e))?.clone();
        let k = headers.iter().filter(|h| h.starts_with("obs_")).count();
        if k == 0 || headers.len() != 2 * k + 7 {
            return Err(Error::InvalidInput(format!(
                "{}: unexpected transition header",
                path.display()
            )));
        }
        let mut ds = Self::new(k);
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let num = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().map_err(|e| {
                    Error::InvalidInput(format!("{} row {}: {e}", path.display(), line + 2))
                })
            };
            let household_id = num(0)? as usize;
            let step = num(1)? as usize;
            let obs: Vec<f64> = (0..k).map(|i| num(2 + i)).collect::<Result<_>>()?;
            let action = Action::from(num(2 + k)? != 0.0);
            let draw_volume = num(3 + k)?;
            let next: Vec<f64> = (0..k).map(|i| num(4 + k + i)).collect::<Result<_>>()?;
            let memory = AgentMemory {
                heating: num(6 + 2 * k)? != 0.0,
                ..AgentMemory::new(num(4 + 2 * k)?, num(5 + 2 * k)?)
            };
            ds.push(TransitionSample {
                obs: Observation::new(obs, step),
                action,
                draw_volume,
                memory,
                next_obs: Observation::new(next, step + 1),
                household_id,
            })?;
        }
        Ok(ds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConstraintFlags {
    pub endpoint_clamp: bool,
    pub monotone_profile: bool,
    pub standby_non_increasing: bool,
}

impl ConstraintFlags {
    pub fn all() -> Self {
        Self {
            endpoint_clamp: true,
            monotone_profile: true,
            standby_non_increasing: true,
        }
    }

    pub fn any(&self) -> bool {
        self.endpoint_clamp || self.monotone_profile || self.standby_non_increasing
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KnowledgeConfig {
    pub enabled: bool,
    pub engineered_features: bool,
    pub constraints: ConstraintFlags,
}

impl KnowledgeConfig {
    pub fn off() -> Self {
        Self::default()
    }

    /// Engineered features plus every constraint.
    pub fn full() -> Self {
        Self {
            enabled: true,
            engineered_features: true,
            constraints: ConstraintFlags::all(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.enabled && (self.constraints.any() || self.engineered_features) {
            return Err(Error::InvalidParams(
                "knowledge features/constraints require knowledge to be enabled".into(),
            ));
        }
        Ok(())
    }

    fn uses_engineered(&self) -> bool {
        self.enabled && self.engineered_features
    }
}

/// Feature vector: sensor temps, action, draw volume, and with engineered
/// features also time since reheat, volume since reheat and mean sensor temp.
pub fn featurize(
    obs: &Observation,
    action: Action,
    draw_volume: f64,
    knowledge: &KnowledgeConfig,
    memory: AgentMemory,
) -> Vec<f64> {
    let mut f = Vec::with_capacity(obs.sensor_count() + 5);
    f.extend_from_slice(&obs.sensor_temps);
    f.push(action.as_f64());
    f.push(draw_volume);
    if knowledge.uses_engineered() {
        let memory = memory.for_action(action);
        f.push(memory.time_since_reheat);
        f.push(memory.vol_since_reheat);
        f.push(obs.mean());
    }
    f
}

/// Discretization of the feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBinning {
    pub temps: TempAxis,
    pub volumes: VolumeClasses,
    /// Lower-inclusive edges for time since reheat, volume since reheat and
    /// mean sensor temperature.
    pub engineered_edges: [Vec<f64>; 3],
}

impl FeatureBinning {
    pub const ENGINEERED_BINS: usize = 4;

    /// 5 °C temperature bins over `[t_min, t_max]`, default volume classes and
    /// fixed engineered edges.
    pub fn new(t_min: f64, t_max: f64) -> Self {
        Self {
            temps: TempAxis {
                width: 5.0,
                min: t_min,
                max: t_max,
            },
            volumes: VolumeClasses::default(),
            engineered_edges: [
                vec![4.0, 16.0, 48.0],
                vec![20.0, 60.0, 120.0],
                vec![40.0, 50.0, 60.0],
            ],
        }
    }

    /// Replaces the engineered-feature edges with the sample quartiles of
    /// `data` (duplicate edges are dropped).
    pub fn with_engineered_quantiles(mut self, data: &TransitionDataset) -> Self {
        if data.is_empty() {
            return self;
        }
        let mut columns: [Vec<f64>; 3] = [
            Vec::with_capacity(data.len()),
            Vec::with_capacity(data.len()),
            Vec::with_capacity(data.len()),
        ];
        for s in &data.samples {
            let memory = s.memory.for_action(s.action);
            columns[0].push(memory.time_since_reheat);
            columns[1].push(memory.vol_since_reheat);
            columns[2].push(s.obs.mean());
        }
        for (edges, col) in self.engineered_edges.iter_mut().zip(columns.iter_mut()) {
            col.sort_by(f64::total_cmp);
            let mut q: Vec<f64> = (1..Self::ENGINEERED_BINS)
                .map(|i| {
                    let pos = i * (col.len() - 1) / Self::ENGINEERED_BINS;
                    col[pos]
                })
                .collect();
            q.dedup();
            // A lowest edge at the minimum would leave class 0 empty.
            if q.first() == col.first() && q.len() > 1 {
                q.remove(0);
            }
            *edges = q;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.temps.validate()?;
        self.volumes.validate()?;
        for edges in &self.engineered_edges {
            if edges.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParams(
                    "engineered edges must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }

    fn radices(&self, sensor_count: usize, engineered: bool) -> Vec<u32> {
        let mut r = vec![self.temps.len() as u32; sensor_count];
        r.push(2);
        r.push(self.volumes.len() as u32);
        if engineered {
            r.extend(self.engineered_edges.iter().map(|e| e.len() as u32 + 1));
        }
        r
    }

    /// Per-feature bin indices of a feature vector produced by [`featurize`].
    pub fn indices(&self, features: &[f64], sensor_count: usize) -> Vec<u32> {
        let mut idx = Vec::with_capacity(features.len());
        for &t in &features[..sensor_count] {
            idx.push(self.temps.index(t));
        }
        idx.push(u32::from(features[sensor_count] != 0.0));
        idx.push(self.volumes.class_of(features[sensor_count + 1]));
        for (k, edges) in self.engineered_edges.iter().enumerate() {
            if let Some(&x) = features.get(sensor_count + 2 + k) {
                idx.push(lower_inclusive_class(edges, x));
            }
        }
        idx
    }
}

/// Equal to encoding `indices(featurize(..))`, without the intermediate
/// vectors; this sits on the planner's hot path.
fn feature_bin_id(
    b: &FeatureBinning,
    knowledge: &KnowledgeConfig,
    obs: &Observation,
    action: Action,
    draw_volume: f64,
    memory: AgentMemory,
) -> u64 {
    let temp_radix = b.temps.len() as u64;
    let mut id = obs
        .sensor_temps
        .iter()
        .fold(0u64, |acc, &t| acc * temp_radix + u64::from(b.temps.index(t)));
    id = id * 2 + u64::from(action.is_on());
    id = id * b.volumes.len() as u64 + u64::from(b.volumes.class_of(draw_volume));
    if knowledge.uses_engineered() {
        let memory = memory.for_action(action);
        let values = [memory.time_since_reheat, memory.vol_since_reheat, obs.mean()];
        for (edges, x) in b.engineered_edges.iter().zip(values) {
            id = id * (edges.len() as u64 + 1) + u64::from(lower_inclusive_class(edges, x));
        }
    }
    id
}

fn decode(mut id: u64, radices: &[u32]) -> Vec<u32> {
    let mut out = vec![0u32; radices.len()];
    for (slot, &r) in out.iter_mut().zip(radices).rev() {
        *slot = (id % u64::from(r)) as u32;
        id /= u64::from(r);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinStats {
    pub count: usize,
    /// Mean `next_obs - obs` per sensor.
    pub mean_delta: Vec<f64>,
}

/// Learned binned-mean transition model; immutable after [`fit`].
#[derive(Debug)]
pub struct TransitionModel {
    binning: FeatureBinning,
    knowledge: KnowledgeConfig,
    sensor_count: usize,
    radices: Vec<u32>,
    bins: BTreeMap<u64, BinStats>,
    /// Populated bins in ascending id order, with decoded indices.
    populated: Vec<(u64, Vec<u32>)>,
    /// Unpopulated bin id -> nearest populated bin id.
    fallback: Mutex<HashMap<u64, u64>>,
}

impl TransitionModel {
    pub fn binning(&self) -> &FeatureBinning {
        &self.binning
    }

    pub fn knowledge(&self) -> &KnowledgeConfig {
        &self.knowledge
    }

    pub fn sensor_count(&self) -> usize {
        self.sensor_count
    }

    pub fn bins(&self) -> &BTreeMap<u64, BinStats> {
        &self.bins
    }

    pub fn populated_bins(&self) -> usize {
        self.bins.len()
    }

    /// Size of the full discretized feature space.
    pub fn total_bins(&self) -> u64 {
        self.radices.iter().map(|&r| u64::from(r)).product()
    }

    pub fn bin_counts(&self) -> BTreeMap<u64, usize> {
        self.bins.iter().map(|(&id, s)| (id, s.count)).collect()
    }

    pub fn bin_id(&self, obs: &Observation, action: Action, draw_volume: f64, memory: AgentMemory) -> u64 {
        feature_bin_id(&self.binning, &self.knowledge, obs, action, draw_volume, memory)
    }

    /// Stats of the bin used for `id`: the bin itself when populated,
    /// otherwise the nearest populated bin by L1 distance on bin indices
    /// (ties resolved to the lowest id). The action is matched exactly
    /// whenever some bin with the same action is populated.
    fn resolve(&self, id: u64) -> Result<&BinStats> {
        if let Some(stats) = self.bins.get(&id) {
            return Ok(stats);
        }
        if self.populated.is_empty() {
            return Err(Error::NoPopulatedBins);
        }
        let cached = self.fallback.lock().expect("fallback cache poisoned").get(&id).copied();
        let target = match cached {
            Some(t) => t,
            None => {
                let query = decode(id, &self.radices);
                let action_axis = self.sensor_count;
                let mut best = (true, u64::MAX, u64::MAX);
                for (pid, idx) in &self.populated {
                    let dist: u64 = idx
                        .iter()
                        .zip(&query)
                        .map(|(&a, &b)| u64::from(a.abs_diff(b)))
                        .sum();
                    let other_action = idx[action_axis] != query[action_axis];
                    if (other_action, dist) < (best.0, best.1) {
                        best = (other_action, dist, *pid);
                    }
                }
                self.fallback
                    .lock()
                    .expect("fallback cache poisoned")
                    .insert(id, best.2);
                best.2
            }
        };
        Ok(&self.bins[&target])
    }

    /// Human-readable summary: bin totals followed by one line per populated bin.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "sensor_count = {}", self.sensor_count);
        let _ = writeln!(out, "total_bins = {}", self.total_bins());
        let _ = writeln!(out, "populated_bins = {}", self.populated_bins());
        let _ = writeln!(
            out,
            "samples = {}",
            self.bins.values().map(|s| s.count).sum::<usize>()
        );
        for (id, s) in &self.bins {
            let deltas: Vec<String> = s.mean_delta.iter().map(|d| format!("{d:.4}")).collect();
            let _ = writeln!(out, "bin {id}: count {} delta [{}]", s.count, deltas.join(", "));
        }
        out
    }
}

/// Fits per-bin mean deltas. Within each bin the deltas are summed in sorted
/// order, so the result does not depend on sample order.
pub fn fit(
    dataset: &TransitionDataset,
    knowledge: &KnowledgeConfig,
    binning: &FeatureBinning,
) -> Result<TransitionModel> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    knowledge.validate()?;
    binning.validate()?;
    let k = dataset.sensor_count;
    let radices = binning.radices(k, knowledge.uses_engineered());

    let mut grouped: HashMap<u64, Vec<Vec<f64>>> = HashMap::new();
    for s in &dataset.samples {
        let id = feature_bin_id(binning, knowledge, &s.obs, s.action, s.draw_volume, s.memory);
        let per_sensor = grouped.entry(id).or_insert_with(|| vec![Vec::new(); k]);
        for (acc, d) in per_sensor.iter_mut().zip(s.deltas()) {
            acc.push(d);
        }
    }

    let mut bins = BTreeMap::new();
    for (id, mut per_sensor) in grouped {
        let count = per_sensor[0].len();
        let mean_delta = per_sensor
            .iter_mut()
            .map(|v| {
                v.sort_by(f64::total_cmp);
                v.iter().sum::<f64>() / count as f64
            })
            .collect();
        bins.insert(id, BinStats { count, mean_delta });
    }
    let populated = bins.keys().map(|&id| (id, decode(id, &radices))).collect();

    Ok(TransitionModel {
        binning: binning.clone(),
        knowledge: *knowledge,
        sensor_count: k,
        radices,
        bins,
        populated,
        fallback: Mutex::new(HashMap::new()),
    })
}

/// Predicted next observation.
pub fn predict(
    model: &TransitionModel,
    obs: &Observation,
    action: Action,
    draw_volume: f64,
    memory: AgentMemory,
) -> Result<Observation> {
    if obs.sensor_count() != model.sensor_count {
        return Err(Error::MixedSensorCount {
            expected: model.sensor_count,
            found: obs.sensor_count(),
        });
    }
    let stats = model.resolve(model.bin_id(obs, action, draw_volume, memory))?;
    let raw: Vec<f64> = obs
        .sensor_temps
        .iter()
        .zip(&stats.mean_delta)
        .map(|(t, d)| t + d)
        .collect();
    let temps = if model.knowledge.enabled {
        let ctx = ConstraintContext {
            action,
            prev_obs: &obs.sensor_temps,
            inlet_temp: model.binning.temps.min,
            max_temp: model.binning.temps.max,
        };
        project_constraints(&raw, &model.knowledge, &ctx)
    } else {
        raw
    };
    Ok(Observation::new(temps, obs.step_index + 1))
}

#[derive(Debug, Clone, Copy)]
pub struct ConstraintContext<'a> {
    pub action: Action,
    pub prev_obs: &'a [f64],
    pub inlet_temp: f64,
    pub max_temp: f64,
}

/// Projects a predicted sensor profile onto the enabled constraints.
///
/// Applied in order: endpoint clamp to `[inlet_temp, max_temp]`; isotonic
/// (pool-adjacent-violators) projection onto non-decreasing profiles; with
/// the heater off, a cap at the previous reading. When the profile is also
/// constrained monotone, the caps are replaced by their suffix minima so the
/// capped profile stays non-decreasing. The lower endpoint limit takes
/// precedence over the standby cap.
pub fn project_constraints(
    pred: &[f64],
    knowledge: &KnowledgeConfig,
    ctx: &ConstraintContext<'_>,
) -> Vec<f64> {
    let mut out = pred.to_vec();
    if !knowledge.enabled {
        return out;
    }
    let c = knowledge.constraints;
    if c.endpoint_clamp {
        for t in &mut out {
            *t = t.clamp(ctx.inlet_temp, ctx.max_temp);
        }
    }
    let monotone = c.monotone_profile && out.len() >= 2;
    if monotone {
        out = pava(&out);
    }
    if c.standby_non_increasing && ctx.action == Action::Off {
        let mut caps = ctx.prev_obs.to_vec();
        if monotone {
            for i in (0..caps.len().saturating_sub(1)).rev() {
                caps[i] = caps[i].min(caps[i + 1]);
            }
        }
        for (t, cap) in out.iter_mut().zip(&caps) {
            *t = t.min(*cap);
        }
        if c.endpoint_clamp {
            for t in &mut out {
                *t = t.max(ctx.inlet_temp);
            }
        }
    }
    out
}

/// Concatenates datasets, keeping each sample's household id.
pub fn pool(datasets: &[&TransitionDataset]) -> Result<TransitionDataset> {
    let first = datasets.first().ok_or(Error::EmptyDataset)?;
    let k = first.sensor_count;
    let mut out = TransitionDataset::new(k);
    out.samples.reserve(datasets.iter().map(|d| d.len()).sum());
    for d in datasets {
        if d.sensor_count != k {
            return Err(Error::MixedSensorCount {
                expected: k,
                found: d.sensor_count,
            });
        }
        out.samples.extend(d.samples.iter().cloned());
    }
    Ok(out)
}

/// Mean absolute one-step prediction error over samples and sensors, °C.
pub fn evaluate_mae(model: &TransitionModel, heldout: &TransitionDataset) -> Result<f64> {
    if heldout.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    let mut n = 0usize;
    for s in &heldout.samples {
        let pred = predict(model, &s.obs, s.action, s.draw_volume, s.memory)?;
        for (p, a) in pred.sensor_temps.iter().zip(&s.next_obs.sensor_temps) {
            total += (p - a).abs();
            n += 1;
        }
    }
    Ok(total / n as f64)
}
