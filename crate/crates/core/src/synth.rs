//! Seeded synthetic soil-moisture series with labeled irrigation events and
//! injected anomalies.
//!
//! Irrigation events rise over one to three readings, hold briefly and then
//! decline in one of three shapes. Anomalies are placed at the planned day
//! offsets (moved by a few readings, drawn from the seed) and recorded with
//! exact labels. Each pattern owns an exclusive zone of readings around it so
//! labels never merge; irrigation onsets are drawn among the positions left
//! free.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::TimeDelta;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::ingest::render_csv;
use crate::kv::{self, parse_duration, KvError};
use crate::types::{
    parse_timestamp, AnalysisReport, AnomalyEvent, AnomalyType, IrrigationEvent, Percent, Sample,
    SeriesMeta, SoilMoistureSeries, Span, Timestamp, MOISTURE_MAX, MOISTURE_MIN,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("injection collision: {0}")]
    Collision(String),
    #[error("empty series")]
    EmptySeries,
    #[error(transparent)]
    Kv(#[from] KvError),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DeclineShape {
    /// Exponential decay.
    Gradual,
    /// Two drops a day apart.
    Stepwise,
    /// Fast linear fall.
    Sharp,
}

impl DeclineShape {
    pub const ALL: [DeclineShape; 3] = [DeclineShape::Gradual, DeclineShape::Stepwise, DeclineShape::Sharp];
}

impl fmt::Display for DeclineShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeclineShape::Gradual => "gradual",
            DeclineShape::Stepwise => "stepwise",
            DeclineShape::Sharp => "sharp",
        })
    }
}

impl FromStr for DeclineShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gradual" => Ok(DeclineShape::Gradual),
            "stepwise" => Ok(DeclineShape::Stepwise),
            "sharp" => Ok(DeclineShape::Sharp),
            other => Err(format!("unknown decline shape `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub probe: String,
    pub start: Timestamp,
    pub days: u32,
    pub interval: TimeDelta,
    pub base_moisture: f64,
    pub irrigation_count: usize,
    /// Shape per irrigation event, cycled when shorter than the count.
    pub decline_shapes: Vec<DeclineShape>,
    /// Anomaly type and approximate position in days from the start.
    pub anomaly_plan: Vec<(AnomalyType, f64)>,
    pub noise_sd: f64,
    pub seed: u64,
    /// Fraction of readings whose timestamp is delayed by up to two minutes.
    pub jitter_fraction: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            probe: "synthetic".into(),
            start: parse_timestamp("2023-07-01 00:00:00").expect("valid literal"),
            days: 7,
            interval: TimeDelta::minutes(15),
            base_moisture: 25.0,
            irrigation_count: 2,
            decline_shapes: vec![DeclineShape::Gradual],
            anomaly_plan: Vec::new(),
            noise_sd: 0.15,
            seed: 0,
            jitter_fraction: 0.0,
        }
    }
}

impl ScenarioSpec {
    /// Reads a scenario file. Keys: `probe`, `start`, `days`, `interval`,
    /// `base_moisture`, `irrigation_count`, `decline_shapes` (comma list),
    /// `noise_sd`, `seed`, `jitter_fraction` and `anomaly.N=<Type>@<day>`.
    pub fn from_kv(text: &str) -> Result<Self, SynthError> {
        let mut spec = Self::default();
        let mut plan: Vec<(u32, AnomalyType, f64)> = Vec::new();
        for e in kv::parse(text)? {
            match e.key.as_str() {
                "probe" => spec.probe = e.value.clone(),
                "start" => spec.start = parse_timestamp(&e.value).ok_or_else(|| e.bad_value())?,
                "days" => spec.days = e.parse()?,
                "interval" => spec.interval = parse_duration(&e.value).ok_or_else(|| e.bad_value())?,
                "base_moisture" => spec.base_moisture = e.parse()?,
                "irrigation_count" => spec.irrigation_count = e.parse()?,
                "decline_shapes" => {
                    spec.decline_shapes = e
                        .value
                        .split(',')
                        .map(|s| s.parse().map_err(|_| e.bad_value()))
                        .collect::<Result<_, _>>()?
                }
                "noise_sd" => spec.noise_sd = e.parse()?,
                "seed" => spec.seed = e.parse()?,
                "jitter_fraction" => spec.jitter_fraction = e.parse()?,
                key => {
                    let Some(n) = key.strip_prefix("anomaly.").and_then(|n| n.parse::<u32>().ok()) else {
                        return Err(e.unknown().into());
                    };
                    let (kind, day) = e.value.split_once('@').ok_or_else(|| e.bad_value())?;
                    let kind: AnomalyType = kind.parse().map_err(|_| e.bad_value())?;
                    let day: f64 = day.trim().parse().map_err(|_| e.bad_value())?;
                    plan.push((n, kind, day));
                }
            }
        }
        plan.sort_by_key(|p| p.0);
        spec.anomaly_plan = plan.into_iter().map(|(_, k, d)| (k, d)).collect();
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_kv(&self) -> String {
        let mut out = format!(
            "probe={}\nstart={}\ndays={}\ninterval={}s\nbase_moisture={}\nirrigation_count={}\ndecline_shapes={}\nnoise_sd={}\nseed={}\njitter_fraction={}\n",
            self.probe,
            crate::types::format_timestamp(&self.start),
            self.days,
            self.interval.num_seconds(),
            self.base_moisture,
            self.irrigation_count,
            self.decline_shapes.iter().map(ToString::to_string).collect::<Vec<_>>().join(","),
            self.noise_sd,
            self.seed,
            self.jitter_fraction,
        );
        for (i, (kind, day)) in self.anomaly_plan.iter().enumerate() {
            out.push_str(&format!("anomaly.{}={}@{}\n", i + 1, kind, day));
        }
        out
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.into()));
        if self.days == 0 {
            return bad("days must be at least 1");
        }
        if self.interval <= TimeDelta::zero() || self.interval > TimeDelta::hours(6) {
            return bad("interval must be between 1 s and 6 h");
        }
        if !(5.0..=55.0).contains(&self.base_moisture) {
            return bad("base_moisture must lie in [5, 55]");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd <= 5.0) {
            return bad("noise_sd must lie in [0, 5]");
        }
        if !(0.0..1.0).contains(&self.jitter_fraction) {
            return bad("jitter_fraction must lie in [0, 1)");
        }
        if self.irrigation_count > 0 && self.decline_shapes.is_empty() {
            return bad("decline_shapes is empty");
        }
        if let Some((k, d)) = self
            .anomaly_plan
            .iter()
            .find(|(_, d)| !(d.is_finite() && *d >= 0.0 && *d < f64::from(self.days)))
        {
            return Err(SynthError::InvalidSpec(format!("{k} at day {d} lies outside the series")));
        }
        if self.probe.is_empty() || self.probe.contains(['/', '\\', ',']) {
            return bad("probe must be a non-empty name without separators");
        }
        Ok(())
    }

    fn samples_per_day(&self) -> f64 {
        86_400.0 / self.interval.num_seconds() as f64
    }

    pub fn len(&self) -> usize {
        (f64::from(self.days) * self.samples_per_day()).round() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Injected labels for one generated series.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub irrigation: Vec<IrrigationEvent>,
    pub anomalies: Vec<AnomalyEvent>,
}

impl GroundTruth {
    /// The report a perfect analysis of the series would produce.
    pub fn to_report(&self) -> AnalysisReport {
        crate::detect::compose_report(self.irrigation.clone(), self.anomalies.clone())
    }
}

/// Generator output including the series as it was before anomalies were
/// injected, on the full regular grid.
#[derive(Clone, Debug)]
pub struct Generated {
    pub series: SoilMoistureSeries,
    pub truth: GroundTruth,
    pub pre_anomaly: Vec<Sample>,
}

pub fn generate(spec: &ScenarioSpec) -> Result<(SoilMoistureSeries, GroundTruth), SynthError> {
    let g = generate_detailed(spec)?;
    Ok((g.series, g.truth))
}

/// Readings kept clear on either side of a labeled pattern.
const MARGIN: usize = 12;
/// Readings after an irrigation onset reserved for its rise and decline.
const IRRIGATION_TAIL: usize = 72;
/// Extra readings reserved after a transient shift.
const SHIFT_TAIL: usize = 100;
/// Readings a persistent shift needs before the series ends.
const PERSISTENT_MIN: usize = 108;
/// Readings kept free at both ends of the series.
const EDGE: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ZoneKind {
    /// Spikes, dips and missing readings.
    Local,
    LevelShift,
    Irrigation,
    /// The second drop of a stepwise decline.
    LateDrop,
}

#[derive(Clone, Copy, Debug)]
struct Zone {
    start: usize,
    end: usize,
    kind: ZoneKind,
}

impl Zone {
    fn overlaps(&self, other: &Zone) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    /// A late drop may sit under local anomalies; every other pair must be apart.
    fn conflicts(&self, other: &Zone) -> bool {
        let local_and_drop = matches!(
            (self.kind, other.kind),
            (ZoneKind::LateDrop, ZoneKind::Local) | (ZoneKind::Local, ZoneKind::LateDrop)
        );
        self.overlaps(other) && !local_and_drop
    }
}

struct Irrigation {
    shape: DeclineShape,
    gain: f64,
    rise: usize,
    hold: usize,
    /// Gradual: time constant in readings. Sharp: fall length. Stepwise:
    /// delay of the first drop.
    param: f64,
}

impl Irrigation {
    fn draw(shape: DeclineShape, per_day: f64, rng: &mut ChaCha8Rng) -> Self {
        let gain: f64 = rng.gen_range(1.5..8.0);
        let rise = rng.gen_range(1..=3usize).max((gain / 4.0).ceil() as usize);
        let hold = rng.gen_range(2..=8usize);
        let param = match shape {
            DeclineShape::Gradual => rng.gen_range(0.2..0.35) * per_day,
            DeclineShape::Stepwise => rng.gen_range(4.0..7.0) * per_day / 24.0,
            DeclineShape::Sharp => rng.gen_range(20..=40usize) as f64,
        };
        Self { shape, gain, rise, hold, param }
    }

    /// Contribution `t` readings after onset.
    fn value(&self, t: usize, per_day: f64) -> f64 {
        let g = self.gain;
        if t < self.rise {
            return g * (t + 1) as f64 / self.rise as f64;
        }
        let top = self.rise + self.hold;
        if t < top {
            return g;
        }
        let d = (t - top) as f64;
        match self.shape {
            DeclineShape::Gradual => g * (-d / self.param).exp(),
            DeclineShape::Sharp => g * (1.0 - d / self.param).max(0.0),
            DeclineShape::Stepwise => {
                let ramp = |from: f64| ((d - from) / 8.0).clamp(0.0, 1.0);
                g * (1.0 - 0.5 * ramp(self.param) - 0.5 * ramp(self.param + per_day))
            }
        }
    }

    /// Readings after onset at which the second stepwise drop starts.
    fn late_drop(&self, per_day: f64) -> Option<usize> {
        (self.shape == DeclineShape::Stepwise)
            .then(|| self.rise + self.hold + (self.param + per_day).round() as usize)
    }
}

pub fn generate_detailed(spec: &ScenarioSpec) -> Result<Generated, SynthError> {
    spec.validate()?;
    let n = spec.len();
    if n < 2 * EDGE + IRRIGATION_TAIL {
        return Err(SynthError::InvalidSpec("series too short".into()));
    }
    let per_day = spec.samples_per_day();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;

    let drift: f64 = rng.gen_range(-0.3..0.0);
    let mut clean: Vec<f64> = (0..n)
        .map(|i| spec.base_moisture + drift * i as f64 / per_day)
        .collect();

    let mut timestamps: Vec<Timestamp> = (0..n)
        .map(|i| spec.start + spec.interval * i as i32)
        .collect();
    if spec.jitter_fraction > 0.0 {
        let max = 120.min(spec.interval.num_seconds() / 2 - 1).max(1);
        for t in timestamps.iter_mut().skip(1) {
            if rng.gen_bool(spec.jitter_fraction) {
                *t += TimeDelta::seconds(rng.gen_range(1..=max));
            }
        }
    }

    // Anomaly positions first, since the plan fixes them.
    let mut zones: Vec<Zone> = Vec::new();
    let mut labels: Vec<Zone> = Vec::new();
    let mut planned = Vec::new();
    for &(kind, day) in &spec.anomaly_plan {
        let nominal = (day * per_day).round() as i64 + rng.gen_range(-8..=8i64);
        let p = nominal.clamp(EDGE as i64, (n - EDGE - 1) as i64) as usize;
        let injection = Injection::draw(kind, p, n, &mut rng)?;
        let zone = injection.zone(n);
        // A persistent shift's label runs to the end of the series, so no
        // other anomaly may follow it.
        let label = Zone { end: injection.end + MARGIN, ..zone };
        if let Some(other) = zones
            .iter()
            .zip(&labels)
            .find(|(z, l)| z.conflicts(&zone) || l.overlaps(&label))
            .map(|(z, _)| z)
        {
            return Err(SynthError::Collision(format!(
                "{kind} near reading {p} overlaps a pattern at readings {}..{}",
                other.start, other.end
            )));
        }
        zones.push(zone);
        labels.push(label);
        planned.push(injection);
    }

    // Irrigation events in the free space, stepwise ones first since they
    // reserve a second zone.
    let mut events: Vec<Irrigation> = (0..spec.irrigation_count)
        .map(|k| {
            let shape = spec.decline_shapes[k % spec.decline_shapes.len()];
            Irrigation::draw(shape, per_day, &mut rng)
        })
        .collect();
    events.sort_by_key(|e| e.shape != DeclineShape::Stepwise);
    let mut onsets: Vec<(usize, Irrigation)> = Vec::new();
    for ev in events {
        let candidates: Vec<usize> = (EDGE + MARGIN..n - IRRIGATION_TAIL)
            .filter(|&o| {
                let own = irrigation_zone(o);
                let late = ev.late_drop(per_day).map(|d| late_drop_zone(o + d));
                zones
                    .iter()
                    .all(|z| !own.conflicts(z) && late.is_none_or(|l| !l.conflicts(z)))
            })
            .collect();
        let &o = candidates.choose(&mut rng).ok_or_else(|| {
            SynthError::Collision(format!("no room for a {} irrigation event", ev.shape))
        })?;
        zones.push(irrigation_zone(o));
        if let Some(d) = ev.late_drop(per_day) {
            zones.push(late_drop_zone(o + d));
        }
        for t in 0..n - o {
            clean[o + t] += ev.value(t, per_day);
        }
        onsets.push((o, ev));
    }
    onsets.sort_by_key(|(o, _)| *o);

    let lo = MOISTURE_MIN.as_f64();
    let hi = MOISTURE_MAX.as_f64();
    let noisy: Vec<f64> = clean
        .iter()
        .map(|c| (c + noise.sample(&mut rng)).clamp(lo, hi))
        .collect();
    let pre_anomaly: Vec<Sample> = timestamps
        .iter()
        .zip(&noisy)
        .map(|(&t, &v)| Sample::new(t, Percent::from_f64(v)))
        .collect();

    let mut values = noisy;
    let mut keep = vec![true; n];
    let mut anomalies = Vec::new();
    for inj in &planned {
        anomalies.push(inj.apply(&mut values, &mut keep, &timestamps));
    }

    let irrigation = onsets
        .iter()
        .map(|(o, _)| {
            let baseline = clean[o - 1].clamp(lo, hi);
            let plateau = clean[*o..(o + 16).min(n)]
                .iter()
                .fold(f64::MIN, |a, &b| a.max(b))
                .clamp(lo, hi);
            IrrigationEvent::measured(timestamps[*o], Percent::from_f64(baseline), Percent::from_f64(plateau))
        })
        .collect();
    anomalies.sort_by_key(|a: &AnomalyEvent| a.span.start());

    let samples: Vec<Sample> = (0..n)
        .filter(|&i| keep[i])
        .map(|i| Sample::new(timestamps[i], Percent::from_f64(values[i])))
        .collect();
    let series = SoilMoistureSeries::new(samples, SeriesMeta::new(spec.probe.clone(), 0))
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    Ok(Generated {
        series,
        truth: GroundTruth { irrigation, anomalies },
        pre_anomaly,
    })
}

fn irrigation_zone(onset: usize) -> Zone {
    Zone {
        start: onset - MARGIN,
        end: onset + IRRIGATION_TAIL,
        kind: ZoneKind::Irrigation,
    }
}

fn late_drop_zone(at: usize) -> Zone {
    Zone {
        start: at - MARGIN,
        end: at + 8 + MARGIN,
        kind: ZoneKind::LateDrop,
    }
}

struct Injection {
    kind: AnomalyType,
    at: usize,
    /// Last perturbed reading.
    end: usize,
    magnitude: f64,
    /// Offsets of extra spikes for MultipleSpikes.
    extra: Vec<usize>,
}

impl Injection {
    fn draw(kind: AnomalyType, p: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<Self, SynthError> {
        let fits = |end: usize| {
            if end + EDGE < n {
                Ok(())
            } else {
                Err(SynthError::Collision(format!("{kind} at reading {p} runs past the end of the series")))
            }
        };
        let mut inj = Injection { kind, at: p, end: p, magnitude: 0.0, extra: Vec::new() };
        match kind {
            AnomalyType::SingleSpike => inj.magnitude = rng.gen_range(4.0..15.0),
            AnomalyType::SingleDip => inj.magnitude = rng.gen_range(4.0..12.0),
            AnomalyType::MultipleSpikes => {
                let count = rng.gen_range(3..=5usize);
                let mut at = p;
                for _ in 1..count {
                    at += rng.gen_range(5..=16usize);
                    inj.extra.push(at);
                }
                inj.end = at;
                inj.magnitude = rng.gen_range(4.0..4.8);
                fits(inj.end)?;
            }
            AnomalyType::PersistentLevelShiftUp | AnomalyType::PersistentLevelShiftDown => {
                if p + PERSISTENT_MIN > n - 1 {
                    return Err(SynthError::Collision(format!(
                        "{kind} at reading {p} leaves too little data after the shift"
                    )));
                }
                inj.magnitude = rng.gen_range(4.0..8.0);
                inj.end = n - 1;
            }
            AnomalyType::TransientLevelShiftUp | AnomalyType::TransientLevelShiftDown => {
                inj.magnitude = rng.gen_range(4.0..4.8);
                inj.end = p + rng.gen_range(8..=64usize) - 1;
                fits(inj.end)?;
            }
            AnomalyType::MissingValue => {
                inj.end = p + rng.gen_range(12..=48usize) - 1;
                fits(inj.end)?;
            }
        }
        Ok(inj)
    }

    fn zone(&self, n: usize) -> Zone {
        let start = self.at - MARGIN;
        let (end, kind) = match self.kind {
            AnomalyType::PersistentLevelShiftUp | AnomalyType::PersistentLevelShiftDown => {
                ((self.at + PERSISTENT_MIN + MARGIN).min(n - 1), ZoneKind::LevelShift)
            }
            AnomalyType::TransientLevelShiftUp | AnomalyType::TransientLevelShiftDown => {
                ((self.end + SHIFT_TAIL).min(n - 1), ZoneKind::LevelShift)
            }
            _ => ((self.end + MARGIN).min(n - 1), ZoneKind::Local),
        };
        Zone { start, end, kind }
    }

    fn apply(&self, values: &mut [f64], keep: &mut [bool], ts: &[Timestamp]) -> AnomalyEvent {
        let m = self.magnitude;
        let range = |a: usize, b: usize| Span::between(ts[a], ts[b]);
        let (span, explanation) = match self.kind {
            AnomalyType::SingleSpike => {
                values[self.at] += m;
                (Span::At(ts[self.at]), format!("Injected spike of {m:.1} points."))
            }
            AnomalyType::SingleDip => {
                values[self.at] -= m;
                (Span::At(ts[self.at]), format!("Injected dip of {m:.1} points."))
            }
            AnomalyType::MultipleSpikes => {
                values[self.at] += m;
                for &k in &self.extra {
                    values[k] += m;
                }
                (
                    range(self.at, self.end),
                    format!("Injected {} spikes of {m:.1} points.", self.extra.len() + 1),
                )
            }
            AnomalyType::PersistentLevelShiftUp
            | AnomalyType::PersistentLevelShiftDown
            | AnomalyType::TransientLevelShiftUp
            | AnomalyType::TransientLevelShiftDown => {
                let up = matches!(
                    self.kind,
                    AnomalyType::PersistentLevelShiftUp | AnomalyType::TransientLevelShiftUp
                );
                let delta = if up { m } else { -m };
                for v in &mut values[self.at..=self.end] {
                    *v += delta;
                }
                (
                    range(self.at, self.end),
                    format!("Injected level shift of {delta:+.1} points over {} readings.", self.end - self.at + 1),
                )
            }
            AnomalyType::MissingValue => {
                for k in &mut keep[self.at..=self.end] {
                    *k = false;
                }
                (
                    range(self.at, self.end),
                    format!("Removed {} readings.", self.end - self.at + 1),
                )
            }
        };
        AnomalyEvent::new(self.kind, span).with_explanation(explanation)
    }
}

/// Writes the series in the ingest CSV format.
pub fn export_csv(samples: impl AsRef<[Sample]>, path: &Path) -> Result<(), SynthError> {
    let samples = samples.as_ref();
    if samples.is_empty() {
        return Err(SynthError::EmptySeries);
    }
    let series = SoilMoistureSeries::new(samples.to_vec(), SeriesMeta::default())
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    std::fs::write(path, render_csv(&series)).map_err(|source| SynthError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Number of segments in the standard evaluation corpus.
pub const STANDARD_CORPUS_SIZE: u64 = 100;

/// Scenario `seed` (1-based) of the standard corpus: seven days, two
/// irrigation events, and two anomalies whose types cycle so every type
/// appears equally often across the corpus.
pub fn standard_corpus_spec(seed: u64) -> ScenarioSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c0de);
    let types = AnomalyType::ALL;
    let shapes = DeclineShape::ALL;
    ScenarioSpec {
        probe: format!("synth-{seed:03}"),
        base_moisture: (rng.gen_range(150..=400) as f64) / 10.0,
        irrigation_count: 2,
        decline_shapes: vec![shapes[(seed % 3) as usize], shapes[((seed + 1) % 3) as usize]],
        anomaly_plan: standard_plan(types[((2 * seed) % 8) as usize], types[((2 * seed + 1) % 8) as usize]),
        seed,
        ..ScenarioSpec::default()
    }
}

/// A persistent shift lasts to the end of the series, so it goes last.
fn standard_plan(a: AnomalyType, b: AnomalyType) -> Vec<(AnomalyType, f64)> {
    let persistent = |k: AnomalyType| {
        matches!(k, AnomalyType::PersistentLevelShiftUp | AnomalyType::PersistentLevelShiftDown)
    };
    let (first, second) = if persistent(a) { (b, a) } else { (a, b) };
    vec![(first, 1.0), (second, 4.0)]
}

pub fn standard_corpus() -> Result<Vec<Generated>, SynthError> {
    (1..=STANDARD_CORPUS_SIZE)
        .map(|s| generate_detailed(&standard_corpus_spec(s)))
        .collect()
}
