//! Stroke features, task-level averaging and feature-vector assembly.
//!
//! Each stroke yields 21 values (20 for in-air strokes, which carry no pen
//! pressure). A task is summarised by the mean of every feature over its
//! on-paper strokes and, separately, over its in-air strokes, plus the stroke
//! count of each kind. Three vector layouts are built from that summary:
//!
//! | set | content                                                    | width |
//! |-----|------------------------------------------------------------|-------|
//! | P   | 21 on-paper means, on-paper stroke count, 4 personal        | 26    |
//! | A   | 20 in-air means, in-air stroke count, 4 personal            | 25    |
//! | AL  | the P and A trait features together, personal values once   | 47    |
//!
//! Trait features are prefixed `P_` or `A_`; personal features (`sex`, `age`,
//! `work`, `education`) are not.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ink_model::{Cohort, Participant, PenSample, Recording, Sex, Study, TraitKind, Work};
use crate::kinematics::{self, KinematicSeries, SmoothingConfig, Stroke};

/// Window used for the initial direction of a stroke.
pub const INITIAL_SLANT_WINDOW_MS: f64 = 80.0;
/// Acceleration extrema closer than this fraction of the stroke's peak
/// acceleration to the relevant threshold are treated as noise.
pub const PEAK_NOISE_FLOOR: f64 = 0.01;

pub const STROKE_COUNT: &str = "stroke_count";
pub const PERSONAL_FEATURES: [&str; 4] = ["sex", "age", "work", "education"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StrokeFeature {
    Duration,
    StartVerticalPosition,
    VerticalSize,
    PeakVerticalVelocity,
    PeakVerticalAcceleration,
    StartHorizontalPosition,
    HorizontalSize,
    StraightnessError,
    Slant,
    LoopSurface,
    RelativeInitialSlant,
    RelativeTimeToPeakVerticalVelocity,
    AbsoluteSize,
    AverageAbsoluteVelocity,
    RoadLength,
    AbsoluteYJerk,
    NormalizedYJerk,
    AbsoluteJerk,
    NormalizedJerk,
    PeakAccelerationPoints,
    PenPressure,
}

pub const N_STROKE_FEATURES: usize = 21;

impl StrokeFeature {
    pub const ALL: [StrokeFeature; N_STROKE_FEATURES] = [
        StrokeFeature::Duration,
        StrokeFeature::StartVerticalPosition,
        StrokeFeature::VerticalSize,
        StrokeFeature::PeakVerticalVelocity,
        StrokeFeature::PeakVerticalAcceleration,
        StrokeFeature::StartHorizontalPosition,
        StrokeFeature::HorizontalSize,
        StrokeFeature::StraightnessError,
        StrokeFeature::Slant,
        StrokeFeature::LoopSurface,
        StrokeFeature::RelativeInitialSlant,
        StrokeFeature::RelativeTimeToPeakVerticalVelocity,
        StrokeFeature::AbsoluteSize,
        StrokeFeature::AverageAbsoluteVelocity,
        StrokeFeature::RoadLength,
        StrokeFeature::AbsoluteYJerk,
        StrokeFeature::NormalizedYJerk,
        StrokeFeature::AbsoluteJerk,
        StrokeFeature::NormalizedJerk,
        StrokeFeature::PeakAccelerationPoints,
        StrokeFeature::PenPressure,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            StrokeFeature::Duration => "duration",
            StrokeFeature::StartVerticalPosition => "start_vertical_position",
            StrokeFeature::VerticalSize => "vertical_size",
            StrokeFeature::PeakVerticalVelocity => "peak_vertical_velocity",
            StrokeFeature::PeakVerticalAcceleration => "peak_vertical_acceleration",
            StrokeFeature::StartHorizontalPosition => "start_horizontal_position",
            StrokeFeature::HorizontalSize => "horizontal_size",
            StrokeFeature::StraightnessError => "straightness_error",
            StrokeFeature::Slant => "slant",
            StrokeFeature::LoopSurface => "loop_surface",
            StrokeFeature::RelativeInitialSlant => "relative_initial_slant",
            StrokeFeature::RelativeTimeToPeakVerticalVelocity => "relative_time_to_peak_vertical_velocity",
            StrokeFeature::AbsoluteSize => "absolute_size",
            StrokeFeature::AverageAbsoluteVelocity => "average_absolute_velocity",
            StrokeFeature::RoadLength => "road_length",
            StrokeFeature::AbsoluteYJerk => "absolute_y_jerk",
            StrokeFeature::NormalizedYJerk => "normalized_y_jerk",
            StrokeFeature::AbsoluteJerk => "absolute_jerk",
            StrokeFeature::NormalizedJerk => "normalized_jerk",
            StrokeFeature::PeakAccelerationPoints => "peak_acceleration_points",
            StrokeFeature::PenPressure => "pen_pressure",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Features defined for strokes of `kind`, in canonical order.
    pub fn for_kind(kind: TraitKind) -> impl Iterator<Item = StrokeFeature> {
        Self::ALL
            .into_iter()
            .filter(move |f| kind == TraitKind::OnPaper || *f != StrokeFeature::PenPressure)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a % TAU;
    if w <= -PI {
        w += TAU;
    } else if w > PI {
        w -= TAU;
    }
    w
}

/// Direction of `(dx, dy)` in (-pi, pi].
pub fn direction(dx: f64, dy: f64) -> f64 {
    let a = dy.atan2(dx);
    if a == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        a
    }
}

/// Absolute shoelace area of the closed polygon through `points`.
pub fn shoelace_area<'a>(points: impl Iterator<Item = &'a PenSample> + Clone) -> f64 {
    let first = points.clone().next();
    let Some(first) = first else { return 0.0 };
    let mut twice = 0.0;
    let mut prev = first;
    for p in points.skip(1) {
        twice += prev.x * p.y - p.x * prev.y;
        prev = p;
    }
    twice += prev.x * first.y - first.x * prev.y;
    0.5 * twice.abs()
}

fn road_length(samples: &[PenSample]) -> f64 {
    samples
        .windows(2)
        .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
        .sum()
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Shape and position features of one stroke.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticFeatures {
    pub start_vertical_position: f64,
    pub vertical_size: f64,
    pub start_horizontal_position: f64,
    pub horizontal_size: f64,
    pub slant: f64,
    pub loop_surface: f64,
    pub absolute_size: f64,
    pub road_length: f64,
}

/// `previous` is the stroke immediately before this one in the task, of
/// either kind; the loop surface is 0 without one.
pub fn static_stroke_features(stroke: &[PenSample], previous: Option<&[PenSample]>) -> Result<StaticFeatures> {
    if stroke.len() < 2 {
        return Err(Error::Domain(format!("a stroke needs at least 2 samples, got {}", stroke.len())));
    }
    let first = stroke[0];
    let last = stroke[stroke.len() - 1];
    let (y_lo, y_hi) = min_max(stroke.iter().map(|s| s.y));
    let (x_lo, x_hi) = min_max(stroke.iter().map(|s| s.x));
    let vertical_size = y_hi - y_lo;
    let horizontal_size = x_hi - x_lo;
    let loop_surface = match previous {
        Some(prev) => shoelace_area(prev.iter().chain(stroke.iter())),
        None => 0.0,
    };
    Ok(StaticFeatures {
        start_vertical_position: first.y,
        vertical_size,
        start_horizontal_position: first.x,
        horizontal_size,
        slant: direction(last.x - first.x, last.y - first.y),
        loop_surface,
        absolute_size: vertical_size.hypot(horizontal_size),
        road_length: road_length(stroke),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Degeneracy {
    /// Start and end coincide, so the straightness error is reported as 0.
    pub zero_chord: bool,
    /// Road length is 0, so both normalized jerks are reported as 0.
    pub zero_road_length: bool,
}

impl Degeneracy {
    pub fn any(&self) -> bool {
        self.zero_chord || self.zero_road_length
    }
}

/// Velocity-profile features of one stroke.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicFeatures {
    pub duration: f64,
    pub peak_vertical_velocity: f64,
    pub peak_vertical_acceleration: f64,
    pub straightness_error: f64,
    pub relative_initial_slant: f64,
    pub relative_time_to_peak_vertical_velocity: f64,
    pub average_absolute_velocity: f64,
    pub absolute_y_jerk: f64,
    pub normalized_y_jerk: f64,
    pub absolute_jerk: f64,
    pub normalized_jerk: f64,
    pub peak_acceleration_points: f64,
    pub pen_pressure: Option<f64>,
    pub degeneracy: Degeneracy,
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    (sum / n as f64).sqrt()
}

/// Dimensionless smoothness `sqrt(0.5 * integral(jerk^2 dt) * T^5 / L^2)`,
/// integrating by the trapezoidal rule over the sample times.
pub fn normalized_jerk(times: &[f64], jerk: &[f64], road_length: f64) -> f64 {
    if road_length <= 0.0 || times.len() < 2 {
        return 0.0;
    }
    let integral: f64 = times
        .windows(2)
        .zip(jerk.windows(2))
        .map(|(t, j)| 0.5 * (j[0] * j[0] + j[1] * j[1]) * (t[1] - t[0]))
        .sum();
    let duration = times[times.len() - 1] - times[0];
    (0.5 * integral * duration.powi(5) / (road_length * road_length)).sqrt()
}

/// Standard deviation of the perpendicular distances of the points to the
/// start-end chord, divided by the chord length.
pub fn straightness_error(stroke: &[PenSample]) -> Option<f64> {
    let first = stroke[0];
    let last = stroke[stroke.len() - 1];
    let (dx, dy) = (last.x - first.x, last.y - first.y);
    let chord = dx.hypot(dy);
    if chord == 0.0 {
        return None;
    }
    let dist: Vec<f64> = stroke
        .iter()
        .map(|p| ((p.x - first.x) * dy - (p.y - first.y) * dx).abs() / chord)
        .collect();
    let mean = dist.iter().sum::<f64>() / dist.len() as f64;
    let var = dist.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / dist.len() as f64;
    Some(var.sqrt() / chord)
}

/// Turning points of `magnitude`, both peaks and troughs. A turning point is
/// counted once the signal has moved away from it by more than the noise
/// floor ([`PEAK_NOISE_FLOOR`] times the stroke's peak), so ripples smaller
/// than the floor are ignored and the two endpoints never count.
pub fn count_extrema(magnitude: &[f64]) -> usize {
    let peak = magnitude.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 || magnitude.len() < 3 {
        return 0;
    }
    let floor = PEAK_NOISE_FLOOR * peak;
    let mut count = 0;
    let mut trend = 0i8;
    let (mut lo, mut hi) = (magnitude[0], magnitude[0]);
    let mut extreme = magnitude[0];
    for &v in &magnitude[1..] {
        match trend {
            0 => {
                lo = lo.min(v);
                hi = hi.max(v);
                if v > lo + floor {
                    trend = 1;
                    extreme = v;
                } else if v < hi - floor {
                    trend = -1;
                    extreme = v;
                }
            }
            1 if v > extreme => extreme = v,
            1 if v < extreme - floor => {
                count += 1;
                trend = -1;
                extreme = v;
            }
            -1 if v < extreme => extreme = v,
            -1 if v > extreme + floor => {
                count += 1;
                trend = 1;
                extreme = v;
            }
            _ => {}
        }
    }
    count
}

fn initial_direction(stroke: &[PenSample]) -> f64 {
    let first = stroke[0];
    let target = first.t + INITIAL_SLANT_WINDOW_MS;
    let last = stroke[stroke.len() - 1];
    let (x, y) = if last.t <= target {
        (last.x, last.y)
    } else {
        let k = stroke.iter().position(|s| s.t >= target).expect("target inside stroke");
        let (a, b) = (stroke[k - 1], stroke[k]);
        let u = (target - a.t) / (b.t - a.t);
        (a.x + u * (b.x - a.x), a.y + u * (b.y - a.y))
    };
    direction(x - first.x, y - first.y)
}

/// `samples` and `series` cover the whole recording; `stroke` selects the range.
pub fn dynamic_stroke_features(
    samples: &[PenSample],
    series: &KinematicSeries,
    stroke: &Stroke,
) -> Result<DynamicFeatures> {
    let pts = stroke.samples(samples);
    if pts.len() < 2 {
        return Err(Error::Domain(format!("a stroke needs at least 2 samples, got {}", pts.len())));
    }
    let r = stroke.range();
    let first = pts[0];
    let last = pts[pts.len() - 1];
    let duration = last.t - first.t;
    if !(duration > 0.0) {
        return Err(Error::Domain("stroke duration is zero".into()));
    }

    let vy = &series.vy[r.clone()];
    let (argmax_vy, peak_vy) = vy
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    let peak_ay = series.ay[r.clone()].iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let mut degeneracy = Degeneracy::default();
    let straightness = straightness_error(pts).unwrap_or_else(|| {
        degeneracy.zero_chord = true;
        0.0
    });
    let slant = direction(last.x - first.x, last.y - first.y);
    let length = road_length(pts);
    if length == 0.0 {
        degeneracy.zero_road_length = true;
    }
    let times: Vec<f64> = pts.iter().map(|s| s.t).collect();
    let jy = &series.jy[r.clone()];
    let jmag: Vec<f64> = r.clone().map(|i| series.jerk_magnitude(i)).collect();
    let amag: Vec<f64> = r.clone().map(|i| series.acceleration_magnitude(i)).collect();

    let pen_pressure = match stroke.kind {
        TraitKind::OnPaper => Some(pts.iter().map(|s| s.pressure).sum::<f64>() / pts.len() as f64),
        TraitKind::InAir => None,
    };

    Ok(DynamicFeatures {
        duration,
        peak_vertical_velocity: peak_vy,
        peak_vertical_acceleration: peak_ay,
        straightness_error: straightness,
        relative_initial_slant: wrap_angle(initial_direction(pts) - slant),
        relative_time_to_peak_vertical_velocity: (pts[argmax_vy].t - first.t) / duration,
        average_absolute_velocity: series.speed[r.clone()].iter().sum::<f64>() / pts.len() as f64,
        absolute_y_jerk: rms(jy.iter().cloned()),
        normalized_y_jerk: normalized_jerk(&times, jy, length),
        absolute_jerk: rms(jmag.iter().cloned()),
        normalized_jerk: normalized_jerk(&times, &jmag, length),
        peak_acceleration_points: count_extrema(&amag) as f64,
        pen_pressure,
        degeneracy,
    })
}

/// All features of one stroke, or the per-kind mean over a task's strokes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrokeFeatures {
    pub kind: TraitKind,
    values: [f64; N_STROKE_FEATURES],
    pub degeneracy: Degeneracy,
}

impl StrokeFeatures {
    pub fn from_parts(kind: TraitKind, s: &StaticFeatures, d: &DynamicFeatures) -> Self {
        use StrokeFeature::*;
        let mut values = [0.0; N_STROKE_FEATURES];
        let mut set = |f: StrokeFeature, v: f64| values[f.index()] = v;
        set(Duration, d.duration);
        set(StartVerticalPosition, s.start_vertical_position);
        set(VerticalSize, s.vertical_size);
        set(PeakVerticalVelocity, d.peak_vertical_velocity);
        set(PeakVerticalAcceleration, d.peak_vertical_acceleration);
        set(StartHorizontalPosition, s.start_horizontal_position);
        set(HorizontalSize, s.horizontal_size);
        set(StraightnessError, d.straightness_error);
        set(Slant, s.slant);
        set(LoopSurface, s.loop_surface);
        set(RelativeInitialSlant, d.relative_initial_slant);
        set(RelativeTimeToPeakVerticalVelocity, d.relative_time_to_peak_vertical_velocity);
        set(AbsoluteSize, s.absolute_size);
        set(AverageAbsoluteVelocity, d.average_absolute_velocity);
        set(RoadLength, s.road_length);
        set(AbsoluteYJerk, d.absolute_y_jerk);
        set(NormalizedYJerk, d.normalized_y_jerk);
        set(AbsoluteJerk, d.absolute_jerk);
        set(NormalizedJerk, d.normalized_jerk);
        set(PeakAccelerationPoints, d.peak_acceleration_points);
        set(PenPressure, d.pen_pressure.unwrap_or(0.0));
        StrokeFeatures {
            kind,
            values,
            degeneracy: d.degeneracy,
        }
    }

    /// `None` for pen pressure on in-air strokes.
    pub fn get(&self, feature: StrokeFeature) -> Option<f64> {
        if feature == StrokeFeature::PenPressure && self.kind == TraitKind::InAir {
            None
        } else {
            Some(self.values[feature.index()])
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (StrokeFeature, f64)> + '_ {
        StrokeFeature::for_kind(self.kind).map(move |f| (f, self.values[f.index()]))
    }

    fn mean_of(kind: TraitKind, items: &[StrokeFeatures]) -> Option<Self> {
        if items.is_empty() {
            return None;
        }
        let mut values = [0.0; N_STROKE_FEATURES];
        for it in items {
            for (acc, v) in values.iter_mut().zip(it.values.iter()) {
                *acc += v;
            }
        }
        for v in &mut values {
            *v /= items.len() as f64;
        }
        Some(StrokeFeatures {
            kind,
            values,
            degeneracy: Degeneracy::default(),
        })
    }
}

/// Features of `strokes[index]`, using the stroke before it for the loop surface.
pub fn stroke_features(
    samples: &[PenSample],
    series: &KinematicSeries,
    strokes: &[Stroke],
    index: usize,
) -> Result<StrokeFeatures> {
    let stroke = &strokes[index];
    let previous = index.checked_sub(1).map(|i| strokes[i].samples(samples));
    let s = static_stroke_features(stroke.samples(samples), previous)?;
    let d = dynamic_stroke_features(samples, series, stroke)?;
    Ok(StrokeFeatures::from_parts(stroke.kind, &s, &d))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskFeatures {
    pub on_paper: Option<StrokeFeatures>,
    pub in_air: Option<StrokeFeatures>,
    pub n_strokes_on_paper: usize,
    pub n_strokes_in_air: usize,
    pub degenerate_strokes: usize,
}

pub fn aggregate_task(samples: &[PenSample], series: &KinematicSeries, strokes: &[Stroke]) -> Result<TaskFeatures> {
    let all = (0..strokes.len())
        .map(|i| stroke_features(samples, series, strokes, i))
        .collect::<Result<Vec<_>>>()?;
    let (paper, air): (Vec<StrokeFeatures>, Vec<StrokeFeatures>) =
        all.iter().partition(|f| f.kind == TraitKind::OnPaper);
    if paper.is_empty() {
        return Err(Error::Domain("task has no on-paper strokes".into()));
    }
    Ok(TaskFeatures {
        on_paper: StrokeFeatures::mean_of(TraitKind::OnPaper, &paper),
        in_air: StrokeFeatures::mean_of(TraitKind::InAir, &air),
        n_strokes_on_paper: paper.len(),
        n_strokes_in_air: air.len(),
        degenerate_strokes: all.iter().filter(|f| f.degeneracy.any()).count(),
    })
}

/// Derivatives, segmentation and aggregation for one recording.
pub fn extract_task(recording: &Recording, cfg: &SmoothingConfig) -> Result<TaskFeatures> {
    let (series, strokes) = kinematics::analyze(recording, cfg)?;
    aggregate_task(recording.samples(), &series, &strokes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    A,
    P,
    AL,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [FeatureSet::A, FeatureSet::P, FeatureSet::AL];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::A => "A",
            FeatureSet::P => "P",
            FeatureSet::AL => "AL",
        }
    }

    pub fn dimension(self) -> usize {
        match self {
            FeatureSet::A => 25,
            FeatureSet::P => 26,
            FeatureSet::AL => 47,
        }
    }

    /// Column names of this set, in vector order.
    pub fn names(self) -> Vec<String> {
        let trait_names = |kind: TraitKind| {
            StrokeFeature::for_kind(kind)
                .map(move |f| format!("{}_{}", kind.prefix(), f.name()))
                .chain(std::iter::once(format!("{}_{}", kind.prefix(), STROKE_COUNT)))
        };
        let mut names: Vec<String> = match self {
            FeatureSet::A => trait_names(TraitKind::InAir).collect(),
            FeatureSet::P => trait_names(TraitKind::OnPaper).collect(),
            FeatureSet::AL => trait_names(TraitKind::OnPaper)
                .chain(trait_names(TraitKind::InAir))
                .collect(),
        };
        names.extend(PERSONAL_FEATURES.iter().map(|s| s.to_string()));
        names
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "A" => Ok(FeatureSet::A),
            "P" => Ok(FeatureSet::P),
            "AL" => Ok(FeatureSet::AL),
            other => Err(format!("unknown feature set {other:?}")),
        }
    }
}

/// Which group a feature name belongs to in histograms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureGroup {
    InAir,
    OnPaper,
    Personal,
}

impl FeatureGroup {
    pub fn of(name: &str) -> FeatureGroup {
        if name.starts_with("A_") {
            FeatureGroup::InAir
        } else if name.starts_with("P_") {
            FeatureGroup::OnPaper
        } else {
            FeatureGroup::Personal
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FeatureGroup::InAir => "in-air",
            FeatureGroup::OnPaper => "on-paper",
            FeatureGroup::Personal => "personal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub set: FeatureSet,
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub label: Cohort,
    pub participant_id: String,
    pub task_id: u8,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

fn personal_values(p: &Participant) -> [f64; 4] {
    [
        match p.sex {
            Sex::F => 0.0,
            Sex::M => 1.0,
        },
        f64::from(p.age),
        match p.work {
            Work::Manual => 0.0,
            Work::Intellectual => 1.0,
        },
        f64::from(p.education),
    ]
}

pub fn assemble_vector(task: &TaskFeatures, participant: &Participant, task_id: u8, set: FeatureSet) -> Result<FeatureVector> {
    let missing = |kind: &'static str| Error::MissingTrait {
        participant_id: participant.id.clone(),
        task_id,
        trait_kind: kind,
    };
    let trait_values = |means: &StrokeFeatures, count: usize| {
        means
            .iter()
            .map(|(_, v)| v)
            .chain(std::iter::once(count as f64))
            .collect::<Vec<f64>>()
    };
    let paper = || {
        task.on_paper
            .as_ref()
            .map(|m| trait_values(m, task.n_strokes_on_paper))
            .ok_or_else(|| missing("on-paper"))
    };
    let air = || {
        task.in_air
            .as_ref()
            .map(|m| trait_values(m, task.n_strokes_in_air))
            .ok_or_else(|| missing("in-air"))
    };
    let mut values = match set {
        FeatureSet::P => paper()?,
        FeatureSet::A => air()?,
        FeatureSet::AL => {
            let mut v = paper()?;
            v.extend(air()?);
            v
        }
    };
    values.extend(personal_values(participant));
    let names = set.names();
    debug_assert_eq!(names.len(), values.len());
    Ok(FeatureVector {
        set,
        names,
        values,
        label: participant.cohort,
        participant_id: participant.id.clone(),
        task_id,
    })
}

/// Rows of one feature set, as written by extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub set: FeatureSet,
    pub names: Vec<String>,
    pub rows: Vec<FeatureVector>,
}

impl FeatureTable {
    pub fn new(set: FeatureSet, rows: Vec<FeatureVector>) -> Result<Self> {
        let names = set.names();
        if let Some(bad) = rows.iter().find(|r| r.set != set || r.names != names) {
            return Err(Error::Validation(format!(
                "row {}/task {} does not belong to feature set {set}",
                bad.participant_id, bad.task_id
            )));
        }
        Ok(FeatureTable { set, names, rows })
    }

    /// Columns: `participant_id,task_id,<features...>,label`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let to_err = |e: csv::Error| Error::Validation(format!("csv write failed: {e}"));
        let mut header = vec!["participant_id".to_string(), "task_id".to_string()];
        header.extend(self.names.iter().cloned());
        header.push("label".into());
        w.write_record(&header).map_err(to_err)?;
        for r in &self.rows {
            let mut rec = vec![r.participant_id.clone(), r.task_id.to_string()];
            rec.extend(r.values.iter().map(|v| v.to_string()));
            rec.push(r.label.to_string());
            w.write_record(&rec).map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::Validation(format!("csv write failed: {e}")))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let perr = |line: u64, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let headers = reader.headers().map_err(|e| perr(1, e.to_string()))?.clone();
        let cols: Vec<String> = headers.iter().map(str::to_string).collect();
        if cols.len() < 4 || cols[0] != "participant_id" || cols[1] != "task_id" || cols[cols.len() - 1] != "label" {
            return Err(perr(1, "expected header participant_id,task_id,<features>,label".into()));
        }
        let names = cols[2..cols.len() - 1].to_vec();
        let set = FeatureSet::ALL
            .into_iter()
            .find(|s| s.names() == names)
            .ok_or_else(|| perr(1, "feature columns match none of the A, P, AL layouts".into()))?;
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| perr(e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let task_id: u8 = rec[1].parse().map_err(|e| perr(line, format!("bad task_id: {e}")))?;
            let values = (2..rec.len() - 1)
                .map(|i| rec[i].parse::<f64>().map_err(|e| perr(line, format!("bad value in {}: {e}", cols[i]))))
                .collect::<Result<Vec<_>>>()?;
            let label: Cohort = rec[rec.len() - 1].parse().map_err(|e: String| perr(line, e))?;
            rows.push(FeatureVector {
                set,
                names: names.clone(),
                values,
                label,
                participant_id: rec[0].to_string(),
                task_id,
            });
        }
        Ok(FeatureTable { set, names, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file), path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn for_task(&self, task_id: u8) -> Vec<&FeatureVector> {
        self.rows.iter().filter(|r| r.task_id == task_id).collect()
    }
}

/// A recording that produced no vector for one feature set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractionFailure {
    pub participant_id: String,
    pub task_id: u8,
    pub set: Option<FeatureSet>,
    pub message: String,
}

/// Extracts every recording of a study into one table per feature set.
/// Failed recordings are skipped and logged; the rest keep study order.
pub fn extract_study(study: &Study, cfg: &SmoothingConfig) -> (BTreeMap<FeatureSet, FeatureTable>, Vec<ExtractionFailure>) {
    let per_recording: Vec<(Vec<FeatureVector>, Vec<ExtractionFailure>)> = study
        .recordings
        .par_iter()
        .map(|rec| {
            let fail = |set, message: String| ExtractionFailure {
                participant_id: rec.participant_id.clone(),
                task_id: rec.task_id,
                set,
                message,
            };
            let Some(participant) = study.participant(&rec.participant_id) else {
                return (vec![], vec![fail(None, "participant not in participants.csv".into())]);
            };
            let task = match extract_task(rec, cfg) {
                Ok(t) => t,
                Err(e) => return (vec![], vec![fail(None, e.to_string())]),
            };
            let mut vectors = Vec::new();
            let mut failures = Vec::new();
            for set in FeatureSet::ALL {
                match assemble_vector(&task, participant, rec.task_id, set) {
                    Ok(v) => vectors.push(v),
                    Err(e) => failures.push(fail(Some(set), e.to_string())),
                }
            }
            (vectors, failures)
        })
        .collect();
    let mut rows: BTreeMap<FeatureSet, Vec<FeatureVector>> = FeatureSet::ALL.iter().map(|&s| (s, Vec::new())).collect();
    let mut failures = Vec::new();
    for (vectors, fails) in per_recording {
        for v in vectors {
            rows.get_mut(&v.set).expect("all sets present").push(v);
        }
        failures.extend(fails);
    }
    let tables = rows
        .into_iter()
        .map(|(set, r)| (set, FeatureTable::new(set, r).expect("assembled rows match their set")))
        .collect();
    (tables, failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pts(xy: &[(f64, f64)], dt: f64) -> Vec<PenSample> {
        xy.iter()
            .enumerate()
            .map(|(i, &(x, y))| PenSample {
                t: i as f64 * dt,
                x,
                y,
                pressure: 1.0,
                status: TraitKind::OnPaper,
            })
            .collect()
    }

    fn whole(samples: &[PenSample], kind: TraitKind) -> Stroke {
        use crate::kinematics::BoundaryReason::RecordingEdge;
        Stroke {
            start: 0,
            end: samples.len(),
            kind,
            start_reason: RecordingEdge,
            end_reason: RecordingEdge,
        }
    }

    #[test]
    fn three_four_five() {
        let s = static_stroke_features(&pts(&[(0.0, 0.0), (3.0, 4.0)], 5.0), None).unwrap();
        assert!((s.slant - 4f64.atan2(3.0)).abs() < 1e-15);
        assert!((s.slant - 0.9273).abs() < 1e-4);
        assert_eq!(s.road_length, 5.0);
        assert_eq!(s.vertical_size, 4.0);
        assert_eq!(s.horizontal_size, 3.0);
        assert_eq!(s.absolute_size, 5.0);
        assert_eq!(s.loop_surface, 0.0);
    }

    #[test]
    fn unit_square_loop() {
        let prev = pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)], 5.0);
        let cur = pts(&[(0.0, 1.0), (0.0, 0.5)], 5.0);
        let s = static_stroke_features(&cur, Some(&prev)).unwrap();
        assert!((s.loop_surface - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_sample_stroke_rejected() {
        assert!(static_stroke_features(&pts(&[(0.0, 0.0)], 5.0), None).is_err());
    }

    #[test]
    fn slant_range() {
        assert_eq!(direction(-1.0, -0.0), PI);
        assert_eq!(direction(-1.0, 0.0), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(-PI), PI);
    }

    #[test]
    fn constant_velocity_line_is_ideal() {
        let xy: Vec<(f64, f64)> = (0..40).map(|i| (2.0 * i as f64, 1.0 * i as f64)).collect();
        let samples = pts(&xy, 5.0);
        let series = kinematics::estimate_from_samples(&samples, &SmoothingConfig::default()).unwrap();
        let d = dynamic_stroke_features(&samples, &series, &whole(&samples, TraitKind::OnPaper)).unwrap();
        assert!(d.straightness_error.abs() < 1e-12);
        assert!(d.absolute_jerk.abs() < 1e-9);
        assert!(d.normalized_jerk.abs() < 1e-9);
        assert!(d.relative_initial_slant.abs() < 1e-12);
        assert_eq!(d.duration, 195.0);
        assert_eq!(d.pen_pressure, Some(1.0));
        assert!((d.average_absolute_velocity - 5f64.sqrt() / 5.0).abs() < 1e-9);
    }

    #[test]
    fn bell_profile_peaks_midway() {
        // y(t) = minimum-jerk rise: vy is a symmetric bell
        let n = 101;
        let xy: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let u = i as f64 / (n - 1) as f64;
                (0.0, 100.0 * (10.0 * u.powi(3) - 15.0 * u.powi(4) + 6.0 * u.powi(5)))
            })
            .collect();
        let samples = pts(&xy, 5.0);
        let series = kinematics::estimate_from_samples(&samples, &SmoothingConfig::raw()).unwrap();
        let d = dynamic_stroke_features(&samples, &series, &whole(&samples, TraitKind::OnPaper)).unwrap();
        assert!((d.relative_time_to_peak_vertical_velocity - 0.5).abs() <= 1.0 / (n - 1) as f64);
    }

    #[test]
    fn degenerate_chord_flagged() {
        let samples = pts(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0), (1.0, -1.0), (0.0, 0.0)], 5.0);
        let series = kinematics::estimate_from_samples(&samples, &SmoothingConfig::raw()).unwrap();
        let d = dynamic_stroke_features(&samples, &series, &whole(&samples, TraitKind::OnPaper)).unwrap();
        assert!(d.degeneracy.zero_chord);
        assert_eq!(d.straightness_error, 0.0);

        let still = pts(&[(1.0, 1.0); 5], 5.0);
        let series = kinematics::estimate_from_samples(&still, &SmoothingConfig::raw()).unwrap();
        let d = dynamic_stroke_features(&still, &series, &whole(&still, TraitKind::InAir)).unwrap();
        assert!(d.degeneracy.zero_road_length);
        assert_eq!(d.normalized_jerk, 0.0);
        assert_eq!(d.pen_pressure, None);
    }

    #[test]
    fn extrema_counting() {
        assert_eq!(count_extrema(&[0.0, 1.0, 0.0, 1.0, 0.0]), 3);
        assert_eq!(count_extrema(&[0.0, 0.0, 0.0]), 0);
        // a wiggle below the floor is ignored
        assert_eq!(count_extrema(&[0.0, 0.001, 0.0, 1.0, 0.5]), 1);
    }

    #[test]
    fn feature_set_layouts() {
        for set in FeatureSet::ALL {
            let names = set.names();
            assert_eq!(names.len(), set.dimension());
            let unique: std::collections::BTreeSet<_> = names.iter().collect();
            assert_eq!(unique.len(), names.len());
        }
        let al = FeatureSet::AL.names();
        assert_eq!(al.iter().filter(|n| *n == "age").count(), 1);
        assert!(al.contains(&"P_pen_pressure".to_string()));
        assert!(!al.contains(&"A_pen_pressure".to_string()));
    }

    #[test]
    fn polyline_road_length_bounds_chord() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(2..30);
            let xy: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)))
                .collect();
            let s = static_stroke_features(&pts(&xy, 5.0), None).unwrap();
            let chord = (xy[n - 1].0 - xy[0].0).hypot(xy[n - 1].1 - xy[0].1);
            assert!(s.road_length + 1e-9 >= chord);
        }
    }
}
