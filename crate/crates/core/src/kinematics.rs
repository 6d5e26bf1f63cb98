//! Derivative estimation and stroke segmentation.
//!
//! Derivatives are taken on the actual (possibly irregular) timestamps with
//! Lagrange stencils: three-point central on interior samples and four-point
//! one-sided at the two ends, so quadratics are differentiated exactly
//! everywhere. Positions may first be smoothed with a Gaussian-weighted local
//! linear fit, which leaves straight constant-velocity motion untouched.
//!
//! Strokes are cut at pen-down, pen-up and strict sign changes of the
//! (smoothed) vertical velocity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ink_model::{PenSample, Recording, TraitKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingConfig {
    pub enabled: bool,
    pub kernel_sigma_ms: f64,
    /// Fragments covering less time than this are merged into a neighbour.
    pub min_stroke_duration_ms: f64,
    /// Whether in-air runs are also split at vertical-velocity zero crossings.
    pub split_in_air: bool,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig {
            enabled: true,
            kernel_sigma_ms: 10.0,
            min_stroke_duration_ms: 20.0,
            split_in_air: true,
        }
    }
}

impl SmoothingConfig {
    /// No smoothing and no fragment merging.
    pub fn raw() -> Self {
        SmoothingConfig {
            enabled: false,
            kernel_sigma_ms: 10.0,
            min_stroke_duration_ms: 0.0,
            split_in_air: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.enabled && !(self.kernel_sigma_ms > 0.0 && self.kernel_sigma_ms.is_finite()) {
            return Err(Error::Config("kernel_sigma_ms must be positive when smoothing is enabled".into()));
        }
        if !(self.min_stroke_duration_ms >= 0.0) {
            return Err(Error::Config("min_stroke_duration_ms must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeOrder {
    Velocity = 1,
    Acceleration = 2,
    Jerk = 3,
}

impl DerivativeOrder {
    pub fn required_samples(self) -> usize {
        self as usize + 1
    }

    fn name(self) -> &'static str {
        match self {
            DerivativeOrder::Velocity => "velocity",
            DerivativeOrder::Acceleration => "acceleration",
            DerivativeOrder::Jerk => "jerk",
        }
    }
}

/// Weights of the derivative, at `x`, of the Lagrange polynomial through `nodes`.
fn lagrange_derivative_weights(nodes: &[f64], x: f64) -> Vec<f64> {
    let n = nodes.len();
    (0..n)
        .map(|j| {
            let mut total = 0.0;
            for m in (0..n).filter(|&m| m != j) {
                let mut term = 1.0 / (nodes[j] - nodes[m]);
                for l in (0..n).filter(|&l| l != j && l != m) {
                    term *= (x - nodes[l]) / (nodes[j] - nodes[l]);
                }
                total += term;
            }
            total
        })
        .collect()
}

fn stencil(t: &[f64], f: &[f64], lo: usize, hi: usize, at: usize) -> f64 {
    let w = lagrange_derivative_weights(&t[lo..hi], t[at]);
    w.iter().zip(&f[lo..hi]).map(|(w, v)| w * v).sum()
}

/// First derivative of `f` sampled at strictly increasing times `t`.
/// Needs at least two samples.
pub fn differentiate(t: &[f64], f: &[f64]) -> Vec<f64> {
    assert_eq!(t.len(), f.len(), "time and value series differ in length");
    let n = t.len();
    match n {
        0 | 1 => vec![0.0; n],
        2 => {
            let d = (f[1] - f[0]) / (t[1] - t[0]);
            vec![d, d]
        }
        3 => (0..3).map(|i| stencil(t, f, 0, 3, i)).collect(),
        _ => {
            let mut out = Vec::with_capacity(n);
            out.push(stencil(t, f, 0, 4, 0));
            for i in 1..n - 1 {
                out.push(stencil(t, f, i - 1, i + 2, i));
            }
            out.push(stencil(t, f, n - 4, n, n - 1));
            out
        }
    }
}

/// Repeated differentiation up to `order`, returning every intermediate order.
pub fn derivatives(t: &[f64], f: &[f64], order: DerivativeOrder) -> Result<Vec<Vec<f64>>> {
    if t.len() < order.required_samples() {
        return Err(Error::Domain(format!(
            "{} needs at least {} samples, got {}",
            order.name(),
            order.required_samples(),
            t.len()
        )));
    }
    let mut out = Vec::with_capacity(order as usize);
    let mut current = f.to_vec();
    for _ in 0..order as usize {
        current = differentiate(t, &current);
        out.push(current.clone());
    }
    Ok(out)
}

/// Gaussian-weighted local linear smoother, kernel truncated at 4 sigma.
pub fn smooth(t: &[f64], f: &[f64], sigma: f64) -> Vec<f64> {
    let n = t.len();
    let reach = 4.0 * sigma;
    let mut out = Vec::with_capacity(n);
    let mut lo = 0;
    let mut hi = 0;
    for i in 0..n {
        while t[i] - t[lo] > reach {
            lo += 1;
        }
        while hi < n && t[hi] - t[i] <= reach {
            hi += 1;
        }
        let (mut s0, mut s1, mut s2, mut m0, mut m1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for j in lo..hi {
            let d = t[j] - t[i];
            let w = (-0.5 * (d / sigma).powi(2)).exp();
            s0 += w;
            s1 += w * d;
            s2 += w * d * d;
            m0 += w * f[j];
            m1 += w * d * f[j];
        }
        let det = s0 * s2 - s1 * s1;
        if det > 1e-12 * s0 * s2 {
            out.push((s2 * m0 - s1 * m1) / det);
        } else {
            out.push(m0 / s0);
        }
    }
    out
}

/// Per-sample velocity, acceleration and jerk, in tablet units per ms^k.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicSeries {
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub ax: Vec<f64>,
    pub ay: Vec<f64>,
    pub jx: Vec<f64>,
    pub jy: Vec<f64>,
    pub speed: Vec<f64>,
}

impl KinematicSeries {
    pub fn len(&self) -> usize {
        self.vx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vx.is_empty()
    }

    pub fn acceleration_magnitude(&self, i: usize) -> f64 {
        self.ax[i].hypot(self.ay[i])
    }

    pub fn jerk_magnitude(&self, i: usize) -> f64 {
        self.jx[i].hypot(self.jy[i])
    }
}

/// Differentiates raw sample positions. Used directly by tests and
/// callers who hold bare samples rather than a validated recording.
pub fn estimate_from_samples(samples: &[PenSample], cfg: &SmoothingConfig) -> Result<KinematicSeries> {
    cfg.validate()?;
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let mut x: Vec<f64> = samples.iter().map(|s| s.x).collect();
    let mut y: Vec<f64> = samples.iter().map(|s| s.y).collect();
    if cfg.enabled {
        x = smooth(&t, &x, cfg.kernel_sigma_ms);
        y = smooth(&t, &y, cfg.kernel_sigma_ms);
    }
    let dx = derivatives(&t, &x, DerivativeOrder::Jerk)?;
    let dy = derivatives(&t, &y, DerivativeOrder::Jerk)?;
    let [vx, ax, jx]: [Vec<f64>; 3] = dx.try_into().expect("three orders");
    let [vy, ay, jy]: [Vec<f64>; 3] = dy.try_into().expect("three orders");
    let speed = vx.iter().zip(&vy).map(|(a, b)| a.hypot(*b)).collect();
    Ok(KinematicSeries {
        vx,
        vy,
        ax,
        ay,
        jx,
        jy,
        speed,
    })
}

pub fn estimate_derivatives(recording: &Recording, cfg: &SmoothingConfig) -> Result<KinematicSeries> {
    estimate_from_samples(recording.samples(), cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryReason {
    PenDown,
    PenUp,
    ZeroCrossingVy,
    RecordingEdge,
}

/// A contiguous run of samples `start..end` of one recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stroke {
    pub start: usize,
    pub end: usize,
    pub kind: TraitKind,
    pub start_reason: BoundaryReason,
    pub end_reason: BoundaryReason,
}

impl Stroke {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }

    pub fn samples<'a>(&self, samples: &'a [PenSample]) -> &'a [PenSample] {
        &samples[self.range()]
    }
}

#[derive(Debug, Clone, Copy)]
struct Run {
    start: usize,
    end: usize,
    kind: TraitKind,
}

fn status_runs(samples: &[PenSample]) -> Vec<Run> {
    let mut runs: Vec<Run> = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if r.kind == s.status => r.end = i + 1,
            _ => runs.push(Run {
                start: i,
                end: i + 1,
                kind: s.status,
            }),
        }
    }
    // single-sample runs cannot form a stroke: fold them into a neighbour
    while runs.len() > 1 {
        let Some(i) = runs.iter().position(|r| r.end - r.start == 1) else {
            break;
        };
        if i > 0 {
            runs[i - 1].end = runs[i].end;
        } else {
            runs[1].start = runs[0].start;
        }
        runs.remove(i);
        let mut merged: Vec<Run> = Vec::with_capacity(runs.len());
        for r in runs.drain(..) {
            match merged.last_mut() {
                Some(m) if m.kind == r.kind => m.end = r.end,
                _ => merged.push(r),
            }
        }
        runs = merged;
    }
    runs
}

/// Indices inside `start..end` where vy takes a strict sign opposite to the
/// last non-zero sign seen in the run. Zero samples never trigger a split.
fn zero_crossings(vy: &[f64], start: usize, end: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut last_sign = 0.0;
    for (i, &v) in vy.iter().enumerate().take(end).skip(start) {
        let sign = if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        };
        if sign != 0.0 {
            if last_sign != 0.0 && sign != last_sign {
                out.push(i);
            }
            last_sign = sign;
        }
    }
    out
}

pub fn segment_strokes(recording: &Recording, series: &KinematicSeries, cfg: &SmoothingConfig) -> Vec<Stroke> {
    segment_samples(recording.samples(), series, cfg)
}

pub fn segment_samples(samples: &[PenSample], series: &KinematicSeries, cfg: &SmoothingConfig) -> Vec<Stroke> {
    assert_eq!(samples.len(), series.len(), "series not aligned to recording");
    let n = samples.len();
    let covered = |start: usize, end: usize| {
        if end < n {
            samples[end].t - samples[start].t
        } else {
            samples[end - 1].t - samples[start].t
        }
    };

    let runs = status_runs(samples);
    let mut strokes = Vec::new();
    for (ri, run) in runs.iter().enumerate() {
        let mut cuts = vec![run.start];
        if run.kind == TraitKind::OnPaper || cfg.split_in_air {
            cuts.extend(zero_crossings(&series.vy, run.start, run.end));
        }
        cuts.push(run.end);

        let mut pieces: Vec<(usize, usize)> = Vec::new();
        for w in cuts.windows(2) {
            let (s, e) = (w[0], w[1]);
            let short = e - s < 2 || covered(s, e) < cfg.min_stroke_duration_ms;
            match pieces.last_mut() {
                Some(last) if short => last.1 = e,
                _ => pieces.push((s, e)),
            }
        }
        if pieces.len() > 1 {
            let (s, e) = pieces[0];
            if e - s < 2 || covered(s, e) < cfg.min_stroke_duration_ms {
                pieces[1].0 = s;
                pieces.remove(0);
            }
        }

        let opening = if run.start == 0 {
            BoundaryReason::RecordingEdge
        } else {
            match run.kind {
                TraitKind::OnPaper => BoundaryReason::PenDown,
                TraitKind::InAir => BoundaryReason::PenUp,
            }
        };
        let closing = match runs.get(ri + 1) {
            None => BoundaryReason::RecordingEdge,
            Some(next) => match next.kind {
                TraitKind::OnPaper => BoundaryReason::PenDown,
                TraitKind::InAir => BoundaryReason::PenUp,
            },
        };
        let last = pieces.len() - 1;
        for (pi, (s, e)) in pieces.into_iter().enumerate() {
            strokes.push(Stroke {
                start: s,
                end: e,
                kind: run.kind,
                start_reason: if pi == 0 { opening } else { BoundaryReason::ZeroCrossingVy },
                end_reason: if pi == last { closing } else { BoundaryReason::ZeroCrossingVy },
            });
        }
    }
    strokes
}

/// Stable partition into (on-paper, in-air) strokes.
pub fn split_by_kind(strokes: &[Stroke]) -> (Vec<Stroke>, Vec<Stroke>) {
    strokes.iter().partition(|s| s.kind == TraitKind::OnPaper)
}

/// Derivatives plus strokes for one recording.
pub fn analyze(recording: &Recording, cfg: &SmoothingConfig) -> Result<(KinematicSeries, Vec<Stroke>)> {
    let series = estimate_derivatives(recording, cfg)?;
    let strokes = segment_strokes(recording, &series, cfg);
    Ok((series, strokes))
}
