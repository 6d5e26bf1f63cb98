//! Deterministic synthetic studies for end-to-end testing.
//!
//! Each word is written as a chain of letters, each letter a polyline of two
//! to four minimum-jerk strokes (`s(u) = 10u^3 - 15u^4 + 6u^5`). Letters with
//! ascenders or descenders reach above or below the x-height. The pen
//! approaches the first letter and leaves after the last one in the air, and
//! a Poisson number of in-air bridges replace on-paper ligatures between
//! letters, so every recording has both trait kinds.
//!
//! A cohort profile shapes the motion: base speed, a tremor sinusoid, an
//! enveloped ripple across each stroke whose size grows with `jerk_gain`, and
//! coordinate noise. Participants also vary in speed, size, slant and
//! pressure. Every random draw derives from the recipe seed, the participant
//! id and the task.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::digest_of;
use crate::features::FeatureVector;
use crate::ink_model::{Cohort, Participant, PenSample, Recording, Sex, Study, TaskSpec, TraitKind, Work};
use crate::seed;

pub const SAMPLE_PERIOD_MS: f64 = 5.0;
pub const X_HEIGHT: f64 = 200.0;
pub const LETTER_WIDTH: f64 = 120.0;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Relative size of the jerk ripple per unit of `jerk_gain - 1`.
const RIPPLE_PER_GAIN: f64 = 0.03;
const RIPPLE_CYCLES: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortProfile {
    /// Mean path speed, units/ms.
    pub base_speed: f64,
    pub tremor_amplitude: f64,
    pub tremor_freq: f64,
    /// Expected pen-ups between letters per word.
    pub pause_rate: f64,
    pub jerk_gain: f64,
    pub noise_sigma: f64,
    /// Extra speed factor for in-air movement only.
    pub air_speed_factor: f64,
    /// Extra jerk gain for in-air movement only.
    pub air_jerk_gain: f64,
}

impl Default for CohortProfile {
    fn default() -> Self {
        CohortProfile {
            base_speed: 1.0,
            tremor_amplitude: 0.0,
            tremor_freq: 6.0,
            pause_rate: 1.5,
            jerk_gain: 1.0,
            noise_sigma: 0.3,
            air_speed_factor: 1.0,
            air_jerk_gain: 1.0,
        }
    }
}

impl CohortProfile {
    fn validate(&self, name: &str) -> Result<()> {
        let fields = [
            ("base_speed", self.base_speed),
            ("tremor_amplitude", self.tremor_amplitude),
            ("tremor_freq", self.tremor_freq),
            ("pause_rate", self.pause_rate),
            ("jerk_gain", self.jerk_gain),
            ("noise_sigma", self.noise_sigma),
            ("air_speed_factor", self.air_speed_factor),
            ("air_jerk_gain", self.air_jerk_gain),
        ];
        for (field, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("profiles.{name}.{field} must be a non-negative number, got {v}")));
            }
        }
        for (field, v) in [("base_speed", self.base_speed), ("air_speed_factor", self.air_speed_factor)] {
            if v == 0.0 {
                return Err(Error::Config(format!("profiles.{name}.{field} must be positive")));
            }
        }
        if self.tremor_amplitude > 0.0 && !(3.0..=12.0).contains(&self.tremor_freq) {
            return Err(Error::Config(format!(
                "profiles.{name}.tremor_freq must lie in [3, 12] Hz when tremor_amplitude > 0, got {}",
                self.tremor_freq
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profiles {
    #[serde(rename = "HC")]
    pub hc: CohortProfile,
    #[serde(rename = "AD")]
    pub ad: CohortProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyRecipe {
    pub n_per_cohort: usize,
    pub seed: u64,
    pub tasks: Vec<u8>,
    /// Standard deviation of the per-participant log speed factor.
    pub speed_spread: f64,
    pub profiles: Profiles,
}

impl Default for StudyRecipe {
    /// 90 + 90 participants; AD writes at half speed with three times the
    /// jerk gain.
    fn default() -> Self {
        StudyRecipe {
            n_per_cohort: 90,
            seed: 1,
            tasks: (1..=6).collect(),
            speed_spread: 0.15,
            profiles: Profiles {
                hc: CohortProfile::default(),
                ad: CohortProfile {
                    base_speed: 0.5,
                    jerk_gain: 3.0,
                    ..CohortProfile::default()
                },
            },
        }
    }
}

impl StudyRecipe {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_cohort == 0 {
            return Err(Error::Config("n_per_cohort must be at least 1".into()));
        }
        if self.tasks.is_empty() {
            return Err(Error::Config("tasks must list at least one task".into()));
        }
        for &t in &self.tasks {
            TaskSpec::new(t).map_err(|_| Error::Config(format!("tasks: {t} is not a task id in 1..=6")))?;
        }
        if !(self.speed_spread >= 0.0) {
            return Err(Error::Config("speed_spread must be non-negative".into()));
        }
        self.profiles.hc.validate("HC")?;
        self.profiles.ad.validate("AD")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let recipe: StudyRecipe = toml::from_str(text).map_err(|e| Error::Config(format!("recipe: {e}")))?;
        recipe.validate()?;
        Ok(recipe)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("recipes serialize")
    }

    pub fn digest(&self) -> String {
        digest_of(self)
    }

    pub fn profile(&self, cohort: Cohort) -> &CohortProfile {
        match cohort {
            Cohort::Hc => &self.profiles.hc,
            Cohort::Ad => &self.profiles.ad,
        }
    }
}

/// Per-participant writing style drawn once and shared by all tasks.
#[derive(Debug, Clone, Copy)]
struct Style {
    speed: f64,
    size: f64,
    shear: f64,
    pressure: f64,
    tremor_phase: (f64, f64),
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    from: (f64, f64),
    to: (f64, f64),
    kind: TraitKind,
    /// Height of an upward arc added to in-air bridges.
    arc: f64,
}

fn min_jerk(u: f64) -> f64 {
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

/// Letter polyline in units of (letter width, x-height), starting at the
/// baseline origin.
fn letter_template(c: char) -> &'static [(f64, f64)] {
    match c {
        'l' | 't' | 'f' | 'h' | 'k' | 'b' | 'd' => &[(0.0, 0.0), (0.3, 2.4), (0.5, 0.0), (0.8, 0.6)],
        'p' | 'g' | 'q' | 'j' | 'y' => &[(0.0, 0.0), (0.25, 1.0), (0.35, -1.3), (0.7, 0.7)],
        'm' | 'n' => &[(0.0, 0.0), (0.2, 1.0), (0.4, 0.0), (0.7, 0.95), (0.95, 0.0)],
        'i' => &[(0.0, 0.0), (0.3, 1.0), (0.55, 0.0)],
        _ => &[(0.0, 0.0), (0.3, 1.0), (0.55, 0.05), (0.85, 0.7)],
    }
}

/// Path of one word: approach, letters, ligatures or bridges, departure.
fn word_path<R: Rng>(word: &str, style: &Style, profile: &CohortProfile, rng: &mut R) -> Vec<Segment> {
    let scale = style.size;
    let place = |x: f64, y: f64| (x + style.shear * y, y);
    let jitter = Normal::new(0.0, 0.04).unwrap();

    let letters: Vec<Vec<(f64, f64)>> = {
        let mut cursor = 0.0;
        word.chars()
            .map(|c| {
                let pts: Vec<(f64, f64)> = letter_template(c)
                    .iter()
                    .map(|&(u, v)| {
                        let x = cursor + (u + jitter.sample(rng)) * LETTER_WIDTH * scale;
                        let y = (v + jitter.sample(rng)) * X_HEIGHT * scale;
                        place(x, y)
                    })
                    .collect();
                cursor += LETTER_WIDTH * scale * 1.1;
                pts
            })
            .collect()
    };

    let gaps = letters.len().saturating_sub(1);
    let n_lifts = if profile.pause_rate > 0.0 {
        (Poisson::new(profile.pause_rate).unwrap().sample(rng) as usize).min(gaps)
    } else {
        0
    };
    let lifted: Vec<usize> = rand::seq::index::sample(rng, gaps.max(1), n_lifts.min(gaps.max(1)))
        .into_vec()
        .into_iter()
        .filter(|&g| g < gaps)
        .collect();

    let mut segs = Vec::new();
    let first = letters[0][0];
    segs.push(Segment {
        from: (first.0 - 0.6 * LETTER_WIDTH * scale, first.1 + 1.5 * X_HEIGHT * scale),
        to: first,
        kind: TraitKind::InAir,
        arc: 0.0,
    });
    for (li, pts) in letters.iter().enumerate() {
        for w in pts.windows(2) {
            segs.push(Segment {
                from: w[0],
                to: w[1],
                kind: TraitKind::OnPaper,
                arc: 0.0,
            });
        }
        if li + 1 < letters.len() {
            let (from, to) = (*pts.last().unwrap(), letters[li + 1][0]);
            let kind = if lifted.contains(&li) { TraitKind::InAir } else { TraitKind::OnPaper };
            let arc = if kind == TraitKind::InAir { 0.8 * X_HEIGHT * scale } else { 0.0 };
            segs.push(Segment { from, to, kind, arc });
        }
    }
    let last = *letters.last().unwrap().last().unwrap();
    segs.push(Segment {
        from: last,
        to: (last.0 + 0.6 * LETTER_WIDTH * scale, last.1 + 1.5 * X_HEIGHT * scale),
        kind: TraitKind::InAir,
        arc: 0.0,
    });
    segs
}

fn path_length(s: &Segment) -> f64 {
    let (dx, dy) = (s.to.0 - s.from.0, s.to.1 - s.from.1);
    // the arc adds roughly twice its height of vertical travel
    (dx * dx + dy * dy).sqrt() + 2.0 * s.arc
}

/// Samples one recording of `word` at the nominal 200 Hz.
fn render<R: Rng>(word: &str, style: &Style, profile: &CohortProfile, rng: &mut R) -> Vec<PenSample> {
    let segs = word_path(word, style, profile, rng);
    let noise = Normal::new(0.0, profile.noise_sigma.max(1e-300)).unwrap();
    let pressure_noise = Normal::new(0.0, 0.05).unwrap();
    let mut samples = Vec::new();
    let mut step = 0u64;

    let round3 = |v: f64| (v * 1000.0).round() / 1000.0;
    let emit = |seg: &Segment, u: f64, gain: f64, length: f64, rng: &mut R, step: &mut u64| {
        let t = *step as f64 * SAMPLE_PERIOD_MS;
        *step += 1;
        let s = min_jerk(u);
        let (dx, dy) = (seg.to.0 - seg.from.0, seg.to.1 - seg.from.1);
        let mut x = seg.from.0 + s * dx;
        let mut y = seg.from.1 + s * dy + seg.arc * (PI * s).sin();
        let chord = (dx * dx + dy * dy).sqrt().max(1e-9);
        let ripple = RIPPLE_PER_GAIN * (gain - 1.0) * length
            * (2.0 * PI * RIPPLE_CYCLES * u).sin()
            * (PI * u).sin().powi(2);
        x += ripple * (-dy / chord);
        y += ripple * (dx / chord);
        let w = 2.0 * PI * profile.tremor_freq * t / 1000.0;
        x += profile.tremor_amplitude * (w + style.tremor_phase.0).sin();
        y += profile.tremor_amplitude * (w + style.tremor_phase.1).sin();
        if profile.noise_sigma > 0.0 {
            x += noise.sample(rng);
            y += noise.sample(rng);
        }
        let pressure = match seg.kind {
            TraitKind::InAir => 0.0,
            TraitKind::OnPaper => {
                let p = style.pressure * (0.85 + 0.15 * (PI * u).sin()) * (1.0 + pressure_noise.sample(rng));
                round3(p.max(1.0))
            }
        };
        PenSample {
            t,
            x: round3(x),
            y: round3(y),
            pressure,
            status: seg.kind,
        }
    };

    for (i, seg) in segs.iter().enumerate() {
        let (speed, gain) = match seg.kind {
            TraitKind::OnPaper => (style.speed, profile.jerk_gain),
            TraitKind::InAir => (
                style.speed * profile.air_speed_factor,
                1.0 + (profile.jerk_gain - 1.0) + (profile.air_jerk_gain - 1.0),
            ),
        };
        let length = path_length(seg);
        let m = ((length / speed / SAMPLE_PERIOD_MS).round() as usize).max(4);
        for k in 0..m {
            let u = k as f64 / m as f64;
            samples.push(emit(seg, u, gain, length, rng, &mut step));
        }
        if i + 1 == segs.len() {
            samples.push(emit(seg, 1.0, gain, length, rng, &mut step));
        }
    }
    samples
}

fn participant_id(cohort: Cohort, index: usize) -> String {
    format!("{}{:03}", cohort.as_str(), index + 1)
}

fn draw_participant<R: Rng>(id: String, cohort: Cohort, rng: &mut R) -> Participant {
    let sex = if rng.random_bool(0.5) { Sex::F } else { Sex::M };
    let work = if rng.random_bool(0.5) { Work::Intellectual } else { Work::Manual };
    let age = rng.random_range(60..=85);
    let education = rng.random_range(5..=18);
    Participant::new(id, cohort, sex, age, work, education).expect("drawn covariates are valid")
}

fn draw_style<R: Rng>(recipe: &StudyRecipe, profile: &CohortProfile, rng: &mut R) -> Style {
    let lognormal = |sd: f64, rng: &mut R| Normal::new(0.0, sd).map_or(1.0, |n| n.sample(rng).exp());
    Style {
        speed: profile.base_speed * lognormal(recipe.speed_spread, rng),
        size: lognormal(0.1, rng),
        shear: Normal::new(0.25, 0.08).unwrap().sample(rng),
        pressure: 300.0 * lognormal(0.15, rng),
        tremor_phase: (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)),
    }
}

/// Generates participants (HC first, then AD) and one recording per
/// participant and task.
pub fn generate_study(recipe: &StudyRecipe) -> Result<Study> {
    recipe.validate()?;
    let tasks: Vec<TaskSpec> = recipe.tasks.iter().map(|&t| TaskSpec::new(t)).collect::<Result<_>>()?;
    let people: Vec<(Cohort, usize)> = [Cohort::Hc, Cohort::Ad]
        .into_iter()
        .flat_map(|c| (0..recipe.n_per_cohort).map(move |i| (c, i)))
        .collect();
    let generated: Vec<(Participant, Vec<Recording>)> = people
        .par_iter()
        .map(|&(cohort, i)| {
            let id = participant_id(cohort, i);
            let pseed = seed::derive(recipe.seed, &["participant", &id]);
            let mut rng = seed::rng(pseed);
            let participant = draw_participant(id.clone(), cohort, &mut rng);
            let profile = recipe.profile(cohort);
            let style = draw_style(recipe, profile, &mut rng);
            let recordings = tasks
                .iter()
                .map(|task| {
                    let mut trng = seed::rng(seed::derive(pseed, &["task", &task.task_id.to_string()]));
                    let samples = render(&task.word, &style, profile, &mut trng);
                    Recording::new(id.clone(), task.task_id, samples)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((participant, recordings))
        })
        .collect::<Result<_>>()?;
    let mut study = Study::default();
    for (p, recs) in generated {
        study.participants.push(p);
        study.recordings.extend(recs);
    }
    Ok(study)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub recipe: StudyRecipe,
    pub recipe_digest: String,
    pub files: Vec<String>,
}

/// Generates the study into `dir` and writes `manifest.json` beside it.
pub fn write_study(recipe: &StudyRecipe, dir: &Path) -> Result<Manifest> {
    let study = generate_study(recipe)?;
    let mut files = study.save(dir)?;
    files.sort();
    let manifest = Manifest {
        format: "inkscreen-synth-manifest/1".into(),
        recipe: recipe.clone(),
        recipe_digest: recipe.digest(),
        files,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Cohen's d of a feature, AD minus HC, with the pooled sample standard
/// deviation. Positive when AD values are larger.
pub fn pathology_contrast<'a>(vectors: impl IntoIterator<Item = &'a FeatureVector>, feature: &str) -> Result<f64> {
    let mut groups: BTreeMap<Cohort, Vec<f64>> = BTreeMap::new();
    for v in vectors {
        let value = v
            .get(feature)
            .ok_or_else(|| Error::Validation(format!("unknown feature {feature}")))?;
        groups.entry(v.label).or_default().push(value);
    }
    let stats = |c: Cohort| -> Result<(f64, f64, f64)> {
        let xs = groups
            .get(&c)
            .filter(|xs| xs.len() >= 2)
            .ok_or_else(|| Error::Validation(format!("need at least two {c} samples")))?;
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok((n, mean, var))
    };
    let (n1, m1, v1) = stats(Cohort::Ad)?;
    let (n0, m0, v0) = stats(Cohort::Hc)?;
    let pooled = (((n1 - 1.0) * v1 + (n0 - 1.0) * v0) / (n1 + n0 - 2.0)).sqrt();
    if pooled == 0.0 {
        return Ok(0.0);
    }
    Ok((m1 - m0) / pooled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract_study, FeatureSet};
    use crate::ink_model::validate_study;
    use crate::kinematics::SmoothingConfig;

    fn recipe(n: usize, s: u64) -> StudyRecipe {
        StudyRecipe {
            n_per_cohort: n,
            seed: s,
            ..StudyRecipe::default()
        }
    }

    #[test]
    fn min_jerk_profile_endpoints() {
        assert_eq!(min_jerk(0.0), 0.0);
        assert_eq!(min_jerk(1.0), 1.0);
        assert!((min_jerk(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_study() {
        let a = generate_study(&recipe(2, 3)).unwrap();
        let b = generate_study(&recipe(2, 3)).unwrap();
        assert_eq!(a.participants, b.participants);
        assert_eq!(a.recordings, b.recordings);
        let c = generate_study(&recipe(2, 4)).unwrap();
        assert_ne!(a.recordings, c.recordings);
    }

    #[test]
    fn cohort_counts_and_validity() {
        let r = StudyRecipe {
            tasks: vec![6],
            ..recipe(90, 1)
        };
        let study = generate_study(&r).unwrap();
        assert_eq!(study.participants.len(), 180);
        let ad = study.participants.iter().filter(|p| p.cohort == Cohort::Ad).count();
        assert_eq!(ad, 90);
        let report = validate_study(&study.recordings, &study.participants);
        assert!(report.is_clean(), "{:?}", report.issues);
        for rec in &study.recordings {
            assert!(rec.samples().iter().any(|s| s.status == TraitKind::InAir));
            assert!(rec.samples().windows(2).all(|w| w[1].t > w[0].t));
        }
    }

    #[test]
    fn recipe_errors_name_the_field() {
        let bad = "n_per_cohort = 2\n[profiles.HC]\ntremor_amplitude = 1.0\ntremor_freq = 20.0\n[profiles.AD]\n";
        let err = StudyRecipe::from_toml(bad).unwrap_err().to_string();
        assert!(err.contains("profiles.HC.tremor_freq"), "{err}");
        let unknown = "n_per_cohort = 2\nspeeed = 3\n";
        assert!(StudyRecipe::from_toml(unknown).unwrap_err().to_string().contains("speeed"));
        let round = StudyRecipe::from_toml(&StudyRecipe::default().to_toml()).unwrap();
        assert_eq!(round, StudyRecipe::default());
    }

    fn contrast(r: &StudyRecipe, feature: &str) -> f64 {
        let study = generate_study(r).unwrap();
        let (tables, _) = extract_study(&study, &SmoothingConfig::default());
        pathology_contrast(&tables[&FeatureSet::AL].rows, feature).unwrap()
    }

    #[test]
    fn jerk_gain_raises_normalized_jerk() {
        let r = StudyRecipe {
            tasks: vec![1, 5],
            profiles: Profiles {
                hc: CohortProfile::default(),
                ad: CohortProfile {
                    jerk_gain: 3.0,
                    ..CohortProfile::default()
                },
            },
            ..recipe(6, 0)
        };
        for s in 0..3 {
            let d = contrast(&StudyRecipe { seed: s, ..r.clone() }, "P_normalized_jerk");
            assert!(d > 0.5, "seed {s}: d = {d}");
        }
    }

    #[test]
    fn halved_speed_lowers_average_velocity() {
        let r = StudyRecipe {
            tasks: vec![2],
            profiles: Profiles {
                hc: CohortProfile::default(),
                ad: CohortProfile {
                    base_speed: 0.5,
                    ..CohortProfile::default()
                },
            },
            ..recipe(8, 2)
        };
        assert!(contrast(&r, "P_average_absolute_velocity") < -1.0);
    }

    #[test]
    fn unknown_feature_is_an_error() {
        let study = generate_study(&StudyRecipe { tasks: vec![1], ..recipe(2, 0) }).unwrap();
        let (tables, _) = extract_study(&study, &SmoothingConfig::default());
        assert!(pathology_contrast(&tables[&FeatureSet::A].rows, "P_pen_pressure").is_err());
    }
}
